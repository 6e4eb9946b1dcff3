//! Decay indicator and decay character of low-frequency data.
//!
//! For radial data `|v̂(ξ)| = a(|ξ|)` in `ℝⁿ` the shell mass is
//!
//! ```text
//! S(ρ) = ∫_{|ξ|≤ρ} |v̂|² dξ = ω_{n-1} ∫₀^ρ a(σ)² σ^{n-1} dσ,
//! ```
//!
//! the decay indicator is `P_r(ρ) = ρ^{-2r-n} S(ρ)`, and the decay character
//! `r*` is the exponent for which `P_r` has a finite positive limit as
//! `ρ → 0`. Numerically the limit is replaced by the log-log slope of `S`
//! over the lowest sampled decades: `r* = (slope - n)/2`.
//!
//! The same machinery drives a radial quadrature oracle for the linear flow
//! `v_t = -c(-Δ)^α v`, whose squared `L²` norm decays like
//! `(1+t)^{-(n/2 + r*)/α}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fit::least_squares_line;
use crate::spectral::{SpectralField, TorusGrid};

/// Minimum span of a radial profile, in decades.
pub const MIN_DECADES: f64 = 8.0;

/// Node density used by the stock profiles.
pub const DEFAULT_NODES_PER_DECADE: usize = 64;

/// Surface area `ω_{n-1} = 2π^{n/2}/Γ(n/2)` of the unit sphere in `ℝⁿ`.
pub fn sphere_area(dimension: usize) -> f64 {
    let half = dimension as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

type Rule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sampled radial Fourier amplitude `ρ ↦ |v̂(ρ)|`.
#[derive(Clone)]
pub struct RadialProfile {
    dimension: usize,
    nodes: Vec<f64>,
    amplitudes: Vec<f64>,
    rule: Option<Rule>,
    /// `∫₀^{ρ₀} a² σ^{n-1} dσ` from power-law extrapolation below the first node.
    head: f64,
    /// `∫_{ρ₀}^{ρ_j} a² σ^{n-1} dσ` at every node.
    cumulative: Vec<f64>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("dimension", &self.dimension)
            .field("nodes", &self.nodes.len())
            .field("range", &(self.nodes[0], self.nodes[self.nodes.len() - 1]))
            .field("has_rule", &self.rule.is_some())
            .finish()
    }
}

/// Integral of `g` over `[l0, l1]` in `ℓ = ln σ`, exact when `g` is a power
/// of `σ` on the segment.
fn segment_integral(l0: f64, l1: f64, g0: f64, g1: f64) -> f64 {
    let width = l1 - l0;
    if width == 0.0 {
        return 0.0;
    }
    if g0 > 0.0 && g1 > 0.0 {
        let q = (g1 / g0).ln() / width;
        if (q * width).abs() > 1e-8 {
            return (g1 - g0) / q;
        }
    }
    0.5 * width * (g0 + g1)
}

fn interpolate_loglog(l0: f64, l1: f64, g0: f64, g1: f64, l: f64) -> f64 {
    let theta = (l - l0) / (l1 - l0);
    if g0 > 0.0 && g1 > 0.0 {
        (g0.ln() + theta * (g1 / g0).ln()).exp()
    } else {
        g0 + theta * (g1 - g0)
    }
}

impl RadialProfile {
    pub fn new(dimension: usize, nodes: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if nodes.len() != amplitudes.len() {
            return Err(Error::InvalidArgument(
                "nodes and amplitudes differ in length".into(),
            ));
        }
        if nodes.len() < 2 {
            return Err(Error::InsufficientData("a profile needs at least 2 nodes".into()));
        }
        if nodes.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument("nodes must be positive and finite".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("nodes must be strictly increasing".into()));
        }
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument(
                "amplitudes must be finite and nonnegative".into(),
            ));
        }
        let span = (nodes[nodes.len() - 1] / nodes[0]).log10();
        if span < MIN_DECADES - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "nodes span {span:.2} decades, need at least {MIN_DECADES}"
            )));
        }

        let n = dimension as i32;
        let g: Vec<f64> = nodes
            .iter()
            .zip(&amplitudes)
            .map(|(r, a)| a * a * r.powi(n))
            .collect();
        let l: Vec<f64> = nodes.iter().map(|r| r.ln()).collect();
        let head = if g[0] == 0.0 {
            0.0
        } else {
            let p = if g[1] > 0.0 {
                (g[1] / g[0]).ln() / (l[1] - l[0])
            } else {
                dimension as f64
            };
            if p <= 0.0 {
                return Err(Error::InvalidArgument(
                    "profile is not square-integrable near the origin".into(),
                ));
            }
            g[0] / p
        };
        let mut cumulative = Vec::with_capacity(g.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for j in 1..g.len() {
            acc += segment_integral(l[j - 1], l[j], g[j - 1], g[j]);
            cumulative.push(acc);
        }
        Ok(Self {
            dimension,
            nodes,
            amplitudes,
            rule: None,
            head,
            cumulative,
        })
    }

    /// Samples `rule` on log-spaced nodes `ρ_min·10^{i/per_decade}` up to
    /// `ρ_max`, keeping the rule alongside the samples.
    pub fn from_fn<F>(
        dimension: usize,
        rho_min: f64,
        rho_max: f64,
        per_decade: usize,
        rule: F,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(rho_min > 0.0 && rho_max > rho_min) || per_decade == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid node range [{rho_min}, {rho_max}] / {per_decade} per decade"
            )));
        }
        let start = rho_min.log10();
        let count = ((rho_max / rho_min).log10() * per_decade as f64).round() as usize;
        let nodes: Vec<f64> = (0..=count)
            .map(|i| 10f64.powf(start + i as f64 / per_decade as f64))
            .collect();
        let amplitudes = nodes.iter().map(|&r| rule(r)).collect();
        let mut profile = Self::new(dimension, nodes, amplitudes)?;
        profile.rule = Some(Arc::new(rule));
        Ok(profile)
    }

    /// `a(σ) = σ^r` for `σ ≤ cutoff`, zero beyond; nodes on `[10⁻¹⁰, 10²]`.
    pub fn power_law(dimension: usize, r: f64, cutoff: f64) -> Result<Self> {
        Self::from_fn(dimension, 1e-10, 1e2, DEFAULT_NODES_PER_DECADE, move |s| {
            if s <= cutoff {
                s.powf(r)
            } else {
                0.0
            }
        })
    }

    /// Transform of the Gaussian `e^{-|x|²/2}` in `ℝⁿ`:
    /// `a(ρ) = (2π)^{n/2} e^{-ρ²/2}`.
    pub fn gaussian_datum(dimension: usize) -> Result<Self> {
        let scale = (2.0 * PI).powf(dimension as f64 / 2.0);
        Self::from_fn(dimension, 1e-10, 1e2, DEFAULT_NODES_PER_DECADE, move |s| {
            scale * (-0.5 * s * s).exp()
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Closed-form amplitude, when the profile was built from one.
    pub fn evaluate_rule(&self, rho: f64) -> Option<f64> {
        self.rule.as_ref().map(|f| f(rho))
    }

    /// Same nodes, amplitudes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.dimension,
            self.nodes.clone(),
            self.amplitudes.iter().map(|a| a * factor).collect(),
        )
    }

    fn integrand(&self, j: usize) -> f64 {
        self.amplitudes[j].powi(2) * self.nodes[j].powi(self.dimension as i32)
    }

    /// Trapezoid weights in `ℓ = ln ρ`.
    fn log_trapezoid_weights(&self) -> Vec<f64> {
        let l: Vec<f64> = self.nodes.iter().map(|r| r.ln()).collect();
        let m = l.len();
        (0..m)
            .map(|j| {
                let left = if j > 0 { l[j] - l[j - 1] } else { 0.0 };
                let right = if j + 1 < m { l[j + 1] - l[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// `‖v‖²_{L²} = (2π)^{-n} ∫ |v̂|² dξ`, by the same rule as
    /// [`radial_linear_evolution`].
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.log_trapezoid_weights();
        let sum: f64 = (0..self.nodes.len()).map(|j| w[j] * self.integrand(j)).sum();
        (2.0 * PI).powi(-(self.dimension as i32)) * sphere_area(self.dimension) * (sum + self.head)
    }
}

/// `S(ρ) = ∫_{B(ρ)} |v̂|² dξ`.
pub fn shell_mass(profile: &RadialProfile, rho: f64) -> Result<f64> {
    let nodes = &profile.nodes;
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    if !(rho >= lo && rho <= hi) {
        return Err(Error::OutOfRange {
            value: rho,
            min: lo,
            max: hi,
        });
    }
    let j = nodes.partition_point(|&x| x <= rho).saturating_sub(1);
    let mut inner = profile.head + profile.cumulative[j];
    if rho > nodes[j] && j + 1 < nodes.len() {
        let (l0, l1, l) = (nodes[j].ln(), nodes[j + 1].ln(), rho.ln());
        let (g0, g1) = (profile.integrand(j), profile.integrand(j + 1));
        let g = interpolate_loglog(l0, l1, g0, g1, l);
        inner += segment_integral(l0, l, g0, g);
    }
    Ok(sphere_area(profile.dimension) * inner)
}

/// Pre-limit decay indicator `P_r(ρ) = ρ^{-2r-n} S(ρ)`.
pub fn decay_indicator(profile: &RadialProfile, r: f64, rho: f64) -> Result<f64> {
    let n = profile.dimension as f64;
    if r <= -n / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "indicator order r = {r} must exceed -n/2 = {}",
            -n / 2.0
        )));
    }
    Ok(rho.powf(-2.0 * r - n) * shell_mass(profile, rho)?)
}

/// Samples of `P_r(ρ)` with `ρ` decreasing toward the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayIndicatorCurve {
    pub r: f64,
    pub samples: Vec<(f64, f64)>,
}

pub fn decay_indicator_curve(
    profile: &RadialProfile,
    r: f64,
    radii: &[f64],
) -> Result<DecayIndicatorCurve> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let samples = sorted
        .into_iter()
        .map(|rho| Ok((rho, decay_indicator(profile, r, rho)?)))
        .collect::<Result<_>>()?;
    Ok(DecayIndicatorCurve { r, samples })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayCharacter {
    Finite(f64),
    /// `P_r = ∞` for every admissible `r`; the decay character is `-n/2`.
    MinusHalfDimension,
    /// `P_r = 0` for every admissible `r`.
    Infinite,
}

impl DecayCharacter {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            DecayCharacter::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Numeric value with the sentinels mapped to `-n/2` and `+∞`.
    pub fn value(&self, dimension: usize) -> f64 {
        match *self {
            DecayCharacter::Finite(r) => r,
            DecayCharacter::MinusHalfDimension => -(dimension as f64) / 2.0,
            DecayCharacter::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCharacterEstimate {
    pub r_star: DecayCharacter,
    pub fit_window: (f64, f64),
    /// RMS residual of the log-log fit.
    pub slope_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Width of the fit window above the smallest node, in decades.
    pub decades: f64,
    /// Number of consecutive sub-windows used to detect drift of the slope.
    pub sub_windows: usize,
    /// Spread of sub-window estimates (in units of `r`) beyond which the
    /// slope is considered to drift.
    pub drift_tolerance: f64,
    /// Estimates within this distance of `-n/2` are reported as the
    /// `-n/2` sentinel.
    pub boundary_tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            decades: 2.0,
            sub_windows: 4,
            drift_tolerance: 0.1,
            boundary_tolerance: 0.05,
        }
    }
}

fn order_from_slope(slope: f64, dimension: usize) -> f64 {
    (slope - dimension as f64) / 2.0
}

pub fn estimate_decay_character(profile: &RadialProfile) -> Result<DecayCharacterEstimate> {
    estimate_decay_character_with(profile, &EstimatorConfig::default())
}

pub fn estimate_decay_character_with(
    profile: &RadialProfile,
    config: &EstimatorConfig,
) -> Result<DecayCharacterEstimate> {
    let lo = profile.nodes[0];
    let hi = lo * 10f64.powf(config.decades);
    let count = profile
        .nodes
        .iter()
        .take_while(|&&r| r <= hi * (1.0 + 1e-12))
        .count();
    if count < 3 {
        return Err(Error::InsufficientData(format!(
            "{count} nodes inside the fit window [{lo:e}, {hi:e}], need 3"
        )));
    }
    let masses: Vec<(f64, f64)> = profile.nodes[..count]
        .iter()
        .map(|&r| Ok((r, shell_mass(profile, r)?)))
        .collect::<Result<_>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = masses
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(r, s)| (r.ln(), s.ln()))
        .unzip();
    if x.is_empty() {
        return Err(Error::ZeroMass);
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(
            "fewer than 3 nodes with positive shell mass in the fit window".into(),
        ));
    }
    let fit = least_squares_line(&x, &y)?;
    let n = profile.dimension;
    let r = order_from_slope(fit.slope, n);

    let per = x.len() / config.sub_windows.max(1);
    let sub: Vec<f64> = if config.sub_windows >= 2 && per >= 3 {
        (0..config.sub_windows)
            .filter_map(|i| {
                let range = i * per..((i + 1) * per).min(x.len());
                least_squares_line(&x[range.clone()], &y[range])
                    .ok()
                    .map(|f| order_from_slope(f.slope, n))
            })
            .collect()
    } else {
        Vec::new()
    };
    let spread = sub
        .iter()
        .fold(None::<(f64, f64)>, |acc, &v| match acc {
            None => Some((v, v)),
            Some((a, b)) => Some((a.min(v), b.max(v))),
        })
        .map_or(0.0, |(a, b)| b - a);
    let rising_toward_origin = sub.windows(2).all(|w| w[0] > w[1]);
    let falling_toward_origin = sub.windows(2).all(|w| w[0] < w[1]);

    let r_star = if spread > config.drift_tolerance && rising_toward_origin {
        DecayCharacter::Infinite
    } else if r <= -(n as f64) / 2.0 + config.boundary_tolerance
        || (spread > config.drift_tolerance && falling_toward_origin)
    {
        DecayCharacter::MinusHalfDimension
    } else {
        DecayCharacter::Finite(r)
    };
    Ok(DecayCharacterEstimate {
        r_star,
        fit_window: (lo, profile.nodes[count - 1]),
        slope_residual: fit.rms_residual,
    })
}

/// Lattice modes sharing one value of `|k|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeShell {
    pub radius: f64,
    pub modes: usize,
    /// `Σ_{shell} |ξ|^{2·order} |v̂|²`.
    pub mass: f64,
}

impl LatticeShell {
    /// Shell average of `|ξ|^{2·order} |v̂|²`, the lattice analogue of `a(ρ)²`.
    pub fn mean_density(&self) -> f64 {
        self.mass / self.modes as f64
    }
}

/// Occupied shells of `|ξ|^order v̂` in order of increasing radius, the zero
/// mode excluded.
pub fn lattice_shells(v: &SpectralField, order: f64) -> Vec<LatticeShell> {
    let grid = v.grid;
    let half = grid.points_per_dim() as i64 / 2;
    let size = (4 * half * half + 1) as usize;
    let mut mass = vec![0.0; size];
    let mut modes = vec![0usize; size];
    for (i, c) in v.coeffs.iter().enumerate().skip(1) {
        let k2: i64 = grid.wavevector(i).iter().map(|x| x * x).sum();
        mass[k2 as usize] += grid.xi_sq(i).powf(order) * c.norm_sqr();
        modes[k2 as usize] += 1;
    }
    let dxi = grid.frequency_spacing();
    (1..size)
        .filter(|&k2| modes[k2] > 0)
        .map(|k2| LatticeShell {
            radius: dxi * (k2 as f64).sqrt(),
            modes: modes[k2],
            mass: mass[k2],
        })
        .collect()
}

/// Cumulative lattice shell masses `(ρ, L⁻⁴ Σ_{0<|ξ_k|≤ρ} |ξ_k|^{2·order} |v̂_k|²)`.
pub fn lattice_shell_masses(v: &SpectralField, order: f64) -> Vec<(f64, f64)> {
    let weight = v.grid.mode_weight();
    let mut acc = 0.0;
    lattice_shells(v, order)
        .into_iter()
        .map(|s| {
            acc += s.mass;
            (s.radius, weight * acc)
        })
        .collect()
}

/// Decay character of `|ξ|^order v̂` from the lattice shells with radii in
/// `window`.
///
/// The handful of shells near the origin hold too few lattice points for the
/// cumulative mass to follow `ρ^{2r+4}`, so the fit uses the shell-averaged
/// density instead: `a(ρ)² ~ ρ^{2r}` is the radial derivative of the same
/// law, and `r = slope/2`.
pub fn estimate_lattice_decay_character(
    v: &SpectralField,
    order: f64,
    window: (f64, f64),
) -> Result<DecayCharacterEstimate> {
    let shells: Vec<LatticeShell> = lattice_shells(v, order)
        .into_iter()
        .filter(|s| s.radius >= window.0 && s.radius <= window.1)
        .collect();
    if shells.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} lattice shells inside [{}, {}], need 3",
            shells.len(),
            window.0,
            window.1
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = shells
        .iter()
        .filter(|s| s.mass > 0.0)
        .map(|s| (s.radius.ln(), s.mean_density().ln()))
        .unzip();
    if x.is_empty() {
        return Err(Error::ZeroMass);
    }
    let fit = least_squares_line(&x, &y)?;
    Ok(DecayCharacterEstimate {
        r_star: DecayCharacter::Finite(fit.slope / 2.0),
        fit_window: (shells[0].radius, shells[shells.len() - 1].radius),
        slope_residual: fit.rms_residual,
    })
}

/// Decay character of data in `Lᵖ ∩ L²`, `1 < p < 2`, and in no smaller
/// Lebesgue space: `-n(1 - 1/p)`.
pub fn classify_lp(p: f64, dimension: usize) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (1, 2)")));
    }
    Ok(-(dimension as f64) * (1.0 - 1.0 / p))
}

/// Decay character of data in the weighted space `L^{1,γ}`: `γ` for zero
/// mean, `0` otherwise.
pub fn classify_weighted(gamma: f64, zero_mean: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("γ = {gamma} outside [0, 1]")));
    }
    Ok(if zero_mean { gamma } else { 0.0 })
}

/// Scalar dissipative symbol `-c|ξ|^{2α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationSymbol {
    c: f64,
    alpha: f64,
}

impl DissipationSymbol {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("c = {c} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("α = {alpha} outside (0, 1]")));
        }
        Ok(Self { c, alpha })
    }

    /// The heat operator, `c = 1`, `α = 1`.
    pub fn laplacian() -> Self {
        Self { c: 1.0, alpha: 1.0 }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Exponent `(n/2 + r*)/α` of the squared `L²` norm under the linear flow.
pub fn linear_decay_exponent(r_star: f64, symbol: &DissipationSymbol, dimension: usize) -> Result<f64> {
    let half = dimension as f64 / 2.0;
    if r_star <= -half {
        return Err(Error::InvalidArgument(format!(
            "r* = {r_star} must exceed -n/2 = {}",
            -half
        )));
    }
    Ok((half + r_star) / symbol.alpha)
}

/// `‖v(t)‖²_{L²} = (2π)^{-n} ω_{n-1} ∫ a(ρ)² e^{-2ctρ^{2α}} ρ^{n-1} dρ` at each
/// time, by the trapezoid rule in `ln ρ`.
pub fn radial_linear_evolution(
    profile: &RadialProfile,
    symbol: &DissipationSymbol,
    times: &[f64],
) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no evaluation times".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "times must be nonnegative and nondecreasing".into(),
        ));
    }
    if profile.amplitudes.iter().all(|a| *a == 0.0) {
        return Err(Error::InvalidArgument("empty profile (all amplitudes zero)".into()));
    }
    let n = profile.dimension;
    let prefactor = (2.0 * PI).powi(-(n as i32)) * sphere_area(n);
    let weights = profile.log_trapezoid_weights();
    let g: Vec<f64> = (0..profile.nodes.len()).map(|j| profile.integrand(j)).collect();
    let rates: Vec<f64> = profile
        .nodes
        .iter()
        .map(|r| 2.0 * symbol.c * r.powf(2.0 * symbol.alpha))
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            let body: f64 = (0..g.len())
                .filter(|&j| g[j] > 0.0)
                .map(|j| weights[j] * g[j] * (-rates[j] * t).exp())
                .sum();
            prefactor * (body + profile.head * (-rates[0] * t).exp())
        })
        .collect())
}

/// Shape of the low-pass window applied to synthesized data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffShape {
    /// `χ(s) = e^{-s²}`. With `ρ_c = 1` the linear flow of `Λu₀` then has
    /// squared norm exactly proportional to `(1+t)^{-(2+r)}` on `ℝ⁴`.
    Gaussian,
    /// `C^∞` bump equal to 1 on `[0, 1/2]` and 0 on `[1, ∞)`.
    Bump,
}

impl CutoffShape {
    pub fn evaluate(&self, s: f64) -> f64 {
        match self {
            CutoffShape::Gaussian => (-s * s).exp(),
            CutoffShape::Bump => {
                let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
                if s <= 0.5 {
                    1.0
                } else if s >= 1.0 {
                    0.0
                } else {
                    let a = psi(1.0 - s);
                    a / (a + psi(s - 0.5))
                }
            }
        }
    }
}

/// Lattice datum with `|û₀(ξ)| = amplitude · |ξ|^{r-1} · χ(|ξ|/ρ_c)`, so that
/// `|ξ||û₀| ~ |ξ|^r` near the origin, with a Gaussian window.
pub fn synthesize_datum(
    grid: &TorusGrid,
    r: f64,
    cutoff: f64,
    amplitude: f64,
) -> Result<SpectralField> {
    synthesize_datum_with(grid, r, cutoff, amplitude, CutoffShape::Gaussian)
}

pub fn synthesize_datum_with(
    grid: &TorusGrid,
    r: f64,
    cutoff: f64,
    amplitude: f64,
    shape: CutoffShape,
) -> Result<SpectralField> {
    if !(r > -2.0) {
        return Err(Error::InvalidArgument(format!(
            "r = {r} must exceed -2 for Λu₀ to be square-integrable near the origin"
        )));
    }
    if !(cutoff > 0.0 && cutoff < grid.axis_nyquist()) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} must lie in (0, {}) (below the axis Nyquist frequency)",
            grid.axis_nyquist()
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidArgument("amplitude must be finite".into()));
    }
    let mut field = SpectralField::zeros(*grid);
    if amplitude == 0.0 {
        return Ok(field);
    }
    let table = grid.xi_sq_table();
    for (i, c) in field.coeffs.iter_mut().enumerate().skip(1) {
        let rho = table[i].sqrt();
        let value = amplitude * rho.powf(r - 1.0) * shape.evaluate(rho / cutoff);
        *c = Complex64::new(value, 0.0);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn sphere_areas() {
        assert!(rel(sphere_area(4), 2.0 * PI * PI) < 1e-13);
        assert!(rel(sphere_area(3), 4.0 * PI) < 1e-13);
        assert!(rel(sphere_area(2), 2.0 * PI) < 1e-13);
    }

    #[test]
    fn profile_validation() {
        let nodes: Vec<f64> = (0..=90).map(|i| 10f64.powf(-8.0 + i as f64 / 10.0)).collect();
        let ones = vec![1.0; nodes.len()];
        assert!(RadialProfile::new(4, nodes.clone(), ones.clone()).is_ok());
        assert!(RadialProfile::new(4, nodes[..50].to_vec(), ones[..50].to_vec()).is_err());
        let mut bad = ones.clone();
        bad[3] = -1.0;
        assert!(RadialProfile::new(4, nodes.clone(), bad).is_err());
        let mut unsorted = nodes.clone();
        unsorted.swap(4, 5);
        assert!(RadialProfile::new(4, unsorted, ones.clone()).is_err());
        // a ~ σ^{-3} in ℝ⁴ is not square-integrable at the origin.
        let singular = nodes.iter().map(|r| r.powf(-3.0)).collect();
        assert!(RadialProfile::new(4, nodes, singular).is_err());
    }

    #[test]
    fn shell_mass_examples() {
        let flat = RadialProfile::power_law(4, 0.0, 1.0).unwrap();
        let linear = RadialProfile::power_law(4, 1.0, 1.0).unwrap();
        let zero = RadialProfile::from_fn(4, 1e-10, 1e2, 64, |_| 0.0).unwrap();
        for rho in [1e-9, 3.3e-5, 0.01, 0.5, 1.0] {
            let s = shell_mass(&flat, rho).unwrap();
            assert!(rel(s, PI * PI * rho.powi(4) / 2.0) < 1e-10, "flat {rho}");
            let s = shell_mass(&linear, rho).unwrap();
            assert!(rel(s, PI * PI * rho.powi(6) / 3.0) < 1e-10, "linear {rho}");
            assert_eq!(shell_mass(&zero, rho).unwrap(), 0.0);
        }
        assert!(shell_mass(&flat, 1e-11).is_err());
        assert!(shell_mass(&flat, 1e3).is_err());
    }

    #[test]
    fn indicator_examples() {
        for (r, limit) in [(0.0, PI * PI / 2.0), (1.0, PI * PI / 3.0)] {
            let p = RadialProfile::power_law(4, r, 1.0).unwrap();
            for rho in [1e-8, 1e-4, 0.1] {
                assert!(rel(decay_indicator(&p, r, rho).unwrap(), limit) < 1e-10);
            }
        }
        let zero = RadialProfile::from_fn(4, 1e-10, 1e2, 64, |_| 0.0).unwrap();
        assert_eq!(decay_indicator(&zero, 0.7, 1e-3).unwrap(), 0.0);
        let flat = RadialProfile::power_law(4, 0.0, 1.0).unwrap();
        for rho in [1e-6, 1e-3] {
            let p1 = decay_indicator(&flat, 1.0, rho).unwrap();
            assert!(rel(p1, PI * PI / (2.0 * rho * rho)) < 1e-10);
        }
        assert!(decay_indicator(&flat, -2.0, 1e-3).is_err());
        let curve = decay_indicator_curve(&flat, 0.0, &[1e-5, 1e-2, 1e-8]).unwrap();
        assert!(curve.samples.windows(2).all(|w| w[0].0 > w[1].0));
    }

    #[test]
    fn estimator_recovers_power_laws() {
        for r in [-1.0, 0.0, 1.0, 2.0] {
            let p = RadialProfile::power_law(4, r, 1.0).unwrap();
            let est = estimate_decay_character(&p).unwrap();
            let got = est.r_star.finite().unwrap();
            assert!((got - r).abs() < 0.05, "r = {r}: {got}");
            assert!(est.slope_residual < 1e-8);
        }
    }

    #[test]
    fn estimator_flat_and_gaussian() {
        let bounded = RadialProfile::from_fn(4, 1e-10, 1e2, 64, |s| 1.5 + (0.3 * s).sin()).unwrap();
        let est = estimate_decay_character(&bounded).unwrap();
        assert!(est.r_star.finite().unwrap().abs() < 0.05);
        let gauss = RadialProfile::gaussian_datum(4).unwrap();
        let est = estimate_decay_character(&gauss).unwrap();
        assert!(est.r_star.finite().unwrap().abs() < 0.05);
    }

    #[test]
    fn estimator_sentinels_and_errors() {
        // Super-polynomial flatness at the origin: P_r = 0 for every r.
        let flat_zero = RadialProfile::from_fn(4, 1e-2, 1e7, 64, |s| (-1.0 / s).exp()).unwrap();
        assert_eq!(
            estimate_decay_character(&flat_zero).unwrap().r_star,
            DecayCharacter::Infinite
        );
        // S(ρ) ~ 1/ln(1/ρ): P_r = ∞ for every r > -n/2.
        let log_mass = RadialProfile::from_fn(4, 1e-12, 1e-3, 64, |s: f64| {
            let l = (1.0 / s).ln();
            (1.0 / (l * l)).sqrt() * s.powi(-2)
        })
        .unwrap();
        assert_eq!(
            estimate_decay_character(&log_mass).unwrap().r_star,
            DecayCharacter::MinusHalfDimension
        );
        let zero = RadialProfile::from_fn(4, 1e-10, 1e2, 64, |_| 0.0).unwrap();
        assert!(matches!(estimate_decay_character(&zero), Err(Error::ZeroMass)));
        let sparse = RadialProfile::from_fn(4, 1e-10, 1e2, 1, |_| 1.0).unwrap();
        let one_decade = EstimatorConfig {
            decades: 1.0,
            ..EstimatorConfig::default()
        };
        assert!(matches!(
            estimate_decay_character_with(&sparse, &one_decade),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn classifiers() {
        assert!((classify_lp(4.0 / 3.0, 4).unwrap() + 1.0).abs() < 1e-15);
        assert!((classify_lp(1.5, 4).unwrap() + 4.0 / 3.0).abs() < 1e-15);
        assert!(classify_lp(1.0 + 1e-9, 4).unwrap().abs() < 1e-8);
        assert!(classify_lp(1.0, 4).is_err());
        assert!(classify_lp(2.0, 4).is_err());
        assert_eq!(classify_weighted(1.0, true).unwrap(), 1.0);
        assert_eq!(classify_weighted(0.5, false).unwrap(), 0.0);
        assert_eq!(classify_weighted(0.0, true).unwrap(), 0.0);
        assert!(classify_weighted(1.1, true).is_err());
        assert!(classify_weighted(-0.1, false).is_err());
    }

    #[test]
    fn linear_exponents() {
        let heat = DissipationSymbol::laplacian();
        let half = DissipationSymbol::new(1.0, 0.5).unwrap();
        assert_eq!(linear_decay_exponent(0.0, &heat, 4).unwrap(), 2.0);
        assert_eq!(linear_decay_exponent(-1.0, &heat, 4).unwrap(), 1.0);
        assert_eq!(linear_decay_exponent(0.0, &half, 4).unwrap(), 4.0);
        assert!(linear_decay_exponent(-2.0, &heat, 4).is_err());
        assert!(DissipationSymbol::new(1.0, 1.5).is_err());
        assert!(DissipationSymbol::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_closed_form() {
        let p = RadialProfile::gaussian_datum(4).unwrap();
        let times = [0.0, 0.1, 1.0, 10.0, 1e3, 1e6];
        let got = radial_linear_evolution(&p, &DissipationSymbol::laplacian(), &times).unwrap();
        for (t, v) in times.iter().zip(&got) {
            let exact = PI * PI / (1.0 + 2.0 * t).powi(2);
            assert!(rel(*v, exact) < 1e-8, "t = {t}: {v} vs {exact}");
        }
        assert_eq!(got[0], p.l2_norm_sq());
        assert!(got.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn evolution_errors() {
        let p = RadialProfile::gaussian_datum(4).unwrap();
        let heat = DissipationSymbol::laplacian();
        assert!(radial_linear_evolution(&p, &heat, &[]).is_err());
        assert!(radial_linear_evolution(&p, &heat, &[1.0, 0.5]).is_err());
        assert!(radial_linear_evolution(&p, &heat, &[-1.0]).is_err());
        let zero = RadialProfile::from_fn(4, 1e-10, 1e2, 64, |_| 0.0).unwrap();
        assert!(radial_linear_evolution(&zero, &heat, &[1.0]).is_err());
    }

    #[test]
    fn synthesized_datum_properties() {
        let g = TorusGrid::new(16, 16.0).unwrap();
        let d = synthesize_datum(&g, 0.5, 1.0, 2.0).unwrap();
        assert_eq!(d.mean_coefficient().norm(), 0.0);
        assert_eq!(d.hermitian_defect(), 0.0);
        let zero = synthesize_datum(&g, 0.5, 1.0, 0.0).unwrap();
        assert!(zero.coeffs.iter().all(|c| c.norm() == 0.0));
        assert!(synthesize_datum(&g, -2.0, 1.0, 1.0).is_err());
        assert!(synthesize_datum(&g, 0.0, 10.0, 1.0).is_err());
        let bump = synthesize_datum_with(&g, 0.0, 1.0, 1.0, CutoffShape::Bump).unwrap();
        assert_eq!(bump.hermitian_defect(), 0.0);
    }

    #[test]
    fn bump_cutoff_shape() {
        let b = CutoffShape::Bump;
        assert_eq!(b.evaluate(0.2), 1.0);
        assert_eq!(b.evaluate(0.5), 1.0);
        assert_eq!(b.evaluate(1.0), 0.0);
        let mid: Vec<f64> = (1..10).map(|i| b.evaluate(0.5 + i as f64 / 20.0)).collect();
        assert!(mid.windows(2).all(|w| w[1] < w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shell_mass_is_monotone(r in -1.5f64..2.5, k in 0usize..600) {
            let p = RadialProfile::power_law(4, r, 1.0).unwrap();
            let a = p.nodes()[k];
            let b = p.nodes()[k + 100];
            prop_assert!(shell_mass(&p, a).unwrap() <= shell_mass(&p, b).unwrap());
        }

        #[test]
        fn estimator_is_scale_covariant(r in -1.5f64..2.5, lambda in 1e-3f64..1e3) {
            let p = RadialProfile::power_law(4, r, 1.0).unwrap();
            let base = estimate_decay_character(&p).unwrap().r_star.finite().unwrap();
            let scaled = estimate_decay_character(&p.scaled(lambda).unwrap()).unwrap().r_star.finite().unwrap();
            prop_assert!((base - scaled).abs() < 1e-9);
        }

        #[test]
        fn indicator_constant_for_true_order(r in -1.5f64..2.5) {
            let p = RadialProfile::power_law(4, r, 1.0).unwrap();
            let lo = p.nodes()[0];
            let vals: Vec<f64> = (0..=128).map(|j| decay_indicator(&p, r, p.nodes()[j]).unwrap()).collect();
            let first = vals[0];
            prop_assert!(lo > 0.0);
            for v in vals {
                prop_assert!((v - first).abs() <= 0.01 * first);
            }
        }
    }
}
