//! The stationary solution `W(x) = (1 + |x|²/8)⁻¹` of `ΔW + W³ = 0` in
//! `ℝ⁴`, its scalings `λW(λ(x − c))`, the associated Sobolev constants, and
//! small lattice data measured against it.
//!
//! `W` decays like `8|x|⁻²`, so it has finite energy but infinite `L²` mass
//! and is never put on the torus; everything here is pointwise or radial
//! quadrature.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::spectral::{
    lattice_integral_pow, sobolev_norm_sq, transform_forward, PhysicalField, TorusGrid, DIM,
};

/// `‖∇W‖²_{L²} = 32π²/3`.
pub const GRAD_L2_SQ: f64 = 32.0 * PI * PI / 3.0;

/// `‖W‖⁴_{L⁴} = 32π²/3`.
pub const L4_FOURTH: f64 = 32.0 * PI * PI / 3.0;

/// `E(W) = ½‖∇W‖² − ¼‖W‖⁴_{L⁴} = 8π²/3`.
pub const ENERGY: f64 = 8.0 * PI * PI / 3.0;

/// Surface area of the unit sphere `S³`.
const OMEGA3: f64 = 2.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleSpec {
    scale: f64,
    center: [f64; DIM],
}

impl BubbleSpec {
    pub fn new(scale: f64, center: [f64; DIM]) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale λ = {scale} must be positive")));
        }
        Ok(Self { scale, center })
    }

    pub fn unit() -> Self {
        Self {
            scale: 1.0,
            center: [0.0; DIM],
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn center(&self) -> [f64; DIM] {
        self.center
    }
}

/// Radial profile `W(ρ) = 1/(1 + ρ²/8)`.
pub fn bubble_profile(rho: f64) -> f64 {
    1.0 / (1.0 + rho * rho / 8.0)
}

/// `W'(ρ) = −(ρ/4)/(1 + ρ²/8)²`.
pub fn bubble_derivative(rho: f64) -> f64 {
    let w = bubble_profile(rho);
    -0.25 * rho * w * w
}

/// `λW(λ(x − c))`.
pub fn evaluate_bubble(spec: &BubbleSpec, x: &[f64; DIM]) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(&spec.center)
        .map(|(a, c)| (spec.scale * (a - c)).powi(2))
        .sum();
    spec.scale / (1.0 + r2 / 8.0)
}

/// Trapezoid rule in `ln ρ` for `∫₀^∞ f(ρ) 2π²ρ³ dρ`, i.e. weights
/// `h·2π²ρ⁴` on log-spaced nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialQuadrature {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialQuadrature {
    pub fn new(r_min: f64, r_max: f64, log_step: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && log_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid radial quadrature [{r_min}, {r_max}] with step {log_step}"
            )));
        }
        let span = (r_max / r_min).ln();
        let count = (span / log_step).ceil() as usize;
        let h = span / count as f64;
        let nodes: Vec<f64> = (0..=count).map(|j| r_min * (h * j as f64).exp()).collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let end = if j == 0 || j == count { 0.5 } else { 1.0 };
                end * h * OMEGA3 * r.powi(4)
            })
            .collect();
        Ok(Self {
            r_min,
            r_max,
            nodes,
            weights,
        })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, w)| w * f(r))
            .sum()
    }

    /// Estimate of the mass outside `[r_min, r_max]`, from power-law
    /// extrapolation of the weighted integrand at both ends. Infinite when the
    /// integrand does not decay at the outer end.
    pub fn truncation_estimate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let weighted = |r: f64| OMEGA3 * r.powi(4) * f(r);
        let m = self.nodes.len();
        let tail_power = |a: f64, b: f64| (weighted(b).abs() / weighted(a).abs()).ln() / (b / a).ln();
        let head = {
            let (a, b) = (self.nodes[0], self.nodes[1]);
            let p = tail_power(a, b);
            if weighted(a) == 0.0 {
                0.0
            } else if p > 0.0 {
                weighted(a).abs() / p
            } else {
                f64::INFINITY
            }
        };
        let tail = {
            let (a, b) = (self.nodes[m - 2], self.nodes[m - 1]);
            let p = tail_power(a, b);
            if weighted(b) == 0.0 {
                0.0
            } else if p < 0.0 {
                weighted(b).abs() / -p
            } else {
                f64::INFINITY
            }
        };
        head + tail
    }
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self::new(1e-8, 1e6, 0.05).expect("valid default range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleConstants {
    pub grad_l2_sq: f64,
    pub l4_fourth: f64,
    pub energy: f64,
    pub sobolev_constant: f64,
    /// Truncation estimate of the radial quadrature, relative to `grad_l2_sq`.
    pub truncation_error: f64,
}

/// Sobolev constants of `W` by radial quadrature.
pub fn bubble_constants() -> BubbleConstants {
    let q = RadialQuadrature::default();
    let grad_sq = |r: f64| bubble_derivative(r).powi(2);
    let fourth = |r: f64| bubble_profile(r).powi(4);
    let grad_l2_sq = q.integrate(grad_sq);
    let l4_fourth = q.integrate(fourth);
    let truncation_error =
        q.truncation_estimate(grad_sq).max(q.truncation_estimate(fourth)) / grad_l2_sq;
    BubbleConstants {
        grad_l2_sq,
        l4_fourth,
        energy: 0.5 * grad_l2_sq - 0.25 * l4_fourth,
        sobolev_constant: grad_l2_sq.powf(-0.25),
        truncation_error,
    }
}

/// Sharp Sobolev constant `(πn(n−2))^{-1/2} (Γ(n)/Γ(n/2))^{1/n}` in `ℝⁿ`,
/// `n ≥ 3`.
pub fn sobolev_constant_general(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("dimension {n} must be >= 3")));
    }
    let nf = n as f64;
    Ok((PI * nf * (nf - 2.0)).recip().sqrt() * (gamma(nf) / gamma(nf / 2.0)).powf(1.0 / nf))
}

/// `ΔW` in closed form for the unit bubble.
pub fn bubble_laplacian(rho: f64) -> f64 {
    -bubble_profile(rho).powi(3)
}

/// `|Δ_h W + W³|` at each point, with the second-order five-point
/// Laplacian on each axis and step `h_fd`.
pub fn stationarity_residual(points: &[[f64; DIM]], h_fd: f64) -> Result<Vec<f64>> {
    if !(h_fd > 0.0 && h_fd.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h_fd} must be positive")));
    }
    let spec = BubbleSpec::unit();
    points
        .iter()
        .map(|x| {
            if x.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("non-finite sample point".into()));
            }
            let w = evaluate_bubble(&spec, x);
            let mut lap = 0.0;
            for axis in 0..DIM {
                let mut plus = *x;
                let mut minus = *x;
                plus[axis] += h_fd;
                minus[axis] -= h_fd;
                lap += evaluate_bubble(&spec, &plus) - 2.0 * w + evaluate_bubble(&spec, &minus);
            }
            Ok((lap / (h_fd * h_fd) + w * w * w).abs())
        })
        .collect()
}

/// 8-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, panels: usize, f: F) -> f64 {
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            GL8.iter()
                .map(|(x, w)| w * f(mid + 0.5 * width * x))
                .sum::<f64>()
                * 0.5
                * width
        })
        .sum()
}

/// `∫_{|x|≤R} W² dx` for each `R`, by composite Gauss–Legendre: in `ρ` on
/// `[0, min(R,1)]` and in `ln ρ` beyond.
pub fn truncated_l2_growth(radii: &[f64]) -> Result<Vec<f64>> {
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must increase".into()));
    }
    let radial = |r: f64| OMEGA3 * r.powi(3) * bubble_profile(r).powi(2);
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut reached = 0.0f64;
    for &r in radii {
        if reached < 1.0 {
            let upto = r.min(1.0);
            acc += gauss_legendre(reached, upto, 4, radial);
            reached = upto;
        }
        if r > reached {
            let (a, b) = (reached.ln(), r.ln());
            let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
            acc += gauss_legendre(a, b, panels, |l| {
                let rho = l.exp();
                rho * radial(rho)
            });
            reached = r;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `u_λ(x) = λ u(λx)`, realized on the torus of side `L/λ` with the same
/// lattice: sample values are multiplied by `λ` and the cell shrinks by `λ`.
pub fn rescale_field(u: &PhysicalField, lambda: f64) -> Result<PhysicalField> {
    let integral = |x: f64| (x - x.round()).abs() < 1e-12 * x.max(1.0) && x.round() >= 1.0;
    if !(lambda > 0.0 && (integral(lambda) || integral(1.0 / lambda))) {
        return Err(Error::InvalidArgument(format!(
            "scale λ = {lambda} must be an integer or the reciprocal of one"
        )));
    }
    let grid = TorusGrid::new(u.grid.points_per_dim(), u.grid.side_length() / lambda)?;
    Ok(PhysicalField {
        grid,
        values: u.values.iter().map(|v| lambda * v).collect(),
    })
}

/// Small lattice datum together with the monitored smallness conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcriticalDatum {
    pub field: PhysicalField,
    pub delta: f64,
    pub grad_l2_sq: f64,
    pub l4_fourth: f64,
    pub energy: f64,
    /// `E(u₀) ≤ E(W)`.
    pub energy_condition: bool,
    /// `‖∇u₀‖ ≤ ‖∇W‖`.
    pub gradient_condition: bool,
    /// `‖∇u₀‖ < ‖∇W‖/√2`.
    pub strict_gradient_condition: bool,
}

/// Periodized Gaussian of width `L/8` centred in the box, with its mean
/// removed and scaled to `‖∇u₀‖_{L²} = δ‖∇W‖_{L²}`.
pub fn subcritical_datum(grid: &TorusGrid, delta: f64) -> Result<SubcriticalDatum> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "δ = {delta} outside [0, 1]: the datum would exceed ‖∇W‖"
        )));
    }
    let side = grid.side_length();
    let sigma = side / 8.0;
    let profile = |y: f64| {
        (-2..=2)
            .map(|m| {
                let d = y - 0.5 * side + m as f64 * side;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .sum::<f64>()
    };
    let mut field = PhysicalField::from_fn(*grid, |x| x.iter().map(|&c| profile(c)).product());
    let mean = field.values.iter().sum::<f64>() / field.values.len() as f64;
    field.values.iter_mut().for_each(|v| *v -= mean);
    let raw = sobolev_norm_sq(&transform_forward(&field)?, 1.0)?;
    let scale = delta * (GRAD_L2_SQ / raw).sqrt();
    field.values.iter_mut().for_each(|v| *v *= scale);

    let grad_l2_sq = delta * delta * GRAD_L2_SQ;
    let l4_fourth = lattice_integral_pow(&field, 4);
    let energy = 0.5 * grad_l2_sq - 0.25 * l4_fourth;
    Ok(SubcriticalDatum {
        field,
        delta,
        grad_l2_sq,
        l4_fourth,
        energy,
        energy_condition: energy <= ENERGY,
        gradient_condition: grad_l2_sq <= GRAD_L2_SQ,
        strict_gradient_condition: 2.0 * grad_l2_sq < GRAD_L2_SQ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lebesgue_norm;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pointwise_values() {
        let unit = BubbleSpec::unit();
        assert_eq!(evaluate_bubble(&unit, &[0.0; 4]), 1.0);
        let s8 = 8f64.sqrt();
        assert!((evaluate_bubble(&unit, &[s8, 0.0, 0.0, 0.0]) - 0.5).abs() < 1e-15);
        let two = BubbleSpec::new(2.0, [0.0; 4]).unwrap();
        assert_eq!(evaluate_bubble(&two, &[0.0; 4]), 2.0);
        let shifted = BubbleSpec::new(1.0, [1.0, 2.0, 0.0, -1.0]).unwrap();
        assert_eq!(evaluate_bubble(&shifted, &[1.0, 2.0, 0.0, -1.0]), 1.0);
        assert!(BubbleSpec::new(0.0, [0.0; 4]).is_err());
        assert!(BubbleSpec::new(-1.0, [0.0; 4]).is_err());
    }

    #[test]
    fn constants_match_beta_integrals() {
        let c = bubble_constants();
        assert!(rel(c.grad_l2_sq, GRAD_L2_SQ) < 1e-6);
        assert!(rel(c.l4_fourth, L4_FOURTH) < 1e-6);
        assert!(rel(c.energy, ENERGY) < 1e-6);
        assert!(rel(c.energy, 0.25 * c.grad_l2_sq) < 1e-10);
        assert!(c.truncation_error < 1e-8);
        let general = sobolev_constant_general(4).unwrap();
        assert!(rel(general, c.sobolev_constant) < 1e-6);
        assert!(rel(general, (3.0 / (32.0 * PI * PI)).powf(0.25)) < 1e-12);
        assert!(sobolev_constant_general(2).is_err());
    }

    #[test]
    fn quadrature_weights_positive() {
        let q = RadialQuadrature::default();
        assert!(q.weights.iter().all(|w| *w > 0.0));
        assert!(RadialQuadrature::new(1.0, 0.5, 0.1).is_err());
        // ∫ e^{-ρ²} 2π²ρ³ dρ = π².
        let v = q.integrate(|r| (-r * r).exp());
        assert!(rel(v, PI * PI) < 1e-12);
        assert!(q.truncation_estimate(|_| 1.0).is_infinite());
    }

    #[test]
    fn closed_form_laplacian() {
        for rho in [0.0, 0.5, 8f64.sqrt(), 7.0] {
            let w = bubble_profile(rho);
            assert!((bubble_laplacian(rho) + w * w * w).abs() < 1e-15);
        }
        assert_eq!(bubble_laplacian(0.0), -1.0);
        assert!((bubble_laplacian(8f64.sqrt()) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_residual_is_second_order() {
        let points = [[0.0; 4], [8f64.sqrt(), 0.0, 0.0, 0.0], [0.3, -1.2, 0.7, 2.0]];
        let coarse = stationarity_residual(&points, 0.04).unwrap();
        let fine = stationarity_residual(&points, 0.02).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c / f - 4.0).abs() < 0.1, "{c} {f}");
        }
        assert!(stationarity_residual(&points, 0.0).is_err());
    }

    #[test]
    fn truncated_mass_examples() {
        let closed = |r: f64| {
            let s = r * r / 8.0;
            64.0 * PI * PI * ((1.0 + s).ln() + 1.0 / (1.0 + s) - 1.0)
        };
        let radii = [0.01, 0.5, 2.0, 30.0, 1e3, 1e4];
        let got = truncated_l2_growth(&radii).unwrap();
        for (r, v) in radii.iter().zip(&got).skip(1) {
            assert!(rel(*v, closed(*r)) < 1e-9, "R = {r}");
        }
        assert!(rel(got[0], PI * PI / 2.0 * 1e-8) < 1e-4);
        assert!(got.windows(2).all(|w| w[1] > w[0]));
        assert!(truncated_l2_growth(&[2.0, 1.0]).is_err());
    }

    fn band_limited_bump(grid: TorusGrid) -> PhysicalField {
        let k = grid.frequency_spacing();
        PhysicalField::from_fn(grid, |x| {
            0.3 * (k * x[0]).cos() * (k * x[1]).sin() + 0.1 * (2.0 * k * x[2] + k * x[3]).cos()
        })
    }

    #[test]
    fn rescaling_preserves_critical_norms() {
        let g = TorusGrid::new(16, 10.0).unwrap();
        let u = band_limited_bump(g);
        assert_eq!(rescale_field(&u, 1.0).unwrap(), u);
        let h1 = sobolev_norm_sq(&transform_forward(&u).unwrap(), 1.0).unwrap();
        let l4 = lebesgue_norm(&u, 4.0).unwrap();
        for lambda in [2.0, 0.5, 3.0] {
            let v = rescale_field(&u, lambda).unwrap();
            assert!(rel(v.grid.side_length(), 10.0 / lambda) < 1e-15);
            let h1v = sobolev_norm_sq(&transform_forward(&v).unwrap(), 1.0).unwrap();
            assert!(rel(h1v, h1) < 1e-8);
            assert!(rel(lebesgue_norm(&v, 4.0).unwrap(), l4) < 1e-8);
        }
        assert!(rescale_field(&u, 1.5).is_err());
        assert!(rescale_field(&u, -2.0).is_err());
    }

    #[test]
    fn subcritical_data() {
        let g = TorusGrid::new(16, 32.0).unwrap();
        let d = subcritical_datum(&g, 0.1).unwrap();
        assert!(d.energy_condition && d.gradient_condition && d.strict_gradient_condition);
        let h1 = sobolev_norm_sq(&transform_forward(&d.field).unwrap(), 1.0).unwrap();
        assert!(rel(h1, 0.01 * GRAD_L2_SQ) < 1e-12);
        assert!(d.field.values.iter().sum::<f64>().abs() < 1e-9);
        assert!(d.energy > 0.0);

        let zero = subcritical_datum(&g, 0.0).unwrap();
        assert!(zero.field.values.iter().all(|v| *v == 0.0));
        assert_eq!(zero.energy, 0.0);
        assert!(zero.energy_condition);

        let large = subcritical_datum(&g, 0.9).unwrap();
        assert!(large.gradient_condition);
        assert!(!large.strict_gradient_condition);
        assert_eq!(large.energy_condition, large.energy <= ENERGY);
        assert!(subcritical_datum(&g, 1.01).is_err());
        assert!(subcritical_datum(&g, -0.1).is_err());
    }
}
