//! Monitored quantities along a trajectory and the checks built on them.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{nonlinear_term, SolverState};
use crate::fit::least_squares_line;
use crate::spectral::{lattice_integral_pow, transform_inverse, SpectralField, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `‖u‖²_{Ḣ¹}`.
    pub h1_sq: f64,
    /// `‖∇u‖²_{Ḣ¹} = ‖u‖²_{Ḣ²}`.
    pub grad_h1_sq: f64,
    /// `½‖∇u‖²_{L²} − ¼‖u‖⁴_{L⁴}`.
    pub energy: f64,
    pub l4_fourth: f64,
    pub l6_accum: f64,
    pub low_sq: f64,
    pub high_sq: f64,
    /// `⟨u, u³⟩_{Ḣ¹}` with the dealiased cube.
    pub pairing: f64,
    pub pairing_ratio: f64,
    pub dissipation_accum: f64,
    pub pairing_accum: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "t,h1_sq,grad_h1_sq,energy,l4_fourth,l6_accum,low_sq,high_sq,pairing,pairing_ratio";

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.h1_sq,
            self.grad_h1_sq,
            self.energy,
            self.l4_fourth,
            self.l6_accum,
            self.low_sq,
            self.high_sq,
            self.pairing,
            self.pairing_ratio,
        ]
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(",")
    }

    /// Same record with the splitting of another schedule.
    pub fn with_split(&self, (low_sq, high_sq): (f64, f64)) -> Self {
        Self {
            low_sq,
            high_sq,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScheduleKind {
    /// `g(t) = [ln(e+t)]³`.
    LogCubed,
    /// `g(t) = (1+t)^α`.
    Power(f64),
}

/// Shrinking frequency ball of radius `r(t) = (g′(t)/(C̃ g(t)))^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplittingSchedule {
    kind: ScheduleKind,
    c_tilde: f64,
}

impl SplittingSchedule {
    pub fn new(kind: ScheduleKind, c_tilde: f64) -> Result<Self> {
        if !(c_tilde > 0.0 && c_tilde.is_finite()) {
            return Err(Error::InvalidArgument(format!("C̃ = {c_tilde} must be positive")));
        }
        if let ScheduleKind::Power(alpha) = kind {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "power schedule exponent {alpha} must be positive"
                )));
            }
        }
        Ok(Self { kind, c_tilde })
    }

    pub fn log_cubed() -> Self {
        Self {
            kind: ScheduleKind::LogCubed,
            c_tilde: 1.0,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn c_tilde(&self) -> f64 {
        self.c_tilde
    }

    pub fn g(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::LogCubed => (E + t).ln().powi(3),
            ScheduleKind::Power(alpha) => (1.0 + t).powf(alpha),
        }
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::LogCubed => 3.0 * (E + t).ln().powi(2) / (E + t),
            ScheduleKind::Power(alpha) => alpha * (1.0 + t).powf(alpha - 1.0),
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        (self.g_prime(t) / (self.c_tilde * self.g(t))).sqrt()
    }
}

/// `Ḣ¹` mass inside and outside the ball `|ξ| ≤ r(t)`.
pub fn splitting_split(
    u_hat: &SpectralField,
    schedule: &SplittingSchedule,
    t: f64,
) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be >= 0")));
    }
    Ok(split_at_radius(u_hat, schedule.radius(t)))
}

fn split_at_radius(u_hat: &SpectralField, radius: f64) -> (f64, f64) {
    let grid = u_hat.grid;
    let r2 = radius * radius;
    let w = grid.mode_weight();
    let part = |inside: bool| {
        w * grid.ordered_sum(|i| {
            let q = grid.xi_sq(i);
            if (q <= r2) == inside {
                q * u_hat.coeffs[i].norm_sqr()
            } else {
                0.0
            }
        })
    };
    (part(true), part(false))
}

fn h1_and_grad(u_hat: &SpectralField) -> (f64, f64) {
    let grid = u_hat.grid;
    let w = grid.mode_weight();
    let h1 = w * grid.ordered_sum(|i| grid.xi_sq(i) * u_hat.coeffs[i].norm_sqr());
    let grad = w * grid.ordered_sum(|i| grid.xi_sq(i).powi(2) * u_hat.coeffs[i].norm_sqr());
    (h1, grad)
}

/// `⟨u, N⟩_{Ḣ¹} = L⁻⁴ Σ |ξ|² Re(conj(û) N̂)`.
pub fn h1_pairing(u_hat: &SpectralField, n_hat: &SpectralField) -> Result<f64> {
    n_hat.check_grid(&u_hat.grid)?;
    let grid = u_hat.grid;
    Ok(grid.mode_weight()
        * grid.ordered_sum(|i| grid.xi_sq(i) * (u_hat.coeffs[i].conj() * n_hat.coeffs[i]).re))
}

pub fn pairing_ratio(pairing: f64, grad_h1_sq: f64, h1_sq: f64) -> f64 {
    let denom = grad_h1_sq * h1_sq;
    if denom > 0.0 {
        pairing.abs() / denom
    } else {
        0.0
    }
}

/// Diagnostics of a solver state, split with `schedule` at the state's time.
pub fn record(state: &SolverState, schedule: &SplittingSchedule) -> Result<DiagnosticsRecord> {
    let u_hat = &state.u_hat;
    let (h1_sq, grad_h1_sq) = h1_and_grad(u_hat);
    let (low_sq, high_sq) = splitting_split(u_hat, schedule, state.t)?;
    let l4_fourth = lattice_integral_pow(&transform_inverse(u_hat)?, 4);
    let pairing = match state.nonlinear() {
        Some(n) => h1_pairing(u_hat, n)?,
        None => h1_pairing(u_hat, &nonlinear_term(u_hat)?)?,
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        h1_sq,
        grad_h1_sq,
        energy: 0.5 * h1_sq - 0.25 * l4_fourth,
        l4_fourth,
        l6_accum: state.l6_accum,
        low_sq,
        high_sq,
        pairing,
        pairing_ratio: pairing_ratio(pairing, grad_h1_sq, h1_sq),
        dissipation_accum: state.dissipation_accum,
        pairing_accum: state.pairing_accum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// Indices `j` with `h1_sq[j+1] > h1_sq[j]·(1 + tol)`.
    pub violations: Vec<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn lyapunov_check(series: &[DiagnosticsRecord], tol: f64) -> Result<LyapunovReport> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "monotonicity needs at least 2 records".into(),
        ));
    }
    let violations: Vec<usize> = series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].h1_sq > w[0].h1_sq * (1.0 + tol))
        .map(|(j, _)| j)
        .collect();
    Ok(LyapunovReport {
        passed: violations.is_empty(),
        violations,
        tolerance: tol,
    })
}

/// Relative defect of
/// `‖u(t₂)‖²_{Ḣ¹} + 2∫‖∇u‖²_{Ḣ¹} = ‖u(t₁)‖²_{Ḣ¹} + 2∫⟨u,u³⟩_{Ḣ¹}`
/// between the first and last records.
pub fn energy_identity_residual(series: &[DiagnosticsRecord]) -> Result<f64> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(a), Some(b)) if series.len() >= 2 => (a, b),
        _ => {
            return Err(Error::InsufficientData(
                "energy identity needs at least 2 records".into(),
            ))
        }
    };
    let lhs = last.h1_sq + 2.0 * (last.dissipation_accum - first.dissipation_accum);
    let rhs = first.h1_sq + 2.0 * (last.pairing_accum - first.pairing_accum);
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingReport {
    pub max_ratio: f64,
    /// Records with nonvanishing norms that entered the maximum.
    pub counted: usize,
    pub finite: bool,
}

pub fn pairing_ratio_report(series: &[DiagnosticsRecord]) -> PairingReport {
    let counted: Vec<f64> = series
        .iter()
        .filter(|r| r.grad_h1_sq * r.h1_sq > 0.0)
        .map(|r| r.pairing_ratio)
        .collect();
    let max_ratio = counted.iter().copied().fold(0.0, f64::max);
    PairingReport {
        max_ratio,
        counted: counted.len(),
        finite: counted.iter().all(|r| r.is_finite()),
    }
}

/// `M(t) = d/dt(g·‖u‖²_{Ḣ¹}) − g′·low_sq`, with the time derivative taken by
/// three-point differences on the (possibly non-uniform) record times.
pub fn key_inequality_monitor(
    series: &[DiagnosticsRecord],
    schedule: &SplittingSchedule,
) -> Result<Vec<f64>> {
    let m = series.len();
    if m < 3 {
        return Err(Error::InsufficientData(
            "time derivatives need at least 3 records".into(),
        ));
    }
    if series.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidArgument("record times must increase".into()));
    }
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let f: Vec<f64> = series.iter().map(|r| schedule.g(r.t) * r.h1_sq).collect();
    // Derivative at t[k] of the quadratic through (t[i], t[i+1], t[i+2]).
    let three_point = |i: usize, k: usize| {
        let (a, b, c) = (t[i], t[i + 1], t[i + 2]);
        let x = t[k];
        f[i] * ((x - b) + (x - c)) / ((a - b) * (a - c))
            + f[i + 1] * ((x - a) + (x - c)) / ((b - a) * (b - c))
            + f[i + 2] * ((x - a) + (x - b)) / ((c - a) * (c - b))
    };
    Ok((0..m)
        .map(|k| {
            let i = k.saturating_sub(1).min(m - 3);
            three_point(i, k) - schedule.g_prime(t[k]) * series[k].low_sq
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Fitted slope; negative for decay.
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    /// Slope over the second half of the window minus slope over the first.
    pub drift: f64,
}

/// `[T_box/100, T_box/3]`.
pub fn default_fit_window(grid: &TorusGrid) -> (f64, f64) {
    let t_box = grid.t_box();
    (t_box / 100.0, t_box / 3.0)
}

fn fit_in_window<X: Fn(f64) -> f64>(
    series: &[DiagnosticsRecord],
    window: (f64, f64),
    abscissa: X,
) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1 && r.h1_sq > 0.0)
        .map(|r| (abscissa(r.t), r.h1_sq.ln()))
        .collect();
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} usable records in [{}, {}], need 5",
            points.len(),
            window.0,
            window.1
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let fit = least_squares_line(&x, &y)?;
    let half = x.len() / 2;
    let drift = if half >= 2 && x.len() - half >= 2 {
        least_squares_line(&x[half..], &y[half..])?.slope - least_squares_line(&x[..half], &y[..half])?.slope
    } else {
        0.0
    };
    Ok(RateFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        window,
        rms_residual: fit.rms_residual,
        drift,
    })
}

/// Slope of `ln ‖u‖²_{Ḣ¹}` against `ln(1+t)` over the records in `window`.
pub fn fit_decay_rate(series: &[DiagnosticsRecord], window: (f64, f64)) -> Result<RateFit> {
    fit_in_window(series, window, |t| (1.0 + t).ln())
}

/// Slope of `ln ‖u‖²_{Ḣ¹}` against `ln ln(e+t)`.
pub fn fit_log_decay_rate(series: &[DiagnosticsRecord], window: (f64, f64)) -> Result<RateFit> {
    fit_in_window(series, window, |t| (E + t).ln().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub q_star: f64,
    /// `min{2 + q*, 1}`.
    pub bound: f64,
    /// Observed decay exponent `−slope`.
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `min{2 + q*, 1}`.
pub fn decay_bound(q_star: f64) -> Result<f64> {
    if !(q_star > -2.0) {
        return Err(Error::InvalidArgument(format!("q* = {q_star} must exceed -2")));
    }
    Ok((2.0 + q_star).min(1.0))
}

/// One-sided: the observed decay may be faster than the bound, never slower
/// beyond `tol`.
pub fn bound_check(q_star: f64, fit: &RateFit, tol: f64) -> Result<BoundCheck> {
    let bound = decay_bound(q_star)?;
    let observed = -fit.exponent;
    Ok(BoundCheck {
        q_star,
        bound,
        observed,
        tolerance: tol,
        passed: observed >= bound - tol,
    })
}
