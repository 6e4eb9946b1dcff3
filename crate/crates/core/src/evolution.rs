//! Time integration of `∂ₜu = Δu + u³` on the periodic lattice.
//!
//! The linear part is handled exactly by the diagonal factor `e^{-t|ξ|²}`;
//! the cubic term by classical RK4 in integrating-factor variables
//! `v̂ = e^{t|ξ|²}û`. The nonlinearity is pseudospectral with 2/3-rule
//! dealiasing on both sides of the cube.
//!
//! Each state carries running time integrals of `‖∇u‖²_{Ḣ¹}`, of the
//! pairing `⟨u, u³⟩_{Ḣ¹}` and of `∫|u|⁶`. The first two use the corrected
//! trapezoid rule `h/2·(f₀+f₁) + h²/12·(f₀′−f₁′)` with exact endpoint
//! derivatives, so they are fourth order in the step like the stepper itself.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::bubble::subcritical_datum;
use crate::checkpoint;
use crate::decay::synthesize_datum;
use crate::error::{Error, Result};
use crate::spectral::{
    dealias_in_place, lattice_integral_pow, sobolev_norm_sq, transform_forward, transform_inverse,
    PhysicalField, SpectralField, TorusGrid,
};

/// Safety factor applied to the step bound.
pub const STABILITY_SAFETY: f64 = 0.5;

/// Steps between re-evaluations of the step bound in [`run`].
pub const STABILITY_INTERVAL: u64 = 100;

/// Solutions whose sup norm exceeds this are treated as blowing up.
const OVERFLOW_GUARD: f64 = 1e100;

fn xi_sq_cached(grid: &TorusGrid) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (grid.points_per_dim(), grid.side_length().to_bits());
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(key)
        .or_insert_with(|| Arc::new(grid.xi_sq_table()))
        .clone()
}

fn decay_factors(xi_sq: &[f64], t: f64) -> Vec<f64> {
    xi_sq.par_iter().map(|q| (-t * q).exp()).collect()
}

/// `e^{tΔ}`: coefficientwise multiplication by `e^{-t|ξ|²}`.
pub fn heat_propagate(v: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "propagation time must be finite and >= 0, got {t}"
        )));
    }
    let factors = decay_factors(&xi_sq_cached(&v.grid), t);
    let coeffs = v
        .coeffs
        .par_iter()
        .zip(&factors)
        .map(|(c, e)| c * e)
        .collect();
    Ok(SpectralField {
        grid: v.grid,
        coeffs,
    })
}

/// Dealiased physical field `u = F⁻¹ D û`.
fn dealiased_physical(v: &SpectralField) -> Result<PhysicalField> {
    let mut d = v.clone();
    dealias_in_place(&v.grid, &mut d.coeffs);
    transform_inverse(&d)
}

fn cube_hat(u: &PhysicalField) -> Result<SpectralField> {
    let cube = PhysicalField {
        grid: u.grid,
        values: u.values.par_iter().map(|x| x * x * x).collect(),
    };
    let mut out = transform_forward(&cube)?;
    dealias_in_place(&u.grid, &mut out.coeffs);
    Ok(out)
}

/// `D F((F⁻¹ D û)³)`, the dealiased cubic term.
pub fn nonlinear_term(v: &SpectralField) -> Result<SpectralField> {
    cube_hat(&dealiased_physical(v)?)
}

/// Step bound `STABILITY_SAFETY · 1.5 / max(‖u‖²_∞, Δξ²)`.
pub fn stability_bound(grid: &TorusGrid, u_max: f64) -> f64 {
    STABILITY_SAFETY * 1.5 / (u_max * u_max).max(grid.frequency_spacing().powi(2))
}

/// Quantities at the current time that the next step reuses.
#[derive(Debug, Clone)]
struct Endpoint {
    /// `N̂(û)`, absent for linear runs.
    nonlinear: Option<SpectralField>,
    /// `d/dt N̂(û(t))`, absent for linear runs.
    nonlinear_rate: Option<SpectralField>,
    u_max: f64,
    dissipation: f64,
    dissipation_rate: f64,
    pairing: f64,
    pairing_rate: f64,
    l6: f64,
}

impl Endpoint {
    fn evaluate(u_hat: &SpectralField, nonlinear: bool) -> Result<Self> {
        let grid = u_hat.grid;
        let xi_sq = xi_sq_cached(&grid);
        let w = grid.mode_weight();
        if !nonlinear {
            let u = transform_inverse(u_hat)?;
            let dissipation = w * grid.ordered_sum(|i| xi_sq[i].powi(2) * u_hat.coeffs[i].norm_sqr());
            let dissipation_rate =
                -2.0 * w * grid.ordered_sum(|i| xi_sq[i].powi(3) * u_hat.coeffs[i].norm_sqr());
            return Ok(Self {
                nonlinear: None,
                nonlinear_rate: None,
                u_max: u.max_abs(),
                dissipation,
                dissipation_rate,
                pairing: 0.0,
                pairing_rate: 0.0,
                l6: lattice_integral_pow(&u, 6),
            });
        }
        let u = dealiased_physical(u_hat)?;
        let n_hat = cube_hat(&u)?;
        let u_t_hat = SpectralField {
            grid,
            coeffs: u_hat
                .coeffs
                .par_iter()
                .zip(&n_hat.coeffs)
                .zip(xi_sq.par_iter())
                .map(|((c, n), q)| n - c * q)
                .collect(),
        };
        let u_t = dealiased_physical(&u_t_hat)?;
        let product = PhysicalField {
            grid,
            values: u
                .values
                .par_iter()
                .zip(&u_t.values)
                .map(|(a, b)| 3.0 * a * a * b)
                .collect(),
        };
        let mut n_dot = transform_forward(&product)?;
        dealias_in_place(&grid, &mut n_dot.coeffs);

        let c = &u_hat.coeffs;
        let ut = &u_t_hat.coeffs;
        let nh = &n_hat.coeffs;
        let nd = &n_dot.coeffs;
        let dissipation = w * grid.ordered_sum(|i| xi_sq[i].powi(2) * c[i].norm_sqr());
        let dissipation_rate =
            2.0 * w * grid.ordered_sum(|i| xi_sq[i].powi(2) * (c[i].conj() * ut[i]).re);
        let pairing = w * grid.ordered_sum(|i| xi_sq[i] * (c[i].conj() * nh[i]).re);
        let pairing_rate = w * grid
            .ordered_sum(|i| xi_sq[i] * ((ut[i].conj() * nh[i]).re + (c[i].conj() * nd[i]).re));
        Ok(Self {
            u_max: u.max_abs(),
            l6: lattice_integral_pow(&u, 6),
            nonlinear: Some(n_hat),
            nonlinear_rate: Some(n_dot),
            dissipation,
            dissipation_rate,
            pairing,
            pairing_rate,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub u_hat: SpectralField,
    pub step_count: u64,
    /// `∫ ‖∇u‖²_{Ḣ¹} dτ`.
    pub dissipation_accum: f64,
    /// `∫ ⟨u, u³⟩_{Ḣ¹} dτ`.
    pub pairing_accum: f64,
    /// `∫∫ |u|⁶ dx dτ`.
    pub l6_accum: f64,
    nonlinearity_enabled: bool,
    endpoint: Endpoint,
}

impl SolverState {
    pub fn new(u_hat: SpectralField, nonlinearity_enabled: bool) -> Result<Self> {
        Self::resume(u_hat, nonlinearity_enabled, 0.0, 0, [0.0; 3])
    }

    /// State at time `t` with previously accumulated integrals
    /// `[dissipation, pairing, l6]`.
    pub fn resume(
        u_hat: SpectralField,
        nonlinearity_enabled: bool,
        t: f64,
        step_count: u64,
        accumulators: [f64; 3],
    ) -> Result<Self> {
        if !u_hat.is_finite() {
            return Err(Error::InvalidArgument("initial coefficients are not finite".into()));
        }
        let endpoint = Endpoint::evaluate(&u_hat, nonlinearity_enabled)?;
        Ok(Self {
            t,
            u_hat,
            step_count,
            dissipation_accum: accumulators[0],
            pairing_accum: accumulators[1],
            l6_accum: accumulators[2],
            nonlinearity_enabled,
            endpoint,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.u_hat.grid
    }

    pub fn nonlinearity_enabled(&self) -> bool {
        self.nonlinearity_enabled
    }

    /// Dealiased cubic term at the current time (nonlinear runs only).
    pub fn nonlinear(&self) -> Option<&SpectralField> {
        self.endpoint.nonlinear.as_ref()
    }

    /// Time derivative of the cubic term along the flow (nonlinear runs only).
    pub fn nonlinear_rate(&self) -> Option<&SpectralField> {
        self.endpoint.nonlinear_rate.as_ref()
    }

    /// `‖u‖_∞` of the (dealiased, for nonlinear runs) physical field.
    pub fn sup_norm(&self) -> f64 {
        self.endpoint.u_max
    }

    /// Current `‖∇u‖²_{Ḣ¹}`.
    pub fn dissipation(&self) -> f64 {
        self.endpoint.dissipation
    }

    /// Current `⟨u, u³⟩_{Ḣ¹}` with the solver's dealiased cube; zero for
    /// linear runs.
    pub fn pairing(&self) -> f64 {
        self.endpoint.pairing
    }

    pub fn stability_bound(&self) -> f64 {
        stability_bound(&self.grid(), self.endpoint.u_max)
    }

    pub fn accumulators(&self) -> [f64; 3] {
        [self.dissipation_accum, self.pairing_accum, self.l6_accum]
    }

    pub fn h1_sq(&self) -> f64 {
        sobolev_norm_sq(&self.u_hat, 1.0).expect("positive order")
    }
}

fn axpy_into(out: &mut [Complex64], x: &[Complex64], factor: Complex64) {
    out.par_iter_mut().zip(x).for_each(|(o, v)| *o += v * factor);
}

/// One IF-RK4 step. `rhs(û, t)` is the nonlinear part of the right-hand side.
fn rk4<F>(u: &SpectralField, a: &SpectralField, t: f64, dt: f64, rhs: F) -> Result<SpectralField>
where
    F: Fn(&SpectralField, f64) -> Result<SpectralField>,
{
    let grid = u.grid;
    let xi_sq = xi_sq_cached(&grid);
    let half = decay_factors(&xi_sq, 0.5 * dt);
    let full = decay_factors(&xi_sq, dt);
    let h = Complex64::new(dt, 0.0);
    let field = |coeffs: Vec<Complex64>| SpectralField { grid, coeffs };

    let u2 = field(
        (0..u.coeffs.len())
            .into_par_iter()
            .map(|i| half[i] * (u.coeffs[i] + 0.5 * h * a.coeffs[i]))
            .collect(),
    );
    let b = rhs(&u2, t + 0.5 * dt)?;
    drop(u2);
    let u3 = field(
        (0..u.coeffs.len())
            .into_par_iter()
            .map(|i| half[i] * u.coeffs[i] + 0.5 * h * b.coeffs[i])
            .collect(),
    );
    let c = rhs(&u3, t + 0.5 * dt)?;
    drop(u3);
    let u4 = field(
        (0..u.coeffs.len())
            .into_par_iter()
            .map(|i| full[i] * u.coeffs[i] + h * half[i] * c.coeffs[i])
            .collect(),
    );
    let d = rhs(&u4, t + dt)?;
    drop(u4);
    let mut next: Vec<Complex64> = (0..u.coeffs.len())
        .into_par_iter()
        .map(|i| {
            full[i] * u.coeffs[i]
                + h / 6.0 * (full[i] * a.coeffs[i] + 2.0 * half[i] * (b.coeffs[i] + c.coeffs[i]))
        })
        .collect();
    axpy_into(&mut next, &d.coeffs, h / 6.0);
    Ok(field(next))
}

fn blow_up(state: &SolverState, t: f64) -> Error {
    Error::BlowUpSuspected {
        t,
        last_state: Box::new(state.clone()),
    }
}

fn hermite(dt: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> f64 {
    0.5 * dt * (f0 + f1) + dt * dt / 12.0 * (d0 - d1)
}

/// Advances the state by `dt`. Linear runs multiply by `e^{-dt|ξ|²}` and
/// accept any `dt`; nonlinear runs require `dt` within the stability bound.
pub fn step(state: &SolverState, dt: f64) -> Result<SolverState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let next_hat = if state.nonlinearity_enabled {
        let bound = state.stability_bound();
        if dt > bound {
            return Err(Error::UnstableStep { dt, bound });
        }
        let a = state.endpoint.nonlinear.as_ref().expect("nonlinear endpoint");
        match rk4(&state.u_hat, a, state.t, dt, |v, _| nonlinear_term(v)) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(blow_up(state, state.t + dt)),
            Err(e) => return Err(e),
        }
    } else {
        heat_propagate(&state.u_hat, dt)?
    };
    if !next_hat.is_finite() {
        return Err(blow_up(state, state.t + dt));
    }
    let endpoint = match Endpoint::evaluate(&next_hat, state.nonlinearity_enabled) {
        Ok(e) => e,
        Err(Error::NonFinite { .. }) => return Err(blow_up(state, state.t + dt)),
        Err(e) => return Err(e),
    };
    if !(endpoint.u_max.is_finite() && endpoint.u_max < OVERFLOW_GUARD) {
        return Err(blow_up(state, state.t + dt));
    }
    let e0 = &state.endpoint;
    let e1 = &endpoint;
    Ok(SolverState {
        t: state.t + dt,
        step_count: state.step_count + 1,
        dissipation_accum: state.dissipation_accum
            + hermite(dt, e0.dissipation, e0.dissipation_rate, e1.dissipation, e1.dissipation_rate),
        pairing_accum: state.pairing_accum
            + hermite(dt, e0.pairing, e0.pairing_rate, e1.pairing, e1.pairing_rate),
        l6_accum: state.l6_accum + 0.5 * dt * (e0.l6 + e1.l6),
        u_hat: next_hat,
        nonlinearity_enabled: state.nonlinearity_enabled,
        endpoint,
    })
}

/// Time-dependent source term `f̂(t)`.
pub type Forcing<'a> = dyn Fn(f64) -> Result<SpectralField> + 'a;

/// One IF-RK4 step of `∂ₜu = Δu + u³ + f(t)`. Only `t`, `û` and the step
/// count advance; the accumulators refer to the unforced equation and are
/// carried over unchanged.
pub fn step_forced(state: &SolverState, dt: f64, forcing: &Forcing) -> Result<SolverState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let rhs = |v: &SpectralField, t: f64| -> Result<SpectralField> {
        let f = forcing(t)?;
        f.check_grid(&v.grid)?;
        let mut n = if state.nonlinearity_enabled {
            nonlinear_term(v)?
        } else {
            SpectralField::zeros(v.grid)
        };
        n.coeffs
            .par_iter_mut()
            .zip(&f.coeffs)
            .for_each(|(a, b)| *a += b);
        Ok(n)
    };
    let guard = |e: Error| match e {
        Error::NonFinite { .. } => blow_up(state, state.t + dt),
        other => other,
    };
    let a = rhs(&state.u_hat, state.t).map_err(guard)?;
    let next_hat = rk4(&state.u_hat, &a, state.t, dt, rhs).map_err(guard)?;
    if !next_hat.is_finite() {
        return Err(blow_up(state, state.t + dt));
    }
    let endpoint = Endpoint::evaluate(&next_hat, state.nonlinearity_enabled).map_err(guard)?;
    Ok(SolverState {
        t: state.t + dt,
        step_count: state.step_count + 1,
        u_hat: next_hat,
        endpoint,
        ..state.clone()
    })
}

/// `‖u(T) − e^{(T−t₀)Δ}u(t₀) − ∫_{t₀}^T e^{(T−s)Δ} N(u(s)) ds‖_{L²} / ‖u(T)‖_{L²}`
/// with the integral taken by the corrected trapezoid rule over the snapshots.
pub fn duhamel_residual(snapshots: &[SolverState]) -> Result<f64> {
    if snapshots.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Duhamel check needs at least 3 snapshots, got {}",
            snapshots.len()
        )));
    }
    let first = &snapshots[0];
    let last = &snapshots[snapshots.len() - 1];
    let grid = first.grid();
    for s in snapshots {
        s.u_hat.check_grid(&grid)?;
    }
    if snapshots.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidArgument("snapshot times must increase".into()));
    }
    let nonlinear = snapshots.iter().all(|s| s.nonlinearity_enabled);
    if !nonlinear && snapshots.iter().any(|s| s.nonlinearity_enabled) {
        return Err(Error::InvalidArgument(
            "snapshots mix linear and nonlinear runs".into(),
        ));
    }
    let norm_end = sobolev_norm_sq(&last.u_hat, 0.0)?.sqrt();
    if norm_end == 0.0 {
        return Ok(0.0);
    }
    let t_end = last.t;
    let xi_sq = xi_sq_cached(&grid);
    let free = heat_propagate(&first.u_hat, t_end - first.t)?;
    let mut residual: Vec<Complex64> = last
        .u_hat
        .coeffs
        .par_iter()
        .zip(&free.coeffs)
        .map(|(a, b)| a - b)
        .collect();
    if nonlinear {
        for pair in snapshots.windows(2) {
            let (s0, s1) = (&pair[0], &pair[1]);
            let h = s1.t - s0.t;
            let e0 = decay_factors(&xi_sq, t_end - s0.t);
            let e1 = decay_factors(&xi_sq, t_end - s1.t);
            let (n0, d0) = (s0.nonlinear().unwrap(), s0.nonlinear_rate().unwrap());
            let (n1, d1) = (s1.nonlinear().unwrap(), s1.nonlinear_rate().unwrap());
            residual.par_iter_mut().enumerate().for_each(|(i, r)| {
                let q = xi_sq[i];
                let g0 = e0[i] * n0.coeffs[i];
                let g1 = e1[i] * n1.coeffs[i];
                let g0p = e0[i] * (q * n0.coeffs[i] + d0.coeffs[i]);
                let g1p = e1[i] * (q * n1.coeffs[i] + d1.coeffs[i]);
                *r -= 0.5 * h * (g0 + g1) + h * h / 12.0 * (g0p - g1p);
            });
        }
    }
    let r = SpectralField {
        grid,
        coeffs: residual,
    };
    Ok(sobolev_norm_sq(&r, 0.0)?.sqrt() / norm_end)
}

/// How the initial datum is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    /// Gaussian bump with `‖∇u₀‖ = δ‖∇W‖`.
    Bump { delta: f64 },
    /// Synthesized datum with `r*(Λu₀) = r`, rescaled so that
    /// `‖∇u₀‖ = δ‖∇W‖`.
    PowerLaw { r: f64, cutoff: f64, delta: f64 },
    /// Coefficients read from a checkpoint file.
    File(PathBuf),
}

impl DatumSpec {
    pub fn build(&self, grid: &TorusGrid) -> Result<SpectralField> {
        match self {
            DatumSpec::Bump { delta } => transform_forward(&subcritical_datum(grid, *delta)?.field),
            DatumSpec::PowerLaw { r, cutoff, delta } => {
                if *delta < 0.0 {
                    return Err(Error::InvalidArgument(format!("δ = {delta} must be >= 0")));
                }
                let mut v = synthesize_datum(grid, *r, *cutoff, 1.0)?;
                let h1 = sobolev_norm_sq(&v, 1.0)?;
                let target = delta * delta * crate::bubble::GRAD_L2_SQ;
                let scale = (target / h1).sqrt();
                v.coeffs.iter_mut().for_each(|c| *c *= scale);
                Ok(v)
            }
            DatumSpec::File(path) => {
                let cp = checkpoint::read(path)?;
                if cp.u_hat.grid != *grid {
                    return Err(Error::GridMismatch(format!(
                        "checkpoint grid {:?} differs from configured {:?}",
                        cp.u_hat.grid, grid
                    )));
                }
                Ok(cp.u_hat)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: TorusGrid,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub nonlinearity_enabled: bool,
    pub datum: DatumSpec,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        if self
            .snapshot_times
            .iter()
            .any(|&s| !(s >= 0.0 && s <= self.t_end))
        {
            return Err(Error::InvalidArgument(format!(
                "snapshot times must lie in [0, {}]",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Initial coefficients; nonlinear runs start from the dealiased datum so
    /// that the whole trajectory lives in the resolved band.
    pub fn initial_state(&self) -> Result<SolverState> {
        let mut u0 = self.datum.build(&self.grid)?;
        if self.nonlinearity_enabled {
            dealias_in_place(&self.grid, &mut u0.coeffs);
        }
        SolverState::new(u0, self.nonlinearity_enabled)
    }
}

/// `count` points `t₀·q^j` from `t0` to `t1` inclusive.
pub fn log_spaced(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let ratio = (t1 / t0).ln() / (count - 1) as f64;
            let mut out: Vec<f64> = (0..count).map(|j| t0 * (ratio * j as f64).exp()).collect();
            out[count - 1] = t1;
            out
        }
    }
}

/// Runs the configured simulation, handing every snapshot state to
/// `on_snapshot`, and returns the state at `t_end`.
pub fn run<F>(config: &SimulationConfig, on_snapshot: F) -> Result<SolverState>
where
    F: FnMut(&SolverState) -> Result<()>,
{
    config.validate()?;
    run_from(config, config.initial_state()?, on_snapshot)
}

pub fn run_from<F>(config: &SimulationConfig, initial: SolverState, mut on_snapshot: F) -> Result<SolverState>
where
    F: FnMut(&SolverState) -> Result<()>,
{
    let mut state = initial;
    let mut dt_eff = config.dt;
    let mut targets: Vec<(f64, bool)> = config
        .snapshot_times
        .iter()
        .filter(|&&s| s >= state.t)
        .map(|&s| (s, true))
        .collect();
    if targets.last().map_or(true, |&(s, _)| s < config.t_end) {
        targets.push((config.t_end, false));
    }
    for (target, is_snapshot) in targets {
        while state.t < target {
            if config.nonlinearity_enabled && state.step_count % STABILITY_INTERVAL == 0 {
                dt_eff = config.dt.min(state.stability_bound());
            }
            let remaining = target - state.t;
            let dt = if remaining <= dt_eff * (1.0 + 1e-9) {
                remaining
            } else {
                dt_eff
            };
            state = step(&state, dt)?;
            if dt == remaining {
                state.t = target;
            }
        }
        if is_snapshot {
            on_snapshot(&state)?;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{heat_multiplier, apply_multiplier};
    use std::f64::consts::PI;

    fn grid() -> TorusGrid {
        TorusGrid::new(16, 2.0 * PI).unwrap()
    }

    fn sample_field(g: TorusGrid, amp: f64) -> SpectralField {
        let u = PhysicalField::from_fn(g, |x| {
            amp * ((x[0] + 2.0 * x[1]).sin() + 0.5 * (x[2] - x[3]).cos() + 0.25 * (2.0 * x[3]).cos())
        });
        transform_forward(&u).unwrap()
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn heat_propagation() {
        let g = grid();
        let v = sample_field(g, 1.0);
        assert_eq!(heat_propagate(&v, 0.0).unwrap(), v);
        assert!(heat_propagate(&v, -1.0).is_err());
        let two = heat_propagate(&heat_propagate(&v, 0.3).unwrap(), 0.4).unwrap();
        let one = heat_propagate(&v, 0.7).unwrap();
        assert!(max_diff(&one, &two) <= 1e-12 * v.max_abs());
        let via_multiplier = apply_multiplier(&v, &heat_multiplier(0.7)).unwrap();
        assert!(max_diff(&one, &via_multiplier) <= 1e-14 * v.max_abs());

        let mut mode = SpectralField::zeros(g);
        let k = g.index_of([1, 0, 0, 0]);
        mode.coeffs[k] = Complex64::new(2.0, 0.0);
        let out = heat_propagate(&mode, 1.5).unwrap();
        assert!((out.coeffs[k].re - 2.0 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cubic_term_examples() {
        let g = grid();
        assert!(nonlinear_term(&SpectralField::zeros(g))
            .unwrap()
            .coeffs
            .iter()
            .all(|c| c.norm() == 0.0));

        let c = PhysicalField::from_fn(g, |_| 0.7);
        let n = nonlinear_term(&transform_forward(&c).unwrap()).unwrap();
        let back = transform_inverse(&n).unwrap();
        assert!(back.values.iter().all(|v| (v - 0.343).abs() < 1e-12));

        let a = 0.9;
        let u = PhysicalField::from_fn(g, |x| a * x[0].cos());
        let n = nonlinear_term(&transform_forward(&u).unwrap()).unwrap();
        let scale = g.cell_volume() * g.len() as f64 / 2.0;
        let at = |k: [i64; 4]| n.coeffs[g.index_of(k)];
        assert!((at([1, 0, 0, 0]).re - 0.75 * a.powi(3) * scale).abs() < 1e-10 * scale);
        assert!((at([-3, 0, 0, 0]).re - 0.25 * a.powi(3) * scale).abs() < 1e-10 * scale);
        assert_eq!(n.hermitian_defect(), 0.0);

        // On an 8-point axis the third harmonic falls outside the band.
        let g8 = TorusGrid::new(16, 4.0 * PI).unwrap();
        let u = PhysicalField::from_fn(g8, |x| a * (2.0 * x[0]).cos());
        let n = nonlinear_term(&transform_forward(&u).unwrap()).unwrap();
        assert_eq!(n.coeffs[g8.index_of([6, 0, 0, 0])].norm(), 0.0);
        assert!(n.coeffs[g8.index_of([2, 0, 0, 0])].norm() > 0.0);
    }

    #[test]
    fn linear_stepping_is_exact() {
        let g = grid();
        let v = sample_field(g, 1.0);
        let mut s = SolverState::new(v.clone(), false).unwrap();
        for _ in 0..10 {
            s = step(&s, 0.37).unwrap();
        }
        let exact = heat_propagate(&v, s.t).unwrap();
        assert!(max_diff(&s.u_hat, &exact) <= 1e-12 * v.max_abs());
        // No stability restriction for the linear flow.
        assert!(step(&s, 1e3).is_ok());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid();
        let mut s = SolverState::new(SpectralField::zeros(g), true).unwrap();
        for _ in 0..3 {
            s = step(&s, 0.1).unwrap();
        }
        assert!(s.u_hat.coeffs.iter().all(|c| c.norm() == 0.0));
        assert_eq!(s.accumulators(), [0.0; 3]);
    }

    #[test]
    fn unstable_step_rejected() {
        let g = grid();
        let s = SolverState::new(sample_field(g, 3.0), true).unwrap();
        let bound = s.stability_bound();
        assert!(matches!(step(&s, 2.0 * bound), Err(Error::UnstableStep { .. })));
    }

    #[test]
    fn blow_up_reported_with_last_state() {
        let g = grid();
        let s = SolverState::new(sample_field(g, 0.1), true).unwrap();
        let huge = |_t: f64| transform_forward(&PhysicalField::from_fn(g, |_| 1e300));
        match step_forced(&s, 1.0, &huge) {
            Err(Error::BlowUpSuspected { last_state, .. }) => assert_eq!(last_state.t, 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn small_data_nonlinear_correction_is_cubic() {
        let g = grid();
        let deviation = |amp: f64| {
            let v = sample_field(g, amp);
            let mut s = SolverState::new(v.clone(), true).unwrap();
            for _ in 0..10 {
                s = step(&s, 0.05).unwrap();
            }
            let free = heat_propagate(&v, s.t).unwrap();
            let diff = SpectralField {
                grid: g,
                coeffs: s.u_hat.coeffs.iter().zip(&free.coeffs).map(|(a, b)| a - b).collect(),
            };
            sobolev_norm_sq(&diff, 0.0).unwrap().sqrt()
        };
        let ratio = deviation(0.1) / deviation(0.05);
        assert!((ratio - 8.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn duhamel_residual_behaviour() {
        let g = grid();
        let v = sample_field(g, 0.3);
        let collect = |nonlinear: bool, count: usize| {
            let mut snaps = vec![SolverState::new(v.clone(), nonlinear).unwrap()];
            let dt = 0.8 / count as f64;
            for _ in 0..count {
                let mut s = snaps.last().unwrap().clone();
                for _ in 0..4 {
                    s = step(&s, dt / 4.0).unwrap();
                }
                snaps.push(s);
            }
            snaps
        };
        assert!(duhamel_residual(&collect(false, 4)).unwrap() <= 1e-12);
        let coarse = duhamel_residual(&collect(true, 4)).unwrap();
        let fine = duhamel_residual(&collect(true, 8)).unwrap();
        assert!(coarse / fine >= 4.0, "{coarse} {fine}");
        let zeros = vec![SolverState::new(SpectralField::zeros(g), true).unwrap(); 1];
        assert!(duhamel_residual(&zeros).is_err());
        let mut z = SolverState::new(SpectralField::zeros(g), true).unwrap();
        let mut snaps = vec![z.clone()];
        for _ in 0..3 {
            z = step(&z, 0.1).unwrap();
            snaps.push(z.clone());
        }
        assert_eq!(duhamel_residual(&snaps).unwrap(), 0.0);
    }

    #[test]
    fn log_spacing() {
        let t = log_spaced(0.01, 10.0, 4);
        assert_eq!(t.len(), 4);
        assert!((t[1] - 0.1).abs() < 1e-15);
        assert_eq!(t[3], 10.0);
    }

    #[test]
    fn driver_hits_snapshots() {
        let g = grid();
        let config = SimulationConfig {
            grid: g,
            dt: 0.1,
            t_end: 1.0,
            snapshot_times: vec![0.0, 0.013, 0.25, 1.0],
            nonlinearity_enabled: true,
            datum: DatumSpec::Bump { delta: 0.1 },
        };
        let mut seen = Vec::new();
        let end = run(&config, |s| {
            seen.push(s.t);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, config.snapshot_times);
        assert_eq!(end.t, 1.0);
        let bad = SimulationConfig {
            snapshot_times: vec![0.5, 0.2],
            ..config
        };
        assert!(bad.validate().is_err());
    }
}
