//! Fourier analysis on the periodic four-dimensional lattice.
//!
//! Coefficients are normalized so that they approximate the continuum
//! transform `v̂(ξ) = ∫ v(x) e^{-iξ·x} dx`:
//!
//! ```text
//! v̂_k  = h⁴ Σ_x v(x) e^{-i ξ_k·x}
//! v(x) = L⁻⁴ Σ_k v̂_k e^{+i ξ_k·x}
//! ```
//!
//! With this convention the discrete Plancherel identity reads
//! `h⁴ Σ_x |v|² = L⁻⁴ Σ_k |v̂_k|²`, and `L⁻⁴ = (2π)⁻⁴ Δξ⁴` is the
//! Riemann weight of a single lattice mode.
//!
//! Storage is a flat array in row-major order `((i0·N + i1)·N + i2)·N + i3`
//! for both representations. Lattice index `j` on an axis corresponds to the
//! wavenumber `k = j` for `j < N/2` and `k = j - N` otherwise.
//!
//! All reductions split the lattice into `N` hyperplanes, sum each plane
//! sequentially and combine the partial sums in plane order, so results are
//! bit-identical for any size of the rayon pool.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Number of spatial dimensions of the lattice.
pub const DIM: usize = 4;

/// Batch size (in lines) handed to a single FFT task.
const LINES_PER_TASK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    side: f64,
}

impl TorusGrid {
    pub fn new(points_per_dim: usize, side_length: f64) -> Result<Self> {
        if points_per_dim < 16 || points_per_dim % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points_per_dim must be even and >= 16, got {points_per_dim}"
            )));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side_length must be positive and finite, got {side_length}"
            )));
        }
        Ok(Self {
            n: points_per_dim,
            side: side_length,
        })
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn side_length(&self) -> f64 {
        self.side
    }

    /// Lattice spacing `h = L/N`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Frequency spacing `Δξ = 2π/L`.
    pub fn frequency_spacing(&self) -> f64 {
        2.0 * PI / self.side
    }

    /// Total number of lattice sites, `N⁴`.
    pub fn len(&self) -> usize {
        self.n.pow(DIM as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h⁴`, the volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(DIM as i32)
    }

    /// `(2π)⁻⁴ Δξ⁴ = L⁻⁴`, the weight of one frequency in lattice sums.
    pub fn mode_weight(&self) -> f64 {
        self.side.powi(DIM as i32).recip()
    }

    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn wavevector(&self, index: usize) -> [i64; DIM] {
        let n = self.n;
        [
            self.wavenumber(index / (n * n * n)),
            self.wavenumber((index / (n * n)) % n),
            self.wavenumber((index / n) % n),
            self.wavenumber(index % n),
        ]
    }

    /// Flat index of the wavevector `k`, taken modulo `N` on each axis.
    pub fn index_of(&self, k: [i64; DIM]) -> usize {
        let n = self.n as i64;
        k.iter()
            .fold(0usize, |acc, &ki| acc * self.n + ki.rem_euclid(n) as usize)
    }

    pub fn xi(&self, index: usize) -> [f64; DIM] {
        let dxi = self.frequency_spacing();
        self.wavevector(index).map(|k| dxi * k as f64)
    }

    pub fn xi_sq(&self, index: usize) -> f64 {
        self.xi(index).iter().map(|x| x * x).sum()
    }

    /// Physical coordinates `x = h·j` of a lattice site.
    pub fn position(&self, index: usize) -> [f64; DIM] {
        let n = self.n;
        let h = self.spacing();
        [
            index / (n * n * n),
            (index / (n * n)) % n,
            (index / n) % n,
            index % n,
        ]
        .map(|j| h * j as f64)
    }

    /// Largest per-axis frequency magnitude, `πN/L`.
    pub fn axis_nyquist(&self) -> f64 {
        PI * self.n as f64 / self.side
    }

    /// Bound on `|ξ|` over the lattice: `√4 · πN/L`.
    pub fn nyquist_corner(&self) -> f64 {
        (DIM as f64).sqrt() * self.axis_nyquist()
    }

    /// Horizon `(L/2π)²/4` after which the lowest nonzero mode dominates and
    /// algebraic decay gives way to exponential decay on the torus.
    pub fn t_box(&self) -> f64 {
        (self.side / (2.0 * PI)).powi(2) / 4.0
    }

    fn mirror_axis(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    pub(crate) fn mirror_index(&self, index: usize) -> usize {
        let n = self.n;
        let i0 = index / (n * n * n);
        let i1 = (index / (n * n)) % n;
        let i2 = (index / n) % n;
        let i3 = index % n;
        ((self.mirror_axis(i0) * n + self.mirror_axis(i1)) * n + self.mirror_axis(i2)) * n
            + self.mirror_axis(i3)
    }

    /// `|ξ_k|²` for every lattice site, in storage order.
    pub fn xi_sq_table(&self) -> Vec<f64> {
        let axis = self.axis_xi_sq();
        let n = self.n;
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(n * n * n)
            .enumerate()
            .for_each(|(i0, plane)| {
                let mut idx = 0;
                for i1 in 0..n {
                    for i2 in 0..n {
                        let partial = axis[i0] + axis[i1] + axis[i2];
                        for q in axis.iter() {
                            plane[idx] = partial + q;
                            idx += 1;
                        }
                    }
                }
            });
        out
    }

    fn axis_xi_sq(&self) -> Vec<f64> {
        let dxi = self.frequency_spacing();
        (0..self.n)
            .map(|j| (dxi * self.wavenumber(j) as f64).powi(2))
            .collect()
    }

    /// Sum of `f(index)` over the lattice with a fixed reduction order.
    pub(crate) fn ordered_sum<F>(&self, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let plane = self.n * self.n * self.n;
        let partials: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i0| {
                let start = i0 * plane;
                (start..start + plane).map(&f).sum::<f64>()
            })
            .collect();
        partials.iter().sum()
    }
}

/// Real-valued samples of a field on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl PhysicalField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every lattice site.
    pub fn from_fn<F>(grid: TorusGrid, f: F) -> Self
    where
        F: Fn([f64; DIM]) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.position(i)))
            .collect();
        Self { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lattice Fourier coefficients of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Coefficient of the zero frequency.
    pub fn mean_coefficient(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest violation of `v̂_{-k} = conj(v̂_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.mirror_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, other: &TorusGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other
            )));
        }
        Ok(())
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalized 4D DFT: one batch of 1D transforms along the contiguous
/// axis, then a cyclic rotation of the axes, four times over.
fn fft4(data: &mut Vec<Complex64>, n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut rotated = vec![Complex64::new(0.0, 0.0); data.len()];
    let scratch_len = fft.get_inplace_scratch_len();
    for _ in 0..DIM {
        data.par_chunks_mut(n * LINES_PER_TASK).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, chunk| fft.process_with_scratch(chunk, scratch),
        );
        rotate_axes(data, &mut rotated, n);
        std::mem::swap(data, &mut rotated);
    }
}

/// `out[i3][i0 i1 i2] = input[i0 i1 i2][i3]`.
fn rotate_axes(input: &[Complex64], out: &mut [Complex64], n: usize) {
    let rows = n * n * n;
    const BLOCK: usize = 64;
    out.par_chunks_mut(rows).enumerate().for_each(|(i3, row)| {
        for (b, block) in row.chunks_mut(BLOCK).enumerate() {
            let base = b * BLOCK;
            for (m, slot) in block.iter_mut().enumerate() {
                *slot = input[(base + m) * n + i3];
            }
        }
    });
}

fn hermitian_symmetrize(grid: &TorusGrid, data: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points_per_dim();
    let plane = n * n * n;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(i0, chunk)| {
        for (off, slot) in chunk.iter_mut().enumerate() {
            let idx = i0 * plane + off;
            let partner = data[grid.mirror_index(idx)].conj();
            *slot = (data[idx] + partner) * 0.5;
        }
    });
    out
}

/// Forward transform with the `h⁴` normalization. The result is made exactly
/// Hermitian, as befits real input.
pub fn transform_forward(v: &PhysicalField) -> Result<SpectralField> {
    if let Some(index) = v.values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let grid = v.grid;
    let scale = grid.cell_volume();
    let mut data: Vec<Complex64> = v.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft4(&mut data, grid.points_per_dim(), &plans(grid.points_per_dim()).forward);
    data.par_iter_mut().for_each(|c| *c *= scale);
    Ok(SpectralField {
        grid,
        coeffs: hermitian_symmetrize(&grid, &data),
    })
}

fn inverse_complex(v: &SpectralField) -> Result<Vec<Complex64>> {
    if let Some(index) = v
        .coeffs
        .iter()
        .position(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        return Err(Error::NonFinite { index });
    }
    let grid = v.grid;
    let mut data = v.coeffs.clone();
    fft4(&mut data, grid.points_per_dim(), &plans(grid.points_per_dim()).inverse);
    let scale = grid.mode_weight();
    data.par_iter_mut().for_each(|c| *c *= scale);
    Ok(data)
}

/// Inverse transform; the imaginary part (roundoff for Hermitian input) is
/// discarded.
pub fn transform_inverse(v: &SpectralField) -> Result<PhysicalField> {
    let data = inverse_complex(v)?;
    Ok(PhysicalField {
        grid: v.grid,
        values: data.iter().map(|c| c.re).collect(),
    })
}

/// Inverse transform together with `max |Im u| / max |Re u|` (0 for the zero
/// field).
pub fn transform_inverse_with_residue(v: &SpectralField) -> Result<(PhysicalField, f64)> {
    let data = inverse_complex(v)?;
    let (re_max, im_max) = data
        .iter()
        .fold((0.0f64, 0.0f64), |(r, i), c| (r.max(c.re.abs()), i.max(c.im.abs())));
    let residue = if re_max > 0.0 { im_max / re_max } else { im_max };
    Ok((
        PhysicalField {
            grid: v.grid,
            values: data.iter().map(|c| c.re).collect(),
        },
        residue,
    ))
}

/// Value assigned to a multiplier at `ξ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginRule {
    /// Evaluate the symbol at the origin like any other point.
    Evaluate,
    Value(f64),
    /// The symbol is singular at the origin; the field must have zero mean,
    /// and the mean coefficient stays zero.
    RequireZeroMean,
}

/// Whether the symbol contains odd powers of individual `ξ` components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    /// Coefficients with a component at `k = -N/2` have no Hermitian partner
    /// along that axis and are zeroed.
    Odd,
}

/// A Fourier multiplier `m(ξ)` with its rule at the origin.
pub struct Multiplier<F> {
    symbol: F,
    origin: OriginRule,
    parity: Parity,
}

impl<F> Multiplier<F>
where
    F: Fn(&[f64; DIM]) -> Complex64 + Sync,
{
    pub fn new(symbol: F, origin: OriginRule, parity: Parity) -> Self {
        Self {
            symbol,
            origin,
            parity,
        }
    }
}

fn xi_norm(xi: &[f64; DIM]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|ξ|^s`; `s = 1` is `Λ = (-Δ)^{1/2}`.
pub fn power_multiplier(s: f64) -> Multiplier<impl Fn(&[f64; DIM]) -> Complex64 + Sync> {
    let origin = if s > 0.0 {
        OriginRule::Value(0.0)
    } else if s == 0.0 {
        OriginRule::Value(1.0)
    } else {
        OriginRule::RequireZeroMean
    };
    Multiplier::new(
        move |xi: &[f64; DIM]| Complex64::new(xi_norm(xi).powf(s), 0.0),
        origin,
        Parity::Even,
    )
}

/// Heat kernel `e^{-t|ξ|²}`.
pub fn heat_multiplier(t: f64) -> Multiplier<impl Fn(&[f64; DIM]) -> Complex64 + Sync> {
    Multiplier::new(
        move |xi: &[f64; DIM]| {
            let q: f64 = xi.iter().map(|x| x * x).sum();
            Complex64::new((-t * q).exp(), 0.0)
        },
        OriginRule::Evaluate,
        Parity::Even,
    )
}

/// `i ξ_axis`, the symbol of `∂/∂x_axis`.
pub fn derivative_multiplier(axis: usize) -> Multiplier<impl Fn(&[f64; DIM]) -> Complex64 + Sync> {
    Multiplier::new(
        move |xi: &[f64; DIM]| Complex64::new(0.0, xi[axis]),
        OriginRule::Value(0.0),
        Parity::Odd,
    )
}

pub fn apply_multiplier<F>(v: &SpectralField, m: &Multiplier<F>) -> Result<SpectralField>
where
    F: Fn(&[f64; DIM]) -> Complex64 + Sync,
{
    let grid = v.grid;
    let nyq = -(grid.points_per_dim() as i64) / 2;
    let mean = v.coeffs[0];
    if m.origin == OriginRule::RequireZeroMean && mean.norm() != 0.0 {
        return Err(Error::NonzeroMean);
    }
    let plane = grid.len() / grid.points_per_dim();
    let mut coeffs = v.coeffs.clone();
    let bad: Vec<Option<usize>> = coeffs
        .par_chunks_mut(plane)
        .enumerate()
        .map(|(i0, chunk)| {
            for (off, c) in chunk.iter_mut().enumerate() {
                let idx = i0 * plane + off;
                let factor = if idx == 0 {
                    match m.origin {
                        OriginRule::Evaluate => (m.symbol)(&[0.0; DIM]),
                        OriginRule::Value(x) => Complex64::new(x, 0.0),
                        OriginRule::RequireZeroMean => Complex64::new(0.0, 0.0),
                    }
                } else if m.parity == Parity::Odd && grid.wavevector(idx).contains(&nyq) {
                    Complex64::new(0.0, 0.0)
                } else {
                    (m.symbol)(&grid.xi(idx))
                };
                if !(factor.re.is_finite() && factor.im.is_finite()) {
                    return Some(idx);
                }
                *c *= factor;
            }
            None
        })
        .collect();
    if let Some(index) = bad.into_iter().flatten().next() {
        return Err(Error::NonFiniteMultiplier { index });
    }
    Ok(SpectralField { grid, coeffs })
}

/// Whether a wavevector lies inside the band kept by the 2/3 rule,
/// `|k_i| ≤ N/3` on every axis.
pub fn in_dealias_band(grid: &TorusGrid, k: &[i64; DIM]) -> bool {
    let n = grid.points_per_dim() as i64;
    k.iter().all(|&ki| 3 * ki.abs() <= n)
}

pub(crate) fn dealias_in_place(grid: &TorusGrid, coeffs: &mut [Complex64]) {
    let n = grid.points_per_dim();
    let keep: Vec<bool> = (0..n)
        .map(|j| 3 * grid.wavenumber(j).abs() <= n as i64)
        .collect();
    let plane = n * n * n;
    coeffs
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(i0, chunk)| {
            if !keep[i0] {
                chunk.fill(Complex64::new(0.0, 0.0));
                return;
            }
            for (off, c) in chunk.iter_mut().enumerate() {
                let i1 = off / (n * n);
                let i2 = (off / n) % n;
                let i3 = off % n;
                if !(keep[i1] && keep[i2] && keep[i3]) {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        });
}

/// Zeroes every coefficient with some `|k_i| > N/3`.
pub fn dealias(v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    dealias_in_place(&v.grid, &mut out.coeffs);
    out
}

/// `‖v‖²_{Ḣ^s} = L⁻⁴ Σ_k |ξ_k|^{2s} |v̂_k|²`.
pub fn sobolev_norm_sq(v: &SpectralField, s: f64) -> Result<f64> {
    let grid = v.grid;
    let mean_sq = v.coeffs[0].norm_sqr();
    if s < 0.0 && mean_sq != 0.0 {
        return Err(Error::NonzeroMean);
    }
    let origin = if s == 0.0 { mean_sq } else { 0.0 };
    let sum = if s == 0.0 {
        grid.ordered_sum(|i| if i == 0 { 0.0 } else { v.coeffs[i].norm_sqr() })
    } else if s == 1.0 {
        grid.ordered_sum(|i| grid.xi_sq(i) * v.coeffs[i].norm_sqr())
    } else {
        grid.ordered_sum(|i| {
            if i == 0 {
                0.0
            } else {
                grid.xi_sq(i).powf(s) * v.coeffs[i].norm_sqr()
            }
        })
    };
    Ok(grid.mode_weight() * (sum + origin))
}

/// `(h⁴ Σ_x |v|^p)^{1/p}` for `p ∈ {2, 4, 6}`.
pub fn lebesgue_norm(v: &PhysicalField, p: f64) -> Result<f64> {
    let power = match p {
        x if x == 2.0 => 2,
        x if x == 4.0 => 4,
        x if x == 6.0 => 6,
        _ => return Err(Error::UnsupportedExponent(p)),
    };
    let sum = v.grid.ordered_sum(|i| v.values[i].powi(power));
    Ok((v.grid.cell_volume() * sum).powf(1.0 / p))
}

/// `h⁴ Σ_x v^p` for an integer power.
pub(crate) fn lattice_integral_pow(v: &PhysicalField, power: i32) -> f64 {
    v.grid.cell_volume() * v.grid.ordered_sum(|i| v.values[i].powi(power))
}
