//! Periodic grid, forward/inverse Fourier transforms, Fourier-multiplier
//! application, Riesz-transform velocity, and 2/3-rule dealiasing.
//!
//! Conventions (shared by every module):
//!
//! * The box is `[-L/2, L/2)^2`, sampled at `x_j = -L/2 + j*h`, `h = L/n`.
//! * The forward transform approximates `F[f](xi) = integral e^{-i x.xi} f dx`
//!   by cell-area-weighted sums, so a kernel with `F(0) = 1` has unit mass.
//! * Wavenumbers are `xi_k = (2*pi/L) * k` with `k` in the signed native FFT
//!   order `{0, 1, .., n/2-1, -n/2, .., -1}` per axis.
//! * Parseval: `cell_area * sum |f|^2 = (1/L^2) * sum |F|^2`, i.e.
//!   `||f||_2 = sqrt(sum |F|^2) / L`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SqgError};

/// Relative imaginary-residue tolerance when realizing a spectral field.
pub const HERMITIAN_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Discretization of the periodic box `[-L/2, L/2)^2` with `n` points per
/// axis (`n` a power of two, at least 16).
#[derive(Debug)]
pub struct Grid2D {
    n: usize,
    box_length: f64,
    /// Signed wavenumbers per axis in native FFT order.
    xi: Vec<f64>,
}

impl PartialEq for Grid2D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_length == other.box_length
    }
}

impl Grid2D {
    /// Builds a grid, validating the structural constraints.
    pub fn new(n: usize, box_length: f64) -> Result<Arc<Self>> {
        if n < 16 || !n.is_power_of_two() {
            return Err(SqgError::GridInvalid(format!(
                "n_points must be a power of two >= 16, got {n}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(SqgError::GridInvalid(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        let dxi = 2.0 * std::f64::consts::PI / box_length;
        let half = n / 2;
        let xi = (0..n)
            .map(|i| {
                let k = if i < half {
                    i as i64
                } else {
                    i as i64 - n as i64
                };
                dxi * k as f64
            })
            .collect();
        Ok(Arc::new(Grid2D { n, box_length, xi }))
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Area of one cell, `h^2`.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Signed wavenumbers per axis in native FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.xi
    }

    /// Wavenumber spacing `2*pi / L`.
    pub fn xi_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Largest representable wavenumber magnitude per axis, `(2*pi/L)*(n/2)`.
    pub fn xi_max(&self) -> f64 {
        self.xi_spacing() * (self.n / 2) as f64
    }

    /// Physical coordinates of grid point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        let half = self.box_length / 2.0;
        (-half + i as f64 * h, -half + j as f64 * h)
    }

    /// Signed integer index of array position `i` (i.e. `xi[i] / xi_spacing`).
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }
}

fn assert_same_grid(a: &Arc<Grid2D>, b: &Arc<Grid2D>) {
    assert!(
        a == b,
        "fields live on different grids: {}x{} (L={}) vs {}x{} (L={})",
        a.n,
        a.n,
        a.box_length,
        b.n,
        b.n,
        b.box_length
    );
}

// ---------------------------------------------------------------------------
// FFT plan cache
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans_for(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("FFT plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::<f64>::new();
            Plans {
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place 2D DFT over a row-major `n x n` complex buffer (rows, then
/// columns). Unnormalized in both directions, matching `rustfft`.
fn fft2_inplace(data: &mut [Complex64], n: usize, forward: bool) {
    let plans = plans_for(n);
    let fft = if forward { plans.fwd } else { plans.inv };
    fft.process(data);
    transpose_square(data, n);
    fft.process(data);
    transpose_square(data, n);
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Real scalar field sampled on the grid points.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        PhysicalField {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.n * grid.n],
        }
    }

    /// Samples `f(x1, x2)` at every grid point. Errors if any value is
    /// non-finite.
    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = grid.point(i, j);
                values.push(f(x1, x2));
            }
        }
        Self::from_values(grid, values)
    }

    /// Wraps a row-major value buffer. Errors on wrong length or non-finite
    /// entries.
    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n * grid.n {
            return Err(SqgError::DomainError(format!(
                "value buffer has length {}, grid needs {}",
                values.len(),
                grid.n * grid.n
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(SqgError::DomainError(format!(
                "non-finite field value at flat index {bad}"
            )));
        }
        Ok(PhysicalField {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Cell-area-weighted grid integral.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    /// Pointwise product with another field on the same grid.
    pub fn pointwise_mul(&self, other: &PhysicalField) -> PhysicalField {
        assert_same_grid(&self.grid, &other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        PhysicalField {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

/// Complex Fourier coefficients of a field, indexed by wavenumber pair in
/// native order (`coeffs[k1 * n + k2]`).
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid2D>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n * grid.n],
        }
    }

    /// Builds a field directly from a symbol `m(xi1, xi2)`. Errors with
    /// `NonFiniteSymbol` if the symbol is NaN/Inf anywhere on the lattice.
    pub fn from_symbol(grid: &Arc<Grid2D>, m: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let n = grid.n;
        let mut coeffs = Vec::with_capacity(n * n);
        for k1 in 0..n {
            let xi1 = grid.xi[k1];
            for k2 in 0..n {
                let xi2 = grid.xi[k2];
                let v = m(xi1, xi2);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(SqgError::NonFiniteSymbol { xi1, xi2 });
                }
                coeffs.push(v);
            }
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at array indices `(k1, k2)` (native wavenumber order).
    pub fn coeff(&self, k1: usize, k2: usize) -> Complex64 {
        self.coeffs[k1 * self.grid.n + k2]
    }

    /// The `xi = 0` coefficient (equal to the grid integral of the field).
    pub fn zero_mode(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Parseval L2 norm: `sqrt(sum |c|^2) / L`, which equals the physical
    /// cell-area-weighted L2 norm up to round-off.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        sum.sqrt() / self.grid.box_length
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    /// `self += w * other`, in place.
    pub fn add_scaled(&mut self, w: f64, other: &SpectralField) {
        assert_same_grid(&self.grid, &other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += w * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.coeffs.iter_mut() {
            *a *= c;
        }
    }

    /// Maximum deviation from conjugate symmetry, relative to the largest
    /// coefficient magnitude (0 for the zero field).
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.grid.n;
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k1 in 0..n {
            let m1 = (n - k1) % n;
            for k2 in 0..n {
                let m2 = (n - k2) % n;
                let d = (self.coeffs[k1 * n + k2] - self.coeffs[m1 * n + m2].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }
}

impl std::ops::Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_same_grid(&self.grid, &rhs.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        SpectralField {
            grid: Arc::clone(&self.grid),
            coeffs,
        }
    }
}

impl std::ops::Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_same_grid(&self.grid, &rhs.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        SpectralField {
            grid: Arc::clone(&self.grid),
            coeffs,
        }
    }
}

/// Velocity field with two real components.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub u1: PhysicalField,
    pub u2: PhysicalField,
}

impl VectorField {
    /// Largest pointwise speed `max sqrt(u1^2 + u2^2)`.
    pub fn max_speed(&self) -> f64 {
        self.u1
            .values
            .iter()
            .zip(&self.u2.values)
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// Forward transform: returns coefficients approximating
/// `F[f](xi) = integral e^{-i x.xi} f(x) dx` at the grid wavenumbers.
pub fn fft_forward(f: &PhysicalField) -> SpectralField {
    let grid = &f.grid;
    let n = grid.n;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_inplace(&mut data, n, true);
    // The grid starts at -L/2, which shows up as a (-1)^{k1+k2} phase on the
    // raw DFT; fold it in together with the cell-area weight.
    let h2 = grid.cell_area();
    for k1 in 0..n {
        for k2 in 0..n {
            let sign = if (k1 + k2) % 2 == 0 { h2 } else { -h2 };
            data[k1 * n + k2] *= sign;
        }
    }
    SpectralField {
        grid: Arc::clone(grid),
        coeffs: data,
    }
}

/// Inverse transform onto the grid. Errors with `NonHermitianInput` when the
/// coefficients visibly lack conjugate symmetry (an upstream multiplier
/// bug); the check is against the input's own scale, so structurally sound
/// fields of any magnitude pass.
pub fn fft_inverse(f: &SpectralField) -> Result<PhysicalField> {
    let residue = f.hermitian_residual();
    if residue > HERMITIAN_TOL {
        return Err(SqgError::NonHermitianInput {
            residue,
            tolerance: HERMITIAN_TOL,
        });
    }
    Ok(fft_inverse_unchecked(f))
}

/// Inverse transform without the symmetry check, for internal pipelines
/// that slice tiny spectral tails out of a sound field (a subfield's
/// round-off asymmetry is bounded by the parent's scale, not its own).
pub(crate) fn fft_inverse_unchecked(f: &SpectralField) -> PhysicalField {
    let grid = &f.grid;
    let n = grid.n;
    let inv_l2 = 1.0 / (grid.box_length * grid.box_length);
    let mut data = f.coeffs.clone();
    for k1 in 0..n {
        for k2 in 0..n {
            let sign = if (k1 + k2) % 2 == 0 { inv_l2 } else { -inv_l2 };
            data[k1 * n + k2] *= sign;
        }
    }
    fft2_inplace(&mut data, n, false);
    let values = data.iter().map(|c| c.re).collect();
    PhysicalField {
        grid: Arc::clone(grid),
        values,
    }
}

/// Pointwise multiplier application: `out(xi) = m(xi) * in(xi)`. The symbol
/// must be finite at every grid wavenumber (supply the origin value
/// explicitly for symbols singular at `xi = 0`).
pub fn apply_multiplier(
    f: &SpectralField,
    m: impl Fn(f64, f64) -> Complex64,
) -> Result<SpectralField> {
    let grid = &f.grid;
    let n = grid.n;
    let mut coeffs = Vec::with_capacity(n * n);
    for k1 in 0..n {
        let xi1 = grid.xi[k1];
        for k2 in 0..n {
            let xi2 = grid.xi[k2];
            let mv = m(xi1, xi2);
            if !mv.re.is_finite() || !mv.im.is_finite() {
                return Err(SqgError::NonFiniteSymbol { xi1, xi2 });
            }
            coeffs.push(mv * f.coeffs[k1 * n + k2]);
        }
    }
    Ok(SpectralField {
        grid: Arc::clone(grid),
        coeffs,
    })
}

/// Velocity recovery `u = (-R2 theta, R1 theta)` where `R_j` has symbol
/// `i xi_j / |xi|` (regularized to 0 at the origin): divergence-free by
/// construction, returned in physical space. Because the symbol is odd, the
/// self-conjugate Nyquist lines cannot carry it and are zeroed, keeping the
/// velocity real for real input.
pub fn riesz_velocity(theta: &SpectralField) -> Result<VectorField> {
    let residue = theta.hermitian_residual();
    if residue > HERMITIAN_TOL {
        return Err(SqgError::NonHermitianInput {
            residue,
            tolerance: HERMITIAN_TOL,
        });
    }
    let grid = &theta.grid;
    let n = grid.n;
    let nyq = n / 2;
    let mut c1 = Vec::with_capacity(n * n);
    let mut c2 = Vec::with_capacity(n * n);
    for k1 in 0..n {
        let xi1 = grid.xi[k1];
        for k2 in 0..n {
            let xi2 = grid.xi[k2];
            let r = xi1.hypot(xi2);
            let t = theta.coeffs[k1 * n + k2];
            if r == 0.0 || k1 == nyq || k2 == nyq {
                c1.push(Complex64::new(0.0, 0.0));
                c2.push(Complex64::new(0.0, 0.0));
            } else {
                // u1_hat = -(i xi2 / |xi|) theta_hat, u2_hat = (i xi1 / |xi|) theta_hat
                let i_t = Complex64::new(-t.im, t.re); // i * t
                c1.push(-(xi2 / r) * i_t);
                c2.push((xi1 / r) * i_t);
            }
        }
    }
    let s1 = SpectralField {
        grid: Arc::clone(grid),
        coeffs: c1,
    };
    let s2 = SpectralField {
        grid: Arc::clone(grid),
        coeffs: c2,
    };
    let u1 = fft_inverse_unchecked(&s1);
    let u2 = fft_inverse_unchecked(&s2);
    Ok(VectorField { u1, u2 })
}

/// Standard 2/3-rule dealiasing: zeroes every coefficient with
/// `max(|xi1|, |xi2|) > (2/3) * xi_max`, i.e. signed index beyond `n/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let grid = &f.grid;
    let n = grid.n;
    let keep = (n / 3) as i64;
    let mut coeffs = f.coeffs.clone();
    for k1 in 0..n {
        let s1 = grid.signed_index(k1).abs();
        for k2 in 0..n {
            let s2 = grid.signed_index(k2).abs();
            if s1.max(s2) > keep {
                coeffs[k1 * n + k2] = Complex64::new(0.0, 0.0);
            }
        }
    }
    SpectralField {
        grid: Arc::clone(grid),
        coeffs,
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
