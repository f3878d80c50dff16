//! Uniform spatial and frequency grids, quadrature rules, and differentiation
//! primitives shared by every other module.
//!
//! The spatial grid is a closed symmetric grid: `n` intervals (a power of two)
//! and `n + 1` nodes including both endpoints, so that composite Simpson
//! quadrature covers the whole box exactly and the reflection `x -> -x` maps
//! node `j` to node `n - j`.  FFT-based operations use the first `n` samples
//! (the periodic extension repeats node 0 at node `n`).
//!
//! The frequency grid for the distorted transform is a half-shifted uniform
//! grid: nodes at `+-(m + 1/2) dk`, symmetric under `k -> -k` and excluding
//! `k = 0`, where the generalized eigenfunctions branch.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Relative boundary threshold above which a field is considered poorly
/// represented by the periodic spectral derivative.
pub const BOUNDARY_WARN_THRESHOLD: f64 = 1e-12;

/// Parity tag carried by sampled fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    None,
    Odd,
    Even,
}

impl Parity {
    /// Parity of the derivative of a field with this parity.
    pub fn flipped(self) -> Parity {
        match self {
            Parity::None => Parity::None,
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }
}

/// Closed symmetric spatial grid with `n` intervals and `n + 1` nodes.
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    x_max: f64,
    n: usize,
    dx: f64,
    nodes: Vec<f64>,
    simpson: Vec<f64>,
}

impl SpatialGrid {
    /// Build a symmetric grid on `[-x_max, x_max]` with `n` intervals.
    ///
    /// `n` must be a power of two, at least 16.
    pub fn symmetric(x_max: f64, n: usize) -> Result<Arc<Self>> {
        if n < 16 || !n.is_power_of_two() {
            return Err(CoreError::Grid(format!(
                "interval count must be a power of two >= 16, got {n}"
            )));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(CoreError::Grid(format!("x_max must be positive, got {x_max}")));
        }
        let dx = 2.0 * x_max / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|j| -x_max + j as f64 * dx).collect();
        // Composite Simpson weights over the n (even) intervals.
        let mut simpson = vec![0.0; n + 1];
        simpson[0] = dx / 3.0;
        simpson[n] = dx / 3.0;
        for (j, w) in simpson.iter_mut().enumerate().take(n).skip(1) {
            *w = if j % 2 == 1 { 4.0 * dx / 3.0 } else { 2.0 * dx / 3.0 };
        }
        Ok(Arc::new(SpatialGrid { x_max, n, dx, nodes, simpson }))
    }

    pub fn x_min(&self) -> f64 {
        -self.x_max
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of intervals (a power of two).  The FFT length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn num_nodes(&self) -> usize {
        self.n + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Composite Simpson quadrature weights (length `n + 1`).
    pub fn weights(&self) -> &[f64] {
        &self.simpson
    }

    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        self.n / 2
    }

    /// Index of the mirror node `-x_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.n - j
    }
}

/// Half-shifted symmetric frequency grid for the distorted transform.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    k_max: f64,
    n_k: usize,
    dk: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Derivative-at-the-endpoint weights of the cubic through the first four
/// half-shifted nodes, used for the quadrature correction at the `k = 0`
/// branch point (values are `l_i'(0)` for nodes at `(i + 1/2) dk`).
const ENDPOINT_DERIV: [f64; 4] = [-71.0 / 24.0, 141.0 / 24.0, -93.0 / 24.0, 23.0 / 24.0];

impl FrequencyGrid {
    /// Build the distorted grid on `[-k_max, k_max]` with `n_k` nodes at
    /// `+-(m + 1/2) dk`, `dk = 2 k_max / n_k`.
    pub fn distorted(k_max: f64, n_k: usize) -> Result<Arc<Self>> {
        if n_k < 16 || n_k % 2 != 0 {
            return Err(CoreError::Grid(format!(
                "frequency grid needs an even node count >= 16, got {n_k}"
            )));
        }
        if !(k_max > 0.0) || !k_max.is_finite() {
            return Err(CoreError::Grid(format!("k_max must be positive, got {k_max}")));
        }
        let dk = 2.0 * k_max / n_k as f64;
        let nodes: Vec<f64> = (0..n_k).map(|m| -k_max + (m as f64 + 0.5) * dk).collect();
        // Plain midpoint weights.  The half-shifted grid makes the midpoint
        // rule spectrally accurate for smooth decaying integrands, and the
        // k = 0 branch point sits on a cell boundary so each half-line is
        // integrated cleanly.
        let weights = vec![dk; n_k];
        Ok(Arc::new(FrequencyGrid { k_max, n_k, dk, nodes, weights }))
    }

    /// Midpoint weights with a one-sided cubic correction on the four
    /// innermost nodes of each half-line, removing the O(dk^2) boundary term
    /// of half-line integrals whose integrand has a kink at `k = 0`.
    ///
    /// Only appropriate for non-oscillatory integrands (norms, moments): the
    /// correction degrades reconstruction kernels `exp(ikx)` at large `|x|`.
    pub fn kink_corrected_weights(&self) -> Vec<f64> {
        let mut weights = self.weights.clone();
        let half = self.n_k / 2;
        for (i, l) in ENDPOINT_DERIV.iter().enumerate() {
            weights[half + i] -= self.dk / 24.0 * l;
            weights[half - 1 - i] -= self.dk / 24.0 * l;
        }
        weights
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.n_k
    }

    pub fn is_empty(&self) -> bool {
        self.n_k == 0
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    /// Smallest retained |k|; the grid never contains `k = 0`.
    pub fn k_min_abs(&self) -> f64 {
        self.dk / 2.0
    }

    pub fn node(&self, m: usize) -> f64 {
        self.nodes[m]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights for integrals over the grid.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the first positive node; `0..half()` are the negative nodes.
    pub fn half(&self) -> usize {
        self.n_k / 2
    }

    /// Index of the node at `-k_m`.
    pub fn mirror(&self, m: usize) -> usize {
        self.n_k - 1 - m
    }

    /// Positive-half index of node `m` (distance from `k = 0` in nodes).
    pub fn fold(&self, m: usize) -> usize {
        if m >= self.half() {
            m - self.half()
        } else {
            self.half() - 1 - m
        }
    }
}

/// How a field behaves at the box boundary for spectral operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Decayed or periodic: FFT-based operations are valid.
    Periodic,
    /// Not representable periodically; use finite differences.
    NonPeriodic,
}

/// Sampled complex-valued function on a spatial grid.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<SpatialGrid>,
    samples: Array1<C64>,
    parity: Parity,
    boundary: BoundaryKind,
}

impl ComplexField {
    pub fn new(grid: Arc<SpatialGrid>, samples: Array1<C64>, parity: Parity) -> Result<Self> {
        if samples.len() != grid.num_nodes() {
            return Err(CoreError::Grid(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                grid.num_nodes()
            )));
        }
        let field = ComplexField { grid, samples, parity, boundary: BoundaryKind::Periodic };
        field.check_parity()?;
        Ok(field)
    }

    /// Build a field by evaluating `f` at the grid nodes.
    pub fn from_fn(grid: &Arc<SpatialGrid>, parity: Parity, f: impl Fn(f64) -> C64) -> Result<Self> {
        let samples: Array1<C64> = grid.nodes().iter().map(|&x| f(x)).collect();
        ComplexField::new(Arc::clone(grid), samples, parity)
    }

    pub fn zeros(grid: &Arc<SpatialGrid>) -> Self {
        ComplexField {
            grid: Arc::clone(grid),
            samples: Array1::zeros(grid.num_nodes()),
            parity: Parity::None,
            boundary: BoundaryKind::Periodic,
        }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &Array1<C64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut Array1<C64> {
        &mut self.samples
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn set_parity(&mut self, parity: Parity) -> Result<()> {
        self.parity = parity;
        self.check_parity()
    }

    /// Tag a parity that holds by construction (e.g. the derivative of a
    /// tagged field) without re-validating against rounding noise.
    pub fn set_parity_unchecked(&mut self, parity: Parity) {
        self.parity = parity;
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn set_boundary(&mut self, boundary: BoundaryKind) {
        self.boundary = boundary;
    }

    fn check_parity(&self) -> Result<()> {
        if self.parity == Parity::None {
            return Ok(());
        }
        let sup = self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if sup == 0.0 {
            return Ok(());
        }
        let sign = if self.parity == Parity::Even { 1.0 } else { -1.0 };
        let n = self.grid.n();
        for j in 0..=n {
            let mirrored = self.samples[n - j] * sign;
            if (self.samples[j] - mirrored).norm() > 1e-12 * sup {
                return Err(CoreError::Grid(format!(
                    "samples violate declared {:?} parity at node {j}",
                    self.parity
                )));
            }
        }
        Ok(())
    }

    /// L2 norm with quadrature weights.
    pub fn norm_l2(&self) -> f64 {
        self.samples
            .iter()
            .zip(self.grid.weights())
            .map(|(z, w)| w * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Supremum norm over the nodes.
    pub fn norm_sup(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest sample modulus over the outermost `frac` of the box on each side,
    /// relative to the overall supremum (0 when the field vanishes).
    pub fn boundary_fraction(&self, frac: f64) -> f64 {
        let sup = self.norm_sup();
        if sup == 0.0 {
            return 0.0;
        }
        let edge = ((self.grid.num_nodes() as f64) * frac).ceil() as usize;
        let n = self.grid.num_nodes();
        let mut worst: f64 = 0.0;
        for j in 0..edge.min(n) {
            worst = worst.max(self.samples[j].norm());
            worst = worst.max(self.samples[n - 1 - j].norm());
        }
        worst / sup
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ComplexField {
            grid: Arc::clone(&self.grid),
            samples: self.samples.mapv(&f),
            parity: Parity::None,
            boundary: self.boundary,
        }
    }
}

/// Composite-Simpson quadrature of a field over the box.
///
/// Exact for cubics sampled on the grid.  Rejects non-finite samples.
pub fn quad_integrate(f: &ComplexField) -> Result<C64> {
    for (j, z) in f.samples().iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(CoreError::NonFinite { index: j, value: format!("{z}") });
        }
    }
    Ok(f.samples()
        .iter()
        .zip(f.grid().weights())
        .map(|(z, w)| z * *w)
        .sum())
}

/// Simpson-weighted sum of raw samples on a grid (no finiteness check).
pub fn quad_samples(grid: &SpatialGrid, samples: &[C64]) -> C64 {
    samples.iter().zip(grid.weights()).map(|(z, w)| z * *w).sum()
}

/// Spectral (FFT) derivative, with a fourth-order finite-difference fallback
/// for fields flagged non-periodic.  Parity tags flip (odd -> even and back).
pub fn derivative_x(f: &ComplexField) -> Result<ComplexField> {
    let bnd = f.boundary_fraction(0.01);
    if f.boundary() == BoundaryKind::Periodic && bnd > BOUNDARY_WARN_THRESHOLD {
        // Not fatal: periodic data (e.g. sin on a commensurate box) is fine.
        log::debug!("derivative_x: boundary fraction {bnd:.2e} above decay threshold");
    }
    let samples = match f.boundary() {
        BoundaryKind::Periodic => spectral_derivative(f.grid(), f.samples()),
        BoundaryKind::NonPeriodic => fd4_derivative(f.grid().dx(), f.samples()),
    };
    let mut out = ComplexField::new(Arc::clone(f.grid()), samples, Parity::None)?;
    out.set_boundary(f.boundary());
    out.set_parity_unchecked(f.parity().flipped());
    Ok(out)
}

fn spectral_derivative(grid: &SpatialGrid, samples: &Array1<C64>) -> Array1<C64> {
    let n = grid.n();
    let length = 2.0 * grid.x_max();
    let mut buf: Vec<C64> = samples.iter().take(n).copied().collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for (m, z) in buf.iter_mut().enumerate() {
        // the Nyquist mode has no odd-derivative representation on the grid
        let xi = if m == n / 2 { 0.0 } else { fft_wavenumber(m, n, length) };
        *z *= C64::new(0.0, xi) * scale;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out = Array1::zeros(n + 1);
    for (j, z) in buf.iter().enumerate() {
        out[j] = *z;
    }
    out[n] = buf[0];
    out
}

/// Signed wavenumber of FFT bin `m` for a transform of length `n` over a box
/// of length `length`.
pub fn fft_wavenumber(m: usize, n: usize, length: f64) -> f64 {
    let m = m as i64;
    let n = n as i64;
    let signed = if m <= n / 2 - 1 { m } else { m - n };
    2.0 * std::f64::consts::PI * signed as f64 / length
}

fn fd4_derivative(h: f64, f: &Array1<C64>) -> Array1<C64> {
    let n = f.len();
    let mut out = Array1::zeros(n);
    let c = 1.0 / (12.0 * h);
    for j in 0..n {
        out[j] = if j >= 2 && j + 2 < n {
            (f[j - 2] - f[j + 2] + (f[j + 1] - f[j - 1]) * 8.0) * c
        } else if j + 4 < n && j < 2 {
            match j {
                0 => (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * c,
                _ => (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * c,
            }
        } else {
            let e = n - 1 - j;
            match e {
                0 => (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0
                    + f[n - 5] * 3.0)
                    * c,
                _ => (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0
                    - f[n - 5])
                    * c,
            }
        };
    }
    out
}

/// Fourth-order derivative of samples on the distorted frequency grid.
///
/// The two half-lines `k < 0` and `k > 0` are differentiated separately; the
/// stencil never crosses `k = 0`, where the eigenfunctions branch.
pub fn derivative_k(g: &Array1<C64>, kgrid: &FrequencyGrid) -> Result<Array1<C64>> {
    if g.len() != kgrid.len() {
        return Err(CoreError::Grid(format!(
            "sample count {} does not match frequency grid size {}",
            g.len(),
            kgrid.len()
        )));
    }
    let half = kgrid.half();
    if half < 5 {
        return Err(CoreError::Config(format!(
            "each half-line needs at least 5 nodes for the fourth-order stencil, got {half}"
        )));
    }
    let mut out = Array1::zeros(g.len());
    let neg: Array1<C64> = g.slice(ndarray::s![..half]).to_owned();
    let pos: Array1<C64> = g.slice(ndarray::s![half..]).to_owned();
    let dn = fd4_derivative(kgrid.dk(), &neg);
    let dp = fd4_derivative(kgrid.dk(), &pos);
    for m in 0..half {
        out[m] = dn[m];
        out[half + m] = dp[m];
    }
    Ok(out)
}

/// Backward cumulative integral `I_j = integral_{x_j}^{x_N} f` with a
/// fourth-order panel rule (cubic through the four nodes around each panel).
pub fn cumulative_integral_from_right(h: f64, f: &[C64]) -> Vec<C64> {
    let n = f.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    if n < 4 {
        // trapezoid fallback for tiny inputs
        for j in (0..n.saturating_sub(1)).rev() {
            out[j] = out[j + 1] + (f[j] + f[j + 1]) * (0.5 * h);
        }
        return out;
    }
    let c = h / 24.0;
    for j in (0..n - 1).rev() {
        let panel = if j == 0 {
            (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * c
        } else if j == n - 2 {
            (f[n - 1] * 9.0 + f[n - 2] * 19.0 - f[n - 3] * 5.0 + f[n - 4]) * c
        } else {
            ((f[j] + f[j + 1]) * 13.0 - f[j - 1] - f[j + 2]) * c
        };
        out[j] = out[j + 1] + panel;
    }
    out
}

/// Forward cumulative integral `I_j = integral_{x_0}^{x_j} f`, fourth order.
pub fn cumulative_integral_from_left(h: f64, f: &[C64]) -> Vec<C64> {
    let rev: Vec<C64> = f.iter().rev().copied().collect();
    let mut out = cumulative_integral_from_right(h, &rev);
    out.reverse();
    out
}

/// Integral of samples over the distorted frequency grid.
pub fn kquad(kgrid: &FrequencyGrid, g: &[C64]) -> C64 {
    g.iter().zip(kgrid.weights()).map(|(z, w)| z * *w).sum()
}

/// Weighted L2 norm of samples over the distorted frequency grid.
pub fn knorm_l2(kgrid: &FrequencyGrid, g: &[C64]) -> f64 {
    g.iter()
        .zip(kgrid.weights())
        .map(|(z, w)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}
