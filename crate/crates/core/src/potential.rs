//! Catalog of admissible potentials, their decay-weight functionals, and the
//! generic/exceptional classification.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{
    cumulative_integral_from_left, cumulative_integral_from_right, quad_integrate, ComplexField,
    Parity, SpatialGrid,
};

/// Potential families addressable by name from a config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    GaussianBump,
    SechSquared,
    SquareWell,
    Exponential,
    SlowDecayPower,
    Zero,
}

/// A catalog potential: family, amplitude, width, and declared decay exponent.
///
/// For `slow_decay_power` the potential is `a <x/w>^(-gamma_prime)` and the
/// declared weight exponent `gamma` must lie in `(2, gamma_prime - 1)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Declared decay exponent gamma with `<x>^gamma V` integrable.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Tail exponent for the power-law family (ignored elsewhere).
    #[serde(default = "default_gamma_prime")]
    pub gamma_prime: f64,
}

fn default_amplitude() -> f64 {
    0.3
}
fn default_width() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    4.0
}
fn default_gamma_prime() -> f64 {
    5.0
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily, amplitude: f64, width: f64) -> Self {
        PotentialSpec {
            family,
            amplitude,
            width,
            gamma: default_gamma(),
            gamma_prime: default_gamma_prime(),
        }
    }

    pub fn zero() -> Self {
        PotentialSpec::new(PotentialFamily::Zero, 0.0, 1.0)
    }

    /// The flagship generic bump: small positive Gaussian.
    pub fn generic_bump() -> Self {
        PotentialSpec::new(PotentialFamily::GaussianBump, 0.3, 1.0)
    }

    /// Reflectionless exceptional member: `-2/w^2 sech^2(x/w)` at `w = 1`.
    pub fn reflectionless_sech() -> Self {
        PotentialSpec::new(PotentialFamily::SechSquared, -2.0, 1.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        let a = self.amplitude;
        let w = self.width;
        match self.family {
            PotentialFamily::GaussianBump => a * (-(x / w).powi(2)).exp(),
            PotentialFamily::SechSquared => {
                let s = 1.0 / (x / w).cosh();
                a * s * s
            }
            PotentialFamily::SquareWell => {
                if x.abs() <= w {
                    a
                } else {
                    0.0
                }
            }
            PotentialFamily::Exponential => a * (-(x / w).abs()).exp(),
            PotentialFamily::SlowDecayPower => {
                let r = x / w;
                a * (1.0 + r * r).powf(-self.gamma_prime / 2.0)
            }
            PotentialFamily::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.width.is_finite() || self.width <= 0.0 {
            return Err(CoreError::Potential(format!(
                "amplitude/width must be finite with width > 0: {self:?}"
            )));
        }
        if self.family == PotentialFamily::SlowDecayPower {
            if self.gamma_prime <= 3.0 {
                return Err(CoreError::Potential(format!(
                    "slow_decay_power needs gamma_prime > 3 (got {}); otherwise <x>^gamma V \
                     is not integrable for any gamma > 2",
                    self.gamma_prime
                )));
            }
            if self.gamma <= 2.0 || self.gamma >= self.gamma_prime - 1.0 {
                return Err(CoreError::Potential(format!(
                    "declared gamma {} must lie in (2, gamma_prime - 1) = (2, {})",
                    self.gamma,
                    self.gamma_prime - 1.0
                )));
            }
        }
        Ok(())
    }
}

/// Sample `V` on the grid.  Symmetric families carry the even parity tag.
pub fn eval_potential(spec: &PotentialSpec, grid: &Arc<SpatialGrid>) -> Result<ComplexField> {
    spec.validate()?;
    let mut field = ComplexField::from_fn(grid, Parity::None, |x| C64::new(spec.value(x), 0.0))?;
    field.set_parity(Parity::Even)?;
    Ok(field)
}

/// Weighted tail masses of the potential from the right and from the left.
#[derive(Clone, Debug)]
pub struct DecayWeights {
    pub exponent: f64,
    /// `W^a_+(x_j) = integral over (x_j, x_max) of <y>^a |V|`
    pub plus: Array1<f64>,
    /// `W^a_-(x_j) = integral over (x_min, x_j) of <y>^a |V|`
    pub minus: Array1<f64>,
}

/// Cumulative quadrature of `<y>^a |V(y)|` from the right (plus) and left (minus).
pub fn decay_weights(v: &ComplexField, a: f64) -> Result<DecayWeights> {
    if a < 0.0 {
        return Err(CoreError::Config(format!("weight exponent must be >= 0, got {a}")));
    }
    let grid = v.grid();
    let weighted: Vec<C64> = grid
        .nodes()
        .iter()
        .zip(v.samples())
        .map(|(&x, z)| C64::new((1.0 + x * x).powf(a / 2.0) * z.norm(), 0.0))
        .collect();
    let plus = cumulative_integral_from_right(grid.dx(), &weighted);
    let minus = cumulative_integral_from_left(grid.dx(), &weighted);
    Ok(DecayWeights {
        exponent: a,
        plus: plus.iter().map(|z| z.re.max(0.0)).collect(),
        minus: minus.iter().map(|z| z.re.max(0.0)).collect(),
    })
}

/// `integral of <x>^gamma |V|` over the truncated box.
pub fn weighted_moment(v: &ComplexField, gamma: f64) -> Result<f64> {
    let g = v.grid();
    let f = ComplexField::from_fn(g, Parity::None, |x| {
        let j = (1.0 + x * x).powf(gamma / 2.0);
        C64::new(j, 0.0)
    })?;
    let prod: Array1<C64> = f
        .samples()
        .iter()
        .zip(v.samples())
        .map(|(w, z)| C64::new(w.re * z.norm(), 0.0))
        .collect();
    let field = ComplexField::new(Arc::clone(g), prod, Parity::None)?;
    Ok(quad_integrate(&field)?.re)
}

/// Result of the zero-energy resonance classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Genericity {
    Generic,
    Exceptional,
    Borderline,
}

/// Default threshold for the genericity test, relative to the L1 norm of `V`.
pub const GENERICITY_TAU: f64 = 1e-3;

/// Classify the potential from the zero-energy Jost modifiers.
///
/// Generic when `|integral of V m_+(.,0)| > tau ||V||_L1`, exceptional below a
/// decade under the threshold, borderline in between.  Borderline is returned
/// as such, never coerced.
pub fn classify_genericity(
    v: &ComplexField,
    m0_plus: &Array1<C64>,
    m0_minus: &Array1<C64>,
    tau: f64,
) -> Result<Genericity> {
    let grid = v.grid();
    let l1 = {
        let absv: Array1<C64> = v.samples().iter().map(|z| C64::new(z.norm(), 0.0)).collect();
        quad_integrate(&ComplexField::new(Arc::clone(grid), absv, Parity::None)?)?.re
    };
    if l1 == 0.0 {
        // the free line carries the constant resonance
        return Ok(Genericity::Exceptional);
    }
    let integral = |m0: &Array1<C64>| -> Result<C64> {
        let prod: Array1<C64> = v.samples().iter().zip(m0).map(|(v, m)| v * m).collect();
        quad_integrate(&ComplexField::new(Arc::clone(grid), prod, Parity::None)?)
    };
    let g = integral(m0_plus)?.norm().max(integral(m0_minus)?.norm());
    if g > tau * l1 {
        Ok(Genericity::Generic)
    } else if g < tau / 10.0 * l1 {
        Ok(Genericity::Exceptional)
    } else {
        Ok(Genericity::Borderline)
    }
}

/// Smallest eigenvalue of the discretized `-d^2/dx^2 + V` with Dirichlet walls,
/// by inverse-power iteration with a shift below the spectrum.
///
/// Used to certify the no-bound-state assumption per experiment: a negative
/// eigenvalue below `-1e-8` signals a bound state.
pub fn lowest_eigenvalue(v: &ComplexField, tol: f64, max_iter: usize) -> Result<f64> {
    let grid = v.grid();
    let n = grid.num_nodes();
    let h2 = grid.dx() * grid.dx();
    // interior nodes only (Dirichlet at the walls)
    let dim = n - 2;
    let diag: Vec<f64> = (0..dim).map(|i| 2.0 / h2 + v.samples()[i + 1].re).collect();
    let off = -1.0 / h2;
    let vmin = v.samples().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let shift = vmin.min(0.0) - 1.0;

    // Thomas solve of (H - shift) y = x, reused across iterations.
    let a: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut y = vec![0.0; dim];
    let mut x: Vec<f64> = (0..dim)
        .map(|i| {
            let t = grid.node(i + 1);
            (-t * t / 8.0).exp()
        })
        .collect();
    normalize(&mut x);
    let mut lambda = 0.0;
    let mut cp = vec![0.0; dim];
    for _ in 0..max_iter {
        // tridiagonal forward sweep
        cp[0] = off / a[0];
        y[0] = x[0] / a[0];
        for i in 1..dim {
            let m = a[i] - off * cp[i - 1];
            cp[i] = off / m;
            y[i] = (x[i] - off * y[i - 1]) / m;
        }
        for i in (0..dim - 1).rev() {
            y[i] -= cp[i] * y[i + 1];
        }
        let norm = normalize(&mut y);
        let new_lambda = shift + 1.0 / norm * y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
            / y.iter().map(|a| a * a).sum::<f64>();
        // Rayleigh quotient of the normalized iterate is more robust
        let rayleigh = rayleigh_quotient(&y, &a, off) + shift;
        std::mem::swap(&mut x, &mut y);
        if (rayleigh - lambda).abs() < tol {
            return Ok(rayleigh);
        }
        lambda = rayleigh;
        let _ = new_lambda;
    }
    Ok(lambda)
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        for a in x.iter_mut() {
            *a /= n;
        }
    }
    n
}

fn rayleigh_quotient(x: &[f64], diag_shifted: &[f64], off: f64) -> f64 {
    let dim = x.len();
    let mut num = 0.0;
    for i in 0..dim {
        let mut hx = diag_shifted[i] * x[i];
        if i > 0 {
            hx += off * x[i - 1];
        }
        if i + 1 < dim {
            hx += off * x[i + 1];
        }
        num += x[i] * hx;
    }
    num / x.iter().map(|a| a * a).sum::<f64>()
}

/// Whether the discretized Hamiltonian is free of bound states at tolerance 1e-8.
pub fn certify_no_bound_states(v: &ComplexField) -> Result<bool> {
    let lambda = lowest_eigenvalue(v, 1e-10, 400)?;
    Ok(lambda >= -1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(x_max: f64, n: usize) -> Arc<SpatialGrid> {
        SpatialGrid::symmetric(x_max, n).unwrap()
    }

    #[test]
    fn zero_family_evaluates_to_zero() {
        let g = grid(20.0, 256);
        let v = eval_potential(&PotentialSpec::zero(), &g).unwrap();
        assert_eq!(v.norm_sup(), 0.0);
        assert_eq!(v.parity(), Parity::Even);
    }

    #[test]
    fn gaussian_bump_peak_value() {
        let g = grid(20.0, 256);
        let v = eval_potential(&PotentialSpec::new(PotentialFamily::GaussianBump, 0.3, 1.0), &g)
            .unwrap();
        assert_abs_diff_eq!(v.samples()[g.center()].re, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn sech_squared_matches_closed_form() {
        let g = grid(20.0, 512);
        let v = eval_potential(&PotentialSpec::reflectionless_sech(), &g).unwrap();
        for (j, &x) in g.nodes().iter().enumerate() {
            let want = -2.0 / x.cosh().powi(2);
            assert_abs_diff_eq!(v.samples()[j].re, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn slow_decay_rejects_bad_tail_exponent() {
        let g = grid(20.0, 256);
        let mut spec = PotentialSpec::new(PotentialFamily::SlowDecayPower, 0.05, 1.0);
        spec.gamma_prime = 2.5;
        assert!(eval_potential(&spec, &g).is_err());
    }

    #[test]
    fn decay_weights_zero_potential() {
        let g = grid(20.0, 256);
        let v = eval_potential(&PotentialSpec::zero(), &g).unwrap();
        let w = decay_weights(&v, 1.0).unwrap();
        assert!(w.plus.iter().all(|&x| x == 0.0));
        assert!(w.minus.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decay_weight_left_endpoint_is_l1_norm() {
        let g = grid(30.0, 1024);
        let v = eval_potential(&PotentialSpec::generic_bump(), &g).unwrap();
        let w = decay_weights(&v, 0.0).unwrap();
        // ||V||_1 for 0.3 exp(-x^2): 0.3 sqrt(pi)
        let l1 = 0.3 * std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(w.plus[0], l1, epsilon = 1e-10);
        assert_abs_diff_eq!(w.minus[g.n()], l1, epsilon = 1e-10);
    }

    #[test]
    fn decay_weights_monotone() {
        let g = grid(30.0, 512);
        let v = eval_potential(&PotentialSpec::generic_bump(), &g).unwrap();
        let w = decay_weights(&v, 1.5).unwrap();
        for j in 1..g.num_nodes() {
            assert!(w.plus[j] <= w.plus[j - 1] + 1e-14);
            assert!(w.minus[j] + 1e-14 >= w.minus[j - 1]);
        }
    }

    /// Independent adaptive Simpson oracle for the weighted tail mass.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let l = simpson(f, a, m);
            let r = simpson(f, m, b);
            if depth > 40 || (l + r - whole).abs() < 15.0 * tol {
                l + r + (l + r - whole) / 15.0
            } else {
                rec(f, a, m, l, tol / 2.0, depth + 1) + rec(f, m, b, r, tol / 2.0, depth + 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, 0)
    }

    #[test]
    fn gaussian_weight_matches_adaptive_quadrature() {
        let g = grid(30.0, 2048);
        let spec = PotentialSpec::generic_bump();
        let v = eval_potential(&spec, &g).unwrap();
        let w = decay_weights(&v, 2.0).unwrap();
        let f = |y: f64| (1.0 + y * y) * (0.3 * (-y * y).exp()).abs();
        let oracle = adaptive_simpson(&f, 0.0, 30.0, 1e-12);
        assert_abs_diff_eq!(w.plus[g.center()], oracle, epsilon = 1e-8);
    }

    #[test]
    fn moment_converges_under_box_doubling_for_catalog() {
        let specs = [
            PotentialSpec::generic_bump(),
            PotentialSpec::reflectionless_sech(),
            PotentialSpec::new(PotentialFamily::SquareWell, 0.4, 1.5),
            PotentialSpec::new(PotentialFamily::Exponential, 0.2, 1.0),
            {
                let mut s = PotentialSpec::new(PotentialFamily::SlowDecayPower, 0.05, 1.0);
                s.gamma = 2.2;
                s.gamma_prime = 5.0;
                s
            },
        ];
        for spec in specs {
            let g1 = grid(128.0, 4096);
            let g2 = grid(256.0, 8192);
            let m1 = weighted_moment(&eval_potential(&spec, &g1).unwrap(), spec.gamma).unwrap();
            let m2 = weighted_moment(&eval_potential(&spec, &g2).unwrap(), spec.gamma).unwrap();
            assert!(m1.is_finite() && m2.is_finite());
            let rel = (m2 - m1).abs() / m2.abs();
            assert!(rel < 1e-3, "{spec:?}: moment drift {rel:.2e} on box doubling");
        }
    }

    #[test]
    fn bound_state_detected_for_attractive_sech() {
        // -2 sech^2 has a discrete eigenvalue at -1
        let g = grid(30.0, 2048);
        let v = eval_potential(&PotentialSpec::reflectionless_sech(), &g).unwrap();
        let lambda = lowest_eigenvalue(&v, 1e-10, 400).unwrap();
        assert_abs_diff_eq!(lambda, -1.0, epsilon = 1e-3);
        assert!(!certify_no_bound_states(&v).unwrap());
    }

    #[test]
    fn repulsive_bump_has_no_bound_states() {
        let g = grid(30.0, 2048);
        let v = eval_potential(&PotentialSpec::generic_bump(), &g).unwrap();
        assert!(certify_no_bound_states(&v).unwrap());
    }
}
