//! Time integration of `i du/dt + (-d^2/dx^2 + V) u = sign |u|^2 u` with a
//! spectrally exact linear propagator in the distorted basis and a fast
//! split-step FFT backend for long runs.
//!
//! The linear flow is `u(t) = exp(itH) u(t_0)`; in the distorted basis it is
//! multiplication by `exp(i tau k^2)`.  The split backend composes the flat
//! kinetic multiplier `exp(i tau xi^2)` with the potential phase
//! `exp(i tau V)`; the nonlinear substep is the exact pointwise rotation
//! `u -> exp(-i sign tau |u|^2) u`.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dft::{dft_forward, dft_inverse, DistortedBasis};
use crate::diagnostics::{
    compute_alpha, distorted_profile, jv_norm, local_sup_sqrt_region, weighted_local_sup,
    AlphaSnapshot,
};
use crate::error::{CoreError, Result};
use crate::grid::{fft_wavenumber, derivative_x, ComplexField, Parity, SpatialGrid};

/// Sign of the cubic term on the right-hand side of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsSign {
    /// `+|u|^2 u`: admits the bright soliton family.
    Focusing,
    /// `-|u|^2 u`.
    Defocusing,
}

impl NlsSign {
    pub fn value(self) -> f64 {
        match self {
            NlsSign::Focusing => 1.0,
            NlsSign::Defocusing => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearBackend {
    DistortedSpectral,
    SplitFft,
}

/// Time-stepping configuration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sign: NlsSign,
    pub dt: f64,
    #[serde(default = "default_t_start")]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_backend")]
    pub linear_backend: LinearBackend,
    /// pure linear flow when false
    #[serde(default = "default_nonlinear")]
    pub nonlinear: bool,
    /// require the free-transport containment bound; a soliton-type run
    /// may opt out, since its mass does not transport ballistically (the
    /// boundary-mass abort still guards the box)
    #[serde(default = "default_nonlinear")]
    pub enforce_containment: bool,
}

fn default_t_start() -> f64 {
    1.0
}
fn default_backend() -> LinearBackend {
    LinearBackend::SplitFft
}
fn default_nonlinear() -> bool {
    true
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(CoreError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(CoreError::Config(format!(
                "t_end {} must exceed t_start {}",
                self.t_end, self.t_start
            )));
        }
        Ok(())
    }
}

/// Exact pointwise rotation of the nonlinear substep:
/// `u -> exp(-i sign tau |u|^2) u`; the modulus is invariant.
pub fn nonlinear_phase_step(u: &mut ComplexField, tau: f64, sign: NlsSign) {
    let s = sign.value();
    for z in u.samples_mut().iter_mut() {
        let phase = -s * tau * z.norm_sqr();
        *z *= C64::from_polar(1.0, phase);
    }
}

/// FFT workspace for the split backend on one grid.
pub struct SplitStepper {
    grid: Arc<SpatialGrid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// flat kinetic phases exp(i tau xi^2) for the configured step
    kinetic: Vec<C64>,
    /// potential phases exp(i tau V / 2) for the half substeps
    half_potential: Vec<C64>,
    tau: f64,
    buf: Vec<C64>,
}

impl SplitStepper {
    pub fn new(grid: &Arc<SpatialGrid>, v: &ComplexField, tau: f64) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let length = 2.0 * grid.x_max();
        let scale = 1.0 / n as f64;
        let kinetic: Vec<C64> = (0..n)
            .map(|m| {
                let xi = fft_wavenumber(m, n, length);
                C64::from_polar(scale, tau * xi * xi)
            })
            .collect();
        let half_potential: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, 0.5 * tau * v.samples()[j].re))
            .collect();
        SplitStepper {
            grid: Arc::clone(grid),
            forward,
            inverse,
            kinetic,
            half_potential,
            tau,
            buf: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// One linear step `exp(i tau H)` by Strang composition V/2 - K - V/2.
    pub fn linear_step(&mut self, u: &mut ComplexField) {
        let n = self.grid.n();
        for j in 0..n {
            self.buf[j] = u.samples()[j] * self.half_potential[j];
        }
        self.forward.process(&mut self.buf);
        for (b, k) in self.buf.iter_mut().zip(&self.kinetic) {
            *b *= k;
        }
        self.inverse.process(&mut self.buf);
        let samples = u.samples_mut();
        for j in 0..n {
            samples[j] = self.buf[j] * self.half_potential[j];
        }
        samples[n] = samples[0];
    }
}

/// Apply the linear flow `exp(i tau H)` with the chosen backend.
///
/// The distorted backend is exact in the basis (diagonal phase); the split
/// backend is one Strang pass and should only be used for small `tau`.
pub fn linear_propagate(
    u: &ComplexField,
    tau: f64,
    backend: LinearBackend,
    basis: Option<&DistortedBasis>,
    v: &ComplexField,
) -> Result<ComplexField> {
    match backend {
        LinearBackend::DistortedSpectral => {
            let basis = basis.ok_or_else(|| {
                CoreError::Config("distorted_spectral backend needs an assembled basis".into())
            })?;
            let g = dft_forward(basis, u);
            let rotated: Array1<C64> = (0..basis.kgrid().len())
                .map(|m| {
                    let k = basis.kgrid().node(m);
                    g[m] * C64::from_polar(1.0, tau * k * k)
                })
                .collect();
            let mut out = dft_inverse(basis, &rotated)?;
            out.set_parity(Parity::None)?;
            Ok(out)
        }
        LinearBackend::SplitFft => {
            let mut stepper = SplitStepper::new(u.grid(), v, tau);
            let mut out = u.clone();
            stepper.linear_step(&mut out);
            Ok(out)
        }
    }
}

/// Guard against a sign-convention mismatch between the two linear backends:
/// they must agree to splitting order on a calibration pulse.
pub fn calibrate_backends(
    basis: &DistortedBasis,
    v: &ComplexField,
    tau: f64,
) -> Result<()> {
    let grid = basis.xgrid();
    let pulse = ComplexField::from_fn(grid, Parity::None, |x| {
        C64::new(-(x * x) / 8.0, 0.7 * x).exp()
    })?;
    let a = linear_propagate(&pulse, tau, LinearBackend::DistortedSpectral, Some(basis), v)?;
    let b = linear_propagate(&pulse, tau, LinearBackend::SplitFft, None, v)?;
    let diff: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).norm_sqr() * grid.dx())
        .sum::<f64>()
        .sqrt();
    let allowed = 10.0 * tau * tau * pulse.norm_l2();
    if diff > allowed {
        return Err(CoreError::BackendMismatch { defect: diff, allowed });
    }
    Ok(())
}

/// Current field and time.
#[derive(Clone, Debug)]
pub struct SimulationState {
    pub u: ComplexField,
    pub t: f64,
}

/// One row of the conserved-quantity ledger.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub weighted_local_sup: f64,
    /// sup of |u| over |x| <= rt_coeff sqrt(t)
    pub local_sup_sqrt: f64,
    pub j_v_norm: f64,
    pub boundary_mass: f64,
}

/// Full diagnostics captured at a scheduled snapshot time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: ComplexField,
    pub alpha: AlphaSnapshot,
    /// frequency-side profile `phi~ = exp(-itk^2) u~`
    pub profile: Array1<C64>,
}

/// Per-velocity track of `alpha(v, t)` sampled densely in time.
#[derive(Clone, Debug)]
pub struct DriftTrack {
    pub v: f64,
    pub ts: Vec<f64>,
    pub alpha: Vec<C64>,
}

/// Diagnostic schedules for an evolution run.
#[derive(Clone, Debug)]
pub struct DiagnosticSchedule {
    /// times at which a full ledger row is recorded (always includes t_start
    /// and t_end)
    pub ledger_times: Vec<f64>,
    /// times of the full snapshots (geometric for the asymptotics pass)
    pub snapshot_times: Vec<f64>,
    pub vgrid: Vec<f64>,
    pub rt_coeff: f64,
    pub drift_velocities: Vec<f64>,
}

impl DiagnosticSchedule {
    /// Geometric schedules over `[t_start, t_end]`.
    pub fn geometric(
        t_start: f64,
        t_end: f64,
        ledger_count: usize,
        snapshot_count: usize,
        vgrid: Vec<f64>,
        rt_coeff: f64,
        drift_velocities: Vec<f64>,
    ) -> Self {
        let geo = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|i| t_start * (t_end / t_start).powf(i as f64 / (count - 1) as f64))
                .collect()
        };
        DiagnosticSchedule {
            ledger_times: geo(ledger_count),
            snapshot_times: geo(snapshot_count),
            vgrid,
            rt_coeff,
            drift_velocities,
        }
    }
}

/// Output of an evolution run.
#[derive(Clone, Debug)]
pub struct EvolveOutput {
    pub ledger: Vec<LedgerRow>,
    pub snapshots: Vec<Snapshot>,
    pub drift: Vec<DriftTrack>,
    pub final_state: SimulationState,
}

/// 99.99% spectral quantile of the field (flat transform).
pub fn spectral_quantile(u: &ComplexField) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let mut buf: Vec<C64> = u.samples().iter().take(n).copied().collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let length = 2.0 * grid.x_max();
    let mut by_k: Vec<(f64, f64)> =
        (0..n).map(|m| (fft_wavenumber(m, n, length).abs(), buf[m].norm_sqr())).collect();
    by_k.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = by_k.iter().map(|p| p.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (k, p) in by_k {
        acc += p;
        if acc >= (1.0 - 1e-4) * total {
            return k;
        }
    }
    by_k_last(grid)
}

fn by_k_last(grid: &SpatialGrid) -> f64 {
    std::f64::consts::PI / grid.dx()
}

/// Mass fraction in the outer 2.5% of the box on each side.
pub fn boundary_mass_fraction(u: &ComplexField) -> f64 {
    let grid = u.grid();
    let n = grid.num_nodes();
    let edge = (n as f64 * 0.025).ceil() as usize;
    let mut outer = 0.0;
    let mut total = 0.0;
    for (j, z) in u.samples().iter().enumerate() {
        let m = z.norm_sqr() * grid.weights()[j];
        total += m;
        if j < edge || j >= n - edge {
            outer += m;
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

fn energy(u: &ComplexField, v: &ComplexField, sign: NlsSign) -> Result<f64> {
    let du = derivative_x(u)?;
    let grid = u.grid();
    let s = sign.value();
    let mut e = 0.0;
    for j in 0..grid.num_nodes() {
        let w = grid.weights()[j];
        let amp2 = u.samples()[j].norm_sqr();
        e += w * (du.samples()[j].norm_sqr() + v.samples()[j].re * amp2
            - 0.5 * s * amp2 * amp2);
    }
    Ok(e)
}

/// Integrate the equation from `u0` at `t_start`, recording ledgers,
/// snapshots, and drift tracks per the schedule.
///
/// Aborts on relative mass drift beyond 1e-6 or boundary mass beyond 1e-8
/// (the box is too small for the configured horizon).
pub fn evolve(
    u0: &ComplexField,
    v: &ComplexField,
    basis: Option<&DistortedBasis>,
    cfg: &SolverConfig,
    sched: &DiagnosticSchedule,
) -> Result<EvolveOutput> {
    cfg.validate()?;
    let grid = u0.grid();

    // free-transport containment
    let k_eff = spectral_quantile(u0);
    if cfg.enforce_containment && 2.0 * k_eff * cfg.t_end >= 0.9 * grid.x_max() {
        return Err(CoreError::Config(format!(
            "box too small: 2 k_eff t_end = {:.1} exceeds 0.9 x_max = {:.1}",
            2.0 * k_eff * cfg.t_end,
            0.9 * grid.x_max()
        )));
    }
    if let Some(b) = basis {
        calibrate_backends(b, v, cfg.dt.max(0.01))?;
    }

    let n_steps = ((cfg.t_end - cfg.t_start) / cfg.dt).round() as usize;
    let time_of = |step: usize| cfg.t_start + step as f64 * cfg.dt;
    let step_of = |t: f64| -> usize {
        (((t - cfg.t_start) / cfg.dt).round() as usize).min(n_steps)
    };
    let ledger_steps: Vec<usize> = sched.ledger_times.iter().map(|&t| step_of(t)).collect();
    let snapshot_steps: Vec<usize> = sched.snapshot_times.iter().map(|&t| step_of(t)).collect();

    let mut u = u0.clone();
    let mut stepper = SplitStepper::new(grid, v, cfg.dt);
    let use_split = cfg.linear_backend == LinearBackend::SplitFft || basis.is_none();

    let mass0 = u.norm_l2().powi(2);
    let mut ledger = Vec::new();
    let mut snapshots = Vec::new();
    let mut drift: Vec<DriftTrack> = sched
        .drift_velocities
        .iter()
        .map(|&v| DriftTrack { v, ts: Vec::new(), alpha: Vec::new() })
        .collect();

    let record = |u: &ComplexField, t: f64, step: usize, ledger: &mut Vec<LedgerRow>, drift: &mut Vec<DriftTrack>| -> Result<()> {
        let mass = u.norm_l2().powi(2);
        let j_v = match basis {
            Some(b) => jv_norm(b, u, t)?,
            None => f64::NAN,
        };
        ledger.push(LedgerRow {
            step,
            t,
            mass,
            energy: energy(u, v, cfg.sign)?,
            sup_norm: u.norm_sup(),
            weighted_local_sup: weighted_local_sup(u),
            local_sup_sqrt: local_sup_sqrt_region(u, t, sched.rt_coeff),
            j_v_norm: j_v,
            boundary_mass: boundary_mass_fraction(u),
        });
        if !drift.is_empty() {
            let vs: Vec<f64> = drift.iter().map(|d| d.v).collect();
            let snap = compute_alpha(u, t, &vs, sched.rt_coeff)?;
            for (track, a) in drift.iter_mut().zip(snap.alpha) {
                track.ts.push(t);
                track.alpha.push(a);
            }
        }
        Ok(())
    };

    let take_snapshot =
        |u: &ComplexField, t: f64, snapshots: &mut Vec<Snapshot>| -> Result<()> {
            let alpha = compute_alpha(u, t, &sched.vgrid, sched.rt_coeff)?;
            let profile = match basis {
                Some(b) => distorted_profile(b, u, t),
                None => Array1::zeros(0),
            };
            snapshots.push(Snapshot { t, u: u.clone(), alpha, profile });
            Ok(())
        };

    if ledger_steps.contains(&0) {
        record(&u, cfg.t_start, 0, &mut ledger, &mut drift)?;
    }
    if snapshot_steps.contains(&0) {
        take_snapshot(&u, cfg.t_start, &mut snapshots)?;
    }

    for step in 1..=n_steps {
        let half = 0.5 * cfg.dt;
        if cfg.nonlinear {
            nonlinear_phase_step(&mut u, half, cfg.sign);
        }
        if use_split {
            stepper.linear_step(&mut u);
        } else {
            u = linear_propagate(
                &u,
                cfg.dt,
                LinearBackend::DistortedSpectral,
                basis,
                v,
            )?;
        }
        if cfg.nonlinear {
            nonlinear_phase_step(&mut u, half, cfg.sign);
        }
        let t = time_of(step);

        if step % 256 == 0 || ledger_steps.contains(&step) {
            let mass = u.norm_l2().powi(2);
            let drift_rel = ((mass - mass0) / mass0).abs();
            if drift_rel > 1e-6 {
                return Err(CoreError::MassDrift { step, t, drift: drift_rel });
            }
            let bnd = boundary_mass_fraction(&u);
            if bnd > 1e-8 {
                return Err(CoreError::BoundaryMass { step, t, mass: bnd });
            }
        }
        if ledger_steps.contains(&step) {
            record(&u, t, step, &mut ledger, &mut drift)?;
        }
        if snapshot_steps.contains(&step) {
            take_snapshot(&u, t, &mut snapshots)?;
        }
    }

    Ok(EvolveOutput { ledger, snapshots, drift, final_state: SimulationState { u, t: cfg.t_end } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use crate::potential::{eval_potential, PotentialSpec};
    use approx::assert_abs_diff_eq;

    fn gaussian_free_evolution(s: f64, k0: f64, x: f64, t: f64) -> C64 {
        // exp(itH_0) of exp(-x^2/(2 s^2) + i k0 x):
        // s (s^2 - 2it)^{-1/2} exp(i(t k0^2 + k0 x)) exp(-(x + 2 t k0)^2 / (2(s^2 - 2it)))
        let a = C64::new(s * s, -2.0 * t);
        let pref = C64::new(s, 0.0) / a.sqrt();
        let shift = x + 2.0 * t * k0;
        pref * (C64::new(0.0, t * k0 * k0 + k0 * x)
            + C64::new(-(shift * shift), 0.0) / (a * 2.0))
            .exp()
    }

    #[test]
    fn nonlinear_step_preserves_modulus_and_phase_rotation() {
        let g = SpatialGrid::symmetric(10.0, 64).unwrap();
        let mut u = ComplexField::from_fn(&g, Parity::None, |x| C64::new(0.5 * (-x * x).exp(), 0.2))
            .unwrap();
        let before: Vec<f64> = u.samples().iter().map(|z| z.norm()).collect();
        let tau = 0.37;
        nonlinear_phase_step(&mut u, tau, NlsSign::Defocusing);
        for (j, z) in u.samples().iter().enumerate() {
            assert_abs_diff_eq!(z.norm(), before[j], epsilon = 1e-15);
        }
        // constant-modulus segment: phase advances by +tau |A|^2 for defocusing
        let mut w = ComplexField::from_fn(&g, Parity::None, |_| C64::new(2.0, 0.0)).unwrap();
        nonlinear_phase_step(&mut w, tau, NlsSign::Defocusing);
        let expected = C64::from_polar(2.0, tau * 4.0);
        assert!((w.samples()[0] - expected).norm() < 1e-14);
        let mut zero = ComplexField::zeros(&g);
        nonlinear_phase_step(&mut zero, tau, NlsSign::Focusing);
        assert_eq!(zero.norm_sup(), 0.0);
    }

    #[test]
    fn linear_propagate_identity_at_tau_zero_and_unitary() {
        let xg = SpatialGrid::symmetric(40.0, 1024).unwrap();
        let kg = FrequencyGrid::distorted(10.0, 1024).unwrap();
        let v = eval_potential(&PotentialSpec::generic_bump(), &xg).unwrap();
        let basis = DistortedBasis::assemble(&v, &xg, &kg).unwrap();
        let u = ComplexField::from_fn(&xg, Parity::None, |x| {
            C64::new(-(x * x) / 4.0, 2.5 * x).exp()
        })
        .unwrap();
        let id = linear_propagate(&u, 0.0, LinearBackend::DistortedSpectral, Some(&basis), &v)
            .unwrap();
        let defect: f64 = id
            .samples()
            .iter()
            .zip(u.samples())
            .map(|(a, b)| (a - b).norm_sqr() * xg.dx())
            .sum::<f64>()
            .sqrt();
        assert!(defect / u.norm_l2() < 1e-6, "tau = 0 defect {:.3e}", defect / u.norm_l2());

        // the k-side norm is exactly preserved by the diagonal phase
        let g0 = dft_forward(&basis, &u);
        let ut = linear_propagate(&u, 2.0, LinearBackend::DistortedSpectral, Some(&basis), &v)
            .unwrap();
        let gt = dft_forward(&basis, &ut);
        let n0 = crate::grid::knorm_l2(&kg, g0.as_slice().unwrap());
        let nt = crate::grid::knorm_l2(&kg, gt.as_slice().unwrap());
        assert!((nt / n0 - 1.0).abs() < 1e-8, "k-norm drift {:.3e}", (nt / n0 - 1.0).abs());
        // x-side norm preserved to transform accuracy
        assert!((ut.norm_l2() / u.norm_l2() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let xg = SpatialGrid::symmetric(60.0, 2048).unwrap();
        let kg = FrequencyGrid::distorted(6.0, 1024).unwrap();
        let v = eval_potential(&PotentialSpec::zero(), &xg).unwrap();
        let basis = DistortedBasis::assemble(&v, &xg, &kg).unwrap();
        let s = 1.5;
        let k0 = 0.8;
        let u = ComplexField::from_fn(&xg, Parity::None, |x| {
            C64::new(-x * x / (2.0 * s * s), k0 * x).exp()
        })
        .unwrap();
        let t = 3.0;
        let ut = linear_propagate(&u, t, LinearBackend::DistortedSpectral, Some(&basis), &v)
            .unwrap();
        let mut worst: f64 = 0.0;
        for (j, &x) in xg.nodes().iter().enumerate() {
            let want = gaussian_free_evolution(s, k0, x, t);
            worst = worst.max((ut.samples()[j] - want).norm());
        }
        assert!(worst < 1e-8, "free evolution defect {worst:.3e}");
    }

    #[test]
    fn split_backend_agrees_with_spectral_to_splitting_order() {
        let xg = SpatialGrid::symmetric(40.0, 1024).unwrap();
        let kg = FrequencyGrid::distorted(6.0, 512).unwrap();
        let v = eval_potential(&PotentialSpec::generic_bump(), &xg).unwrap();
        let basis = DistortedBasis::assemble(&v, &xg, &kg).unwrap();
        calibrate_backends(&basis, &v, 0.05).unwrap();
    }

    #[test]
    fn evolve_zero_data_stays_zero() {
        let xg = SpatialGrid::symmetric(40.0, 1024).unwrap();
        let v = eval_potential(&PotentialSpec::zero(), &xg).unwrap();
        let u0 = ComplexField::zeros(&xg);
        let cfg = SolverConfig {
            sign: NlsSign::Defocusing,
            dt: 0.01,
            t_start: 1.0,
            t_end: 2.0,
            linear_backend: LinearBackend::SplitFft,
            nonlinear: true,
            enforce_containment: true,
        };
        let sched = DiagnosticSchedule::geometric(1.0, 2.0, 4, 4, vec![], 100.0, vec![]);
        let out = evolve(&u0, &v, None, &cfg, &sched).unwrap();
        assert_eq!(out.final_state.u.norm_sup(), 0.0);
        for row in &out.ledger {
            assert_eq!(row.sup_norm, 0.0);
            assert_eq!(row.mass, 0.0);
        }
    }

    #[test]
    fn soliton_shape_preserved_under_focusing_flow() {
        // u = sqrt(2) sech(x) exp(-i(t - 1)) solves the focusing equation
        let xg = SpatialGrid::symmetric(25.0, 1024).unwrap();
        let v = eval_potential(&PotentialSpec::zero(), &xg).unwrap();
        let u0 = ComplexField::from_fn(&xg, Parity::Even, |x| {
            C64::new(2f64.sqrt() / x.cosh(), 0.0)
        })
        .unwrap();
        let cfg = SolverConfig {
            sign: NlsSign::Focusing,
            dt: 1e-3,
            t_start: 1.0,
            t_end: 11.0,
            linear_backend: LinearBackend::SplitFft,
            nonlinear: true,
            enforce_containment: false,
        };
        let sched = DiagnosticSchedule::geometric(1.0, 11.0, 4, 4, vec![], 100.0, vec![]);
        let out = evolve(&u0, &v, None, &cfg, &sched).unwrap();
        let mut shape_err: f64 = 0.0;
        for (j, &x) in xg.nodes().iter().enumerate() {
            let want = 2f64.sqrt() / x.cosh();
            shape_err = shape_err.max((out.final_state.u.samples()[j].norm() - want).abs());
        }
        assert!(shape_err < 1e-6, "soliton shape error {shape_err:.3e}");
        // and the phase rotation matches exp(-i(t-1))
        let center = out.final_state.u.samples()[xg.center()];
        let want = C64::from_polar(2f64.sqrt(), -10.0);
        assert!((center - want).norm() < 1e-3, "soliton phase defect {:.3e}", (center - want).norm());
    }

    #[test]
    fn second_order_self_convergence() {
        let xg = SpatialGrid::symmetric(40.0, 1024).unwrap();
        let v = eval_potential(&PotentialSpec::generic_bump(), &xg).unwrap();
        let u0 = ComplexField::from_fn(&xg, Parity::None, |x| {
            C64::new(0.5 * (-x * x / 2.0).exp(), 0.0)
        })
        .unwrap();
        let run = |dt: f64| -> ComplexField {
            let cfg = SolverConfig {
                sign: NlsSign::Defocusing,
                dt,
                t_start: 1.0,
                t_end: 3.0,
                linear_backend: LinearBackend::SplitFft,
                nonlinear: true,
                enforce_containment: true,
            };
            let sched = DiagnosticSchedule::geometric(1.0, 3.0, 2, 2, vec![], 100.0, vec![]);
            evolve(&u0, &v, None, &cfg, &sched).unwrap().final_state.u
        };
        let reference = run(0.04 / 8.0);
        let err = |u: &ComplexField| -> f64 {
            u.samples()
                .iter()
                .zip(reference.samples())
                .map(|(a, b)| (a - b).norm_sqr() * xg.dx())
                .sum::<f64>()
                .sqrt()
        };
        let e1 = err(&run(0.04));
        let e2 = err(&run(0.02));
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn mass_conserved_and_parity_preserved() {
        let xg = SpatialGrid::symmetric(60.0, 2048).unwrap();
        let v = eval_potential(&PotentialSpec::zero(), &xg).unwrap();
        let u0 = ComplexField::from_fn(&xg, Parity::Odd, |x| {
            C64::new(0.3 * x * (-x * x / 2.0).exp(), 0.0)
        })
        .unwrap();
        let cfg = SolverConfig {
            sign: NlsSign::Defocusing,
            dt: 0.005,
            t_start: 1.0,
            t_end: 6.0,
            linear_backend: LinearBackend::SplitFft,
            nonlinear: true,
            enforce_containment: true,
        };
        let sched = DiagnosticSchedule::geometric(1.0, 6.0, 6, 4, vec![], 100.0, vec![]);
        let out = evolve(&u0, &v, None, &cfg, &sched).unwrap();
        let m0 = out.ledger.first().unwrap().mass;
        let m1 = out.ledger.last().unwrap().mass;
        assert!(((m1 - m0) / m0).abs() < 1e-8);
        // odd data under even potential stays odd
        let uf = &out.final_state.u;
        let n = xg.n();
        let sup = uf.norm_sup();
        for j in 0..=n {
            assert!(
                (uf.samples()[j] + uf.samples()[n - j]).norm() < 1e-10 * sup,
                "parity violated at node {j}"
            );
        }
    }

    #[test]
    fn linear_decay_ceiling_for_free_flow() {
        // sup |u| t^{1/2} stays bounded for the linear flow of L^1 data
        let xg = SpatialGrid::symmetric(400.0, 8192).unwrap();
        let kg = FrequencyGrid::distorted(4.0, 512).unwrap();
        let v = eval_potential(&PotentialSpec::zero(), &xg).unwrap();
        let basis = DistortedBasis::assemble(&v, &xg, &kg).unwrap();
        let u0 = ComplexField::from_fn(&xg, Parity::Even, |x| {
            C64::new((-x * x / 2.0).exp(), 0.0)
        })
        .unwrap();
        let mut ceiling: f64 = 0.0;
        for t in [1.0, 4.0, 16.0, 64.0] {
            let ut = linear_propagate(&u0, t, LinearBackend::DistortedSpectral, Some(&basis), &v)
                .unwrap();
            ceiling = ceiling.max(ut.norm_sup() * t.sqrt());
        }
        assert!(ceiling < 2.0, "decay ceiling {ceiling}");
    }
}
