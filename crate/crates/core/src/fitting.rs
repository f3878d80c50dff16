//! Least-squares fits used by the diagnostics: power-law exponents in time
//! and phase drift linear in `log t`.

/// Result of a least-squares line through `(log t, log y)`.
#[derive(Clone, Copy, Debug)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_amplitude: f64,
    /// standard error of the exponent (2-sigma half-width is `2 * stderr`)
    pub stderr: f64,
    pub r_squared: f64,
}

/// Fit `y ~ A t^p` over strictly positive samples.
pub fn fit_power_law(ts: &[f64], ys: &[f64]) -> Option<PowerLawFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(&t, &y)| t > 0.0 && y > 0.0)
        .map(|(&t, &y)| (t.ln(), y.ln()))
        .collect();
    let (slope, intercept, stderr, r2) = line_fit(&pts)?;
    Some(PowerLawFit { exponent: slope, log_amplitude: intercept, stderr, r_squared: r2 })
}

/// Fit `y ~ a + b log t`; returns `(b, a, stderr_b)`.
pub fn fit_log_drift(ts: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> =
        ts.iter().zip(ys).filter(|(&t, _)| t > 0.0).map(|(&t, &y)| (t.ln(), y)).collect();
    let (slope, intercept, stderr, _) = line_fit(&pts)?;
    Some((slope, intercept, stderr))
}

fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let mx = sx / nf;
    let my = sy / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((slope, intercept, stderr, r2))
}

/// Unwrap a phase sequence: remove 2 pi jumps between consecutive samples.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = out[i - 1];
            let mut q = p + offset;
            while q - prev > std::f64::consts::PI {
                q -= 2.0 * std::f64::consts::PI;
                offset -= 2.0 * std::f64::consts::PI;
            }
            while q - prev < -std::f64::consts::PI {
                q += 2.0 * std::f64::consts::PI;
                offset += 2.0 * std::f64::consts::PI;
            }
            out.push(q);
        } else {
            out.push(p);
        }
    }
    out
}
