//! Slope extraction from recorded bound-state projections, and the
//! comparison report types persisted by the compare command.

use serde::{Deserialize, Serialize};

/// Least-squares line fit; returns (slope, intercept).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit of log|B_b| over the configured window.
///
/// Samples before `window_start`·T_end are dropped (transient), as are any
/// with |B_b| below 1e-3 of the initial value, where the projection has sunk
/// into the dispersive background.
pub fn decay_slope_fit(
    times: &[f64],
    abs_b: &[f64],
    window_start: f64,
) -> Option<(f64, f64, usize)> {
    let t_end = *times.last()?;
    let b0 = abs_b.first().copied()?.max(1e-300);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(abs_b)
        .filter(|(&t, &b)| t >= window_start * t_end && b > 1e-3 * b0)
        .map(|(&t, &b)| (t, b.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    Some((slope, intercept, pts.len()))
}

/// Unwrapped phase of the projection samples.
pub fn unwrap_phase(args: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(args.len());
    let mut offset = 0.0;
    let mut prev = None;
    for &a in args {
        if let Some(p) = prev {
            let mut d: f64 = a + offset - p;
            while d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                d += 2.0 * std::f64::consts::PI;
            }
        }
        let v = a + offset;
        out.push(v);
        prev = Some(v);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareEntry {
    pub epsilon: f64,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub predicted_gamma: f64,
    /// |slope + Γ| / Γ
    pub rel_slope_error: f64,
    pub slope_within_tolerance: bool,
    /// d(arg B_b)/dt fitted over the same window
    pub phase_slope: f64,
    /// Λ - M̄ (the B_b-frame prediction; the Floquet frame adds 2β_b)
    pub predicted_phase_slope: f64,
    pub phase_rel_error: f64,
    pub mbar: f64,
    pub lambda_shift: f64,
    pub small_time_c: f64,
    pub convergence_ok: bool,
    pub samples_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRatio {
    pub eps_hi: f64,
    pub eps_lo: f64,
    pub slope_ratio: f64,
    pub expected_ratio: f64,
    pub rel_error: f64,
    pub within_ten_percent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub parity: String,
    pub period: f64,
    pub beta_b: f64,
    pub slope_tolerance: f64,
    pub fit_window_start: f64,
    pub entries: Vec<CompareEntry>,
    pub scaling: Vec<ScalingRatio>,
    pub all_slopes_within_tolerance: bool,
    pub all_ratios_within_ten_percent: bool,
}
