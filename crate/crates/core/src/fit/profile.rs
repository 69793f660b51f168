use super::lm::{minimize, LmOptions, Residuals};
use super::{rms, weights, FitError, FitResult};
use crate::dataset::{ScanDataset, ScanKind};
use crate::units::Angle;

const MIN_POINTS: usize = 7;

/// y = peak·exp(−k(x − c)²/w²)
struct Gaussian<'a> {
    k: f64,
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    scales: [f64; 3],
}

fn gaussian(k: f64, p: &[f64], x: f64) -> f64 {
    let u = (x - p[0]) / p[1];
    p[2] * (-k * u * u).exp()
}

impl Residuals for Gaussian<'_> {
    fn n_params(&self) -> usize {
        3
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.x.len() {
            out[i] = self.w[i] * (gaussian(self.k, p, self.x[i]) - self.y[i]);
        }
    }

    fn scales(&self) -> Vec<f64> {
        self.scales.to_vec()
    }
}

/// Moments of the positive part of y: centroid and the width w for which
/// exp(−k u²/w²) has the same variance (σ² = w²/2k).
fn moment_guess(k: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
    let mass: f64 = y.iter().map(|v| v.max(0.0)).sum();
    if mass <= 0.0 {
        let mid = 0.5 * (x[0] + x[x.len() - 1]);
        return (mid, 0.25 * (x[x.len() - 1] - x[0]));
    }
    let c = x.iter().zip(y).map(|(a, b)| a * b.max(0.0)).sum::<f64>() / mass;
    let var = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - c).powi(2) * b.max(0.0))
        .sum::<f64>()
        / mass;
    (c, (2.0 * k * var).sqrt().max(1e-6))
}

fn fit_gaussian(scan: &ScanDataset, k: f64, projection: Angle) -> Result<FitResult, FitError> {
    if scan.len() < MIN_POINTS {
        return Err(FitError::UnderSampled {
            needed: MIN_POINTS,
            got: scan.len(),
        });
    }
    let sin_p = projection.radians().sin();
    if !(sin_p > 0.0) {
        return Err(FitError::InvalidInput(format!(
            "projection angle {projection} must lie in (0°, 180°)"
        )));
    }
    let x = scan.xs();
    let y = scan.ys();
    let w = weights(scan);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    if !(hi > lo) {
        return Err(FitError::InvalidInput("all positions are equal".into()));
    }

    // Fit the sign-folded data so a negative-going profile is handled too.
    let sign = if y.iter().sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let folded: Vec<f64> = y.iter().map(|v| sign * v).collect();
    let peak0 = folded.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak0 > 0.0) {
        return Err(FitError::Degenerate("profile has no peak".into()));
    }
    let (c0, w0) = moment_guess(k, &x, &folded);
    let problem = Gaussian {
        k,
        x: &x,
        y: &folded,
        w: &w,
        scales: [w0, w0, peak0],
    };
    let out = minimize(&problem, &[c0, w0, peak0], LmOptions::default());
    if !out.converged {
        return Err(FitError::NonConvergence(format!(
            "no convergence after {} iterations",
            out.iterations
        )));
    }
    let sig = out.sigmas();
    let (center, waist_axis, peak) = (out.params[0], out.params[1].abs(), sign * out.params[2]);

    let residual_rms = rms(x
        .iter()
        .zip(&folded)
        .map(|(xi, yi)| gaussian(k, &out.params, *xi) - yi));
    let mut result = FitResult::empty(residual_rms, out.iterations);
    result.insert("center_um", center, sig[0]);
    result.insert("waist_axis_um", waist_axis, sig[1]);
    result.insert("waist_um", waist_axis * sin_p, sig[1] * sin_p);
    result.insert("peak_hz", peak, sig[2]);
    if center < lo || center > hi {
        result.warnings.push(format!(
            "fitted peak at {center:.3} μm lies outside the scanned range [{lo}, {hi}] μm; extrapolated"
        ));
    }
    Ok(result)
}

/// Fit a position scan with the squared Gaussian peak·exp(−4(x−c)²/w_axis²)
/// and de-project the waist: w₀ = w_axis·sin(projection).
pub fn fit_beam_profile(scan: &ScanDataset, projection: Angle) -> Result<FitResult, FitError> {
    scan.expect_kind(ScanKind::Position)?;
    fit_gaussian(scan, 4.0, projection)
}

/// Fit a two-beam Rabi profile with peak·exp(−2(x−c)²/w_axis²), the shape of
/// √(I₁I₂) for equal waists. The center is the midpoint of the two beams.
pub fn fit_rabi_profile(scan: &ScanDataset, projection: Angle) -> Result<FitResult, FitError> {
    scan.expect_kind(ScanKind::Rabi)?;
    fit_gaussian(scan, 2.0, projection)
}
