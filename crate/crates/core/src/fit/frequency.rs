use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};

use super::lm::{minimize, LmOptions, Residuals};
use super::{rms, weights, FitError, FitResult};
use crate::dataset::{ScanDataset, ScanKind};

const N_PARAMS: usize = 4;

/// y = offset + ½·contrast·cos(2πf t + phase)
struct Fringe<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    freq_scale: f64,
}

fn fringe(p: &[f64], t: f64) -> f64 {
    p[3] + 0.5 * p[2] * (TAU * p[0] * t + p[1]).cos()
}

impl Residuals for Fringe<'_> {
    fn n_params(&self) -> usize {
        N_PARAMS
    }

    fn n_residuals(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.t.len() {
            out[i] = self.w[i] * (fringe(p, self.t[i]) - self.y[i]);
        }
    }

    fn scales(&self) -> Vec<f64> {
        vec![self.freq_scale, 1.0, 1.0, 1.0]
    }
}

/// Frequency of the strongest component of mean-subtracted data, on a grid
/// oversampled eight times relative to 1/span and running to the Nyquist
/// limit of the average spacing.
fn dominant_frequency(t: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let span = t[t.len() - 1] - t[0];
    let nyquist = (t.len() - 1) as f64 / (2.0 * span);
    let step = 1.0 / (8.0 * span);
    let mut best = (step, f64::NEG_INFINITY);
    let mut f = step;
    while f <= nyquist {
        let (mut c, mut s) = (0.0, 0.0);
        for (ti, yi) in t.iter().zip(y) {
            let (sn, cs) = (TAU * f * ti).sin_cos();
            c += (yi - mean) * cs;
            s += (yi - mean) * sn;
        }
        let power = c * c + s * s;
        if power > best.1 {
            best = (f, power);
        }
        f += step;
    }
    best.0
}

/// Contrast and phase of the best sinusoid at fixed frequency.
fn linear_phase_guess(t: &[f64], y: &[f64], freq: f64) -> (f64, f64) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut ata = Matrix2::zeros();
    let mut aty = Vector2::zeros();
    for (ti, yi) in t.iter().zip(y) {
        let (s, c) = (TAU * freq * ti).sin_cos();
        let row = Vector2::new(c, s);
        ata += row * row.transpose();
        aty += row * (yi - mean);
    }
    let coef = ata.lu().solve(&aty).unwrap_or_else(Vector2::zeros);
    // a cos + b sin = R cos(x + φ) with R = √(a²+b²), φ = atan2(−b, a).
    (2.0 * coef.norm(), (-coef[1]).atan2(coef[0]))
}

fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(TAU);
    if p > PI {
        p -= TAU;
    }
    p
}

/// Fit a Ramsey fringe. x is the delay in seconds; `freq_hz` is reported
/// as a positive frequency with the sign folded into `phase_rad`.
pub fn fit_frequency(ramsey: &ScanDataset) -> Result<FitResult, FitError> {
    ramsey.expect_kind(ScanKind::Ramsey)?;
    let needed = N_PARAMS + 4;
    if ramsey.len() < needed {
        return Err(FitError::UnderSampled {
            needed,
            got: ramsey.len(),
        });
    }
    let t = ramsey.xs();
    let y = ramsey.ys();
    let w = weights(ramsey);
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(FitError::InvalidInput("all delays are equal".into()));
    }

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * (1.0 + mean.abs()) {
        return Err(FitError::NonConvergence(
            "no fringe: data are constant".into(),
        ));
    }

    let f0 = dominant_frequency(&t, &y);
    let (c0, phase0) = linear_phase_guess(&t, &y, f0);
    let problem = Fringe {
        t: &t,
        y: &y,
        w: &w,
        freq_scale: 1.0 / span,
    };
    let out = minimize(&problem, &[f0, phase0, c0, mean], LmOptions::default());
    if !out.converged {
        return Err(FitError::NonConvergence(format!(
            "no convergence after {} iterations",
            out.iterations
        )));
    }
    let sig = out.sigmas();
    let [mut freq, mut phase, mut contrast, offset] =
        [out.params[0], out.params[1], out.params[2], out.params[3]];
    if contrast < 0.0 {
        contrast = -contrast;
        phase += PI;
    }
    if freq < 0.0 {
        freq = -freq;
        phase = -phase;
    }
    if freq * span < 1.0 {
        return Err(FitError::NonConvergence(format!(
            "fitted fringe spans {:.3} cycles, need at least one",
            freq * span
        )));
    }

    let residual_rms = rms(t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| fringe(&out.params, *ti) - yi));
    let mut result = FitResult::empty(residual_rms, out.iterations);
    result.insert("freq_hz", freq, sig[0]);
    result.insert("phase_rad", wrap_phase(phase), sig[1]);
    result.insert("contrast", contrast, sig[2]);
    result.insert("offset", offset, sig[3]);
    Ok(result)
}
