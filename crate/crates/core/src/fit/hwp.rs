use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use super::lm::{minimize, LmOptions, LmOutcome, Residuals};
use super::{rms, weights, FitError, FitResult};
use crate::dataset::{ScanDataset, ScanKind};
use crate::engine::ShiftEngine;
use crate::units::Angle;

const MIN_ANGLES: usize = 12;
const MIN_SPAN_DEG: f64 = 90.0;
const GRID_ALPHA_DEG: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];
const GRID_PHI_DEG: [f64; 5] = [-20.0, -10.0, 0.0, 10.0, 20.0];
const TIE_TOLERANCE: f64 = 1e-6;
/// |sin α cos β| below this puts the field in the plane transverse to the
/// beam, where α and φ trade off exactly.
const TRANSVERSE_TOLERANCE: f64 = 0.02;

/// Single-beam shift at unit Ω₀, normalized so that α = 0, φ = 0 gives
/// exactly sin²(4θ).
pub fn hwp_shape(engine: &ShiftEngine, alpha: f64, beta: f64, theta: f64, phi: f64) -> f64 {
    engine.shift_for_angles(alpha, beta, theta, phi, 1.0) / (engine.linear_response() / 8.0)
}

/// The HWP-scan model y(θ) = A·shape(α, β, θ, φ).
#[derive(Debug, Clone)]
pub struct HwpModel {
    engine: ShiftEngine,
    /// Σ C/δ / 8, so that A = Ω₀²·norm / 2π.
    norm: f64,
}

impl HwpModel {
    pub fn new(engine: ShiftEngine) -> Result<Self, FitError> {
        let norm = engine.linear_response() / 8.0;
        if norm == 0.0 || !norm.is_finite() {
            return Err(FitError::Degenerate(
                "engine has no linear-polarization response".into(),
            ));
        }
        Ok(HwpModel { engine, norm })
    }

    pub fn engine(&self) -> &ShiftEngine {
        &self.engine
    }

    pub fn shape(&self, alpha: f64, beta: f64, theta: f64, phi: f64) -> f64 {
        self.engine.shift_for_angles(alpha, beta, theta, phi, 1.0) / self.norm
    }

    /// Ω₀ implied by a fitted amplitude in Hz, if the sign allows one.
    pub fn omega0_for_amplitude(&self, amplitude_hz: f64) -> Option<f64> {
        let sq = TAU * amplitude_hz / self.norm;
        (sq >= 0.0).then(|| sq.sqrt())
    }
}

/// Angles held fixed during an HWP fit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FixedAngles {
    pub alpha: Option<Angle>,
    pub beta: Option<Angle>,
    pub phi: Option<Angle>,
}

struct HwpProblem<'a> {
    model: &'a HwpModel,
    theta: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    /// α, β, φ, A with fixed entries filled in.
    template: [f64; 4],
    free: Vec<usize>,
    amp_scale: f64,
}

impl HwpProblem<'_> {
    fn full(&self, p: &[f64]) -> [f64; 4] {
        let mut full = self.template;
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = p[k];
        }
        full
    }
}

impl Residuals for HwpProblem<'_> {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn n_residuals(&self) -> usize {
        self.theta.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let [a, b, f, amp] = self.full(p);
        for i in 0..self.theta.len() {
            out[i] = self.w[i] * (amp * self.model.shape(a, b, self.theta[i], f) - self.y[i]);
        }
    }

    fn scales(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| if i == 3 { self.amp_scale } else { 1e-2 })
            .collect()
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    // Into (−period/2, period/2].
    let r = x.rem_euclid(period);
    if r > period / 2.0 {
        r - period
    } else {
        r
    }
}

/// Map (α, β, φ) onto α ∈ [0, π], β ∈ [0, 2π), φ ∈ (−π/2, π/2]. A rotation
/// by π about the field axis leaves the shift unchanged, so (−α, β) and
/// (α, β + π) describe the same geometry.
fn canonical(alpha: f64, beta: f64, phi: f64) -> (f64, f64, f64) {
    let mut a = wrap(alpha, TAU);
    let mut b = beta;
    if a < 0.0 {
        a = -a;
        b += PI;
    }
    (a, b.rem_euclid(TAU), wrap(phi, PI))
}

/// Fit α, β, φ and the amplitude to an HWP scan (x in degrees, y in Hz).
/// Angles in `fixed` are held at their given values.
pub fn fit_hwp_scan(
    scan: &ScanDataset,
    model: &HwpModel,
    fixed: FixedAngles,
) -> Result<FitResult, FitError> {
    scan.expect_kind(ScanKind::Hwp)?;
    if scan.len() < MIN_ANGLES {
        return Err(FitError::UnderSampled {
            needed: MIN_ANGLES,
            got: scan.len(),
        });
    }
    let xs = scan.xs();
    let span = xs[xs.len() - 1] - xs[0];
    if span < MIN_SPAN_DEG {
        return Err(FitError::InvalidInput(format!(
            "HWP angles span {span}°, need at least {MIN_SPAN_DEG}°"
        )));
    }
    let y = scan.ys();
    let mut sig = scan.sigmas();
    sig.sort_by(f64::total_cmp);
    let median_sigma = sig[sig.len() / 2];
    let peak = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if peak <= 3.0 * median_sigma {
        return Err(FitError::Degenerate(format!(
            "signal peak {peak:.3e} Hz is within 3σ ({median_sigma:.3e} Hz) of zero; amplitude unidentifiable"
        )));
    }

    let theta: Vec<f64> = xs.iter().map(|d| d.to_radians()).collect();
    let w = weights(scan);
    let mut template = [0.0, 0.0, 0.0, peak];
    let mut free = Vec::new();
    for (i, f) in [fixed.alpha, fixed.beta, fixed.phi].into_iter().enumerate() {
        match f {
            Some(angle) => template[i] = angle.radians(),
            None => free.push(i),
        }
    }
    free.push(3);

    let mut starts = Vec::new();
    for a in GRID_ALPHA_DEG {
        for f in GRID_PHI_DEG {
            let mut s = template;
            if fixed.alpha.is_none() {
                s[0] = a.to_radians();
            }
            if fixed.phi.is_none() {
                s[2] = f.to_radians();
            }
            if !starts.contains(&s) {
                starts.push(s);
            }
        }
    }

    let problem = HwpProblem {
        model,
        theta: &theta,
        y: &y,
        w: &w,
        template,
        free: free.clone(),
        amp_scale: peak,
    };
    let outcomes: Vec<LmOutcome> = starts
        .par_iter()
        .map(|s| {
            // Start the amplitude from the linear optimum at these angles.
            let shape: Vec<f64> = theta
                .iter()
                .map(|t| model.shape(s[0], s[1], *t, s[2]))
                .collect();
            let num: f64 = (0..y.len()).map(|i| w[i] * w[i] * shape[i] * y[i]).sum();
            let den: f64 = (0..y.len())
                .map(|i| w[i] * w[i] * shape[i] * shape[i])
                .sum();
            let amp = if den > 0.0 { num / den } else { peak };
            let init: Vec<f64> = free
                .iter()
                .map(|&i| if i == 3 { amp } else { s[i] })
                .collect();
            minimize(&problem, &init, LmOptions::default())
        })
        .collect();
    let lowest = outcomes
        .iter()
        .map(|o| o.cost)
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !lowest.is_finite() {
        return Err(FitError::NonConvergence(
            "no start produced a finite residual".into(),
        ));
    }
    // Basins with equal cost are the same curve; report the smallest α.
    let signal: f64 = 0.5
        * y.iter()
            .zip(&w)
            .map(|(v, wi)| (v * wi).powi(2))
            .sum::<f64>();
    let tie = lowest * (1.0 + TIE_TOLERANCE) + 1e-12 * signal;
    let best = outcomes
        .into_iter()
        .filter(|o| o.cost <= tie)
        .min_by(|a, b| {
            let alpha = |o: &LmOutcome| canonical(problem.full(&o.params)[0], 0.0, 0.0).0;
            alpha(a).total_cmp(&alpha(b))
        })
        .expect("lowest-cost outcome is within the tie band");
    if !best.converged {
        return Err(FitError::NonConvergence(format!(
            "best basin did not converge after {} iterations",
            best.iterations
        )));
    }

    let [a_raw, b_raw, f_raw, amp] = problem.full(&best.params);
    let (alpha, beta, phi) = canonical(a_raw, b_raw, f_raw);
    let sigmas = best.sigmas();
    let mut sig_full = [0.0; 4];
    for (k, &i) in free.iter().enumerate() {
        sig_full[i] = sigmas[k];
    }

    let residual_rms = rms(theta
        .iter()
        .zip(&y)
        .map(|(t, yi)| amp * model.shape(alpha, beta, *t, phi) - yi));
    let mut result = FitResult::empty(residual_rms, best.iterations);
    result.insert("alpha_deg", alpha.to_degrees(), sig_full[0].to_degrees());
    result.insert("beta_deg", beta.to_degrees(), sig_full[1].to_degrees());
    result.insert("phi_deg", phi.to_degrees(), sig_full[2].to_degrees());
    result.insert("amplitude_hz", amp, sig_full[3]);
    if let Some(omega0) = model.omega0_for_amplitude(amp) {
        // dΩ₀/dA = Ω₀ / 2A
        result.insert(
            "omega0_rad_s",
            omega0,
            omega0 * sig_full[3] / (2.0 * amp.abs()),
        );
    }

    if fixed.beta.is_none() && alpha < 1f64.to_radians() {
        result
            .warnings
            .push("α is near 0, where β barely affects the shift; β is poorly constrained".into());
    }
    if fixed.alpha.is_none()
        && fixed.phi.is_none()
        && (alpha.sin() * beta.cos()).abs() < TRANSVERSE_TOLERANCE
    {
        result.warnings.push(
            "field lies in the plane transverse to the beam: a tilt there is equivalent to a QWP rotation, \
             so only φ + α·sin β is determined; fix α or φ to separate them"
                .into(),
        );
    }
    if sig_full.iter().any(|s| !s.is_finite()) {
        result
            .warnings
            .push("curvature is singular at the optimum; some uncertainties are undefined".into());
    }
    if (phi.abs() - FRAC_PI_2).abs() < 1e-6 {
        result.warnings.push("φ sits on the ±90° boundary".into());
    }
    Ok(result)
}
