use nalgebra::{DMatrix, DVector};

use super::{rms, weights, FitError, FitResult};
use crate::dataset::{ScanDataset, ScanKind};

/// Fit y = a·P² + b·P by weighted linear least squares. `a` is the
/// four-photon coefficient (Hz/mW²), `b` the residual two-photon term (Hz/mW).
pub fn fit_power_law(scan: &ScanDataset) -> Result<FitResult, FitError> {
    scan.expect_kind(ScanKind::Power)?;
    let p = scan.xs();
    let y = scan.ys();
    let w = weights(scan);

    let mut distinct = p.clone();
    distinct.dedup();
    if distinct.iter().filter(|v| **v != 0.0).count() < 2 {
        return Err(FitError::RankDeficient(
            "need at least two distinct nonzero powers to separate P² from P".into(),
        ));
    }
    if distinct.len() < 4 {
        return Err(FitError::UnderSampled {
            needed: 4,
            got: distinct.len(),
        });
    }

    let n = p.len();
    // Solve in u = P/P_max so both columns are O(1).
    let p_max = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let design = DMatrix::from_fn(n, 2, |i, j| w[i] * if j == 0 { p[i] * p[i] } else { p[i] });
    let scaled = DMatrix::from_fn(n, 2, |i, j| {
        let u = p[i] / p_max;
        w[i] * if j == 0 { u * u } else { u }
    });
    let rhs = DVector::from_fn(n, |i, _| w[i] * y[i]);
    let coef_u = scaled
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| FitError::RankDeficient(e.to_string()))?;
    let coef = DVector::from_vec(vec![coef_u[0] / (p_max * p_max), coef_u[1] / p_max]);

    let weighted_resid = &design * &coef - &rhs;
    let dof = n.saturating_sub(2);
    let variance = if dof > 0 {
        weighted_resid.norm_squared() / dof as f64
    } else {
        0.0
    };
    let cov = (design.transpose() * &design)
        .try_inverse()
        .ok_or_else(|| FitError::RankDeficient("singular normal matrix".into()))?
        * variance;

    let (a, b) = (coef[0], coef[1]);
    let residual_rms = rms(p.iter().zip(&y).map(|(pi, yi)| a * pi * pi + b * pi - yi));
    let mut result = FitResult::empty(residual_rms, 1);
    result.insert("a_hz_per_mw2", a, cov[(0, 0)].max(0.0).sqrt());
    result.insert("b_hz_per_mw", b, cov[(1, 1)].max(0.0).sqrt());
    Ok(result)
}

/// Slope and intercept of ln|y| against ln P over points with P > 0 and
/// y ≠ 0. A pure four-photon scan has slope 2.
pub fn power_law_exponent(scan: &ScanDataset) -> Result<(f64, f64), FitError> {
    let pts: Vec<(f64, f64)> = scan
        .records
        .iter()
        .filter(|r| r.x > 0.0 && r.y != 0.0)
        .map(|r| (r.x.ln(), r.y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(FitError::UnderSampled {
            needed: 2,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::RankDeficient("all powers equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
