use serde::Serialize;

use super::{FitError, FitResult};
use crate::units::Angle;

/// Offsets larger than this are flagged for correction.
pub const ALIGNMENT_THRESHOLD_UM: f64 = 1.0;

/// Fractional signal loss at the ion when one beam moves by d along the
/// trap axis, for the two-beam Rabi rate and the single-beam Stark shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub waist_axis_um: f64,
    pub d_um: Vec<f64>,
    pub f_rabi: Vec<f64>,
    pub f_stark: Vec<f64>,
    pub ratio: Vec<f64>,
}

/// f_rabi = 1 − exp(−d²/w_axis²) since Ω ∝ √(I₁I₂), and
/// f_stark = 1 − exp(−4d²/w_axis²) since δω⁽⁴⁾ ∝ I². At d = 0 the ratio
/// takes its limit value 4.
pub fn sensitivity_analysis(
    waist_um: f64,
    projection: Angle,
    d_grid: &[f64],
) -> Result<SensitivityCurve, FitError> {
    if !(waist_um > 0.0 && waist_um.is_finite()) {
        return Err(FitError::InvalidInput(format!(
            "waist must be positive, got {waist_um}"
        )));
    }
    let sin_p = projection.radians().sin();
    if !(sin_p > 0.0) {
        return Err(FitError::InvalidInput(format!(
            "projection angle {projection} must lie in (0°, 180°)"
        )));
    }
    let w_axis = waist_um / sin_p;
    let mut curve = SensitivityCurve {
        waist_axis_um: w_axis,
        d_um: Vec::with_capacity(d_grid.len()),
        f_rabi: Vec::with_capacity(d_grid.len()),
        f_stark: Vec::with_capacity(d_grid.len()),
        ratio: Vec::with_capacity(d_grid.len()),
    };
    for &d in d_grid {
        let u = (d / w_axis).powi(2);
        let f_rabi = -(-u).exp_m1();
        let f_stark = -(-4.0 * u).exp_m1();
        curve.d_um.push(d);
        curve.f_rabi.push(f_rabi);
        curve.f_stark.push(f_stark);
        curve
            .ratio
            .push(if f_rabi == 0.0 { 4.0 } else { f_stark / f_rabi });
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamAlignment {
    pub beam: usize,
    pub center_um: f64,
    pub offset_um: f64,
    /// Move the beam by this much to center it on the ion.
    pub translation_um: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub ion_position_um: f64,
    pub threshold_um: f64,
    pub beams: Vec<BeamAlignment>,
    /// center(beam 1) − center(beam 0), when there are two or more beams.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_offset_um: Option<f64>,
    pub aligned: bool,
}

/// Compare fitted profile centers (`center_um`) with the ion position.
pub fn alignment_report(
    fits: &[FitResult],
    ion_position_um: f64,
) -> Result<AlignmentReport, FitError> {
    if fits.is_empty() {
        return Err(FitError::InvalidInput(
            "alignment report needs at least one profile fit".into(),
        ));
    }
    let beams = fits
        .iter()
        .enumerate()
        .map(|(i, fit)| {
            let center = fit.param("center_um").ok_or_else(|| {
                FitError::InvalidInput(format!("fit {i} has no center_um parameter"))
            })?;
            let offset = center - ion_position_um;
            Ok(BeamAlignment {
                beam: i,
                center_um: center,
                offset_um: offset,
                translation_um: -offset,
                flagged: offset.abs() > ALIGNMENT_THRESHOLD_UM,
            })
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    let relative_offset_um = (beams.len() >= 2).then(|| beams[1].center_um - beams[0].center_um);
    let aligned = beams.iter().all(|b| !b.flagged);
    Ok(AlignmentReport {
        ion_position_um,
        threshold_um: ALIGNMENT_THRESHOLD_UM,
        beams,
        relative_offset_um,
        aligned,
    })
}
