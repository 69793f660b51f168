//! Synthetic measurement scans with shot, SPAM, intensity and position noise.
//!
//! Randomness: every scan point `i` owns the ChaCha8 stream `i` of the
//! generator seeded with `noise.seed` (`ChaCha8Rng::seed_from_u64(seed)`
//! followed by `set_stream(i)`). Points are evaluated in parallel and
//! assembled in input order, so output depends only on the seed.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, DEFAULT_PROJECTION_DEG};
use crate::dataset::{ScanDataset, ScanKind, ScanMetadata, ScanRecord};
use crate::engine::{base_rabi_rate_at, EngineError, ShiftEngine};
use crate::fit::{fit_frequency, FitError};
use crate::units::Angle;

/// Delays per Ramsey fringe when a scan point is measured in full mode.
pub const FRINGE_POINTS: usize = 48;
/// The fringe spans this many periods of the largest expected shift.
pub const FRINGE_PERIODS: f64 = 3.0;
/// Fringe scale used when every point of a scan has zero shift.
pub const FALLBACK_SHIFT_HZ: f64 = 500.0;
/// Reference-free points below this fraction of the scan maximum are not
/// fringe-fitted.
pub const MIN_FRINGE_FRACTION: f64 = 1e-6;
/// Intensity factors are clipped to 1 ± CLIP_SIGMAS·σ.
pub const CLIP_SIGMAS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid scan: {0}")]
    InvalidInput(String),
    #[error("frequency extraction failed at point {index}: {source}")]
    Extraction { index: usize, source: FitError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// 1/e² intensity radius in the beam frame.
    pub waist_um: f64,
    pub power_mw: f64,
    /// Beam center along the trap axis.
    pub center_um: f64,
    /// Angle between beam and trap axis.
    pub projection: Angle,
}

impl BeamGeometry {
    pub fn new(waist_um: f64, power_mw: f64, center_um: f64) -> Self {
        BeamGeometry {
            waist_um,
            power_mw,
            center_um,
            projection: Angle::from_degrees(DEFAULT_PROJECTION_DEG),
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.waist_um > 0.0 && self.waist_um.is_finite()) {
            return Err(("waist_um", format!("must be > 0, got {}", self.waist_um)));
        }
        if !(self.power_mw >= 0.0 && self.power_mw.is_finite()) {
            return Err(("power_mw", format!("must be >= 0, got {}", self.power_mw)));
        }
        if !self.center_um.is_finite() {
            return Err(("center_um", "must be finite".into()));
        }
        let p = self.projection.degrees();
        if !(p > 0.0 && p < 180.0) {
            return Err(("projection_deg", format!("must lie in (0, 180), got {p}")));
        }
        Ok(())
    }

    /// I₀ = 2P/(πw₀²) in mW/μm².
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power_mw / (PI * self.waist_um * self.waist_um)
    }

    /// Waist seen along the trap axis, w₀/sin(projection).
    pub fn axis_waist(&self) -> f64 {
        self.waist_um / self.projection.radians().sin()
    }

    /// I(x)/I₀.
    pub fn relative_intensity(&self, x_um: f64) -> f64 {
        let u = (x_um - self.center_um) / self.axis_waist();
        (-2.0 * u * u).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub spam_error: f64,
    /// Relative 1σ of the beam intensity.
    pub intensity_fraction: f64,
    pub shots: u32,
    pub position_sigma_um: f64,
    pub seed: u64,
    /// Sample readout from a binomial over `shots`; otherwise report P.
    pub projection_noise: bool,
}

impl Default for NoiseModel {
    /// 4% SPAM, 1% intensity noise, 100 shots, ±1 μm position uncertainty.
    fn default() -> Self {
        NoiseModel {
            spam_error: 0.04,
            intensity_fraction: 0.01,
            shots: 100,
            position_sigma_um: 1.0,
            seed: 0,
            projection_noise: true,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            spam_error: 0.0,
            intensity_fraction: 0.0,
            shots: 100,
            position_sigma_um: 0.0,
            seed: 0,
            projection_noise: false,
        }
    }

    pub fn contrast(&self) -> f64 {
        1.0 - 2.0 * self.spam_error
    }

    pub fn is_noiseless(&self) -> bool {
        self.spam_error == 0.0
            && self.intensity_fraction == 0.0
            && self.position_sigma_um == 0.0
            && !self.projection_noise
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(0.0..0.5).contains(&self.spam_error) {
            return Err((
                "spam_error",
                format!("must lie in [0, 0.5), got {}", self.spam_error),
            ));
        }
        if !(self.intensity_fraction >= 0.0 && self.intensity_fraction.is_finite()) {
            return Err((
                "intensity_fraction",
                format!("must be >= 0, got {}", self.intensity_fraction),
            ));
        }
        if self.shots < 1 {
            return Err(("shots", "must be >= 1".into()));
        }
        if !(self.position_sigma_um >= 0.0 && self.position_sigma_um.is_finite()) {
            return Err((
                "position_sigma_um",
                format!("must be >= 0, got {}", self.position_sigma_um),
            ));
        }
        Ok(())
    }
}

/// I(x) = I₀·exp(−2(x − center)²/w_axis²).
pub fn axis_intensity(beam: &BeamGeometry, x_um: f64) -> f64 {
    beam.peak_intensity() * beam.relative_intensity(x_um)
}

/// P(↑) after π/2 – t – π/2 with phase δω·t.
pub fn ramsey_probability(delta_omega: f64, t: f64, contrast: f64) -> f64 {
    0.5 * (1.0 + contrast * (delta_omega * t).cos())
}

/// Two-beam Rabi frequency Ω ∝ √(I₁I₂), normalized so two aligned beams
/// give `peak_hz` at their common center.
pub fn rabi_profile(beam1: &BeamGeometry, beam2: &BeamGeometry, x_um: f64, peak_hz: f64) -> f64 {
    if beam1.power_mw == 0.0 || beam2.power_mw == 0.0 {
        return 0.0;
    }
    peak_hz * (beam1.relative_intensity(x_um) * beam2.relative_intensity(x_um)).sqrt()
}

/// 1σ frequency error of a fringe fit with `n_points` delays over `span`
/// seconds: σ_f = √(24/N)·σ_p/(2π·a·T), with a = C/2 and the shot-noise
/// σ_p² = (1 − C²/2)/(4·shots) averaged over the fringe.
pub fn fringe_frequency_sigma(contrast: f64, shots: u32, n_points: usize, span: f64) -> f64 {
    let sigma_p = ((1.0 - contrast * contrast / 2.0) / (4.0 * shots as f64)).sqrt();
    (24.0 / n_points as f64).sqrt() * sigma_p / (TAU * 0.5 * contrast * span)
}

fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn intensity_factor(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    1.0 + sigma * z.clamp(-CLIP_SIGMAS, CLIP_SIGMAS)
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite σ").sample(rng)
}

/// Binomial readout of `shots` at probability `p`: (mean, σ). σ uses the
/// true probability kept at least 1/(2·shots) away from 0 and 1.
fn readout(rng: &mut ChaCha8Rng, p: f64, noise: &NoiseModel) -> (f64, f64) {
    let n = noise.shots as f64;
    let p = p.clamp(0.0, 1.0);
    let edge = 0.5 / n;
    let pc = p.clamp(edge, 1.0 - edge);
    let sigma = (pc * (1.0 - pc) / n).sqrt();
    if !noise.projection_noise {
        return (p, sigma);
    }
    let k = Binomial::new(noise.shots as u64, p)
        .expect("p in [0, 1]")
        .sample(rng);
    (k as f64 / n, sigma)
}

/// A fixed experiment with precomputed engine, used to generate scans.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ExperimentConfig,
    engine: ShiftEngine,
    fast: bool,
}

/// What a scan point measures, before noise.
#[derive(Debug, Clone, Copy)]
enum Probe {
    /// Single-beam shift with waveplates (θ, φ), with the ion at the beam
    /// peak or at trap position `x`.
    Shift {
        beam: BeamGeometry,
        theta: f64,
        phi: f64,
        x: Option<f64>,
    },
    /// Two-beam Rabi frequency.
    Rabi { x: f64, peak_hz: f64 },
}

impl Simulator {
    pub fn new(config: ExperimentConfig) -> Result<Self, SimError> {
        config.validate()?;
        let engine = ShiftEngine::from_config(&config)?;
        Ok(Simulator {
            config,
            engine,
            fast: false,
        })
    }

    /// Replace full Ramsey sampling of each scan point by the analytic value
    /// plus Gaussian noise of the same expected size.
    pub fn with_fast(mut self, fast: bool) -> Self {
        self.fast = fast;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn engine(&self) -> &ShiftEngine {
        &self.engine
    }

    pub fn seed(&self) -> u64 {
        self.config.noise.seed
    }

    fn noise(&self) -> &NoiseModel {
        &self.config.noise
    }

    /// Single-beam shift in Hz for `beam` at `scale`·power with waveplates
    /// (θ, φ). The four-photon term goes as scale², the residual
    /// two-photon term as scale.
    pub fn shift_hz(
        &self,
        beam: &BeamGeometry,
        scale: f64,
        theta: f64,
        phi: f64,
    ) -> Result<f64, EngineError> {
        let omega0 = base_rabi_rate_at(&self.config.ion, beam.peak_intensity() * scale)?;
        let four = self.engine.shift_for_angles(
            self.config.field.alpha.radians(),
            self.config.field.beta.radians(),
            theta,
            phi,
            omega0,
        );
        Ok(four / TAU + self.config.residual_two_photon_hz_per_mw * beam.power_mw * scale)
    }

    fn evaluate(
        &self,
        probe: Probe,
        intensity: f64,
        position_offset: f64,
    ) -> Result<f64, EngineError> {
        match probe {
            Probe::Shift {
                beam,
                theta,
                phi,
                x,
            } => {
                let g = x.map_or(1.0, |x| beam.relative_intensity(x + position_offset));
                self.shift_hz(&beam, intensity * g, theta, phi)
            }
            Probe::Rabi { x, peak_hz } => {
                let b0 = self.config.beam(0).map_err(EngineError::from)?;
                let b1 = self.config.beam(1).map_err(EngineError::from)?;
                Ok(rabi_profile(b0, b1, x + position_offset, peak_hz) * intensity)
            }
        }
    }

    fn metadata(
        &self,
        kind: ScanKind,
        beam_index: Option<usize>,
        extra: BTreeMap<String, f64>,
    ) -> ScanMetadata {
        ScanMetadata {
            kind,
            seed: self.seed(),
            fast: self.fast,
            beam_index,
            config: self.config.to_document(),
            extra,
        }
    }

    /// Ramsey fringe of beam `beam_index` at the configured waveplates.
    /// Each delay draws its own intensity factor.
    pub fn ramsey(&self, beam_index: usize, delays: &[f64]) -> Result<ScanDataset, SimError> {
        let beam = *self.config.beam(beam_index)?;
        if let Some(t) = delays.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(SimError::InvalidInput(format!(
                "delay {t} s is not a finite non-negative time"
            )));
        }
        let noise = *self.noise();
        let (theta, phi) = (
            self.config.hwp_angle.radians(),
            self.config.qwp_angle.radians(),
        );
        let records = delays
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut rng = point_rng(noise.seed, i);
                let f = intensity_factor(&mut rng, noise.intensity_fraction);
                let shift = self.shift_hz(&beam, f, theta, phi)?;
                let (y, sigma_y) = readout(
                    &mut rng,
                    ramsey_probability(TAU * shift, t, noise.contrast()),
                    &noise,
                );
                Ok(ScanRecord { x: t, y, sigma_y })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        Ok(ScanDataset::new(
            ScanKind::Ramsey,
            records,
            Some(self.metadata(ScanKind::Ramsey, Some(beam_index), BTreeMap::new())),
        ))
    }

    /// Measure each probe: noiseless values are exact; otherwise the value
    /// is extracted from a Ramsey fringe (or perturbed directly in fast
    /// mode) after intensity and position noise.
    fn measure(
        &self,
        kind: ScanKind,
        xs: &[f64],
        probes: &[Probe],
        reference_hz: f64,
        position_sensitive: bool,
        beam_index: Option<usize>,
        mut extra: BTreeMap<String, f64>,
    ) -> Result<ScanDataset, SimError> {
        let noise = *self.noise();
        let analytic = probes
            .iter()
            .map(|p| self.evaluate(*p, 1.0, 0.0))
            .collect::<Result<Vec<_>, EngineError>>()?;
        let scale = analytic.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(
            if analytic.iter().all(|v| *v == 0.0) {
                FALLBACK_SHIFT_HZ
            } else {
                0.0
            },
        );
        // Fringe frequency = reference + value; the reference keeps it positive.
        let f_ref = reference_hz * scale;
        let span = FRINGE_PERIODS / scale;
        let sigma_fringe =
            fringe_frequency_sigma(noise.contrast(), noise.shots, FRINGE_POINTS, span);
        let pos_sigma = if position_sensitive {
            noise.position_sigma_um
        } else {
            0.0
        };

        let records = probes
            .par_iter()
            .enumerate()
            .map(|(i, &probe)| {
                let exact = analytic[i];
                let sig_i = if noise.intensity_fraction > 0.0 {
                    let hi = self.evaluate(probe, 1.0 + noise.intensity_fraction, 0.0)?;
                    let lo = self.evaluate(probe, 1.0 - noise.intensity_fraction, 0.0)?;
                    0.5 * (hi - lo).abs()
                } else {
                    0.0
                };
                let sig_x = if pos_sigma > 0.0 {
                    let hi = self.evaluate(probe, 1.0, pos_sigma)?;
                    let lo = self.evaluate(probe, 1.0, -pos_sigma)?;
                    0.5 * (hi - lo).abs()
                } else {
                    0.0
                };
                let sigma_y = (sigma_fringe * sigma_fringe + sig_i * sig_i + sig_x * sig_x).sqrt();
                if noise.is_noiseless() {
                    return Ok(ScanRecord {
                        x: xs[i],
                        y: exact,
                        sigma_y,
                    });
                }

                let mut rng = point_rng(noise.seed, i);
                let offset = gaussian(&mut rng, pos_sigma);
                // A reference-free fringe at (almost) zero frequency never
                // completes a cycle; such points use the direct estimate.
                let direct =
                    self.fast || (f_ref == 0.0 && exact.abs() <= MIN_FRINGE_FRACTION * scale);
                let y = if direct {
                    let f = intensity_factor(&mut rng, noise.intensity_fraction);
                    let value = self.evaluate(probe, f, offset)?;
                    value
                        + gaussian(
                            &mut rng,
                            if noise.projection_noise {
                                sigma_fringe
                            } else {
                                0.0
                            },
                        )
                } else {
                    // Without a reference the fringe runs at the value itself,
                    // so size it per point.
                    let span = if f_ref == 0.0 {
                        FRINGE_PERIODS / exact.abs()
                    } else {
                        span
                    };
                    let mut fringe = Vec::with_capacity(FRINGE_POINTS);
                    for k in 0..FRINGE_POINTS {
                        let t = span * k as f64 / (FRINGE_POINTS - 1) as f64;
                        let f = intensity_factor(&mut rng, noise.intensity_fraction);
                        let value = self.evaluate(probe, f, offset)?;
                        let p = ramsey_probability(TAU * (f_ref + value), t, noise.contrast());
                        let (y, s) = readout(&mut rng, p, &noise);
                        fringe.push(ScanRecord {
                            x: t,
                            y,
                            sigma_y: s,
                        });
                    }
                    let fit = fit_frequency(&ScanDataset::new(ScanKind::Ramsey, fringe, None))
                        .map_err(|source| SimError::Extraction { index: i, source })?;
                    fit.param("freq_hz").expect("fit reports freq_hz") - f_ref
                };
                Ok(ScanRecord {
                    x: xs[i],
                    y,
                    sigma_y,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;

        if f_ref > 0.0 {
            extra.insert("fringe_reference_hz".to_string(), f_ref);
            extra.insert("fringe_span_s".to_string(), span);
        }
        Ok(ScanDataset::new(
            kind,
            records,
            Some(self.metadata(kind, beam_index, extra)),
        ))
    }

    fn check_finite(values: &[f64], what: &str) -> Result<(), SimError> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "{what} value {v} is not finite"
            )));
        }
        Ok(())
    }

    /// Shift (Hz) of beam `beam_index` at each power in mW.
    pub fn power_scan(&self, beam_index: usize, powers: &[f64]) -> Result<ScanDataset, SimError> {
        Self::check_finite(powers, "power")?;
        if let Some(p) = powers.iter().find(|p| **p < 0.0) {
            return Err(SimError::InvalidInput(format!("power {p} mW is negative")));
        }
        let beam = *self.config.beam(beam_index)?;
        let (theta, phi) = (
            self.config.hwp_angle.radians(),
            self.config.qwp_angle.radians(),
        );
        let probes: Vec<Probe> = powers
            .iter()
            .map(|&p| Probe::Shift {
                beam: BeamGeometry {
                    power_mw: p,
                    ..beam
                },
                theta,
                phi,
                x: None,
            })
            .collect();
        self.measure(
            ScanKind::Power,
            powers,
            &probes,
            2.0,
            false,
            Some(beam_index),
            BTreeMap::new(),
        )
    }

    /// Shift (Hz) of beam `beam_index` at each HWP angle; x is in degrees.
    pub fn hwp_scan(&self, beam_index: usize, angles: &[Angle]) -> Result<ScanDataset, SimError> {
        let xs: Vec<f64> = angles.iter().map(|a| a.degrees()).collect();
        Self::check_finite(&xs, "HWP angle")?;
        let beam = *self.config.beam(beam_index)?;
        let phi = self.config.qwp_angle.radians();
        let probes: Vec<Probe> = angles
            .iter()
            .map(|a| Probe::Shift {
                beam,
                theta: a.radians(),
                phi,
                x: None,
            })
            .collect();
        self.measure(
            ScanKind::Hwp,
            &xs,
            &probes,
            2.0,
            false,
            Some(beam_index),
            BTreeMap::new(),
        )
    }

    /// Shift (Hz) of beam `beam_index` with the ion at each position (μm).
    pub fn position_scan(
        &self,
        beam_index: usize,
        positions: &[f64],
    ) -> Result<ScanDataset, SimError> {
        Self::check_finite(positions, "position")?;
        let beam = *self.config.beam(beam_index)?;
        let (theta, phi) = (
            self.config.hwp_angle.radians(),
            self.config.qwp_angle.radians(),
        );
        let probes: Vec<Probe> = positions
            .iter()
            .map(|&x| Probe::Shift {
                beam,
                theta,
                phi,
                x: Some(x),
            })
            .collect();
        self.measure(
            ScanKind::Position,
            positions,
            &probes,
            2.0,
            true,
            Some(beam_index),
            BTreeMap::new(),
        )
    }

    /// Two-beam Rabi frequency (Hz) of beams 0 and 1 at each position.
    pub fn rabi_scan(&self, positions: &[f64], peak_hz: f64) -> Result<ScanDataset, SimError> {
        Self::check_finite(positions, "position")?;
        if !(peak_hz > 0.0 && peak_hz.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "Rabi peak must be positive, got {peak_hz}"
            )));
        }
        self.config.beam(1)?;
        let probes: Vec<Probe> = positions
            .iter()
            .map(|&x| Probe::Rabi { x, peak_hz })
            .collect();
        let extra = BTreeMap::from([("rabi_peak_hz".to_string(), peak_hz)]);
        self.measure(ScanKind::Rabi, positions, &probes, 0.0, true, None, extra)
    }
}

pub fn simulate_ramsey(
    config: &ExperimentConfig,
    beam_index: usize,
    delays: &[f64],
) -> Result<ScanDataset, SimError> {
    Simulator::new(config.clone())?.ramsey(beam_index, delays)
}

pub fn simulate_power_scan(
    config: &ExperimentConfig,
    beam_index: usize,
    powers: &[f64],
    fast: bool,
) -> Result<ScanDataset, SimError> {
    Simulator::new(config.clone())?
        .with_fast(fast)
        .power_scan(beam_index, powers)
}

pub fn simulate_hwp_scan(
    config: &ExperimentConfig,
    beam_index: usize,
    angles: &[Angle],
    fast: bool,
) -> Result<ScanDataset, SimError> {
    Simulator::new(config.clone())?
        .with_fast(fast)
        .hwp_scan(beam_index, angles)
}

pub fn simulate_position_scan(
    config: &ExperimentConfig,
    beam_index: usize,
    positions: &[f64],
    fast: bool,
) -> Result<ScanDataset, SimError> {
    Simulator::new(config.clone())?
        .with_fast(fast)
        .position_scan(beam_index, positions)
}

pub fn simulate_rabi_scan(
    config: &ExperimentConfig,
    positions: &[f64],
    peak_hz: f64,
    fast: bool,
) -> Result<ScanDataset, SimError> {
    Simulator::new(config.clone())?
        .with_fast(fast)
        .rabi_scan(positions, peak_hz)
}
