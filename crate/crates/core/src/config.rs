//! Ion constants, comb parameters and run configuration.
//!
//! Config files are JSON. Frequencies are given in Hz (`*_hz` keys) and
//! angles in degrees (`*_deg` keys); see [`ConfigDocument`] for the schema.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{BeamGeometry, NoiseModel};
use crate::units::{Angle, Frequency};

pub const DEFAULT_REP_RATE_HZ: f64 = 80e6;
pub const DEFAULT_PULSE_DURATION_S: f64 = 15e-12;
/// Comb-tooth window half-width. The envelope sum at 15 ps / 80 MHz needs
/// roughly 2500 teeth on each side before the tail drops below 1e-9.
pub const DEFAULT_ENVELOPE_TRUNCATION: u32 = 4000;
pub const DEFAULT_B0_GAUSS: f64 = 3.6;
pub const DEFAULT_PROJECTION_DEG: f64 = 45.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("invalid qubit state |F={f}, m_F={m}>")]
    InvalidState { f: u8, m: i8 },
}

fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        constraint: constraint.into(),
    }
}

/// One of the four ²S₁/₂ hyperfine/Zeeman states |F, m_F⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitState {
    f: u8,
    m: i8,
}

impl QubitState {
    /// |0,0⟩, the qubit |↓⟩.
    pub const DOWN: QubitState = QubitState { f: 0, m: 0 };
    /// |1,0⟩, the qubit |↑⟩.
    pub const UP: QubitState = QubitState { f: 1, m: 0 };
    pub const MINUS: QubitState = QubitState { f: 1, m: -1 };
    pub const PLUS: QubitState = QubitState { f: 1, m: 1 };

    pub const ALL: [QubitState; 4] = [Self::DOWN, Self::MINUS, Self::UP, Self::PLUS];

    pub fn new(f: u8, m: i8) -> Result<Self, ConfigError> {
        if f > 1 || m.unsigned_abs() > f {
            return Err(ConfigError::InvalidState { f, m });
        }
        Ok(QubitState { f, m })
    }

    pub fn f(self) -> u8 {
        self.f
    }

    pub fn m(self) -> i8 {
        self.m
    }

    /// Short label such as `1-1` or `00`, matching the coupling names.
    pub fn label(self) -> String {
        format!("{}{}", self.f, self.m)
    }
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{:+}>", self.f, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonSpecies {
    pub hyperfine_splitting: Frequency,
    /// Magnitude of the m_F = ±1 Zeeman shift.
    pub zeeman_shift: Frequency,
    pub fine_structure_splitting: Frequency,
    pub raman_detuning: Frequency,
    /// Single-photon resonant Rabi frequency g₀ at the reference peak
    /// intensity [`crate::engine::REFERENCE_INTENSITY_MW_PER_UM2`].
    pub single_photon_rabi: Frequency,
}

impl IonSpecies {
    /// Energy of `state` relative to |0,0⟩ in rad/s: E(1,m) = ω_HF + m·ω_Z.
    pub fn energy(&self, state: QubitState) -> f64 {
        if state.f == 0 {
            0.0
        } else {
            self.hyperfine_splitting.angular() + f64::from(state.m) * self.zeeman_shift.angular()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("ion.hyperfine_splitting_hz", self.hyperfine_splitting),
            ("ion.zeeman_shift_hz", self.zeeman_shift),
            (
                "ion.fine_structure_splitting_hz",
                self.fine_structure_splitting,
            ),
            ("ion.raman_detuning_hz", self.raman_detuning),
            ("ion.single_photon_rabi_hz", self.single_photon_rabi),
        ];
        for (key, value) in fields {
            if !(value.hz().is_finite() && value.hz() > 0.0) {
                return Err(invalid(key, "must be finite and > 0"));
            }
        }
        if self.raman_detuning >= self.fine_structure_splitting {
            return Err(invalid(
                "ion.raman_detuning_hz",
                "must be below fine_structure_splitting_hz",
            ));
        }
        if self.zeeman_shift >= self.hyperfine_splitting {
            return Err(invalid(
                "ion.zeeman_shift_hz",
                "must be below hyperfine_splitting_hz",
            ));
        }
        Ok(())
    }
}

/// Signed splitting ω_to − ω_from in rad/s.
pub fn level_splitting(ion: &IonSpecies, from: QubitState, to: QubitState) -> f64 {
    ion.energy(to) - ion.energy(from)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombSpec {
    pub rep_rate_hz: f64,
    pub pulse_duration_s: f64,
}

impl Default for CombSpec {
    fn default() -> Self {
        CombSpec {
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            pulse_duration_s: DEFAULT_PULSE_DURATION_S,
        }
    }
}

impl CombSpec {
    /// Tooth spacing 2πν_rep in rad/s.
    pub fn tooth_spacing(&self) -> f64 {
        std::f64::consts::TAU * self.rep_rate_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rep_rate_hz.is_finite() && self.rep_rate_hz > 0.0) {
            return Err(invalid("comb.rep_rate_hz", "must be finite and > 0"));
        }
        if !(self.pulse_duration_s.is_finite() && self.pulse_duration_s > 0.0) {
            return Err(invalid("comb.pulse_duration_s", "must be finite and > 0"));
        }
        if self.rep_rate_hz * self.pulse_duration_s >= 1.0 {
            return Err(invalid(
                "comb.pulse_duration_s",
                "pulses must be shorter than the repetition period",
            ));
        }
        Ok(())
    }
}

/// Magnetic-field direction: polar angle α from ẑ, azimuth β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGeometry {
    pub alpha: Angle,
    pub beta: Angle,
    /// Reported only; the shift formulas depend on direction alone.
    pub b0_gauss: f64,
}

impl Default for FieldGeometry {
    fn default() -> Self {
        FieldGeometry {
            alpha: Angle::from_degrees(0.0),
            beta: Angle::from_degrees(0.0),
            b0_gauss: DEFAULT_B0_GAUSS,
        }
    }
}

impl FieldGeometry {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = self.alpha.degrees();
        if !(0.0..=180.0).contains(&a) {
            return Err(invalid("field.alpha_deg", "must lie in [0, 180]"));
        }
        let b = self.beta.degrees();
        if !(0.0..360.0).contains(&b) {
            return Err(invalid("field.beta_deg", "must lie in [0, 360)"));
        }
        if !self.b0_gauss.is_finite() {
            return Err(invalid("field.b0_gauss", "must be finite"));
        }
        Ok(())
    }
}

/// Everything a run needs. Fields are public so callers can apply
/// overrides; call [`ExperimentConfig::validate`] afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ion: IonSpecies,
    pub comb: CombSpec,
    pub field: FieldGeometry,
    pub qwp_angle: Angle,
    pub hwp_angle: Angle,
    pub beams: Vec<BeamGeometry>,
    pub noise: NoiseModel,
    pub envelope_truncation: u32,
    pub residual_two_photon_hz_per_mw: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ion.validate()?;
        self.comb.validate()?;
        self.field.validate()?;
        for (key, angle) in [
            ("waveplates.qwp_deg", self.qwp_angle),
            ("waveplates.hwp_deg", self.hwp_angle),
        ] {
            if !angle.degrees().is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.beams.is_empty() {
            return Err(invalid("beams", "at least one beam is required"));
        }
        for (i, beam) in self.beams.iter().enumerate() {
            beam.validate().map_err(|(field, constraint)| {
                invalid(format!("beams[{i}].{field}"), constraint)
            })?;
        }
        self.noise
            .validate()
            .map_err(|(field, constraint)| invalid(format!("noise.{field}"), constraint))?;
        if self.envelope_truncation < 1 {
            return Err(invalid("engine.envelope_truncation", "must be >= 1"));
        }
        if !self.residual_two_photon_hz_per_mw.is_finite() {
            return Err(invalid(
                "engine.residual_two_photon_hz_per_mw",
                "must be finite",
            ));
        }
        Ok(())
    }

    pub fn beam(&self, index: usize) -> Result<&BeamGeometry, ConfigError> {
        self.beams.get(index).ok_or_else(|| {
            invalid(
                format!("beams[{index}]"),
                format!("only {} beam(s) configured", self.beams.len()),
            )
        })
    }

    /// The fully populated document for this config (defaults included).
    pub fn to_document(&self) -> ConfigDocument {
        ConfigDocument {
            ion: Some(IonSection {
                hyperfine_splitting_hz: Some(self.ion.hyperfine_splitting.hz()),
                zeeman_shift_hz: Some(self.ion.zeeman_shift.hz()),
                fine_structure_splitting_hz: Some(self.ion.fine_structure_splitting.hz()),
                raman_detuning_hz: Some(self.ion.raman_detuning.hz()),
                single_photon_rabi_hz: Some(self.ion.single_photon_rabi.hz()),
            }),
            comb: Some(CombSection {
                rep_rate_hz: Some(self.comb.rep_rate_hz),
                pulse_duration_s: Some(self.comb.pulse_duration_s),
            }),
            field: Some(FieldSection {
                alpha_deg: Some(self.field.alpha.degrees()),
                beta_deg: Some(self.field.beta.degrees()),
                b0_gauss: Some(self.field.b0_gauss),
            }),
            waveplates: Some(WaveplateSection {
                qwp_deg: Some(self.qwp_angle.degrees()),
                hwp_deg: Some(self.hwp_angle.degrees()),
            }),
            beams: Some(
                self.beams
                    .iter()
                    .map(|b| BeamSection {
                        waist_um: Some(b.waist_um),
                        power_mw: Some(b.power_mw),
                        center_um: Some(b.center_um),
                        projection_deg: Some(b.projection.degrees()),
                    })
                    .collect(),
            ),
            noise: Some(NoiseSection {
                spam_error: Some(self.noise.spam_error),
                intensity_fraction: Some(self.noise.intensity_fraction),
                shots: Some(self.noise.shots),
                position_sigma_um: Some(self.noise.position_sigma_um),
                seed: Some(self.noise.seed),
                projection_noise: Some(self.noise.projection_noise),
            }),
            engine: Some(EngineSection {
                envelope_truncation: Some(self.envelope_truncation),
                residual_two_photon_hz_per_mw: Some(self.residual_two_photon_hz_per_mw),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("config document serializes")
    }
}

/// On-disk schema. Every key is optional at the parse level so that a
/// missing key produces an error naming it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub ion: Option<IonSection>,
    pub comb: Option<CombSection>,
    pub field: Option<FieldSection>,
    pub waveplates: Option<WaveplateSection>,
    pub beams: Option<Vec<BeamSection>>,
    pub noise: Option<NoiseSection>,
    pub engine: Option<EngineSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonSection {
    pub hyperfine_splitting_hz: Option<f64>,
    pub zeeman_shift_hz: Option<f64>,
    pub fine_structure_splitting_hz: Option<f64>,
    pub raman_detuning_hz: Option<f64>,
    pub single_photon_rabi_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSection {
    pub rep_rate_hz: Option<f64>,
    pub pulse_duration_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub alpha_deg: Option<f64>,
    pub beta_deg: Option<f64>,
    pub b0_gauss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveplateSection {
    pub qwp_deg: Option<f64>,
    pub hwp_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub waist_um: Option<f64>,
    pub power_mw: Option<f64>,
    pub center_um: Option<f64>,
    pub projection_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub spam_error: Option<f64>,
    pub intensity_fraction: Option<f64>,
    pub shots: Option<u32>,
    pub position_sigma_um: Option<f64>,
    pub seed: Option<u64>,
    pub projection_noise: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub envelope_truncation: Option<u32>,
    pub residual_two_photon_hz_per_mw: Option<f64>,
}

fn required<T: Copy>(value: Option<T>, key: &'static str) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::Missing(key))
}

impl ConfigDocument {
    pub fn into_config(self) -> Result<ExperimentConfig, ConfigError> {
        let ion = self.ion.ok_or(ConfigError::Missing("ion"))?;
        let ion = IonSpecies {
            hyperfine_splitting: Frequency::from_hz(required(
                ion.hyperfine_splitting_hz,
                "ion.hyperfine_splitting_hz",
            )?),
            zeeman_shift: Frequency::from_hz(required(ion.zeeman_shift_hz, "ion.zeeman_shift_hz")?),
            fine_structure_splitting: Frequency::from_hz(required(
                ion.fine_structure_splitting_hz,
                "ion.fine_structure_splitting_hz",
            )?),
            raman_detuning: Frequency::from_hz(required(
                ion.raman_detuning_hz,
                "ion.raman_detuning_hz",
            )?),
            single_photon_rabi: Frequency::from_hz(required(
                ion.single_photon_rabi_hz,
                "ion.single_photon_rabi_hz",
            )?),
        };

        // An absent comb section means the stock 80 MHz / 15 ps laser; a
        // present one must be complete.
        let comb = match self.comb {
            None => CombSpec::default(),
            Some(c) => CombSpec {
                rep_rate_hz: required(c.rep_rate_hz, "comb.rep_rate_hz")?,
                pulse_duration_s: required(c.pulse_duration_s, "comb.pulse_duration_s")?,
            },
        };

        let field_defaults = FieldGeometry::default();
        let field = self.field.unwrap_or_default();
        let field = FieldGeometry {
            alpha: Angle::from_degrees(field.alpha_deg.unwrap_or(field_defaults.alpha.degrees())),
            beta: Angle::from_degrees(field.beta_deg.unwrap_or(field_defaults.beta.degrees())),
            b0_gauss: field.b0_gauss.unwrap_or(field_defaults.b0_gauss),
        };

        let plates = self.waveplates.unwrap_or_default();

        let beams = self
            .beams
            .ok_or(ConfigError::Missing("beams"))?
            .into_iter()
            .map(|b| {
                Ok(BeamGeometry {
                    waist_um: required(b.waist_um, "beams[].waist_um")?,
                    power_mw: required(b.power_mw, "beams[].power_mw")?,
                    center_um: b.center_um.unwrap_or(0.0),
                    projection: Angle::from_degrees(
                        b.projection_deg.unwrap_or(DEFAULT_PROJECTION_DEG),
                    ),
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;

        let noise_defaults = NoiseModel::default();
        let noise = self.noise.unwrap_or_default();
        let noise = NoiseModel {
            spam_error: noise.spam_error.unwrap_or(noise_defaults.spam_error),
            intensity_fraction: noise
                .intensity_fraction
                .unwrap_or(noise_defaults.intensity_fraction),
            shots: noise.shots.unwrap_or(noise_defaults.shots),
            position_sigma_um: noise
                .position_sigma_um
                .unwrap_or(noise_defaults.position_sigma_um),
            seed: noise.seed.unwrap_or(noise_defaults.seed),
            projection_noise: noise
                .projection_noise
                .unwrap_or(noise_defaults.projection_noise),
        };

        let engine = self.engine.unwrap_or_default();
        let config = ExperimentConfig {
            ion,
            comb,
            field,
            qwp_angle: Angle::from_degrees(plates.qwp_deg.unwrap_or(0.0)),
            hwp_angle: Angle::from_degrees(plates.hwp_deg.unwrap_or(0.0)),
            beams,
            noise,
            envelope_truncation: engine
                .envelope_truncation
                .unwrap_or(DEFAULT_ENVELOPE_TRUNCATION),
            residual_two_photon_hz_per_mw: engine.residual_two_photon_hz_per_mw.unwrap_or(0.0),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parse and validate a JSON config document.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let doc: ConfigDocument = serde_json::from_str(text)?;
    doc.into_config()
}
