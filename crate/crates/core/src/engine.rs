//! Four-photon differential Stark shift from a mode-locked Raman beam.
//!
//! Pairs of comb teeth inside one beam are separated by multiples of the
//! repetition rate; those nearly resonant with a ground-manifold splitting
//! drive virtual two-photon transitions and shift each level by
//!
//! ```text
//! E_n = Σ_{a≠n} |Ω_{n,a}|²/4 · C_{n,a}/δ_{n,a}
//! C_{n,a} = Σ_k sech²((j+k)πν_rep τ) / (1 − k·2πν_rep/δ_{n,a})
//! ```
//!
//! where δ_{n,a} = (ω_a − ω_n) − 2πjν_rep is the detuning from the nearest
//! beatnote. The qubit sees δω⁽⁴⁾ = E_{|1,0⟩} − E_{|0,0⟩}.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    level_splitting, CombSpec, ConfigError, ExperimentConfig, IonSpecies, QubitState,
};
use crate::polarization::{polarization_closed_form, SphericalPolarization};

/// Peak intensity at which the configured g₀ applies.
pub const REFERENCE_INTENSITY_MW_PER_UM2: f64 = 1.0;

/// Minimum |1 − k·2πν_rep/δ| tolerated in the envelope sum.
pub const RESONANCE_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(
        "Raman detuning {delta:e} rad/s must lie strictly between 0 and ω_F = {omega_f:e} rad/s"
    )]
    Domain { delta: f64, omega_f: f64 },
    #[error("comb tooth pair k = {k} is resonant with splitting {splitting:e} rad/s (denominator {denominator:e})")]
    Resonance {
        splitting: f64,
        k: i64,
        denominator: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Ω₀ = (g₀²/6)(1/Δ + 1/(ω_F − Δ)), all in rad/s.
pub fn base_rabi_rate(g0: f64, delta: f64, omega_f: f64) -> Result<f64, EngineError> {
    if !(delta > 0.0 && delta < omega_f) {
        return Err(EngineError::Domain { delta, omega_f });
    }
    Ok(g0 * g0 / 6.0 * (1.0 / delta + 1.0 / (omega_f - delta)))
}

/// Ω₀ for a beam of the given peak intensity. g₀² scales with intensity.
pub fn base_rabi_rate_at(ion: &IonSpecies, intensity_mw_per_um2: f64) -> Result<f64, EngineError> {
    let reference = base_rabi_rate(
        ion.single_photon_rabi.angular(),
        ion.raman_detuning.angular(),
        ion.fine_structure_splitting.angular(),
    )?;
    Ok(reference * intensity_mw_per_um2 / REFERENCE_INTENSITY_MW_PER_UM2)
}

/// Nearest comb beatnote to a splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatnoteResolution {
    pub j: i64,
    /// splitting − 2πjν_rep in rad/s.
    pub detuning: f64,
}

/// Pick j minimizing |splitting − 2πjν_rep|; exact ties go to the smaller j.
pub fn nearest_beatnote(splitting: f64, rep_rate_hz: f64) -> BeatnoteResolution {
    let spacing = TAU * rep_rate_hz;
    let j = (splitting / spacing - 0.5).ceil() as i64;
    BeatnoteResolution {
        j,
        detuning: splitting - j as f64 * spacing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFactor {
    pub value: f64,
    pub terms_used: usize,
}

fn sech_squared(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Comb-envelope factor C for one splitting, summed over k ∈ [−K, K].
pub fn envelope_factor(
    splitting: f64,
    comb: &CombSpec,
    truncation: u32,
) -> Result<EnvelopeFactor, EngineError> {
    let beat = nearest_beatnote(splitting, comb.rep_rate_hz);
    envelope_for_beatnote(splitting, beat, comb, truncation)
}

fn envelope_for_beatnote(
    splitting: f64,
    beat: BeatnoteResolution,
    comb: &CombSpec,
    truncation: u32,
) -> Result<EnvelopeFactor, EngineError> {
    let spacing = comb.tooth_spacing();
    let delta = beat.detuning;
    if delta == 0.0 || delta.abs() < RESONANCE_GUARD * spacing {
        return Err(EngineError::Resonance {
            splitting,
            k: 0,
            denominator: 0.0,
        });
    }
    let x = std::f64::consts::PI * comb.rep_rate_hz * comb.pulse_duration_s;
    let k_max = i64::from(truncation);
    let mut value = 0.0;
    for k in -k_max..=k_max {
        let denominator = 1.0 - k as f64 * spacing / delta;
        if denominator.abs() < RESONANCE_GUARD {
            return Err(EngineError::Resonance {
                splitting,
                k,
                denominator,
            });
        }
        value += sech_squared((beat.j + k) as f64 * x) / denominator;
    }
    Ok(EnvelopeFactor {
        value,
        terms_used: (2 * k_max + 1) as usize,
    })
}

/// The five two-photon Rabi frequencies inside ²S₁/₂ (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RabiCouplings {
    pub down_up: Complex64,
    pub down_minus: Complex64,
    pub down_plus: Complex64,
    pub up_minus: Complex64,
    pub up_plus: Complex64,
}

impl RabiCouplings {
    /// Coupling between two states, in either order. |1,−1⟩↔|1,+1⟩ has none.
    pub fn between(&self, a: QubitState, b: QubitState) -> Complex64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (lo, hi) {
            (QubitState::DOWN, QubitState::UP) => self.down_up,
            (QubitState::DOWN, QubitState::MINUS) => self.down_minus,
            (QubitState::DOWN, QubitState::PLUS) => self.down_plus,
            (QubitState::MINUS, QubitState::UP) => self.up_minus,
            (QubitState::UP, QubitState::PLUS) => self.up_plus,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn as_array(&self) -> [Complex64; 5] {
        [
            self.down_up,
            self.down_minus,
            self.down_plus,
            self.up_minus,
            self.up_plus,
        ]
    }
}

/// Two-photon couplings for a tooth pair with polarizations `e0`, `e1`.
pub fn rabi_couplings(
    e0: &SphericalPolarization,
    e1: &SphericalPolarization,
    omega0: f64,
) -> RabiCouplings {
    let minus_pi = e0.minus * e1.pi.conj() + e0.pi * e1.plus.conj();
    let plus_pi = e0.plus * e1.pi.conj() + e0.pi * e1.minus.conj();
    RabiCouplings {
        down_up: (e0.minus * e1.minus.conj() - e0.plus * e1.plus.conj()) * omega0,
        down_minus: -minus_pi * omega0,
        down_plus: plus_pi * omega0,
        up_minus: minus_pi * omega0,
        up_plus: plus_pi * omega0,
    }
}

/// Beatnote and envelope for one ordered state pair (n → a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairResponse {
    pub from: QubitState,
    pub to: QubitState,
    pub splitting: f64,
    pub beatnote: BeatnoteResolution,
    pub envelope: EnvelopeFactor,
}

impl PairResponse {
    /// C/δ in s/rad.
    pub fn response(&self) -> f64 {
        self.envelope.value / self.beatnote.detuning
    }
}

fn coupled_pairs() -> impl Iterator<Item = (QubitState, QubitState)> {
    QubitState::ALL.into_iter().flat_map(|n| {
        QubitState::ALL
            .into_iter()
            .filter(move |&a| {
                a != n && !(n.f() == 1 && a.f() == 1 && n.m() == -a.m() && n.m() != 0)
            })
            .map(move |a| (n, a))
    })
}

/// Precomputed envelope responses for one ion and comb. Evaluating a shift
/// afterwards costs a handful of complex multiplies.
#[derive(Debug, Clone)]
pub struct ShiftEngine {
    pub ion: IonSpecies,
    pub comb: CombSpec,
    pub truncation: u32,
    pairs: Vec<PairResponse>,
}

impl ShiftEngine {
    pub fn new(ion: &IonSpecies, comb: &CombSpec, truncation: u32) -> Result<Self, EngineError> {
        let pairs = coupled_pairs()
            .map(|(from, to)| {
                let splitting = level_splitting(ion, from, to);
                let beatnote = nearest_beatnote(splitting, comb.rep_rate_hz);
                let envelope = envelope_for_beatnote(splitting, beatnote, comb, truncation)?;
                Ok(PairResponse {
                    from,
                    to,
                    splitting,
                    beatnote,
                    envelope,
                })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        Ok(ShiftEngine {
            ion: *ion,
            comb: *comb,
            truncation,
            pairs,
        })
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self, EngineError> {
        Self::new(&config.ion, &config.comb, config.envelope_truncation)
    }

    pub fn pairs(&self) -> &[PairResponse] {
        &self.pairs
    }

    pub fn pair(&self, from: QubitState, to: QubitState) -> Option<&PairResponse> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }

    /// Fourth-order shift E_n = −Σ_a |Ω_na|²·C/(4δ) of `state` in rad/s,
    /// with δ = splitting − beatnote, so a beatnote below the splitting
    /// pushes the levels apart.
    pub fn level_shift(&self, state: QubitState, couplings: &RabiCouplings) -> f64 {
        self.pairs
            .iter()
            .filter(|p| p.from == state)
            .map(|p| -couplings.between(p.from, p.to).norm_sqr() / 4.0 * p.response())
            .sum()
    }

    /// δω⁽⁴⁾ = E_{|1,0⟩} − E_{|0,0⟩} in rad/s.
    pub fn differential(&self, couplings: &RabiCouplings) -> f64 {
        self.level_shift(QubitState::UP, couplings) - self.level_shift(QubitState::DOWN, couplings)
    }

    /// Single-beam differential shift: both teeth of each pair share `pol`.
    pub fn single_beam_shift(&self, pol: &SphericalPolarization, omega0: f64) -> f64 {
        self.differential(&rabi_couplings(pol, pol, omega0))
    }

    /// Single-beam shift for field angles (α, β) and waveplates (θ, φ).
    pub fn shift_for_angles(
        &self,
        alpha: f64,
        beta: f64,
        theta: f64,
        phi: f64,
        omega0: f64,
    ) -> f64 {
        self.single_beam_shift(&polarization_closed_form(alpha, beta, theta, phi), omega0)
    }

    /// Σ C/δ over |0,0⟩ → |1,∓1⟩, the factor multiplying sin²(4θ) for
    /// linear light in a vertical field.
    pub fn linear_response(&self) -> f64 {
        [QubitState::MINUS, QubitState::PLUS]
            .into_iter()
            .filter_map(|a| self.pair(QubitState::DOWN, a))
            .map(PairResponse::response)
            .sum()
    }

    /// Closed form for linear light (φ = 0) in a vertical field (α = 0):
    /// δω⁽⁴⁾(θ) = (Ω₀²/8) sin²(4θ) Σ C/δ.
    pub fn linear_pol_shift(&self, theta: f64, omega0: f64) -> f64 {
        let s = (4.0 * theta).sin();
        omega0 * omega0 / 8.0 * s * s * self.linear_response()
    }
}

/// E_n for `state` with the couplings given, computed from scratch.
pub fn fourth_order_shift(
    state: QubitState,
    couplings: &RabiCouplings,
    ion: &IonSpecies,
    comb: &CombSpec,
    truncation: u32,
) -> Result<f64, EngineError> {
    Ok(ShiftEngine::new(ion, comb, truncation)?.level_shift(state, couplings))
}

/// Closed-form shift for linear polarization at HWP angle `theta` in a
/// vertical field; see [`ShiftEngine::linear_pol_shift`].
pub fn linear_pol_shift(
    theta: f64,
    omega0: f64,
    ion: &IonSpecies,
    comb: &CombSpec,
    truncation: u32,
) -> Result<f64, EngineError> {
    Ok(ShiftEngine::new(ion, comb, truncation)?.linear_pol_shift(theta, omega0))
}

/// One term of a level shift, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct PairTerm {
    pub from: String,
    pub to: String,
    pub coupling_abs_rad_s: f64,
    pub beatnote_index: i64,
    pub detuning_rad_s: f64,
    pub detuning_hz: f64,
    pub envelope: f64,
    pub contribution_rad_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftBreakdown {
    pub omega0_rad_s: f64,
    pub four_photon_rad_s: f64,
    pub residual_rad_s: f64,
    pub delta_omega_rad_s: f64,
    pub delta_f_hz: f64,
    pub components: Vec<PairTerm>,
}

/// Single-beam shift of beam `beam_index` at its peak intensity, using the
/// configured field and waveplate angles. Includes the residual two-photon
/// term `residual_two_photon_hz_per_mw · power`.
pub fn differential_shift(
    config: &ExperimentConfig,
    beam_index: usize,
) -> Result<ShiftBreakdown, EngineError> {
    let engine = ShiftEngine::from_config(config)?;
    differential_shift_with(&engine, config, beam_index)
}

pub fn differential_shift_with(
    engine: &ShiftEngine,
    config: &ExperimentConfig,
    beam_index: usize,
) -> Result<ShiftBreakdown, EngineError> {
    let beam = config.beam(beam_index)?;
    let omega0 = base_rabi_rate_at(&config.ion, beam.peak_intensity())?;
    let pol = polarization_closed_form(
        config.field.alpha.radians(),
        config.field.beta.radians(),
        config.hwp_angle.radians(),
        config.qwp_angle.radians(),
    );
    let couplings = rabi_couplings(&pol, &pol, omega0);
    let four_photon = engine.differential(&couplings);
    let residual = TAU * config.residual_two_photon_hz_per_mw * beam.power_mw;
    let components = engine
        .pairs()
        .iter()
        .filter(|p| p.from == QubitState::DOWN || p.from == QubitState::UP)
        .map(|p| {
            let coupling = couplings.between(p.from, p.to);
            PairTerm {
                from: p.from.label(),
                to: p.to.label(),
                coupling_abs_rad_s: coupling.norm(),
                beatnote_index: p.beatnote.j,
                detuning_rad_s: p.beatnote.detuning,
                detuning_hz: p.beatnote.detuning / TAU,
                envelope: p.envelope.value,
                contribution_rad_s: -coupling.norm_sqr() / 4.0 * p.response(),
            }
        })
        .collect();
    let total = four_photon + residual;
    Ok(ShiftBreakdown {
        omega0_rad_s: omega0,
        four_photon_rad_s: four_photon,
        residual_rad_s: residual,
        delta_omega_rad_s: total,
        delta_f_hz: total / TAU,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Frequency;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ion() -> IonSpecies {
        IonSpecies {
            hyperfine_splitting: Frequency::from_hz(12.642812e9),
            zeeman_shift: Frequency::from_hz(5e6),
            fine_structure_splitting: Frequency::from_hz(99.8e12),
            raman_detuning: Frequency::from_hz(33.2e12),
            single_photon_rabi: Frequency::from_hz(3e10),
        }
    }

    fn engine() -> ShiftEngine {
        ShiftEngine::new(&ion(), &CombSpec::default(), 4000).unwrap()
    }

    /// Brute-force scan for the nearest beatnote; ties keep the first hit,
    /// which is the smaller j.
    fn scan_beatnote(
        splitting: f64,
        rep_rate_hz: f64,
        range: std::ops::RangeInclusive<i64>,
    ) -> (i64, f64) {
        let mut best = (0, f64::INFINITY);
        for j in range {
            let d = splitting - j as f64 * TAU * rep_rate_hz;
            if d.abs() < best.1.abs() {
                best = (j, d);
            }
        }
        best
    }

    #[test]
    fn base_rate_at_third_and_half() {
        let g0 = 2.0e9;
        let wf = 6.0e14;
        let third = base_rabi_rate(g0, wf / 3.0, wf).unwrap();
        assert!((third - 3.0 * g0 * g0 / (4.0 * wf)).abs() / third < 1e-14);
        let half = base_rabi_rate(g0, wf / 2.0, wf).unwrap();
        assert!((half - 2.0 * g0 * g0 / (3.0 * wf)).abs() / half < 1e-14);
        let doubled = base_rabi_rate(2.0 * g0, wf / 3.0, wf).unwrap();
        assert!((doubled / third - 4.0).abs() < 1e-14);
    }

    #[test]
    fn base_rate_poles_are_rejected() {
        assert!(base_rabi_rate(1.0, 0.0, 10.0).is_err());
        assert!(base_rabi_rate(1.0, 10.0, 10.0).is_err());
        assert!(base_rabi_rate(1.0, -1.0, 10.0).is_err());
    }

    #[test]
    fn hyperfine_beatnote() {
        let s = TAU * 12.642812e9;
        let b = nearest_beatnote(s, 80e6);
        let (j, d) = scan_beatnote(s, 80e6, 0..=200);
        assert_eq!(b.j, 158);
        assert_eq!((b.j, b.detuning), (j, d));
        assert!((b.detuning - TAU * 2.812e6).abs() < 1e-6 * TAU * 2.812e6);
    }

    #[test]
    fn zeeman_beatnote() {
        let b = nearest_beatnote(TAU * 5e6, 80e6);
        assert_eq!(b.j, 0);
        assert_eq!(b.detuning, TAU * 5e6);
    }

    #[test]
    fn tie_goes_to_smaller_index() {
        let b = nearest_beatnote(TAU * 40e6, 80e6);
        assert_eq!(b.j, 0);
        assert_eq!(b.detuning, TAU * 40e6);
        let b = nearest_beatnote(-TAU * 40e6, 80e6);
        assert_eq!(b.j, -1);
        assert!(b.detuning > 0.0);
    }

    proptest! {
        #[test]
        fn beatnote_matches_integer_scan(f_hz in -20e9..20e9f64) {
            let s = TAU * f_hz;
            let b = nearest_beatnote(s, 80e6);
            let (j, d) = scan_beatnote(s, 80e6, -300..=300);
            prop_assert!(b.detuning.abs() <= PI * 80e6 * (1.0 + 1e-12));
            // Same minimum distance; index equal except at exact ties.
            prop_assert!((b.detuning.abs() - d.abs()).abs() < 1e-3);
            if (b.detuning.abs() - d.abs()).abs() == 0.0 { prop_assert_eq!(b.j, j); }
        }
    }

    #[test]
    fn leading_envelope_term_at_hyperfine_index() {
        let x = PI * 80e6 * 15e-12;
        let lead = sech_squared(158.0 * x);
        // 1/cosh²(0.595637...) evaluated independently.
        let arg: f64 = 158.0 * PI * 1.2e-3;
        let expected = (2.0 / (arg.exp() + (-arg).exp())).powi(2);
        assert!((lead - expected).abs() < 1e-15);
        assert!((lead - 0.714904).abs() < 1e-6);
    }

    #[test]
    fn short_pulse_limit_with_zero_index() {
        // With τ → 0 every sech² is 1, so C = 1 + Σ_{k≥1} 2/(1 − k²r²).
        let comb = CombSpec {
            rep_rate_hz: 80e6,
            pulse_duration_s: 1e-30,
        };
        let split = TAU * 5e6;
        let r = TAU * 80e6 / split;
        let k_max = 50u32;
        let c = envelope_factor(split, &comb, k_max).unwrap();
        let expected = 1.0
            + (1..=k_max)
                .map(|k| 2.0 / (1.0 - (k as f64 * r).powi(2)))
                .sum::<f64>();
        assert!((c.value - expected).abs() < 1e-13);
        assert_eq!(c.terms_used, 101);
    }

    #[test]
    fn envelope_converges_by_four_thousand_teeth() {
        let comb = CombSpec::default();
        let ion = ion();
        for split in [
            ion.hyperfine_splitting.angular(),
            ion.zeeman_shift.angular(),
        ] {
            let a = envelope_factor(split, &comb, 4000).unwrap().value;
            let b = envelope_factor(split, &comb, 8000).unwrap().value;
            assert!(((a - b) / b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn envelope_at_one_thousand_teeth_is_not_converged_for_hyperfine() {
        // The sech² envelope is ~265 teeth wide but centered 158 teeth off,
        // so the ±1000 window still misses ~3e-5 of the hyperfine sum.
        let comb = CombSpec::default();
        let split = ion().hyperfine_splitting.angular();
        let a = envelope_factor(split, &comb, 1000).unwrap().value;
        let b = envelope_factor(split, &comb, 2000).unwrap().value;
        let rel = ((a - b) / b).abs();
        assert!(rel > 1e-5 && rel < 1e-4, "{rel}");
    }

    #[test]
    fn envelope_is_even_in_splitting() {
        let comb = CombSpec::default();
        for f in [5e6, 12.642812e9, 12.637812e9] {
            let p = envelope_factor(TAU * f, &comb, 3000).unwrap().value;
            let m = envelope_factor(-TAU * f, &comb, 3000).unwrap().value;
            assert!((p - m).abs() < 1e-13 * p.abs());
        }
    }

    #[test]
    fn exact_resonance_is_rejected() {
        let err = envelope_factor(TAU * 160e6, &CombSpec::default(), 100).unwrap_err();
        assert!(matches!(err, EngineError::Resonance { .. }));
    }

    #[test]
    fn lin_perp_lin_has_no_clock_coupling() {
        let p = polarization_closed_form(0.0, 0.0, 0.0, 0.0);
        let c = rabi_couplings(&p, &p, 1.0);
        assert!(c.down_up.norm() < 1e-15);
        // ε_π = 0 kills every Δm = ±1 term.
        for z in [c.down_minus, c.down_plus, c.up_minus, c.up_plus] {
            assert!(z.norm() < 1e-15);
        }
        let e = engine();
        assert_eq!(e.single_beam_shift(&p, 1e6), 0.0);
    }

    #[test]
    fn eighth_turn_couplings_follow_linear_decomposition() {
        for theta in [PI / 8.0, 0.3, 1.0] {
            let p = polarization_closed_form(0.0, 0.0, theta, 0.0);
            let c = rabi_couplings(&p, &p, 1.0);
            let expected = (4.0 * theta).sin().abs() / 2f64.sqrt();
            assert!((c.down_minus.norm() - expected).abs() < 1e-14);
            assert!((c.down_plus.norm() - expected).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn couplings_are_bounded(a in 0.0..PI, b in 0.0..TAU, t in -PI..PI, f in -PI..PI, omega0 in 1.0..1e7f64) {
            let p = polarization_closed_form(a, b, t, f);
            let c = rabi_couplings(&p, &p, omega0);
            for z in c.as_array() {
                prop_assert!(z.norm() <= 2.0 * omega0 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn zero_couplings_give_zero_shift() {
        let e = engine();
        let c = RabiCouplings::default();
        for s in QubitState::ALL {
            assert_eq!(e.level_shift(s, &c), 0.0);
        }
    }

    #[test]
    fn general_shift_matches_closed_form() {
        let e = engine();
        let omega0 = TAU * 600e3;
        for k in 0..50 {
            let theta = 0.013 + k as f64 * PI / 50.0;
            let general = e.shift_for_angles(0.0, 0.0, theta, 0.0, omega0);
            let closed = e.linear_pol_shift(theta, omega0);
            assert!(
                (general - closed).abs() <= 1e-10 * closed.abs(),
                "{theta}: {general} vs {closed}"
            );
        }
    }

    #[test]
    fn free_functions_agree_with_engine() {
        let ion = ion();
        let comb = CombSpec::default();
        let p = polarization_closed_form(0.2, 0.4, 0.3, 0.1);
        let c = rabi_couplings(&p, &p, 1e6);
        let e = ShiftEngine::new(&ion, &comb, 500).unwrap();
        let direct = fourth_order_shift(QubitState::UP, &c, &ion, &comb, 500).unwrap();
        assert_eq!(direct, e.level_shift(QubitState::UP, &c));
        let lin = linear_pol_shift(0.3, 1e6, &ion, &comb, 500).unwrap();
        assert_eq!(lin, e.linear_pol_shift(0.3, 1e6));
    }

    #[test]
    fn shift_vanishes_on_linear_zero_set_and_peaks_at_eighth_turn() {
        let e = engine();
        let omega0 = TAU * 600e3;
        let peak = e.shift_for_angles(0.0, 0.0, PI / 8.0, 0.0, omega0);
        // Σ C/δ is dominated by the |1,−1⟩ pair, whose beatnote lies above it.
        assert!(peak < 0.0 && e.linear_response() < 0.0);
        for theta in [0.0, PI / 4.0, PI / 2.0] {
            assert!(e.shift_for_angles(0.0, 0.0, theta, 0.0, omega0).abs() <= 1e-12 * peak.abs());
        }
        for k in 0..200 {
            let theta = k as f64 * PI / 200.0;
            assert!(
                e.shift_for_angles(0.0, 0.0, theta, 0.0, omega0).abs()
                    <= peak.abs() * (1.0 + 1e-12)
            );
        }
    }

    #[test]
    fn shift_scales_quadratically_with_base_rate() {
        let e = engine();
        let base = e.shift_for_angles(0.17, 0.4, 0.3, 0.05, 1e6);
        for s in [0.5, 2.0, 3.7] {
            let scaled = e.shift_for_angles(0.17, 0.4, 0.3, 0.05, s * 1e6);
            assert!((scaled / base - s * s).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_has_quarter_turn_period_in_vertical_field() {
        let e = engine();
        let peak = e.shift_for_angles(0.0, 0.0, PI / 8.0, 0.0, 1e6).abs();
        for k in 0..20 {
            let theta = 0.05 * k as f64;
            let a = e.shift_for_angles(0.0, 0.0, theta, 0.0, 1e6);
            let b = e.shift_for_angles(0.0, 0.0, theta + PI / 2.0, 0.0, 1e6);
            assert!((a - b).abs() <= 1e-12 * peak);
        }
    }
}
