//! Built-in consistency checks, run by `ionprobe selftest`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{load_config, CombSpec, IonSpecies, QubitState};
use crate::dataset::{ScanDataset, ScanKind, ScanRecord};
use crate::engine::{envelope_factor, nearest_beatnote, ShiftEngine};
use crate::fit::{fit_frequency, fit_power_law, fit_rabi_profile, sensitivity_analysis};
use crate::polarization::{
    embed_lab, hwp_matrix, ion_frame_basis, max_deviation_up_to_phase, polarization_closed_form,
    polarization_pipeline, qwp_matrix,
};
use crate::sim::{rabi_profile, BeamGeometry};
use crate::units::{Angle, Frequency};

const HYPERFINE_HZ: f64 = 12.642812e9;
const ZEEMAN_HZ: f64 = 5e6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Shift the hyperfine constant used by the checks by 1 MHz, so the
    /// beatnote check must fail. Exists to prove the suite can fail.
    pub corrupt_constant: bool,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<4} {:<width$}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{} checks, {} failed\n",
            self.checks.len(),
            failed
        ));
        out
    }
}

fn reference_ion(options: SelftestOptions) -> IonSpecies {
    let hf = if options.corrupt_constant {
        HYPERFINE_HZ + 1e6
    } else {
        HYPERFINE_HZ
    };
    IonSpecies {
        hyperfine_splitting: Frequency::from_hz(hf),
        zeeman_shift: Frequency::from_hz(ZEEMAN_HZ),
        fine_structure_splitting: Frequency::from_hz(99.8e12),
        raman_detuning: Frequency::from_hz(33.2e12),
        single_photon_rabi: Frequency::from_hz(9e9),
    }
}

fn check(name: &'static str, value: f64, limit: f64, what: &str) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: value <= limit,
        detail: format!("{what} = {value:.3e} (limit {limit:.0e})"),
    }
}

fn random_angles(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [
        rng.random_range(0.0..PI),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..PI),
        rng.random_range(0.0..PI),
    ]
}

fn waveplate_unitarity() -> CheckOutcome {
    let worst = (0..360)
        .map(|i| (i as f64).to_radians())
        .map(|a| {
            qwp_matrix(a)
                .unitarity_error()
                .max(hwp_matrix(a).unitarity_error())
        })
        .fold(0.0, f64::max);
    check("waveplate_unitarity", worst, 1e-12, "max |J†J − I|")
}

fn polarization_closed_form_matches(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let [a, b, t, p] = random_angles(rng);
        let x = polarization_closed_form(a, b, t, p).as_array();
        let y = polarization_pipeline(a, b, t, p).as_array();
        worst = worst.max(max_deviation_up_to_phase(&x, &y));
    }
    check(
        "polarization_closed_form",
        worst,
        1e-10,
        "max component deviation",
    )
}

fn polarization_normalized(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let [a, b, t, p] = random_angles(rng);
        worst = worst.max((polarization_pipeline(a, b, t, p).norm() - 1.0).abs());
    }
    check("polarization_normalized", worst, 1e-12, "max ||ε| − 1|")
}

fn polarization_reconstruction(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let [a, b, t, p] = random_angles(rng);
        let basis = ion_frame_basis(a, b);
        let lab = embed_lab(&crate::polarization::apply_waveplates(p, t));
        let back = polarization_pipeline(a, b, t, p).reconstruct(&basis);
        worst = worst.max((back.0 - lab.0).camax());
    }
    check(
        "polarization_reconstruction",
        worst,
        1e-12,
        "max |Σ ε_q ê_q* − ε|",
    )
}

fn linear_closed_form(engine: &ShiftEngine) -> CheckOutcome {
    let omega0 = TAU * 600e3;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let theta = FRAC_PI_4 * (i as f64 + 0.5) / 50.0;
        let general = engine.shift_for_angles(0.0, 0.0, theta, 0.0, omega0);
        let closed = engine.linear_pol_shift(theta, omega0);
        worst = worst.max(((general - closed) / closed).abs());
    }
    check(
        "linear_shift_closed_form",
        worst,
        1e-10,
        "max relative deviation",
    )
}

fn lin_perp_lin_zero(engine: &ShiftEngine) -> CheckOutcome {
    let omega0 = TAU * 600e3;
    let peak = engine
        .shift_for_angles(0.0, 0.0, FRAC_PI_8, 0.0, omega0)
        .abs();
    let worst = [0.0, FRAC_PI_4, 2.0 * FRAC_PI_4]
        .into_iter()
        .map(|t| engine.shift_for_angles(0.0, 0.0, t, 0.0, omega0).abs() / peak)
        .fold(0.0, f64::max);
    check(
        "zero_shift_configurations",
        worst,
        1e-12,
        "max |δω|/|δω(22.5°)|",
    )
}

fn beatnote_arithmetic(ion: &IonSpecies) -> CheckOutcome {
    let splitting = ion.energy(QubitState::UP);
    let b = nearest_beatnote(splitting, 80e6);
    let delta_hz = b.detuning / TAU;
    let passed = b.j == 158 && (delta_hz - 2.812e6).abs() < 1e-3;
    CheckOutcome {
        name: "beatnote_arithmetic",
        passed,
        detail: format!(
            "j = {}, δ/2π = {:.6} MHz (expect 158, 2.812000)",
            b.j,
            delta_hz / 1e6
        ),
    }
}

fn envelope_converged(ion: &IonSpecies, truncation: u32) -> CheckOutcome {
    let comb = CombSpec::default();
    let splitting = ion.energy(QubitState::UP);
    let rel = match (
        envelope_factor(splitting, &comb, truncation),
        envelope_factor(splitting, &comb, 2 * truncation),
    ) {
        (Ok(a), Ok(b)) => ((b.value - a.value) / b.value).abs(),
        _ => f64::INFINITY,
    };
    check(
        "envelope_convergence",
        rel,
        1e-9,
        &format!("|ΔC/C| for K {truncation}→{}", 2 * truncation),
    )
}

fn config_round_trip() -> CheckOutcome {
    let text = r#"{
        "ion": {"hyperfine_splitting_hz": 12.642812e9, "zeeman_shift_hz": 5e6,
                "fine_structure_splitting_hz": 99.8e12, "raman_detuning_hz": 33.2e12,
                "single_photon_rabi_hz": 9.1e9},
        "field": {"alpha_deg": 10.000000000000002, "beta_deg": 0.1},
        "waveplates": {"qwp_deg": 0.3, "hwp_deg": 22.5},
        "beams": [{"waist_um": 27.0, "power_mw": 123.456789, "center_um": -3.3}]
    }"#;
    let passed = match load_config(text) {
        Ok(cfg) => load_config(&cfg.to_json())
            .map(|back| back == cfg)
            .unwrap_or(false),
        Err(_) => false,
    };
    CheckOutcome {
        name: "config_round_trip",
        passed,
        detail: "load → serialize → load is bit-exact".into(),
    }
}

fn csv_round_trip(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let records = (0..50)
        .map(|_| ScanRecord {
            x: rng.random_range(-1e3..1e3),
            y: rng.random_range(-1e6..1e6),
            sigma_y: rng.random_range(0.0..10.0),
        })
        .collect();
    let d = ScanDataset::new(ScanKind::Position, records, None);
    let passed = ScanDataset::from_csv(&d.to_csv(), Some(ScanKind::Position)).is_ok_and(|b| b == d);
    CheckOutcome {
        name: "csv_round_trip",
        passed,
        detail: "write → read is bit-exact".into(),
    }
}

fn fringe_fit_recovery() -> CheckOutcome {
    let records = (0..50)
        .map(|i| {
            let t = 500e-6 * i as f64 / 49.0;
            ScanRecord {
                x: t,
                y: 0.5 * (1.0 + (TAU * 10e3 * t).cos()),
                sigma_y: 0.05,
            }
        })
        .collect();
    let rel = fit_frequency(&ScanDataset::new(ScanKind::Ramsey, records, None))
        .ok()
        .and_then(|f| f.param("freq_hz"))
        .map_or(f64::INFINITY, |f| ((f - 10e3) / 10e3).abs());
    check(
        "fringe_fit_recovery",
        rel,
        1e-9,
        "relative frequency error at 10 kHz",
    )
}

fn power_law_exact() -> CheckOutcome {
    let records = [5.0, 20.0, 50.0, 100.0, 200.0, 400.0]
        .into_iter()
        .map(|p| ScanRecord {
            x: p,
            y: 0.5 * p * p + 2.0 * p,
            sigma_y: 1.0,
        })
        .collect();
    let err = fit_power_law(&ScanDataset::new(ScanKind::Power, records, None)).map_or(
        f64::INFINITY,
        |f| {
            (f.param("a_hz_per_mw2").unwrap() - 0.5)
                .abs()
                .max((f.param("b_hz_per_mw").unwrap() - 2.0).abs())
        },
    );
    check("power_law_exact", err, 1e-9, "max coefficient error")
}

fn sensitivity_limit() -> CheckOutcome {
    let err = sensitivity_analysis(27.0, Angle::from_degrees(45.0), &[0.01])
        .map_or(f64::INFINITY, |c| (c.ratio[0] - 4.0).abs());
    check("sensitivity_limit", err, 1e-3, "|ratio(0.01 μm) − 4|")
}

fn rabi_peak_shift() -> CheckOutcome {
    let b1 = BeamGeometry::new(27.0, 100.0, 0.0);
    let mut worst: f64 = 0.0;
    for d in [2.0, 8.0, 20.0] {
        let b2 = BeamGeometry { center_um: d, ..b1 };
        let records = (0..121)
            .map(|i| {
                let x = -60.0 + i as f64;
                ScanRecord {
                    x,
                    y: rabi_profile(&b1, &b2, x, 270e3),
                    sigma_y: 1.0,
                }
            })
            .collect();
        let err = fit_rabi_profile(
            &ScanDataset::new(ScanKind::Rabi, records, None),
            b1.projection,
        )
        .ok()
        .and_then(|f| f.param("center_um"))
        .map_or(f64::INFINITY, |c| (c - d / 2.0).abs());
        worst = worst.max(err);
    }
    check("rabi_peak_shift", worst, 1e-6, "max |peak − d/2| (μm)")
}

/// Run every check. Randomized checks use a fixed seed.
pub fn run_selftest(options: SelftestOptions) -> SelftestReport {
    let ion = reference_ion(options);
    let truncation = crate::config::DEFAULT_ENVELOPE_TRUNCATION;
    let mut rng = ChaCha8Rng::seed_from_u64(20_250_101);
    let mut checks = vec![
        waveplate_unitarity(),
        polarization_closed_form_matches(&mut rng),
        polarization_normalized(&mut rng),
        polarization_reconstruction(&mut rng),
        beatnote_arithmetic(&ion),
        envelope_converged(&ion, truncation),
    ];
    match ShiftEngine::new(&ion, &CombSpec::default(), truncation) {
        Ok(engine) => {
            checks.push(linear_closed_form(&engine));
            checks.push(lin_perp_lin_zero(&engine));
        }
        Err(e) => checks.push(CheckOutcome {
            name: "shift_engine",
            passed: false,
            detail: e.to_string(),
        }),
    }
    checks.extend([
        config_round_trip(),
        csv_round_trip(&mut rng),
        fringe_fit_recovery(),
        power_law_exact(),
        sensitivity_limit(),
        rabi_peak_shift(),
    ]);
    SelftestReport { checks }
}
