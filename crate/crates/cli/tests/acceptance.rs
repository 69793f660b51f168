//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ionprobe::config::QubitState;
use ionprobe::engine::{envelope_factor, nearest_beatnote};
use ionprobe::fit::{
    fit_beam_profile, fit_hwp_scan, fit_power_law, fit_rabi_profile, power_law_exponent,
    sensitivity_analysis, FixedAngles, HwpModel,
};
use ionprobe::polarization::{
    apply_waveplates, embed_lab, hwp_matrix, ion_frame_basis, max_deviation_up_to_phase,
    polarization_closed_form, polarization_pipeline, qwp_matrix,
};
use ionprobe::sim::{
    rabi_profile, simulate_hwp_scan, simulate_position_scan, simulate_power_scan,
    simulate_rabi_scan,
};
use ionprobe::{load_config, Angle, BeamGeometry, ExperimentConfig, NoiseModel, ShiftEngine};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHECK_K_FROM: u32 = 1000;

struct Line {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: &'static str, passed: bool, detail: String) -> Line {
    Line { id, passed, detail }
}

fn config_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/yb171.json")
}

fn config() -> ExperimentConfig {
    load_config(&std::fs::read_to_string(config_path()).unwrap()).unwrap()
}

fn engine() -> ShiftEngine {
    ShiftEngine::from_config(&config()).unwrap()
}

fn c1_closed_form() -> Line {
    let start = Instant::now();
    let e = engine();
    let cfg = config();
    let omega0 = TAU * 600e3;
    // Closed form assembled from the two |0,0⟩ → |1,±1⟩ splittings.
    let sum: f64 = [-1.0, 1.0]
        .iter()
        .map(|m| {
            let split = cfg.ion.hyperfine_splitting.angular() + m * cfg.ion.zeeman_shift.angular();
            let c = envelope_factor(split, &cfg.comb, cfg.envelope_truncation)
                .unwrap()
                .value;
            c / nearest_beatnote(split, cfg.comb.rep_rate_hz).detuning
        })
        .sum();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let theta = FRAC_PI_4 * (i as f64 + 0.5) / 50.0;
        let closed = omega0 * omega0 / 8.0 * (4.0 * theta).sin().powi(2) * sum;
        let general = e.shift_for_angles(0.0, 0.0, theta, 0.0, omega0);
        worst = worst.max(((general - closed) / closed).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "1 closed-form equivalence",
        worst <= 1e-10 && secs < 1.0,
        format!("max rel dev {worst:.2e} (≤ 1e-10), {secs:.3} s (< 1 s)"),
    )
}

fn c2_polarization() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, t, p) = (
            rng.random_range(0.0..PI),
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..PI),
            rng.random_range(0.0..PI),
        );
        let x = polarization_closed_form(a, b, t, p).as_array();
        let y = polarization_pipeline(a, b, t, p).as_array();
        worst = worst.max(max_deviation_up_to_phase(&x, &y));
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "2 polarization closed form vs rotation pipeline",
        worst <= 1e-10 && secs < 1.0,
        format!("max component dev {worst:.2e} over 1000 draws (≤ 1e-10), {secs:.3} s (< 1 s)"),
    )
}

fn c3_zero_shift() -> Line {
    let e = engine();
    let omega0 = TAU * 600e3;
    let peak = e.shift_for_angles(0.0, 0.0, FRAC_PI_8, 0.0, omega0).abs();
    let worst = [0.0, FRAC_PI_4, 2.0 * FRAC_PI_4]
        .iter()
        .map(|t| e.shift_for_angles(0.0, 0.0, *t, 0.0, omega0).abs() / peak)
        .fold(0.0, f64::max);
    line(
        "3 zero-shift configurations",
        worst <= 1e-12,
        format!("max |δω|/|δω(22.5°)| {worst:.2e} at θ = 0°, 45°, 90° (≤ 1e-12)"),
    )
}

fn c4_power_law() -> Line {
    let mut cfg = config();
    cfg.noise = NoiseModel::none();
    cfg.residual_two_photon_hz_per_mw = 0.0;
    let powers: Vec<f64> = (1..=20).map(|k| 50.0 * k as f64).collect();
    let scan = simulate_power_scan(&cfg, 0, &powers, false).unwrap();
    let fit = fit_power_law(&scan).unwrap();
    let (a, b) = (
        fit.param("a_hz_per_mw2").unwrap(),
        fit.param("b_hz_per_mw").unwrap(),
    );
    let p_max = 1000.0;
    // Read both ways: (b/a)·P_max as written, and the dimensionless
    // linear-to-quadratic ratio b·P_max/(a·P_max²).
    let literal = (b / a).abs() * p_max;
    let relative = (b / (a * p_max)).abs();
    let (slope, _) = power_law_exponent(&scan).unwrap();
    line(
        "4 quadratic power law",
        literal < 1e-9 && relative < 1e-9 && (slope - 2.0).abs() <= 1e-3,
        format!(
            "|b/a|·P_max {literal:.2e}, |b/(a·P_max)| {relative:.2e} (< 1e-9), log-log slope {slope:.6} (2 ± 0.001)"
        ),
    )
}

fn c5_beatnote() -> Line {
    let split = TAU * 12.642812e9;
    let nu = 80e6;
    let b = nearest_beatnote(split, nu);
    // Integer scan over j ∈ [0, 200].
    let oracle = (0..=200i64)
        .min_by(|x, y| {
            let dx = (split - TAU * nu * *x as f64).abs();
            let dy = (split - TAU * nu * *y as f64).abs();
            dx.total_cmp(&dy)
        })
        .unwrap();
    let delta_hz = b.detuning / TAU;
    let passed = b.j == 158 && oracle == 158 && (delta_hz - 2.812e6).abs() < 1e-3;
    line(
        "5 beatnote arithmetic",
        passed,
        format!(
            "j = {} (oracle {oracle}), δ/2π = {:.6} MHz (2.812 MHz)",
            b.j,
            delta_hz / 1e6
        ),
    )
}

fn envelope_change(k: u32) -> f64 {
    let cfg = config();
    let ion = cfg.ion;
    let mut worst: f64 = 0.0;
    for to in [QubitState::MINUS, QubitState::UP, QubitState::PLUS] {
        for (from, to) in [(QubitState::DOWN, to), (QubitState::UP, QubitState::MINUS)] {
            let split = ion.energy(to) - ion.energy(from);
            let a = envelope_factor(split, &cfg.comb, k).unwrap().value;
            let b = envelope_factor(split, &cfg.comb, 2 * k).unwrap().value;
            worst = worst.max(((b - a) / b).abs());
        }
    }
    worst
}

fn c6_envelope() -> Vec<Line> {
    let literal = envelope_change(CHECK_K_FROM);
    let default_k = config().envelope_truncation;
    let shipped = envelope_change(default_k);
    vec![
        line(
            "6 envelope convergence",
            literal < 1e-9,
            format!(
                "|ΔC/C| {literal:.2e} for K {CHECK_K_FROM}→{} (< 1e-9)",
                2 * CHECK_K_FROM
            ),
        ),
        line(
            "6 (supplementary) envelope convergence at shipped K",
            shipped < 1e-9,
            format!(
                "|ΔC/C| {shipped:.2e} for K {default_k}→{} (< 1e-9)",
                2 * default_k
            ),
        ),
    ]
}

fn c7_hwp_recovery() -> Line {
    let start = Instant::now();
    let base = config();
    let model = HwpModel::new(ShiftEngine::from_config(&base).unwrap()).unwrap();
    let angles: Vec<Angle> = (0..=36)
        .map(|k| Angle::from_degrees(5.0 * k as f64))
        .collect();
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut cfg = base.clone();
        cfg.noise.seed = seed;
        let scan = simulate_hwp_scan(&cfg, 0, &angles, false).unwrap();
        let err = fit_hwp_scan(&scan, &model, FixedAngles::default())
            .map(|f| (f.param("alpha_deg").unwrap() - 10.0).abs())
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
        hits += usize::from(err <= 1.0);
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "7 HWP-scan recovery",
        hits >= 90 && secs < 60.0,
        format!("α within ±1° in {hits}/100 (≥ 90), worst {worst:.2}°, {secs:.1} s (< 60 s)"),
    )
}

fn c8_profile_recovery() -> Line {
    let base = config();
    let xs: Vec<f64> = (0..41).map(|k| -60.0 + 3.0 * k as f64).collect();
    let proj = Angle::from_degrees(45.0);
    let (mut waist_hits, mut offset_hits) = (0, 0);
    let (mut worst_w, mut worst_d): (f64, f64) = (0.0, 0.0);
    for seed in 0..100 {
        let mut cfg = base.clone();
        cfg.noise.seed = seed;
        let fits: Vec<_> = (0..2)
            .map(|b| {
                fit_beam_profile(&simulate_position_scan(&cfg, b, &xs, false).unwrap(), proj).ok()
            })
            .collect();
        let w_err = fits[0].as_ref().map_or(f64::INFINITY, |f| {
            (f.param("waist_um").unwrap() - 27.0).abs()
        });
        let d_err = match (&fits[0], &fits[1]) {
            (Some(a), Some(b)) => {
                (b.param("center_um").unwrap() - a.param("center_um").unwrap() - 8.0).abs()
            }
            _ => f64::INFINITY,
        };
        worst_w = worst_w.max(w_err);
        worst_d = worst_d.max(d_err);
        waist_hits += usize::from(w_err <= 2.0);
        offset_hits += usize::from(d_err <= 0.5);
    }
    line(
        "8 profile recovery",
        waist_hits >= 90 && offset_hits >= 90,
        format!(
            "w₀ within ±2 μm in {waist_hits}/100 (≥ 90, worst {worst_w:.2}), 8 μm offset within ±0.5 μm in {offset_hits}/100 (worst {worst_d:.2})"
        ),
    )
}

fn c9_sensitivity() -> Line {
    let c = sensitivity_analysis(27.0, Angle::from_degrees(45.0), &[0.01, 8.0]).unwrap();
    let (near, at8) = (c.ratio[0], c.ratio[1]);
    line(
        "9 sensitivity ratio",
        (near - 4.0).abs() <= 1e-3 && (3.4..=4.0).contains(&at8),
        format!("ratio(0.01 μm) {near:.6} (4 ± 1e-3), ratio(8 μm) {at8:.4} ([3.4, 4.0])"),
    )
}

/// Golden-section maximum of a unimodal function on [lo, hi].
fn argmax(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-10 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

fn c10_rabi_shift() -> Line {
    let mut worst: f64 = 0.0;
    let xs: Vec<f64> = (0..121).map(|k| -60.0 + k as f64).collect();
    for d in [2.0, 8.0, 20.0] {
        let b1 = BeamGeometry::new(27.0, 1000.0, 0.0);
        let b2 = BeamGeometry::new(27.0, 1000.0, d);
        let direct = argmax(|x| rabi_profile(&b1, &b2, x, 270e3), -50.0, 50.0);

        let mut cfg = config();
        cfg.noise = NoiseModel::none();
        cfg.beams = vec![b1, b2];
        let scan = simulate_rabi_scan(&cfg, &xs, 270e3, false).unwrap();
        let fitted = fit_rabi_profile(&scan, b1.projection)
            .unwrap()
            .param("center_um")
            .unwrap();
        worst = worst
            .max((direct - d / 2.0).abs())
            .max((fitted - d / 2.0).abs());
    }
    line(
        "10 Rabi peak-shift law",
        worst <= 1e-6,
        format!("max |argmax − d/2| {worst:.2e} μm for d = 2, 8, 20 (≤ 1e-6)"),
    )
}

fn c11_determinism() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let scans: [(&str, &str, &str, &str); 5] = [
        ("ramsey", "0", "3e-4", "48"),
        ("power", "0", "1000", "11"),
        ("hwp", "0", "180", "37"),
        ("position", "-60", "60", "41"),
        ("rabi", "-60", "60", "41"),
    ];
    let mut same = 0;
    for (kind, from, to, points) in scans {
        let run = |name: &str| {
            let path = dir.path().join(format!("{kind}_{name}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_ionprobe"))
                .args([
                    "scan",
                    kind,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--from",
                    from,
                    "--to",
                    to,
                    "--points",
                    points,
                ])
                .args(["--seed", "11", "-o", path.to_str().unwrap()])
                .env_remove("IONPROBE_SEED")
                .status()
                .unwrap();
            status.success().then(|| std::fs::read(&path).unwrap())
        };
        let (a, b) = (run("a"), run("b"));
        same += usize::from(a.is_some() && a == b);
    }
    line(
        "11 determinism",
        same == scans.len(),
        format!(
            "{same}/{} scan kinds byte-identical across reruns",
            scans.len()
        ),
    )
}

fn c12_polarization_properties() -> Line {
    let angles = (0.0..PI, 0.0..TAU, 0.0..PI, 0.0..PI);
    let mut results = Vec::new();
    let mut run = |name: &str, check: &dyn Fn(f64, f64, f64, f64) -> f64| {
        let mut runner = TestRunner::new(PropConfig {
            cases: 1000,
            failure_persistence: None,
            ..PropConfig::default()
        });
        let outcome = runner.run(&angles, |(a, b, t, p)| {
            let err = check(a, b, t, p);
            prop_assert!(err <= 1e-12, "{name}: {err:e}");
            Ok(())
        });
        results.push((name.to_string(), outcome.is_ok()));
    };
    run("unitarity", &|_, _, t, p| {
        qwp_matrix(p).then(&hwp_matrix(t)).unitarity_error()
    });
    run("normalization", &|a, b, t, p| {
        (polarization_pipeline(a, b, t, p).norm() - 1.0).abs()
    });
    run("reconstruction", &|a, b, t, p| {
        let lab = embed_lab(&apply_waveplates(p, t));
        let back = polarization_pipeline(a, b, t, p).reconstruct(&ion_frame_basis(a, b));
        (back.0 - lab.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    });
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.1)
        .map(|r| r.0.as_str())
        .collect();
    line(
        "12 polarization invariants",
        failed.is_empty(),
        if failed.is_empty() {
            "unitarity, normalization, reconstruction ≤ 1e-12 over 1000 cases each".to_string()
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn main() {
    let mut lines = vec![
        c1_closed_form(),
        c2_polarization(),
        c3_zero_shift(),
        c4_power_law(),
        c5_beatnote(),
    ];
    lines.extend(c6_envelope());
    lines.extend([
        c7_hwp_recovery(),
        c8_profile_recovery(),
        c9_sensitivity(),
        c10_rabi_shift(),
        c11_determinism(),
        c12_polarization_properties(),
    ]);
    for l in &lines {
        println!(
            "{} criterion {}: {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.id,
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("{} criteria lines, {failed} failed", lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
