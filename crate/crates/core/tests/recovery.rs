//! Simulate → fit round trips at the reference noise levels.

use ionprobe::fit::{
    fit_beam_profile, fit_frequency, fit_hwp_scan, fit_power_law, FixedAngles, HwpModel,
};
use ionprobe::sim::{
    simulate_hwp_scan, simulate_position_scan, simulate_power_scan, simulate_ramsey,
};
use ionprobe::{load_config, Angle, ExperimentConfig, NoiseModel, Simulator};

fn config(seed: u64) -> ExperimentConfig {
    let mut c = load_config(include_str!("../../../configs/yb171.json")).unwrap();
    c.noise.seed = seed;
    c
}

fn true_shift(c: &ExperimentConfig) -> f64 {
    let sim = Simulator::new(c.clone()).unwrap();
    sim.shift_hz(
        &c.beams[0],
        1.0,
        c.hwp_angle.radians(),
        c.qwp_angle.radians(),
    )
    .unwrap()
}

fn delays(shift: f64) -> Vec<f64> {
    let span = 3.0 / shift.abs();
    (0..48).map(|k| span * k as f64 / 47.0).collect()
}

#[test]
fn ramsey_frequency_within_three_sigma() {
    // A bare fringe only sees |δf|.
    let f0 = true_shift(&config(0)).abs();
    let t = delays(f0);
    let hits = (0..100)
        .filter(|&seed| {
            let fit = fit_frequency(&simulate_ramsey(&config(seed), 0, &t).unwrap()).unwrap();
            let f = fit.param("freq_hz").unwrap();
            (f - f0).abs() < 3.0 * fit.sigma("freq_hz").unwrap()
        })
        .count();
    assert!(hits >= 95, "{hits}/100 within 3σ");
}

#[test]
fn frequency_error_shrinks_as_root_shots() {
    let spread = |shots: u32| {
        let mut c = config(0);
        c.noise.intensity_fraction = 0.0;
        c.noise.shots = shots;
        let f0 = true_shift(&c).abs();
        let t = delays(f0);
        let errs: Vec<f64> = (0..200)
            .map(|seed| {
                c.noise.seed = seed;
                fit_frequency(&simulate_ramsey(&c, 0, &t).unwrap())
                    .unwrap()
                    .param("freq_hz")
                    .unwrap()
                    - f0
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64).sqrt()
    };
    let ratio = spread(100) / spread(400);
    assert!((ratio - 2.0).abs() < 0.4, "σ(100)/σ(400) = {ratio}");
}

#[test]
fn power_coefficient_within_five_percent() {
    let powers: Vec<f64> = (1..=10).map(|k| 100.0 * k as f64).collect();
    let a_true = true_shift(&config(0)) / 1000.0f64.powi(2);
    for seed in 0..100 {
        let scan = simulate_power_scan(&config(seed), 0, &powers, false).unwrap();
        let a = fit_power_law(&scan).unwrap().param("a_hz_per_mw2").unwrap();
        assert!(
            (a / a_true - 1.0).abs() < 0.05,
            "seed {seed}: a = {a}, expected {a_true}"
        );
    }
}

fn hwp_angles() -> Vec<Angle> {
    (0..=36)
        .map(|k| Angle::from_degrees(5.0 * k as f64))
        .collect()
}

#[test]
fn hwp_alpha_recovered() {
    let model = HwpModel::new(Simulator::new(config(0)).unwrap().engine().clone()).unwrap();
    let hits = (0..20)
        .filter(|&seed| {
            let scan = simulate_hwp_scan(&config(seed), 0, &hwp_angles(), false).unwrap();
            let fit = fit_hwp_scan(&scan, &model, FixedAngles::default()).unwrap();
            (fit.param("alpha_deg").unwrap() - 10.0).abs() <= 1.0
        })
        .count();
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn qwp_rotation_recovered_with_field_on_axis() {
    let model = HwpModel::new(Simulator::new(config(0)).unwrap().engine().clone()).unwrap();
    let fixed = FixedAngles {
        alpha: Some(Angle::from_degrees(0.0)),
        beta: Some(Angle::from_degrees(0.0)),
        phi: None,
    };
    let hits = (0..20)
        .filter(|&seed| {
            let mut c = config(seed);
            c.field.alpha = Angle::from_degrees(0.0);
            c.qwp_angle = Angle::from_degrees(15.0);
            let scan = simulate_hwp_scan(&c, 0, &hwp_angles(), false).unwrap();
            let fit = fit_hwp_scan(&scan, &model, fixed).unwrap();
            (fit.param("phi_deg").unwrap() - 15.0).abs() <= 2.0
        })
        .count();
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn profile_waist_and_offset_recovered() {
    let xs: Vec<f64> = (0..41).map(|k| -60.0 + 3.0 * k as f64).collect();
    let proj = Angle::from_degrees(45.0);
    for seed in 0..20 {
        let c = config(seed);
        let f0 =
            fit_beam_profile(&simulate_position_scan(&c, 0, &xs, false).unwrap(), proj).unwrap();
        let f1 =
            fit_beam_profile(&simulate_position_scan(&c, 1, &xs, false).unwrap(), proj).unwrap();
        let w = f0.param("waist_um").unwrap();
        assert!((w - 27.0).abs() <= 2.0, "seed {seed}: waist {w}");
        let d = f1.param("center_um").unwrap() - f0.param("center_um").unwrap();
        assert!((d - 8.0).abs() <= 0.5, "seed {seed}: offset {d}");
    }
}

#[test]
fn noiseless_round_trip_is_exact() {
    let mut c = config(0);
    c.noise = NoiseModel::none();
    let model = HwpModel::new(Simulator::new(c.clone()).unwrap().engine().clone()).unwrap();
    let fit = fit_hwp_scan(
        &simulate_hwp_scan(&c, 0, &hwp_angles(), false).unwrap(),
        &model,
        FixedAngles::default(),
    )
    .unwrap();
    assert!((fit.param("alpha_deg").unwrap() - 10.0).abs() < 1e-4);
    assert!(fit.param("phi_deg").unwrap().abs() < 1e-4);

    let xs: Vec<f64> = (0..41).map(|k| -60.0 + 3.0 * k as f64).collect();
    let fit = fit_beam_profile(
        &simulate_position_scan(&c, 1, &xs, false).unwrap(),
        Angle::from_degrees(45.0),
    )
    .unwrap();
    assert!((fit.param("waist_um").unwrap() - 27.0).abs() < 1e-6);
    assert!((fit.param("center_um").unwrap() - 8.0).abs() < 1e-6);
}
