mod common;

use roadgrip::metrics::{aggregate, sample_metrics, EvalOptions, GroundTruthPixel, GroundTruthSample};
use roadgrip::raster::GripSummaryRaster;
use roadgrip::synth::*;
use roadgrip::{GripSummary, LabelRaster, SurfaceState};

/// Kolmogorov–Smirnov statistic of sorted draws against an analytic cdf.
fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let c = cdf(*x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn class_draws_pass_ks_test() {
    let gen = default_class_densities();
    let n = 1_000_000;
    let critical = 1.628 / (n as f64).sqrt();
    for (k, d) in gen.densities().iter().enumerate() {
        let mut s = draw_samples(d, n, 100 + k as u64);
        s.sort_by(f64::total_cmp);
        let ks = ks_statistic(&s, |x| d.cdf(x));
        assert!(ks < critical, "{}: D = {ks} >= {critical}", d.class());
    }
}

#[test]
fn classifier_accuracy_matches_setting() {
    let labels = LabelRaster::new(400, 250, (0..100_000).map(|i| SurfaceState::ALL[i % 5]).collect()).unwrap();
    let cfg = SimulatorConfig { accuracy: 0.2, temperature: 1.0, ..SimulatorConfig::default() };
    let probs = simulate_classifier(&labels, &cfg, 77).unwrap();
    let hits = labels
        .labels()
        .iter()
        .enumerate()
        .filter(|(i, s)| {
            let p = probs.pixel(*i);
            let arg = (0..5).max_by(|a, b| p[*a].total_cmp(&p[*b])).unwrap();
            arg == s.index()
        })
        .count();
    let acc = hits as f64 / 100_000.0;
    assert!((acc - 0.2).abs() <= 0.004, "accuracy {acc}");
}

#[test]
fn argmax_survives_temperature() {
    let labels = LabelRaster::new(10, 10, (0..100).map(|i| SurfaceState::ALL[(i * 7) % 5]).collect()).unwrap();
    let cfg = SimulatorConfig { accuracy: 1.0, temperature: 1.0, ..SimulatorConfig::default() };
    let probs = simulate_classifier(&labels, &cfg, 1).unwrap();
    for (i, s) in labels.labels().iter().enumerate() {
        let p = probs.pixel(i);
        assert!(p.iter().enumerate().all(|(c, v)| c == s.index() || *v < p[s.index()]));
    }
}

#[test]
fn outputs_are_pure_functions_of_seed() {
    let gen = default_class_densities();
    let scene = SceneConfig {
        height: 60,
        width: 12,
        horizon: 20,
        layout: vec![(SurfaceState::Snowy, 0.5), (SurfaceState::Dry, 0.5)],
        seed: 42,
    };
    let sim = SimulatorConfig::default();
    let run = || {
        let (labels, sample) = generate_scene(&scene, &gen).unwrap();
        let probs = simulate_classifier(&labels, &sim, 9).unwrap();
        let regs = simulate_regressors(&labels, &gen, &sim, 9).unwrap();
        let mc = simulate_mc_dropout(&labels, &gen, &sim, 9).unwrap();
        (labels, sample, probs, regs, mc)
    };
    assert_eq!(run(), run());
    let other = generate_scene(&SceneConfig { seed: 43, ..scene.clone() }, &gen).unwrap().1;
    assert_ne!(other, run().1);
}

/// Intervals set to the exact 5th/95th quantiles of the generating density.
#[test]
fn exact_quantiles_are_calibrated() {
    let d = roadgrip::PiecewiseLinearDensity::build("c", vec![0.2, 0.5, 0.7], vec![1.0, 3.0, 0.5], true).unwrap();
    let (p05, p95) = (d.quantile(0.05).unwrap(), d.quantile(0.95).unwrap());
    let rows = 1000;
    let draws = draw_samples(&d, 100 * rows, 4);
    let summary = GripSummary { mean: d.mean(), median: d.median(), p05, p95, sigma_low: p05, sigma_high: p95 };
    let records: Vec<_> = draws
        .chunks(rows)
        .enumerate()
        .map(|(k, chunk)| {
            let pixels = chunk
                .iter()
                .enumerate()
                .map(|(r, g)| GroundTruthPixel { row: r + 1, col: 0, grip: *g, state: SurfaceState::Wet })
                .collect();
            let sample = GroundTruthSample::new(format!("s{k:03}"), rows + 1, 1, 0, pixels).unwrap();
            let raster = GripSummaryRaster::full(rows + 1, 1, vec![summary; rows + 1]);
            let opts = EvalOptions { clamp: false, coverage: roadgrip::metrics::CoverageMode::Unweighted, ..EvalOptions::default() };
            sample_metrics(&raster, &sample, &opts).unwrap()
        })
        .collect();
    let opts = EvalOptions { clamp: false, ..EvalOptions::default() };
    let row = aggregate("oracle", &records, &opts).unwrap();
    let n = draws.len();
    assert!((row.f_over_p5 - 95.0).abs() <= 3.0 * common::binomial_se_pct(0.95, n), "{}", row.f_over_p5);
    assert!((row.f_90 - 90.0).abs() <= 3.0 * common::binomial_se_pct(0.9, n), "{}", row.f_90);
}
