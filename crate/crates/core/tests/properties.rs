mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use roadgrip::baselines::{ensemble_stats, focal_loss, pinball, quantile_summary, EnsembleStack, QuantilePrediction, QuantileRaster};
use roadgrip::metrics::{clamp_interval_for_eval, pixel_weights, GroundTruthPixel, GroundTruthSample};
use roadgrip::mixture::{fuse_raster, fuse_raster_with_workers, SummaryLevels};
use roadgrip::nelder_mead::{minimize, ObjectiveSpec, SimplexOptions};
use roadgrip::raster::{decode, encode_f32, Grr1};
use roadgrip::{ClassProbabilityRaster, PiecewiseLinearDensity, SurfaceState};

fn density_strategy() -> impl Strategy<Value = PiecewiseLinearDensity> {
    (2usize..10)
        .prop_flat_map(|n| {
            (
                0.0..0.5f64,
                prop::collection::vec(0.001..0.1f64, n - 1),
                prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..5.0f64], n),
            )
        })
        .prop_filter_map("all-zero densities", |(start, steps, values)| {
            let mut knots = vec![start];
            for s in steps {
                knots.push(knots.last().unwrap() + s);
            }
            PiecewiseLinearDensity::build("c", knots, values, true).ok()
        })
}

fn probs_strategy() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(prop_oneof![1 => Just(0.0), 3 => 0.0..1.0f64])
        .prop_filter("zero vector", |p| p.iter().sum::<f64>() > 0.0)
        .prop_map(|mut p| {
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            p
        })
}

proptest! {
    #[test]
    fn quantile_round_trips(d in density_strategy(), p in 1e-6..(1.0 - 1e-6)) {
        prop_assert!(round_trip_ok(&d, p, 1e-9).is_ok(), "{:?}", round_trip_ok(&d, p, 1e-9));
    }

    #[test]
    fn normalization_is_tight(d in density_strategy()) {
        prop_assert!((d.integral() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cdf_is_monotone(d in density_strategy(), a in -0.1..1.2f64, b in -0.1..1.2f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(lo) <= d.cdf(hi));
    }

    #[test]
    fn mixture_cdf_is_exact(seed in any::<u64>(), p in probs_strategy(), g in -0.1..1.2f64) {
        let mut r = rng(seed);
        let ds = random_class_densities(&mut r);
        let table = roadgrip::mixture::build_mixture_table(&ds).unwrap();
        let fused = table.fuse(&p).unwrap();
        let direct: f64 = SurfaceState::ALL.iter().map(|s| p[s.index()] * table.class_density(*s).cdf(g)).sum();
        prop_assert!((fused.cdf(g) - direct).abs() <= 1e-12);
        let mean: f64 = SurfaceState::ALL.iter().map(|s| p[s.index()] * table.class_mean(*s)).sum();
        prop_assert!((fused.mean() - mean).abs() <= 1e-12);
        for level in LEVELS {
            prop_assert!(round_trip_ok(&fused, level, 1e-9).is_ok(), "{:?}", round_trip_ok(&fused, level, 1e-9));
        }
    }

    #[test]
    fn batch_equals_scalar_bitwise(seed in any::<u64>(), pixels in prop::collection::vec(probs_strategy(), 1..40)) {
        let mut r = rng(seed);
        let table = random_table(&mut r);
        let levels = SummaryLevels::default();
        let flat: Vec<f64> = pixels.iter().flatten().copied().collect();
        let raster = ClassProbabilityRaster::new(1, pixels.len(), flat).unwrap();
        let batch = fuse_raster(&table, &raster, &levels).unwrap();
        for (i, p) in pixels.iter().enumerate() {
            let fused = table.fuse(p).unwrap();
            let s = &batch.pixels[i];
            prop_assert_eq!(s.mean.to_bits(), fused.mean().to_bits());
            prop_assert_eq!(s.median.to_bits(), fused.quantile(0.5).unwrap().to_bits());
            prop_assert_eq!(s.p05.to_bits(), fused.quantile(levels.low).unwrap().to_bits());
            prop_assert_eq!(s.p95.to_bits(), fused.quantile(levels.high).unwrap().to_bits());
            prop_assert_eq!(s.sigma_low.to_bits(), fused.quantile(levels.sigma_low).unwrap().to_bits());
            prop_assert_eq!(s.sigma_high.to_bits(), fused.quantile(levels.sigma_high).unwrap().to_bits());
        }
    }

    #[test]
    fn worker_count_does_not_change_output(seed in any::<u64>(), workers in 1usize..5) {
        let mut r = rng(seed);
        let table = random_table(&mut r);
        let flat: Vec<f64> = (0..5000).flat_map(|_| random_probs(&mut r)).collect();
        let raster = ClassProbabilityRaster::new(50, 100, flat).unwrap();
        let levels = SummaryLevels::default();
        let one = fuse_raster(&table, &raster, &levels).unwrap();
        let many = fuse_raster_with_workers(&table, &raster, &levels, workers).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn nelder_mead_is_translation_equivariant(
        c in prop::collection::vec(-2.0..2.0f64, 3),
        x0 in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let opts = SimplexOptions::default();
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum::<f64>();
        let base = minimize(&ObjectiveSpec::new(3, f), &x0, &opts).unwrap();
        let shifted_f = |x: &[f64]| {
            let y: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            f(&y)
        };
        let x0c: Vec<f64> = x0.iter().zip(&c).map(|(a, b)| a + b).collect();
        let shifted = minimize(&ObjectiveSpec::new(3, shifted_f), &x0c, &opts).unwrap();
        for (i, ci) in c.iter().enumerate() {
            prop_assert!((shifted.point[i] - ci - base.point[i]).abs() <= 1e-3);
        }
    }

    #[test]
    fn nelder_mead_respects_budget(x0 in prop::collection::vec(-3.0..3.0f64, 1..6), budget in 5usize..200) {
        let dim = x0.len();
        let opts = SimplexOptions { max_evaluations: Some(budget), ..SimplexOptions::default() };
        let res = minimize(&ObjectiveSpec::new(dim, |x: &[f64]| x.iter().map(|v| v.cos() + v * v).sum()), &x0, &opts).unwrap();
        prop_assert!(res.evaluations <= budget + dim + 1);
    }

    #[test]
    fn pinball_is_nonnegative_and_convex(y in 0.0..1.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64, alpha in 0.01..0.99f64) {
        prop_assert!(pinball(y, a, alpha) >= 0.0);
        prop_assert_eq!(pinball(y, y, alpha), 0.0);
        if a != y {
            prop_assert!(pinball(y, a, alpha) > 0.0);
        }
        let mid = pinball(y, 0.5 * (a + b), alpha);
        prop_assert!(mid <= 0.5 * (pinball(y, a, alpha) + pinball(y, b, alpha)) + 1e-15);
    }

    #[test]
    fn focal_with_zero_gamma_is_cross_entropy(p in probs_strategy(), y in 0usize..5, w in 0.0..3.0f64) {
        prop_assume!(p[y] > 1e-6);
        let (loss, _) = focal_loss(&p, y, 0.0, w).unwrap();
        prop_assert!((loss - (-w * p[y].ln())).abs() <= 1e-12);
    }

    #[test]
    fn ensemble_variance_is_permutation_invariant(values in prop::collection::vec(0.0..1.0f64, 2..8), seed in any::<u64>()) {
        let stack = |v: &[f64]| EnsembleStack::new(1, 1, v.iter().map(|x| vec![*x]).collect()).unwrap();
        let mut shuffled = values.clone();
        let mut r = rng(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let (_, a) = ensemble_stats(&stack(&values)).unwrap();
        let (_, b) = ensemble_stats(&stack(&shuffled)).unwrap();
        prop_assert!((a[0] - b[0]).abs() <= 1e-15);
    }

    #[test]
    fn quantile_mean_ignores_crossing(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let raster = |lo, hi| QuantileRaster { height: 1, width: 1, preds: vec![QuantilePrediction { q_low: lo, q_high: hi }] };
        let s1 = quantile_summary(&raster(a, b)).unwrap();
        let s2 = quantile_summary(&raster(b, a)).unwrap();
        prop_assert_eq!(s1.pixels[0].mean, s2.pixels[0].mean);
    }

    #[test]
    fn clamp_is_idempotent(lo in -1.0..2.0f64, hi in -1.0..2.0f64) {
        let once = clamp_interval_for_eval(lo, hi);
        prop_assert_eq!(clamp_interval_for_eval(once.0, once.1), once);
        prop_assert!(once.0 <= once.1);
    }

    #[test]
    fn weights_average_to_one(rows in prop::collection::btree_set(0usize..100, 1..60), horizon in 0usize..50) {
        prop_assume!(rows.iter().any(|r| *r > horizon));
        let pixels = rows.iter().map(|r| GroundTruthPixel { row: *r, col: 0, grip: 0.5, state: SurfaceState::Wet }).collect();
        let sample = GroundTruthSample::new("s", 100, 1, horizon, pixels).unwrap();
        let w = pixel_weights(&sample).unwrap();
        prop_assert!((w.iter().sum::<f64>() / w.len() as f64 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn grr1_round_trips_f32(h in 1usize..6, w in 1usize..6, c in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let data: Vec<f32> = (0..h * w * c).map(|_| r.random::<f32>()).collect();
        let grid = roadgrip::raster::Grid::new(h, w, c, data).unwrap();
        match decode(&encode_f32(&grid).unwrap()).unwrap() {
            Grr1::F32(g) => prop_assert_eq!(g, grid),
            Grr1::U8(_) => prop_assert!(false, "wrong dtype"),
        }
    }
}

#[test]
fn mean_matches_monte_carlo() {
    let mut r = rng(99);
    for _ in 0..5 {
        let d = random_density(&mut r, "c");
        let n = 1_000_000;
        let samples = roadgrip::synth::draw_samples(&d, n, r.random());
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = d.std_dev() / (n as f64).sqrt();
        assert!((mean - d.mean()).abs() <= 3.0 * se, "mean {mean} vs {} (se {se})", d.mean());
    }
}

#[test]
fn fused_interval_covers_ninety_percent_of_draws() {
    let mut r = rng(5);
    let table = random_table(&mut r);
    let p = random_probs(&mut r);
    let fused = table.fuse(&p).unwrap();
    let s = table.summarize(&p, &SummaryLevels::default()).unwrap();
    let draws = roadgrip::synth::draw_samples(&fused, 1_000_000, 17);
    let inside = draws.iter().filter(|g| **g >= s.p05 && **g <= s.p95).count() as f64 / draws.len() as f64;
    assert!((inside - 0.9).abs() <= 0.003, "{inside}");
}
