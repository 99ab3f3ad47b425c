#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadgrip::mixture::{build_mixture_table, MixtureTable};
use roadgrip::{PiecewiseLinearDensity, SurfaceState};

pub const LEVELS: [f64; 5] = [0.05, 0.158655, 0.5, 0.841345, 0.95];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random continuous density on a sub-range of [0, 1] with 2..=12 knots.
/// About one knot value in five is zero, so plateaus and isolated zeros occur.
pub fn random_density(rng: &mut ChaCha8Rng, class: &str) -> PiecewiseLinearDensity {
    loop {
        let n = rng.random_range(2..=12);
        let start = rng.random_range(0.0..0.5);
        let mut knots = vec![start];
        for _ in 1..n {
            let step = rng.random_range(0.005..0.1);
            knots.push(knots.last().unwrap() + step);
        }
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) })
            .collect();
        if let Ok(d) = PiecewiseLinearDensity::build(class, knots, values, true) {
            return d;
        }
    }
}

pub fn random_class_densities(rng: &mut ChaCha8Rng) -> Vec<PiecewiseLinearDensity> {
    SurfaceState::ALL.iter().map(|s| random_density(rng, s.name())).collect()
}

pub fn random_table(rng: &mut ChaCha8Rng) -> MixtureTable {
    build_mixture_table(&random_class_densities(rng)).unwrap()
}

/// Random simplex vector; some entries are exactly zero.
pub fn random_probs(rng: &mut ChaCha8Rng) -> [f64; 5] {
    loop {
        let mut p = [0.0; 5];
        for v in p.iter_mut() {
            *v = if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() };
        }
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            p.iter_mut().for_each(|v| *v /= s);
            return p;
        }
    }
}

/// Round-trip check with the plateau convention: either the cdf matches `p`,
/// or `q` is the left edge of a zero-density stretch on which the cdf is at
/// least `p`.
pub fn round_trip_ok(d: &PiecewiseLinearDensity, p: f64, tol: f64) -> Result<(), String> {
    let q = d.quantile(p).map_err(|e| e.to_string())?;
    let c = d.cdf(q);
    if (c - p).abs() <= tol {
        return Ok(());
    }
    if c >= p && d.pdf(q) == 0.0 {
        return Ok(());
    }
    Err(format!("p={p} q={q} cdf={c} diff={:e}", c - p))
}

pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Standard error of a binomial proportion, in percent.
pub fn binomial_se_pct(p: f64, n: usize) -> f64 {
    100.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Worst relative error between analytic and central-difference gradients
/// over `points` random evaluation points, per loss.
pub fn gradient_suite(seed: u64, points: usize) -> Vec<(&'static str, f64)> {
    use roadgrip::baselines::*;
    const H: f64 = 1e-6;
    let mut r = rng(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..points {
        let n = r.random_range(1..6);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0.1..0.8)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
        let i = r.random_range(0..n);

        let f: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let (_, g) = weighted_mse_loss(&y, &f, &w).unwrap();
        let num = central_diff(|x| { let mut v = f.clone(); v[i] = x; weighted_mse_loss(&y, &v, &w).unwrap().0 }, f[i], H);
        worst[0] = worst[0].max(rel_err(g[i], num));

        let mu: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.random_range(-6.0..1.0)).collect();
        let nll = gaussian_nll_loss(&y, &mu, &s, &w).unwrap();
        let num_mu = central_diff(|x| { let mut v = mu.clone(); v[i] = x; gaussian_nll_loss(&y, &v, &s, &w).unwrap().loss }, mu[i], H);
        let num_s = central_diff(|x| { let mut v = s.clone(); v[i] = x; gaussian_nll_loss(&y, &mu, &v, &w).unwrap().loss }, s[i], H);
        worst[1] = worst[1].max(rel_err(nll.grad_mu[i], num_mu));
        worst[2] = worst[2].max(rel_err(nll.grad_log_var[i], num_s));

        // Keep predictions away from the kink, where no derivative exists.
        let away = |r: &mut ChaCha8Rng, y: f64| loop {
            let q = r.random_range(0.0..1.0);
            if (q - y).abs() > 1e-3 {
                break q;
            }
        };
        let ql: Vec<f64> = y.iter().map(|v| away(&mut r, *v)).collect();
        let qh: Vec<f64> = y.iter().map(|v| away(&mut r, *v)).collect();
        let ql_loss = quantile_loss(&y, &ql, &qh, &w).unwrap();
        let num_l = central_diff(|x| { let mut v = ql.clone(); v[i] = x; quantile_loss(&y, &v, &qh, &w).unwrap().loss }, ql[i], H);
        let num_h = central_diff(|x| { let mut v = qh.clone(); v[i] = x; quantile_loss(&y, &ql, &v, &w).unwrap().loss }, qh[i], H);
        worst[3] = worst[3].max(rel_err(ql_loss.grad_low[i], num_l).max(rel_err(ql_loss.grad_high[i], num_h)));

        let mut probs = random_probs(&mut r);
        let k = r.random_range(0..5);
        probs[k] = r.random_range(0.02..0.98);
        let gamma = r.random_range(0.0..3.0);
        let (_, g) = focal_loss(&probs, k, gamma, w[0]).unwrap();
        let num = central_diff(|x| { let mut v = probs; v[k] = x; focal_loss(&v, k, gamma, w[0]).unwrap().0 }, probs[k], H);
        worst[4] = worst[4].max(rel_err(g, num));
    }
    vec![
        ("weighted_mse", worst[0]),
        ("gaussian_nll_mu", worst[1]),
        ("gaussian_nll_log_var", worst[2]),
        ("pinball_pair", worst[3]),
        ("focal", worst[4]),
    ]
}
