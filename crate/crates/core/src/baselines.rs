//! Regression-style uncertainty baselines and the training losses.
//!
//! Ensembles and MC dropout both reduce a stack of member predictions to a
//! mean and a population variance, then summarize as a Gaussian. The Gaussian
//! head predicts a mean and a log-variance. The quantile head predicts the
//! 5th and 95th percentiles directly. Losses return their value together
//! with analytic gradients so an external trainer can consume them.

use libm::erfc;

use crate::error::{Error, Result};
use crate::raster::{GripSummary, GripSummaryRaster, Method};

/// Log-variance is clamped to this range before exponentiation.
pub const LOG_VAR_CAP: f64 = 60.0;

pub const QUANTILE_LOW: f64 = 0.05;
pub const QUANTILE_HIGH: f64 = 0.95;

/// Floor applied to the true-class probability before taking its log.
pub const FOCAL_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStack {
    pub height: usize,
    pub width: usize,
    /// One prediction raster per member, each `height * width` long.
    pub members: Vec<Vec<f64>>,
}

impl EnsembleStack {
    pub fn new(height: usize, width: usize, members: Vec<Vec<f64>>) -> Result<Self> {
        if members.iter().any(|m| m.len() != height * width) {
            return Err(Error::invalid("ensemble members must share the raster dimensions"));
        }
        if members.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ensemble predictions must be finite"));
        }
        Ok(Self {
            height,
            width,
            members,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrediction {
    pub mu: f64,
    /// log sigma^2
    pub log_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalRaster {
    pub height: usize,
    pub width: usize,
    pub preds: Vec<NormalPrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantilePrediction {
    pub q_low: f64,
    pub q_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRaster {
    pub height: usize,
    pub width: usize,
    pub preds: Vec<QuantilePrediction>,
}

/// Per-pixel mean and population variance over the members.
pub fn ensemble_stats(stack: &EnsembleStack) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = stack.members.len();
    if m < 2 {
        return Err(Error::invalid(format!("an ensemble needs at least 2 members, got {m}")));
    }
    let n = stack.height * stack.width;
    let mut mean = vec![0.0; n];
    for member in &stack.members {
        for (acc, v) in mean.iter_mut().zip(member) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut var = vec![0.0; n];
    for member in &stack.members {
        for ((acc, v), mu) in var.iter_mut().zip(member).zip(&mean) {
            *acc += (mu - v) * (mu - v);
        }
    }
    var.iter_mut().for_each(|v| *v /= m as f64);
    Ok((mean, var))
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal cdf.
///
/// Rational initial guess (Acklam) refined by Halley steps on the
/// erfc-based cdf.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut z = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    for _ in 0..3 {
        let e = normal_cdf(z) - p;
        let u = e * sqrt_2pi * (0.5 * z * z).exp();
        z -= u / (1.0 + 0.5 * z * u);
    }
    Ok(z)
}

fn gaussian_pixel(mu: f64, sigma: f64, z_low: f64, z_high: f64) -> GripSummary {
    GripSummary {
        mean: mu,
        median: mu,
        p05: mu + z_low * sigma,
        p95: mu + z_high * sigma,
        sigma_low: mu - sigma,
        sigma_high: mu + sigma,
    }
}

fn interval_z() -> (f64, f64) {
    (
        normal_quantile(QUANTILE_LOW).expect("valid level"),
        normal_quantile(QUANTILE_HIGH).expect("valid level"),
    )
}

pub fn gaussian_summary(raster: &NormalRaster) -> Result<GripSummaryRaster> {
    if raster.preds.len() != raster.height * raster.width {
        return Err(Error::invalid("normal raster size mismatch"));
    }
    let (z_low, z_high) = interval_z();
    let pixels = raster
        .preds
        .iter()
        .map(|p| {
            if !(p.mu.is_finite() && p.log_var.is_finite()) {
                return Err(Error::invalid("normal prediction has non-finite fields"));
            }
            let sigma = (0.5 * p.log_var.clamp(-LOG_VAR_CAP, LOG_VAR_CAP)).exp();
            Ok(gaussian_pixel(p.mu, sigma, z_low, z_high))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GripSummaryRaster::full(raster.height, raster.width, pixels).with_method(Method::Gaussian))
}

fn stack_summary(stack: &EnsembleStack, method: Method) -> Result<GripSummaryRaster> {
    let (mean, var) = ensemble_stats(stack)?;
    let (z_low, z_high) = interval_z();
    let pixels = mean
        .iter()
        .zip(&var)
        .map(|(mu, v)| gaussian_pixel(*mu, v.sqrt(), z_low, z_high))
        .collect();
    Ok(GripSummaryRaster::full(stack.height, stack.width, pixels).with_method(method))
}

pub fn ensemble_summary(stack: &EnsembleStack) -> Result<GripSummaryRaster> {
    stack_summary(stack, Method::Ensemble)
}

pub fn mc_dropout_summary(stack: &EnsembleStack) -> Result<GripSummaryRaster> {
    stack_summary(stack, Method::McDropout)
}

/// Quantile-head summary. Median and sigma bounds are not available; crossed
/// pairs are swapped and flagged.
pub fn quantile_summary(raster: &QuantileRaster) -> Result<GripSummaryRaster> {
    if raster.preds.len() != raster.height * raster.width {
        return Err(Error::invalid("quantile raster size mismatch"));
    }
    let mut crossed = Vec::with_capacity(raster.preds.len());
    let mut pixels = Vec::with_capacity(raster.preds.len());
    for p in &raster.preds {
        if !(p.q_low.is_finite() && p.q_high.is_finite()) {
            return Err(Error::invalid("quantile prediction has non-finite fields"));
        }
        let cross = p.q_low > p.q_high;
        let (lo, hi) = if cross { (p.q_high, p.q_low) } else { (p.q_low, p.q_high) };
        crossed.push(cross);
        pixels.push(GripSummary {
            mean: 0.5 * (lo + hi),
            p05: lo,
            p95: hi,
            ..GripSummary::NAN
        });
    }
    let mut out = GripSummaryRaster::full(raster.height, raster.width, pixels).with_method(Method::Quantile);
    out.has_median = false;
    out.has_sigma = false;
    out.crossed = crossed;
    Ok(out)
}

fn check_lengths(name: &str, lens: &[usize]) -> Result<usize> {
    let n = lens[0];
    if n == 0 {
        return Err(Error::invalid(format!("{name}: empty input")));
    }
    if lens.iter().any(|l| *l != n) {
        return Err(Error::invalid(format!("{name}: inputs differ in length")));
    }
    Ok(n)
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("{name}: weights must be finite and non-negative")));
    }
    Ok(())
}

/// `(1/N) sum w (y - f)^2` and its gradient with respect to `f`.
pub fn weighted_mse_loss(y: &[f64], f: &[f64], w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = check_lengths("weighted mse", &[y.len(), f.len(), w.len()])? as f64;
    check_weights("weighted mse", w)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for ((yi, fi), wi) in y.iter().zip(f).zip(w) {
        let r = yi - fi;
        loss += wi * r * r;
        grad.push(-2.0 / n * wi * r);
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNll {
    pub loss: f64,
    pub grad_mu: Vec<f64>,
    pub grad_log_var: Vec<f64>,
}

/// `(1/N) sum w [0.5 exp(-s) (y - mu)^2 + 0.5 s]` with gradients in `mu` and `s`.
pub fn gaussian_nll_loss(y: &[f64], mu: &[f64], s: &[f64], w: &[f64]) -> Result<GaussianNll> {
    let n = check_lengths("gaussian nll", &[y.len(), mu.len(), s.len(), w.len()])? as f64;
    check_weights("gaussian nll", w)?;
    let mut out = GaussianNll {
        loss: 0.0,
        grad_mu: Vec::with_capacity(y.len()),
        grad_log_var: Vec::with_capacity(y.len()),
    };
    for i in 0..y.len() {
        let r = y[i] - mu[i];
        let inv_var = (-s[i]).exp();
        out.loss += w[i] * (0.5 * inv_var * r * r + 0.5 * s[i]);
        out.grad_mu.push(-w[i] / n * inv_var * r);
        out.grad_log_var.push(w[i] / n * (-0.5 * inv_var * r * r + 0.5));
    }
    out.loss /= n;
    Ok(out)
}

/// Pinball loss for quantile level `alpha`.
pub fn pinball(y: f64, yhat: f64, alpha: f64) -> f64 {
    let d = y - yhat;
    if d > 0.0 {
        alpha * d
    } else {
        (1.0 - alpha) * (yhat - y)
    }
}

/// Derivative of `pinball` in `yhat`; at the kink the lower branch applies.
pub fn pinball_grad(y: f64, yhat: f64, alpha: f64) -> f64 {
    if y - yhat > 0.0 {
        -alpha
    } else {
        1.0 - alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileLoss {
    pub loss: f64,
    pub grad_low: Vec<f64>,
    pub grad_high: Vec<f64>,
}

/// Weighted sum of the 5% and 95% pinball losses.
pub fn quantile_loss(y: &[f64], q_low: &[f64], q_high: &[f64], w: &[f64]) -> Result<QuantileLoss> {
    let n = check_lengths("quantile loss", &[y.len(), q_low.len(), q_high.len(), w.len()])? as f64;
    check_weights("quantile loss", w)?;
    let mut out = QuantileLoss {
        loss: 0.0,
        grad_low: Vec::with_capacity(y.len()),
        grad_high: Vec::with_capacity(y.len()),
    };
    for i in 0..y.len() {
        out.loss += w[i] * (pinball(y[i], q_low[i], QUANTILE_LOW) + pinball(y[i], q_high[i], QUANTILE_HIGH));
        out.grad_low.push(w[i] / n * pinball_grad(y[i], q_low[i], QUANTILE_LOW));
        out.grad_high.push(w[i] / n * pinball_grad(y[i], q_high[i], QUANTILE_HIGH));
    }
    out.loss /= n;
    Ok(out)
}

/// Focal loss for one pixel: `w * -(1 - p_y)^gamma * ln p_y`, and its
/// derivative with respect to `p_y`.
pub fn focal_loss(class_probs: &[f64], y: usize, gamma: f64, w: f64) -> Result<(f64, f64)> {
    if y >= class_probs.len() {
        return Err(Error::invalid(format!(
            "class index {y} outside 0..{}",
            class_probs.len()
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("focal gamma must be finite and non-negative"));
    }
    let p = class_probs[y].clamp(FOCAL_PROB_FLOOR, 1.0);
    let q = 1.0 - p;
    let log_p = p.ln();
    let loss = -w * q.powf(gamma) * log_p;
    let grad = if q == 0.0 {
        // Limit of gamma * q^(gamma-1) * ln p as p -> 1 is zero.
        if gamma == 0.0 {
            -w
        } else {
            0.0
        }
    } else {
        w * (gamma * q.powf(gamma - 1.0) * log_p - q.powf(gamma) / p)
    };
    Ok((loss, grad))
}

/// Mean focal loss over pixels, with per-pixel gradients in the true-class probability.
pub fn focal_loss_batch(
    probs: &[Vec<f64>],
    labels: &[usize],
    gamma: f64,
    w: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = check_lengths("focal loss", &[probs.len(), labels.len(), w.len()])? as f64;
    check_weights("focal loss", w)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(probs.len());
    for ((p, y), wi) in probs.iter().zip(labels).zip(w) {
        let (l, g) = focal_loss(p, *y, gamma, *wi)?;
        loss += l;
        grads.push(g / n);
    }
    Ok((loss / n, grads))
}
