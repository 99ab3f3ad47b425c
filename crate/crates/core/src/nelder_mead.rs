//! Derivative-free simplex minimization (Nelder–Mead).
//!
//! The implementation follows the classical reflection / expansion /
//! contraction / shrink scheme with fixed coefficients. Termination requires
//! both the simplex diameter and the spread of vertex values to fall below
//! their tolerances, so flat plateaus alone do not stop the search.

use crate::error::{Error, Result};

/// An objective of fixed dimension.
///
/// `evaluate` must be deterministic. Callers that need constraints should
/// return a large finite penalty outside the feasible region.
pub struct ObjectiveSpec<F> {
    pub dimension: usize,
    pub evaluate: F,
}

impl<F> ObjectiveSpec<F>
where
    F: Fn(&[f64]) -> f64,
{
    pub fn new(dimension: usize, evaluate: F) -> Self {
        Self {
            dimension,
            evaluate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// Evaluation budget; `None` means `200 * dimension`.
    pub max_evaluations: Option<usize>,
    /// Initial vertex offset as a fraction of the coordinate's magnitude.
    pub step_fraction: f64,
    /// Initial vertex offset used for coordinates that are exactly zero.
    pub zero_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tolerance: 1e-8,
            f_tolerance: 1e-10,
            max_evaluations: None,
            step_fraction: 0.05,
            zero_step: 1e-4,
        }
    }
}

impl SimplexOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.reflection,
            self.expansion,
            self.contraction,
            self.shrink,
            self.step_fraction,
            self.zero_step,
        ];
        if positive.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("simplex coefficients and steps must be positive"));
        }
        if self.expansion <= self.reflection {
            return Err(Error::invalid("expansion coefficient must exceed reflection"));
        }
        if self.contraction >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::invalid("contraction and shrink must lie in (0, 1)"));
        }
        if !(self.x_tolerance >= 0.0 && self.f_tolerance >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        Ok(())
    }

    pub fn budget(&self, dimension: usize) -> usize {
        self.max_evaluations.unwrap_or(200 * dimension)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Counter<'a, F> {
    f: &'a F,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        // NaN would break the vertex ordering.
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `obj` starting from `x0`.
pub fn minimize<F>(obj: &ObjectiveSpec<F>, x0: &[f64], opts: &SimplexOptions) -> Result<MinimizeResult>
where
    F: Fn(&[f64]) -> f64,
{
    let n = obj.dimension;
    if n == 0 {
        return Err(Error::invalid("objective dimension must be at least 1"));
    }
    if x0.len() != n {
        return Err(Error::invalid(format!(
            "starting point has length {}, objective dimension is {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("starting point has non-finite components"));
    }
    opts.validate()?;
    let budget = opts.budget(n);

    let mut counter = Counter {
        f: &obj.evaluate,
        evaluations: 0,
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    vertices.push(x0.to_vec());
    values.push(counter.eval(x0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if x0[i] == 0.0 {
            opts.zero_step
        } else {
            opts.step_fraction * x0[i].abs()
        };
        values.push(counter.eval(&v));
        vertices.push(v);
    }

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut converged = false;

    loop {
        let (best, worst, second) = rank(&values);

        let diameter = vertices
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        let spread = values
            .iter()
            .map(|v| (v - values[best]).abs())
            .fold(0.0_f64, f64::max);
        // An all-infinite simplex has NaN spread; treat it as unconverged.
        if diameter <= opts.x_tolerance && spread <= opts.f_tolerance {
            converged = true;
            break;
        }
        if counter.evaluations >= budget {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (i, v) in vertices.iter().enumerate() {
            if i != worst {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x;
                }
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        // Reflection.
        along(&centroid, &vertices[worst], -opts.reflection, &mut trial);
        let f_reflect = counter.eval(&trial);

        if f_reflect < values[best] {
            along(&centroid, &trial, opts.expansion, &mut trial2);
            let f_expand = counter.eval(&trial2);
            if f_expand < f_reflect {
                vertices[worst].copy_from_slice(&trial2);
                values[worst] = f_expand;
            } else {
                vertices[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second] {
            vertices[worst].copy_from_slice(&trial);
            values[worst] = f_reflect;
            continue;
        }

        let accepted = if f_reflect < values[worst] {
            // Outside contraction.
            along(&centroid, &trial, opts.contraction, &mut trial2);
            let f_contract = counter.eval(&trial2);
            (f_contract <= f_reflect).then_some(f_contract)
        } else {
            // Inside contraction.
            along(&centroid, &vertices[worst], opts.contraction, &mut trial2);
            let f_contract = counter.eval(&trial2);
            (f_contract < values[worst]).then_some(f_contract)
        };
        if let Some(f) = accepted {
            vertices[worst].copy_from_slice(&trial2);
            values[worst] = f;
            continue;
        }

        // Shrink toward the best vertex.
        let anchor = vertices[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for (x, a) in vertices[i].iter_mut().zip(&anchor) {
                *x = a + opts.shrink * (*x - a);
            }
            values[i] = counter.eval(&vertices[i]);
        }
    }

    let (best, _, _) = rank(&values);
    Ok(MinimizeResult {
        point: vertices.swap_remove(best),
        value: values[best],
        evaluations: counter.evaluations,
        converged,
    })
}

/// `out = from + coeff * (from - to)` expressed as a move from `from` along `to - from`.
fn along(from: &[f64], to: &[f64], coeff: f64, out: &mut [f64]) {
    for ((o, f), t) in out.iter_mut().zip(from).zip(to) {
        *o = f + coeff * (t - f);
    }
}

/// Returns (best, worst, second worst). Ties resolve to the lowest index.
fn rank(values: &[f64]) -> (usize, usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
        if v > values[worst] {
            worst = i;
        }
    }
    let mut second = if worst == 0 { 1 } else { 0 };
    for (i, &v) in values.iter().enumerate() {
        if i != worst && v > values[second] {
            second = i;
        }
    }
    (best, worst, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run<F: Fn(&[f64]) -> f64>(n: usize, f: F, x0: &[f64]) -> MinimizeResult {
        minimize(&ObjectiveSpec::new(n, f), x0, &SimplexOptions::default()).unwrap()
    }

    #[test]
    fn quadratic_bowl() {
        let r = run(2, |x| x.iter().map(|v| (v - 3.0).powi(2)).sum(), &[0.0, 0.0]);
        assert!(r.converged);
        for v in &r.point {
            assert!((v - 3.0).abs() < 1e-6, "{:?}", r.point);
        }
    }

    #[test]
    fn rosenbrock() {
        let r = run(
            2,
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!((r.point[0] - 1.0).abs() < 1e-4 && (r.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn constant_objective_converges() {
        let r = run(1, |_| 7.0, &[0.0]);
        assert_eq!(r.value, 7.0);
        assert!(r.converged);
    }

    #[test]
    fn rejects_bad_start() {
        let obj = ObjectiveSpec::new(2, |x: &[f64]| x[0]);
        let opts = SimplexOptions::default();
        assert!(matches!(
            minimize(&obj, &[f64::NAN, 0.0], &opts),
            Err(Error::InvalidInput(_))
        ));
        let empty = ObjectiveSpec::new(0, |_: &[f64]| 0.0);
        assert!(matches!(minimize(&empty, &[], &opts), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_coefficients() {
        let opts = SimplexOptions {
            expansion: 0.9,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
        let opts = SimplexOptions {
            shrink: 1.0,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
    }

    #[test]
    fn worst_tie_breaks_to_lowest_index() {
        assert_eq!(rank(&[1.0, 3.0, 3.0]), (0, 1, 2));
        assert_eq!(rank(&[2.0, 2.0, 2.0]), (0, 0, 1));
    }

    #[test]
    fn budget_is_respected() {
        let opts = SimplexOptions {
            max_evaluations: Some(50),
            ..Default::default()
        };
        let obj = ObjectiveSpec::new(4, |x: &[f64]| {
            x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum()
        });
        let r = minimize(&obj, &[1.0, -2.0, 3.0, 0.5], &opts).unwrap();
        assert!(r.evaluations <= 50 + 4 + 1);
        assert!(!r.converged);
    }
}
