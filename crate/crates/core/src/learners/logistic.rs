//! Multinomial logistic regression with L2 penalty, fitted by gradient
//! descent with backtracking line search from a zero start.

use serde::{Deserialize, Serialize};

use super::encode::FeatureEncoder;
use super::ClassProbs;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrHyper {
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LrHyper {
    fn default() -> Self {
        LrHyper {
            l2: 0.1,
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

/// Mean cross-entropy plus `l2/2 * ||W||^2` (intercepts unpenalized) over an
/// encoded design matrix. Parameters are laid out class-major: for each class
/// the intercept followed by one weight per encoded feature.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
    l2: f64,
}

impl LogisticObjective {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, n_classes: usize, l2: f64) -> Self {
        LogisticObjective { x, y, n_classes, l2 }
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * (self.width() + 1)
    }

    fn width(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, false).0
    }

    pub fn loss_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (loss, grad) = self.evaluate(theta, true);
        (loss, grad.expect("gradient requested"))
    }

    fn evaluate(&self, theta: &[f64], with_grad: bool) -> (f64, Option<Vec<f64>>) {
        let p = self.width() + 1;
        let m = self.x.len() as f64;
        let mut loss = 0.0;
        let mut grad = with_grad.then(|| vec![0.0; theta.len()]);
        let mut z = vec![0.0; self.n_classes];
        for (row, &yi) in self.x.iter().zip(&self.y) {
            for (c, zc) in z.iter_mut().enumerate() {
                let w = &theta[c * p..(c + 1) * p];
                *zc = w[0] + w[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
            let probs = softmax(&z);
            loss -= probs[yi].max(f64::MIN_POSITIVE).ln();
            if let Some(g) = grad.as_mut() {
                for c in 0..self.n_classes {
                    let r = (probs[c] - f64::from(u8::from(c == yi))) / m;
                    let gc = &mut g[c * p..(c + 1) * p];
                    gc[0] += r;
                    for (gj, xj) in gc[1..].iter_mut().zip(row) {
                        *gj += r * xj;
                    }
                }
            }
        }
        loss /= m;
        for c in 0..self.n_classes {
            let w = &theta[c * p + 1..(c + 1) * p];
            loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
            if let Some(g) = grad.as_mut() {
                for (gj, wj) in g[c * p + 1..(c + 1) * p].iter_mut().zip(w) {
                    *gj += self.l2 * wj;
                }
            }
        }
        (loss, grad)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective value after each accepted step, starting at the zero model.
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Global class ids in ascending order.
    pub class_ids: Vec<usize>,
    /// Per class: intercept then encoded-feature weights (standardized units).
    pub weights: Vec<Vec<f64>>,
    pub encoder: FeatureEncoder,
    pub trace: FitTrace,
}

/// Per-class coefficients in original feature units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCoefficients {
    pub class_id: usize,
    pub intercept: f64,
    pub weights: Vec<(String, f64)>,
}

/// Fit on `members`. A member set with a single class yields a constant model.
pub fn lr_fit(ds: &Dataset, members: &[usize], hyper: &LrHyper) -> Result<LogisticModel> {
    if members.is_empty() {
        return Err(Error::Fit("logistic regression on an empty member set".into()));
    }
    if !(hyper.l2.is_finite() && hyper.l2 >= 0.0) {
        return Err(Error::Fit(format!("invalid l2 penalty {}", hyper.l2)));
    }
    let mut class_ids: Vec<usize> = members.iter().map(|&i| ds.label(i)).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let encoder = FeatureEncoder::fit(ds, members);
    let p = encoder.width() + 1;
    if class_ids.len() == 1 {
        return Ok(LogisticModel {
            weights: vec![vec![0.0; p]],
            class_ids,
            encoder,
            trace: FitTrace {
                iterations: 0,
                converged: true,
                gradient_norm: 0.0,
                losses: Vec::new(),
            },
        });
    }
    let x: Vec<Vec<f64>> = members.iter().map(|&i| encoder.encode(ds.row(i)).0).collect();
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite feature value".into()));
    }
    let local = |c: usize| class_ids.binary_search(&c).expect("class present");
    let y: Vec<usize> = members.iter().map(|&i| local(ds.label(i))).collect();
    let objective = LogisticObjective::new(x, y, class_ids.len(), hyper.l2);
    let (theta, trace) = minimize(&objective, hyper);
    Ok(LogisticModel {
        weights: theta.chunks(p).map(<[f64]>::to_vec).collect(),
        class_ids,
        encoder,
        trace,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn minimize(obj: &LogisticObjective, hyper: &LrHyper) -> (Vec<f64>, FitTrace) {
    let mut theta = vec![0.0; obj.n_params()];
    let (mut loss, mut grad) = obj.loss_and_gradient(&theta);
    let mut losses = vec![loss];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut gnorm = norm(&grad);
    while gnorm > hyper.tol && iterations < hyper.max_iters {
        iterations += 1;
        let g2 = gnorm * gnorm;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let trial_loss = obj.loss(&trial);
            if trial_loss <= loss - 1e-4 * step * g2 {
                theta = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        (loss, grad) = obj.loss_and_gradient(&theta);
        losses.push(loss);
        gnorm = norm(&grad);
        step = (step * 2.0).min(1e3);
    }
    let trace = FitTrace {
        iterations,
        converged: gnorm <= hyper.tol,
        gradient_norm: gnorm,
        losses,
    };
    (theta, trace)
}

impl LogisticModel {
    pub fn is_constant(&self) -> bool {
        self.class_ids.len() == 1
    }

    pub fn predict_proba(&self, row: &[f64]) -> ClassProbs {
        let (x, unseen) = self.encoder.encode(row);
        let z: Vec<f64> = self
            .weights
            .iter()
            .map(|w| w[0] + w[1..].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        ClassProbs {
            classes: self.class_ids.clone(),
            probs: softmax(&z),
            unseen_level: unseen,
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        self.predict_proba(row).argmax()
    }

    pub fn coefficients(&self) -> Vec<ClassCoefficients> {
        self.class_ids
            .iter()
            .zip(&self.weights)
            .map(|(&class_id, w)| {
                let (intercept, weights) = self.encoder.to_original_units(w[0], &w[1..]);
                ClassCoefficients {
                    class_id,
                    intercept,
                    weights: self.encoder.names().iter().cloned().zip(weights).collect(),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(sep: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..40 {
                rows.push(vec![
                    c as f64 * sep + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                labels.push(c);
            }
        }
        Dataset::from_numeric(rows, labels).unwrap()
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let ds = blobs(5.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let model = lr_fit(&ds, &all, &LrHyper { l2: 0.1, ..LrHyper::default() }).unwrap();
        let acc = all.iter().filter(|&&i| model.predict(ds.row(i)) == ds.label(i)).count();
        assert_eq!(acc, ds.n());
        assert!(model.trace.converged);
    }

    #[test]
    fn loss_decreases_monotonically() {
        let ds = blobs(1.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        for w in model.trace.losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let obj = LogisticObjective::new(x, y, 3, 0.3);
        let theta: Vec<f64> = (0..obj.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = obj.loss_and_gradient(&theta);
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (obj.loss(&up) - obj.loss(&down)) / (2.0 * h);
            let rel = (fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1e-8);
            assert!(rel <= 1e-4, "param {j}: fd {fd} vs analytic {}", g[j]);
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let ds = blobs(5.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let mut model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        for w in &mut model.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = model.predict_proba(ds.row(0));
        assert_eq!(p.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn probabilities_sum_to_one_and_shift_invariant() {
        let ds = blobs(2.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        let mut shifted = model.clone();
        for w in &mut shifted.weights {
            for (j, v) in w.iter_mut().enumerate() {
                *v += 0.7 * (j as f64 + 1.0);
            }
        }
        for i in 0..ds.n() {
            let p = model.predict_proba(ds.row(i));
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.probs.iter().all(|&v| v >= 0.0));
            assert_eq!(shifted.predict(ds.row(i)), model.predict(ds.row(i)));
        }
    }

    #[test]
    fn positive_coefficient_raises_probability() {
        let ds = blobs(3.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        let coef = model.coefficients();
        // class 1 sits at larger x0
        let w = coef[1].weights[0].1 - coef[0].weights[0].1;
        assert!(w > 0.0);
        let lo = model.predict_proba(&[1.0, 0.0]).probs[1];
        let hi = model.predict_proba(&[1.5, 0.0]).probs[1];
        assert!(hi > lo);
    }

    #[test]
    fn original_unit_coefficients_reproduce_logits() {
        let ds = blobs(2.0);
        let all: Vec<usize> = (0..ds.n()).collect();
        let model = lr_fit(&ds, &all, &LrHyper::default()).unwrap();
        let coef = model.coefficients();
        let row = [0.3, -0.4];
        let z: Vec<f64> = coef
            .iter()
            .map(|c| c.intercept + c.weights.iter().zip(&row).map(|((_, w), x)| w * x).sum::<f64>())
            .collect();
        let p = softmax(&z);
        let q = model.predict_proba(&row).probs;
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_class_is_constant() {
        let ds = Dataset::from_numeric(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 1]).unwrap();
        let model = lr_fit(&ds, &[0, 1, 2], &LrHyper::default()).unwrap();
        assert!(model.is_constant());
        assert_eq!(model.predict(&[9.0]), 1);
        assert_eq!(model.predict_proba(&[9.0]).probs, vec![1.0]);
    }

    #[test]
    fn unseen_level_is_flagged() {
        use crate::data::{Column, FeatureSchema};
        let schema = FeatureSchema::new(vec![Column::categorical("c")], "y", None).unwrap();
        let ds = Dataset::from_parts(
            schema,
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![vec!["a".into(), "b".into(), "z".into()]],
            vec![0, 1, 1],
            vec!["0".into(), "1".into()],
            None,
        )
        .unwrap();
        let model = lr_fit(&ds, &[0, 1], &LrHyper::default()).unwrap();
        let p = model.predict_proba(&[2.0]);
        assert!(p.unseen_level);
        assert!(!model.predict_proba(&[0.0]).unseen_level);
    }
}
