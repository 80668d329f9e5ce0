//! Linear probes over embeddings: closed-form ridge regression for
//! valence/arousal and softmax regression for categorical labels, plus
//! seeded k-fold cross-validation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accuracy, f1_score, r_squared, AccuracyMode, ClassificationEval, ProbeMetric, RegressionEval};
use crate::error::{Error, Result};

/// Pivot ratio under which the normal equations count as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeProbe {
    pub weights: DVector<f64>,
    pub bias: f64,
}

impl RidgeProbe {
    /// `[w_1, ..., w_d, bias]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.weights.iter().copied().chain(std::iter::once(self.bias)).collect()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (x * &self.weights).iter().map(|v| v + self.bias).collect()
    }
}

/// Minimizes `|Xw + b - y|^2 + lambda |w|^2` with the bias unpenalized.
///
/// Centering X and y removes the bias from the system, leaving the normal
/// equations `(Xc^T Xc + lambda I) w = Xc^T yc`, solved by Cholesky; then
/// `b = mean(y) - mean(X) w`.
pub fn train_ridge_probe(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeProbe> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, count: n });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let x_mean = x.row_mean();
    let y_vec = DVector::from_column_slice(y);
    let y_mean = y_vec.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y_vec.add_scalar(-y_mean);

    let mut gram = xc.transpose() * &xc;
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let rhs = xc.transpose() * yc;
    let scale = gram.diagonal().amax();
    let chol = Cholesky::new(gram).ok_or(Error::SingularSystem)?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v * v)
        .fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot <= SINGULAR_PIVOT * scale {
        return Err(Error::SingularSystem);
    }
    let weights = chol.solve(&rhs);
    let bias = y_mean - (x_mean * &weights)[(0, 0)];
    Ok(RidgeProbe { weights, bias })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            epochs: 500,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxProbe {
    /// `k x (d + 1)`; the last column is the bias.
    pub weights: DMatrix<f64>,
    /// Training cross-entropy before the first step and after every epoch.
    pub loss_history: Vec<f64>,
}

impl SoftmaxProbe {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        with_bias_column(x) * self.weights.transpose()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        self.logits(x).row_iter().map(|r| r.transpose().argmax().0).collect()
    }
}

fn with_bias_column(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// Mean cross-entropy of a `k x (d + 1)` weight matrix on `(x, labels)` and
/// its gradient with respect to the weights.
pub fn softmax_loss_and_grad(weights: &DMatrix<f64>, x: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let xb = with_bias_column(x);
    let n = xb.nrows();
    let mut probs = &xb * weights.transpose();
    let mut loss = 0.0;
    for (i, mut row) in probs.row_iter_mut().enumerate() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let z = row.sum();
        row /= z;
        loss -= row[labels[i]].max(f64::MIN_POSITIVE).ln();
        row[labels[i]] -= 1.0;
    }
    // probs now holds P - Y
    let grad = probs.transpose() * xb / n as f64;
    (loss / n as f64, grad)
}

/// Multinomial logistic regression by full-batch gradient descent.
///
/// Labels are `0..k`; every class must appear and `k >= 2`. A step that
/// would raise the loss is retried with half the step size, so the loss
/// history never increases.
pub fn train_softmax_probe(x: &DMatrix<f64>, labels: &[usize], config: &SoftmaxConfig) -> Result<SoftmaxProbe> {
    let (n, d) = x.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 classes, found {k}")));
    }
    let mut present = vec![false; k];
    for &l in labels {
        present[l] = true;
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(Error::DegenerateInput(format!("class {missing} has no examples")));
    }

    let mut weights = DMatrix::zeros(k, d + 1);
    let (mut loss, mut grad) = softmax_loss_and_grad(&weights, x, labels);
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(loss);
    let mut step = config.learning_rate;
    for _ in 0..config.epochs {
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &weights - &grad * step;
            let (trial_loss, trial_grad) = softmax_loss_and_grad(&trial, x, labels);
            if trial_loss <= loss {
                weights = trial;
                loss = trial_loss;
                grad = trial_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
        if !accepted {
            break;
        }
    }
    Ok(SoftmaxProbe {
        weights,
        loss_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub lambda: f64,
    pub softmax: SoftmaxConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 42,
            lambda: 1.0,
            softmax: SoftmaxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// Shuffled k-fold split; returns the test indices of each fold.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (i, idx) in order.into_iter().enumerate() {
        out[i % folds].push(idx);
    }
    out
}

/// Like [`kfold_indices`] but deals each class out across folds separately,
/// so every fold sees every class in proportion.
pub fn stratified_kfold_indices(labels: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            out[next % folds].push(idx);
            next += 1;
        }
    }
    out
}

/// Column-wise z-scoring fitted on `train`, applied to both.
fn standardize(train: &DMatrix<f64>, test: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mean = train.row_mean();
    let std = train.row_variance().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let apply = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut row in out.row_iter_mut() {
            row -= &mean;
            row.component_div_assign(&std);
        }
        out
    };
    (apply(train), apply(test))
}

fn split(x: &DMatrix<f64>, test: &[usize]) -> (Vec<usize>, DMatrix<f64>, DMatrix<f64>) {
    let mut is_test = vec![false; x.nrows()];
    for &i in test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..x.nrows()).filter(|&i| !is_test[i]).collect();
    let (tr, te) = standardize(&x.select_rows(train.iter()), &x.select_rows(test.iter()));
    (train, tr, te)
}

fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "cannot make {folds} folds from {n} examples"
        )));
    }
    Ok(())
}

fn summarize(fold_scores: Vec<f64>) -> CvResult {
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    CvResult { fold_scores, mean }
}

/// k-fold R^2 of the ridge probe.
pub fn cross_validate_regression(x: &DMatrix<f64>, y: &[f64], config: &CvConfig) -> Result<CvResult> {
    check_folds(x.nrows(), config.folds)?;
    let mut scores = Vec::with_capacity(config.folds);
    for test in kfold_indices(x.nrows(), config.folds, config.seed) {
        let (train, x_train, x_test) = split(x, &test);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let probe = train_ridge_probe(&x_train, &y_train, config.lambda)?;
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        scores.push(r_squared(&RegressionEval::new(y_test, probe.predict(&x_test))?)?);
    }
    Ok(summarize(scores))
}

/// Stratified k-fold score of the softmax probe under a categorical metric.
pub fn cross_validate_classification(
    x: &DMatrix<f64>,
    labels: &[usize],
    metric: ProbeMetric,
    config: &CvConfig,
) -> Result<CvResult> {
    check_folds(x.nrows(), config.folds)?;
    if metric.is_regression() {
        return Err(Error::InvalidArgument("r2 is a regression metric".into()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    for class in 0..k {
        if labels.iter().filter(|&&l| l == class).count() < 2 {
            return Err(Error::DegenerateInput(format!(
                "class {class} needs at least 2 examples for cross-validation"
            )));
        }
    }
    let mut scores = Vec::with_capacity(config.folds);
    for test in stratified_kfold_indices(labels, config.folds, config.seed) {
        let (train, x_train, x_test) = split(x, &test);
        let l_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let probe = train_softmax_probe(&x_train, &l_train, &config.softmax)?;
        let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let eval = ClassificationEval::new(truth, probe.predict(&x_test))?;
        scores.push(match metric {
            ProbeMetric::Wa => accuracy(&eval, AccuracyMode::Weighted),
            ProbeMetric::Ua => accuracy(&eval, AccuracyMode::Unweighted),
            ProbeMetric::F1 => f1_score(&eval),
            ProbeMetric::R2 => unreachable!(),
        });
    }
    Ok(summarize(scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_interpolates_exact_data() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 1.0, -1.0, 3.0, 0.5, -2.0]);
        let w = DVector::from_column_slice(&[1.5, -0.5]);
        let y: Vec<f64> = (&x * &w).iter().map(|v| v + 0.25).collect();
        let probe = train_ridge_probe(&x, &y, 0.0).unwrap();
        assert!((probe.weights - w).amax() < 1e-8);
        assert!((probe.bias - 0.25).abs() < 1e-8);
    }

    #[test]
    fn ridge_one_dimensional_hand_case() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let probe = train_ridge_probe(&x, &[0.0, 1.0, 2.0], 0.0).unwrap();
        assert_eq!(probe.to_vec().len(), 2);
        assert!((probe.weights[0] - 1.0).abs() < 1e-12);
        assert!(probe.bias.abs() < 1e-12);
    }

    #[test]
    fn ridge_huge_lambda_shrinks_to_mean() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, -1.0, 0.0, 0.5, 2.0, 2.0]);
        let y = [1.0, 4.0, -2.0, 3.0];
        let probe = train_ridge_probe(&x, &y, 1e9).unwrap();
        assert!(probe.weights.amax() < 1e-3);
        assert!((probe.bias - 1.5).abs() < 1e-3);
    }

    #[test]
    fn ridge_singular_without_penalty() {
        // duplicated column
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 4.0, 4.0]);
        assert!(matches!(
            train_ridge_probe(&x, &[1.0, 2.0, 3.0], 0.0),
            Err(Error::SingularSystem)
        ));
        assert!(train_ridge_probe(&x, &[1.0, 2.0, 3.0], 0.1).is_ok());
    }

    #[test]
    fn softmax_rejects_single_class() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            train_softmax_probe(&x, &[0, 0], &SoftmaxConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            train_softmax_probe(&x, &[0, 2], &SoftmaxConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn softmax_separates_toy_data() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            let (c, x0) = if i % 2 == 0 { (0, -1.0 - t) } else { (1, 1.0 + t) };
            rows.extend_from_slice(&[x0, (t * 7.0).sin()]);
            labels.push(c);
        }
        let x = DMatrix::from_row_slice(20, 2, &rows);
        let probe = train_softmax_probe(
            &x,
            &labels,
            &SoftmaxConfig {
                epochs: 300,
                learning_rate: 1.0,
            },
        )
        .unwrap();
        assert_eq!(probe.predict(&x), labels);
        for w in probe.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
    }

    #[test]
    fn bias_column_is_appended() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let xb = with_bias_column(&x);
        assert_eq!(xb, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 1.0, 3.0, 4.0, 1.0]));
    }

    #[test]
    fn folds_partition_indices() {
        let folds = kfold_indices(23, 5, 42);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, kfold_indices(23, 5, 42));

        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        for fold in stratified_kfold_indices(&labels, 5, 42) {
            for class in 0..3 {
                assert_eq!(fold.iter().filter(|&&i| labels[i] == class).count(), 2);
            }
        }
    }

    #[test]
    fn cross_validation_runs() {
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |r, c| ((r * 7 + c * 13) % 17) as f64 / 17.0);
        let y: Vec<f64> = (0..n).map(|r| 2.0 * x[(r, 0)] - x[(r, 2)]).collect();
        let res = cross_validate_regression(
            &x,
            &y,
            &CvConfig {
                lambda: 1e-6,
                ..CvConfig::default()
            },
        )
        .unwrap();
        assert_eq!(res.fold_scores.len(), 5);
        assert!(res.mean > 0.999);

        let labels: Vec<usize> = (0..n).map(|r| usize::from(y[r] > 0.5)).collect();
        let res = cross_validate_classification(&x, &labels, ProbeMetric::Wa, &CvConfig::default()).unwrap();
        assert!(res.mean > 0.8, "{res:?}");
    }
}
