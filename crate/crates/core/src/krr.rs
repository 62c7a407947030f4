//! Closed-form kernel ridge regression with the identity kernel.
//!
//! The weights minimise `ρ‖w‖² + Σ_k (wᵀx_k − y_k)²` over an M×N training
//! matrix `X` with labels `y ∈ {+1, −1}`. Two equivalent solutions exist:
//!
//! * dual: `w = X (XᵀX + ρI_N)⁻¹ y`, an N×N system;
//! * primal: `w = (XXᵀ + ρI_M)⁻¹ X y`, an M×M system.
//!
//! Both are solved by Cholesky factorisation. The primal route is the
//! production path since M (14 or 28) is far smaller than N.

use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::context::ContextLabel;
use crate::error::{Error, Result};
use crate::features::{FeatureSlot, FeatureVector};

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features get unit scale, so they map to 0.
    pub fn fit(rows: &[&[f64]]) -> Self {
        let m = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..m)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Columns of `x` are training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub normalization: Option<Standardizer>,
    pub layout: Option<Vec<FeatureSlot>>,
}

impl TrainingSet {
    /// Uses `x` (M×N) as given, without normalisation.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let ts = TrainingSet {
            y: DVector::from_vec(y),
            x,
            normalization: None,
            layout: None,
        };
        ts.validate()?;
        Ok(ts)
    }

    /// Builds from row vectors, optionally z-scoring every feature with
    /// statistics of these rows.
    pub fn from_rows(rows: &[&[f64]], labels: &[f64], standardize: bool) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("training set", "no rows"));
        }
        let m = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::dimension("training row", m, r.len()));
        }
        let normalization = standardize.then(|| Standardizer::fit(rows));
        let x = match &normalization {
            Some(s) => DMatrix::from_fn(m, rows.len(), |i, k| (rows[k][i] - s.mean[i]) / s.scale[i]),
            None => DMatrix::from_fn(m, rows.len(), |i, k| rows[k][i]),
        };
        let ts = TrainingSet {
            x,
            y: DVector::from_column_slice(labels),
            normalization,
            layout: None,
        };
        ts.validate()?;
        Ok(ts)
    }

    /// Legitimate vectors labelled +1, impostors −1, z-scored.
    pub fn from_feature_vectors(legit: &[FeatureVector], impostor: &[FeatureVector]) -> Result<Self> {
        let layout = legit
            .first()
            .or(impostor.first())
            .map(|v| v.layout.clone())
            .ok_or_else(|| Error::validation("training set", "no vectors"))?;
        if legit.iter().chain(impostor).any(|v| v.layout != layout) {
            return Err(Error::validation("layout", "training vectors have mixed layouts"));
        }
        let rows: Vec<&[f64]> = legit.iter().chain(impostor).map(|v| v.values.as_slice()).collect();
        let labels: Vec<f64> = std::iter::repeat_n(1.0, legit.len())
            .chain(std::iter::repeat_n(-1.0, impostor.len()))
            .collect();
        let mut ts = Self::from_rows(&rows, &labels, true)?;
        ts.layout = Some(layout);
        Ok(ts)
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.x.ncols() != self.y.len() {
            return Err(Error::dimension("labels", self.x.ncols(), self.y.len()));
        }
        if self.x.nrows() == 0 {
            return Err(Error::validation("training set", "zero-width feature vectors"));
        }
        if self.x.ncols() < 2 {
            return Err(Error::validation("training set", "need at least 2 examples"));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("training set", "non-finite feature value"));
        }
        if let Some(v) = self.y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::validation("labels", format!("labels must be ±1, got {v}")));
        }
        if !(self.y.iter().any(|&v| v > 0.0) && self.y.iter().any(|&v| v < 0.0)) {
            return Err(Error::validation("labels", "both classes must be present"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_train: usize,
    pub solver: Solver,
    /// Unix seconds; informational only.
    pub trained_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthModel {
    pub w: Vec<f64>,
    pub rho: f64,
    /// `None` for a model trained without context gating.
    pub context: Option<ContextLabel>,
    pub layout: Option<Vec<FeatureSlot>>,
    pub normalization: Option<Standardizer>,
    pub train_meta: TrainMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("rho", format!("must be positive and finite, got {rho}")))
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Cholesky::new(a)
        .map(|c| c.solve(b))
        .ok_or(Error::NotPositiveDefinite)
}

fn finish(ts: &TrainingSet, w: DVector<f64>, rho: f64, solver: Solver) -> Result<AuthModel> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(AuthModel {
        w: w.iter().copied().collect(),
        rho,
        context: None,
        layout: ts.layout.clone(),
        normalization: ts.normalization.clone(),
        train_meta: TrainMeta {
            n_train: ts.len(),
            solver,
            trained_at: unix_now(),
        },
    })
}

/// `w = (XXᵀ + ρI_M)⁻¹ X y`. Cost is dominated by the M×N product.
pub fn train_primal(ts: &TrainingSet, rho: f64) -> Result<AuthModel> {
    check_rho(rho)?;
    let m = ts.dim();
    let mut a = &ts.x * ts.x.transpose();
    for i in 0..m {
        a[(i, i)] += rho;
    }
    let b = &ts.x * &ts.y;
    let w = spd_solve(a, &b)?;
    finish(ts, w, rho, Solver::Primal)
}

/// `w = X (XᵀX + ρI_N)⁻¹ y`.
pub fn train_dual(ts: &TrainingSet, rho: f64) -> Result<AuthModel> {
    check_rho(rho)?;
    let n = ts.len();
    let mut k = ts.x.transpose() * &ts.x;
    for i in 0..n {
        k[(i, i)] += rho;
    }
    let alpha = spd_solve(k, &ts.y)?;
    let w = &ts.x * alpha;
    finish(ts, w, rho, Solver::Dual)
}

/// Gradient of the ridge objective, `2ρw + 2X(Xᵀw − y)`.
pub fn objective_gradient(ts: &TrainingSet, w: &[f64], rho: f64) -> DVector<f64> {
    let w = DVector::from_column_slice(w);
    let residual = ts.x.transpose() * &w - &ts.y;
    (&w * rho + &ts.x * residual) * 2.0
}

/// Value of the ridge objective at `w`.
pub fn objective(ts: &TrainingSet, w: &[f64], rho: f64) -> f64 {
    let w = DVector::from_column_slice(w);
    let residual = ts.x.transpose() * &w - &ts.y;
    rho * w.norm_squared() + residual.norm_squared()
}

impl AuthModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Confidence score `CS = xᵀw` on raw values (normalisation applied here).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::dimension("auth vector", self.w.len(), x.len()));
        }
        let z = match &self.normalization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        let cs: f64 = z.iter().zip(&self.w).map(|(a, b)| a * b).sum();
        if !cs.is_finite() {
            return Err(Error::validation("auth vector", "score is not finite"));
        }
        Ok(cs)
    }

    /// As [`AuthModel::score`], additionally checking slot names.
    pub fn score_vector(&self, v: &FeatureVector) -> Result<f64> {
        if let Some(layout) = &self.layout {
            if v.dim() == layout.len() && &v.layout != layout {
                return Err(Error::validation("layout", "vector layout differs from model layout"));
            }
        }
        self.score(&v.values)
    }

    /// Accept iff the score is strictly above `threshold`.
    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<Verdict> {
        Ok(verdict(self.score(x)?, threshold))
    }
}

pub fn verdict(cs: f64, threshold: f64) -> Verdict {
    if cs > threshold {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

/// A trained binary scorer: positive means "legitimate".
pub trait Scorer: Send + Sync {
    fn score(&self, x: &[f64]) -> Result<f64>;

    fn classify(&self, x: &[f64], threshold: f64) -> Result<Verdict> {
        Ok(verdict(self.score(x)?, threshold))
    }
}

/// Something that turns labelled rows (`+1` legit, `−1` impostor) into a scorer.
pub trait Learner: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, rows: &[&[f64]], labels: &[f64]) -> Result<Box<dyn Scorer>>;
}

impl Scorer for AuthModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        AuthModel::score(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrrLearner {
    pub rho: f64,
    pub solver: Solver,
}

impl KrrLearner {
    pub fn new(rho: f64) -> Self {
        KrrLearner {
            rho,
            solver: Solver::Primal,
        }
    }
}

impl Learner for KrrLearner {
    fn name(&self) -> &str {
        "krr"
    }

    fn fit(&self, rows: &[&[f64]], labels: &[f64]) -> Result<Box<dyn Scorer>> {
        let ts = TrainingSet::from_rows(rows, labels, true)?;
        let model = match self.solver {
            Solver::Primal => train_primal(&ts, self.rho)?,
            Solver::Dual => train_dual(&ts, self.rho)?,
        };
        Ok(Box::new(model))
    }
}

/// Minimum-norm least squares, the `ρ → 0` limit of ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegression {
    pub w: Vec<f64>,
    pub normalization: Option<Standardizer>,
}

impl LinearRegression {
    pub fn fit(ts: &TrainingSet) -> Result<Self> {
        let xt = ts.x.transpose();
        let svd = xt.svd(true, true);
        let w = svd
            .solve(&ts.y, 1e-12 * svd.singular_values.max().max(1.0))
            .map_err(|e| Error::validation("linear regression", e.to_string()))?;
        Ok(LinearRegression {
            w: w.iter().copied().collect(),
            normalization: ts.normalization.clone(),
        })
    }
}

impl Scorer for LinearRegression {
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::dimension("auth vector", self.w.len(), x.len()));
        }
        let z = match &self.normalization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        Ok(z.iter().zip(&self.w).map(|(a, b)| a * b).sum())
    }
}

/// Gaussian naive Bayes; the score is the log posterior odds of "legitimate".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    /// Index 0: legitimate (+1), index 1: impostor (−1).
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

pub const NB_VAR_FLOOR: f64 = 1e-9;

impl GaussianNaiveBayes {
    pub fn fit(rows: &[&[f64]], labels: &[f64]) -> Result<Self> {
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::validation("training set", "rows and labels must match"));
        }
        let m = rows[0].len();
        let mut means = [vec![0.0; m], vec![0.0; m]];
        let mut vars = [vec![0.0; m], vec![0.0; m]];
        let mut counts = [0usize; 2];
        for (r, &l) in rows.iter().zip(labels) {
            let c = usize::from(l < 0.0);
            counts[c] += 1;
            for j in 0..m {
                means[c][j] += r[j];
            }
        }
        if counts.contains(&0) {
            return Err(Error::validation("labels", "both classes must be present"));
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
        }
        for (r, &l) in rows.iter().zip(labels) {
            let c = usize::from(l < 0.0);
            for j in 0..m {
                vars[c][j] += (r[j] - means[c][j]).powi(2);
            }
        }
        let mut floored = false;
        for c in 0..2 {
            for v in vars[c].iter_mut() {
                *v /= counts[c] as f64;
                if *v < NB_VAR_FLOOR {
                    *v = NB_VAR_FLOOR;
                    floored = true;
                }
            }
        }
        if floored {
            log::warn!("naive Bayes: degenerate feature variance floored at {NB_VAR_FLOOR:e}");
        }
        let n = rows.len() as f64;
        Ok(GaussianNaiveBayes {
            means,
            vars,
            log_priors: [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()],
        })
    }

    fn log_likelihood(&self, c: usize, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.means[c].iter().zip(&self.vars[c]))
            .map(|(v, (m, s2))| -0.5 * ((v - m).powi(2) / s2 + (2.0 * std::f64::consts::PI * s2).ln()))
            .sum()
    }
}

impl Scorer for GaussianNaiveBayes {
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.means[0].len() {
            return Err(Error::dimension("auth vector", self.means[0].len(), x.len()));
        }
        Ok(self.log_priors[0] + self.log_likelihood(0, x) - self.log_priors[1] - self.log_likelihood(1, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    LinearRegression,
    GaussianNaiveBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineLearner(pub BaselineKind);

impl Learner for BaselineLearner {
    fn name(&self) -> &str {
        match self.0 {
            BaselineKind::LinearRegression => "linear-regression",
            BaselineKind::GaussianNaiveBayes => "naive-bayes",
        }
    }

    fn fit(&self, rows: &[&[f64]], labels: &[f64]) -> Result<Box<dyn Scorer>> {
        match self.0 {
            BaselineKind::LinearRegression => {
                let ts = TrainingSet::from_rows(rows, labels, true)?;
                Ok(Box::new(LinearRegression::fit(&ts)?))
            }
            BaselineKind::GaussianNaiveBayes => Ok(Box::new(GaussianNaiveBayes::fit(rows, labels)?)),
        }
    }
}

/// Returns a fixed score regardless of input; a test stub for harnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLearner(pub f64);

struct ConstantScorer(f64);

impl Scorer for ConstantScorer {
    fn score(&self, _x: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

impl Learner for ConstantLearner {
    fn name(&self) -> &str {
        "constant"
    }

    fn fit(&self, _rows: &[&[f64]], _labels: &[f64]) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(ConstantScorer(self.0)))
    }
}
