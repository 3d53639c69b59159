//! Linear discriminant analysis with a shared (pooled) covariance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FeatureVector;

pub const MODEL_VERSION: u64 = 1;
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Trained discriminants `g_k(x) = w_k · x + b_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub version: u64,
    pub labels: Vec<String>,
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub ridge: f64,
    pub feature_order: Vec<String>,
    #[serde(default)]
    pub training_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    Class,
    Probability,
}

impl std::str::FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(PredictMode::Class),
            "probability" => Ok(PredictMode::Probability),
            other => Err(Error::Schema(format!("unknown classify mode '{other}' (class|probability)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class(String),
    /// One probability per model label, in label order.
    Probabilities(Vec<f64>),
}

/// Cholesky factor `L` with `a = L Lᵀ`, or `None` if `a` is not positive
/// definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Fits on labelled rows. Class order is the order of first appearance.
pub fn lda_fit(rows: &[FeatureVector], ridge: f64) -> Result<LdaModel> {
    let first = rows.first().ok_or_else(|| Error::TooFewSamples("training set is empty".into()))?;
    let dim = first.values.len();
    let mut labels: Vec<String> = Vec::new();
    let mut members: Vec<Vec<&[f64]>> = Vec::new();
    for r in rows {
        let label = r.label.as_ref().filter(|l| !l.is_empty()).ok_or_else(|| {
            Error::TooFewSamples(format!("row at t={} has no label", r.timestamp))
        })?;
        if r.values.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.values.len() });
        }
        let k = match labels.iter().position(|l| l == label) {
            Some(k) => k,
            None => {
                labels.push(label.clone());
                members.push(Vec::new());
                labels.len() - 1
            }
        };
        members[k].push(&r.values);
    }
    if labels.len() < 2 {
        return Err(Error::TooFewSamples(format!("need at least 2 distinct labels, got {}", labels.len())));
    }
    for (label, m) in labels.iter().zip(&members) {
        if m.len() < dim + 1 {
            log::warn!("class '{label}' has {} rows for {dim} features; relying on ridge", m.len());
        }
    }

    let n = rows.len() as f64;
    let means: Vec<Vec<f64>> = members
        .iter()
        .map(|m| (0..dim).map(|d| m.iter().map(|x| x[d]).sum::<f64>() / m.len() as f64).collect())
        .collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for (m, mu) in members.iter().zip(&means) {
        for x in m {
            for i in 0..dim {
                let di = x[i] - mu[i];
                for j in 0..=i {
                    cov[i][j] += di * (x[j] - mu[j]);
                }
            }
        }
    }
    let dof = (n - labels.len() as f64).max(1.0);
    for i in 0..dim {
        for j in 0..=i {
            cov[i][j] /= dof;
            cov[j][i] = cov[i][j];
        }
        cov[i][i] += ridge;
    }
    let l = cholesky(&cov).ok_or(Error::SingularCovariance)?;

    let mut weights = Vec::with_capacity(labels.len());
    let mut biases = Vec::with_capacity(labels.len());
    for (mu, m) in means.iter().zip(&members) {
        let w = cholesky_solve(&l, mu);
        let quad: f64 = w.iter().zip(mu).map(|(a, b)| a * b).sum();
        let prior = m.len() as f64 / n;
        biases.push(-0.5 * quad + prior.ln());
        weights.push(w);
    }
    let feature_order =
        if first.names.len() == dim { first.names.clone() } else { (0..dim).map(|i| format!("f{i}")).collect() };
    Ok(LdaModel {
        version: MODEL_VERSION,
        labels,
        dim,
        weights,
        biases,
        ridge,
        feature_order,
        training_size: rows.len(),
    })
}

impl LdaModel {
    pub fn discriminants(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect())
    }

    /// Index of the largest discriminant; ties go to the earlier label.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        let g = self.discriminants(x)?;
        let mut best = 0;
        for (k, v) in g.iter().enumerate() {
            if *v > g[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Softmax over the discriminants.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.discriminants(x)?;
        let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = g.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / s).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ModelSchema(e.to_string()))?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(MODEL_VERSION) => {}
            Some(v) => return Err(Error::VersionMismatch(v)),
            None => return Err(Error::ModelSchema("missing integer field 'version'".into())),
        }
        let model: LdaModel = serde_json::from_value(value).map_err(|e| Error::ModelSchema(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let k = self.labels.len();
        if k < 2 {
            return Err(Error::ModelSchema("need at least 2 labels".into()));
        }
        if self.weights.len() != k || self.biases.len() != k {
            return Err(Error::ModelSchema("one weight vector and bias per label required".into()));
        }
        if self.weights.iter().any(|w| w.len() != self.dim) {
            return Err(Error::ModelSchema(format!("weight vectors must have dim {}", self.dim)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        LdaModel::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn lda_predict(model: &LdaModel, x: &FeatureVector, mode: PredictMode) -> Result<Prediction> {
    Ok(match mode {
        PredictMode::Class => Prediction::Class(model.labels[model.predict_index(&x.values)?].clone()),
        PredictMode::Probability => Prediction::Probabilities(model.probabilities(&x.values)?),
    })
}
