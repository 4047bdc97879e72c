//! Teacher/student distillation losses over embedding batches.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `B x d` row-major embeddings with one identity label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
}

impl EmbeddingBatch {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidLoss(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidLoss("empty batch".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidLoss("ragged batch".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLoss("non-finite embedding".into()));
        }
        Ok(Self { rows: labels.len(), dim, data, labels })
    }

    /// Rows without meaningful labels (contrastive alignment ignores them).
    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        Self::new(rows, (0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Weights λ1..λ6 of the total objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub con_clean: f64,
    pub con_noisy: f64,
    pub softmax_clean: f64,
    pub softmax_noisy: f64,
    pub triplet_clean: f64,
    pub triplet_noisy: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl LossWeights {
    pub fn uniform(w: f64) -> Self {
        Self::from_array([w; 6])
    }

    pub fn from_array(w: [f64; 6]) -> Self {
        Self {
            con_clean: w[0],
            con_noisy: w[1],
            softmax_clean: w[2],
            softmax_noisy: w[3],
            triplet_clean: w[4],
            triplet_noisy: w[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.con_clean, self.con_noisy, self.softmax_clean, self.softmax_noisy, self.triplet_clean, self.triplet_noisy]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidLoss(format!("loss weights must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub temperature: f64,
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { temperature: 0.07, margin: 0.2 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidLoss(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::InvalidLoss(format!("margin must be nonnegative, got {}", self.margin)));
        }
        Ok(())
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(xs.map(|x| libm::exp(x - m)).sum::<f64>())
}

fn unit_rows(b: &EmbeddingBatch) -> Vec<f64> {
    let mut out = Vec::with_capacity(b.data.len());
    for i in 0..b.len() {
        let r = b.row(i);
        let n = libm::sqrt(r.iter().map(|v| v * v).sum::<f64>());
        let n = if n > 0.0 { n } else { 1.0 };
        out.extend(r.iter().map(|v| v / n));
    }
    out
}

/// Symmetric NT-Xent between aligned teacher and student rows: the mean of the
/// teacher-to-student and student-to-teacher cross-entropies over the
/// `B x B` cosine-similarity matrix scaled by `1 / temperature`.
pub fn contrastive_loss(teacher: &EmbeddingBatch, student: &EmbeddingBatch, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let b = teacher.len();
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    if student.len() != b || student.dim() != teacher.dim() {
        return Err(Error::InvalidLoss(format!(
            "teacher is {}x{}, student is {}x{}",
            b,
            teacher.dim(),
            student.len(),
            student.dim()
        )));
    }
    let d = teacher.dim();
    let t = unit_rows(teacher);
    let s = unit_rows(student);
    let mut sim = Vec::with_capacity(b * b);
    for i in 0..b {
        for j in 0..b {
            let dot: f64 = t[i * d..(i + 1) * d].iter().zip(&s[j * d..(j + 1) * d]).map(|(x, y)| x * y).sum();
            sim.push(dot / cfg.temperature);
        }
    }
    let mut rows = 0.0;
    let mut cols = 0.0;
    for i in 0..b {
        rows += log_sum_exp((0..b).map(|j| sim[i * b + j])) - sim[i * b + i];
        cols += log_sum_exp((0..b).map(|j| sim[j * b + i])) - sim[i * b + i];
    }
    Ok(0.5 * (rows + cols) / b as f64)
}

/// Mean cross-entropy of row-major `logits` (`labels.len()` rows of `classes` values).
pub fn softmax_loss(logits: &[f64], classes: usize, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() || classes == 0 || logits.len() != labels.len() * classes {
        return Err(Error::InvalidLoss(format!(
            "{} logits do not form {} rows of {} classes",
            logits.len(),
            labels.len(),
            classes
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLoss("non-finite logit".into()));
    }
    let mut total = 0.0;
    for (row, &label) in logits.chunks_exact(classes).zip(labels) {
        if label >= classes {
            return Err(Error::InvalidLabel { label, classes });
        }
        total += log_sum_exp(row.iter().copied()) - row[label];
    }
    Ok(total / labels.len() as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// Batch-all hinge triplet loss: the mean of `max(0, d(a,p) - d(a,n) + margin)`
/// over every valid triplet, Euclidean distance.
pub fn triplet_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let n = batch.len();
    let mut dist = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            dist.push(euclidean(batch.row(i), batch.row(j)));
        }
    }
    let labels = batch.labels();
    let mut total = 0.0;
    let mut count = 0usize;
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            for neg in 0..n {
                if labels[neg] == labels[a] {
                    continue;
                }
                total += (dist[a * n + p] - dist[a * n + neg] + cfg.margin).max(0.0);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoValidTriplet);
    }
    Ok(total / count as f64)
}

/// The six loss terms, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub con_clean: f64,
    pub con_noisy: f64,
    pub softmax_clean: f64,
    pub softmax_noisy: f64,
    pub triplet_clean: f64,
    pub triplet_noisy: f64,
}

impl LossComponents {
    pub fn from_array(c: [f64; 6]) -> Self {
        Self {
            con_clean: c[0],
            con_noisy: c[1],
            softmax_clean: c[2],
            softmax_noisy: c[3],
            triplet_clean: c[4],
            triplet_noisy: c[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.con_clean, self.con_noisy, self.softmax_clean, self.softmax_noisy, self.triplet_clean, self.triplet_noisy]
    }
}

/// `Σ λ_i L_i`.
pub fn total_loss(components: &LossComponents, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    let c = components.as_array();
    if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidLoss(format!("loss components must be finite and nonnegative: {c:?}")));
    }
    Ok(c.iter().zip(weights.as_array()).map(|(l, w)| w * l).sum())
}
