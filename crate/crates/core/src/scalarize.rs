//! Scalarisation of per-action, per-objective Q-values: linear weighting,
//! or thresholded lexicographic ordering (TLO) truncation followed by
//! linear weighting.

use rand::Rng;

use crate::error::{invalid, Result};

/// `n_actions × n_objectives` Q-values, row-major by action.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    n_actions: usize,
    n_objectives: usize,
    values: Vec<f64>,
}

impl QMatrix {
    pub fn new(n_actions: usize, n_objectives: usize, values: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || n_objectives == 0 {
            return Err(invalid("Q-matrix needs at least one action and one objective"));
        }
        if values.len() != n_actions * n_objectives {
            return Err(invalid(format!(
                "expected {} Q-values, got {}",
                n_actions * n_objectives,
                values.len()
            )));
        }
        Ok(Self { n_actions, n_objectives, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_objectives = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_objectives) {
            return Err(invalid("ragged Q-matrix rows"));
        }
        Self::new(rows.len(), n_objectives, rows.concat())
    }

    /// Builds from a network head laid out objective-major: output
    /// `i * n_actions + a` holds Q_i(s, a).
    pub fn from_grouped_head(head: &[f64], n_actions: usize, n_objectives: usize) -> Result<Self> {
        if head.len() != n_actions * n_objectives {
            return Err(invalid("head size does not match actions × objectives"));
        }
        let mut values = vec![0.0; head.len()];
        for i in 0..n_objectives {
            for a in 0..n_actions {
                values[a * n_objectives + i] = head[i * n_actions + a];
            }
        }
        Self::new(n_actions, n_objectives, values)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_objectives(&self) -> usize {
        self.n_objectives
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.values[action * self.n_objectives..(action + 1) * self.n_objectives]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_objectives)
    }

    pub fn get(&self, action: usize, objective: usize) -> f64 {
        self.values[action * self.n_objectives + objective]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarizationSpec {
    Linear { weights: Vec<f64> },
    /// Thresholds cover the first `n - 1` objectives.
    Tlo { thresholds: Vec<f64>, weights: Vec<f64> },
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(invalid("weights must not be empty"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(invalid("at least one weight must be positive"));
    }
    Ok(())
}

impl ScalarizationSpec {
    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self::Linear { weights })
    }

    /// TLO with explicit post-truncation weights.
    pub fn tlo(thresholds: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        if thresholds.len() + 1 != weights.len() {
            return Err(invalid(format!(
                "TLO over {} objectives needs {} thresholds, got {}",
                weights.len(),
                weights.len() - 1,
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|t| t.is_nan()) {
            return Err(invalid("thresholds must not be NaN"));
        }
        Ok(Self::Tlo { thresholds, weights })
    }

    /// TLO followed by uniform weights `1/n`.
    pub fn tlo_uniform(thresholds: Vec<f64>) -> Result<Self> {
        let n = thresholds.len() + 1;
        Self::tlo(thresholds, vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Self::Linear { weights } | Self::Tlo { weights, .. } => weights,
        }
    }

    pub fn n_objectives(&self) -> usize {
        self.weights().len()
    }

    /// Scalar score of a single reward or Q vector.
    pub fn score(&self, q_row: &[f64]) -> Result<f64> {
        if q_row.len() != self.n_objectives() {
            return Err(invalid(format!(
                "vector has {} objectives, scalarization expects {}",
                q_row.len(),
                self.n_objectives()
            )));
        }
        Ok(match self {
            Self::Linear { weights } => dot(weights, q_row),
            Self::Tlo { thresholds, weights } => dot(weights, &tlo_truncate(q_row, thresholds)?),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn tlo_truncate(q_row: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if q_row.len() != thresholds.len() + 1 {
        return Err(invalid(format!(
            "{} thresholds cannot truncate a {}-objective vector",
            thresholds.len(),
            q_row.len()
        )));
    }
    let mut out = q_row.to_vec();
    for (q, &t) in out.iter_mut().zip(thresholds) {
        *q = q.min(t);
    }
    Ok(out)
}

pub fn scalarize(q: &QMatrix, spec: &ScalarizationSpec) -> Result<Vec<f64>> {
    q.rows().map(|row| spec.score(row)).collect()
}

/// Index of the maximum score; ties go to the lowest index.
pub fn greedy_action(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(invalid("cannot select from empty scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("scores must be finite"));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn epsilon_greedy<R: Rng + ?Sized>(scores: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let greedy = greedy_action(scores)?;
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..scores.len()))
    } else {
        Ok(greedy)
    }
}
