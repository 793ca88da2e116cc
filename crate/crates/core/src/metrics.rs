//! Privacy, utility loss and the combined trade-off objective.
//!
//! Privacy is the Shannon entropy of a user's topic distribution in nats, with `0 ln 0 = 0`.
//! Utility loss is `0.5 * (1 - cos(p, p_hat))`; for non-negative distributions it lies in
//! `[0, 0.5]`. The objective is `lambda * privacy(p_hat) - utility_loss(p, p_hat)`.

use serde::{Deserialize, Serialize};

use crate::domain::{normalize, TopicDistribution, TopicFrequencyVector};
use crate::error::{Error, Result};

/// Lower bound of the objective; adding it yields a non-negative "shifted" objective.
pub const OBJECTIVE_SHIFT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub lambda: f64,
}

impl ObjectiveConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

pub fn privacy(p: &TopicDistribution) -> f64 {
    entropy(p.probs())
}

pub(crate) fn entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    // Rounding can leave -0.0 or a hair below zero for point masses.
    h.max(0.0)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn utility_loss(p: &TopicDistribution, p_hat: &TopicDistribution) -> Result<f64> {
    if p == p_hat {
        return Ok(0.0);
    }
    let sim = cosine_similarity(p.probs(), p_hat.probs())?;
    Ok(0.5 * (1.0 - sim))
}

pub fn utility_gain(p: &TopicDistribution, p_hat: &TopicDistribution) -> Result<f64> {
    Ok(1.0 - utility_loss(p, p_hat)?)
}

/// Trade-off objective for topic counts `c` manipulated into `c_hat` (links only added).
pub fn objective_g(
    c: &TopicFrequencyVector,
    c_hat: &TopicFrequencyVector,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    if c.m() != c_hat.m() {
        return Err(Error::LengthMismatch {
            left: c.m(),
            right: c_hat.m(),
        });
    }
    for (topic, (&orig, &now)) in c.counts().iter().zip(c_hat.counts()).enumerate() {
        if now < orig {
            return Err(Error::Constraint {
                topic,
                original: orig,
                added: now,
            });
        }
    }
    let p = normalize(c)?;
    let p_hat = normalize(c_hat)?;
    Ok(cfg.lambda * privacy(&p_hat) - utility_loss(&p, &p_hat)?)
}

/// Evaluates the objective for additions `a` on top of `c`, reusing the normalized baseline.
///
/// This is the inner loop of topic selection; it skips the constraint check because
/// additions are unsigned.
pub(crate) struct ObjectiveEvaluator<'a> {
    counts: &'a [u64],
    base: Vec<f64>,
    base_norm: f64,
    lambda: f64,
    scratch: Vec<f64>,
}

impl<'a> ObjectiveEvaluator<'a> {
    pub(crate) fn new(c: &'a TopicFrequencyVector, cfg: &ObjectiveConfig) -> Result<Self> {
        let base = normalize(c)?.probs().to_vec();
        let base_norm = base.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(Self {
            counts: c.counts(),
            scratch: vec![0.0; base.len()],
            base,
            base_norm,
            lambda: cfg.lambda,
        })
    }

    pub(crate) fn value(&mut self, additions: &[u64]) -> f64 {
        if additions.iter().all(|&a| a == 0) {
            return self.lambda * entropy(&self.base);
        }
        let total: u64 = self.counts.iter().zip(additions).map(|(c, a)| c + a).sum();
        let total = total as f64;
        for ((s, &c), &a) in self.scratch.iter_mut().zip(self.counts).zip(additions) {
            *s = (c + a) as f64 / total;
        }
        let dot: f64 = self
            .base
            .iter()
            .zip(&self.scratch)
            .map(|(x, y)| x * y)
            .sum();
        let norm = self.scratch.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sim = (dot / (self.base_norm * norm)).clamp(-1.0, 1.0);
        self.lambda * entropy(&self.scratch) - 0.5 * (1.0 - sim)
    }
}
