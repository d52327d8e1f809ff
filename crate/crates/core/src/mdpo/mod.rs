//! Masked preference optimization over a tabular policy.
//!
//! For a triplet (condition, preferred tokens M⁺, rejected tokens M⁻) with
//! good-face masks φ⁺ and φ⁻ the objective is
//!
//! ```text
//! L⁺ = log ‖π_ψ(M⁺) ⊙ φ⁺‖₁ − log ‖π_ref(M⁺) ⊙ φ⁺‖₁
//! L⁻ = log ‖π_ψ(M⁻) ⊙ (1 − φ⁻)‖₁ − log ‖π_ref(M⁻) ⊙ (1 − φ⁻)‖₁
//! loss = −log σ(β (L⁺ − L⁻))
//! ```
//!
//! where π gives the probability of each realized token. Each masked sum is
//! floored at `ε`; when both sums of a term fall below it the term is zero.
//! The gradient with respect to every logit is computed in closed form.

mod policy;
mod schedule;
mod train;

pub use policy::{score_sequence, ModelTag, TokenProbs, ToyPolicy, DEFAULT_ORDER, DEFAULT_VOCAB};
pub use schedule::{retained_tokens, slide_start, sliding_window_schedule, WindowStep};
pub use train::{
    read_triplets_jsonl, train_toy, training_set, write_trace_csv, TraceRow, TrainOutcome,
    TrainingSet, REFERENCE_LOGIT_SCALE,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mask::TokenMask;
use policy::Positions;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MdpoError {
    #[error("token {token} is outside the vocabulary of size {vocab}")]
    TokenOutOfVocabulary { token: u32, vocab: usize },
    #[error("cannot score an empty token sequence")]
    EmptySequence,
    #[error("conditioning id {cond} is out of range for {conditions} conditions")]
    UnknownCondition { cond: usize, conditions: usize },
    #[error("length mismatch: policy {policy}, reference {reference}, mask {mask}")]
    LengthMismatch {
        policy: usize,
        reference: usize,
        mask: usize,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("policy and reference tables differ in shape")]
    ShapeMismatch,
    #[error("the training set is empty")]
    EmptyDataset,
    #[error("loss diverged at step {step}")]
    Diverged { step: usize },
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("window {window} and stream length {length} must satisfy W >= 10 and L >= 1")]
    InvalidSchedule { window: usize, length: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Mask `φ`: the good regions of the preferred mesh.
    Positive,
    /// Mask `1 − φ`: the bad regions of the rejected mesh.
    Negative,
}

/// How a masked term compares policy and reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioForm {
    /// Log of the ratio of masked probability sums.
    #[default]
    L1Ratio,
    /// Sum over masked tokens of per-token log ratios.
    SumLogRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpoConfig {
    pub beta: f64,
    pub eps_floor: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub form: RatioForm,
    /// Replace both masks with all-ones (unmasked preference optimization).
    pub global: bool,
}

impl Default for MdpoConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            eps_floor: 1e-12,
            learning_rate: 0.1,
            steps: 200,
            seed: 0,
            form: RatioForm::L1Ratio,
            global: false,
        }
    }
}

impl MdpoConfig {
    pub fn validate(&self) -> Result<(), MdpoError> {
        let bad = |m: &str| Err(MdpoError::InvalidConfig(m.into()));
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive and finite");
        }
        if !(self.eps_floor.is_finite() && self.eps_floor > 0.0) {
            return bad("eps floor must be positive and finite");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be non-negative and finite");
        }
        Ok(())
    }
}

/// Per-token weights of one masked term.
pub fn effective_weights(mask: &TokenMask, polarity: Polarity, global: bool) -> Vec<f64> {
    mask.bits()
        .iter()
        .map(|&b| match (global, polarity) {
            (true, _) => 1.0,
            (false, Polarity::Positive) => f64::from(b),
            (false, Polarity::Negative) => f64::from(1 - b),
        })
        .collect()
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn l1_log_ratio(weights: &[f64], psi: &[f64], reference: &[f64], eps: f64) -> f64 {
    let s = weighted_sum(weights, psi);
    let r = weighted_sum(weights, reference);
    if s < eps && r < eps {
        0.0
    } else {
        (s.max(eps) / r.max(eps)).ln()
    }
}

fn sum_log_ratio(weights: &[f64], psi: &[f64], reference: &[f64]) -> f64 {
    weights
        .iter()
        .zip(psi.iter().zip(reference))
        .map(|(w, (p, q))| if *w == 0.0 { 0.0 } else { w * (p.ln() - q.ln()) })
        .sum()
}

fn check_lengths(psi: &TokenProbs, reference: &TokenProbs, mask: &TokenMask) -> Result<(), MdpoError> {
    if psi.len() != reference.len() || psi.len() != mask.len() {
        return Err(MdpoError::LengthMismatch {
            policy: psi.len(),
            reference: reference.len(),
            mask: mask.len(),
        });
    }
    Ok(())
}

/// One masked term in its ℓ1 ratio form.
pub fn masked_log_ratio(
    psi: &TokenProbs,
    reference: &TokenProbs,
    mask: &TokenMask,
    polarity: Polarity,
    eps: f64,
) -> Result<f64, MdpoError> {
    check_lengths(psi, reference, mask)?;
    let w = effective_weights(mask, polarity, false);
    Ok(l1_log_ratio(&w, &psi.values, &reference.values, eps))
}

/// `−log σ(x)` without overflow.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Both sides of a triplet scored under policy and reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTriplet {
    pub psi_pos: TokenProbs,
    pub ref_pos: TokenProbs,
    pub mask_pos: TokenMask,
    pub psi_neg: TokenProbs,
    pub ref_neg: TokenProbs,
    pub mask_neg: TokenMask,
}

fn term(
    psi: &TokenProbs,
    reference: &TokenProbs,
    mask: &TokenMask,
    polarity: Polarity,
    cfg: &MdpoConfig,
) -> Result<f64, MdpoError> {
    check_lengths(psi, reference, mask)?;
    let w = effective_weights(mask, polarity, cfg.global);
    Ok(match cfg.form {
        RatioForm::L1Ratio => l1_log_ratio(&w, &psi.values, &reference.values, cfg.eps_floor),
        RatioForm::SumLogRatio => sum_log_ratio(&w, &psi.values, &reference.values),
    })
}

pub fn mdpo_loss(t: &ScoredTriplet, cfg: &MdpoConfig) -> Result<f64, MdpoError> {
    let lp = term(&t.psi_pos, &t.ref_pos, &t.mask_pos, Polarity::Positive, cfg)?;
    let ln = term(&t.psi_neg, &t.ref_neg, &t.mask_neg, Polarity::Negative, cfg)?;
    Ok(neg_log_sigmoid(cfg.beta * (lp - ln)))
}

/// Mean loss over a batch, summed in input order.
pub fn mdpo_batch_loss(batch: &[ScoredTriplet], cfg: &MdpoConfig) -> Result<f64, MdpoError> {
    if batch.is_empty() {
        return Err(MdpoError::EmptyDataset);
    }
    let mut total = 0.0;
    for t in batch {
        total += mdpo_loss(t, cfg)?;
    }
    Ok(total / batch.len() as f64)
}

/// A preference triplet in token form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriplet {
    pub cond: usize,
    pub pos: Vec<u32>,
    pub mask_pos: TokenMask,
    pub neg: Vec<u32>,
    pub mask_neg: TokenMask,
}

/// A triplet with rows resolved and mask weights applied. Reference
/// probabilities are computed once.
#[derive(Debug, Clone)]
struct Prepared {
    pos: Positions,
    w_pos: Vec<f64>,
    ref_pos: Vec<f64>,
    neg: Positions,
    w_neg: Vec<f64>,
    ref_neg: Vec<f64>,
}

/// Values of the objective at one policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluation {
    pub loss: f64,
    /// Mean of `β (L⁺ − L⁻)`.
    pub margin: f64,
    /// Mean masked probability mass `Σ φ⁺ π_ψ(M⁺)`.
    pub pos_mass: f64,
}

/// The batch objective against a frozen reference policy.
#[derive(Debug, Clone)]
pub struct Objective {
    reference: ToyPolicy,
    prepared: Vec<Prepared>,
    cfg: MdpoConfig,
}

struct TermParts {
    value: f64,
    /// `∂term/∂θ` contribution per position, before the softmax Jacobian.
    coef: Vec<f64>,
}

impl Objective {
    pub fn new(
        reference: &ToyPolicy,
        triplets: &[TrainingTriplet],
        cfg: &MdpoConfig,
    ) -> Result<Self, MdpoError> {
        cfg.validate()?;
        if triplets.is_empty() {
            return Err(MdpoError::EmptyDataset);
        }
        let prepared = triplets
            .iter()
            .map(|t| {
                let pos = reference.positions(t.cond, &t.pos)?;
                let neg = reference.positions(t.cond, &t.neg)?;
                for (seq, mask) in [(&pos, &t.mask_pos), (&neg, &t.mask_neg)] {
                    if seq.len() != mask.len() {
                        return Err(MdpoError::LengthMismatch {
                            policy: seq.len(),
                            reference: seq.len(),
                            mask: mask.len(),
                        });
                    }
                }
                Ok(Prepared {
                    ref_pos: reference.position_probs(&pos),
                    ref_neg: reference.position_probs(&neg),
                    w_pos: effective_weights(&t.mask_pos, Polarity::Positive, cfg.global),
                    w_neg: effective_weights(&t.mask_neg, Polarity::Negative, cfg.global),
                    pos,
                    neg,
                })
            })
            .collect::<Result<_, MdpoError>>()?;
        Ok(Self {
            reference: reference.clone(),
            prepared,
            cfg: *cfg,
        })
    }

    pub fn reference(&self) -> &ToyPolicy {
        &self.reference
    }

    pub fn config(&self) -> &MdpoConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    fn check_shape(&self, policy: &ToyPolicy) -> Result<(), MdpoError> {
        if policy.same_shape(&self.reference) {
            Ok(())
        } else {
            Err(MdpoError::ShapeMismatch)
        }
    }

    fn term(&self, w: &[f64], psi: &[f64], reference: &[f64]) -> TermParts {
        match self.cfg.form {
            RatioForm::L1Ratio => {
                let eps = self.cfg.eps_floor;
                let s = weighted_sum(w, psi);
                let value = l1_log_ratio(w, psi, reference, eps);
                // below the floor the term no longer depends on the policy
                let coef = if s < eps {
                    vec![0.0; psi.len()]
                } else {
                    w.iter().zip(psi).map(|(w, p)| w * p / s).collect()
                };
                TermParts { value, coef }
            }
            RatioForm::SumLogRatio => TermParts {
                value: sum_log_ratio(w, psi, reference),
                coef: w.to_vec(),
            },
        }
    }

    fn triplet(&self, policy: &ToyPolicy, p: &Prepared) -> (Evaluation, TermParts, TermParts) {
        let psi_pos = policy.position_probs(&p.pos);
        let psi_neg = policy.position_probs(&p.neg);
        let tp = self.term(&p.w_pos, &psi_pos, &p.ref_pos);
        let tn = self.term(&p.w_neg, &psi_neg, &p.ref_neg);
        let x = self.cfg.beta * (tp.value - tn.value);
        let eval = Evaluation {
            loss: neg_log_sigmoid(x),
            margin: x,
            pos_mass: weighted_sum(&p.w_pos, &psi_pos),
        };
        (eval, tp, tn)
    }

    fn mean(&self, evals: impl Iterator<Item = Evaluation>) -> Evaluation {
        let n = self.prepared.len() as f64;
        let mut sum = Evaluation::default();
        for e in evals {
            sum.loss += e.loss;
            sum.margin += e.margin;
            sum.pos_mass += e.pos_mass;
        }
        Evaluation {
            loss: sum.loss / n,
            margin: sum.margin / n,
            pos_mass: sum.pos_mass / n,
        }
    }

    pub fn evaluate(&self, policy: &ToyPolicy) -> Result<Evaluation, MdpoError> {
        self.check_shape(policy)?;
        let evals: Vec<Evaluation> = self
            .prepared
            .par_iter()
            .map(|p| self.triplet(policy, p).0)
            .collect();
        Ok(self.mean(evals.into_iter()))
    }

    /// Sparse gradient of one triplet's loss, keyed by row.
    fn triplet_gradient(&self, policy: &ToyPolicy, p: &Prepared) -> (Evaluation, BTreeMap<usize, Vec<f64>>) {
        let (eval, tp, tn) = self.triplet(policy, p);
        let beta = self.cfg.beta;
        let dloss = -beta * sigmoid(-eval.margin);
        // per row: Σ coef at each realized token, and Σ coef overall
        let mut rows: BTreeMap<usize, (Vec<f64>, f64)> = BTreeMap::new();
        let v = policy.vocab();
        let sides = [(&p.pos, &tp.coef, dloss), (&p.neg, &tn.coef, -dloss)];
        for (positions, coef, sign) in sides {
            for (&(row, tok), &c) in positions.iter().zip(coef) {
                if c == 0.0 {
                    continue;
                }
                let entry = rows.entry(row).or_insert_with(|| (vec![0.0; v], 0.0));
                entry.0[tok as usize] += sign * c;
                entry.1 += sign * c;
            }
        }
        let grad = rows
            .into_iter()
            .map(|(row, (mut hits, total))| {
                let q = policy.distribution(row);
                for (g, q) in hits.iter_mut().zip(&q) {
                    *g -= total * q;
                }
                (row, hits)
            })
            .collect();
        (eval, grad)
    }

    /// Mean loss and its gradient with respect to every logit of `policy`.
    /// Per-triplet work runs in parallel; results are reduced in input order.
    pub fn gradient(&self, policy: &ToyPolicy) -> Result<(Evaluation, Vec<f64>), MdpoError> {
        self.check_shape(policy)?;
        let parts: Vec<_> = self
            .prepared
            .par_iter()
            .map(|p| self.triplet_gradient(policy, p))
            .collect();
        let v = policy.vocab();
        let n = self.prepared.len() as f64;
        let mut grad = vec![0.0; policy.logits().len()];
        for (_, sparse) in &parts {
            for (&row, g) in sparse {
                for (acc, x) in grad[row * v..(row + 1) * v].iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
        for g in &mut grad {
            *g /= n;
        }
        Ok((self.mean(parts.iter().map(|(e, _)| *e)), grad))
    }
}

/// Loss and logit gradient of a single triplet.
pub fn mdpo_gradient(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    triplet: &TrainingTriplet,
    cfg: &MdpoConfig,
) -> Result<(f64, Vec<f64>), MdpoError> {
    let objective = Objective::new(reference, std::slice::from_ref(triplet), cfg)?;
    let (eval, grad) = objective.gradient(policy)?;
    Ok((eval.loss, grad))
}
