//! A k-th order categorical table over coordinate tokens.
//!
//! Row `cond * (V+1)^k + ctx` holds the logits of the next token given the
//! conditioning id and the previous `k` tokens, where `ctx` reads those
//! tokens as base-`(V+1)` digits and the start marker is symbol `V`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MdpoError;

pub const DEFAULT_ORDER: usize = 1;
pub const DEFAULT_VOCAB: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Policy,
    Reference,
}

/// Probability of each realized token of a sequence under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbs {
    pub values: Vec<f64>,
    pub model: ModelTag,
}

impl TokenProbs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row index and realized token for every position of a sequence.
pub(crate) type Positions = Vec<(usize, u32)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyTable", into = "PolicyTable")]
pub struct ToyPolicy {
    order: usize,
    vocab: usize,
    conditions: usize,
    rows_per_condition: usize,
    logits: Vec<f64>,
}

/// Serialized form of a policy.
#[derive(Serialize, Deserialize)]
struct PolicyTable {
    order: usize,
    vocab: usize,
    conditions: usize,
    logits: Vec<f64>,
}

impl TryFrom<PolicyTable> for ToyPolicy {
    type Error = MdpoError;

    fn try_from(t: PolicyTable) -> Result<Self, MdpoError> {
        let mut policy = ToyPolicy::uniform(t.order, t.vocab, t.conditions)?;
        if t.logits.len() != policy.logits.len() {
            return Err(MdpoError::InvalidPolicy(format!(
                "expected {} logits, found {}",
                policy.logits.len(),
                t.logits.len()
            )));
        }
        if t.logits.iter().any(|x| !x.is_finite()) {
            return Err(MdpoError::InvalidPolicy("non-finite logit".into()));
        }
        policy.logits = t.logits;
        Ok(policy)
    }
}

impl From<ToyPolicy> for PolicyTable {
    fn from(p: ToyPolicy) -> Self {
        PolicyTable {
            order: p.order,
            vocab: p.vocab,
            conditions: p.conditions,
            logits: p.logits,
        }
    }
}

impl ToyPolicy {
    /// All-zero logits, so every row is the uniform distribution.
    pub fn uniform(order: usize, vocab: usize, conditions: usize) -> Result<Self, MdpoError> {
        if vocab < 2 || conditions == 0 {
            return Err(MdpoError::InvalidPolicy(format!(
                "need vocab >= 2 and at least one condition, got vocab {vocab}, conditions {conditions}"
            )));
        }
        let too_big = || MdpoError::InvalidPolicy(format!("table too large for order {order}"));
        let rows_per_condition = u32::try_from(order)
            .ok()
            .and_then(|k| (vocab + 1).checked_pow(k))
            .ok_or_else(too_big)?;
        let len = rows_per_condition
            .checked_mul(conditions)
            .and_then(|r| r.checked_mul(vocab))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(too_big)?;
        Ok(Self {
            order,
            vocab,
            conditions,
            rows_per_condition,
            logits: vec![0.0; len],
        })
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(
        order: usize,
        vocab: usize,
        conditions: usize,
        scale: f64,
        seed: u64,
    ) -> Result<Self, MdpoError> {
        let mut policy = Self::uniform(order, vocab, conditions)?;
        if scale > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in &mut policy.logits {
                *x = rng.random_range(-scale..=scale);
            }
        }
        Ok(policy)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn conditions(&self) -> usize {
        self.conditions
    }

    pub fn row_count(&self) -> usize {
        self.rows_per_condition * self.conditions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.logits[row * self.vocab..(row + 1) * self.vocab]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.order, self.vocab, self.conditions) == (other.order, other.vocab, other.conditions)
    }

    /// Softmax of one row.
    pub fn distribution(&self, row: usize) -> Vec<f64> {
        let lse = log_sum_exp(self.row(row));
        self.row(row).iter().map(|x| (x - lse).exp()).collect()
    }

    /// `θ -= lr * grad` over the whole table.
    pub fn descend(&mut self, grad: &[f64], lr: f64) {
        for (x, g) in self.logits.iter_mut().zip(grad) {
            *x -= lr * g;
        }
    }

    /// Row index of the context `history` (the last `k` tokens, oldest
    /// first, shorter at the start of a sequence) under condition `cond`.
    pub fn row_index(&self, cond: usize, history: &[u32]) -> usize {
        let start_marker = self.vocab;
        let pad = self.order.saturating_sub(history.len());
        let recent = &history[history.len().saturating_sub(self.order)..];
        let ctx = std::iter::repeat_n(start_marker, pad)
            .chain(recent.iter().map(|&t| t as usize))
            .fold(0, |acc, s| acc * (self.vocab + 1) + s);
        cond * self.rows_per_condition + ctx
    }

    pub(crate) fn positions(&self, cond: usize, tokens: &[u32]) -> Result<Positions, MdpoError> {
        if cond >= self.conditions {
            return Err(MdpoError::UnknownCondition {
                cond,
                conditions: self.conditions,
            });
        }
        if tokens.is_empty() {
            return Err(MdpoError::EmptySequence);
        }
        if let Some(&token) = tokens.iter().find(|&&t| t as usize >= self.vocab) {
            return Err(MdpoError::TokenOutOfVocabulary {
                token,
                vocab: self.vocab,
            });
        }
        Ok(tokens
            .iter()
            .enumerate()
            .map(|(t, &tok)| (self.row_index(cond, &tokens[..t]), tok))
            .collect())
    }

    /// Probabilities of the realized tokens; each row is normalised once.
    pub(crate) fn position_probs(&self, positions: &[(usize, u32)]) -> Vec<f64> {
        let mut lse: HashMap<usize, f64> = HashMap::new();
        positions
            .iter()
            .map(|&(row, tok)| {
                let z = *lse.entry(row).or_insert_with(|| log_sum_exp(self.row(row)));
                (self.row(row)[tok as usize] - z).exp()
            })
            .collect()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Probability of each token of `tokens` given its predecessors and `cond`.
pub fn score_sequence(
    policy: &ToyPolicy,
    cond: usize,
    tokens: &[u32],
    model: ModelTag,
) -> Result<TokenProbs, MdpoError> {
    let positions = policy.positions(cond, tokens)?;
    Ok(TokenProbs {
        values: policy.position_probs(&positions),
        model,
    })
}
