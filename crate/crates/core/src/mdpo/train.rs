//! Gradient-descent training of a toy policy on a preference dataset.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{MdpoConfig, MdpoError, Objective, ToyPolicy, TrainingTriplet, DEFAULT_ORDER};
use crate::mask::TokenMask;
use crate::preference::PreferenceTriplet;

/// Half-width of the uniform range the reference logits are drawn from.
pub const REFERENCE_LOGIT_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub margin: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// One row per step, including step 0 before any update.
    pub trace: Vec<TraceRow>,
    pub policy: ToyPolicy,
    pub initial_pos_mass: f64,
    pub final_pos_mass: f64,
}

/// Triplets in token form plus the conditioning labels they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub triplets: Vec<TrainingTriplet>,
    /// Conditioning labels in order of first appearance; index = id.
    pub conditions: Vec<String>,
    pub vocab: usize,
}

impl TrainingSet {
    /// A random first-order reference table sized for this set.
    pub fn reference_policy(&self, seed: u64) -> Result<ToyPolicy, MdpoError> {
        ToyPolicy::random(
            DEFAULT_ORDER,
            self.vocab,
            self.conditions.len(),
            REFERENCE_LOGIT_SCALE,
            seed,
        )
    }
}

pub fn read_triplets_jsonl(input: impl BufRead) -> Result<Vec<PreferenceTriplet>, MdpoError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let fail = |message: String| MdpoError::Dataset { line: i + 1, message };
        let line = line.map_err(|e| fail(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?);
    }
    Ok(out)
}

fn mask_of(bits: &[u8], tokens: usize, line: usize) -> Result<TokenMask, MdpoError> {
    if bits.len() != tokens || bits.iter().any(|&b| b > 1) {
        return Err(MdpoError::Dataset {
            line,
            message: format!("mask of length {} is not binary over {tokens} tokens", bits.len()),
        });
    }
    Ok(TokenMask::from_bits(bits.to_vec()))
}

/// Converts dataset records into training triplets. Every record must use
/// the same quantization, which becomes the vocabulary size.
pub fn training_set(records: &[PreferenceTriplet]) -> Result<TrainingSet, MdpoError> {
    let first = records.first().ok_or(MdpoError::EmptyDataset)?;
    let vocab = first.bins as usize;
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut conditions = Vec::new();
    let mut triplets = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let line = i + 1;
        if r.bins as usize != vocab {
            return Err(MdpoError::Dataset {
                line,
                message: format!("bins {} differ from {vocab} on the first record", r.bins),
            });
        }
        let cond = *ids.entry(r.pc.as_str()).or_insert_with(|| {
            conditions.push(r.pc.clone());
            conditions.len() - 1
        });
        triplets.push(TrainingTriplet {
            cond,
            mask_pos: mask_of(&r.mask_pos, r.tokens_pos.len(), line)?,
            mask_neg: mask_of(&r.mask_neg, r.tokens_neg.len(), line)?,
            pos: r.tokens_pos.clone(),
            neg: r.tokens_neg.clone(),
        });
    }
    Ok(TrainingSet {
        triplets,
        conditions,
        vocab,
    })
}

/// Trains a copy of `reference` for `cfg.steps` plain gradient steps.
pub fn train_toy(
    reference: &ToyPolicy,
    triplets: &[TrainingTriplet],
    cfg: &MdpoConfig,
) -> Result<TrainOutcome, MdpoError> {
    let objective = Objective::new(reference, triplets, cfg)?;
    let mut policy = reference.clone();
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut initial_pos_mass = 0.0;
    let mut final_pos_mass = 0.0;
    for step in 0..=cfg.steps {
        let (eval, grad) = objective.gradient(&policy)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !eval.loss.is_finite() || !grad_norm.is_finite() {
            return Err(MdpoError::Diverged { step });
        }
        log::debug!("step {step}: loss {} margin {}", eval.loss, eval.margin);
        trace.push(TraceRow {
            step,
            loss: eval.loss,
            margin: eval.margin,
            grad_norm,
        });
        if step == 0 {
            initial_pos_mass = eval.pos_mass;
        }
        final_pos_mass = eval.pos_mass;
        if step < cfg.steps {
            policy.descend(&grad, cfg.learning_rate);
        }
    }
    Ok(TrainOutcome {
        trace,
        policy,
        initial_pos_mass,
        final_pos_mass,
    })
}

/// Writes `step,loss,margin,grad_norm` rows. Floats use the shortest form
/// that parses back to the same value.
pub fn write_trace_csv(rows: &[TraceRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "step,loss,margin,grad_norm")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.step, r.loss, r.margin, r.grad_norm)?;
    }
    Ok(())
}
