use std::io::{self, Write};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rank_pairs, CandidateSet, RankedPair};
use crate::mask::{build_token_mask, label_faces, MaskWeights, DEFAULT_TAU};
use crate::mesh::{quantize, tokenize, Mesh, DEFAULT_BINS};
use crate::metrics::{evaluate, MetricReport, ScoreOptions};
use crate::quad::merge_to_quads;

pub const DATASET_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub score: ScoreOptions,
    pub tau: f64,
    pub weights: MaskWeights,
    pub bins: u32,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            score: ScoreOptions::default(),
            tau: DEFAULT_TAU,
            weights: MaskWeights::default(),
            bins: DEFAULT_BINS,
        }
    }
}

/// How much better the preferred mesh is; all components positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub ber: f64,
    pub ts: f64,
    pub hd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pos: MetricReport,
    pub neg: MetricReport,
}

/// One line of the preference dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriplet {
    pub schema: u32,
    pub set: String,
    pub pc: String,
    pub pos: String,
    pub neg: String,
    pub metrics: PairMetrics,
    pub deltas: MetricDeltas,
    /// Good-face mask over the interior tokens of `tokens_pos`.
    pub mask_pos: Vec<u8>,
    pub mask_neg: Vec<u8>,
    /// Interior coordinate tokens, without start and end markers.
    pub tokens_pos: Vec<u32>,
    pub tokens_neg: Vec<u32>,
    pub bins: u32,
    pub tau: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetFailure {
    pub set: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub sets_processed: usize,
    pub sets_failed: usize,
    pub pairs_examined: usize,
    pub triplets_emitted: usize,
    pub dominance_rate: f64,
    pub failures: Vec<SetFailure>,
}

/// Fills in the metric report of every candidate against the set's
/// reference cloud. Candidates are scored in parallel; each draws its own
/// seeded sample.
pub fn evaluate_set(set: &mut CandidateSet, opts: &ScoreOptions) -> Result<(), SetFailure> {
    let reference = &set.reference;
    let set_id = &set.id;
    set.candidates.par_iter_mut().try_for_each(|c| {
        let report = evaluate(&c.mesh, Some(reference), opts).map_err(|e| SetFailure {
            set: set_id.clone(),
            message: format!("candidate `{}`: {e}", c.id),
        })?;
        c.report = Some(report);
        Ok(())
    })
}

fn tokens_and_mask(mesh: &Mesh, opts: &DatasetOptions) -> Result<(Vec<u32>, Vec<u8>), String> {
    let qmesh = quantize(mesh, opts.bins).map_err(|e| e.to_string())?;
    let seq = tokenize(&qmesh);
    let qm = merge_to_quads(mesh, opts.score.max_dihedral_deg);
    let labels = label_faces(mesh, &qm, opts.tau, &opts.weights);
    let mask = build_token_mask(&labels, &seq).map_err(|e| e.to_string())?;
    Ok((seq.interior().to_vec(), mask.bits().to_vec()))
}

pub fn make_triplet(
    set: &CandidateSet,
    pair: &RankedPair,
    opts: &DatasetOptions,
) -> Result<PreferenceTriplet, SetFailure> {
    let fail = |id: &str, message: String| SetFailure {
        set: set.id.clone(),
        message: format!("candidate `{id}`: {message}"),
    };
    let pos = &set.candidates[pair.positive];
    let neg = &set.candidates[pair.negative];
    let (tokens_pos, mask_pos) = tokens_and_mask(&pos.mesh, opts).map_err(|m| fail(&pos.id, m))?;
    let (tokens_neg, mask_neg) = tokens_and_mask(&neg.mesh, opts).map_err(|m| fail(&neg.id, m))?;
    let report = |c: &super::Candidate| {
        c.report
            .clone()
            .ok_or_else(|| fail(&c.id, "no metric report".to_string()))
    };
    Ok(PreferenceTriplet {
        schema: DATASET_SCHEMA,
        set: set.id.clone(),
        pc: set.point_cloud.clone(),
        pos: pos.id.clone(),
        neg: neg.id.clone(),
        metrics: PairMetrics {
            pos: report(pos)?,
            neg: report(neg)?,
        },
        deltas: pair.deltas,
        mask_pos,
        mask_neg,
        tokens_pos,
        tokens_neg,
        bins: opts.bins,
        tau: opts.tau,
        seed: opts.score.seed,
    })
}

struct SetOutcome {
    examined: usize,
    triplets: Vec<PreferenceTriplet>,
}

fn process_set(mut set: CandidateSet, opts: &DatasetOptions) -> Result<SetOutcome, SetFailure> {
    evaluate_set(&mut set, &opts.score)?;
    let (pairs, examined) = rank_pairs(&set).map_err(|e| SetFailure {
        set: set.id.clone(),
        message: e.to_string(),
    })?;
    let triplets = pairs
        .iter()
        .map(|p| make_triplet(&set, p, opts))
        .collect::<Result<_, _>>()?;
    Ok(SetOutcome { examined, triplets })
}

#[derive(Debug, thiserror::Error)]
#[error("writing triplets of set `{set}`: {source}")]
pub struct DatasetError {
    pub set: String,
    #[source]
    pub source: io::Error,
}

/// Evaluates and ranks each candidate set, appending one JSON line per
/// triplet to `sink`. Sets are processed in parallel batches and written
/// in input order. A set that fails to load or evaluate is logged, counted
/// and skipped.
pub fn build_dataset<I, W>(sets: I, mut sink: W, opts: &DatasetOptions) -> Result<DatasetSummary, DatasetError>
where
    I: IntoIterator<Item = Result<CandidateSet, SetFailure>>,
    W: Write,
{
    let batch = rayon::current_num_threads().max(1);
    let mut summary = DatasetSummary::default();
    let mut pending = Vec::with_capacity(batch);
    let mut iter = sets.into_iter().peekable();
    while iter.peek().is_some() {
        pending.clear();
        pending.extend(iter.by_ref().take(batch));
        let outcomes: Vec<Result<SetOutcome, SetFailure>> = std::mem::take(&mut pending)
            .into_par_iter()
            .map(|set| set.and_then(|s| process_set(s, opts)))
            .collect();
        for outcome in outcomes {
            match outcome {
                Ok(out) => {
                    summary.sets_processed += 1;
                    summary.pairs_examined += out.examined;
                    for t in &out.triplets {
                        let line = serde_json::to_string(t).expect("triplet serializes");
                        writeln!(sink, "{line}").map_err(|source| DatasetError {
                            set: t.set.clone(),
                            source,
                        })?;
                    }
                    summary.triplets_emitted += out.triplets.len();
                }
                Err(failure) => {
                    warn!("skipping set `{}`: {}", failure.set, failure.message);
                    summary.sets_failed += 1;
                    summary.failures.push(failure);
                }
            }
        }
    }
    sink.flush().map_err(|source| DatasetError {
        set: String::new(),
        source,
    })?;
    if summary.pairs_examined > 0 {
        summary.dominance_rate = summary.triplets_emitted as f64 / summary.pairs_examined as f64;
    }
    Ok(summary)
}
