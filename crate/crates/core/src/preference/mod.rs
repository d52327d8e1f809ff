//! Preference pairs from sets of candidate meshes.
//!
//! A pair is kept only when one candidate is strictly better on all three of
//! boundary edge ratio (lower), topology score (higher) and Hausdorff
//! distance (lower). Any tie or disagreement drops the pair. Chamfer
//! distance is reported but never ranked on.

mod dataset;
pub mod synthetic;

pub use dataset::{
    build_dataset, evaluate_set, make_triplet, DatasetOptions, DatasetSummary, MetricDeltas,
    PairMetrics, PreferenceTriplet, SetFailure,
};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;
use crate::metrics::{MetricReport, ReferenceCloud};

pub const DEFAULT_CANDIDATES: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PreferenceError {
    #[error("candidate `{0}` has no metric report")]
    MissingReport(String),
    #[error("candidate `{candidate}` is missing metric `{metric}`")]
    MissingMetric {
        candidate: String,
        metric: &'static str,
    },
    #[error("a candidate set needs at least 2 candidates, found {0}")]
    TooFewCandidates(usize),
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub mesh: Mesh,
    pub report: Option<MetricReport>,
}

/// Candidates generated for one conditioning point cloud.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub id: String,
    /// Label of the point cloud, usually its path.
    pub point_cloud: String,
    pub reference: ReferenceCloud,
    pub candidates: Vec<Candidate>,
}

/// One dominance relation found among the candidates of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    /// Index of the preferred candidate within the set.
    pub positive: usize,
    pub negative: usize,
    pub deltas: MetricDeltas,
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    ber: f64,
    ts: f64,
    hd: f64,
}

/// `a` strictly beats `b` on every ranked metric.
fn dominates(a: &Ranked, b: &Ranked) -> bool {
    a.ber < b.ber && a.ts > b.ts && a.hd < b.hd
}

fn ranked(c: &Candidate) -> Result<Ranked, PreferenceError> {
    let r = c
        .report
        .as_ref()
        .ok_or_else(|| PreferenceError::MissingReport(c.id.clone()))?;
    let hd = r.hd.ok_or_else(|| PreferenceError::MissingMetric {
        candidate: c.id.clone(),
        metric: "hd",
    })?;
    Ok(Ranked {
        ber: r.ber,
        ts: r.ts,
        hd,
    })
}

/// Examines every unordered pair of candidates and returns the dominance
/// relations, ordered by candidate id pair. Also returns the number of
/// pairs examined.
pub fn rank_pairs(set: &CandidateSet) -> Result<(Vec<RankedPair>, usize), PreferenceError> {
    let n = set.candidates.len();
    if n < 2 {
        return Err(PreferenceError::TooFewCandidates(n));
    }
    let metrics = set
        .candidates
        .iter()
        .map(ranked)
        .collect::<Result<Vec<_>, _>>()?;
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by(|&a, &b| set.candidates[a].id.cmp(&set.candidates[b].id).then(a.cmp(&b)));

    let mut pairs = Vec::new();
    let mut examined = 0;
    for (k, &i) in by_id.iter().enumerate() {
        for &j in &by_id[k + 1..] {
            examined += 1;
            let (a, b) = (&metrics[i], &metrics[j]);
            let (pos, neg) = if dominates(a, b) {
                (i, j)
            } else if dominates(b, a) {
                (j, i)
            } else {
                continue;
            };
            let (p, q) = (&metrics[pos], &metrics[neg]);
            pairs.push(RankedPair {
                positive: pos,
                negative: neg,
                deltas: MetricDeltas {
                    ber: q.ber - p.ber,
                    ts: p.ts - q.ts,
                    hd: q.hd - p.hd,
                },
            });
        }
    }
    Ok((pairs, examined))
}

/// Checks that the emitted relation is antisymmetric and acyclic.
pub fn check_relation(pairs: &[RankedPair], candidates: usize) -> Result<(), String> {
    let mut adj = vec![vec![false; candidates]; candidates];
    for p in pairs {
        if adj[p.negative][p.positive] {
            return Err(format!("both {} > {} and the reverse", p.positive, p.negative));
        }
        adj[p.positive][p.negative] = true;
    }
    // Kahn's algorithm; leftover nodes sit on a cycle
    let mut indegree: Vec<usize> = (0..candidates)
        .map(|j| (0..candidates).filter(|&i| adj[i][j]).count())
        .collect();
    let mut ready: Vec<usize> = (0..candidates).filter(|&j| indegree[j] == 0).collect();
    let mut seen = 0;
    while let Some(i) = ready.pop() {
        seen += 1;
        for j in 0..candidates {
            if adj[i][j] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
    }
    match seen.cmp(&candidates) {
        Ordering::Equal => Ok(()),
        _ => Err("preference relation contains a cycle".to_string()),
    }
}
