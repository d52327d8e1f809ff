use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::Context;
use meshpref::mask::{build_token_mask, label_faces, MaskWeights};
use meshpref::mdpo::{self, MdpoConfig, RatioForm, ToyPolicy};
use meshpref::mesh::{quantize, write_obj};
use meshpref::metrics::{evaluate, MetricReport, ScoreOptions, REPORT_SCHEMA};
use meshpref::preference::synthetic::synthetic_sets;
use meshpref::preference::{self as pref, check_relation, evaluate_set, rank_pairs, DatasetOptions, MetricDeltas};
use meshpref::quad::merge_to_quads;
use meshpref::shapes;
use serde::Serialize;

use crate::exit::{input, internal, usage, CliResult};
use crate::load::{self, emit, json_bytes};
use crate::{Form, MaskArgs, ReportFormat, SamplingArgs};

const SCHEMA: u32 = 1;

/// Seed for sampling a reference cloud from a mesh file.
fn cloud_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn check_sampling(s: &SamplingArgs) -> CliResult<ScoreOptions> {
    if s.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if !(s.dihedral_tol > 0.0 && s.dihedral_tol <= 180.0) {
        return Err(usage("--dihedral-tol must be in (0, 180]"));
    }
    Ok(ScoreOptions {
        samples: s.samples,
        seed: s.seed,
        max_dihedral_deg: s.dihedral_tol,
    })
}

fn check_dihedral(tol: f64) -> CliResult<()> {
    if tol > 0.0 && tol <= 180.0 {
        Ok(())
    } else {
        Err(usage("--dihedral-tol must be in (0, 180]"))
    }
}

fn check_mask(m: &MaskArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&m.tau) {
        return Err(usage("--tau must be in [0, 1]"));
    }
    if m.bins < 2 {
        return Err(usage("--bins must be at least 2"));
    }
    Ok(())
}

pub fn score(mesh: &Path, pc: Option<&Path>, sampling: &SamplingArgs, out: Option<&Path>) -> CliResult<()> {
    let opts = check_sampling(sampling)?;
    let mesh = load::mesh(mesh)?;
    let cloud = pc
        .map(|p| load::point_cloud(p, opts.samples, cloud_seed(opts.seed)))
        .transpose()?;
    let report = evaluate(&mesh, cloud.as_ref(), &opts)?;
    emit(out, &json_bytes(&report))
}

#[derive(Serialize)]
struct MaskOutput {
    schema: u32,
    tau: f64,
    bins: u32,
    /// Per source face, in input order.
    face_labels: Vec<bool>,
    /// Source face of each token block.
    face_order: Vec<usize>,
    token_mask: Vec<u8>,
    quad_scores: Vec<f64>,
    good_fraction: f64,
}

pub fn mask(mesh: &Path, args: &MaskArgs, dihedral_tol: f64, out: Option<&Path>) -> CliResult<()> {
    check_mask(args)?;
    check_dihedral(dihedral_tol)?;
    let mesh = load::mesh(mesh)?;
    let qm = merge_to_quads(&mesh, dihedral_tol);
    let labels = label_faces(&mesh, &qm, args.tau, &MaskWeights::default());
    let seq = meshpref::mesh::tokenize(&quantize(&mesh, args.bins)?);
    let token_mask = build_token_mask(&labels, &seq).map_err(internal)?;
    let output = MaskOutput {
        schema: SCHEMA,
        tau: args.tau,
        bins: args.bins,
        good_fraction: labels.good_fraction(),
        face_order: seq.source_faces().map(<[usize]>::to_vec).unwrap_or_default(),
        token_mask: token_mask.bits().to_vec(),
        quad_scores: labels.quad_scores,
        face_labels: labels.good,
    };
    emit(out, &json_bytes(&output))
}

#[derive(Serialize)]
struct RankedCandidate {
    id: String,
    metrics: MetricReport,
}

#[derive(Serialize)]
struct RankedPairOut {
    pos: String,
    neg: String,
    deltas: MetricDeltas,
}

#[derive(Serialize)]
struct RankOutput {
    schema: u32,
    seed: u64,
    n_samples: usize,
    pairs_examined: usize,
    candidates: Vec<RankedCandidate>,
    pairs: Vec<RankedPairOut>,
}

pub fn rank(candidates: &Path, pointcloud: &Path, sampling: &SamplingArgs, out: Option<&Path>) -> CliResult<()> {
    let opts = check_sampling(sampling)?;
    let cloud = load::point_cloud(pointcloud, opts.samples, cloud_seed(opts.seed))?;
    let skip = pointcloud.file_name().and_then(|n| n.to_str());
    let files = load::obj_files(candidates, skip)?;
    let id = candidates.display().to_string();
    let mut set = load::candidate_set(&id, pointcloud.display().to_string(), cloud, &files)?;
    evaluate_set(&mut set, &opts).map_err(|f| input(anyhow::anyhow!("{}", f.message)))?;
    let (pairs, examined) = rank_pairs(&set).map_err(input)?;
    check_relation(&pairs, set.candidates.len()).map_err(|e| internal(anyhow::anyhow!(e)))?;
    let name = |i: usize| set.candidates[i].id.clone();
    let output = RankOutput {
        schema: SCHEMA,
        seed: opts.seed,
        n_samples: opts.samples,
        pairs_examined: examined,
        pairs: pairs
            .iter()
            .map(|p| RankedPairOut {
                pos: name(p.positive),
                neg: name(p.negative),
                deltas: p.deltas,
            })
            .collect(),
        candidates: set
            .candidates
            .into_iter()
            .map(|c| RankedCandidate {
                id: c.id,
                metrics: c.report.expect("every candidate was evaluated"),
            })
            .collect(),
    };
    emit(out, &json_bytes(&output))
}

#[derive(Serialize)]
struct DatasetRun {
    schema: u32,
    seed: u64,
    #[serde(flatten)]
    summary: pref::DatasetSummary,
}

pub fn build_dataset(
    sets: &Path,
    out: &Path,
    sampling: &SamplingArgs,
    mask: &MaskArgs,
    summary_path: Option<&Path>,
) -> CliResult<()> {
    let score = check_sampling(sampling)?;
    check_mask(mask)?;
    let opts = DatasetOptions {
        score,
        tau: mask.tau,
        weights: MaskWeights::default(),
        bins: mask.bins,
    };
    let dirs = load::subdirectories(sets)?;
    let file = File::create(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(input)?;
    let loaded = dirs
        .iter()
        .map(|d| load::set_directory(d, score.samples, cloud_seed(score.seed)));
    let summary = pref::build_dataset(loaded, BufWriter::new(file), &opts).map_err(input)?;
    let processed = summary.sets_processed;
    let failed = summary.sets_failed;
    let run = json_bytes(&DatasetRun {
        schema: SCHEMA,
        seed: score.seed,
        summary,
    });
    match summary_path {
        Some(p) => emit(Some(p), &run)?,
        None => eprint!("{}", String::from_utf8_lossy(&run)),
    }
    if processed == 0 && failed > 0 {
        return Err(usage(format!("all {failed} candidate sets failed to load or evaluate")));
    }
    Ok(())
}

pub struct TrainArgs<'a> {
    pub dataset: &'a Path,
    pub beta: f64,
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    pub trace: Option<&'a Path>,
    pub checkpoint: Option<&'a Path>,
    pub form: Form,
    pub global: bool,
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    schema: u32,
    seed: u64,
    beta: f64,
    learning_rate: f64,
    steps: usize,
    conditions: &'a [String],
    policy: &'a ToyPolicy,
}

#[derive(Serialize)]
struct TrainSummary {
    schema: u32,
    seed: u64,
    triplets: usize,
    conditions: usize,
    vocab: usize,
    steps: usize,
    initial_loss: f64,
    final_loss: f64,
    final_margin: f64,
    initial_pos_mass: f64,
    final_pos_mass: f64,
}

pub fn train_toy(a: TrainArgs<'_>) -> CliResult<()> {
    let cfg = MdpoConfig {
        beta: a.beta,
        learning_rate: a.lr,
        steps: a.steps,
        seed: a.seed,
        form: match a.form {
            Form::L1Ratio => RatioForm::L1Ratio,
            Form::SumLogRatio => RatioForm::SumLogRatio,
        },
        global: a.global,
        ..MdpoConfig::default()
    };
    cfg.validate()?;
    let file = File::open(a.dataset)
        .with_context(|| format!("opening {}", a.dataset.display()))
        .map_err(input)?;
    let records = mdpo::read_triplets_jsonl(BufReader::new(file))?;
    let set = mdpo::training_set(&records)?;
    let reference = set.reference_policy(cfg.seed)?;
    let outcome = mdpo::train_toy(&reference, &set.triplets, &cfg)?;
    if let Some(path) = a.trace {
        let mut csv = Vec::new();
        mdpo::write_trace_csv(&outcome.trace, &mut csv).map_err(internal)?;
        emit(Some(path), &csv)?;
    }
    if let Some(path) = a.checkpoint {
        let ck = Checkpoint {
            schema: SCHEMA,
            seed: cfg.seed,
            beta: cfg.beta,
            learning_rate: cfg.learning_rate,
            steps: cfg.steps,
            conditions: &set.conditions,
            policy: &outcome.policy,
        };
        emit(Some(path), &json_bytes(&ck))?;
    }
    let first = outcome.trace.first().expect("trace has step 0");
    let last = outcome.trace.last().expect("trace has step 0");
    let summary = TrainSummary {
        schema: SCHEMA,
        seed: cfg.seed,
        triplets: set.triplets.len(),
        conditions: set.conditions.len(),
        vocab: set.vocab,
        steps: cfg.steps,
        initial_loss: first.loss,
        final_loss: last.loss,
        final_margin: last.margin,
        initial_pos_mass: outcome.initial_pos_mass,
        final_pos_mass: outcome.final_pos_mass,
    };
    emit(None, &json_bytes(&summary))
}

#[derive(Serialize, Default, Clone, Copy)]
struct MetricRow {
    cd: Option<f64>,
    hd: Option<f64>,
    ts: f64,
    ber: f64,
}

#[derive(Serialize)]
struct ReportOutput {
    schema: u32,
    reports: usize,
    mean: MetricRow,
    median: MetricRow,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

fn summarize(reports: &[MetricReport], stat: fn(&[f64]) -> Option<f64>) -> MetricRow {
    let column = |f: fn(&MetricReport) -> Option<f64>| reports.iter().filter_map(f).collect::<Vec<_>>();
    MetricRow {
        cd: stat(&column(|r| r.cd)),
        hd: stat(&column(|r| r.hd)),
        ts: stat(&column(|r| Some(r.ts))).unwrap_or(0.0),
        ber: stat(&column(|r| Some(r.ber))).unwrap_or(0.0),
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn report(dir: &Path, format: ReportFormat, out: Option<&Path>) -> CliResult<()> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))
        .map_err(input)?
    {
        let path = entry.map_err(input)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    let reports = files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(input)?;
            serde_json::from_str::<MetricReport>(&text)
                .with_context(|| format!("{} is not a metric report", p.display()))
                .map_err(input)
        })
        .collect::<CliResult<Vec<_>>>()?;
    if reports.is_empty() {
        return Err(usage(format!("no .json reports in {}", dir.display())));
    }
    if let Some(r) = reports.iter().find(|r| r.schema != REPORT_SCHEMA) {
        return Err(usage(format!("unsupported report schema {}", r.schema)));
    }
    let output = ReportOutput {
        schema: SCHEMA,
        reports: reports.len(),
        mean: summarize(&reports, mean),
        median: summarize(&reports, median),
    };
    let bytes = match format {
        ReportFormat::Json => json_bytes(&output),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let row = |w: &mut csv::Writer<Vec<u8>>, name: &str, m: &MetricRow| {
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([name.to_string(), opt(m.cd), opt(m.hd), m.ts.to_string(), m.ber.to_string()])
            };
            w.write_record(["stat", "cd", "hd", "ts", "ber"]).map_err(internal)?;
            row(&mut w, "mean", &output.mean).map_err(internal)?;
            row(&mut w, "median", &output.median).map_err(internal)?;
            w.into_inner().map_err(|e| internal(anyhow::anyhow!("{e}")))?
        }
        ReportFormat::Table => {
            let mut s = format!("{} reports\n{:<8}{:>10}{:>10}{:>10}{:>10}\n", output.reports, "", "CD", "HD", "TS", "BER");
            for (name, m) in [("mean", &output.mean), ("median", &output.median)] {
                s += &format!(
                    "{:<8}{:>10}{:>10}{:>10}{:>10}\n",
                    name,
                    cell(m.cd),
                    cell(m.hd),
                    format!("{:.2}", m.ts),
                    format!("{:.4}", m.ber)
                );
            }
            s.into_bytes()
        }
    };
    emit(out, &bytes)
}

pub fn synth(
    out: &Path,
    sets: usize,
    candidates: usize,
    subdivisions: usize,
    cloud_samples: usize,
    seed: u64,
) -> CliResult<()> {
    if subdivisions == 0 || cloud_samples == 0 {
        return Err(usage("--subdivisions and --cloud-samples must be at least 1"));
    }
    let base = shapes::subdivided_cube(subdivisions);
    let generated = synthetic_sets(&base, sets, candidates, cloud_samples, seed)?;
    for set in generated {
        let dir = out.join(&set.id);
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(input)?;
        let mut cloud = Vec::new();
        write_obj(&mut cloud, &set.cloud.points, std::iter::empty::<[usize; 3]>()).map_err(internal)?;
        emit(Some(&dir.join(load::POINTCLOUD_FILE)), &cloud)?;
        for (i, mesh) in set.meshes.iter().enumerate() {
            emit(Some(&dir.join(format!("cand_{i}.obj"))), mesh.to_obj_string().as_bytes())?;
        }
    }
    Ok(())
}

pub fn tokenize(mesh: &Path, bins: u32, out: Option<&Path>) -> CliResult<()> {
    if bins < 2 {
        return Err(usage("--bins must be at least 2"));
    }
    let seq = meshpref::mesh::tokenize(&quantize(&load::mesh(mesh)?, bins)?);
    let mut buf = Vec::new();
    seq.write_lines(&mut buf).map_err(internal)?;
    emit(out, &buf)
}

pub fn quads(mesh: &Path, dihedral_tol: f64, out: Option<&Path>) -> CliResult<()> {
    check_dihedral(dihedral_tol)?;
    let mesh = load::mesh(mesh)?;
    let qm = merge_to_quads(&mesh, dihedral_tol);
    let mut buf = Vec::new();
    qm.write_obj(&mut buf, &mesh).map_err(internal)?;
    emit(out, &buf)
}
