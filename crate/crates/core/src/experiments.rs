//! Seeded multi-trial experiments: single-planner path success and ring
//! orchestration success, with reference bands and failure census.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cml::{random_pair, CmlModel, FailureKind, PairOutcome, PathSuccess, PlanMode};
use crate::error::Result;
use crate::graph::{random_connected_graph, Graph, TohState};
use crate::stats::mean_std;
use crate::toh::{
    build_composite, build_maps, build_monolithic_policy, build_partial_policies, build_toh_planner,
    random_bipolar_matrix, run_composite, run_mapping, run_monolithic, run_partial, Method, OrchestrationRun,
    RingConfig, RingSystem, TargetMode,
};

/// Independent stream for `(master, key)`: same seed, distinct stream id.
pub fn derive_rng(master: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(key);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Runs `f` for every trial index and returns results in index order.
/// `Parallel` falls back to sequential when built without the `parallel` feature.
pub fn map_trials<T, F>(trials: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(f).collect()
        }
        _ => (0..trials).map(f).collect(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    /// Random (start, target) pairs evaluated per trial.
    pub pairs: usize,
    pub d: usize,
    pub ring: RingConfig,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(master_seed: u64, trials: usize, d: usize) -> Self {
        let mut ring = RingConfig::default();
        ring.train.d = d;
        ExperimentConfig { master_seed, trials, pairs: 50, d, ring, execution: Execution::Parallel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Row {
    #[serde(rename = "toh")]
    Toh,
    #[serde(rename = "composite")]
    Composite,
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "rand_composite")]
    RandComposite,
}

impl Row {
    pub const ALL: [Row; 4] = [Row::Toh, Row::Composite, Row::Rand, Row::RandComposite];

    pub fn name(self) -> &'static str {
        match self {
            Row::Toh => "toh",
            Row::Composite => "composite",
            Row::Rand => "rand",
            Row::RandComposite => "rand_composite",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Stream id of the trial under the master seed.
    pub stream: u64,
    /// Fraction of pairs (planner rows), 0/1 (policy runs) or fraction of
    /// ring commands carried out (planner-driven orchestration).
    pub success: f64,
    pub steps: usize,
    pub failure_kind: FailureKind,
    pub failures: Vec<PairOutcome>,
    pub similarity: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialReport {
    pub table: u8,
    pub row: String,
    pub mode: String,
    pub per_trial: Vec<TrialRecord>,
    pub mean: f64,
    pub std: f64,
    pub similarity: Option<(f64, f64)>,
}

impl TrialReport {
    fn assemble(table: u8, row: &str, mode: &str, mut per_trial: Vec<TrialRecord>) -> Self {
        per_trial.sort_by_key(|r| r.trial);
        let xs: Vec<f64> = per_trial.iter().map(|r| r.success).collect();
        let (mean, std) = mean_std(&xs);
        let sims: Vec<f64> = per_trial.iter().filter_map(|r| r.similarity).collect();
        let similarity = (!sims.is_empty()).then(|| mean_std(&sims));
        TrialReport { table, row: row.into(), mode: mode.into(), per_trial, mean, std, similarity }
    }

    pub fn failures(&self) -> impl Iterator<Item = &PairOutcome> {
        self.per_trial.iter().flat_map(|r| r.failures.iter())
    }
}

fn planner_record(trial: usize, stream: u64, ps: PathSuccess) -> TrialRecord {
    let failures: Vec<PairOutcome> = ps.failures().cloned().collect();
    let failure_kind = failures.first().map_or(FailureKind::None, |f| f.failure);
    TrialRecord {
        trial,
        stream,
        success: ps.mean,
        steps: ps.outcomes.iter().map(|o| o.steps).sum(),
        failure_kind,
        failures,
        similarity: None,
        note: None,
    }
}

fn evaluate_pairs(m: &CmlModel, pairs: &[(usize, usize)], mode: PlanMode) -> PathSuccess {
    PathSuccess::from_outcomes(pairs.iter().map(|&(a, b)| m.plan_pair(a, b, mode, m.default_max_steps())).collect())
}

fn pairs_for(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    (0..count).map(|_| random_pair(n, rng)).collect()
}

/// Single-planner path success: rows x {raw, sign}.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    let outcomes = map_trials(cfg.trials, cfg.execution, |t| table2_trial(cfg, t));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for (ri, row) in Row::ALL.iter().enumerate() {
        for (mi, mode) in [PlanMode::Raw, PlanMode::Sign].iter().enumerate() {
            let recs = outcomes.iter().map(|o| o[ri][mi].clone()).collect();
            reports.push(TrialReport::assemble(2, row.name(), plan_mode_name(*mode), recs));
        }
    }
    Ok(reports)
}

pub fn plan_mode_name(m: PlanMode) -> &'static str {
    match m {
        PlanMode::Raw => "raw",
        PlanMode::Sign => "sign",
    }
}

fn table2_trial(cfg: &ExperimentConfig, t: usize) -> Result<Vec<Vec<TrialRecord>>> {
    let stream = (2u64 << 32) | t as u64;
    let mut rng = derive_rng(cfg.master_seed, stream);
    let ct = build_toh_planner(cfg.d, &mut rng)?;
    let rs = RingSystem::build(&cfg.ring, &mut rng)?;
    let cs = build_composite(&rs)?;
    let rand_graph = random_connected_graph(27, 39, &mut rng)?;
    let rand = CmlModel::from_states(&rand_graph, &random_bipolar_matrix(cfg.d, 27, &mut rng))?;
    let rc_graph = random_connected_graph(27, 39, &mut rng)?;
    let mut perm: Vec<usize> = (0..27).collect();
    perm.shuffle(&mut rng);
    let comp = rs.composite_states();
    let shuffled = nalgebra::DMatrix::from_fn(cfg.d, 27, |i, j| comp[(i, perm[j])]);
    let rand_comp = CmlModel::from_states(&rc_graph, &shuffled)?;
    let mut rows = Vec::new();
    for m in [&ct, &cs, &rand, &rand_comp] {
        let pairs = pairs_for(27, cfg.pairs, &mut rng);
        rows.push(
            [PlanMode::Raw, PlanMode::Sign]
                .iter()
                .map(|&mode| planner_record(t, stream, evaluate_pairs(m, &pairs, mode)))
                .collect(),
        );
    }
    Ok(rows)
}

/// Ring orchestration success: methods x {raw, sign, recover}.
pub fn run_table3(cfg: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    let outcomes = map_trials(cfg.trials, cfg.execution, |t| table3_trial(cfg, t));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for (ki, method) in Method::ALL.iter().enumerate() {
        for (mi, mode) in TargetMode::ALL.iter().enumerate() {
            let recs = outcomes.iter().map(|o| o[ki][mi].clone()).collect();
            reports.push(TrialReport::assemble(3, method.name(), mode.name(), recs));
        }
    }
    Ok(reports)
}

/// Everything one orchestration trial needs, built from a single stream.
pub struct Table3Fixture {
    pub rings: RingSystem,
    pub planner: CmlModel,
    pub composite: CmlModel,
    pub policy: crate::hdc::Hypervector,
    pub partial: [crate::hdc::Hypervector; 3],
    pub maps: [crate::hdc::Hypervector; 3],
    pub pairs: Vec<(TohState, TohState)>,
}

impl Table3Fixture {
    pub fn build(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let rings = RingSystem::build(&cfg.ring, rng)?;
        let planner = build_toh_planner(cfg.d, rng)?;
        let composite = build_composite(&rings)?;
        let policy = build_monolithic_policy(&rings, rng)?;
        let partial = build_partial_policies(&rings, rng)?;
        let maps = build_maps(&planner, &rings, rng)?;
        let pairs = pairs_for(27, cfg.pairs, rng)
            .into_iter()
            .map(|(a, b)| (TohState::from_index(a), TohState::from_index(b)))
            .collect();
        Ok(Table3Fixture { rings, planner, composite, policy, partial, maps, pairs })
    }
}

pub const POLICY_STEP_CAP: usize = 12;
pub const PARTIAL_STEP_LIMIT: usize = 7;

fn table3_trial(cfg: &ExperimentConfig, t: usize) -> Result<Vec<Vec<TrialRecord>>> {
    let stream = (3u64 << 32) | t as u64;
    let mut rng = derive_rng(cfg.master_seed, stream);
    let fx = Table3Fixture::build(cfg, &mut rng)?;
    let mut out = Vec::new();
    for method in Method::ALL {
        let mut per_mode = Vec::new();
        for mode in TargetMode::ALL {
            per_mode.push(match method {
                Method::Monolithic | Method::Partial => {
                    let run = match method {
                        Method::Monolithic => run_monolithic(&fx.rings, &fx.policy, mode, POLICY_STEP_CAP),
                        _ => run_partial(&fx.rings, &fx.partial, mode, PARTIAL_STEP_LIMIT),
                    };
                    let sims = run.similarities();
                    TrialRecord {
                        trial: t,
                        stream,
                        success: if run.solved { 1.0 } else { 0.0 },
                        steps: run.steps.len(),
                        failure_kind: if run.solved { FailureKind::None } else { FailureKind::Stall },
                        failures: Vec::new(),
                        similarity: (!sims.is_empty()).then(|| mean_std(&sims).0),
                        note: run.note.clone().or_else(|| (!run.solved).then(|| run.board_sequence().join(" "))),
                    }
                }
                Method::Mapping | Method::Composite => {
                    let (mut ok, mut total, mut steps, mut sims) = (0, 0, 0, Vec::new());
                    for &(a, b) in &fx.pairs {
                        let run = match method {
                            Method::Mapping => run_mapping(&fx.planner, &fx.rings, &fx.maps, mode, a, b),
                            _ => run_composite(&fx.composite, &fx.rings, mode, a, b),
                        };
                        ok += run.commands_ok;
                        total += run.commands;
                        steps += run.steps.len();
                        sims.extend(run.similarities());
                    }
                    let success = if total == 0 { 1.0 } else { ok as f64 / total as f64 };
                    TrialRecord {
                        trial: t,
                        stream,
                        success,
                        steps,
                        failure_kind: if ok == total { FailureKind::None } else { FailureKind::Stall },
                        failures: Vec::new(),
                        similarity: (!sims.is_empty()).then(|| mean_std(&sims).0),
                        note: None,
                    }
                }
            });
        }
        out.push(per_mode);
    }
    Ok(out)
}

/// Board pairs where the planner ends up oscillating on the baseline graph.
pub const CORNER_PAIRS: [(&str, &str); 3] = [("133", "233"), ("122", "322"), ("211", "311")];

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FailureCensus {
    /// (pair labels, count) in first-seen order.
    pub groups: Vec<((String, String), usize)>,
    pub non_oscillating: usize,
    pub outside_corners: usize,
}

impl FailureCensus {
    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.1).sum::<usize>() + self.non_oscillating
    }

    pub fn all_at_corners(&self) -> bool {
        self.non_oscillating == 0 && self.outside_corners == 0
    }
}

pub fn failure_census(report: &TrialReport, graph: &Graph) -> FailureCensus {
    let mut c = FailureCensus::default();
    for f in report.failures() {
        match f.failure_nodes {
            Some((a, b)) if f.failure == FailureKind::Oscillation => {
                let key = (graph.label(a), graph.label(b));
                let corner = CORNER_PAIRS.iter().any(|&(x, y)| (x, y) == (key.0.as_str(), key.1.as_str()));
                if !corner {
                    c.outside_corners += 1;
                }
                match c.groups.iter_mut().find(|g| g.0 == key) {
                    Some(g) => g.1 += 1,
                    None => c.groups.push((key, 1)),
                }
            }
            _ => c.non_oscillating += 1,
        }
    }
    c
}

/// Expected value of a reported cell and the band it is judged against.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Reference {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Reference {
    pub const fn exact(v: f64) -> Self {
        Reference { mean: v, std: 0.0, lo: v, hi: v }
    }

    pub const fn band(mean: f64, std: f64, lo: f64, hi: f64) -> Self {
        Reference { mean, std, lo, hi }
    }

    /// Mean plus or minus the reference spread and 0.02 of sampling slack.
    pub fn slack(mean: f64, std: f64) -> Self {
        Reference { mean, std, lo: mean - std - 0.02, hi: mean + std + 0.02 }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - 1e-12 && x <= self.hi + 1e-12
    }
}

/// Reference for a path-success cell.
pub fn success_reference(table: u8, row: &str, mode: &str) -> Option<Reference> {
    Some(match (table, row, mode) {
        (2, "toh", "raw") => Reference::band(0.846, 0.042, 0.78, 0.92),
        (2, "composite", "raw") => Reference::band(0.831, 0.031, 0.77, 0.90),
        (2, _, _) => Reference::exact(1.0),
        (3, "mapping", "raw") => Reference::band(0.889, 0.015, 0.83, 0.95),
        (3, "mapping", "sign") => Reference::band(0.694, 0.027, 0.62, 0.77),
        (3, _, _) => Reference::exact(1.0),
        _ => return None,
    })
}

/// Reference for the decode-similarity statistic of an orchestration method.
pub fn similarity_reference(method: &str) -> Option<Reference> {
    Some(match method {
        "monolithic" => Reference::slack(0.308, 0.014),
        "partial" => Reference::slack(0.617, 0.210),
        "mapping" => Reference::slack(0.155, 0.032),
        "composite" => Reference::slack(0.503, 0.023),
        _ => return None,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub table: u8,
    pub row: String,
    pub mode: String,
    pub quantity: String,
    pub value: f64,
    pub reference: Reference,
    pub pass: bool,
}

/// One verdict per success cell, plus one per method similarity (table 3,
/// taken from the raw-mode run).
pub fn verdicts(reports: &[TrialReport]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for r in reports {
        if let Some(reference) = success_reference(r.table, &r.row, &r.mode) {
            out.push(Verdict {
                table: r.table,
                row: r.row.clone(),
                mode: r.mode.clone(),
                quantity: "success".into(),
                value: r.mean,
                reference,
                pass: reference.contains(r.mean),
            });
        }
        if r.table == 3 && r.mode == "raw" {
            if let (Some(reference), Some((m, _))) = (similarity_reference(&r.row), r.similarity) {
                out.push(Verdict {
                    table: 3,
                    row: r.row.clone(),
                    mode: r.mode.clone(),
                    quantity: "similarity".into(),
                    value: m,
                    reference,
                    pass: reference.contains(m),
                });
            }
        }
    }
    out
}

/// Comma-separated table, one row per cell.
pub fn reports_csv(reports: &[TrialReport], seed: u64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "method", "mode", "mean", "std", "trials", "seed", "sim_mean", "sim_std"])?;
    for r in reports {
        let (sm, ss) = r.similarity.map_or((String::new(), String::new()), |(m, s)| (fmt(m), fmt(s)));
        w.write_record([
            r.table.to_string(),
            r.row.clone(),
            r.mode.clone(),
            fmt(r.mean),
            fmt(r.std),
            r.per_trial.len().to_string(),
            seed.to_string(),
            sm,
            ss,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn verdicts_csv(vs: &[Verdict]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "method", "mode", "quantity", "value", "expected", "expected_std", "lo", "hi", "verdict"])?;
    for v in vs {
        w.write_record([
            v.table.to_string(),
            v.row.clone(),
            v.mode.clone(),
            v.quantity.clone(),
            fmt(v.value),
            fmt(v.reference.mean),
            fmt(v.reference.std),
            fmt(v.reference.lo),
            fmt(v.reference.hi),
            if v.pass { "PASS" } else { "FAIL" }.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Stream used for the step-by-step runs from 111 to 222.
pub const TRACE_STREAM: u64 = 5 << 32;

/// Decode mode used by default for each method's step-by-step run. Mapping
/// decodes are too noisy to act on without cleanup.
pub fn trace_mode(method: Method) -> TargetMode {
    match method {
        Method::Mapping => TargetMode::Recover,
        _ => TargetMode::Raw,
    }
}

/// Single run from 111 to 222 on a fixture drawn from the trace stream.
pub fn golden_run(seed: u64, d: usize, method: Method, mode: TargetMode) -> Result<OrchestrationRun> {
    let cfg = ExperimentConfig::new(seed, 1, d);
    let mut rng = derive_rng(seed, TRACE_STREAM);
    let fx = Table3Fixture::build(&cfg, &mut rng)?;
    let (start, goal) = (TohState::new(1, 1, 1), TohState::new(2, 2, 2));
    Ok(match method {
        Method::Monolithic => run_monolithic(&fx.rings, &fx.policy, mode, POLICY_STEP_CAP),
        Method::Partial => run_partial(&fx.rings, &fx.partial, mode, PARTIAL_STEP_LIMIT),
        Method::Mapping => run_mapping(&fx.planner, &fx.rings, &fx.maps, mode, start, goal),
        Method::Composite => run_composite(&fx.composite, &fx.rings, mode, start, goal),
    })
}
