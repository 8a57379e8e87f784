//! Cognitive map learner: node states `S` (d×n), edge actions `A` (d×e),
//! gating `G` (e×n) and the pseudo-inverse of `A` used for planning.
//!
//! Observation and choice matrices are identities, so nodes and edges are
//! handled as column indices throughout.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{GatingMatrix, Graph};
use crate::hdc::{cosine, dot, sgn, Hypervector};
use crate::linalg::{col, col_mut, normalize_columns, pinv};

pub const DEFAULT_THETA: f64 = 0.1;
pub const DEFAULT_PHI: f64 = 0.3;
/// Relative singular-value cutoff for `A⁺`. Trained models keep cycle-space
/// singular values at the size of the training residual; anything this far
/// below the largest one is treated as numerically null.
pub const DEFAULT_PINV_RCOND: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct CmlModel {
    graph: Graph,
    s: DMatrix<f64>,
    a: DMatrix<f64>,
    a_pinv: DMatrix<f64>,
    gating: GatingMatrix,
    pub theta: f64,
    pub phi: f64,
    pinv_rcond: f64,
    seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d: usize,
    pub alpha: f64,
    pub max_epochs: usize,
    /// Stop once the epoch update norm relative to the parameter norm falls below this.
    pub tol: f64,
    /// Also unit-normalize action columns after each epoch.
    pub normalize_actions: bool,
    pub pinv_rcond: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 1000,
            alpha: 0.1,
            max_epochs: 5000,
            tol: 1e-10,
            normalize_actions: false,
            pinv_rcond: DEFAULT_PINV_RCOND,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: usize,
    pub final_update: f64,
    /// Relative update norms of the last (up to) ten epochs.
    pub tail_updates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// Target is below the recognition threshold for every node.
    Unrecognized,
    /// Target reached; stays at the node.
    Settled(usize),
    /// One planning step taken to the node.
    Moved(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanStep {
    pub node: usize,
    pub utility: Vec<f64>,
    pub gated_utility: Vec<f64>,
    pub choice: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanTrace {
    pub steps: Vec<PlanStep>,
    /// Visited nodes, starting node first.
    pub path: Vec<usize>,
    pub reached: bool,
}

impl PlanTrace {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn end(&self) -> usize {
        *self.path.last().expect("path always holds the start node")
    }

    /// The first ordered transition taken at least three times, if any.
    pub fn oscillation(&self) -> Option<(usize, usize)> {
        let mut counts = std::collections::HashMap::new();
        for w in self.path.windows(2) {
            let k = counts.entry((w[0], w[1])).or_insert(0usize);
            *k += 1;
            if *k >= 3 {
                return Some((w[0], w[1]));
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    None,
    Oscillation,
    Budget,
    Stall,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairOutcome {
    pub start: usize,
    pub target: usize,
    pub reached: bool,
    pub steps: usize,
    pub failure: FailureKind,
    /// Oscillating node pair, unordered, smaller index first.
    pub failure_nodes: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    /// Target is the exact node-state column.
    Raw,
    /// Target is the elementwise sign of the node-state column.
    Sign,
}

impl CmlModel {
    fn assemble(graph: Graph, s: DMatrix<f64>, a: DMatrix<f64>, pinv_rcond: f64, seed: Option<u64>) -> Self {
        let a_pinv = pinv(&a, pinv_rcond);
        let gating = graph.gating_matrix();
        CmlModel { graph, s, a, a_pinv, gating, theta: DEFAULT_THETA, phi: DEFAULT_PHI, pinv_rcond, seed }
    }

    /// Model whose actions are computed directly: for edge `j -> i` the
    /// action is `s_i - s_j`, so prediction is exact.
    pub fn from_states(graph: &Graph, states: &DMatrix<f64>) -> Result<Self> {
        Self::from_states_with(graph, states, DEFAULT_PINV_RCOND)
    }

    pub fn from_states_with(graph: &Graph, states: &DMatrix<f64>, pinv_rcond: f64) -> Result<Self> {
        let s = normalized_states(graph, states)?;
        let d = s.nrows();
        let mut a = DMatrix::zeros(d, graph.e());
        for (c, &(j, i)) in graph.edges().iter().enumerate() {
            let (si, sj) = (col(&s, i), col(&s, j));
            for (k, x) in col_mut(&mut a, c).iter_mut().enumerate() {
                *x = si[k] - sj[k];
            }
        }
        Ok(Self::assemble(graph.clone(), s, a, pinv_rcond, None))
    }

    /// Delta-rule training with updates summed over each epoch.
    pub fn train<R: Rng + ?Sized>(graph: &Graph, cfg: &TrainConfig, rng: &mut R) -> Result<(Self, TrainStats)> {
        if cfg.d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let ns = Normal::new(0.0, 0.1).expect("valid normal");
        let na = Normal::new(0.0, 1.0).expect("valid normal");
        let s = DMatrix::from_fn(cfg.d, graph.n(), |_, _| ns.sample(rng));
        let a = DMatrix::from_fn(cfg.d, graph.e(), |_, _| na.sample(rng));
        let (s, a, stats) = delta_rule(graph, s, a, cfg, true)?;
        Ok((Self::assemble(graph.clone(), s, a, cfg.pinv_rcond, None), stats))
    }

    /// Training with `S` held fixed at the normalized `states`; only `A` learns.
    pub fn train_frozen_states<R: Rng + ?Sized>(
        graph: &Graph,
        states: &DMatrix<f64>,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<(Self, TrainStats)> {
        let s = normalized_states(graph, states)?;
        let na = Normal::new(0.0, 1.0).expect("valid normal");
        let a = DMatrix::from_fn(s.nrows(), graph.e(), |_, _| na.sample(rng));
        let (s, a, stats) = delta_rule(graph, s, a, cfg, false)?;
        Ok((Self::assemble(graph.clone(), s, a, cfg.pinv_rcond, None), stats))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_thresholds(mut self, theta: f64, phi: f64) -> Self {
        self.theta = theta;
        self.phi = phi;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
    pub fn d(&self) -> usize {
        self.s.nrows()
    }
    pub fn n(&self) -> usize {
        self.s.ncols()
    }
    pub fn e(&self) -> usize {
        self.a.ncols()
    }
    pub fn states(&self) -> &DMatrix<f64> {
        &self.s
    }
    pub fn actions(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn actions_pinv(&self) -> &DMatrix<f64> {
        &self.a_pinv
    }
    pub fn gating(&self) -> &GatingMatrix {
        &self.gating
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
    pub fn pinv_rcond(&self) -> f64 {
        self.pinv_rcond
    }

    pub fn state(&self, i: usize) -> &[f64] {
        col(&self.s, i)
    }

    pub fn state_vector(&self, i: usize) -> Hypervector {
        Hypervector::from_slice(self.state(i))
    }

    /// Elementwise sign of a node state.
    pub fn bipolar_state(&self, i: usize) -> Hypervector {
        Hypervector::from_vec(self.state(i).iter().map(|&x| sgn(x)).collect())
    }

    /// Cosine similarity of `v` to every node state.
    pub fn similarities(&self, v: &[f64]) -> Vec<f64> {
        let nv = dot(v, v).sqrt();
        (0..self.n())
            .map(|i| if nv == 0.0 { 0.0 } else { dot(v, self.state(i)) / nv })
            .collect()
    }

    /// Most similar node state; lowest index wins ties.
    pub fn cleanup(&self, v: &[f64]) -> (usize, f64) {
        argmax(&self.similarities(v))
    }

    pub fn utility(&self, target: &[f64], node: usize) -> Vec<f64> {
        let s = self.state(node);
        let diff = DVector::from_iterator(s.len(), target.iter().zip(s).map(|(t, x)| t - x));
        (&self.a_pinv * diff).as_slice().to_vec()
    }

    /// Winner-take-all over the edges leaving `node`. The planner always
    /// moves, even when every legal utility is non-positive.
    pub fn choose(&self, node: usize, utility: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &c in self.graph.out_edges(node) {
            let g = self.gating.get(c, node) * utility[c];
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((c, g));
            }
        }
        best.map(|(c, _)| c)
    }

    fn walk(&self, start: usize, target: &[f64], max_steps: usize, done: impl Fn(usize) -> bool) -> PlanTrace {
        let mut cur = start;
        let mut steps = Vec::new();
        let mut path = vec![start];
        while !done(cur) && steps.len() < max_steps {
            let utility = self.utility(target, cur);
            let Some(choice) = self.choose(cur, &utility) else { break };
            let gated_utility = (0..self.e()).map(|c| self.gating.get(c, cur) * utility[c]).collect();
            steps.push(PlanStep { node: cur, utility, gated_utility, choice });
            cur = self.graph.edge(choice).1;
            path.push(cur);
        }
        PlanTrace { steps, path, reached: done(cur) }
    }

    pub fn plan(&self, start: usize, target: usize, max_steps: usize) -> PlanTrace {
        self.walk(start, self.state(target), max_steps, |c| c == target)
    }

    /// Plan toward an arbitrary vector. Reached once the current node is the
    /// best match for the target and its similarity is at least `phi`.
    pub fn plan_to_vector(&self, start: usize, target: &Hypervector, max_steps: usize) -> PlanTrace {
        let (best, sim) = self.cleanup(target.as_slice());
        let ok = sim >= self.phi;
        self.walk(start, target.as_slice(), max_steps, |c| ok && c == best)
    }

    /// One module invocation on a node index.
    pub fn module_step_node(&self, target: &[f64], current: usize) -> StepOutcome {
        self.module_step_with(target, current, self.theta, self.phi)
    }

    /// Recognize the target, stop if already there, otherwise take one step.
    /// The current node counts as "there" when it is the best match for the
    /// target even if its similarity is below `phi`.
    pub fn module_step_with(&self, target: &[f64], current: usize, theta: f64, phi: f64) -> StepOutcome {
        let sims = self.similarities(target);
        let (best, top) = argmax(&sims);
        if top < theta || dot(target, target) == 0.0 {
            return StepOutcome::Unrecognized;
        }
        if sims[current] >= phi || current == best {
            return StepOutcome::Settled(current);
        }
        let u = self.utility(target, current);
        match self.choose(current, &u) {
            Some(c) => StepOutcome::Moved(self.graph.edge(c).1),
            None => StepOutcome::Settled(current),
        }
    }

    /// Vector-in, vector-out module interface. Returns zeros when the target
    /// is not recognized, otherwise the state of the node reached.
    pub fn module_step(&self, target: &Hypervector, current: &Hypervector) -> Hypervector {
        let (cur, _) = self.cleanup(current.as_slice());
        match self.module_step_node(target.as_slice(), cur) {
            StepOutcome::Unrecognized => Hypervector::zeros(self.d()),
            StepOutcome::Settled(i) | StepOutcome::Moved(i) => self.state_vector(i),
        }
    }

    pub fn default_max_steps(&self) -> usize {
        4 * self.n()
    }

    pub fn plan_pair(&self, start: usize, target: usize, mode: PlanMode, max_steps: usize) -> PairOutcome {
        let trace = match mode {
            PlanMode::Raw => self.plan(start, target, max_steps),
            PlanMode::Sign => self.plan_to_vector(start, &self.bipolar_state(target), max_steps),
        };
        let osc = trace.oscillation();
        let failure = match (trace.reached, osc) {
            (true, _) => FailureKind::None,
            (false, Some(_)) => FailureKind::Oscillation,
            (false, None) if trace.step_count() < max_steps => FailureKind::Stall,
            (false, None) => FailureKind::Budget,
        };
        PairOutcome {
            start,
            target,
            reached: trace.reached,
            steps: trace.step_count(),
            failure,
            failure_nodes: osc.filter(|_| !trace.reached).map(|(a, b)| (a.min(b), a.max(b))),
        }
    }

    /// Plans between `pairs` random ordered pairs of distinct nodes.
    pub fn path_success<R: Rng + ?Sized>(&self, pairs: usize, rng: &mut R, mode: PlanMode) -> PathSuccess {
        let outcomes: Vec<PairOutcome> = (0..pairs)
            .map(|_| {
                let (a, b) = random_pair(self.n(), rng);
                self.plan_pair(a, b, mode, self.default_max_steps())
            })
            .collect();
        PathSuccess::from_outcomes(outcomes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, &ModelFile::from(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mf: ModelFile = serde_json::from_reader(f)?;
        mf.into_model()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(s)?.into_model()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSuccess {
    pub mean: f64,
    pub std: f64,
    pub outcomes: Vec<PairOutcome>,
}

impl PathSuccess {
    pub fn from_outcomes(outcomes: Vec<PairOutcome>) -> Self {
        let xs: Vec<f64> = outcomes.iter().map(|o| if o.reached { 1.0 } else { 0.0 }).collect();
        let (mean, std) = crate::stats::mean_std(&xs);
        PathSuccess { mean, std, outcomes }
    }

    pub fn failures(&self) -> impl Iterator<Item = &PairOutcome> {
        self.outcomes.iter().filter(|o| !o.reached)
    }
}

pub fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

pub(crate) fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

fn normalized_states(graph: &Graph, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if states.ncols() != graph.n() {
        return Err(Error::DimensionMismatch(graph.n(), states.ncols()));
    }
    if states.nrows() == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut s = states.clone();
    normalize_columns(&mut s);
    for i in 0..s.ncols() {
        if dot(col(&s, i), col(&s, i)) == 0.0 {
            return Err(Error::DegenerateStates(i, i));
        }
        for j in 0..i {
            if cosine(col(&s, i), col(&s, j)) > 1.0 - 1e-12 {
                return Err(Error::DegenerateStates(j, i));
            }
        }
    }
    Ok(s)
}

fn delta_rule(
    graph: &Graph,
    mut s: DMatrix<f64>,
    mut a: DMatrix<f64>,
    cfg: &TrainConfig,
    learn_states: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>, TrainStats)> {
    let d = s.nrows();
    let alpha = cfg.alpha;
    let mut ds = DMatrix::zeros(d, graph.n());
    let mut da = DMatrix::zeros(d, graph.e());
    let mut tail = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        ds.fill(0.0);
        da.fill(0.0);
        for (c, &(j, i)) in graph.edges().iter().enumerate() {
            let (sj, si, ac) = (col(&s, j), col(&s, i), col(&a, c));
            let dac = col_mut(&mut da, c);
            for k in 0..d {
                dac[k] += alpha * (si[k] - (sj[k] + ac[k]));
            }
            if learn_states {
                let dsi = col_mut(&mut ds, i);
                for k in 0..d {
                    dsi[k] += alpha * ((sj[k] + ac[k]) - si[k]);
                }
            }
        }
        a += &da;
        if learn_states {
            s += &ds;
            normalize_columns(&mut s);
        }
        if cfg.normalize_actions {
            normalize_columns(&mut a);
        }
        let upd = (da.norm_squared() + ds.norm_squared()).sqrt();
        let rel = upd / (a.norm_squared() + s.norm_squared()).sqrt();
        tail.push(rel);
        if tail.len() > 10 {
            tail.remove(0);
        }
        if rel < cfg.tol {
            return Ok((s, a, TrainStats { epochs: epoch, final_update: rel, tail_updates: tail }));
        }
    }
    Err(Error::NotConverged { epochs: cfg.max_epochs, last_update: tail.last().copied().unwrap_or(f64::NAN) })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    d: usize,
    n: usize,
    e: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
    theta: f64,
    phi: f64,
    pinv_rcond: f64,
    seed: Option<u64>,
    /// Column-major d×n.
    states: Vec<f64>,
    /// Column-major d×e.
    actions: Vec<f64>,
    /// Column-major e×n.
    gating: Vec<f64>,
}

const FORMAT_TAG: &str = "hdcml-model";

impl From<&CmlModel> for ModelFile {
    fn from(m: &CmlModel) -> Self {
        ModelFile {
            format: FORMAT_TAG.into(),
            version: 1,
            d: m.d(),
            n: m.n(),
            e: m.e(),
            edges: m.graph.edges().to_vec(),
            labels: m.graph.labels().map(<[String]>::to_vec),
            theta: m.theta,
            phi: m.phi,
            pinv_rcond: m.pinv_rcond,
            seed: m.seed,
            states: m.s.as_slice().to_vec(),
            actions: m.a.as_slice().to_vec(),
            gating: m.gating.0.as_slice().to_vec(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<CmlModel> {
        if self.format != FORMAT_TAG || self.version != 1 {
            return Err(Error::Parse(format!("unsupported model file {} v{}", self.format, self.version)));
        }
        let mut graph = Graph::new(self.n, self.edges)?;
        if let Some(l) = self.labels {
            graph = graph.with_labels(l)?;
        }
        if graph.e() != self.e || self.states.len() != self.d * self.n || self.actions.len() != self.d * self.e {
            return Err(Error::Parse("matrix sizes disagree with header".into()));
        }
        let s = DMatrix::from_vec(self.d, self.n, self.states);
        let a = DMatrix::from_vec(self.d, self.e, self.actions);
        let mut m = CmlModel::assemble(graph, s, a, self.pinv_rcond, self.seed);
        if m.gating.0.as_slice() != self.gating.as_slice() {
            return Err(Error::Parse("gating matrix disagrees with edge list".into()));
        }
        m.theta = self.theta;
        m.phi = self.phi;
        Ok(m)
    }
}
