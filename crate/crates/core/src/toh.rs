//! Tower of Hanoi solved by orchestrating three independently trained ring
//! agents with hypervector policies, maps or composite node states.
//!
//! Rings are indexed large = 0, medium = 1, small = 2. Each ring lives on its
//! own random 7-node graph; three of its nodes are designated as pegs 1..=3.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cml::{CmlModel, PlanMode, StepOutcome, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{random_connected_graph, toh_graph, TohState};
use crate::hdc::{bind, bundle, cosine, permute, recover, sign, Dictionary, Hypervector};

pub const RING_NAMES: [&str; 3] = ["L", "M", "S"];

/// Boards visited by the optimal solution from 111 to 222.
pub const SOLUTION: [&str; 8] = ["111", "112", "132", "133", "233", "231", "221", "222"];

/// (ring, peg) prescribed at each of the seven solution steps.
pub const SOLUTION_MOVES: [(usize, u8); 7] = [(2, 2), (1, 3), (2, 3), (0, 2), (2, 1), (1, 2), (2, 2)];

/// Threshold used for both recognition and termination when ring targets
/// come straight out of a mapping decode.
pub const MAPPING_THRESHOLD: f64 = 0.07;

/// Recognition threshold stored on composite-state models.
pub const COMPOSITE_THETA: f64 = 0.55;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Raw,
    Sign,
    Recover,
}

impl TargetMode {
    pub const ALL: [TargetMode; 3] = [TargetMode::Raw, TargetMode::Sign, TargetMode::Recover];

    pub fn name(self) -> &'static str {
        match self {
            TargetMode::Raw => "raw",
            TargetMode::Sign => "sign",
            TargetMode::Recover => "recover",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Monolithic,
    Partial,
    Mapping,
    Composite,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Monolithic, Method::Partial, Method::Mapping, Method::Composite];

    pub fn name(self) -> &'static str {
        match self {
            Method::Monolithic => "monolithic",
            Method::Partial => "partial",
            Method::Mapping => "mapping",
            Method::Composite => "composite",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RingConfig {
    pub nodes: usize,
    pub edges: usize,
    /// Train ring CMLs; otherwise use random bipolar states with calculated actions.
    pub trained: bool,
    pub train: TrainConfig,
    pub theta: f64,
    pub phi: f64,
    pub max_resamples: usize,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            nodes: 7,
            edges: 10,
            trained: true,
            train: TrainConfig::default(),
            theta: crate::cml::DEFAULT_THETA,
            phi: crate::cml::DEFAULT_PHI,
            max_resamples: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ring {
    pub model: CmlModel,
    /// Node indices acting as pegs 1, 2, 3.
    pub designated: [usize; 3],
    /// Bipolar symbols of the designated nodes.
    pub vectors: [Hypervector; 3],
    /// Bipolar symbols of every node, labelled by node index.
    pub dictionary: Dictionary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingResponse {
    pub recognized: bool,
    pub node: usize,
    pub moves: usize,
    pub exhausted: bool,
}

impl Ring {
    fn new(model: CmlModel, designated: [usize; 3]) -> Self {
        let mut dictionary = Dictionary::new();
        for i in 0..model.n() {
            dictionary.insert(i.to_string(), model.bipolar_state(i)).expect("labels are unique");
        }
        let vectors = designated.map(|i| model.bipolar_state(i));
        Ring { model, designated, vectors, dictionary }
    }

    /// Peg symbol `r_p` for `p` in 1..=3.
    pub fn peg(&self, p: u8) -> &Hypervector {
        &self.vectors[p as usize - 1]
    }

    pub fn node_of_peg(&self, p: u8) -> usize {
        self.designated[p as usize - 1]
    }

    /// Peg held at `node`, or 0 for an interstitial node.
    pub fn peg_of_node(&self, node: usize) -> u8 {
        self.designated.iter().position(|&d| d == node).map_or(0, |p| p as u8 + 1)
    }

    /// Drive the ring from `current` toward `target` until it settles, the
    /// target is not recognized, or the step budget runs out.
    pub fn respond(&self, current: usize, target: &Hypervector, mode: TargetMode, theta: f64, phi: f64) -> RingResponse {
        let target = match mode {
            TargetMode::Raw => target.clone(),
            TargetMode::Sign => sign(target),
            TargetMode::Recover => match recover(target, &self.dictionary, theta) {
                Some(r) => r.vector.clone(),
                None => return RingResponse { recognized: false, node: current, moves: 0, exhausted: false },
            },
        };
        let mut cur = current;
        let budget = self.model.default_max_steps();
        for moves in 0..budget {
            match self.model.module_step_with(target.as_slice(), cur, theta, phi) {
                StepOutcome::Unrecognized => {
                    return RingResponse { recognized: moves > 0, node: cur, moves, exhausted: false }
                }
                StepOutcome::Settled(c) => return RingResponse { recognized: true, node: c, moves, exhausted: false },
                StepOutcome::Moved(c) => cur = c,
            }
        }
        RingResponse { recognized: true, node: cur, moves: budget, exhausted: true }
    }

    /// Vector fed back into hypervector space for a response.
    pub fn response_vector(&self, r: &RingResponse) -> Hypervector {
        if r.recognized {
            self.model.bipolar_state(r.node)
        } else {
            Hypervector::zeros(self.model.d())
        }
    }
}

#[derive(Clone, Debug)]
pub struct RingSystem {
    pub rings: [Ring; 3],
    pub resamples: usize,
}

impl RingSystem {
    pub fn build<R: Rng + ?Sized>(cfg: &RingConfig, rng: &mut R) -> Result<Self> {
        for attempt in 0..=cfg.max_resamples {
            let mut rings = Vec::with_capacity(3);
            for _ in 0..3 {
                rings.push(build_ring(cfg, rng)?);
            }
            let rings: [Ring; 3] = rings.try_into().expect("three rings");
            let sys = RingSystem { rings, resamples: attempt };
            if sys.designated_max_similarity() < cfg.theta && sys.rings.iter().all(ring_plans_perfectly) {
                return Ok(sys);
            }
        }
        Err(Error::RingOrthogonality(cfg.max_resamples))
    }

    pub fn d(&self) -> usize {
        self.rings[0].model.d()
    }

    /// Largest |cosine| between any two of the nine designated symbols.
    pub fn designated_max_similarity(&self) -> f64 {
        let all: Vec<&Hypervector> = self.rings.iter().flat_map(|r| r.vectors.iter()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..all.len() {
            for j in 0..i {
                worst = worst.max(cosine(all[i].as_slice(), all[j].as_slice()).abs());
            }
        }
        worst
    }

    /// Designated symbol for ring `ring` at the peg it occupies in `board`.
    pub fn symbol(&self, ring: usize, board: TohState) -> &Hypervector {
        self.rings[ring].peg(board.pegs()[ring])
    }

    pub fn nodes_for(&self, board: TohState) -> [usize; 3] {
        let p = board.pegs();
        [0, 1, 2].map(|r| self.rings[r].node_of_peg(p[r]))
    }

    /// Board implied by ring positions; `None` if any ring is between pegs.
    pub fn board(&self, nodes: [usize; 3]) -> Option<TohState> {
        let p = [0, 1, 2].map(|r| self.rings[r].peg_of_node(nodes[r]));
        p.iter().all(|&x| x > 0).then(|| TohState::from_pegs(p))
    }

    /// Composite node states `sgn(l_i + m_j + s_k)` for the 27 boards, as columns.
    pub fn composite_states(&self) -> DMatrix<f64> {
        let d = self.d();
        let cols: Vec<f64> = TohState::all()
            .flat_map(|b| {
                let sum = &(self.symbol(0, b) + self.symbol(1, b)) + self.symbol(2, b);
                sign(&sum).into_vec()
            })
            .collect();
        DMatrix::from_vec(d, 27, cols)
    }
}

fn build_ring<R: Rng + ?Sized>(cfg: &RingConfig, rng: &mut R) -> Result<Ring> {
    let g = random_connected_graph(cfg.nodes, cfg.edges, rng)?;
    let model = if cfg.trained {
        CmlModel::train(&g, &cfg.train, rng)?.0
    } else {
        CmlModel::from_states(&g, &random_bipolar_matrix(cfg.train.d, cfg.nodes, rng))?
    }
    .with_thresholds(cfg.theta, cfg.phi);
    let pick = sample(rng, cfg.nodes, 3);
    Ok(Ring::new(model, [pick.index(0), pick.index(1), pick.index(2)]))
}

fn ring_plans_perfectly(r: &Ring) -> bool {
    let m = &r.model;
    (0..m.n()).all(|a| (0..m.n()).all(|b| a == b || m.plan_pair(a, b, PlanMode::Raw, m.default_max_steps()).reached))
}

pub fn random_bipolar_matrix<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(d, n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// Composite-state planner over the Tower of Hanoi graph.
pub fn build_composite(rs: &RingSystem) -> Result<CmlModel> {
    let m = CmlModel::from_states(&toh_graph(), &rs.composite_states())?;
    let phi = m.phi;
    Ok(m.with_thresholds(COMPOSITE_THETA, phi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrchestrationStep {
    pub t: usize,
    /// (ring, similarity of its decode to the peg symbol it should name).
    pub scores: Vec<(usize, f64)>,
    /// Node reached by each ring that recognized the broadcast.
    pub responses: [Option<usize>; 3],
    pub board: Option<TohState>,
}

impl OrchestrationStep {
    pub fn responders(&self) -> usize {
        self.responses.iter().filter(|r| r.is_some()).count()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrchestrationRun {
    pub method: Method,
    pub mode: TargetMode,
    pub start: TohState,
    pub steps: Vec<OrchestrationStep>,
    pub boards: Vec<Option<TohState>>,
    pub solved: bool,
    /// Ring commands carried out as prescribed, out of those issued.
    pub commands_ok: usize,
    pub commands: usize,
    pub note: Option<String>,
}

impl OrchestrationRun {
    fn new(method: Method, mode: TargetMode, start: TohState) -> Self {
        OrchestrationRun {
            method,
            mode,
            start,
            steps: Vec::new(),
            boards: vec![Some(start)],
            solved: false,
            commands_ok: 0,
            commands: 0,
            note: None,
        }
    }

    pub fn similarities(&self) -> Vec<f64> {
        self.steps.iter().flat_map(|s| s.scores.iter().map(|&(_, x)| x)).collect()
    }

    pub fn board_sequence(&self) -> Vec<String> {
        self.boards.iter().map(|b| b.map_or_else(|| "???".to_string(), |b| b.to_string())).collect()
    }

    fn matches_solution(&self) -> bool {
        self.board_sequence() == SOLUTION
    }
}

fn thresholds(rs: &RingSystem) -> (f64, f64) {
    let m = &rs.rings[0].model;
    (m.theta, m.phi)
}

/// Seven permutation-indexed stimulus/response pairs bundled into one vector.
pub fn build_monolithic_policy<R: Rng + ?Sized>(rs: &RingSystem, rng: &mut R) -> Result<Hypervector> {
    let [l, m, s] = [0, 1, 2].map(|r| &rs.rings[r].vectors);
    let terms = [
        s[1].clone(),
        bind(&s[1], &m[2])?,
        bind(&m[2], &s[2])?,
        bind(&s[2], &l[1])?,
        bind(&l[1], &s[0])?,
        bind(&s[0], &m[1])?,
        bind(&m[1], &s[1])?,
    ];
    let shifted: Vec<_> = terms.iter().enumerate().map(|(k, t)| permute(t, k as i64)).collect();
    bundle(&shifted, rng)
}

/// Responds to one broadcast from every ring in fixed L, M, S order.
fn broadcast(
    rs: &RingSystem,
    nodes: &mut [usize; 3],
    targets: [&Hypervector; 3],
    mode: TargetMode,
    theta: f64,
    phi: f64,
) -> ([Option<usize>; 3], Hypervector) {
    let mut responses = [None; 3];
    let mut sum = Hypervector::zeros(rs.d());
    for r in 0..3 {
        let resp = rs.rings[r].respond(nodes[r], targets[r], mode, theta, phi);
        if resp.recognized {
            responses[r] = Some(resp.node);
            nodes[r] = resp.node;
            sum = &sum + &rs.rings[r].response_vector(&resp);
        }
    }
    (responses, sum)
}

pub fn run_monolithic(rs: &RingSystem, policy: &Hypervector, mode: TargetMode, max_steps: usize) -> OrchestrationRun {
    let start = TohState::new(1, 1, 1);
    let mut run = OrchestrationRun::new(Method::Monolithic, mode, start);
    let (theta, phi) = thresholds(rs);
    let mut nodes = rs.nodes_for(start);
    let mut r_t = Hypervector::ones(rs.d());
    let mut terminated = false;
    for t in 0..max_steps {
        let query = bind(&r_t, &permute(policy, -(t as i64))).expect("equal dimensions");
        let scores = SOLUTION_MOVES.get(t).map(|&(r, p)| (r, cosine(query.as_slice(), rs.rings[r].peg(p).as_slice())));
        let (responses, sum) = broadcast(rs, &mut nodes, [&query; 3], mode, theta, phi);
        let n_resp = responses.iter().flatten().count();
        let board = rs.board(nodes);
        run.steps.push(OrchestrationStep { t, scores: scores.into_iter().collect(), responses, board });
        if n_resp == 0 {
            terminated = true;
            break;
        }
        if n_resp > 1 {
            run.note = Some(format!("{n_resp} rings responded at step {t}"));
            break;
        }
        run.boards.push(board);
        r_t = sum;
    }
    run.solved = terminated && run.note.is_none() && run.matches_solution();
    run
}

pub fn build_partial_policies<R: Rng + ?Sized>(rs: &RingSystem, rng: &mut R) -> Result<[Hypervector; 3]> {
    let [l, m, s] = [0, 1, 2].map(|r| &rs.rings[r].vectors);
    let p = |x: &Hypervector| permute(x, 1);
    let policy_l = bind(&s[2], &p(&l[1]))?;
    let policy_m = bundle(&[bind(&s[1], &p(&m[2]))?, bind(&s[0], &p(&m[1]))?], rng)?;
    let policy_s = bundle(
        &[p(&s[1]), bind(&m[2], &p(&s[2]))?, bind(&l[1], &p(&s[0]))?, bind(&m[1], &p(&s[1]))?],
        rng,
    )?;
    Ok([policy_l, policy_m, policy_s])
}

pub fn run_partial(rs: &RingSystem, policies: &[Hypervector; 3], mode: TargetMode, step_limit: usize) -> OrchestrationRun {
    let start = TohState::new(1, 1, 1);
    let mut run = OrchestrationRun::new(Method::Partial, mode, start);
    let (theta, phi) = thresholds(rs);
    let mut nodes = rs.nodes_for(start);
    let mut r_t = Hypervector::ones(rs.d());
    for t in 0..step_limit {
        let queries: Vec<Hypervector> =
            policies.iter().map(|pol| permute(&bind(&r_t, pol).expect("equal dimensions"), -1)).collect();
        let scores = SOLUTION_MOVES.get(t).map(|&(r, p)| (r, cosine(queries[r].as_slice(), rs.rings[r].peg(p).as_slice())));
        let (responses, sum) = broadcast(rs, &mut nodes, [&queries[0], &queries[1], &queries[2]], mode, theta, phi);
        let n_resp = responses.iter().flatten().count();
        let board = rs.board(nodes);
        run.steps.push(OrchestrationStep { t, scores: scores.into_iter().collect(), responses, board });
        if n_resp == 0 {
            run.note = Some(format!("stalled at step {t}"));
            break;
        }
        if n_resp > 1 {
            run.note = Some(format!("{n_resp} rings responded at step {t}"));
            break;
        }
        run.boards.push(board);
        r_t = sum;
    }
    run.solved = run.note.is_none() && run.matches_solution();
    run
}

/// One map per ring binding every planner state to that ring's peg symbol.
pub fn build_maps<R: Rng + ?Sized>(ct: &CmlModel, rs: &RingSystem, rng: &mut R) -> Result<[Hypervector; 3]> {
    let mut maps = Vec::with_capacity(3);
    for r in 0..3 {
        let terms = TohState::all()
            .map(|b| bind(&ct.bipolar_state(b.index()), rs.symbol(r, b)))
            .collect::<Result<Vec<_>>>()?;
        maps.push(bundle(&terms, rng)?);
    }
    Ok(maps.try_into().expect("three maps"))
}

/// How a global planner tells the rings what to do next.
enum Broadcaster<'a> {
    Mapping(&'a [Hypervector; 3]),
    Composite,
}

/// Shared loop for the two planner-driven methods: the planner picks the next
/// board, broadcasts its state and every ring acts on its own decode.
fn run_planner(
    planner: &CmlModel,
    rs: &RingSystem,
    how: Broadcaster<'_>,
    mode: TargetMode,
    start: TohState,
    goal: TohState,
) -> OrchestrationRun {
    let method = match how {
        Broadcaster::Mapping(_) => Method::Mapping,
        Broadcaster::Composite => Method::Composite,
    };
    let mut run = OrchestrationRun::new(method, mode, start);
    // Mapping decodes sit near 0.155, so recognition uses the lowered
    // threshold in every mode; a recovered target is clean and keeps the
    // ring's own termination threshold.
    let (theta, phi) = match (method, mode) {
        (Method::Mapping, TargetMode::Recover) => (MAPPING_THRESHOLD, thresholds(rs).1),
        (Method::Mapping, _) => (MAPPING_THRESHOLD, MAPPING_THRESHOLD),
        _ => thresholds(rs),
    };
    let goal_vec = planner.bipolar_state(goal.index());
    let mut nodes = rs.nodes_for(start);
    let mut at = start.index();
    let budget = planner.default_max_steps();
    for t in 0..budget {
        if at == goal.index() {
            break;
        }
        let u = planner.utility(goal_vec.as_slice(), at);
        let Some(c) = planner.choose(at, &u) else { break };
        let next = planner.graph().edge(c).1;
        let next_board = TohState::from_index(next);
        let t_hat = planner.state_vector(next);
        let decoded: Vec<Hypervector> = match how {
            Broadcaster::Mapping(maps) => maps.iter().map(|m| bind(&t_hat, m).expect("equal dimensions")).collect(),
            Broadcaster::Composite => vec![t_hat.clone(); 3],
        };
        let scores = (0..3).map(|r| (r, cosine(decoded[r].as_slice(), rs.symbol(r, next_board).as_slice()))).collect();
        let (responses, sum) = broadcast(rs, &mut nodes, [&decoded[0], &decoded[1], &decoded[2]], mode, theta, phi);
        let want = rs.nodes_for(next_board);
        run.commands += 3;
        run.commands_ok += (0..3).filter(|&r| nodes[r] == want[r]).count();
        let board = rs.board(nodes);
        run.steps.push(OrchestrationStep { t, scores, responses, board });
        run.boards.push(board);
        at = match how {
            Broadcaster::Mapping(_) => next,
            Broadcaster::Composite => planner.cleanup(sign(&sum).as_slice()).0,
        };
    }
    run.solved = rs.board(nodes) == Some(goal) && run.commands_ok == run.commands;
    run
}

pub fn run_mapping(
    ct: &CmlModel,
    rs: &RingSystem,
    maps: &[Hypervector; 3],
    mode: TargetMode,
    start: TohState,
    goal: TohState,
) -> OrchestrationRun {
    run_planner(ct, rs, Broadcaster::Mapping(maps), mode, start, goal)
}

pub fn run_composite(cs: &CmlModel, rs: &RingSystem, mode: TargetMode, start: TohState, goal: TohState) -> OrchestrationRun {
    run_planner(cs, rs, Broadcaster::Composite, mode, start, goal)
}

/// Planner over the Tower of Hanoi graph with random bipolar states.
pub fn build_toh_planner<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CmlModel> {
    CmlModel::from_states(&toh_graph(), &random_bipolar_matrix(d, 27, rng))
}

/// Line-oriented trace: one row per orchestration step.
pub fn format_trace(run: &OrchestrationRun) -> String {
    let mut out = String::from("step,board,similarity,responders,mode\n");
    for s in &run.steps {
        let sim = s
            .scores
            .iter()
            .map(|&(r, x)| format!("{}:{x:.3}", RING_NAMES[r]))
            .collect::<Vec<_>>()
            .join(";");
        let resp: String = (0..3).filter(|&r| s.responses[r].is_some()).map(|r| RING_NAMES[r]).collect();
        let board = s.board.map_or_else(|| "???".to_string(), |b| b.to_string());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.t,
            board,
            if sim.is_empty() { "-".into() } else { sim },
            if resp.is_empty() { "0".into() } else { resp },
            run.mode.name()
        ));
    }
    out
}
