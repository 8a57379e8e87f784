use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdcml::cml::{CmlModel, PlanMode, TrainConfig};
use hdcml::experiments::{
    derive_rng, failure_census, golden_run, map_trials, reports_csv, run_table2, run_table3, trace_mode, verdicts,
    verdicts_csv, ExperimentConfig, Table3Fixture, PARTIAL_STEP_LIMIT, POLICY_STEP_CAP,
};
use hdcml::graph::{random_connected_graph, toh_graph, Graph, TohState};
use hdcml::stats::mean_std;
use hdcml::toh::{
    format_trace, random_bipolar_matrix, run_composite, run_mapping, run_monolithic, run_partial, Method,
    OrchestrationRun, TargetMode, SOLUTION,
};

#[derive(Parser, Debug)]
#[command(name = "hdcml", version, about = "Cognitive map learners with hypervector states, and ring orchestration for the Tower of Hanoi")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Hypervector dimension.
    #[arg(long = "dim", global = true, env = "HDCML_DIM", default_value_t = 1000)]
    dim: usize,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log the resolved configuration to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
enum Format {
    Csv,
    Structured,
}

#[derive(ValueEnum, Clone, Copy, Debug, serde::Serialize)]
enum Construction {
    Trained,
    Calculated,
}

#[derive(ValueEnum, Clone, Copy, Debug, serde::Serialize)]
enum MethodArg {
    Monolithic,
    Partial,
    Mapping,
    Composite,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Monolithic => Method::Monolithic,
            MethodArg::Partial => Method::Partial,
            MethodArg::Mapping => Method::Mapping,
            MethodArg::Composite => Method::Composite,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, serde::Serialize)]
enum ModeArg {
    Raw,
    Sign,
    Recover,
}

impl From<ModeArg> for TargetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => TargetMode::Raw,
            ModeArg::Sign => TargetMode::Sign,
            ModeArg::Recover => TargetMode::Recover,
        }
    }
}

#[derive(Subcommand, Debug, serde::Serialize)]
enum Cmd {
    /// Build a single CML and optionally save it.
    Train {
        /// `toh`, `random:N,M` or a path to an edge-list file.
        #[arg(long)]
        graph: String,
        #[arg(long, value_enum, default_value_t = Construction::Trained)]
        mode: Construction,
        /// Save the model to this file.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Plan between two nodes of a saved or freshly built model.
    Plan {
        /// Saved model file.
        #[arg(long, conflicts_with = "graph")]
        model: Option<PathBuf>,
        /// Build a calculated model over this graph source instead.
        #[arg(long)]
        graph: Option<String>,
        /// Start node index, or a board such as 111 on the Hanoi graph.
        #[arg(long)]
        start: String,
        #[arg(long)]
        target: String,
        /// Aim at the sign of the target state rather than the state itself.
        #[arg(long)]
        sign: bool,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Run one orchestration method over several trials.
    Toh {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Raw)]
        mode: ModeArg,
        #[arg(long, env = "HDCML_TRIALS", default_value_t = 50)]
        trials: usize,
    },
    /// Rerun a results table and compare each cell to its reference band.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        table: u8,
        #[arg(long, env = "HDCML_TRIALS", default_value_t = 50)]
        trials: usize,
        /// Random pairs per trial.
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
    /// Step-by-step run from 111 to 222.
    Trace {
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Decode mode; defaults to recover for mapping and raw otherwise.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

struct Failure(String);

type CmdResult = Result<(String, bool), Failure>;

impl From<hdcml::Error> for Failure {
    fn from(e: hdcml::Error) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.common.verbose {
        let cfg = serde_json::json!({ "common": &cli.common, "command": &cli.cmd });
        eprintln!("config {cfg}");
    }
    let result = match &cli.cmd {
        Cmd::Train { graph, mode, model } => train(&cli.common, graph, *mode, model.as_ref()),
        Cmd::Plan { model, graph, start, target, sign, max_steps } => {
            plan(&cli.common, model.as_ref(), graph.as_deref(), start, target, *sign, *max_steps)
        }
        Cmd::Toh { method, mode, trials } => toh(&cli.common, (*method).into(), (*mode).into(), *trials),
        Cmd::Reproduce { table, trials, pairs } => reproduce(&cli.common, *table, *trials, *pairs),
        Cmd::Trace { method, mode } => trace(&cli.common, (*method).into(), mode.map(Into::into)),
    };
    match result {
        Ok((text, ok)) => {
            if let Err(e) = emit(&cli.common, &text) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(c: &Common, text: &str) -> std::io::Result<()> {
    match &c.out {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn graph_source(source: &str, seed: u64) -> Result<Graph, Failure> {
    if source == "toh" {
        return Ok(toh_graph());
    }
    if let Some(rest) = source.strip_prefix("random:") {
        let (n, m) = rest
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| Failure(format!("bad random graph source {source:?}; expected random:N,M")))?;
        let mut rng = derive_rng(seed, 1);
        return Ok(random_connected_graph(n, m, &mut rng)?);
    }
    let text = std::fs::read_to_string(source).map_err(|e| Failure(format!("graph source {source:?}: {e}")))?;
    Ok(Graph::from_edge_list(&text)?)
}

fn build_model(c: &Common, graph: &Graph, mode: Construction) -> Result<(CmlModel, Option<usize>), Failure> {
    let mut rng = derive_rng(c.seed, 0);
    Ok(match mode {
        Construction::Trained => {
            let cfg = TrainConfig { d: c.dim, ..TrainConfig::default() };
            let (m, stats) = CmlModel::train(graph, &cfg, &mut rng)?;
            (m, Some(stats.epochs))
        }
        Construction::Calculated => (CmlModel::from_states(graph, &random_bipolar_matrix(c.dim, graph.n(), &mut rng))?, None),
    })
}

fn train(c: &Common, source: &str, mode: Construction, save: Option<&PathBuf>) -> CmdResult {
    let graph = graph_source(source, c.seed)?;
    let (model, epochs) = build_model(c, &graph, mode)?;
    let model = model.with_seed(c.seed);
    let n = model.n();
    let mut offdiag = Vec::new();
    for i in 0..n {
        for j in 0..i {
            offdiag.push(hdcml::hdc::cosine(model.state(i), model.state(j)));
        }
    }
    let sign_sims: Vec<f64> =
        (0..n).map(|i| hdcml::hdc::cosine(model.state(i), model.bipolar_state(i).as_slice())).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let reached = pairs
        .iter()
        .filter(|&&(a, b)| model.plan_pair(a, b, PlanMode::Raw, model.default_max_steps()).reached)
        .count();
    let check = if pairs.is_empty() { 1.0 } else { reached as f64 / pairs.len() as f64 };
    let (off_mean, _) = mean_std(&offdiag);
    let off_max = offdiag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (sg_mean, sg_std) = mean_std(&sign_sims);
    if let Some(p) = save {
        model.save(p)?;
    }
    let text = match c.format {
        Format::Csv => format!(
            "nodes,edges,d,epochs,offdiag_mean,offdiag_max_abs,sign_sim_mean,sign_sim_std,self_check\n{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            n,
            model.e(),
            model.d(),
            epochs.map_or("-".to_string(), |e| e.to_string()),
            off_mean,
            off_max,
            sg_mean,
            sg_std,
            check
        ),
        Format::Structured => serde_json::to_string_pretty(&serde_json::json!({
            "nodes": n, "edges": model.e(), "d": model.d(), "epochs": epochs,
            "offdiag_mean": off_mean, "offdiag_max_abs": off_max,
            "sign_similarity": [sg_mean, sg_std], "self_check": check,
        }))
        .unwrap()
            + "\n",
    };
    Ok((text, true))
}

fn node_arg(graph: &Graph, s: &str) -> Result<usize, Failure> {
    if graph.labels().is_some() {
        if let Some(b) = TohState::parse(s) {
            return Ok(b.index());
        }
    }
    let i: usize = s.parse().map_err(|_| Failure(format!("bad node {s:?}")))?;
    if i >= graph.n() {
        return Err(Failure(format!("node {i} out of range 0..{}", graph.n())));
    }
    Ok(i)
}

fn plan(
    c: &Common,
    model_path: Option<&PathBuf>,
    graph: Option<&str>,
    start: &str,
    target: &str,
    sign: bool,
    max_steps: Option<usize>,
) -> CmdResult {
    let model = match (model_path, graph) {
        (Some(p), _) => CmlModel::load(p)?,
        (None, Some(g)) => build_model(c, &graph_source(g, c.seed)?, Construction::Calculated)?.0,
        (None, None) => return Err(Failure("plan needs --model or --graph".into())),
    };
    let g = model.graph();
    let (a, b) = (node_arg(g, start)?, node_arg(g, target)?);
    let steps = max_steps.unwrap_or(model.default_max_steps());
    let trace = if sign {
        model.plan_to_vector(a, &model.bipolar_state(b), steps)
    } else {
        model.plan(a, b, steps)
    };
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("step,node,choice,next,utility\n");
            for (k, st) in trace.steps.iter().enumerate() {
                let (_, next) = g.edge(st.choice);
                s.push_str(&format!(
                    "{k},{},{},{},{:.6}\n",
                    g.label(st.node),
                    st.choice,
                    g.label(next),
                    st.utility[st.choice]
                ));
            }
            s.push_str(&format!("# reached={} end={}\n", trace.reached, g.label(trace.end())));
            s
        }
        Format::Structured => serde_json::to_string_pretty(&trace).unwrap() + "\n",
    };
    Ok((text, trace.reached))
}

fn toh(c: &Common, method: Method, mode: TargetMode, trials: usize) -> CmdResult {
    if trials == 0 {
        return Err(Failure("--trials must be at least 1".into()));
    }
    let cfg = ExperimentConfig::new(c.seed, trials, c.dim);
    let runs = map_trials(trials, cfg.execution, |t| -> Result<(f64, f64), hdcml::Error> {
        let mut rng = derive_rng(c.seed, (4u64 << 32) | t as u64);
        let fx = Table3Fixture::build(&cfg, &mut rng)?;
        let runs: Vec<OrchestrationRun> = match method {
            Method::Monolithic => vec![run_monolithic(&fx.rings, &fx.policy, mode, POLICY_STEP_CAP)],
            Method::Partial => vec![run_partial(&fx.rings, &fx.partial, mode, PARTIAL_STEP_LIMIT)],
            Method::Mapping => {
                fx.pairs.iter().map(|&(a, b)| run_mapping(&fx.planner, &fx.rings, &fx.maps, mode, a, b)).collect()
            }
            Method::Composite => {
                fx.pairs.iter().map(|&(a, b)| run_composite(&fx.composite, &fx.rings, mode, a, b)).collect()
            }
        };
        let success = match method {
            Method::Monolithic | Method::Partial => f64::from(u8::from(runs[0].solved)),
            _ => {
                let ok: usize = runs.iter().map(|r| r.commands_ok).sum();
                let all: usize = runs.iter().map(|r| r.commands).sum();
                if all == 0 { 1.0 } else { ok as f64 / all as f64 }
            }
        };
        let sims: Vec<f64> = runs.iter().flat_map(|r| r.similarities()).collect();
        Ok((success, mean_std(&sims).0))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (m, s) = mean_std(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let (sm, ss) = mean_std(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let text = match c.format {
        Format::Csv => {
            let mut t = String::from("trial,success,similarity\n");
            for (i, (a, b)) in runs.iter().enumerate() {
                t.push_str(&format!("{i},{a:.6},{b:.6}\n"));
            }
            t.push_str(&format!("# {} {} success={m:.6}±{s:.6} similarity={sm:.6}±{ss:.6}\n", method.name(), mode.name()));
            t
        }
        Format::Structured => {
            serde_json::to_string_pretty(&serde_json::json!({
                "method": method.name(), "mode": mode.name(), "seed": c.seed, "trials": runs,
                "success": [m, s], "similarity": [sm, ss],
            }))
            .unwrap()
                + "\n"
        }
    };
    Ok((text, true))
}

fn reproduce(c: &Common, table: u8, trials: usize, pairs: usize) -> CmdResult {
    if trials == 0 || pairs == 0 {
        return Err(Failure("--trials and --pairs must be at least 1".into()));
    }
    let mut cfg = ExperimentConfig::new(c.seed, trials, c.dim);
    cfg.pairs = pairs;
    let reports = if table == 2 { run_table2(&cfg)? } else { run_table3(&cfg)? };
    let vs = verdicts(&reports);
    let mut all_pass = vs.iter().all(|v| v.pass);
    let census = (table == 2).then(|| {
        let r = reports.iter().find(|r| r.row == "toh" && r.mode == "raw").expect("baseline raw row");
        failure_census(r, &toh_graph())
    });
    if let Some(cs) = &census {
        all_pass &= cs.all_at_corners();
    }
    let text = match c.format {
        Format::Csv => {
            let mut t = verdicts_csv(&vs)?;
            t.push('\n');
            t.push_str(&reports_csv(&reports, c.seed)?);
            if let Some(cs) = &census {
                t.push_str("\npair,failures\n");
                for ((a, b), n) in &cs.groups {
                    t.push_str(&format!("{a}-{b},{n}\n"));
                }
                if cs.non_oscillating > 0 {
                    t.push_str(&format!("non-oscillating,{}\n", cs.non_oscillating));
                }
            }
            t.push_str(&format!("# verdict {}\n", if all_pass { "PASS" } else { "FAIL" }));
            t
        }
        Format::Structured => {
            serde_json::to_string_pretty(&serde_json::json!({
                "config": cfg, "verdicts": vs, "census": census, "reports": reports, "pass": all_pass,
            }))
            .unwrap()
                + "\n"
        }
    };
    Ok((text, all_pass))
}

fn trace(c: &Common, method: Method, mode: Option<TargetMode>) -> CmdResult {
    let run = golden_run(c.seed, c.dim, method, mode.unwrap_or(trace_mode(method)))?;
    let ok = run.board_sequence() == SOLUTION && run.solved;
    let text = match c.format {
        Format::Csv => {
            format_trace(&run) + &format!("# boards {} {}\n", run.board_sequence().join(" "), if ok { "PASS" } else { "FAIL" })
        }
        Format::Structured => serde_json::to_string_pretty(&run).unwrap() + "\n",
    };
    Ok((text, ok))
}
