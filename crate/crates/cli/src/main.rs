//! Command-line front end: reads JSON game files, runs solvers and the
//! oracle, and prints a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use asymgame::belief::Belief;
use asymgame::model::{lower_one_sided, validate_game, GameDefinition, GameFile, OneSidedGame};
use asymgame::oracle::{build_extensive_form_capped, one_sided_oracle_game, sequence_form_value};
use asymgame::solver::{solve_general_bounds, solve_one_sided, solve_regression, SolverConfig};
use asymgame::stage::pwlc_eval;
use asymgame::strategy::{
    best_response_value, extract_cib_strategy, reduce_strategy, simulate, HistoryStrategy, HISTORY_CAP,
};
use asymgame::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

/// Exit code for malformed or invalid game files.
const EXIT_INVALID: u8 = 2;
/// Exit code when a solver or the oracle refuses (caps, imperfect recall).
const EXIT_REFUSED: u8 = 3;
/// Rounding allowance on the bracket check for general games.
const BRACKET_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "asymgame", version, about = "Zero-sum games with asymmetric information")]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    /// Solver configuration file (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pieces: Option<usize>,
    #[arg(long)]
    belief_grid: Option<u32>,
    #[arg(long)]
    prescription_grid: Option<u32>,
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    max_horizon: Option<usize>,
    #[arg(long)]
    max_tree_nodes: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Point-based for one-sided games, grid bounds otherwise.
    Auto,
    PointBased,
    Regression,
    Grid,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a game file and list violations.
    Validate { game: PathBuf },
    /// Solve a game.
    Solve {
        game: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Lower bound on the value at a belief over the states of a stage.
    Value {
        game: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        belief: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        stage: usize,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Exact value from the sequence-form program.
    Oracle {
        game: PathBuf,
        /// Write the game tree in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        dot_nodes: usize,
        #[arg(long)]
        max_tree_nodes: Option<usize>,
    },
    /// Player 2's best response to a player-1 strategy file.
    BestResponse {
        game: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a player-1 strategy over full histories to one over state and
    /// common history (one-sided games).
    Reduce {
        game: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo estimate of the expected cost of a strategy pair.
    Simulate {
        game: PathBuf,
        /// Player-1 and player-2 strategy files.
        #[arg(long, num_args = 2, required = true)]
        strategies: Vec<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve and write the alpha sets.
    ExportAlpha {
        game: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Solver, oracle and exploitability in one report.
    Compare {
        game: PathBuf,
        /// Directory for strategy artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
    },
}

#[derive(Serialize, Debug, Default)]
struct RunReport {
    command: String,
    argv: Vec<String>,
    game: Option<String>,
    config: Option<Value>,
    seed: Option<u64>,
    values: BTreeMap<String, f64>,
    exploitability: Option<f64>,
    details: BTreeMap<String, Value>,
    artifacts: Vec<String>,
    /// Wall-clock milliseconds; not reproducible.
    timing_ms: BTreeMap<String, f64>,
    exit_code: u8,
    error: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
    details: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Invalid(_) | Error::Parse { .. } | Error::Json(_) | Error::Shape(_) => EXIT_INVALID,
            Error::CapExceeded { .. } | Error::ImperfectRecall { .. } | Error::Lp { .. } | Error::Divergence { .. } => {
                EXIT_REFUSED
            }
            Error::StageMismatch { .. } | Error::InvalidArgument(_) => 1,
        };
        let details = match &e {
            Error::Invalid(v) => Some(json!(v.iter().map(ToString::to_string).collect::<Vec<_>>())),
            _ => None,
        };
        Failure {
            code,
            message: e.to_string(),
            details,
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
        details: None,
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, v: &Value, report: &mut RunReport) -> Outcome {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| io_failure(path, e))?;
    report.artifacts.push(path.display().to_string());
    Ok(())
}

fn load(path: &Path, report: &mut RunReport) -> std::result::Result<GameFile, Failure> {
    report.game = Some(path.display().to_string());
    let text = read(path)?;
    let file = asymgame::model::load_game(&text).map_err(|e| match e {
        Error::Json(j) => Failure {
            code: EXIT_INVALID,
            message: format!("{}: line {}, column {}: {j}", path.display(), j.line(), j.column()),
            details: None,
        },
        e => Failure::from(e),
    })?;
    let violations = match &file {
        GameFile::General(g) => validate_game(g),
        GameFile::OneSided(g) => g.validate(),
    };
    if violations.is_empty() {
        Ok(file)
    } else {
        Err(Failure::from(Error::Invalid(violations)))
    }
}

fn solver_config(a: &SolveArgs) -> std::result::Result<SolverConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<SolverConfig>(&read(p)?).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", p.display()),
            details: None,
        })?,
        None => SolverConfig::default(),
    };
    if let Some(v) = a.samples {
        cfg.samples_per_stage = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.pieces {
        cfg.pieces = v;
    }
    if let Some(v) = a.belief_grid {
        cfg.belief_grid = v;
    }
    if let Some(v) = a.prescription_grid {
        cfg.prescription_grid = v;
    }
    if let Some(v) = a.max_states {
        cfg.caps.states = v;
    }
    if let Some(v) = a.max_horizon {
        cfg.caps.horizon = v;
    }
    if let Some(v) = a.max_tree_nodes {
        cfg.caps.tree_nodes = v;
    }
    Ok(cfg)
}

fn timed<T>(report: &mut RunReport, label: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    report
        .timing_ms
        .insert(label.into(), t0.elapsed().as_secs_f64() * 1e3);
    out
}

fn echo_config(report: &mut RunReport, cfg: &SolverConfig) {
    report.config = Some(serde_json::to_value(cfg).expect("serializable"));
    report.seed = Some(cfg.seed);
}

fn solve_point_based(report: &mut RunReport, g: &OneSidedGame, cfg: &SolverConfig) -> Result<asymgame::solver::OneSidedSolution> {
    let sol = timed(report, "solve", || solve_one_sided(g, cfg))?;
    report.values.insert("solver_value".into(), sol.value);
    let vf = &sol.value_function;
    report.details.insert("stages".into(), json!(vf.reports()));
    report
        .details
        .insert("reachable_truncated".into(), json!(vf.reachable_truncated()));
    Ok(sol)
}

fn general_bounds(report: &mut RunReport, g: &GameDefinition, cfg: &SolverConfig) -> Result<()> {
    let est = timed(report, "bounds", || {
        solve_general_bounds(g, cfg.belief_grid, cfg.prescription_grid, &cfg.caps)
    })?;
    report.values.insert("minmax_estimate".into(), est.minmax);
    report.values.insert("maxmin_estimate".into(), est.maxmin);
    report.details.insert(
        "grid_points".into(),
        json!(est.tables.stages.iter().map(Vec::len).collect::<Vec<_>>()),
    );
    Ok(())
}

/// Bounds on grids twice as fine as the configured ones.
fn general_bounds_refined(report: &mut RunReport, g: &GameDefinition, cfg: &SolverConfig) -> Result<()> {
    let mut fine = cfg.clone();
    fine.belief_grid *= 2;
    fine.prescription_grid *= 2;
    general_bounds(report, g, &fine)
}

fn oracle_game(file: &GameFile) -> Result<GameDefinition> {
    match file {
        GameFile::OneSided(g) => one_sided_oracle_game(g),
        GameFile::General(g) => Ok(g.clone()),
    }
}

fn run_oracle(report: &mut RunReport, file: &GameFile, cap: usize, dot: Option<(&Path, usize)>) -> std::result::Result<f64, Failure> {
    let g = oracle_game(file)?;
    let ef = timed(report, "tree", || build_extensive_form_capped(&g, cap))?;
    report.details.insert("tree".into(), json!(ef.stats()));
    if let Some((path, n)) = dot {
        std::fs::write(path, ef.to_dot(n)).map_err(|e| io_failure(path, e))?;
        report.artifacts.push(path.display().to_string());
    }
    let sol = timed(report, "oracle", || sequence_form_value(&ef))?;
    report.values.insert("oracle_value".into(), sol.value);
    let support = |w: &[f64]| w.iter().filter(|&&v| v > 1e-12).count();
    report.details.insert(
        "plan_support".into(),
        json!({
            "player1": support(&sol.plan1.weights),
            "player2": support(&sol.plan2.weights),
            "sequences1": sol.plan1.weights.len(),
            "sequences2": sol.plan2.weights.len(),
        }),
    );
    report.details.insert("oracle_lp_iterations".into(), json!(sol.lp_iterations));
    Ok(sol.value)
}

fn load_strategy(path: &Path) -> std::result::Result<HistoryStrategy, Failure> {
    HistoryStrategy::from_json(&read(path)?).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
        details: None,
    })
}

fn require_one_sided<'a>(file: &'a GameFile, what: &str) -> std::result::Result<&'a OneSidedGame, Failure> {
    file.one_sided().ok_or_else(|| Failure {
        code: 1,
        message: format!("{what} needs a one-sided game file"),
        details: None,
    })
}

fn execute(cmd: &Command, report: &mut RunReport) -> Outcome {
    match cmd {
        Command::Validate { game } => {
            report.game = Some(game.display().to_string());
            match load(game, report) {
                Ok(file) => {
                    let g = file.general();
                    report.details.insert("violations".into(), json!([]));
                    report.details.insert("horizon".into(), json!(g.horizon()));
                    report.details.insert("one_sided".into(), json!(file.one_sided().is_some()));
                    Ok(())
                }
                Err(f) => {
                    report
                        .details
                        .insert("violations".into(), f.details.clone().unwrap_or_else(|| json!([f.message.clone()])));
                    Err(f)
                }
            }
        }
        Command::Solve { game, method, solve } => {
            let file = load(game, report)?;
            let cfg = solver_config(solve)?;
            echo_config(report, &cfg);
            match (method, &file) {
                (Method::Auto | Method::PointBased, GameFile::OneSided(g)) => {
                    solve_point_based(report, g, &cfg)?;
                }
                (Method::Regression, GameFile::OneSided(g)) => {
                    let r = timed(report, "solve", || solve_regression(g, &cfg))?;
                    report
                        .values
                        .insert("regression_value".into(), r.eval(&Belief::initial_one_sided(g))?);
                    report.details.insert("stages".into(), json!(r.stages));
                }
                (Method::PointBased | Method::Regression, GameFile::General(_)) => {
                    return Err(Failure {
                        code: 1,
                        message: "point-based and regression solvers need a one-sided game file".into(),
                        details: None,
                    })
                }
                (Method::Auto | Method::Grid, _) => general_bounds(report, &file.general(), &cfg)?,
            }
            Ok(())
        }
        Command::Value {
            game,
            belief,
            stage,
            solve,
        } => {
            let file = load(game, report)?;
            let g = require_one_sided(&file, "value")?;
            let cfg = solver_config(solve)?;
            echo_config(report, &cfg);
            if *stage >= g.horizon() {
                return Err(Error::InvalidArgument(format!("stage {stage} beyond horizon {}", g.horizon())).into());
            }
            let pi = Belief::over_states(*stage, belief.clone())?;
            let sol = solve_point_based(report, g, &cfg)?;
            let v = pwlc_eval(sol.value_function.alpha(*stage), &pi)?;
            report.values.insert("value".into(), v);
            report.details.insert("belief".into(), json!(belief));
            report.details.insert("stage".into(), json!(stage));
            Ok(())
        }
        Command::Oracle {
            game,
            dot,
            dot_nodes,
            max_tree_nodes,
        } => {
            let file = load(game, report)?;
            let cap = max_tree_nodes.unwrap_or(SolverConfig::default().caps.tree_nodes);
            run_oracle(report, &file, cap, dot.as_deref().map(|p| (p, *dot_nodes)))?;
            Ok(())
        }
        Command::BestResponse { game, strategy, out } => {
            let file = load(game, report)?;
            let s1 = load_strategy(strategy)?;
            let br = timed(report, "best_response", || best_response_value(&file.general(), &s1, HISTORY_CAP))?;
            report.values.insert("best_response_value".into(), br.value);
            if let Some(p) = out {
                write_json(p, &br.strategy.to_json(), report)?;
            }
            Ok(())
        }
        Command::Reduce { game, strategy, out } => {
            let file = load(game, report)?;
            let g = require_one_sided(&file, "reduce")?;
            let s1 = load_strategy(strategy)?;
            let full = one_sided_oracle_game(g)?;
            let reduced = timed(report, "reduce", || reduce_strategy(&s1, &full, &lower_one_sided(g), HISTORY_CAP))?;
            match out {
                Some(p) => write_json(p, &reduced.to_json(), report)?,
                None => {
                    report.details.insert("strategy".into(), reduced.to_json());
                }
            }
            Ok(())
        }
        Command::Simulate {
            game,
            strategies,
            episodes,
            seed,
        } => {
            let file = load(game, report)?;
            let s1 = load_strategy(&strategies[0])?;
            let s2 = load_strategy(&strategies[1])?;
            report.seed = Some(*seed);
            let r = timed(report, "simulate", || simulate(&file.general(), &s1, &s2, *seed, *episodes))?;
            report.values.insert("mean_cost".into(), r.mean);
            report.values.insert("std_error".into(), r.std_error);
            report.details.insert("episodes".into(), json!(r.episodes));
            Ok(())
        }
        Command::ExportAlpha { game, out, solve } => {
            let file = load(game, report)?;
            let g = require_one_sided(&file, "export-alpha")?;
            let cfg = solver_config(solve)?;
            echo_config(report, &cfg);
            let sol = solve_point_based(report, g, &cfg)?;
            let vf = &sol.value_function;
            let sets: Vec<Value> = (0..=vf.horizon())
                .map(|t| {
                    json!({
                        "stage": t,
                        "vectors": vf.alpha(t).vectors(),
                        "provenance": if t < vf.horizon() { json!(vf.provenance(t)) } else { json!([]) },
                    })
                })
                .collect();
            write_json(out, &json!({ "config": cfg, "alpha_sets": sets }), report)
        }
        Command::Compare { game, out_dir, solve } => {
            let file = load(game, report)?;
            let cfg = solver_config(solve)?;
            echo_config(report, &cfg);
            match &file {
                GameFile::OneSided(g) => {
                    let sol = solve_point_based(report, g, &cfg)?;
                    let oracle = run_oracle(report, &file, cfg.caps.tree_nodes, None)?;
                    let cib = extract_cib_strategy(&sol.value_function, g);
                    let unrolled = timed(report, "unroll", || cib.unroll(cfg.caps.histories))?;
                    let br = timed(report, "best_response", || {
                        best_response_value(&lower_one_sided(g), &unrolled.strategy, cfg.caps.histories)
                    })?;
                    report.values.insert("best_response_value".into(), br.value);
                    report.values.insert("gap".into(), oracle - sol.value);
                    report.exploitability = Some(br.value - oracle);
                    report
                        .details
                        .insert("lower_bound_sound".into(), json!(sol.value <= oracle + 1e-7));
                    if let Some(dir) = out_dir {
                        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
                        write_json(&dir.join("player1.json"), &unrolled.strategy.to_json(), report)?;
                        let p2 = cib.unroll_player2(cfg.caps.histories)?;
                        write_json(&dir.join("player2.json"), &p2.to_json(), report)?;
                        write_json(&dir.join("best_response.json"), &br.strategy.to_json(), report)?;
                    }
                }
                GameFile::General(g) => {
                    let coarse = timed(report, "bounds_coarse", || {
                        solve_general_bounds(g, cfg.belief_grid, cfg.prescription_grid, &cfg.caps)
                    })?;
                    general_bounds_refined(report, g, &cfg)?;
                    let (lo, hi) = (report.values["maxmin_estimate"], report.values["minmax_estimate"]);
                    let delta = (hi - coarse.minmax).abs().max((lo - coarse.maxmin).abs());
                    report.values.insert("coarse_maxmin_estimate".into(), coarse.maxmin);
                    report.values.insert("coarse_minmax_estimate".into(), coarse.minmax);
                    report.values.insert("refinement_slack".into(), delta);
                    let oracle = run_oracle(report, &file, cfg.caps.tree_nodes, None)?;
                    report
                        .details
                        .insert("oracle_in_bracket".into(), json!(lo - delta - BRACKET_TOL <= oracle && oracle <= hi + delta + BRACKET_TOL));
                }
            }
            Ok(())
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate { .. } => "validate",
        Command::Solve { .. } => "solve",
        Command::Value { .. } => "value",
        Command::Oracle { .. } => "oracle",
        Command::BestResponse { .. } => "best-response",
        Command::Reduce { .. } => "reduce",
        Command::Simulate { .. } => "simulate",
        Command::ExportAlpha { .. } => "export-alpha",
        Command::Compare { .. } => "compare",
    }
}

fn print_human(r: &RunReport) {
    println!("command: {}", r.command);
    if let Some(g) = &r.game {
        println!("game: {g}");
    }
    if let Some(s) = r.seed {
        println!("seed: {s}");
    }
    for (k, v) in &r.values {
        println!("{k}: {v}");
    }
    if let Some(e) = r.exploitability {
        println!("exploitability: {e}");
    }
    for (k, v) in &r.details {
        println!("{k}: {v}");
    }
    for a in &r.artifacts {
        println!("wrote: {a}");
    }
    for (k, v) in &r.timing_ms {
        println!("time {k}: {v:.1} ms");
    }
    if let Some(e) = &r.error {
        eprintln!("error: {e}");
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("ASYMGAME_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second initialization in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    let mut report = RunReport {
        command: command_name(&cli.command).into(),
        argv: argv[1..].to_vec(),
        ..RunReport::default()
    };
    if let Err(f) = execute(&cli.command, &mut report) {
        report.exit_code = f.code;
        report.error = Some(f.message);
        if let Some(d) = f.details {
            report.details.entry("violations".into()).or_insert(d);
        }
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print_human(&report);
    }
    ExitCode::from(report.exit_code)
}
