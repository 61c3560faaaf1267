use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgw_core::graph::{self, UndirectedGraph};
use hgw_core::mcmc::{self, ChainConfig, InitGraph, Kernel};
use hgw_core::metrics;
use hgw_core::model::{self, Dataset, Hyperparameters, ScalePreset};
use hgw_core::numerics::RngState;
use hgw_core::search::{self, CandidateConfig};
use hgw_core::simulate::{self, RatioCase, TrueModelSpec, TruthKind};
use hgw_core::{io, Error};
use nalgebra::DMatrix;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hgw", version, about = "Graph selection and precision estimation under a hierarchical G-Wishart prior")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "hgw-out")]
    out: PathBuf,
    /// Rule for the scale multiplier g, evaluated at the data dimension.
    #[arg(long, global = true, value_enum, default_value_t = Preset::PaperSim1)]
    preset: Preset,
    /// Degrees of freedom ν.
    #[arg(long, global = true, default_value_t = Hyperparameters::DEFAULT_NU)]
    nu: f64,
    /// Explicit g; overrides --preset.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Edge penalty constant C_τ.
    #[arg(long = "c-tau", global = true, default_value_t = Hyperparameters::DEFAULT_C_TAU)]
    c_tau: f64,
    /// Maximum number of edges R.
    #[arg(long = "r", global = true)]
    max_edges: Option<usize>,
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Input CSV files have a header row.
    #[arg(long, global = true)]
    header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    PaperSim1,
    PaperSim2,
}

impl From<Preset> for ScalePreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::PaperSim1 => ScalePreset::PaperSim1,
            Preset::PaperSim2 => ScalePreset::PaperSim2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sim1Ar1Cov,
    Ar1,
    Ar2,
    Ar4,
    Star,
    Circle,
}

impl From<KindArg> for TruthKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sim1Ar1Cov => TruthKind::Sim1Ar1Cov,
            KindArg::Ar1 => TruthKind::Ar1,
            KindArg::Ar2 => TruthKind::Ar2,
            KindArg::Ar4 => TruthKind::Ar4,
            KindArg::Star => TruthKind::Star,
            KindArg::Circle => TruthKind::Circle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Paper,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    L2,
    Stein,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate data from a true model: X.csv, omega0.csv, graph0.edges.
    GenData {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
    },
    /// Metropolis-Hastings over decomposable graphs.
    Mcmc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3000)]
        iterations: usize,
        #[arg(long = "burn-in", default_value_t = 3000)]
        burn_in: usize,
        #[arg(long, value_enum, default_value_t = KernelArg::Paper)]
        kernel: KernelArg,
        /// `empty`, `threshold`, or an edge-list file.
        #[arg(long, default_value = "empty")]
        init: String,
        #[arg(long, default_value_t = InitGraph::DEFAULT_RIDGE)]
        init_ridge: f64,
        #[arg(long, default_value_t = InitGraph::DEFAULT_THRESHOLD)]
        init_threshold: f64,
        /// Average one posterior precision draw per kept state.
        #[arg(long = "sample-precision")]
        sample_precision: bool,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        /// Independent chains, merged by averaging inclusion frequencies.
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Inclusion threshold for the median-probability graph.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// For p = 4: compare visit frequencies with the enumerated posterior.
        #[arg(long = "p4-oracle")]
        p4_oracle: bool,
    },
    /// Posterior mode by candidate scoring and shotgun search.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        ridges: usize,
        #[arg(long, default_value_t = 0.01)]
        ridge_min: f64,
        #[arg(long, default_value_t = 1.5)]
        ridge_max: f64,
        #[arg(long, default_value_t = 100)]
        thresholds: usize,
        #[arg(long, default_value_t = 0.0)]
        threshold_min: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold_max: f64,
        #[arg(long = "max-candidates", default_value_t = 5000)]
        max_candidates: usize,
        /// Shotgun iterations after the best candidate.
        #[arg(long, default_value_t = 100)]
        budget: usize,
        /// Also write every candidate as candidates/NNNN.edges.
        #[arg(long = "dump-candidates")]
        dump_candidates: bool,
    },
    /// Log Bayes factor and log posterior ratio of two graphs.
    Bf {
        #[arg(long)]
        data: PathBuf,
        /// Numerator graph.
        #[arg(long)]
        g1: PathBuf,
        /// Denominator graph.
        #[arg(long)]
        g0: PathBuf,
    },
    /// Log posterior ratio of a perturbed graph against the truth over a p grid.
    RatioExperiment {
        #[arg(long)]
        case: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<usize>,
        #[arg(long, default_value_t = 150)]
        n: usize,
    },
    /// Bayes estimate of the precision matrix at a fixed graph.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = Estimator::L2)]
        estimator: Estimator,
        /// Monte Carlo draws for the Stein estimator.
        #[arg(long, default_value_t = 1000)]
        draws: usize,
    },
    /// Selection and estimation metrics against the truth.
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long = "omega-hat", requires = "omega0")]
        omega_hat: Option<PathBuf>,
        #[arg(long, requires = "omega_hat")]
        omega0: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Mcmc { .. } => "mcmc",
            Command::Search { .. } => "search",
            Command::Bf { .. } => "bf",
            Command::RatioExperiment { .. } => "ratio-experiment",
            Command::Estimate { .. } => "estimate",
            Command::Metrics { .. } => "metrics",
        }
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = match &e {
            Error::CliqueTooLarge { size, n } => {
                format!("a clique of size {size} exceeds the sample size n = {n}; the marginal likelihood needs every clique to have at most n vertices")
            }
            other => other.to_string(),
        };
        Failure { code: if e.is_model_error() { 3 } else { 2 }, message }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    fs::create_dir_all(&g.out).map_err(|e| usage(format!("{}: {e}", g.out.display())))?;
    let meta = match &cli.command {
        Command::GenData { kind, p, n } => gen_data(g, (*kind).into(), *p, *n)?,
        Command::Mcmc {
            data,
            iterations,
            burn_in,
            kernel,
            init,
            init_ridge,
            init_threshold,
            sample_precision,
            thin,
            chains,
            threshold,
            p4_oracle,
        } => {
            let init = match init.as_str() {
                "empty" => InitGraph::Empty,
                "threshold" => InitGraph::Threshold { ridge: *init_ridge, threshold: *init_threshold },
                path => InitGraph::Graph(read_graph(Path::new(path), None)?),
            };
            let config = ChainConfig {
                iterations: *iterations,
                burn_in: *burn_in,
                seed: g.seed,
                init,
                kernel: match kernel {
                    KernelArg::Paper => Kernel::Paper,
                    KernelArg::Exact => Kernel::Exact,
                },
                sample_precision: *sample_precision,
                thin: *thin,
                record_visits: *p4_oracle,
            };
            run_mcmc(g, data, config, *chains, *threshold, *p4_oracle)?
        }
        Command::Search {
            data,
            ridges,
            ridge_min,
            ridge_max,
            thresholds,
            threshold_min,
            threshold_max,
            max_candidates,
            budget,
            dump_candidates,
        } => {
            let config = CandidateConfig {
                ridge_grid: linspace(*ridge_min, *ridge_max, *ridges),
                threshold_grid: linspace(*threshold_min, *threshold_max, *thresholds),
                max_candidates: *max_candidates,
            };
            run_search(g, data, config, *budget, *dump_candidates)?
        }
        Command::Bf { data, g1, g0 } => run_bf(g, data, g1, g0)?,
        Command::RatioExperiment { case, p, n } => run_ratio(g, *case, p, *n)?,
        Command::Estimate { data, graph, estimator, draws } => run_estimate(g, data, graph, *estimator, *draws)?,
        Command::Metrics { graph, truth, omega_hat, omega0 } => {
            run_metrics(g, graph, truth, omega_hat.as_deref(), omega0.as_deref())?
        }
    };
    let mut full = json!({
        "tool": "hgw",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "seed": g.seed,
    });
    merge(&mut full, meta);
    write_text(&g.out.join("meta.json"), &pretty(&full))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_data(g: &Global, path: &Path) -> CliResult<Dataset> {
    let x = io::read_matrix_csv(path, g.header)?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(usage(format!("{}: empty data matrix", path.display())));
    }
    Ok(Dataset::new(x)?)
}

fn read_graph(path: &Path, p: Option<usize>) -> CliResult<UndirectedGraph> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    graph::parse_edge_list(&text, p).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn resolve_hyper(g: &Global, p: usize) -> CliResult<(Hyperparameters, Value)> {
    let (value, source) = match g.g {
        Some(v) => (v, "explicit".to_string()),
        None => {
            let preset: ScalePreset = g.preset.into();
            (preset.g(p), preset.name().to_string())
        }
    };
    let hyper = Hyperparameters { nu: g.nu, g: value, c_tau: g.c_tau, max_edges: g.max_edges };
    hyper.validate(p)?;
    let meta = json!({
        "hyperparameters": {
            "nu": hyper.nu,
            "g": hyper.g,
            "g_source": source,
            "c_tau": hyper.c_tau,
            "max_edges": hyper.effective_max_edges(p),
        }
    });
    Ok((hyper, meta))
}

fn gen_data(g: &Global, kind: TruthKind, p: usize, n: usize) -> CliResult<Value> {
    // Every failure here is a bad specification, including a non-PD precision.
    let to_usage = |e: Error| usage(e.to_string());
    let spec = TrueModelSpec::new(kind, p).map_err(to_usage)?;
    let truth = simulate::build_truth(spec).map_err(to_usage)?;
    let mut rng = RngState::new(g.seed, 0);
    let data = simulate::generate_data(&truth, n, &mut rng).map_err(to_usage)?;
    io::write_matrix_csv(&g.out.join("X.csv"), data.x())?;
    io::write_matrix_csv(&g.out.join("omega0.csv"), &truth.omega.to_dense())?;
    write_text(&g.out.join("graph0.edges"), &graph::write_edge_list(&truth.graph))?;
    Ok(json!({
        "spec": { "kind": kind.name(), "p": p },
        "n": n,
        "p": p,
        "true_edges": truth.graph.edge_count(),
        "decomposable": graph::is_decomposable(&truth.graph),
    }))
}

fn format_trace(res: &mcmc::ChainResult) -> String {
    let mut s = String::from("iteration,log_posterior,edge_count,accepted\n");
    let t = &res.trace;
    for k in 0..t.log_posterior.len() {
        s.push_str(&format!("{},{:?},{},{}\n", k + 1, t.log_posterior[k], t.edge_count[k], t.accepted[k] as u8));
    }
    s
}

fn run_mcmc(
    g: &Global,
    data_path: &Path,
    config: ChainConfig,
    chains: usize,
    threshold: f64,
    p4_oracle: bool,
) -> CliResult<Value> {
    let data = read_data(g, data_path)?;
    let p = data.p();
    let (hyper, mut meta) = resolve_hyper(g, p)?;
    if chains == 0 {
        return Err(usage("--chains must be positive"));
    }
    if p4_oracle && p != 4 {
        return Err(usage(format!("--p4-oracle needs p = 4, data have p = {p}")));
    }
    let results = mcmc::run_chains(&config, &data, &hyper, chains)?;
    let inclusion = mcmc::merged_inclusion(&results)?;
    let (median, median_decomposable) = mcmc::median_probability_graph(&inclusion, threshold);
    let best = results
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.best_score
                .log_posterior_unnorm
                .total_cmp(&b.1.best_score.log_posterior_unnorm)
                .then(b.0.cmp(&a.0))
        })
        .map(|(_, r)| r)
        .expect("at least one chain");

    io::write_matrix_csv(&g.out.join("inclusion.csv"), &inclusion.to_dense())?;
    write_text(&g.out.join("trace.csv"), &format_trace(&results[0]))?;
    write_text(&g.out.join("median_graph.edges"), &graph::write_edge_list(&median))?;
    write_text(&g.out.join("best_graph.edges"), &graph::write_edge_list(&best.best_graph))?;
    let chain_json: Vec<Value> = results.iter().map(|r| r.to_json()).collect();
    write_text(&g.out.join("chain.json"), &pretty(&Value::Array(chain_json)))?;
    let draws: usize = results.iter().map(|r| r.precision_draws).sum();
    if config.sample_precision && draws > 0 {
        let mut mean = DMatrix::<f64>::zeros(p, p);
        for r in &results {
            if let Some(m) = &r.precision_mean {
                mean += m.to_dense() * (r.precision_draws as f64 / draws as f64);
            }
        }
        io::write_matrix_csv(&g.out.join("omega_mean.csv"), &mean)?;
    }
    merge(
        &mut meta,
        json!({
            "data": data_path.display().to_string(),
            "n": data.n(),
            "p": p,
            "chain": config,
            "chains": chains,
            "median_threshold": threshold,
            "median_graph_edges": median.edge_count(),
            "median_graph_decomposable": median_decomposable,
            "best_log_posterior": best.best_score.log_posterior_unnorm,
            "acceptance_rate": results[0].acceptance_rate(),
        }),
    );
    if p4_oracle {
        let tv = p4_total_variation(&data, &hyper, &results)?;
        println!("total variation distance to the enumerated posterior: {tv:.6}");
        merge(&mut meta, json!({ "p4_oracle_tv": tv }));
    }
    Ok(meta)
}

fn p4_total_variation(data: &Dataset, hyper: &Hyperparameters, results: &[mcmc::ChainResult]) -> CliResult<f64> {
    let graphs = graph::enumerate_decomposable(4);
    let scores = graphs
        .iter()
        .map(|g| model::score_graph(data, g, hyper).map(|s| s.log_posterior_unnorm))
        .collect::<Result<Vec<f64>, Error>>()?;
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
    let mut counts = std::collections::HashMap::new();
    let mut total = 0u64;
    for r in results {
        for (g, c) in r.visits.iter().flatten() {
            *counts.entry(g.clone()).or_insert(0u64) += c;
            total += c;
        }
    }
    if total == 0 {
        return Err(usage("--p4-oracle needs at least one kept iteration"));
    }
    let tv: f64 = graphs
        .iter()
        .zip(&scores)
        .map(|(g, s)| {
            let freq = *counts.get(g).unwrap_or(&0) as f64 / total as f64;
            (freq - (s - top).exp() / z).abs()
        })
        .sum();
    Ok(tv / 2.0)
}

fn run_search(g: &Global, data_path: &Path, config: CandidateConfig, budget: usize, dump: bool) -> CliResult<Value> {
    let data = read_data(g, data_path)?;
    let p = data.p();
    let (hyper, mut meta) = resolve_hyper(g, p)?;
    config.validate()?;
    let candidates = search::candidate_graphs(&data, &config)?;
    let mut rng = RngState::new(g.seed, 0);
    let res = search::mode_from_candidates(&data, &hyper, &candidates, budget, &mut rng)?;
    write_text(&g.out.join("mode_graph.edges"), &graph::write_edge_list(&res.mode_graph))?;
    write_text(
        &g.out.join("mode_score.json"),
        &pretty(&serde_json::to_value(&res).expect("search result serializes")),
    )?;
    write_text(
        &g.out.join("candidates_meta.json"),
        &pretty(&json!({
            "config": config,
            "distinct_candidates": candidates.len(),
            "edge_counts": candidates.iter().map(|c| c.edge_count()).collect::<Vec<_>>(),
        })),
    )?;
    if dump {
        let dir = g.out.join("candidates");
        fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        for (k, c) in candidates.iter().enumerate() {
            write_text(&dir.join(format!("{k:04}.edges")), &graph::write_edge_list(c))?;
        }
    }
    println!("{}", res.mode_score.log_posterior_unnorm);
    merge(
        &mut meta,
        json!({
            "data": data_path.display().to_string(),
            "n": data.n(),
            "p": p,
            "budget": budget,
            "distinct_candidates": candidates.len(),
            "mode_log_posterior": res.mode_score.log_posterior_unnorm,
        }),
    );
    Ok(meta)
}

fn run_bf(g: &Global, data_path: &Path, g1_path: &Path, g0_path: &Path) -> CliResult<Value> {
    let data = read_data(g, data_path)?;
    let p = data.p();
    let (hyper, mut meta) = resolve_hyper(g, p)?;
    let g1 = read_graph(g1_path, Some(p))?;
    let g0 = read_graph(g0_path, Some(p))?;
    let log_bf = model::log_pairwise_bayes_factor(&data, &g1, &g0, &hyper)?;
    let log_pr = model::log_posterior_ratio(&data, &g1, &g0, &hyper)?;
    let out = json!({ "log_bayes_factor": log_bf, "log_posterior_ratio": log_pr });
    println!("{}", serde_json::to_string(&out).expect("JSON values serialize"));
    write_text(&g.out.join("bf.json"), &pretty(&out))?;
    merge(
        &mut meta,
        json!({
            "data": data_path.display().to_string(),
            "g1": g1_path.display().to_string(),
            "g0": g0_path.display().to_string(),
            "n": data.n(),
            "p": p,
        }),
    );
    Ok(meta)
}

fn run_ratio(g: &Global, case: usize, ps: &[usize], n: usize) -> CliResult<Value> {
    let case = RatioCase::from_index(case)?;
    let explicit = g.g;
    let preset: ScalePreset = g.preset.into();
    let mut resolved = Vec::new();
    for &p in ps {
        let (_, m) = resolve_hyper(g, p)?;
        resolved.push(json!({ "p": p, "hyperparameters": m["hyperparameters"] }));
    }
    let (nu, c_tau, r) = (g.nu, g.c_tau, g.max_edges);
    let hyper_for_p = move |p: usize| Hyperparameters {
        nu,
        g: explicit.unwrap_or_else(|| preset.g(p)),
        c_tau,
        max_edges: r,
    };
    let rows = simulate::posterior_ratio_experiment(ps, n, case, &hyper_for_p, g.seed)?;
    let mut csv = String::from("case,p,n,log_ratio,seed\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{:?},{}\n", r.case, r.p, r.n, r.log_ratio, r.seed));
        println!("case {} p {} n {}: log ratio {:.4}", r.case, r.p, r.n, r.log_ratio);
    }
    write_text(&g.out.join("ratio.csv"), &csv)?;
    Ok(json!({
        "case": case.index(),
        "n": n,
        "p": ps,
        "per_p": resolved,
        "graph_sizes": rows.iter().map(|r| json!({"p": r.p, "true_edges": r.true_edges, "graph_edges": r.graph_edges})).collect::<Vec<_>>(),
        "size_rules": "case 1 and 3 target 2|G0| edges, capped by decomposable additions; case 2 and 4 target floor(|G0|/2)",
    }))
}

fn run_estimate(g: &Global, data_path: &Path, graph_path: &Path, estimator: Estimator, draws: usize) -> CliResult<Value> {
    let data = read_data(g, data_path)?;
    let p = data.p();
    let (hyper, mut meta) = resolve_hyper(g, p)?;
    let g_hat = read_graph(graph_path, Some(p))?;
    let (omega, name) = match estimator {
        Estimator::L2 => (search::bayes_estimator_l2(&data, &g_hat, &hyper)?, "l2"),
        Estimator::Stein => {
            let mut rng = RngState::new(g.seed, 0);
            (search::bayes_estimator_l1_stein(&data, &g_hat, &hyper, draws, &mut rng)?, "stein")
        }
    };
    io::write_matrix_csv(&g.out.join("omega_hat.csv"), &omega.to_dense())?;
    merge(
        &mut meta,
        json!({
            "data": data_path.display().to_string(),
            "graph": graph_path.display().to_string(),
            "estimator": name,
            "draws": if name == "stein" { Some(draws) } else { None },
            "n": data.n(),
            "p": p,
        }),
    );
    Ok(meta)
}

fn run_metrics(
    g: &Global,
    graph_path: &Path,
    truth_path: &Path,
    omega_hat: Option<&Path>,
    omega0: Option<&Path>,
) -> CliResult<Value> {
    let truth = read_graph(truth_path, None)?;
    let est = read_graph(graph_path, Some(truth.p()))?;
    let counts = metrics::confusion(&est, &truth)?;
    let report = metrics::selection_report(&counts);
    write_text(
        &g.out.join("selection.csv"),
        &format!("{}\n{}\n", metrics::SelectionReport::CSV_HEADER, report.csv_row()),
    )?;
    println!("{}\n{}", metrics::SelectionReport::CSV_HEADER, report.csv_row());
    let mut meta = json!({
        "graph": graph_path.display().to_string(),
        "truth": truth_path.display().to_string(),
        "confusion": counts,
        "selection": report,
    });
    if let (Some(a), Some(b)) = (omega_hat, omega0) {
        let hat = io::read_matrix_csv(a, false)?;
        let zero = io::read_matrix_csv(b, false)?;
        let errors = metrics::relative_errors(&hat, &zero)?;
        write_text(
            &g.out.join("errors.csv"),
            &format!("{}\n{}\n", metrics::RelativeErrors::CSV_HEADER, errors.csv_row()),
        )?;
        println!("{}\n{}", metrics::RelativeErrors::CSV_HEADER, errors.csv_row());
        merge(
            &mut meta,
            json!({
                "relative_errors": errors,
                "max_column_support_truth": metrics::max_column_support(&zero),
            }),
        );
    }
    Ok(meta)
}
