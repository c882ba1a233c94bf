use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use defermdp::config::{parse_config, parse_problem_kind};
use defermdp::dataset::{DatasetSpec, GraphModel, Manifest, ManifestEntry};
use defermdp::graph::io::{load_edge_list, save_edge_list};
use defermdp::graph::sat::{parse_dimacs, sat3_to_mis};
use defermdp::graph::Graph;
use defermdp::net::{GraphSageNet, NetConfig};
use defermdp::nn::ParamStore;
use defermdp::ppo::{evaluate_best_of_k, problem_spec_for, train};
use defermdp::problem::{is_independent, objective, ProblemKind};
use defermdp::seeded_stream;
use defermdp::solver::{brute_force_generic, brute_force_mis, greedy_mis, local_search_2imp};

#[derive(Parser)]
#[command(
    name = "defermdp",
    version,
    about = "Deferred-decision RL for independent sets and friends"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an edge-list dataset plus a regeneration manifest.
    Gen(GenArgs),
    /// Train a policy from a config file.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset (best of k rollouts per graph).
    Eval(EvalArgs),
    /// Run the non-learned baselines on a dataset.
    Solve(SolveArgs),
    /// Exact optima on a dataset (exponential; size-capped).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Graph model: er | ba | hk | ws | sat.
    #[arg(long)]
    model: Option<String>,
    /// Regenerate from an existing manifest instead of fresh sampling.
    #[arg(long, conflicts_with = "model")]
    from_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    n_min: usize,
    #[arg(long, default_value_t = 100)]
    n_max: usize,
    /// Number of graphs to generate.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// ER edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// BA/HK edges attached per new vertex.
    #[arg(long)]
    m_attach: Option<usize>,
    /// HK triad-closure probability.
    #[arg(long)]
    p_triad: Option<f64>,
    /// WS ring degree (even).
    #[arg(long)]
    k: Option<usize>,
    /// WS rewiring probability.
    #[arg(long)]
    p_rewire: Option<f64>,
    /// Directory of DIMACS CNF files to reduce (model = sat).
    #[arg(long)]
    cnf_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoints and metrics.
    #[arg(long)]
    out: PathBuf,
    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of edge-list files.
    #[arg(long)]
    dataset: PathBuf,
    /// Rollouts per graph; the best objective is reported.
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Polish each sampled independent set with 2-improvement local search.
    #[arg(long)]
    local_search: bool,
    /// Objective: mis | mwis | pcmis | maxcut | ising.
    #[arg(long, default_value = "mis")]
    problem: String,
    /// Episode horizon; match the training horizon.
    #[arg(long, default_value_t = 32)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results file (newline-delimited JSON); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Directory of edge-list files.
    #[arg(long)]
    dataset: PathBuf,
    /// greedy | greedy+ls
    #[arg(long, default_value = "greedy+ls")]
    method: String,
    /// Results file (newline-delimited JSON); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Directory of edge-list files.
    #[arg(long)]
    dataset: PathBuf,
    /// Objective: mis | mwis | pcmis | maxcut | ising.
    #[arg(long, default_value = "mis")]
    problem: String,
    /// Seed for per-instance parameters (MWIS weights).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results file (newline-delimited JSON); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    file: &'a str,
    n: usize,
    m: usize,
    objective: f64,
    feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<bool>,
    time_ms: u64,
}

#[derive(Serialize)]
struct Summary {
    graphs: usize,
    mean_objective: f64,
    max_objective: f64,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Oracle(args) => cmd_oracle(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;

    if let Some(path) = &args.from_manifest {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("bad manifest {}", path.display()))?;
        let spec = manifest.spec().map_err(anyhow::Error::msg)?;
        for entry in &manifest.files {
            let g = spec.model.generate(entry.n, entry.seed);
            save_edge_list(&args.out.join(&entry.file), &g)?;
        }
        println!(
            "regenerated {} graphs into {}",
            manifest.files.len(),
            args.out.display()
        );
        return Ok(());
    }

    let model_name = args
        .model
        .as_deref()
        .context("one of --model or --from-manifest is required")?;
    if model_name == "sat" {
        return gen_from_cnf(&args);
    }

    let need = |opt: Option<f64>, flag: &str| {
        opt.with_context(|| format!("model `{model_name}` requires --{flag}"))
    };
    let need_usize = |opt: Option<usize>, flag: &str| {
        opt.with_context(|| format!("model `{model_name}` requires --{flag}"))
    };
    let model = match model_name {
        "er" => GraphModel::Er {
            p: need(args.p, "p")?,
        },
        "ba" => GraphModel::Ba {
            m_attach: need_usize(args.m_attach, "m-attach")?,
        },
        "hk" => GraphModel::Hk {
            m_attach: need_usize(args.m_attach, "m-attach")?,
            p_triad: need(args.p_triad, "p-triad")?,
        },
        "ws" => GraphModel::Ws {
            k: need_usize(args.k, "k")?,
            p_rewire: need(args.p_rewire, "p-rewire")?,
        },
        other => bail!("unknown model `{other}` (expected er | ba | hk | ws | sat)"),
    };
    let spec = DatasetSpec {
        model,
        n_min: args.n_min,
        n_max: args.n_max,
    };
    spec.validate().map_err(anyhow::Error::msg)?;

    let mut manifest = Manifest::new(&spec);
    let mut rng = seeded_stream(args.seed, "gen");
    for i in 0..args.count {
        let (n, graph_seed) = spec.draw(&mut rng);
        let g = spec.model.generate(n, graph_seed);
        let file = format!("g{i:04}.txt");
        save_edge_list(&args.out.join(&file), &g)?;
        manifest.files.push(ManifestEntry {
            file,
            n,
            seed: graph_seed,
        });
    }
    let manifest_path = args.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    println!(
        "wrote {} graphs and manifest.json into {}",
        args.count,
        args.out.display()
    );
    Ok(())
}

fn gen_from_cnf(args: &GenArgs) -> Result<()> {
    let dir = args
        .cnf_dir
        .as_ref()
        .context("--model sat requires --cnf-dir")?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cnf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .cnf files in {}", dir.display());
    }
    for path in &paths {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let formula = parse_dimacs(&text).with_context(|| format!("bad CNF {}", path.display()))?;
        let (g, _literals) = sat3_to_mis(&formula.clauses)
            .with_context(|| format!("cannot reduce {}", path.display()))?;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        save_edge_list(&args.out.join(format!("{stem}.txt")), &g)?;
    }
    println!(
        "reduced {} formulas into {}",
        paths.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut cfg =
        parse_config(&text).with_context(|| format!("bad config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let outcome = train(&cfg, &args.out)?;
    match outcome.best_val {
        Some(v) => println!(
            "trained {} updates, best validation mean {v:.4}",
            outcome.updates
        ),
        None => println!(
            "trained {} updates (no validation pass ran)",
            outcome.updates
        ),
    }
    println!("checkpoints and metrics.ndjson in {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let kind = parse_problem_kind(&args.problem)
        .with_context(|| format!("unknown problem `{}`", args.problem))?;
    if args.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let store = ParamStore::load(&args.checkpoint)
        .with_context(|| format!("cannot load {}", args.checkpoint.display()))?;
    let net = GraphSageNet::from_store(NetConfig::default(), store)
        .with_context(|| format!("incompatible checkpoint {}", args.checkpoint.display()))?;
    let dataset = list_dataset(&args.dataset)?;

    let mut rng = seeded_stream(args.seed, "eval");
    let mut lines = Vec::new();
    let mut objectives = Vec::new();
    for (file, g) in &dataset {
        let spec = instance_spec(kind, g.vertex_count(), args.seed, file);
        let records = evaluate_best_of_k(
            &net,
            std::slice::from_ref(&(g.clone(), spec.clone())),
            args.horizon,
            args.samples,
            args.local_search,
            &mut rng,
        )?;
        let rec = &records[0];
        let feasible = feasibility(kind, g, &rec.assignment);
        lines.push(render_line(ResultLine {
            file,
            n: g.vertex_count(),
            m: g.edge_count(),
            objective: rec.objective,
            feasible,
            samples: Some(args.samples),
            exact: None,
            time_ms: rec.time_ms,
        })?);
        objectives.push(rec.objective);
    }
    finish_results(lines, &objectives, args.out.as_deref())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let with_ls = match args.method.as_str() {
        "greedy" => false,
        "greedy+ls" => true,
        other => bail!("unknown method `{other}` (expected greedy | greedy+ls)"),
    };
    let dataset = list_dataset(&args.dataset)?;
    let mut lines = Vec::new();
    let mut objectives = Vec::new();
    for (file, g) in &dataset {
        let start = Instant::now();
        let mut set = greedy_mis(g);
        if with_ls {
            set = local_search_2imp(g, &set)?;
        }
        let time_ms = start.elapsed().as_millis() as u64;
        let x = membership_vector(g.vertex_count(), &set);
        lines.push(render_line(ResultLine {
            file,
            n: g.vertex_count(),
            m: g.edge_count(),
            objective: set.len() as f64,
            feasible: is_independent(g, &x),
            samples: None,
            exact: None,
            time_ms,
        })?);
        objectives.push(set.len() as f64);
    }
    finish_results(lines, &objectives, args.out.as_deref())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let kind = parse_problem_kind(&args.problem)
        .with_context(|| format!("unknown problem `{}`", args.problem))?;
    let dataset = list_dataset(&args.dataset)?;
    let mut lines = Vec::new();
    let mut objectives = Vec::new();
    for (file, g) in &dataset {
        let spec = instance_spec(kind, g.vertex_count(), args.seed, file);
        let start = Instant::now();
        let (opt, x) = match kind {
            ProblemKind::Mis => {
                let (size, set) =
                    brute_force_mis(g).with_context(|| format!("{file}: oracle refused"))?;
                (size as f64, membership_vector(g.vertex_count(), &set))
            }
            _ => {
                let (opt, x) = brute_force_generic(&spec, g)
                    .with_context(|| format!("{file}: oracle refused"))?;
                (opt, x)
            }
        };
        let time_ms = start.elapsed().as_millis() as u64;
        debug_assert!((objective(&spec, g, &x) - opt).abs() < 1e-9);
        lines.push(render_line(ResultLine {
            file,
            n: g.vertex_count(),
            m: g.edge_count(),
            objective: opt,
            feasible: feasibility(kind, g, &x),
            samples: None,
            exact: Some(true),
            time_ms,
        })?);
        objectives.push(opt);
    }
    finish_results(lines, &objectives, args.out.as_deref())
}

/// Loads every `.txt` file in `dir`, sorted by filename.
fn list_dataset(dir: &Path) -> Result<Vec<(String, Graph)>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no edge-list (.txt) files in {}", dir.display());
    }
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let path = dir.join(&name);
        let g = load_edge_list(&path).with_context(|| format!("cannot load {}", path.display()))?;
        out.push((name, g));
    }
    Ok(out)
}

/// Instance parameters (MWIS weights) come from a per-file stream so that
/// eval and oracle agree on the same instance regardless of file order.
fn instance_spec(
    kind: ProblemKind,
    n: usize,
    seed: u64,
    file: &str,
) -> defermdp::problem::ProblemSpec {
    problem_spec_for(kind, n, &mut seeded_stream(seed, &format!("spec/{file}")))
}

fn feasibility(kind: ProblemKind, g: &Graph, x: &[u8]) -> bool {
    match kind {
        ProblemKind::Mis | ProblemKind::Mwis => is_independent(g, x),
        _ => x.len() == g.vertex_count(),
    }
}

fn membership_vector(n: usize, set: &[usize]) -> Vec<u8> {
    let mut x = vec![0u8; n];
    for &v in set {
        x[v] = 1;
    }
    x
}

fn render_line(line: ResultLine) -> Result<String> {
    Ok(serde_json::to_string(&line)?)
}

fn finish_results(mut lines: Vec<String>, objectives: &[f64], out: Option<&Path>) -> Result<()> {
    let mean = objectives.iter().sum::<f64>() / objectives.len() as f64;
    let max = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lines.push(serde_json::to_string(&Summary {
        graphs: objectives.len(),
        mean_objective: mean,
        max_objective: max,
    })?);
    let mut text = lines.join("\n");
    text.push('\n');
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
