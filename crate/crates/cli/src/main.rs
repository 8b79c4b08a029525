//! `brepgraph`: parse, sample, encode and inspect Brep datasets.
//!
//! Output is line-oriented `key=value` text. Exit codes: 0 on success, 1 when
//! an input fails validation or a check fails, 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use brepgraph::align::{clip_loss, fd_check, random_batch};
use brepgraph::dataset::containers::{read_embedding_batch, read_params, write_embedding_batch, write_params};
use brepgraph::dataset::{read_dataset, write_dataset, DatasetItem};
use brepgraph::encoder::{encode, init_encoder, EncoderParams, DEFAULT_D};
use brepgraph::graph::{adjacency_stats, build_graph, BrepGraph, GraphStats};
use brepgraph::model::{parse_unchecked, Severity};
use brepgraph::mqe::invariant_suite;
use brepgraph::sampler::{sample_model, SampledModel, SamplerConfig};
use brepgraph::{parse_brep, validate, BrepModel};

/// Largest finite-difference gradient error accepted by `check-grad`.
const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "brepgraph", version, about = "Brep-to-graph preprocessing toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SamplerFlags {
    /// Minimum per-axis face resolution before clamping.
    #[arg(long, default_value_t = 16)]
    nmin: usize,
    /// Maximum per-axis face resolution before clamping.
    #[arg(long, default_value_t = 32)]
    nmax: usize,
    /// Minimum edge resolution before clamping.
    #[arg(long, default_value_t = 16)]
    mmin: usize,
    /// Maximum edge resolution before clamping.
    #[arg(long, default_value_t = 32)]
    mmax: usize,
}

impl SamplerFlags {
    fn config(self) -> SamplerConfig {
        SamplerConfig {
            n_min_face: self.nmin,
            n_max_face: self.nmax,
            m_min_edge: self.mmin,
            m_max_edge: self.mmax,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and print entity counts.
    Parse { model: PathBuf },
    /// Report every validation issue in a model file.
    Validate { model: PathBuf },
    /// Sample models into a dataset directory.
    Sample {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        sampler: SamplerFlags,
    },
    /// Build the face-adjacency graph of a model and print it.
    Graph {
        model: PathBuf,
        #[command(flatten)]
        sampler: SamplerFlags,
    },
    /// Run the encoder over models or a dataset directory and write tokens.
    Encode {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Contrastive projection width.
        #[arg(long, default_value_t = DEFAULT_D)]
        d: usize,
        /// Load parameters from a container instead of initializing from the seed.
        #[arg(long, conflicts_with_all = ["seed", "d"])]
        params: Option<PathBuf>,
        /// Also write the parameters used.
        #[arg(long)]
        save_params: Option<PathBuf>,
        #[command(flatten)]
        sampler: SamplerFlags,
    },
    /// Contrastive loss and gradient check of an embedding batch file.
    Loss {
        batch: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Gradient check on a seeded random embedding batch.
    CheckGrad {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Write the generated batch to this file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Check the query-expert invariants on seeded random inputs.
    MqeCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        trials: usize,
    },
    /// Node, arc and degree summary of a dataset directory.
    Stats { dataset: PathBuf },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<BrepModel> {
    parse_brep(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn sample_path(path: &Path, cfg: &SamplerConfig) -> Result<SampledModel> {
    let model = load_model(path)?;
    sample_model(Arc::new(model), cfg).with_context(|| format!("sampling {}", path.display()))
}

fn print_stats(prefix: &str, stats: &GraphStats) {
    let degrees: Vec<String> = stats
        .degree_histogram
        .iter()
        .map(|(d, c)| format!("{d}:{c}"))
        .collect();
    println!(
        "{prefix}nodes={} arcs={} isolated={} components={} degrees={}",
        stats.node_count,
        stats.arc_count,
        stats.isolated_nodes,
        stats.components,
        degrees.join(",")
    );
}

fn cmd_parse(path: &Path) -> Result<ExitCode> {
    let m = load_model(path)?;
    println!(
        "name={} surfaces={} curves={} faces={} edges={}",
        m.name,
        m.surfaces.len(),
        m.curves.len(),
        m.faces.len(),
        m.edges.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let model = parse_unchecked(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let report = validate(&model);
    for issue in &report.issues {
        let severity = match issue.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        println!(
            "severity={severity} entity={} message={:?}",
            issue.entity, issue.message
        );
    }
    println!(
        "errors={} warnings={} valid={}",
        report.errors().count(),
        report.warnings().count(),
        report.is_valid()
    );
    Ok(if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sample(models: &[PathBuf], output: &Path, flags: SamplerFlags) -> Result<ExitCode> {
    let cfg = flags.config();
    let mut items = Vec::with_capacity(models.len());
    for (i, path) in models.iter().enumerate() {
        let sampled = sample_path(path, &cfg)?;
        for (f, face) in sampled.faces.iter().enumerate() {
            println!(
                "item={i} face={f} area={:.9} n_s={}",
                face.summary.area, face.resolution
            );
        }
        for (e, edge) in sampled.edges.iter().enumerate() {
            println!(
                "item={i} edge={e} length={:.9} m_c={}",
                edge.summary.length, edge.resolution
            );
        }
        items.push(DatasetItem::from_graph(&build_graph(&sampled), None));
    }
    let manifest = write_dataset(&items, Some(&cfg), output)?;
    println!("items={} output={}", manifest.item_count, output.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_graph(path: &Path, flags: SamplerFlags) -> Result<ExitCode> {
    let graph = build_graph(&sample_path(path, &flags.config())?);
    for (k, a) in graph.arcs.iter().enumerate() {
        println!("arc={k} src={} dst={} edge={}", a.src, a.dst, a.edge);
    }
    let stats = adjacency_stats(&graph);
    print_stats("", &stats);
    println!("seam_edges={}", stats.seam_edges);
    Ok(ExitCode::SUCCESS)
}

fn load_graphs(inputs: &[PathBuf], cfg: &SamplerConfig) -> Result<Vec<BrepGraph>> {
    let mut graphs = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let (_, items) =
                read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
            graphs.extend(items.iter().map(DatasetItem::to_graph));
        } else {
            graphs.push(build_graph(&sample_path(path, cfg)?));
        }
    }
    Ok(graphs)
}

fn cmd_encode(
    inputs: &[PathBuf],
    output: &Path,
    params: EncoderParams,
    save_params: Option<&Path>,
    flags: SamplerFlags,
) -> Result<ExitCode> {
    let cfg = flags.config();
    let graphs = load_graphs(inputs, &cfg)?;
    let mut items = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let out = encode(g, &params).with_context(|| format!("encoding item {i} ({})", g.name))?;
        println!(
            "item={i} name={} nodes={} valid_len={} z_norm={:.9}",
            g.name,
            g.node_count(),
            out.qformer.valid_len,
            out.z_brep.dot(&out.z_brep).sqrt()
        );
        items.push(DatasetItem::from_graph(g, Some(&out)));
    }
    let manifest = write_dataset(&items, Some(&cfg), output)?;
    if let Some(path) = save_params {
        write_params(&params, path)?;
    }
    println!(
        "items={} seed={} d={} output={}",
        manifest.item_count,
        params.seed,
        params.d,
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_loss(path: &Path, eps: f64) -> Result<ExitCode> {
    let batch = read_embedding_batch(path)?;
    let loss = clip_loss(&batch, false)?.loss;
    let err = fd_check(&batch, eps)?;
    println!("loss={loss:.12} grad_err={err:.3e}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_grad(n: usize, d: usize, tau: f64, seed: u64, eps: f64, save: Option<&Path>) -> Result<ExitCode> {
    if n == 0 || d == 0 {
        bail!("--n and --d must be positive");
    }
    let batch = random_batch(seed, n, d, tau);
    if let Some(path) = save {
        write_embedding_batch(&batch, path)?;
    }
    let err = fd_check(&batch, eps)?;
    println!("grad_err={err:.3e}");
    Ok(if err <= GRAD_TOLERANCE {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_mqe_check(seed: u64, trials: usize) -> Result<ExitCode> {
    let checks = invariant_suite(seed, trials);
    if checks.is_empty() {
        bail!("could not initialize expert parameters");
    }
    for c in &checks {
        println!("{}={}", c.name, if c.passed { "pass" } else { "fail" });
    }
    Ok(if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_stats(dir: &Path) -> Result<ExitCode> {
    let (manifest, items) = read_dataset(dir)?;
    let (mut nodes, mut arcs) = (0, 0);
    for (i, item) in items.iter().enumerate() {
        let stats = adjacency_stats(&item.to_graph());
        nodes += stats.node_count;
        arcs += stats.arc_count;
        print_stats(&format!("item={i} name={} ", item.name), &stats);
    }
    println!(
        "items={} nodes={nodes} arcs={arcs} tokens={}",
        manifest.item_count,
        items.iter().filter(|i| i.tokens.is_some()).count()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parse { model } => cmd_parse(&model),
        Command::Validate { model } => cmd_validate(&model),
        Command::Sample {
            models,
            output,
            sampler,
        } => cmd_sample(&models, &output, sampler),
        Command::Graph { model, sampler } => cmd_graph(&model, sampler),
        Command::Encode {
            inputs,
            output,
            seed,
            d,
            params,
            save_params,
            sampler,
        } => {
            let params = match params {
                Some(path) => read_params(&path)?,
                None => init_encoder(seed, d)?,
            };
            cmd_encode(&inputs, &output, params, save_params.as_deref(), sampler)
        }
        Command::Loss { batch, eps } => cmd_loss(&batch, eps),
        Command::CheckGrad {
            n,
            d,
            tau,
            seed,
            eps,
            save,
        } => cmd_check_grad(n, d, tau, seed, eps, save.as_deref()),
        Command::MqeCheck { seed, trials } => cmd_mqe_check(seed, trials),
        Command::Stats { dataset } => cmd_stats(&dataset),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
