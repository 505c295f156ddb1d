use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use nrlrg::features::{FeatureKind, FeatureSpec};
use nrlrg::graph::geodesic_adjacency;
use nrlrg::harness::{run_and_emit, run_bench, BenchConfig, ExperimentConfig};
use nrlrg::io::{read_coords_csv, read_matrix_csv, write_matrix_csv};
use nrlrg::{solve_batch, Error, FeatureMap, Graph, LrgProblem, RecursionState, Result};

#[derive(Parser)]
#[command(name = "nrlrg", version, about = "Linear regression over graphs with node-recursive updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Identity,
    RandomSigmoid,
}

#[derive(Subcommand)]
enum Command {
    /// Build a geodesic adjacency matrix from node coordinates.
    BuildGraph {
        /// CSV with header `name,lat,lon`.
        #[arg(long)]
        coords: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the batch problem and optionally save a recursion state.
    Train {
        /// N x I input matrix.
        #[arg(long)]
        inputs: PathBuf,
        /// N x M target matrix.
        #[arg(long)]
        targets: PathBuf,
        /// M x M adjacency matrix.
        #[arg(long)]
        adjacency: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value = "identity")]
        features: Features,
        /// Feature count for random-sigmoid features (default 2 I).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        feature_seed: u64,
        /// K x M coefficient matrix output.
        #[arg(long)]
        weights_out: PathBuf,
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Append nodes to a saved state one at a time.
    Expand {
        #[arg(long)]
        state: PathBuf,
        /// Adjacency over all nodes; its leading block must match the state's graph.
        #[arg(long)]
        adjacency: PathBuf,
        /// Training targets for all nodes, same rows as the state.
        #[arg(long)]
        targets: PathBuf,
        /// Final node count (default: every node in the adjacency).
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        weights_out: Option<PathBuf>,
        /// Check F Q = I after each insertion and re-solve on failure.
        #[arg(long)]
        verify: bool,
    },
    /// Run an expansion experiment described by a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time one recursive insertion against a batch re-solve.
    Bench {
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildGraph { coords, out } => build_graph(&coords, &out),
        Command::Train {
            inputs,
            targets,
            adjacency,
            alpha,
            beta,
            features,
            k,
            feature_seed,
            weights_out,
            state_out,
        } => {
            let kind = match features {
                Features::Identity => FeatureKind::Identity,
                Features::RandomSigmoid => FeatureKind::RandomSigmoid,
            };
            let spec = FeatureSpec {
                kind,
                k,
                seed: feature_seed,
            };
            train(&inputs, &targets, &adjacency, alpha, beta, &spec, &weights_out, state_out.as_deref())
        }
        Command::Expand {
            state,
            adjacency,
            targets,
            to,
            out,
            weights_out,
            verify,
        } => expand(&state, &adjacency, &targets, to, &out, weights_out.as_deref(), verify),
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_and_emit(&cfg)?;
            println!("wrote {} rows to {}", report.rows.len(), cfg.output.display());
            Ok(())
        }
        Command::Bench { m, k, n, reps, seed } => {
            let cfg = BenchConfig {
                m,
                k,
                n,
                reps,
                seed,
                ..BenchConfig::default()
            };
            let r = run_bench(&cfg)?;
            println!("M={m} K={k} N={n} reps={reps}");
            println!("recursive_median_s {:.6e}", r.recursive_median_s);
            println!("batch_median_s {:.6e}", r.batch_median_s);
            println!("ratio {:.4}", r.ratio);
            println!("max_weight_gap {:.3e}", r.max_weight_gap);
            Ok(())
        }
    }
}

fn node_labels(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("node_{i}")).collect()
}

fn build_graph(coords: &Path, out: &Path) -> Result<()> {
    let nodes = read_coords_csv(coords)?;
    let points: Vec<_> = nodes.iter().map(|(_, p)| *p).collect();
    let names: Vec<String> = nodes.into_iter().map(|(n, _)| n).collect();
    let adjacency = geodesic_adjacency(&points)?;
    write_matrix_csv(out, &names, &adjacency)?;
    println!("wrote {0}x{0} adjacency to {1}", names.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    inputs: &Path,
    targets: &Path,
    adjacency: &Path,
    alpha: f64,
    beta: f64,
    spec: &FeatureSpec,
    weights_out: &Path,
    state_out: Option<&Path>,
) -> Result<()> {
    let (_, x) = read_matrix_csv(inputs)?;
    let (labels, t) = read_matrix_csv(targets)?;
    let graph = Graph::new(read_matrix_csv(adjacency)?.1)?;
    let phi = FeatureMap::from_spec(spec, x.ncols())?.design_matrix(&x)?;
    let problem = LrgProblem::new(phi.clone(), t.clone(), graph.laplacian().clone(), alpha, beta)?;
    let w = solve_batch(&problem)?;
    write_matrix_csv(weights_out, &labels, w.matrix())?;
    if let Some(path) = state_out {
        RecursionState::init(graph, phi, t, alpha, beta)?.save(path)?;
    }
    println!(
        "solved K={} M={} N={}; weights written to {}",
        w.features(),
        w.nodes(),
        problem.phi.samples(),
        weights_out.display()
    );
    Ok(())
}

fn expand(
    state_path: &Path,
    adjacency: &Path,
    targets: &Path,
    to: Option<usize>,
    out: &Path,
    weights_out: Option<&Path>,
    verify: bool,
) -> Result<()> {
    let mut state = RecursionState::load(state_path)?.with_verify(verify);
    let full = Graph::new(read_matrix_csv(adjacency)?.1)?;
    let (_, t) = read_matrix_csv(targets)?;
    let start = state.nodes();
    let total = full.node_count();
    let end = to.unwrap_or(total);
    if end < start || end > total {
        return Err(Error::Validation(format!(
            "--to must lie in {start}..={total}, got {end}"
        )));
    }
    if t.ncols() < end || t.nrows() != state.samples() {
        return Err(Error::DimensionMismatch {
            context: "expand targets",
            expected: format!("{} rows and at least {end} columns", state.samples()),
            got: format!("{}x{}", t.nrows(), t.ncols()),
        });
    }
    let leading = full.adjacency().view((0, 0), (start, start));
    let gap = (leading - state.graph().adjacency()).abs().max();
    if gap > 1e-12 {
        return Err(Error::Validation(format!(
            "leading {start}x{start} adjacency block differs from the saved graph by {gap:e}"
        )));
    }
    let before: DMatrix<f64> = state.weights().matrix().clone();
    let prefix: Vec<usize> = (0..end).collect();
    for node in start..end {
        let attachment = full.attachment_to(node, &prefix[..node])?;
        state = state.update(&attachment, &t.column(node).clone_owned())?;
    }
    state.save(out)?;
    if let Some(path) = weights_out {
        write_matrix_csv(path, &node_labels(end), state.weights().matrix())?;
    }
    let drift = (state.weights().matrix().columns(0, start) - before).abs().max();
    println!(
        "expanded {start} -> {end} nodes; existing-coefficient drift {drift:.3e}; fallbacks {}",
        state.fallbacks()
    );
    Ok(())
}
