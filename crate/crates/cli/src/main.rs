use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hwidths_core::balls::WidthKind;
use hwidths_core::experiments::{fit_decay, read_rows, run_width_sweep, write_rows, ExperimentConfig};
use hwidths_core::exponents::{cube_exponent, metric_exponent, sobolev_exponent, tree_exponent};
use hwidths_core::hardy::write_operator;
use hwidths_core::metric::{discretize_to_summation, parse_metric_tree, TileLaw, Tiling};
use hwidths_core::partition::{
    check_partition, check_refinement, partition_constant, partition_tree, VertexCost,
};
use hwidths_core::tree::{generate_h_tree, parse_tree, write_tree, HTreeSpec};
use hwidths_core::{Error, SlowFactor};

/// Widths of weighted summation operators on trees.
#[derive(Parser)]
#[command(name = "hwidths", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an h-regular tree in `id parent` format.
    GenerateTree {
        /// JSON file with an h-tree spec; overrides the flags below.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        m_star: u32,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Λ(t) = max(|log2 t|, 1)^e.
        #[arg(long)]
        log_power: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep widths and bounds over the n-grid of an experiment config.
    Widths {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to the config's csv output, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exponent report for a parameter file (JSON).
    Exponent {
        #[arg(long, value_enum)]
        family: Family,
        /// Parameter file, `-` for stdin.
        #[arg(long)]
        params: PathBuf,
    },
    /// Fit the decay slope and compare it with the predicted exponent.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Previously written sweep CSV; the sweep is re-run when absent.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Partition a tree and check the part-count, weight and overlap bounds.
    VerifyPartition {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        n: usize,
        /// Branching bound; defaults to the tree's largest branching.
        #[arg(long)]
        k: Option<usize>,
        /// One non-negative cost per line, in vertex order; unit costs by default.
        #[arg(long)]
        costs: Option<PathBuf>,
        /// Also check overlaps against every m in n..=2n.
        #[arg(long)]
        refinement: bool,
        /// Write `vertex part` lines here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a metric tree to a summation operator, one tile per vertex.
    MetricDiscretize {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        /// JSON reference law for the tile norms; a drift violation fails.
        #[arg(long)]
        law: Option<PathBuf>,
        /// Write the operator (`id parent u w`) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Sobolev,
    Cube,
    Metric,
    Tree,
}

#[derive(Deserialize)]
struct CubeInput {
    p: f64,
    q: f64,
    r: u32,
    d: u32,
    kind: WidthKind,
}

enum Failure {
    /// A checked property does not hold.
    Assertion(String),
    /// Bad input or a library error.
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Input(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::from_json(&read_input(path)?)?)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenerateTree {
            spec,
            theta,
            m_star,
            depth,
            seed,
            log_power,
            out,
        } => {
            let spec = match spec {
                Some(path) => serde_json::from_str(&read_input(&path)?)?,
                None => {
                    let mut s = HTreeSpec::new(theta, m_star, depth);
                    s.seed = seed;
                    if let Some(e) = log_power {
                        s.lambda = SlowFactor::log_power(e);
                    }
                    s
                }
            };
            let tree = generate_h_tree(&spec)?;
            emit(out.as_deref(), &write_tree(&tree))
        }
        Command::Widths { config, out } => {
            let cfg = load_config(&config)?;
            let rows = run_width_sweep(&cfg)?;
            let dest = out.or(cfg.outputs.csv.clone());
            emit(dest.as_deref(), &write_rows(&rows)?)
        }
        Command::Exponent { family, params } => {
            let text = read_input(&params)?;
            let json = match family {
                Family::Sobolev => to_json(&sobolev_exponent(&serde_json::from_str(&text)?)?)?,
                Family::Metric => to_json(&metric_exponent(&serde_json::from_str(&text)?)?)?,
                Family::Tree => to_json(&tree_exponent(&serde_json::from_str(&text)?)?)?,
                Family::Cube => {
                    let c: CubeInput = serde_json::from_str(&text)?;
                    to_json(&cube_exponent(c.p, c.q, c.r, c.d, c.kind)?)?
                }
            };
            emit(None, &json)
        }
        Command::Fit {
            config,
            rows,
            window,
            tolerance,
        } => {
            let cfg = load_config(&config)?;
            let rows = match rows {
                Some(path) => read_rows(&read_input(&path)?)?,
                None => run_width_sweep(&cfg)?,
            };
            let predicted = cfg
                .prediction()?
                .ok_or_else(|| Failure::Input("config gives no exponent regime to compare with".into()))?;
            let fit = fit_decay(
                &rows,
                window.unwrap_or(cfg.window),
                &predicted,
                tolerance.unwrap_or(cfg.tolerance),
            )?;
            let json = to_json(&fit)?;
            emit(None, &json)?;
            if let Some(report) = &cfg.outputs.report {
                emit(Some(report), &json)?;
            }
            if fit.pass {
                Ok(())
            } else {
                Err(Failure::Assertion(format!(
                    "slope {:.4} is not within {} of -{:.4}",
                    fit.slope, fit.tolerance, fit.predicted_exponent
                )))
            }
        }
        Command::VerifyPartition {
            tree,
            n,
            k,
            costs,
            refinement,
            out,
        } => verify_partition(&tree, n, k, costs.as_deref(), refinement, out.as_deref()),
        Command::MetricDiscretize { tree, p, q, law, out } => {
            let mtree = parse_metric_tree(&read_input(&tree)?)?;
            let tiling = Tiling::by_level(&mtree)?;
            let law: Option<TileLaw> = law
                .map(|path| read_input(&path).and_then(|t| Ok(serde_json::from_str(&t)?)))
                .transpose()?;
            let (op, norms) = discretize_to_summation(&mtree, &tiling, p, q, law.as_ref())?;
            emit(out.as_deref(), &write_operator(&op))?;
            #[derive(Serialize)]
            struct Summary {
                tiles: usize,
                c_star: Option<f64>,
                drift: Option<f64>,
                violation: bool,
            }
            let summary = Summary {
                tiles: op.len(),
                c_star: norms.c_star,
                drift: norms.drift,
                violation: norms.violation,
            };
            let json = to_json(&summary)?;
            if out.is_some() {
                emit(None, &json)?;
            } else {
                eprint!("{json}");
            }
            if norms.violation {
                return Err(Failure::Assertion("tile norms drift away from the reference law".into()));
            }
            Ok(())
        }
    }
}

fn verify_partition(
    tree_path: &Path,
    n: usize,
    k: Option<usize>,
    costs: Option<&Path>,
    refinement: bool,
    out: Option<&Path>,
) -> Outcome {
    let tree = parse_tree(&read_input(tree_path)?)?;
    let k = k.unwrap_or_else(|| tree.max_branching()).max(1);
    let cost = match costs {
        None => VertexCost::unit(tree.len()),
        Some(path) => {
            let weights = read_input(path)?
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| Failure::Input(format!("bad cost '{s}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            if weights.len() != tree.len() {
                return Err(Failure::Input(format!(
                    "{} costs for {} vertices",
                    weights.len(),
                    tree.len()
                )));
            }
            VertexCost::new(weights)?
        }
    };
    let part = partition_tree(&tree, &cost, n, k)?;
    let check = check_partition(&tree, &cost, &part, n, k)?;
    let bound = partition_constant(k);
    let mut worst_overlap = None;
    if refinement {
        let mut worst = 0;
        for m in n..=2 * n {
            worst = worst.max(check_refinement(&tree, &cost, n, m, k)?.max_overlap);
        }
        worst_overlap = Some(worst);
    }
    if let Some(path) = out {
        emit(Some(path), &part.to_text(&tree))?;
    }
    #[derive(Serialize)]
    struct Summary {
        n: usize,
        k: usize,
        parts: usize,
        count_ratio: f64,
        constant: f64,
        heaviest_multi: f64,
        weight_bound: f64,
        weight_violations: usize,
        max_overlap: Option<usize>,
    }
    emit(
        None,
        &to_json(&Summary {
            n,
            k,
            parts: check.parts,
            count_ratio: check.count_ratio,
            constant: bound,
            heaviest_multi: check.heaviest_multi,
            weight_bound: check.weight_bound,
            weight_violations: check.weight_violations,
            max_overlap: worst_overlap,
        })?,
    )?;
    let mut problems = Vec::new();
    if check.count_ratio > bound {
        problems.push(format!("{} parts exceed {bound} * n", check.parts));
    }
    if check.weight_violations > 0 {
        problems.push(format!("{} parts exceed the weight bound", check.weight_violations));
    }
    if worst_overlap.is_some_and(|o| o as f64 > bound) {
        problems.push("refinement overlap exceeds the bound".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(problems.join("; ")))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
