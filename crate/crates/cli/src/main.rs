use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lrspline::n2s::{Expansion, Parity, PipelineOptions};
use lrspline::poisson::Strategy;
use lrspline::{svg, Error, Result};
use lrspline_cli::*;

#[derive(Parser)]
#[command(name = "lrspline", version, about = "LR B-spline refinement experiments")]
struct Cli {
    /// Seed for randomized sampling (collocation points).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParityArg {
    OddVertical,
    OddHorizontal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpansionArg {
    OneDirectional,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoArg {
    Structured,
    N2s2,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoissonArg {
    Tensor,
    N2s2,
    Both,
}

#[derive(clap::Args)]
struct Refinement {
    /// Direction extended in odd iterations.
    #[arg(long, value_enum, default_value = "odd-vertical")]
    parity: ParityArg,
    #[arg(long, value_enum, default_value = "one-directional")]
    expansion: ExpansionArg,
}

impl Refinement {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            parity: match self.parity {
                ParityArg::OddVertical => Parity::OddVertical,
                ParityArg::OddHorizontal => Parity::OddHorizontal,
            },
            expansion: match self.expansion {
                ExpansionArg::OneDirectional => Expansion::OneDirectional,
                ExpansionArg::Full => Expansion::Full,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Refine along the diagonal of the unit square and draw every iteration.
    MeshDemo {
        #[arg(long, num_args = 2, value_names = ["P1", "P2"], default_values_t = [2, 2])]
        degree: Vec<u32>,
        #[arg(long, default_value_t = 7)]
        iterations: usize,
        #[arg(long, value_enum, default_value = "n2s2")]
        strategy: DemoArg,
        #[command(flatten)]
        refinement: Refinement,
        /// Output directory.
        #[arg(long, default_value = "mesh-demo")]
        out: PathBuf,
    },
    /// Quasi-interpolate the three-peaks function on tensor and N2S2 meshes.
    QiPeaks {
        #[arg(long, num_args = 2, value_names = ["P1", "P2"], default_values_t = [2, 2])]
        degree: Vec<u32>,
        #[arg(long, default_value_t = 7)]
        levels: u32,
        #[arg(long, default_value_t = 150)]
        grid: usize,
        #[command(flatten)]
        refinement: Refinement,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the sharp-layer Poisson problem on levels 2..=L.
    Poisson {
        #[arg(long, num_args = 2, value_names = ["P1", "P2"], default_values_t = [2, 2])]
        degree: Vec<u32>,
        /// Finest level, as `L` or `2..L`.
        #[arg(long, default_value = "6")]
        levels: String,
        #[arg(long, value_enum, default_value = "both")]
        strategy: PoissonArg,
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[command(flatten)]
        refinement: Refinement,
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG of the finest N2S2 mesh.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Check a mesh or space JSON file for local linear independence.
    Verify {
        path: PathBuf,
        /// Full JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-element support counts as CSV.
        #[arg(long)]
        elements: Option<PathBuf>,
    },
}

fn pair(v: &[u32]) -> (u32, u32) {
    (v[0], v[1])
}

fn parse_levels(s: &str) -> Result<u32> {
    let last = match s.split_once("..") {
        Some((first, last)) => {
            if first.trim() != "2" {
                return Err(Error::Precondition("levels start at 2".into()));
            }
            last
        }
        None => s,
    };
    last.trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| Error::Precondition(format!("invalid level range {s:?}")))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::MeshDemo { degree, iterations, strategy, refinement, out } => {
            let cfg = MeshDemoConfig {
                degree: pair(&degree),
                iterations,
                strategy: match strategy {
                    DemoArg::Structured => DemoStrategy::Structured,
                    DemoArg::N2s2 => DemoStrategy::N2s2,
                },
                options: refinement.options(),
                out,
            };
            let r = run_mesh_demo(&cfg)?;
            println!("counts {}", format_counts(&r.counts));
            println!(
                "final {} functions, {}",
                r.space.len(),
                if r.independent { "locally linearly independent" } else { "not locally linearly independent" }
            );
            Ok(true)
        }
        Command::QiPeaks { degree, levels, grid, refinement, out } => {
            let rows = run_qi_peaks(pair(&degree), levels, grid, refinement.options())?;
            match out {
                Some(p) => write_qi_csv(&rows, &p)?,
                None => {
                    println!("level,n_tensor,n_n2s2,max_error_tensor,max_error_n2s2");
                    for r in &rows {
                        println!(
                            "{},{},{},{:e},{:e}",
                            r.level, r.n_tensor, r.n_n2s2, r.max_error_tensor, r.max_error_n2s2
                        );
                    }
                }
            }
            Ok(true)
        }
        Command::Poisson { degree, levels, strategy, grid, refinement, out, svg: svg_out } => {
            let max = parse_levels(&levels)?;
            let strategies: &[Strategy] = match strategy {
                PoissonArg::Tensor => &[Strategy::Tensor],
                PoissonArg::N2s2 => &[Strategy::N2s2],
                PoissonArg::Both => &[Strategy::Tensor, Strategy::N2s2],
            };
            let rows = run_poisson(strategies, max, pair(&degree), grid, refinement.options())?;
            match out {
                Some(p) => write_poisson_csv(&rows, &p)?,
                None => {
                    println!("strategy,level,n_functions,linf,l2");
                    for r in &rows {
                        println!(
                            "{},{},{},{:e},{:e}",
                            r.strategy.name(),
                            r.level,
                            r.report.n_functions,
                            r.report.linf,
                            r.report.l2
                        );
                    }
                }
            }
            if let Some(p) = svg_out {
                let spaces = lrspline::poisson::level_spaces(Strategy::N2s2, max, pair(&degree), refinement.options())?;
                svg::write_svg(spaces.last().expect("at least one level").mesh(), &p)?;
            }
            Ok(true)
        }
        Command::Verify { path, out, elements } => {
            let (space, report) = run_verify(&path, cli.seed)?;
            println!("{}", report.summary());
            if let Some(p) = out {
                write_report_json(&report, &p)?;
            }
            if let Some(p) = elements {
                write_element_table(&space, &p)?;
            }
            Ok(report.all_green())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
