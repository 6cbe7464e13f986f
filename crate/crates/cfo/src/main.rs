use std::path::PathBuf;

use clap::{Parser, Subcommand};

use cfo::analysis::{convergence_study, test_case};
use cfo::assembly::solve_cfo;
use cfo::config::{build_run_config, Command, FileConfig, Overrides, RunConfig};
use cfo::mesh::Rect;
use cfo::twophase::run_simulation;
use cfo::{io, CfoError};

/// Locally conservative flux solvers: convergence studies, single solves,
/// and two-phase flow simulation.
#[derive(Parser)]
#[command(name = "cfo", version, about)]
struct Cli {
    /// Flat JSON config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for output files (default: $CFO_OUTPUT_DIR, then `.`).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<String>,
    /// Comma-separated output file kinds to write: vtk, csv (default both).
    #[arg(long, global = true, value_delimiter = ',')]
    formats: Option<Vec<String>>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a test case on a ladder of meshes and print its error table.
    Converge {
        /// Test case id (1..=5).
        #[arg(long)]
        case: Option<usize>,
        /// Mesh family: uniform or perturbed.
        #[arg(long)]
        mesh: Option<String>,
        /// Random seed for the perturbed family.
        #[arg(long)]
        seed: Option<u64>,
        /// Perturbation radius in cell units for the perturbed family.
        #[arg(long)]
        magnitude: Option<f64>,
        /// Comma-separated mesh levels, each double the previous (e.g. 2,4,8).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Solve a test case on one mesh and export the solution fields.
    Solve {
        /// Test case id (1..=5).
        #[arg(long)]
        case: Option<usize>,
        /// Mesh family: uniform or perturbed.
        #[arg(long)]
        mesh: Option<String>,
        /// Random seed for the perturbed family.
        #[arg(long)]
        seed: Option<u64>,
        /// Perturbation radius in cell units for the perturbed family.
        #[arg(long)]
        magnitude: Option<f64>,
        /// Mesh resolution (n×n cells, two triangles each).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the operator-split two-phase flow simulation.
    Twophase {
        /// Mesh resolution (n×n cells, two triangles each).
        #[arg(long)]
        n: Option<usize>,
        /// Transport time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Final simulation time (0 records just the initial state).
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Steps between pressure re-solves (default 1).
        #[arg(long)]
        pressure_update_interval: Option<usize>,
        /// Comma-separated snapshot times.
        #[arg(long, value_delimiter = ',')]
        output_times: Option<Vec<f64>>,
    },
    /// Export a mesh as VTK for inspection.
    Dumpmesh {
        /// Mesh resolution (n×n cells, two triangles each).
        #[arg(long)]
        n: Option<usize>,
        /// Optional test case id whose domain the mesh covers (default:
        /// unit square).
        #[arg(long)]
        case: Option<usize>,
        /// Mesh family: uniform or perturbed.
        #[arg(long)]
        mesh: Option<String>,
        /// Random seed for the perturbed family.
        #[arg(long)]
        seed: Option<u64>,
        /// Perturbation radius in cell units for the perturbed family.
        #[arg(long)]
        magnitude: Option<f64>,
    },
}

fn split(cli: Cli) -> (Command, Option<PathBuf>, Overrides) {
    let mut flags = Overrides {
        output_dir: cli.output_dir,
        formats: cli.formats,
        ..Overrides::default()
    };
    let command = match cli.command {
        Cmd::Converge {
            case,
            mesh,
            seed,
            magnitude,
            levels,
        } => {
            flags.case = case;
            flags.mesh = mesh;
            flags.seed = seed;
            flags.magnitude = magnitude;
            flags.levels = levels;
            Command::Converge
        }
        Cmd::Solve {
            case,
            mesh,
            seed,
            magnitude,
            n,
        } => {
            flags.case = case;
            flags.mesh = mesh;
            flags.seed = seed;
            flags.magnitude = magnitude;
            flags.n = n;
            Command::Solve
        }
        Cmd::Twophase {
            n,
            dt,
            t_end,
            pressure_update_interval,
            output_times,
        } => {
            flags.n = n;
            flags.dt = dt;
            flags.t_end = t_end;
            flags.pressure_update_interval = pressure_update_interval;
            flags.output_times = output_times;
            Command::TwoPhase
        }
        Cmd::Dumpmesh {
            n,
            case,
            mesh,
            seed,
            magnitude,
        } => {
            flags.n = n;
            flags.case = case;
            flags.mesh = mesh;
            flags.seed = seed;
            flags.magnitude = magnitude;
            Command::DumpMesh
        }
    };
    (command, cli.config, flags)
}

fn run(rc: &RunConfig) -> cfo::Result<()> {
    match rc.command {
        Command::Converge => {
            let case = rc.case.expect("validated");
            let table = convergence_study(case, rc.family, &rc.levels)?;
            print!("{}", table.to_display());
            if rc.formats.csv {
                let path = rc.output_dir.join(format!(
                    "converge_case{case}_{}.csv",
                    rc.family.label()
                ));
                io::write_text(&path, &table.to_csv())?;
                println!("wrote {}", path.display());
            }
        }
        Command::Solve => {
            let case = rc.case.expect("validated");
            let n = rc.n.expect("validated");
            if !rc.formats.vtk && !rc.formats.csv {
                return Err(CfoError::Config(
                    "solve writes VTK and CSV, but every format is disabled".into(),
                ));
            }
            let spec = test_case(case)?;
            let mesh = rc.family.build(spec.domain, n)?;
            let sol = solve_cfo(&mesh, &spec)?;
            if rc.formats.vtk {
                let path = rc.output_dir.join(format!(
                    "solution_case{case}_n{n}_{}.vtk",
                    rc.family.label()
                ));
                io::write_text(&path, &io::solution_vtk(&mesh, &sol.u, &sol.lambda)?)?;
                println!("wrote {}", path.display());
            }
            if rc.formats.csv {
                let path = rc.output_dir.join(format!(
                    "flux_case{case}_n{n}_{}.csv",
                    rc.family.label()
                ));
                io::write_text(&path, &io::edge_flux_csv(&mesh, &sol.q)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::TwoPhase => {
            let tp = rc.twophase.as_ref().expect("validated");
            if !rc.formats.vtk && !rc.formats.csv {
                return Err(CfoError::Config(
                    "twophase writes VTK and CSV, but every format is disabled".into(),
                ));
            }
            let mesh = cfo::mesh::Mesh::build_uniform(Rect::unit(), tp.n)?;
            let snapshots = run_simulation(tp)?;
            if rc.formats.vtk {
                for (i, snap) in snapshots.iter().enumerate() {
                    let path = rc.output_dir.join(format!("saturation_{i:04}.vtk"));
                    io::write_text(&path, &io::saturation_vtk(&mesh, &snap.s)?)?;
                    println!("wrote {}", path.display());
                }
            }
            if rc.formats.csv {
                let last = snapshots.last().expect("at least the final state");
                let path = rc.output_dir.join("twophase_fluxes.csv");
                io::write_text(&path, &io::edge_flux_csv(&mesh, &last.v)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::DumpMesh => {
            let n = rc.n.expect("validated");
            if !rc.formats.vtk {
                return Err(CfoError::Config(
                    "dumpmesh writes VTK, but the vtk format is disabled".into(),
                ));
            }
            let domain = match rc.case {
                Some(case) => test_case(case)?.domain,
                None => Rect::unit(),
            };
            let mesh = rc.family.build(domain, n)?;
            let path = rc
                .output_dir
                .join(format!("mesh_n{n}_{}.vtk", rc.family.label()));
            io::write_text(&path, &io::mesh_vtk(&mesh))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn real_main() -> cfo::Result<()> {
    let cli = Cli::parse();
    let (command, config_path, flags) = split(cli);
    let file = match &config_path {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let rc = build_run_config(command, &file, &flags)?;
    run(&rc)
}

fn main() {
    if let Err(e) = real_main() {
        let class = e.class();
        let msg = e.to_string();
        let msg = msg.strip_prefix(&format!("{class}: ")).unwrap_or(&msg);
        eprintln!("error[{class}]: {msg}");
        std::process::exit(1);
    }
}
