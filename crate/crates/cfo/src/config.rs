//! Run configuration for the command-line driver: a flat JSON config file,
//! flag overrides, and the merged+validated [`RunConfig`].

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::MeshFamily;
use crate::twophase::TwoPhaseConfig;
use crate::{CfoError, Result};

/// What the driver is asked to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve one case on a ladder of mesh levels and report error norms.
    Converge,
    /// Solve one case on one mesh and export the fields.
    Solve,
    /// Run the operator-split two-phase simulation.
    TwoPhase,
    /// Export a mesh for inspection.
    DumpMesh,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::Solve => "solve",
            Command::TwoPhase => "twophase",
            Command::DumpMesh => "dumpmesh",
        }
    }

    fn parse(s: &str) -> Result<Command> {
        match s {
            "converge" => Ok(Command::Converge),
            "solve" => Ok(Command::Solve),
            "twophase" => Ok(Command::TwoPhase),
            "dumpmesh" => Ok(Command::DumpMesh),
            other => Err(CfoError::Config(format!(
                "unknown command {other:?} (valid: converge, solve, twophase, dumpmesh)"
            ))),
        }
    }
}

/// Flat JSON config file; every key is optional and named after the
/// corresponding [`RunConfig`] field. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub case: Option<usize>,
    pub mesh: Option<String>,
    pub seed: Option<u64>,
    pub magnitude: Option<f64>,
    pub levels: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub pressure_update_interval: Option<usize>,
    pub output_times: Option<Vec<f64>>,
    pub output_dir: Option<String>,
    pub formats: Option<Vec<String>>,
}

impl FileConfig {
    /// Parse a config file; an empty file is an empty configuration.
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)?;
        if text.trim().is_empty() {
            return Ok(FileConfig::default());
        }
        serde_json::from_str(&text)
            .map_err(|e| CfoError::Config(format!("config file {}: {e}", path.display())))
    }
}

/// Values given as command-line flags; each one overrides the file value.
/// The command itself comes from the subcommand and must agree with the
/// file's `command` key when both are present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<usize>,
    pub mesh: Option<String>,
    pub seed: Option<u64>,
    pub magnitude: Option<f64>,
    pub levels: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub pressure_update_interval: Option<usize>,
    pub output_times: Option<Vec<f64>>,
    pub output_dir: Option<String>,
    pub formats: Option<Vec<String>>,
}

/// Which file kinds a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub vtk: bool,
    pub csv: bool,
}

/// A validated run request.
#[derive(Debug)]
pub struct RunConfig {
    pub command: Command,
    /// Test case id for converge/solve; optional domain selector for
    /// dumpmesh.
    pub case: Option<usize>,
    pub family: MeshFamily,
    /// Mesh levels for converge (validated strictly doubling).
    pub levels: Vec<usize>,
    /// Mesh resolution for solve/dumpmesh.
    pub n: Option<usize>,
    /// Parameters for the twophase command.
    pub twophase: Option<TwoPhaseConfig>,
    pub output_dir: PathBuf,
    pub formats: OutputFormats,
}

fn missing(what: &str, command: Command) -> CfoError {
    CfoError::Config(format!("{} requires {what}", command.name()))
}

/// Merge a config file with flag overrides into a validated [`RunConfig`].
/// The output directory falls back to the `CFO_OUTPUT_DIR` environment
/// variable and then to the current directory.
pub fn build_run_config(
    command: Command,
    file: &FileConfig,
    flags: &Overrides,
) -> Result<RunConfig> {
    if let Some(file_cmd) = &file.command {
        if Command::parse(file_cmd)? != command {
            return Err(CfoError::Config(format!(
                "config file names command {file_cmd:?} but the command line runs {:?}",
                command.name()
            )));
        }
    }
    let case = flags.case.or(file.case);
    let mesh_name = flags.mesh.clone().or_else(|| file.mesh.clone());
    let seed = flags.seed.or(file.seed);
    let magnitude = flags.magnitude.or(file.magnitude);
    let levels = flags.levels.clone().or_else(|| file.levels.clone());
    let n = flags.n.or(file.n);
    let output_dir = flags
        .output_dir
        .clone()
        .or_else(|| file.output_dir.clone())
        .or_else(|| std::env::var("CFO_OUTPUT_DIR").ok())
        .unwrap_or_else(|| ".".to_string());

    let family = match mesh_name.as_deref().unwrap_or("uniform") {
        "uniform" => {
            if seed.is_some() || magnitude.is_some() {
                return Err(CfoError::Config(
                    "seed and magnitude apply only to the perturbed mesh family".into(),
                ));
            }
            MeshFamily::Uniform
        }
        "perturbed" => MeshFamily::Perturbed {
            magnitude: magnitude.unwrap_or(0.2),
            seed: seed.unwrap_or(1),
        },
        other => {
            return Err(CfoError::Config(format!(
                "unknown mesh family {other:?} (valid: uniform, perturbed)"
            )))
        }
    };

    let formats = match flags.formats.clone().or_else(|| file.formats.clone()) {
        None => OutputFormats { vtk: true, csv: true },
        Some(names) => {
            let mut f = OutputFormats { vtk: false, csv: false };
            for name in &names {
                match name.as_str() {
                    "vtk" => f.vtk = true,
                    "csv" => f.csv = true,
                    other => {
                        return Err(CfoError::Config(format!(
                            "unknown output format {other:?} (valid: vtk, csv)"
                        )))
                    }
                }
            }
            f
        }
    };

    let levels = match command {
        Command::Converge => {
            let levels = levels.ok_or_else(|| missing("mesh levels (--levels)", command))?;
            if levels.is_empty() {
                return Err(CfoError::Config("the mesh level list is empty".into()));
            }
            if levels.contains(&0) {
                return Err(CfoError::Config("mesh levels must be positive".into()));
            }
            for w in levels.windows(2) {
                if w[1] != 2 * w[0] {
                    return Err(CfoError::Config(format!(
                        "mesh levels must double at each step: {} is followed by {}",
                        w[0], w[1]
                    )));
                }
            }
            levels
        }
        _ => {
            if levels.is_some() {
                return Err(CfoError::Config(format!(
                    "mesh levels apply only to converge, not {}",
                    command.name()
                )));
            }
            Vec::new()
        }
    };

    match command {
        Command::Converge | Command::Solve => {
            if case.is_none() {
                return Err(missing("a test case id (--case)", command));
            }
        }
        Command::TwoPhase => {
            if case.is_some() {
                return Err(CfoError::Config(
                    "twophase defines its own problem; a test case id does not apply".into(),
                ));
            }
        }
        Command::DumpMesh => {}
    }

    let n = match command {
        Command::Solve | Command::DumpMesh | Command::TwoPhase => {
            Some(n.ok_or_else(|| missing("a mesh resolution (--n)", command))?)
        }
        Command::Converge => {
            if n.is_some() {
                return Err(CfoError::Config(
                    "converge takes mesh levels (--levels), not a single resolution".into(),
                ));
            }
            None
        }
    };
    if n == Some(0) {
        return Err(CfoError::Config("mesh resolution must be positive".into()));
    }

    let twophase = if command == Command::TwoPhase {
        let config = TwoPhaseConfig {
            n: n.expect("validated above"),
            dt: flags.dt.or(file.dt).ok_or_else(|| missing("a time step (--dt)", command))?,
            t_end: flags
                .t_end
                .or(file.t_end)
                .ok_or_else(|| missing("a final time (--t-end)", command))?,
            pressure_update_interval: flags
                .pressure_update_interval
                .or(file.pressure_update_interval)
                .unwrap_or(1),
            output_times: flags
                .output_times
                .clone()
                .or_else(|| file.output_times.clone())
                .unwrap_or_default(),
        };
        Some(config)
    } else {
        for (given, what) in [
            (flags.dt.or(file.dt).is_some(), "a time step"),
            (flags.t_end.or(file.t_end).is_some(), "a final time"),
            (
                flags
                    .pressure_update_interval
                    .or(file.pressure_update_interval)
                    .is_some(),
                "a pressure update interval",
            ),
            (
                flags
                    .output_times
                    .clone()
                    .or_else(|| file.output_times.clone())
                    .is_some(),
                "output times",
            ),
        ] {
            if given {
                return Err(CfoError::Config(format!(
                    "{what} applies only to twophase, not {}",
                    command.name()
                )));
            }
        }
        None
    };

    Ok(RunConfig {
        command,
        case,
        family,
        levels,
        n,
        twophase,
        output_dir: PathBuf::from(output_dir),
        formats,
    })
}
