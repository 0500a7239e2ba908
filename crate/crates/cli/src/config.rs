//! Run configuration: TOML file merged with command-line flags, validated
//! before any computation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use pwavg::bell::MAX_ORDER;
use pwavg::examples::ExampleId;
use pwavg::model::expr::parse_constant;
use pwavg::oracle::{Mode, OracleOptions};
use pwavg::{Execution, Tolerances};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// f_1..f_k on a grid of rho.
    Averaged,
    /// Simple zeros of f_l and their verification at each eps.
    Cycles,
    /// Rank table of the built-in four-zone families.
    Rank,
    /// Displacement d(rho, eps) on a grid of rho for each eps.
    Displacement,
    /// Cascade state along theta at one rho.
    Trace,
}

#[derive(Debug, Parser)]
#[command(
    name = "pwavg",
    version,
    about = "Averaged functions and crossing limit cycles of piecewise systems"
)]
pub struct Cli {
    /// Command; may instead be given as `command` in the config's [run] table.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML file with [system] and [run] tables. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in example id, or a TOML file holding a [system] table.
    #[arg(long)]
    pub system: Option<String>,
    /// Built-in parameters, e.g. "a1=1,1,1,1;b1=0,0,0,-pi" or "n=3;a=..;b=..;c=..".
    #[arg(long)]
    pub params: Option<String>,
    /// Averaging order l (default 1).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_max: Option<f64>,
    /// Grid points on D (default 50).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Perturbation size; repeatable (default 1e-3 and 1e-4).
    #[arg(long = "eps", allow_negative_numbers = true)]
    pub eps: Vec<f64>,
    /// Output CSV path (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cascade relative tolerance (default 1e-10).
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// Cascade absolute tolerance (default 1e-12).
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Simulation relative tolerance (default 1e-12).
    #[arg(long)]
    pub sim_tol_rel: Option<f64>,
    /// Simulation absolute tolerance (default 1e-14).
    #[arg(long)]
    pub sim_tol_abs: Option<f64>,
    /// Simulation path (default planar).
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Truncation order of the standard form in standard mode (default 4).
    #[arg(long)]
    pub sim_order: Option<usize>,
    /// Initial radius for `trace` (default: middle of D).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Evaluate on one thread.
    #[arg(long)]
    pub sequential: bool,
}

/// A number or a constant expression such as `"pi/2"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn to_f64(&self) -> Result<f64, CliError> {
        match self {
            Value::Int(i) => Ok(*i as f64),
            Value::Float(x) => Ok(*x),
            Value::Text(s) => parse_constant(s).map_err(|e| CliError::Config(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorTable {
    /// `x`-components of `X_0, X_1, …`.
    pub xdot: Vec<String>,
    /// `y`-components of `X_0, X_1, …`.
    pub ydot: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemTable {
    pub builtin: Option<String>,
    pub params: Option<String>,
    pub n: Option<usize>,
    /// `α_0 = 0, …, α_n = 2π`; uniform when omitted.
    pub alphas: Option<Vec<Value>>,
    pub k: Option<usize>,
    pub domain: Option<[Value; 2]>,
    #[serde(default)]
    pub constants: BTreeMap<String, Value>,
    #[serde(default)]
    pub sector: Vec<SectorTable>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunTable {
    command: Option<Command>,
    order: Option<usize>,
    rho_min: Option<f64>,
    rho_max: Option<f64>,
    grid: Option<usize>,
    eps: Option<Vec<f64>>,
    out: Option<PathBuf>,
    tol_rel: Option<f64>,
    tol_abs: Option<f64>,
    sim_tol_rel: Option<f64>,
    sim_tol_abs: Option<f64>,
    mode: Option<String>,
    sim_order: Option<usize>,
    rho: Option<f64>,
    sequential: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    system: Option<SystemTable>,
    #[serde(default)]
    run: RunTable,
}

#[derive(Debug, Clone)]
pub enum SystemSource {
    Builtin { id: ExampleId, params: Option<String> },
    Expressions(SystemTable),
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub command: Command,
    pub system: SystemSource,
    /// Domain override from the system table.
    pub system_domain: Option<(f64, f64)>,
    pub order: usize,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub grid: usize,
    pub eps: Vec<f64>,
    pub out: Option<PathBuf>,
    pub tol: Tolerances,
    pub sim: OracleOptions,
    pub mode: Mode,
    pub sim_order: usize,
    pub rho: Option<f64>,
    pub execution: Execution,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn system_from(table: SystemTable) -> Result<(SystemSource, Option<(f64, f64)>), CliError> {
    let domain = match &table.domain {
        Some([a, b]) => Some((a.to_f64()?, b.to_f64()?)),
        None => None,
    };
    let source = match &table.builtin {
        Some(id) => {
            if !table.sector.is_empty() || table.alphas.is_some() {
                return Err(config_err("a built-in system takes no sectors or alphas"));
            }
            SystemSource::Builtin {
                id: id.parse().map_err(config_err)?,
                params: table.params.clone(),
            }
        }
        None => {
            if table.sector.is_empty() {
                return Err(config_err(
                    "the [system] table needs `builtin` or [[system.sector]] entries",
                ));
            }
            if table.params.is_some() {
                return Err(config_err("`params` applies to built-in systems only"));
            }
            SystemSource::Expressions(table)
        }
    };
    Ok((source, domain))
}

impl Settings {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let file: FileConfig = match &cli.config {
            Some(path) => read_toml(path)?,
            None => FileConfig::default(),
        };
        let run = file.run;

        let (mut system, system_domain) = match &cli.system {
            Some(s) => match s.parse::<ExampleId>() {
                Ok(id) => (SystemSource::Builtin { id, params: None }, None),
                Err(_) => {
                    let table: FileConfig = read_toml(Path::new(s))?;
                    let table = table
                        .system
                        .ok_or_else(|| config_err(format!("{s} has no [system] table")))?;
                    system_from(table)?
                }
            },
            None => match file.system {
                Some(table) => system_from(table)?,
                None => return Err(config_err("no system given (use --system or a [system] table)")),
            },
        };
        if let Some(p) = cli.params {
            match &mut system {
                SystemSource::Builtin { params, .. } => *params = Some(p),
                SystemSource::Expressions(_) => return Err(config_err("--params applies to built-in systems only")),
            }
        }

        let command = cli
            .command
            .or(run.command)
            .ok_or_else(|| config_err("no command given"))?;
        let order = cli.order.or(run.order).unwrap_or(1);
        if order == 0 || order > MAX_ORDER {
            return Err(config_err(format!("order must lie in 1..={MAX_ORDER}, got {order}")));
        }
        let grid = cli.grid.or(run.grid).unwrap_or(50);
        if grid < 2 {
            return Err(config_err(format!("grid needs at least 2 points, got {grid}")));
        }
        let eps = if cli.eps.is_empty() {
            run.eps.unwrap_or_else(|| vec![1e-3, 1e-4])
        } else {
            cli.eps
        };
        if eps.is_empty() || eps.iter().any(|e| !e.is_finite()) {
            return Err(config_err("eps values must be finite and at least one must be given"));
        }
        let tol_default = Tolerances::default();
        let tol = Tolerances::new(
            cli.tol_rel.or(run.tol_rel).unwrap_or(tol_default.rel),
            cli.tol_abs.or(run.tol_abs).unwrap_or(tol_default.abs),
        )
        .map_err(config_err)?;
        let mut sim = OracleOptions::default();
        sim.tol = Tolerances::new(
            cli.sim_tol_rel.or(run.sim_tol_rel).unwrap_or(sim.tol.rel),
            cli.sim_tol_abs.or(run.sim_tol_abs).unwrap_or(sim.tol.abs),
        )
        .map_err(config_err)?;
        let mode = match (cli.mode, run.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(config_err)?,
            (None, None) => Mode::Planar,
        };
        let sim_order = cli.sim_order.or(run.sim_order).unwrap_or(4);
        if sim_order == 0 || sim_order > MAX_ORDER {
            return Err(config_err(format!(
                "sim-order must lie in 1..={MAX_ORDER}, got {sim_order}"
            )));
        }
        let rho_min = cli.rho_min.or(run.rho_min);
        let rho_max = cli.rho_max.or(run.rho_max);
        if let (Some(lo), Some(hi)) = (rho_min, rho_max) {
            check_domain(lo, hi)?;
        }
        if let Some((lo, hi)) = system_domain {
            check_domain(lo, hi)?;
        }
        let sequential = cli.sequential || run.sequential.unwrap_or(false);
        Ok(Settings {
            command,
            system,
            system_domain,
            order,
            rho_min,
            rho_max,
            grid,
            eps,
            out: cli.out.or(run.out),
            tol,
            sim,
            mode,
            sim_order,
            rho: cli.rho.or(run.rho),
            execution: if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            },
        })
    }
}

fn check_domain(lo: f64, hi: f64) -> Result<(), CliError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(config_err(format!("need 0 < rho-min < rho-max, got ({lo}, {hi})")));
    }
    Ok(())
}
