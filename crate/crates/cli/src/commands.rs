//! One function per command; each returns the CSV text and, when some rows
//! failed, the reason for a numerical-failure exit.

use std::f64::consts::TAU;
use std::fmt::Write;

use pwavg::averaging::{averaged_all, integrate_cascade, AveragedFunction, CascadeOptions};
use pwavg::cycles::{family_rank, find_zeros, ZeroSearch};
use pwavg::examples::rank_family;
use pwavg::model::PiecewiseStandardSystem;
use pwavg::oracle::{verify_cycle, Mode, Simulator};

use crate::config::{Command, Settings};
use crate::system::LoadedSystem;
use crate::CliError;

pub struct Output {
    pub csv: String,
    pub failure: Option<String>,
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

pub fn run(settings: &Settings) -> Result<Output, CliError> {
    let system = LoadedSystem::load(settings)?;
    match settings.command {
        Command::Averaged => averaged(settings, &system),
        Command::Cycles => cycles(settings, &system),
        Command::Rank => rank(settings, &system),
        Command::Displacement => displacement(settings, &system),
        Command::Trace => trace(settings, &system),
    }
}

fn averaged(settings: &Settings, system: &LoadedSystem) -> Result<Output, CliError> {
    let k = settings.order;
    let sys = system.standard(k)?;
    let grid = system.domain().grid(settings.grid);
    let rows = settings
        .execution
        .map(&grid, |&rho| averaged_all(&sys, k, rho, settings.tol));
    let mut csv = String::from("rho");
    for i in 1..=k {
        write!(csv, ",f{i}").unwrap();
    }
    csv.push_str(",error\n");
    let mut failed = 0;
    for (rho, row) in grid.iter().zip(rows) {
        csv.push_str(&num(*rho));
        match row {
            Ok(values) => {
                for v in values {
                    write!(csv, ",{}", num(v)).unwrap();
                }
                csv.push_str(",\n");
            }
            Err(e) => {
                failed += 1;
                for _ in 0..k {
                    csv.push_str(",NaN");
                }
                writeln!(csv, ",{}", quote(&e.to_string())).unwrap();
            }
        }
    }
    Ok(Output {
        csv,
        failure: (failed > 0).then(|| format!("{failed} of {} grid points failed", grid.len())),
    })
}

/// Standard mode simulates the polar form truncated at `sim_order`.
fn simulation_system(settings: &Settings, system: &LoadedSystem) -> Result<Option<PiecewiseStandardSystem>, CliError> {
    match settings.mode {
        Mode::Standard => Ok(Some(system.standard(settings.sim_order.max(settings.order))?)),
        Mode::Planar => Ok(None),
    }
}

fn simulator<'a>(standard: &'a Option<PiecewiseStandardSystem>, system: &'a LoadedSystem) -> Simulator<'a> {
    match standard {
        Some(s) => Simulator::Standard(s),
        None => Simulator::Planar(system.planar()),
    }
}

fn cycles(settings: &Settings, system: &LoadedSystem) -> Result<Output, CliError> {
    let l = settings.order;
    if settings.eps.contains(&0.0) {
        return Err(CliError::Config("cycle verification needs nonzero eps".into()));
    }
    let f = AveragedFunction::new(system.standard(l)?, l, settings.tol)?;
    let search = ZeroSearch {
        execution: settings.execution,
        ..ZeroSearch::default()
    };
    let report = find_zeros(&f, search)?;
    for c in &report.candidates {
        eprintln!(
            "candidate rho* = {} (order {l}, f' = {})",
            num(c.rho),
            num(c.derivative)
        );
    }
    for r in &report.rejected {
        eprintln!(
            "rejected non-simple zero near rho = {} (f' = {})",
            num(r.rho),
            num(r.derivative)
        );
    }
    let sim_sys = simulation_system(settings, system)?;
    let sim = simulator(&sim_sys, system);
    let jobs: Vec<(usize, f64)> = (0..report.candidates.len())
        .flat_map(|c| settings.eps.iter().map(move |&e| (c, e)))
        .collect();
    let results = settings.execution.map(&jobs, |&(c, eps)| {
        verify_cycle(sim, &report.candidates[c], eps, settings.sim)
    });
    let smallest = settings.eps.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let mut csv = String::from("rho_star,order,derivative,eps,rho,distance,d,iters,mode,status\n");
    let mut unverified = 0;
    for (&(c, eps), res) in jobs.iter().zip(results) {
        let cand = &report.candidates[c];
        write!(csv, "{},{l},{},{},", num(cand.rho), num(cand.derivative), num(eps)).unwrap();
        match res {
            Ok(v) => writeln!(
                csv,
                "{},{},{},{},{},verified",
                num(v.rho),
                num(v.distance),
                num(v.residual),
                v.iterations,
                settings.mode
            )
            .unwrap(),
            Err(e) => {
                if eps.abs() == smallest {
                    unverified += 1;
                }
                writeln!(csv, "NaN,NaN,NaN,0,{},{}", settings.mode, quote(&e.to_string())).unwrap();
            }
        }
    }
    Ok(Output {
        csv,
        failure: (unverified > 0).then(|| {
            format!(
                "{unverified} of {} candidates did not verify at eps = {smallest}",
                report.candidates.len()
            )
        }),
    })
}

fn rank(settings: &Settings, system: &LoadedSystem) -> Result<Output, CliError> {
    let inst = system
        .builtin()
        .ok_or_else(|| CliError::Config("rank needs a built-in four-zone system".into()))?;
    if settings.order > 2 {
        return Err(CliError::Config(format!(
            "rank families are built in for orders 1 and 2 only, got {}",
            settings.order
        )));
    }
    let mut csv = String::from("order,degree,rank,bound\n");
    for l in 1..=settings.order {
        let family = rank_family(inst.id(), l)?;
        let report = family_rank(&family, settings.tol, settings.execution)?;
        writeln!(csv, "{l},{},{},{}", report.degree, report.rank, report.zero_bound()).unwrap();
    }
    Ok(Output { csv, failure: None })
}

fn displacement(settings: &Settings, system: &LoadedSystem) -> Result<Output, CliError> {
    let sim_sys = simulation_system(settings, system)?;
    let sim = simulator(&sim_sys, system);
    let grid = system.domain().grid(settings.grid);
    let jobs: Vec<(f64, f64)> = settings
        .eps
        .iter()
        .flat_map(|&e| grid.iter().map(move |&r| (r, e)))
        .collect();
    let results = settings
        .execution
        .map(&jobs, |&(rho, eps)| sim.displacement(rho, eps, settings.sim));
    let mut csv = String::from("rho,eps,d,iters,mode,error\n");
    let mut failed = 0;
    for (&(rho, eps), res) in jobs.iter().zip(results) {
        match res {
            Ok(s) => writeln!(
                csv,
                "{},{},{},{},{},",
                num(rho),
                num(eps),
                num(s.d),
                s.stats.accepted,
                settings.mode
            )
            .unwrap(),
            Err(e) => {
                failed += 1;
                writeln!(
                    csv,
                    "{},{},NaN,0,{},{}",
                    num(rho),
                    num(eps),
                    settings.mode,
                    quote(&e.to_string())
                )
                .unwrap();
            }
        }
    }
    Ok(Output {
        csv,
        failure: (failed > 0).then(|| format!("{failed} of {} samples failed", jobs.len())),
    })
}

fn trace(settings: &Settings, system: &LoadedSystem) -> Result<Output, CliError> {
    let k = settings.order;
    let sys = system.standard(k)?;
    let d = system.domain();
    let rho = settings.rho.unwrap_or(0.5 * (d.min + d.max));
    let opts = CascadeOptions {
        tol: settings.tol,
        trace: true,
    };
    let cascade = integrate_cascade(&sys, rho, k, TAU, opts)?;
    let mut csv = String::from("theta,sector,phi");
    for i in 1..=k {
        write!(csv, ",z{i}").unwrap();
    }
    csv.push('\n');
    for cp in cascade.trace.unwrap_or_default() {
        write!(csv, "{},{}", num(cp.theta), cp.sector + 1).unwrap();
        for v in &cp.state {
            write!(csv, ",{}", num(*v)).unwrap();
        }
        csv.push('\n');
    }
    Ok(Output { csv, failure: None })
}
