//! Direct simulation of the full ε-perturbed system: displacement
//! `d(ρ, ε) = r(2π, ρ, ε) − ρ`, remainder orders, and fixed points of the
//! return map near predicted cycles.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::cycles::CycleCandidate;
use crate::error::{Error, Result};
use crate::integrate::{initial_step, integrate_interval, Interval, Stats, Tolerances, Workspace};
use crate::model::{PiecewiseStandardSystem, PlanarPiecewiseField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `r'(θ) = Σ_{i≤k} ε^i F_i(θ, r)` in `θ`.
    Standard,
    /// `(ẋ, ẏ) = Z(x, y; ε)` in `t` with ray-crossing events.
    Planar,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Planar => "planar",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "planar" => Ok(Mode::Planar),
            other => Err(Error::Config(format!("unknown mode '{other}' (standard|planar)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSample {
    pub rho: f64,
    pub eps: f64,
    pub d: f64,
    pub mode: Mode,
    pub stats: Stats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: Tolerances,
    /// Planar runs stop after this many unperturbed-period estimates.
    pub time_cap_factor: f64,
    /// Angular accuracy of ray-crossing events.
    pub event_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: Tolerances::new(1e-12, 1e-14).expect("valid"),
            time_cap_factor: 10.0,
            event_tol: 1e-13,
        }
    }
}

/// Displacement of the truncated standard form, integrated sector by sector
/// in `θ`.
pub fn displacement_standard(
    system: &PiecewiseStandardSystem,
    rho: f64,
    eps: f64,
    tol: Tolerances,
) -> Result<DisplacementSample> {
    system.domain().check(rho)?;
    let mut y = [rho];
    let mut stats = Stats::default();
    let mut h_hint = None;
    let partition = system.partition();
    for j in 0..partition.n() {
        let (a, b) = partition.bounds(j);
        let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
            if !(y[0] > 0.0 && y[0].is_finite()) {
                return Err(Error::Evaluation {
                    sector: j,
                    theta: t,
                    r: y[0],
                    reason: "orbit left r > 0".into(),
                });
            }
            out[0] = system.rhs(j, t, y[0], eps)?;
            Ok(())
        };
        let interval = Interval {
            t0: a,
            t1: b,
            h_hint,
            sector: j,
        };
        let (s, last_h) = integrate_interval(&mut rhs, interval, &mut y, tol, |_, _| {})?;
        stats.merge(s);
        h_hint = Some(last_h);
    }
    Ok(DisplacementSample {
        rho,
        eps,
        d: y[0] - rho,
        mode: Mode::Standard,
        stats,
    })
}

fn wrap_angle(d: f64) -> f64 {
    (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
}

/// Displacement of the planar field started at `(ρ, 0)`, returning at the
/// first crossing of the ray `θ = 2π`.
pub fn displacement_planar(
    field: &PlanarPiecewiseField,
    rho: f64,
    eps: f64,
    opts: OracleOptions,
) -> Result<DisplacementSample> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let partition = field.partition();
    let n = partition.n();
    let tol = opts.tol;
    let w0 = field.angular_velocity(0, rho, 0.0, eps)?;
    if !(w0 > 0.0) {
        if w0 == 0.0 {
            return Err(Error::PolarTransversality { theta: 0.0, r: rho });
        }
        return Err(Error::InvalidArgument(
            "planar displacement needs counterclockwise rotation at the section".into(),
        ));
    }
    let t_cap = opts.time_cap_factor * TAU / w0;
    let mut stats = Stats::default();
    let mut y = vec![rho, 0.0];
    let mut t = 0.0;
    let mut theta = 0.0;
    let mut j = 0;
    let mut ws = Workspace::new(2);
    let mut h: Option<f64> = None;
    loop {
        let mut rhs = |_t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
            let v = field.velocity(j, y[0], y[1], eps)?;
            out.copy_from_slice(&v);
            Ok(())
        };
        rhs(t, &y, ws.k1())?;
        stats.evals += 1;
        let boundary = partition.bounds(j).1;
        let mut step = match h {
            Some(h) => h,
            None => {
                let f0 = ws.k1().to_vec();
                stats.evals += 1;
                initial_step(&mut rhs, t, &y, &f0, t_cap, tol)?
            }
        };
        let mut rejected_last = false;
        // one sector
        let crossed = loop {
            if t > t_cap {
                return Err(Error::NoReturn { t_cap });
            }
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, sector: j });
            }
            let err = ws.step(&mut rhs, t, &y, step, tol)?;
            stats.evals += 6;
            if !err.is_finite() {
                stats.rejected += 1;
                step *= 0.2;
                rejected_last = true;
                continue;
            }
            if err > 1.0 {
                stats.rejected += 1;
                step *= (0.9 * err.powf(-0.2)).max(0.2);
                rejected_last = true;
                continue;
            }
            let new_theta = theta + wrap_angle(ws.y_new[1].atan2(ws.y_new[0]) - y[1].atan2(y[0]));
            if new_theta >= boundary {
                break (step, new_theta);
            }
            ws.accept(&mut y);
            stats.accepted += 1;
            t += step;
            theta = new_theta;
            let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            step *= fac;
            rejected_last = false;
        };
        // bisect the step so that the end point sits just past the ray
        let (crossed_step, crossed_theta) = crossed;
        let base_angle = y[1].atan2(y[0]);
        let (mut lo, mut hi) = (0.0, crossed_step);
        let mut hit = (crossed_step, ws.y_new.clone(), crossed_theta);
        while hit.2 - boundary > opts.event_tol && hi - lo > f64::EPSILON * t.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            ws.step(&mut rhs, t, &y, mid, tol)?;
            stats.evals += 6;
            let ang = theta + wrap_angle(ws.y_new[1].atan2(ws.y_new[0]) - base_angle);
            if ang >= boundary {
                hi = mid;
                hit = (mid, ws.y_new.clone(), ang);
            } else {
                lo = mid;
            }
        }
        let (dt, point, ang) = hit;
        stats.accepted += 1;
        t += dt;
        y.copy_from_slice(&point);
        theta = ang;
        h = Some(crossed_step);
        let next = (j + 1) % n;
        let (x, yy) = (y[0], y[1]);
        let before = field.angular_velocity(j, x, yy, eps)?;
        let after = field.angular_velocity(next, x, yy, eps)?;
        if !(before > 0.0 && after > 0.0) {
            return Err(Error::CrossingViolated {
                theta: boundary,
                x,
                y: yy,
            });
        }
        if j + 1 == n {
            // first-order correction of the small angular overshoot
            let v = field.velocity(j, x, yy, eps)?;
            let r = x.hypot(yy);
            let rdot = (x * v[0] + yy * v[1]) / r;
            let r_final = r - rdot / before * (theta - boundary);
            return Ok(DisplacementSample {
                rho,
                eps,
                d: r_final - rho,
                mode: Mode::Planar,
                stats,
            });
        }
        j = next;
    }
}

/// Either simulation path behind one call.
#[derive(Debug, Clone, Copy)]
pub enum Simulator<'a> {
    Standard(&'a PiecewiseStandardSystem),
    Planar(&'a PlanarPiecewiseField),
}

impl Simulator<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            Simulator::Standard(_) => Mode::Standard,
            Simulator::Planar(_) => Mode::Planar,
        }
    }

    pub fn displacement(&self, rho: f64, eps: f64, opts: OracleOptions) -> Result<DisplacementSample> {
        match self {
            Simulator::Standard(s) => displacement_standard(s, rho, eps, opts.tol),
            Simulator::Planar(f) => displacement_planar(f, rho, eps, opts),
        }
    }
}

/// `|R|` at or below this is indistinguishable from integration noise.
pub const REMAINDER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    /// `(ε, R(ε))` per ladder rung.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `ln|R|` against `ln ε` over the rungs above the
    /// floor; `None` when fewer than two remain.
    pub slope: Option<f64>,
}

impl RemainderReport {
    pub fn below_floor(&self) -> bool {
        self.slope.is_none()
    }

    /// Slope at least `min`, or a remainder below the measurable floor.
    pub fn passes(&self, min: f64) -> bool {
        self.slope.is_none_or(|s| s >= min)
    }
}

/// `R(ε) = d(ρ, ε) − Σ_{i≤k} ε^i f_i(ρ)` along `ladder` with its log-log slope.
/// `averaged[i−1] = f_i(ρ)`.
pub fn remainder_slope(
    sim: Simulator<'_>,
    rho: f64,
    averaged: &[f64],
    ladder: &[f64],
    opts: OracleOptions,
) -> Result<RemainderReport> {
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument(
            "an epsilon ladder needs at least two rungs".into(),
        ));
    }
    let mut points = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ladder rungs must be positive, got {eps}"
            )));
        }
        let d = sim.displacement(rho, eps, opts)?.d;
        let series: f64 = averaged
            .iter()
            .enumerate()
            .map(|(i, f)| eps.powi(i as i32 + 1) * f)
            .sum();
        points.push((eps, d - series));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| r.abs() > REMAINDER_FLOOR)
        .map(|&(e, r)| (e.ln(), r.abs().ln()))
        .collect();
    let slope = (usable.len() >= 2).then(|| {
        let m = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(RemainderReport { points, slope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedCycle {
    pub eps: f64,
    /// Fixed point `ρ(ε)` of the return map.
    pub rho: f64,
    pub predicted: f64,
    /// `|ρ(ε) − ρ*|`.
    pub distance: f64,
    /// `|d(ρ(ε), ε)|`.
    pub residual: f64,
    pub iterations: usize,
}

pub const CYCLE_TOL: f64 = 1e-10;
pub const MAX_NEWTON: usize = 50;
/// Largest accepted Newton correction, relative to `max(ρ, 1)`.
pub const CYCLE_STEP_TOL: f64 = 1e-11;

/// Newton on `ρ ↦ d(ρ, ε)` from `ρ*`: the first step uses the predicted slope
/// `ε^l f_l'(ρ*)`, later steps the secant through the last two iterates.
/// Stops once `|d| ≤ CYCLE_TOL` and either the next correction is below
/// `CYCLE_STEP_TOL` or `|d|` is down to the integration tolerance.
pub fn verify_cycle(
    sim: Simulator<'_>,
    candidate: &CycleCandidate,
    eps: f64,
    opts: OracleOptions,
) -> Result<VerifiedCycle> {
    let predicted = candidate.rho;
    if eps == 0.0 {
        return Ok(VerifiedCycle {
            eps,
            rho: predicted,
            predicted,
            distance: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let no_cycle = |reason: String| Error::NoCycle { eps, reason };
    let mut rho = predicted;
    let mut d = sim.displacement(rho, eps, opts)?.d;
    let mut slope = eps.powi(candidate.order as i32) * candidate.derivative;
    let mut iterations = 0;
    // |d| alone says little when the slope is O(ε^l): also ask for a small
    // correction, or for d at the integration noise level
    let converged = |d: f64, slope: f64, rho: f64| {
        d.abs() <= CYCLE_TOL
            && ((d / slope).abs() <= CYCLE_STEP_TOL * rho.max(1.0) || d.abs() <= opts.tol.rel * rho + opts.tol.abs)
    };
    while !converged(d, slope, rho) {
        if iterations >= MAX_NEWTON {
            return Err(no_cycle(format!(
                "no convergence in {MAX_NEWTON} iterations (|d| = {:e})",
                d.abs()
            )));
        }
        if slope == 0.0 || !slope.is_finite() {
            return Err(no_cycle("vanishing slope of the displacement".into()));
        }
        let next = rho - d / slope;
        if !(next > 0.0 && next.is_finite()) {
            return Err(no_cycle(format!("iterate left r > 0 ({next})")));
        }
        let d_next = match sim.displacement(next, eps, opts) {
            Ok(s) => s.d,
            Err(e) => return Err(no_cycle(format!("displacement failed at rho = {next}: {e}"))),
        };
        iterations += 1;
        if next == rho {
            break;
        }
        slope = (d_next - d) / (next - rho);
        rho = next;
        d = d_next;
    }
    if d.abs() > CYCLE_TOL {
        return Err(no_cycle(format!("stalled at |d| = {:e}", d.abs())));
    }
    Ok(VerifiedCycle {
        eps,
        rho,
        predicted,
        distance: (rho - predicted).abs(),
        residual: d.abs(),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub standard: DisplacementSample,
    pub planar: DisplacementSample,
}

impl CrossCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.standard.d - self.planar.d).abs()
    }
}

pub const CROSS_CHECK_TOL: f64 = 1e-7;

/// Both simulation paths at the same `(ρ, ε)`.
pub fn cross_check_modes(
    standard: &PiecewiseStandardSystem,
    planar: &PlanarPiecewiseField,
    rho: f64,
    eps: f64,
    opts: OracleOptions,
) -> Result<CrossCheck> {
    Ok(CrossCheck {
        standard: displacement_standard(standard, rho, eps, opts.tol)?,
        planar: displacement_planar(planar, rho, eps, opts)?,
    })
}
