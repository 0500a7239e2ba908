//! The cascade `(φ, z_1, …, z_k)` integrated over `θ ∈ [0, 2π]` with state
//! carried continuously across sector boundaries, and the averaged functions
//! `f_i(ρ) = z_i(2π, ρ) / i!` it produces.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Mutex;

use crate::bell::{enumerate_s, factorial_f64, MAX_ORDER};
use crate::error::{Error, Result};
use crate::integrate::{integrate_interval, Interval, Stats, Tolerances};
use crate::model::{CoeffTable, PiecewiseStandardSystem};

/// State snapshot `(θ, [φ, z_1, …, z_k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub theta: f64,
    pub sector: usize,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Cascade {
    pub rho: f64,
    pub k: usize,
    /// `[φ, z_1, …, z_k]`.
    pub state: Vec<f64>,
    pub theta: f64,
    pub sector: usize,
    pub trace: Option<Vec<Checkpoint>>,
    pub stats: Stats,
}

impl Cascade {
    pub fn phi(&self) -> f64 {
        self.state[0]
    }

    /// `z_i` for `1 ≤ i ≤ k`.
    pub fn z(&self, i: usize) -> f64 {
        self.state[i]
    }

    /// `z_i / i!` for `i = 1..=k`.
    pub fn averaged(&self) -> Vec<f64> {
        (1..=self.k).map(|i| self.state[i] / factorial_f64(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CascadeOptions {
    pub tol: Tolerances,
    /// Record every accepted step, plus both sides of each boundary.
    pub trace: bool,
}

/// `dz_i/dθ` from one coefficient table, with `z[0] = z_1`.
pub fn cascade_derivatives(table: &CoeffTable, z: &[f64], out: &mut [f64]) -> Result<()> {
    let k = z.len();
    for i in 1..=k {
        let mut acc = table.get(i, 0);
        for l in 1..=i {
            for t in enumerate_s(l)? {
                let big_l = t.big_l();
                acc += t.weight() * table.derivative(i - l, big_l) * t.monomial(&z[..l]);
            }
        }
        out[i - 1] = factorial_f64(i) * acc;
    }
    Ok(())
}

/// Right-hand side of the cascade in sector `j`: `state = [φ, z_1, …, z_k]`.
pub fn cascade_rhs(
    system: &PiecewiseStandardSystem,
    j: usize,
    theta: f64,
    state: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let k = state.len() - 1;
    let phi = state[0];
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::Evaluation {
            sector: j,
            theta,
            r: phi,
            reason: "unperturbed flow left r > 0".into(),
        });
    }
    let table = system.coefficients(j, theta, phi, k, k)?;
    out[0] = table.get(0, 0);
    cascade_derivatives(&table, &state[1..], &mut out[1..])
}

/// Advance the cascade from `θ = 0` (`φ = ρ`, `z = 0`) to `theta_end`.
pub fn integrate_cascade(
    system: &PiecewiseStandardSystem,
    rho: f64,
    k: usize,
    theta_end: f64,
    opts: CascadeOptions,
) -> Result<Cascade> {
    system.domain().check(rho)?;
    if k > MAX_ORDER {
        return Err(Error::OrderTooLarge {
            order: k,
            max: MAX_ORDER,
        });
    }
    if !(theta_end > 0.0 && theta_end <= TAU) {
        return Err(Error::InvalidArgument(format!(
            "theta_end must lie in (0, 2*pi], got {theta_end}"
        )));
    }
    let mut state = vec![0.0; k + 1];
    state[0] = rho;
    let mut trace = opts.trace.then(|| {
        vec![Checkpoint {
            theta: 0.0,
            sector: 0,
            state: state.clone(),
        }]
    });
    let mut stats = Stats::default();
    let mut h_hint = None;
    let mut sector = 0;
    let partition = system.partition();
    for j in 0..partition.n() {
        let (a, b) = partition.bounds(j);
        if a >= theta_end {
            break;
        }
        let b = b.min(theta_end);
        sector = j;
        if j > 0 {
            if let Some(tr) = trace.as_mut() {
                tr.push(Checkpoint {
                    theta: a,
                    sector: j,
                    state: state.clone(),
                });
            }
        }
        let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| cascade_rhs(system, j, t, y, out);
        let interval = Interval {
            t0: a,
            t1: b,
            h_hint,
            sector: j,
        };
        let (s, last_h) = integrate_interval(&mut rhs, interval, &mut state, opts.tol, |t, y| {
            if let Some(tr) = trace.as_mut() {
                tr.push(Checkpoint {
                    theta: t,
                    sector: j,
                    state: y.to_vec(),
                });
            }
        })?;
        stats.merge(s);
        h_hint = Some(last_h);
    }
    Ok(Cascade {
        rho,
        k,
        state,
        theta: theta_end,
        sector,
        trace,
        stats,
    })
}

/// `φ(2π, ρ)` of the unperturbed flow.
pub fn flow_return(system: &PiecewiseStandardSystem, rho: f64, tol: Tolerances) -> Result<f64> {
    let c = integrate_cascade(system, rho, 0, TAU, CascadeOptions { tol, trace: false })?;
    Ok(c.phi())
}

/// `f_1(ρ), …, f_k(ρ)` from a single cascade run.
pub fn averaged_all(system: &PiecewiseStandardSystem, k: usize, rho: f64, tol: Tolerances) -> Result<Vec<f64>> {
    let c = integrate_cascade(system, rho, k, TAU, CascadeOptions { tol, trace: false })?;
    Ok(c.averaged())
}

fn check_order(system: &PiecewiseStandardSystem, l: usize) -> Result<()> {
    if l == 0 || l > system.k() {
        return Err(Error::InvalidArgument(format!(
            "averaging order must satisfy 1 <= l <= k = {}, got {l}",
            system.k()
        )));
    }
    Ok(())
}

/// `f_l(ρ) = z_l(2π, ρ) / l!`.
pub fn averaged(system: &PiecewiseStandardSystem, l: usize, rho: f64, tol: Tolerances) -> Result<f64> {
    check_order(system, l)?;
    Ok(averaged_all(system, l, rho, tol)?[l - 1])
}

/// Step used by [`averaged_derivative`].
pub fn derivative_step(rho: f64) -> f64 {
    1e-5f64.max(1e-4 * rho.abs())
}

/// Richardson-extrapolated finite difference of `f` at `rho`, one-sided when
/// `rho ± h` leaves `[min, max]`.
pub fn richardson_derivative(f: impl Fn(f64) -> Result<f64>, rho: f64, min: f64, max: f64) -> Result<f64> {
    let h = derivative_step(rho);
    if rho - h >= min && rho + h <= max {
        let d = |h: f64| -> Result<f64> { Ok((f(rho + h)? - f(rho - h)?) / (2.0 * h)) };
        let (d1, d2) = (d(h)?, d(h / 2.0)?);
        Ok((4.0 * d2 - d1) / 3.0)
    } else {
        // second-order one-sided stencil, pointed into the domain
        let s = if rho + 2.0 * h <= max { 1.0 } else { -1.0 };
        let f0 = f(rho)?;
        let d =
            |h: f64| -> Result<f64> { Ok(s * (-3.0 * f0 + 4.0 * f(rho + s * h)? - f(rho + 2.0 * s * h)?) / (2.0 * h)) };
        let (d1, d2) = (d(h)?, d(h / 2.0)?);
        Ok((4.0 * d2 - d1) / 3.0)
    }
}

/// `f_l'(ρ)` by Richardson-extrapolated central differences.
pub fn averaged_derivative(system: &PiecewiseStandardSystem, l: usize, rho: f64, tol: Tolerances) -> Result<f64> {
    check_order(system, l)?;
    let d = system.domain();
    d.check(rho)?;
    richardson_derivative(|r| averaged(system, l, r, tol), rho, d.min, d.max)
}

/// `z_1(2π, ρ)` through the integrating factor `η_j = ∫ ∂F_0`: on each
/// sector `z_1 = e^{η_j} (carry + ∫ e^{−η_j} F_1)`.
pub fn averaged_via_integrating_factor(system: &PiecewiseStandardSystem, rho: f64, tol: Tolerances) -> Result<f64> {
    if system.k() < 1 {
        return Err(Error::InvalidArgument("integrating-factor path needs k >= 1".into()));
    }
    system.domain().check(rho)?;
    let partition = system.partition();
    let mut phi = rho;
    let mut carry = 0.0;
    let mut h_hint = None;
    for j in 0..partition.n() {
        let (a, b) = partition.bounds(j);
        // [φ, η, I]
        let mut y = vec![phi, 0.0, 0.0];
        let mut rhs = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
            let table = system.coefficients(j, t, y[0], 1, 1)?;
            out[0] = table.get(0, 0);
            out[1] = table.get(0, 1);
            out[2] = (-y[1]).exp() * table.get(1, 0);
            Ok(())
        };
        let interval = Interval {
            t0: a,
            t1: b,
            h_hint,
            sector: j,
        };
        let (_, last_h) = integrate_interval(&mut rhs, interval, &mut y, tol, |_, _| {})?;
        h_hint = Some(last_h);
        phi = y[0];
        carry = y[1].exp() * (carry + y[2]);
    }
    Ok(carry)
}

/// `f_l` bound to a system, with memoized evaluations.
#[derive(Debug)]
pub struct AveragedFunction {
    system: PiecewiseStandardSystem,
    order: usize,
    tol: Tolerances,
    cache: Mutex<HashMap<u64, Vec<f64>>>,
}

impl Clone for AveragedFunction {
    fn clone(&self) -> Self {
        AveragedFunction {
            system: self.system.clone(),
            order: self.order,
            tol: self.tol,
            cache: Mutex::new(self.cache.lock().map(|c| c.clone()).unwrap_or_default()),
        }
    }
}

impl AveragedFunction {
    pub fn new(system: PiecewiseStandardSystem, order: usize, tol: Tolerances) -> Result<Self> {
        check_order(&system, order)?;
        Ok(AveragedFunction {
            system,
            order,
            tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn system(&self) -> &PiecewiseStandardSystem {
        &self.system
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// `f_1(ρ), …, f_l(ρ)`.
    pub fn all(&self, rho: f64) -> Result<Vec<f64>> {
        let key = rho.to_bits();
        if let Some(v) = self.cache.lock().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(v);
        }
        let v = averaged_all(&self.system, self.order, rho, self.tol)?;
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, v.clone());
        }
        Ok(v)
    }

    pub fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.all(rho)?[self.order - 1])
    }

    /// Value of a lower order `i ≤ l` from the same cascade.
    pub fn value_of_order(&self, i: usize, rho: f64) -> Result<f64> {
        if i == 0 || i > self.order {
            return Err(Error::InvalidArgument(format!("order {i} not in 1..={}", self.order)));
        }
        Ok(self.all(rho)?[i - 1])
    }

    pub fn derivative(&self, rho: f64) -> Result<f64> {
        let d = self.system.domain();
        d.check(rho)?;
        richardson_derivative(|r| self.value(r), rho, d.min, d.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, ExplicitSector, SectorField, SectorPartition, StandardFn};
    use crate::series::{Jet, Scalar};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn smooth(orders: Vec<Option<Arc<StandardFn>>>, k: usize) -> PiecewiseStandardSystem {
        let sector: Arc<dyn SectorField> = Arc::new(ExplicitSector::new(orders));
        PiecewiseStandardSystem::new(
            SectorPartition::uniform(1).unwrap(),
            vec![sector],
            k,
            Domain::new(0.1, 3.0).unwrap(),
        )
        .unwrap()
    }

    fn f<F>(g: F) -> Option<Arc<StandardFn>>
    where
        F: Fn(f64, &Jet) -> Result<Jet> + Send + Sync + 'static,
    {
        Some(Arc::new(g) as Arc<StandardFn>)
    }

    #[test]
    fn sin_squared_average() {
        let sys = smooth(vec![None, f(|t, r| Ok(r.clone() * t.sin().powi(2)))], 1);
        for rho in [0.5, 1.0, 2.0] {
            let v = averaged(&sys, 1, rho, Tolerances::new(1e-12, 1e-14).unwrap()).unwrap();
            assert_abs_diff_eq!(v, std::f64::consts::PI * rho, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_cascade() {
        let sys = smooth(vec![], 3);
        let c = integrate_cascade(&sys, 1.2, 3, TAU, CascadeOptions::default()).unwrap();
        assert_eq!(c.state, vec![1.2, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn first_order_rhs_examples() {
        let mut table = CoeffTable::zeros(2, 2);
        table.set(0, 1, 0.7);
        table.set(1, 0, 1.3);
        table.set(1, 1, -0.4);
        table.set(2, 0, 0.25);
        let z = [0.5, 2.0];
        let mut out = [0.0; 2];
        cascade_derivatives(&table, &z, &mut out).unwrap();
        assert_abs_diff_eq!(out[0], 1.3 + 0.7 * 0.5, epsilon = 1e-15);
        // dz2 = 2[F2 + ∂F1 z1 + ∂F0 z2/2 + ∂²F0 z1²/2]
        let expect = 2.0 * (0.25 + (-0.4) * 0.5 + 0.7 * 2.0 / 2.0);
        assert_abs_diff_eq!(out[1], expect, epsilon = 1e-15);
    }

    #[test]
    fn integrating_factor_linear_example() {
        // F_0 = r, F_1 = 1: z_1' = 1 + z_1, so z_1(1) = e − 1
        let sys = smooth(vec![f(|_, r| Ok(r.clone())), f(|_, r| Ok(r.lift(1.0)))], 1);
        let c = integrate_cascade(&sys, 1.0, 1, 1.0, CascadeOptions::default()).unwrap();
        assert_abs_diff_eq!(c.z(1), std::f64::consts::E - 1.0, epsilon = 1e-9);
        let via_if = averaged_via_integrating_factor(&sys, 1.0, Tolerances::default()).unwrap();
        let cascade = averaged(&sys, 1, 1.0, Tolerances::default()).unwrap();
        assert_abs_diff_eq!(via_if, cascade, epsilon = 1e-8 * cascade.abs());
    }

    #[test]
    fn derivative_of_linear_function() {
        let sys = smooth(vec![None, f(|t, r| Ok((r.clone() * (1.0 + t.cos())) - 0.3))], 1);
        // f_1 = 2π ρ − 0.6π
        let d = averaged_derivative(&sys, 1, 1.0, Tolerances::default()).unwrap();
        assert_abs_diff_eq!(d, TAU, epsilon = 1e-6);
        // near the upper end of D the stencil turns one-sided
        let d = averaged_derivative(&sys, 1, 3.0, Tolerances::default()).unwrap();
        assert_abs_diff_eq!(d, TAU, epsilon = 1e-6);
    }

    #[test]
    fn order_and_domain_are_checked() {
        let sys = smooth(vec![], 1);
        assert!(averaged(&sys, 0, 1.0, Tolerances::default()).is_err());
        assert!(averaged(&sys, 2, 1.0, Tolerances::default()).is_err());
        assert!(matches!(
            averaged(&sys, 1, 5.0, Tolerances::default()),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn function_cache_is_consistent() {
        let sys = smooth(vec![None, f(|t, r| Ok(r.clone() * t.sin().powi(2)))], 1);
        let av = AveragedFunction::new(sys, 1, Tolerances::default()).unwrap();
        let a = av.value(0.7).unwrap();
        let b = av.value(0.7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(av.clone().value(0.7).unwrap().to_bits(), a.to_bits());
    }
}
