//! Adaptive Dormand–Prince 5(4) integrator with exact interval endpoints.
//!
//! Intervals are always integrated up to their right end exactly; callers
//! chain intervals (sectors) themselves and carry the state across.

use crate::error::{Error, Result};

/// Local error tolerances of the adaptive stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-10, abs: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        if !(rel > 0.0 && abs > 0.0 && rel.is_finite() && abs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive and finite (rel={rel}, abs={abs})"
            )));
        }
        Ok(Tolerances { rel, abs })
    }

    pub fn halved(self) -> Self {
        Tolerances {
            rel: self.rel / 2.0,
            abs: self.abs / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

impl Stats {
    pub fn merge(&mut self, other: Stats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evals += other.evals;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Right-hand side `dy/dt = f(t, y)` writing into `out`.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self(t, y, out)
    }
}

/// Scratch space for one Dormand–Prince step.
pub(crate) struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    pub(crate) y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Workspace {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// Derivative at the start of the next step (FSAL stage).
    pub(crate) fn k1(&mut self) -> &mut [f64] {
        &mut self.k[0]
    }

    /// One step of size `h` from `(t, y)`; `k1` must already hold `f(t, y)`.
    /// Leaves the proposed state in `y_new`, `f(t+h, y_new)` in stage 7, and
    /// returns the scaled error norm.
    pub(crate) fn step<R: Rhs>(&mut self, f: &mut R, t: f64, y: &[f64], h: f64, tol: Tolerances) -> Result<f64> {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f.eval(t + C2 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f.eval(t + C3 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f.eval(t + C4 * h, tmp, k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f.eval(t + C5 * h, tmp, k5)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f.eval(t + h, tmp, k6)?;
        for i in 0..n {
            self.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f.eval(t + h, &self.y_new, k7)?;
        let mut acc = 0.0;
        for i in 0..n {
            self.err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(self.y_new[i].abs());
            acc += (self.err[i] / sc).powi(2);
        }
        Ok((acc / n as f64).sqrt())
    }

    /// Promote the last accepted step: FSAL stage becomes the new k1.
    pub(crate) fn accept(&mut self, y: &mut [f64]) {
        y.copy_from_slice(&self.y_new);
        let (first, rest) = self.k.split_at_mut(1);
        first[0].copy_from_slice(&rest[5]);
    }
}

fn scaled_norm(v: &[f64], y: &[f64], tol: Tolerances) -> f64 {
    let acc: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| (a / (tol.abs + tol.rel * b.abs())).powi(2))
        .sum();
    (acc / v.len() as f64).sqrt()
}

/// Starting step size (Hairer, Nørsett & Wanner, II.4).
pub(crate) fn initial_step<R: Rhs>(
    f: &mut R,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    tol: Tolerances,
) -> Result<f64> {
    let d0 = scaled_norm(y0, y0, tol);
    let d1 = scaled_norm(f0, y0, tol);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f.eval(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integration settings for one interval.
pub(crate) struct Interval {
    pub t0: f64,
    pub t1: f64,
    /// Step to try first, typically the last step of the previous interval.
    pub h_hint: Option<f64>,
    /// Sector label for error reports.
    pub sector: usize,
}

/// Integrate `y` from `t0` to exactly `t1` (`t1 > t0`). Returns the stats and
/// the last accepted step size. `observe` is called after every accepted step.
pub(crate) fn integrate_interval<R: Rhs>(
    f: &mut R,
    interval: Interval,
    y: &mut [f64],
    tol: Tolerances,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<(Stats, f64)> {
    let Interval { t0, t1, h_hint, sector } = interval;
    let n = y.len();
    let span = t1 - t0;
    let mut stats = Stats::default();
    let mut ws = Workspace::new(n);
    f.eval(t0, y, ws.k1())?;
    stats.evals += 1;
    let mut h = match h_hint {
        Some(h) if h > 0.0 => h.min(span),
        _ => {
            stats.evals += 1;
            let f0 = ws.k[0].clone();
            initial_step(f, t0, y, &f0, span, tol)?
        }
    };
    let mut t = t0;
    let mut last_h;
    let mut rejected_last = false;
    loop {
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        let h_try = if last { remaining } else { h };
        if h_try <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, sector });
        }
        let err = ws.step(f, t, y, h_try, tol)?;
        stats.evals += 6;
        if !err.is_finite() || ws.y_new.iter().any(|v| !v.is_finite()) {
            stats.rejected += 1;
            h = h_try * 0.2;
            rejected_last = true;
            if !ws.y_new.iter().all(|v| v.is_finite()) && h < 1e-10 * span {
                return Err(Error::NonFinite { t, sector });
            }
            continue;
        }
        if err <= 1.0 {
            ws.accept(y);
            t = if last { t1 } else { t + h_try };
            stats.accepted += 1;
            last_h = h_try;
            observe(t, y);
            if last {
                break;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h = h_try * fac;
            rejected_last = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h = h_try * fac;
            rejected_last = true;
        }
    }
    Ok((stats, last_h))
}
