//! Simple zeros of averaged functions, coefficient fits, and the rank
//! argument that turns a parameter family of fits into a lower bound on the
//! number of zeros.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::averaging::{averaged, richardson_derivative, AveragedFunction};
use crate::error::{Error, Result};
use crate::examples::{build_example, log_basis, RankFamily};
use crate::integrate::Tolerances;
use crate::model::Domain;
use crate::par::Execution;

/// A simple zero `ρ*` of `f_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleCandidate {
    pub rho: f64,
    pub order: usize,
    pub derivative: f64,
    pub bracket: (f64, f64),
    /// `|f_l(ρ*)|`.
    pub residual: f64,
}

/// A sign change whose zero failed the simplicity test.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedZero {
    pub rho: f64,
    pub derivative: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroReport {
    pub candidates: Vec<CycleCandidate>,
    pub rejected: Vec<RejectedZero>,
    /// `max |f|` over the scan grid.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSearch {
    pub grid_size: usize,
    /// `|f'(ρ*)|` must exceed `simplicity · scale`.
    pub simplicity: f64,
    pub execution: Execution,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        ZeroSearch {
            grid_size: 200,
            simplicity: 1e-6,
            execution: Execution::default(),
        }
    }
}

/// Scans `f` on a uniform grid of `domain`, refines every sign change by
/// bisection to width `1e−12·|D|`, polishes with a secant step, and keeps the
/// zeros whose derivative passes the simplicity test. Zeros closer together
/// than the grid step can be missed.
pub fn find_zeros_fn<F>(f: F, order: usize, domain: Domain, opts: ZeroSearch) -> Result<ZeroReport>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    if opts.grid_size < 2 {
        return Err(Error::InvalidArgument("zero search needs grid_size >= 2".into()));
    }
    let grid = domain.grid(opts.grid_size);
    let values = opts
        .execution
        .map(&grid, |&r| f(r))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut brackets = Vec::new();
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            // exact grid hits, bracketed by the neighbors when possible
            let lo = if i > 0 { i - 1 } else { i };
            if values[lo] * values[i + 1] < 0.0 {
                brackets.push((grid[lo], grid[i + 1], values[lo], values[i + 1]));
            }
        } else if fa * fb < 0.0 {
            brackets.push((grid[i], grid[i + 1], fa, fb));
        }
    }
    let width_tol = 1e-12 * domain.width();
    let refined = opts.execution.map(&brackets, |&(a, b, fa, fb)| {
        let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
        while b - a > width_tol {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = f(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                fa = 0.0;
                fb = 0.0;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
        }
        let (mut root, mut froot) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
        if fb != fa && froot != 0.0 {
            let s = b - fb * (b - a) / (fb - fa);
            if s >= a && s <= b {
                let fs = f(s)?;
                if fs.abs() < froot.abs() {
                    root = s;
                    froot = fs;
                }
            }
        }
        let deriv = richardson_derivative(&f, root, domain.min, domain.max)?;
        Ok::<_, Error>((root, froot, deriv, (a, b)))
    });
    let mut report = ZeroReport {
        candidates: Vec::new(),
        rejected: Vec::new(),
        scale,
    };
    for (k, res) in refined.into_iter().enumerate() {
        let (rho, froot, derivative, _) = res?;
        let bracket = (brackets[k].0, brackets[k].1);
        if derivative.abs() > opts.simplicity * scale && scale > 0.0 {
            report.candidates.push(CycleCandidate {
                rho,
                order,
                derivative,
                bracket,
                residual: froot.abs(),
            });
        } else {
            report.rejected.push(RejectedZero {
                rho,
                derivative,
                bracket,
            });
        }
    }
    Ok(report)
}

/// Simple zeros of an averaged function on its system's domain.
pub fn find_zeros(f: &AveragedFunction, opts: ZeroSearch) -> Result<ZeroReport> {
    find_zeros_fn(|r| f.value(r), f.order(), f.system().domain(), opts)
}

/// Least-squares coefficients of `f` in the basis `ρ^p`, `p ∈ [lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub order: usize,
    pub powers: (i32, i32),
    /// `coeffs[m]` multiplies `ρ^{lo + m}`.
    pub coeffs: Vec<f64>,
    /// Largest absolute residual at the fit nodes.
    pub residual: f64,
    /// `max |f|` at the fit nodes.
    pub scale: f64,
    pub condition: f64,
}

impl CoefficientVector {
    /// Residual small enough, relative to `scale`, to trust the basis.
    pub fn certified(&self, rel: f64, abs: f64) -> bool {
        self.residual <= abs + rel * self.scale
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * rho.powi(self.powers.0 + m as i32))
            .sum()
    }
}

/// `count` Chebyshev nodes of the first kind mapped to `[min, max]`.
pub fn chebyshev_nodes(domain: Domain, count: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (domain.min + domain.max), 0.5 * domain.width());
    (0..count)
        .map(|i| mid - half * (PI * (2 * i + 1) as f64 / (2 * count) as f64).cos())
        .collect()
}

const MAX_FIT_CONDITION: f64 = 1e12;

/// Fits `f` by `Σ_{p=lo}^{hi} c_p ρ^p` at `2(hi−lo+1)` Chebyshev nodes.
pub fn fit_laurent<F>(
    f: F,
    order: usize,
    powers: (i32, i32),
    domain: Domain,
    exec: Execution,
) -> Result<CoefficientVector>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let (lo, hi) = powers;
    if hi < lo {
        return Err(Error::InvalidArgument(format!("empty power range {lo}..={hi}")));
    }
    let width = (hi - lo + 1) as usize;
    let nodes = chebyshev_nodes(domain, 2 * width);
    let values = exec.map(&nodes, |&r| f(r)).into_iter().collect::<Result<Vec<f64>>>()?;
    let mut a = DMatrix::from_fn(nodes.len(), width, |i, m| nodes[i].powi(lo + m as i32));
    // column scaling before the SVD
    let norms: Vec<f64> = (0..width).map(|m| a.column(m).norm()).collect();
    for (m, &nm) in norms.iter().enumerate() {
        a.column_mut(m).scale_mut(1.0 / nm);
    }
    let b = DVector::from_vec(values.clone());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_FIT_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let fitted = &a * &x;
    let residual = (fitted - &b).amax();
    let coeffs = x.iter().zip(&norms).map(|(c, n)| c / n).collect();
    Ok(CoefficientVector {
        order,
        powers,
        coeffs,
        residual,
        scale: values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        condition,
    })
}

/// Polynomial fit of degree `d`.
pub fn fit_coefficients(f: &AveragedFunction, degree: usize, exec: Execution) -> Result<CoefficientVector> {
    fit_laurent(|r| f.value(r), f.order(), (0, degree as i32), f.system().domain(), exec)
}

/// Number of singular values above `max(rel · σ_max, abs)`.
pub fn numerical_rank(singular_values: &[f64], rel: f64, abs: f64) -> usize {
    let smax = singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = (rel * smax).max(abs);
    singular_values.iter().filter(|&&s| s > cut).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `∂ coeffs / ∂ v`, row per coefficient.
    pub jacobian: Vec<Vec<f64>>,
    pub degree: usize,
}

impl RankReport {
    /// Lower bound `rank − 1` on the number of simple zeros.
    pub fn zero_bound(&self) -> usize {
        self.rank.saturating_sub(1)
    }
}

pub const RANK_STEP: f64 = 1e-5;
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Rank of the Jacobian of `v ↦ coeffs(v)` at `base` by central differences.
/// `family` must return certified fits; the first uncertified one aborts.
pub fn parameter_rank<F>(family: F, base: &[f64], exec: Execution) -> Result<RankReport>
where
    F: Fn(&[f64]) -> Result<CoefficientVector> + Sync + Send,
{
    let center = family(base)?;
    let rows = center.coeffs.len();
    let columns: Vec<usize> = (0..base.len()).collect();
    let cols = exec.map(&columns, |&m| -> Result<Vec<f64>> {
        let mut plus = base.to_vec();
        let mut minus = base.to_vec();
        plus[m] += RANK_STEP;
        minus[m] -= RANK_STEP;
        let (cp, cm) = (family(&plus)?, family(&minus)?);
        Ok(cp
            .coeffs
            .iter()
            .zip(&cm.coeffs)
            .map(|(p, q)| (p - q) / (2.0 * RANK_STEP))
            .collect())
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    let jac = DMatrix::from_fn(rows, base.len(), |i, m| cols[m][i]);
    let singular_values: Vec<f64> = if base.is_empty() || rows == 0 {
        Vec::new()
    } else {
        jac.clone().svd(false, false).singular_values.iter().copied().collect()
    };
    let rank = numerical_rank(&singular_values, RANK_THRESHOLD, 1e-12);
    Ok(RankReport {
        rank,
        singular_values,
        jacobian: (0..rows).map(|i| jac.row(i).iter().copied().collect()).collect(),
        degree: rows.saturating_sub(1),
    })
}

/// Fit residual accepted as certifying the Laurent window of a family.
pub const FIT_CERTIFY_REL: f64 = 1e-8;
pub const FIT_CERTIFY_ABS: f64 = 1e-9;

/// [`fit_laurent`] that refuses fits whose residual exceeds the
/// certification bound.
pub fn fit_certified<F>(
    f: F,
    order: usize,
    powers: (i32, i32),
    domain: Domain,
    exec: Execution,
) -> Result<CoefficientVector>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let fit = fit_laurent(f, order, powers, domain, exec)?;
    if !fit.certified(FIT_CERTIFY_REL, FIT_CERTIFY_ABS) {
        return Err(Error::Fit(format!(
            "f_{order} is not spanned by rho^{}..rho^{} (residual {:e}, scale {:e})",
            powers.0, powers.1, fit.residual, fit.scale
        )));
    }
    Ok(fit)
}

/// Rank of `D_v M_l` for a built-in family, where `M_l` is the coefficient
/// vector of `f_l` in the family's Laurent window.
pub fn family_rank(family: &RankFamily, tol: Tolerances, exec: Execution) -> Result<RankReport> {
    let domain = family.id.default_domain();
    let l = family.order;
    parameter_rank(
        |v| {
            let inst = build_example(family.id, &family.params(v)?)?.with_order(l)?;
            let sys = inst.standard();
            fit_certified(
                |r| averaged(sys, l, r, tol),
                l,
                family.powers,
                domain,
                Execution::Sequential,
            )
        },
        &family.base,
        exec,
    )
}

/// Distinct functions in `{1, r, h_2, …, h_n}` and the resulting lower bound
/// on the number of simple zeros of `f_1` for the `n`-zone example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogFamilyCount {
    pub functions: usize,
    pub bound: usize,
}

pub fn log_family_count(n: usize) -> Result<LogFamilyCount> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "the n-zone family needs n >= 2, got {n}"
        )));
    }
    Ok(if n % 2 == 1 {
        LogFamilyCount {
            functions: n + 1,
            bound: n,
        }
    } else if n == 2 {
        // f_1 = π(b_1+b_2)r/2 has no positive simple zero
        LogFamilyCount { functions: 2, bound: 0 }
    } else if n.is_multiple_of(4) {
        LogFamilyCount {
            functions: n / 2 + 2,
            bound: n / 2 + 1,
        }
    } else {
        LogFamilyCount {
            functions: n / 2 + 1,
            bound: n / 2,
        }
    })
}

/// Relative singular-value cut for [`log_family_gram_rank`].
pub const GRAM_RANK_THRESHOLD: f64 = 1e-14;

/// Numerical rank of the Gram matrix of `{1, r, h_2, …, h_n}` sampled at
/// `nodes` Chebyshev points of `domain`. Computed from the SVD of the
/// column-normalized sample matrix `A` (the Gram matrix is `AᵀA`), since
/// squaring the singular values would push the smallest independent
/// directions below round-off. Columns that vanish on the grid are dropped.
pub fn log_family_gram_rank(n: usize, domain: Domain, nodes: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "the n-zone family needs n >= 2, got {n}"
        )));
    }
    let rs = chebyshev_nodes(domain, nodes);
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; rs.len()], rs.clone()];
    for j in 2..=n {
        columns.push(rs.iter().map(|&r| log_basis(n, j, r)).collect::<Result<_>>()?);
    }
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max_norm = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    let kept: Vec<Vec<f64>> = columns
        .into_iter()
        .zip(norms)
        .filter(|(_, nm)| *nm > 1e-12 * max_norm)
        .map(|(c, nm)| c.into_iter().map(|v| v / nm).collect())
        .collect();
    let a = DMatrix::from_fn(rs.len(), kept.len(), |i, m| kept[m][i]);
    let sv: Vec<f64> = a.svd(false, false).singular_values.iter().copied().collect();
    Ok(numerical_rank(&sv, GRAM_RANK_THRESHOLD, 0.0))
}
