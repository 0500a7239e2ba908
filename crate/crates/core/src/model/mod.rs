//! Piecewise standard-form systems, planar piecewise vector fields, and the
//! polar chart that turns the latter into the former.

pub mod expr;

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::averaging;
use crate::error::{Error, Result};
use crate::integrate::Tolerances;
use crate::series::{Jet, Scalar};

/// Angles `0 = α_0 < α_1 < … < α_n = 2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPartition {
    alphas: Vec<f64>,
}

impl SectorPartition {
    pub fn new(mut alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidArgument(
                "a sector partition needs at least alpha_0 and alpha_n".into(),
            ));
        }
        if alphas[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("alpha_0 must be 0, got {}", alphas[0])));
        }
        let last = alphas.len() - 1;
        if (alphas[last] - TAU).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "alpha_n must be 2*pi, got {}",
                alphas[last]
            )));
        }
        alphas[last] = TAU;
        if let Some(w) = alphas.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "angles must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(SectorPartition { alphas })
    }

    /// `n` sectors of equal width `2π/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one sector".into()));
        }
        let mut alphas: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        alphas.push(TAU);
        Self::new(alphas)
    }

    pub fn n(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `(α_j, α_{j+1})` for the zero-based sector index `j`.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.alphas[j], self.alphas[j + 1])
    }

    /// Zero-based index of the sector containing `theta`. An interior
    /// boundary `α_j` belongs to the sector it closes.
    pub fn sector_of(&self, theta: f64) -> Result<usize> {
        if !(0.0..=TAU).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta={theta} outside [0, 2*pi]; reduce it first"
            )));
        }
        let idx = self.alphas[1..].partition_point(|&a| a < theta);
        Ok(idx.min(self.n() - 1))
    }
}

/// Open interval `D = (min, max)` of positive radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub min: f64,
    pub max: f64,
}

impl Domain {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain must satisfy 0 < min < max < inf, got ({min}, {max})"
            )));
        }
        Ok(Domain { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Closure membership; evaluation at the endpoints is allowed.
    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.min && rho <= self.max
    }

    pub fn check(&self, rho: f64) -> Result<()> {
        if self.contains(rho) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                rho,
                min: self.min,
                max: self.max,
            })
        }
    }

    /// `points` equally spaced values covering `[min, max]`.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.5 * (self.min + self.max)],
            _ => (0..points)
                .map(|i| {
                    if i == points - 1 {
                        self.max
                    } else {
                        self.min + self.width() * i as f64 / (points - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// `F̂[i][L] = ∂^L F_i(θ, r) / L!` for `i ≤ eps_order`, `L ≤ r_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    eps_order: usize,
    r_order: usize,
    data: Vec<f64>,
}

impl CoeffTable {
    pub fn zeros(eps_order: usize, r_order: usize) -> Self {
        CoeffTable {
            eps_order,
            r_order,
            data: vec![0.0; (eps_order + 1) * (r_order + 1)],
        }
    }

    pub fn eps_order(&self) -> usize {
        self.eps_order
    }

    pub fn r_order(&self) -> usize {
        self.r_order
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.data[i * (self.r_order + 1) + l]
    }

    pub fn set(&mut self, i: usize, l: usize, v: f64) {
        self.data[i * (self.r_order + 1) + l] = v;
    }

    /// `∂^L F_i`.
    pub fn derivative(&self, i: usize, l: usize) -> f64 {
        self.get(i, l) * crate::bell::factorial_f64(l)
    }

    /// `Σ_i ε^i F_i` at `L = 0`.
    pub fn sum_in_eps(&self, eps: f64) -> f64 {
        (0..=self.eps_order)
            .rev()
            .fold(0.0, |acc, i| acc * eps + self.get(i, 0))
    }
}

/// Per-sector evaluator of the standard-form coefficients `F_i^j`.
pub trait SectorField: Send + Sync {
    fn coefficients(&self, theta: f64, r: f64, eps_order: usize, r_order: usize) -> Result<CoeffTable>;
}

/// Closed-form `F_i(θ, r)`, written against a jet in `r`.
pub type StandardFn = dyn Fn(f64, &Jet) -> Result<Jet> + Send + Sync;

/// Sector given by explicit functions `F_0, F_1, …` (missing orders are zero).
#[derive(Clone)]
pub struct ExplicitSector {
    orders: Vec<Option<Arc<StandardFn>>>,
}

impl ExplicitSector {
    pub fn new(orders: Vec<Option<Arc<StandardFn>>>) -> Self {
        ExplicitSector { orders }
    }

    pub fn zero() -> Self {
        ExplicitSector { orders: Vec::new() }
    }
}

impl fmt::Debug for ExplicitSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitSector")
            .field("orders", &self.orders.iter().map(Option::is_some).collect::<Vec<_>>())
            .finish()
    }
}

impl SectorField for ExplicitSector {
    fn coefficients(&self, theta: f64, r: f64, eps_order: usize, r_order: usize) -> Result<CoeffTable> {
        let mut table = CoeffTable::zeros(eps_order, r_order);
        let rj = Jet::seed(r, r_order);
        for (i, f) in self.orders.iter().enumerate().take(eps_order + 1) {
            if let Some(f) = f {
                let v = f(theta, &rj)?;
                for (l, c) in v.coeffs().iter().enumerate().take(r_order + 1) {
                    table.set(i, l, *c);
                }
            }
        }
        Ok(table)
    }
}

/// Standard-form system `r' = Σ_{i≤k} ε^i F_i^j(θ, r)` on the sectors of a
/// partition.
#[derive(Clone)]
pub struct PiecewiseStandardSystem {
    partition: SectorPartition,
    sectors: Vec<Arc<dyn SectorField>>,
    k: usize,
    domain: Domain,
}

impl fmt::Debug for PiecewiseStandardSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseStandardSystem")
            .field("alphas", &self.partition.alphas())
            .field("k", &self.k)
            .field("domain", &self.domain)
            .finish()
    }
}

impl PiecewiseStandardSystem {
    pub fn new(
        partition: SectorPartition,
        sectors: Vec<Arc<dyn SectorField>>,
        k: usize,
        domain: Domain,
    ) -> Result<Self> {
        if sectors.len() != partition.n() {
            return Err(Error::InvalidArgument(format!(
                "{} sector fields for {} sectors",
                sectors.len(),
                partition.n()
            )));
        }
        if k > crate::bell::MAX_ORDER {
            return Err(Error::OrderTooLarge {
                order: k,
                max: crate::bell::MAX_ORDER,
            });
        }
        Ok(PiecewiseStandardSystem {
            partition,
            sectors,
            k,
            domain,
        })
    }

    pub fn partition(&self) -> &SectorPartition {
        &self.partition
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn sector(&self, j: usize) -> &dyn SectorField {
        self.sectors[j].as_ref()
    }

    /// Same sectors, different truncation order.
    pub fn with_order(&self, k: usize) -> Result<Self> {
        Self::new(self.partition.clone(), self.sectors.clone(), k, self.domain)
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        PiecewiseStandardSystem { domain, ..self.clone() }
    }

    pub fn coefficients(&self, j: usize, theta: f64, r: f64, eps_order: usize, r_order: usize) -> Result<CoeffTable> {
        self.sectors[j]
            .coefficients(theta, r, eps_order, r_order)
            .map_err(|e| contextualize(e, j, theta, r))
    }

    /// Truncated right-hand side `Σ_{i≤k} ε^i F_i^j(θ, r)`.
    pub fn rhs(&self, j: usize, theta: f64, r: f64, eps: f64) -> Result<f64> {
        let order = if eps == 0.0 { 0 } else { self.k };
        Ok(self.coefficients(j, theta, r, order, 0)?.sum_in_eps(eps))
    }
}

pub(crate) fn contextualize(e: Error, sector: usize, theta: f64, r: f64) -> Error {
    match e {
        Error::Series(s) => Error::Evaluation {
            sector,
            theta,
            r,
            reason: s.to_string(),
        },
        other => other,
    }
}

/// One planar vector field `X_i^j(x, y)` evaluable on reals and on jets.
pub trait PlanarComponent: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> Result<[f64; 2]>;
    fn eval_jet(&self, x: &Jet, y: &Jet) -> Result<[Jet; 2]>;
}

/// A planar formula written once, generically over the coefficient ring.
pub trait PlanarFormula: Send + Sync {
    fn apply<S: Scalar>(&self, x: &S, y: &S) -> Result<[S; 2]>;
}

impl<T: PlanarFormula> PlanarComponent for T {
    fn eval(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        self.apply(&x, &y)
    }

    fn eval_jet(&self, x: &Jet, y: &Jet) -> Result<[Jet; 2]> {
        self.apply(x, y)
    }
}

/// Affine field `(ẋ, ẏ) = M (x, y) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [[f64; 2]; 2],
    pub c: [f64; 2],
}

impl Affine {
    pub fn constant(cx: f64, cy: f64) -> Self {
        Affine {
            m: [[0.0; 2]; 2],
            c: [cx, cy],
        }
    }

    /// The linear center `(−y, x)`.
    pub fn rotation() -> Self {
        Affine {
            m: [[0.0, -1.0], [1.0, 0.0]],
            c: [0.0, 0.0],
        }
    }
}

impl PlanarFormula for Affine {
    fn apply<S: Scalar>(&self, x: &S, y: &S) -> Result<[S; 2]> {
        let row = |r: usize| x.clone() * self.m[r][0] + y.clone() * self.m[r][1] + self.c[r];
        Ok([row(0), row(1)])
    }
}

type ComponentSlot = Option<Arc<dyn PlanarComponent>>;

/// `Z(x, y; ε) = Σ_{i≤k} ε^i X_i^j(x, y)` on sector `C_j`.
#[derive(Clone)]
pub struct PlanarPiecewiseField {
    partition: SectorPartition,
    components: Vec<Vec<ComponentSlot>>,
    k: usize,
}

impl fmt::Debug for PlanarPiecewiseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarPiecewiseField")
            .field("alphas", &self.partition.alphas())
            .field("k", &self.k)
            .finish()
    }
}

impl PlanarPiecewiseField {
    /// `components[j][i]` is `X_i^j`; `None` or a short row means zero.
    pub fn new(partition: SectorPartition, components: Vec<Vec<ComponentSlot>>, k: usize) -> Result<Self> {
        if components.len() != partition.n() {
            return Err(Error::InvalidArgument(format!(
                "{} component rows for {} sectors",
                components.len(),
                partition.n()
            )));
        }
        if let Some(row) = components.iter().find(|row| row.len() > k + 1) {
            return Err(Error::InvalidArgument(format!(
                "a sector lists {} orders but k = {k}",
                row.len()
            )));
        }
        if components.iter().any(|row| row.first().is_none_or(Option::is_none)) {
            return Err(Error::InvalidArgument(
                "every sector needs an unperturbed field X_0".into(),
            ));
        }
        Ok(PlanarPiecewiseField {
            partition,
            components,
            k,
        })
    }

    pub fn partition(&self) -> &SectorPartition {
        &self.partition
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn component(&self, j: usize, i: usize) -> Option<&Arc<dyn PlanarComponent>> {
        self.components[j].get(i).and_then(Option::as_ref)
    }

    /// `X_j(x, y; ε)` on sector `j`.
    pub fn velocity(&self, j: usize, x: f64, y: f64, eps: f64) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        let mut pow = 1.0;
        for (i, slot) in self.components[j].iter().enumerate() {
            if i > 0 {
                if eps == 0.0 {
                    break;
                }
                pow *= eps;
            }
            if let Some(c) = slot {
                let v = c.eval(x, y)?;
                out[0] += pow * v[0];
                out[1] += pow * v[1];
            }
        }
        Ok(out)
    }

    /// Angular velocity `θ̇ = (x ẏ − y ẋ) / r²` of sector `j`'s field.
    pub fn angular_velocity(&self, j: usize, x: f64, y: f64, eps: f64) -> Result<f64> {
        let [vx, vy] = self.velocity(j, x, y, eps)?;
        Ok((x * vy - y * vx) / (x * x + y * y))
    }

    /// Checks that `θ̇` at `ε = 0` keeps a strict sign on every closed sector
    /// along the circle of radius `r`.
    pub fn check_transversal(&self, r: f64, samples_per_sector: usize) -> Result<()> {
        let samples = samples_per_sector.max(2);
        for j in 0..self.partition.n() {
            let (a, b) = self.partition.bounds(j);
            let mut sign = 0.0;
            for s in 0..=samples {
                let theta = a + (b - a) * s as f64 / samples as f64;
                let (x, y) = (r * theta.cos(), r * theta.sin());
                let w = self.angular_velocity(j, x, y, 0.0)?;
                let scale = self.velocity(j, x, y, 0.0)?.iter().map(|v| v.abs()).sum::<f64>() / r;
                if w.abs() <= 1e-9 * scale.max(1e-300) || (sign != 0.0 && w.signum() != sign) {
                    return Err(Error::PolarTransversality { theta, r });
                }
                sign = w.signum();
            }
        }
        Ok(())
    }
}

/// Sector field obtained through the polar chart `x = r cos θ, y = r sin θ`.
struct PolarSector {
    field: Arc<PlanarPiecewiseField>,
    sector: usize,
}

impl SectorField for PolarSector {
    fn coefficients(&self, theta: f64, r: f64, eps_order: usize, r_order: usize) -> Result<CoeffTable> {
        let (s, c) = theta.sin_cos();
        let rj = Jet::seed(r, r_order);
        let x = rj.clone() * c;
        let y = rj.clone() * s;
        let zero = rj.lift(0.0);
        let mut xs = vec![zero.clone(); eps_order + 1];
        let mut ys = vec![zero; eps_order + 1];
        for i in 0..=eps_order.min(self.field.k) {
            if let Some(comp) = self.field.component(self.sector, i) {
                let [vx, vy] = comp.eval_jet(&x, &y)?;
                xs[i] = vx;
                ys[i] = vy;
            }
        }
        let xdot = Jet::from_coeffs(xs);
        let ydot = Jet::from_coeffs(ys);
        let rdot = xdot.clone() * c + ydot.clone() * s;
        // r·θ̇
        let r_thdot = ydot * c - xdot * s;
        let w0 = r_thdot.coeff(0).value();
        let speed = rdot.coeff(0).value().abs() + w0.abs();
        if w0 == 0.0 || w0.abs() <= 1e-13 * speed {
            return Err(Error::PolarTransversality { theta, r });
        }
        let ratio = rdot.scale_by(&rj).checked_div(&r_thdot)?;
        let mut table = CoeffTable::zeros(eps_order, r_order);
        for (i, inner) in ratio.coeffs().iter().enumerate() {
            for (l, v) in inner.coeffs().iter().enumerate() {
                table.set(i, l, *v);
            }
        }
        Ok(table)
    }
}

/// Standard form `r'(θ) = ṙ/θ̇` of a planar piecewise field in polar
/// coordinates, truncated at the field's order `k`.
pub fn polar_standard_form(field: &Arc<PlanarPiecewiseField>, domain: Domain) -> Result<PiecewiseStandardSystem> {
    let sectors: Vec<Arc<dyn SectorField>> = (0..field.partition.n())
        .map(|sector| {
            Arc::new(PolarSector {
                field: Arc::clone(field),
                sector,
            }) as Arc<dyn SectorField>
        })
        .collect();
    PiecewiseStandardSystem::new(field.partition.clone(), sectors, field.k, domain)
}

/// Outcome of the periodicity check of the unperturbed flow at one radius.
#[derive(Debug, Clone)]
pub struct H1Sample {
    pub rho: f64,
    /// `|φ(2π, ρ) − ρ|`, or the integration failure.
    pub residual: Result<f64>,
}

#[derive(Debug, Clone)]
pub struct H1Report {
    pub samples: Vec<H1Sample>,
    pub tolerance: f64,
}

impl H1Report {
    pub fn max_residual(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.residual.as_ref().ok().copied())
            .reduce(f64::max)
    }

    pub fn passed(&self) -> bool {
        self.samples
            .iter()
            .all(|s| matches!(s.residual, Ok(r) if r <= self.tolerance))
    }
}

/// Integrates the unperturbed flow once around and reports `|φ(2π,ρ) − ρ|`.
pub fn validate_h1(system: &PiecewiseStandardSystem, rho_samples: &[f64], tol: Tolerances, threshold: f64) -> H1Report {
    let samples = rho_samples
        .iter()
        .map(|&rho| H1Sample {
            rho,
            residual: averaging::flow_return(system, rho, tol).map(|phi| (phi - rho).abs()),
        })
        .collect();
    H1Report {
        samples,
        tolerance: threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn quadrants() -> SectorPartition {
        SectorPartition::new(vec![0.0, FRAC_PI_2, PI, 1.5 * PI, TAU]).unwrap()
    }

    #[test]
    fn sector_lookup() {
        let p = quadrants();
        assert_eq!(p.sector_of(0.1).unwrap() + 1, 1);
        assert_eq!(p.sector_of(FRAC_PI_2).unwrap() + 1, 1);
        assert_eq!(p.sector_of(TAU).unwrap() + 1, 4);
        assert_eq!(p.sector_of(0.0).unwrap(), 0);
        assert_eq!(p.sector_of(PI + 1e-12).unwrap(), 2);
        assert!(p.sector_of(-0.1).is_err());
        assert!(p.sector_of(7.0).is_err());
    }

    #[test]
    fn sector_lookup_is_monotone_and_total() {
        let p = SectorPartition::uniform(7).unwrap();
        let mut prev = 0;
        for s in 0..=10_000 {
            let theta = TAU * s as f64 / 10_000.0;
            let j = p.sector_of(theta).unwrap();
            assert!(j >= prev && j < 7);
            let (a, b) = p.bounds(j);
            assert!(theta >= a && theta <= b);
            prev = j;
        }
    }

    #[test]
    fn partition_validation() {
        assert!(SectorPartition::new(vec![0.0, 1.0]).is_err());
        assert!(SectorPartition::new(vec![0.1, TAU]).is_err());
        assert!(SectorPartition::new(vec![0.0, 2.0, 1.0, TAU]).is_err());
        assert!(SectorPartition::new(vec![0.0, TAU]).is_ok());
        assert!(Domain::new(0.0, 1.0).is_err());
        assert!(Domain::new(1.0, 0.5).is_err());
    }

    #[test]
    fn linear_center_has_zero_standard_form() {
        let p = SectorPartition::uniform(1).unwrap();
        let field =
            Arc::new(PlanarPiecewiseField::new(p, vec![vec![Some(Arc::new(Affine::rotation()) as _)]], 2).unwrap());
        let sys = polar_standard_form(&field, Domain::new(0.1, 3.0).unwrap()).unwrap();
        for &(theta, r) in &[(0.3, 0.5), (2.0, 1.7), (5.9, 2.9)] {
            let t = sys.coefficients(0, theta, r, 2, 2).unwrap();
            for i in 0..=2 {
                for l in 0..=2 {
                    assert_abs_diff_eq!(t.get(i, l), 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn transversality_failure_is_reported() {
        // (ẋ, ẏ) = (1, 0) has θ̇ = 0 on the x-axis
        let p = SectorPartition::uniform(1).unwrap();
        let field = Arc::new(
            PlanarPiecewiseField::new(p, vec![vec![Some(Arc::new(Affine::constant(1.0, 0.0)) as _)]], 0).unwrap(),
        );
        let sys = polar_standard_form(&field, Domain::new(0.1, 3.0).unwrap()).unwrap();
        assert!(matches!(
            sys.coefficients(0, 0.0, 1.0, 0, 0),
            Err(Error::PolarTransversality { .. })
        ));
        assert!(field.check_transversal(1.0, 64).is_err());
    }

    #[test]
    fn polar_r_derivatives_match_finite_differences() {
        // θ-dependent nonlinear field to exercise the nested jets
        struct Cubic;
        impl PlanarFormula for Cubic {
            fn apply<S: Scalar>(&self, x: &S, y: &S) -> Result<[S; 2]> {
                Ok([
                    x.clone() * x.clone() * y.clone() + 0.3,
                    x.clone() * y.clone() - y.clone() * 2.0,
                ])
            }
        }
        let p = SectorPartition::uniform(1).unwrap();
        let field = Arc::new(
            PlanarPiecewiseField::new(
                p,
                vec![vec![
                    Some(Arc::new(Affine::rotation()) as _),
                    Some(Arc::new(Cubic) as _),
                ]],
                1,
            )
            .unwrap(),
        );
        let sys = polar_standard_form(&field, Domain::new(0.1, 3.0).unwrap()).unwrap();
        let (theta, r, h) = (0.9, 0.8, 1e-5);
        let t = sys.coefficients(0, theta, r, 3, 2).unwrap();
        for i in 0..=3 {
            let f = |rr: f64| sys.coefficients(0, theta, rr, 3, 0).unwrap().get(i, 0);
            let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
            assert_abs_diff_eq!(t.get(i, 1), d1, epsilon = 1e-7);
            let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h) / 2.0;
            assert_abs_diff_eq!(t.get(i, 2), d2, epsilon = 1e-3);
        }
        // F_1 = cos θ·P + sin θ·Q for (P, Q) the perturbation
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let f1 = theta.cos() * (x * x * y + 0.3) + theta.sin() * (x * y - 2.0 * y);
        assert_abs_diff_eq!(t.get(1, 0), f1, epsilon = 1e-14);
    }
}
