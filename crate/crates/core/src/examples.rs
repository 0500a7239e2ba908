//! Built-in parameterized systems with closed-form reference data.
//!
//! * `linear-center-4z`: `X_0 = (−y, x)` on the four quadrants, perturbed by
//!   `Σ ε^i (a_ij x + b_ij, 0)`.
//! * `constant-center-4z`: the piecewise constant center
//!   `(−1, 1), (−1, −1), (1, −1), (1, 1)` on the quadrants, same perturbation.
//! * `quadratic-isochronous-nz`: the quadratic isochronous center after the
//!   chart `x = −u/(v−1), y = −v/(v−1)`, on `n` equal sectors:
//!   `u̇ = −v + ε(u(b_j − a_j u/(v−1)) + c_j(1−v))`, `v̇ = u`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::expr::parse_constant;
use crate::model::{
    polar_standard_form, Affine, Domain, ExplicitSector, PiecewiseStandardSystem, PlanarComponent, PlanarFormula,
    PlanarPiecewiseField, SectorField, SectorPartition, StandardFn,
};
use crate::series::{Jet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleId {
    LinearCenter4z,
    ConstantCenter4z,
    QuadraticIsochronousNz,
}

impl ExampleId {
    pub const ALL: [ExampleId; 3] = [
        ExampleId::LinearCenter4z,
        ExampleId::ConstantCenter4z,
        ExampleId::QuadraticIsochronousNz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::LinearCenter4z => "linear-center-4z",
            ExampleId::ConstantCenter4z => "constant-center-4z",
            ExampleId::QuadraticIsochronousNz => "quadratic-isochronous-nz",
        }
    }

    pub fn default_domain(self) -> Domain {
        match self {
            ExampleId::QuadraticIsochronousNz => Domain { min: 0.05, max: 0.9 },
            _ => Domain { min: 0.1, max: 3.0 },
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown example '{s}' (expected one of linear-center-4z, constant-center-4z, quadratic-isochronous-nz)"
                ))
            })
    }
}

/// Coefficients `a_ij, b_ij` of the four-zone perturbations; row `i−1` holds
/// order `i`, column `j−1` sector `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourZoneParams {
    pub a: Vec<[f64; 4]>,
    pub b: Vec<[f64; 4]>,
}

impl FourZoneParams {
    pub fn zeros(k: usize) -> Self {
        FourZoneParams {
            a: vec![[0.0; 4]; k],
            b: vec![[0.0; 4]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a.get(i - 1).map_or(0.0, |row| row[j - 1])
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b.get(i - 1).map_or(0.0, |row| row[j - 1])
    }

    /// Sets `a_11` and `b_11` so that `f_1` vanishes identically.
    pub fn impose_vanishing_f1(&mut self) {
        let (a, b) = (&mut self.a[0], &mut self.b[0]);
        a[0] = -(a[1] + a[2] + a[3]);
        b[0] = b[1] + b[2] - b[3];
    }

    /// The instance with `f_1(ρ) = πρ − π` on the linear center.
    pub fn unit_root() -> Self {
        let mut p = FourZoneParams::zeros(1);
        p.a[0] = [1.0; 4];
        p.b[0][3] = -PI;
        p
    }
}

/// `n`, and `a_j, b_j, c_j` for `j = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NZoneParams {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl NZoneParams {
    pub fn zeros(n: usize) -> Self {
        NZoneParams {
            n,
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExampleParams {
    FourZone(FourZoneParams),
    NZone(NZoneParams),
}

impl ExampleParams {
    /// Parses `"a1=1,1,1,1;b1=0,0,0,-pi;a2=…"` for the four-zone examples and
    /// `"n=3;a=…;b=…;c=…"` for the `n`-zone one. Values are constant
    /// expressions. Orders not listed are zero; `k` is the highest listed.
    pub fn parse(id: ExampleId, src: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for item in src.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, vals) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter entry '{item}' lacks '='")))?;
            let values = vals
                .split(',')
                .map(|v| parse_constant(v.trim()))
                .collect::<Result<Vec<_>>>()?;
            entries.push((key.trim().to_string(), values));
        }
        match id {
            ExampleId::QuadraticIsochronousNz => {
                let mut n = None;
                let (mut a, mut b, mut c) = (None, None, None);
                for (key, values) in entries {
                    match key.as_str() {
                        "n" => {
                            let v = single(&key, &values)?;
                            if v.fract() != 0.0 || v < 2.0 {
                                return Err(Error::Config(format!("n must be an integer >= 2, got {v}")));
                            }
                            n = Some(v as usize);
                        }
                        "a" => a = Some(values),
                        "b" => b = Some(values),
                        "c" => c = Some(values),
                        other => return Err(Error::Config(format!("unknown parameter '{other}' for {id}"))),
                    }
                }
                let n = n
                    .or_else(|| a.as_ref().or(b.as_ref()).or(c.as_ref()).map(Vec::len))
                    .ok_or_else(|| Error::Config("n-zone parameters need n".into()))?;
                let fill = |v: Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
                    let v = v.unwrap_or_else(|| vec![0.0; n]);
                    if v.len() != n {
                        return Err(Error::Config(format!(
                            "{name} has {} entries, expected n = {n}",
                            v.len()
                        )));
                    }
                    Ok(v)
                };
                Ok(ExampleParams::NZone(NZoneParams {
                    n,
                    a: fill(a, "a")?,
                    b: fill(b, "b")?,
                    c: fill(c, "c")?,
                }))
            }
            _ => {
                let mut rows: Vec<(char, usize, [f64; 4])> = Vec::new();
                for (key, values) in entries {
                    let mut chars = key.chars();
                    let kind = chars.next().filter(|c| *c == 'a' || *c == 'b');
                    let order = chars.as_str().parse::<usize>().ok().filter(|&i| i >= 1);
                    let (Some(kind), Some(order)) = (kind, order) else {
                        return Err(Error::Config(format!(
                            "unknown parameter '{key}' for {id} (expected a<i> or b<i>)"
                        )));
                    };
                    if order > crate::bell::MAX_ORDER {
                        return Err(Error::OrderTooLarge {
                            order,
                            max: crate::bell::MAX_ORDER,
                        });
                    }
                    let row: [f64; 4] = values.as_slice().try_into().map_err(|_| {
                        Error::Config(format!("{key} needs 4 values (one per sector), got {}", values.len()))
                    })?;
                    rows.push((kind, order, row));
                }
                let k = rows.iter().map(|r| r.1).max().unwrap_or(1);
                let mut p = FourZoneParams::zeros(k);
                for (kind, order, row) in rows {
                    match kind {
                        'a' => p.a[order - 1] = row,
                        _ => p.b[order - 1] = row,
                    }
                }
                Ok(ExampleParams::FourZone(p))
            }
        }
    }

    /// Parameters used when none are given.
    pub fn default_for(id: ExampleId) -> Self {
        match id {
            ExampleId::QuadraticIsochronousNz => ExampleParams::NZone(three_zero_parameters(&[0.2, 0.45, 0.7])),
            _ => ExampleParams::FourZone(FourZoneParams::unit_root()),
        }
    }
}

fn single(key: &str, values: &[f64]) -> Result<f64> {
    match values {
        [v] => Ok(*v),
        _ => Err(Error::Config(format!("{key} takes a single value"))),
    }
}

/// `Σ_i ε^i (a_i x + b_i, 0)` restricted to one order.
fn perturbation(a: f64, b: f64) -> Arc<dyn PlanarComponent> {
    Arc::new(Affine {
        m: [[a, 0.0], [0.0, 0.0]],
        c: [b, 0.0],
    })
}

/// `(ε-order 1 of) u̇ = u(b − a u/(v−1)) + c(1−v)`, `v̇ = 0`.
#[derive(Debug, Clone, Copy)]
struct QuadraticPerturbation {
    a: f64,
    b: f64,
    c: f64,
}

impl PlanarFormula for QuadraticPerturbation {
    fn apply<S: Scalar>(&self, u: &S, v: &S) -> Result<[S; 2]> {
        let frac = (u.clone() * u.clone()).try_div(&(v.clone() - 1.0))?;
        let du = u.clone() * self.b - frac * self.a + (-v.clone() + 1.0) * self.c;
        Ok([du, u.lift(0.0)])
    }
}

/// `F^j(θ, r) = cos θ (c + r(−c sin θ + cos θ (b + a r cos θ/(1 − r sin θ))))`.
fn quadratic_closed_form(a: f64, b: f64, c: f64) -> Arc<StandardFn> {
    Arc::new(move |theta: f64, r: &Jet| -> Result<Jet> {
        let (s, co) = theta.sin_cos();
        let den = (r.clone() * -s) + 1.0;
        let frac = (r.clone() * (a * co)).try_div(&den)?;
        let inner = frac + b;
        let mid = inner * co - c * s;
        Ok((r.clone() * mid + c) * co)
    })
}

fn quadrants() -> SectorPartition {
    SectorPartition::new(vec![0.0, FRAC_PI_2, PI, 1.5 * PI, TAU]).expect("quadrant angles are valid")
}

/// A built-in system with its planar parent and standard form.
#[derive(Debug, Clone)]
pub struct ExampleInstance {
    id: ExampleId,
    params: ExampleParams,
    planar: Arc<PlanarPiecewiseField>,
    standard: PiecewiseStandardSystem,
}

impl ExampleInstance {
    pub fn id(&self) -> ExampleId {
        self.id
    }

    pub fn params(&self) -> &ExampleParams {
        &self.params
    }

    pub fn planar(&self) -> &Arc<PlanarPiecewiseField> {
        &self.planar
    }

    pub fn standard(&self) -> &PiecewiseStandardSystem {
        &self.standard
    }

    /// The polar standard form of the planar field truncated at order `k`,
    /// used where more ε-orders than the closed-form ones are needed.
    pub fn polar_system(&self, k: usize) -> Result<PiecewiseStandardSystem> {
        polar_standard_form(&self.planar, self.standard.domain())?.with_order(k)
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if self.id == ExampleId::QuadraticIsochronousNz && domain.max >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "the n-zone example needs r < 1, got rho_max = {}",
                domain.max
            )));
        }
        self.standard = self.standard.with_domain(domain);
        Ok(self)
    }

    /// Standard system with averaging order `k`. The closed-form `n`-zone
    /// form is first order only; higher orders come from the polar form.
    pub fn with_order(mut self, k: usize) -> Result<Self> {
        self.standard = match self.id {
            ExampleId::QuadraticIsochronousNz if k <= 1 => self.standard.with_order(k)?,
            _ => self.polar_system(k)?,
        };
        Ok(self)
    }

    pub fn reference_f1(&self, rho: f64) -> Result<f64> {
        reference_f1(self.id, &self.params, rho)
    }

    pub fn reference_f2(&self, rho: f64) -> Result<f64> {
        reference_f2(self.id, &self.params, rho)
    }
}

/// Builds the planar field and its standard form.
pub fn build_example(id: ExampleId, params: &ExampleParams) -> Result<ExampleInstance> {
    let domain = id.default_domain();
    match (id, params) {
        (ExampleId::LinearCenter4z | ExampleId::ConstantCenter4z, ExampleParams::FourZone(p)) => {
            if p.a.len() != p.b.len() || p.a.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "{id}: need the same number (>= 1) of a and b orders, got {} and {}",
                    p.a.len(),
                    p.b.len()
                )));
            }
            let k = p.k();
            let centers: [Affine; 4] = match id {
                ExampleId::LinearCenter4z => [Affine::rotation(); 4],
                _ => [
                    Affine::constant(-1.0, 1.0),
                    Affine::constant(-1.0, -1.0),
                    Affine::constant(1.0, -1.0),
                    Affine::constant(1.0, 1.0),
                ],
            };
            let components = (0..4)
                .map(|j| {
                    let mut row: Vec<Option<Arc<dyn PlanarComponent>>> = vec![Some(Arc::new(centers[j]))];
                    row.extend((1..=k).map(|i| Some(perturbation(p.a(i, j + 1), p.b(i, j + 1)))));
                    row
                })
                .collect();
            let planar = Arc::new(PlanarPiecewiseField::new(quadrants(), components, k)?);
            // ĝ_j must not vanish on its own closed sector
            planar.check_transversal(1.0, 512)?;
            let standard = polar_standard_form(&planar, domain)?;
            Ok(ExampleInstance {
                id,
                params: params.clone(),
                planar,
                standard,
            })
        }
        (ExampleId::QuadraticIsochronousNz, ExampleParams::NZone(p)) => {
            let n = p.n;
            if n < 2 {
                return Err(Error::InvalidArgument(format!("{id} needs n >= 2, got {n}")));
            }
            if p.a.len() != n || p.b.len() != n || p.c.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{id}: a, b and c must each have n = {n} entries"
                )));
            }
            let partition = SectorPartition::uniform(n)?;
            let center: Arc<dyn PlanarComponent> = Arc::new(Affine::rotation());
            let components = (0..n)
                .map(|j| {
                    vec![
                        Some(Arc::clone(&center)),
                        Some(Arc::new(QuadraticPerturbation {
                            a: p.a[j],
                            b: p.b[j],
                            c: p.c[j],
                        }) as Arc<dyn PlanarComponent>),
                    ]
                })
                .collect();
            let planar = Arc::new(PlanarPiecewiseField::new(partition.clone(), components, 1)?);
            let sectors = (0..n)
                .map(|j| {
                    Arc::new(ExplicitSector::new(vec![
                        None,
                        Some(quadratic_closed_form(p.a[j], p.b[j], p.c[j])),
                    ])) as Arc<dyn SectorField>
                })
                .collect();
            let standard = PiecewiseStandardSystem::new(partition, sectors, 1, domain)?;
            Ok(ExampleInstance {
                id,
                params: params.clone(),
                planar,
                standard,
            })
        }
        _ => Err(Error::InvalidArgument(format!(
            "parameter shape does not match example {id}"
        ))),
    }
}

/// `h_j(r) = (r² − 1)/r · ln(1 − r sin(2(j−1)π/n))`.
pub fn log_basis(n: usize, j: usize, r: f64) -> Result<f64> {
    let s = (TAU * (j as f64 - 1.0) / n as f64).sin();
    let arg = 1.0 - r * s;
    if arg <= 0.0 {
        return Err(Error::OutsideDomain {
            rho: r,
            min: 0.0,
            max: 1.0 / s,
        });
    }
    Ok((r * r - 1.0) / r * arg.ln())
}

/// Coefficients `(C_0, C_1, d_2, …, d_n)` of `f_1 = C_0 + C_1 r + Σ d_j h_j`.
pub fn nzone_f1_coefficients(p: &NZoneParams) -> Vec<f64> {
    let n = p.n;
    let th = |j: usize| TAU * j as f64 / n as f64;
    let mut c0 = 0.0;
    let mut c1 = 0.0;
    for j in 1..=n {
        let (t0, t1) = (th(j - 1), th(j));
        let (a, b, c) = (p.a[j - 1], p.b[j - 1], p.c[j - 1]);
        c0 += (a + c) * (t1.sin() - t0.sin());
        c1 += (2.0 * TAU / n as f64 + (2.0 * t1).sin() - (2.0 * t0).sin()) * b
            + (a - c) * ((2.0 * t0).cos() - (2.0 * t1).cos());
    }
    let mut out = vec![c0, c1 / 4.0];
    out.extend((2..=n).map(|j| p.a[j - 1] - p.a[j - 2]));
    out
}

/// Closed-form `f_1`.
pub fn reference_f1(id: ExampleId, params: &ExampleParams, rho: f64) -> Result<f64> {
    match (id, params) {
        (ExampleId::LinearCenter4z, ExampleParams::FourZone(p)) => {
            let sa: f64 = (1..=4).map(|j| p.a(1, j)).sum();
            Ok(PI / 4.0 * rho * sa + p.b(1, 1) - p.b(1, 2) - p.b(1, 3) + p.b(1, 4))
        }
        (ExampleId::ConstantCenter4z, ExampleParams::FourZone(p)) => {
            let sa: f64 = (1..=4).map(|j| p.a(1, j)).sum();
            Ok(rho * rho / 2.0 * sa + rho * (p.b(1, 1) - p.b(1, 2) - p.b(1, 3) + p.b(1, 4)))
        }
        (ExampleId::QuadraticIsochronousNz, ExampleParams::NZone(p)) => {
            let coeffs = nzone_f1_coefficients(p);
            let mut v = coeffs[0] + coeffs[1] * rho;
            for j in 2..=p.n {
                let d = coeffs[j];
                let h = log_basis(p.n, j, rho)?;
                if d != 0.0 {
                    v += d * h;
                }
            }
            Ok(v)
        }
        _ => Err(Error::InvalidArgument(format!(
            "parameter shape does not match example {id}"
        ))),
    }
}

/// Closed-form `f_2` of the linear center, valid when `f_1 ≡ 0`
/// (`a_11 = −(a_12+a_13+a_14)`, `b_11 = b_12+b_13−b_14`).
pub fn reference_f2(id: ExampleId, params: &ExampleParams, rho: f64) -> Result<f64> {
    let (ExampleId::LinearCenter4z, ExampleParams::FourZone(p)) = (id, params) else {
        return Err(Error::InvalidArgument(format!("no closed-form f_2 for {id}")));
    };
    let a = |i, j| p.a(i, j);
    let b = |i, j| p.b(i, j);
    let scale = 1.0 + (1..=4).map(|j| a(1, j).abs() + b(1, j).abs()).sum::<f64>();
    let ca = a(1, 1) + a(1, 2) + a(1, 3) + a(1, 4);
    let cb = b(1, 1) - b(1, 2) - b(1, 3) + b(1, 4);
    if ca.abs() > 1e-12 * scale || cb.abs() > 1e-12 * scale {
        return Err(Error::InvalidArgument(
            "closed-form f_2 needs a_11 = -(a_12+a_13+a_14) and b_11 = b_12+b_13-b_14".into(),
        ));
    }
    let r = rho;
    let quad = PI * (a(2, 1) + a(2, 2) + a(2, 3) + a(2, 4)) + 2.0 * (a(1, 2) + a(1, 3)) * (a(1, 3) + a(1, 4));
    let lin = PI * (a(1, 2) + a(1, 3)) * (b(1, 3) - b(1, 4))
        - 4.0
            * (a(1, 4) * b(1, 2) + (a(1, 2) + a(1, 4)) * b(1, 3) + a(1, 3) * (b(1, 2) + 2.0 * b(1, 3) - b(1, 4))
                - a(1, 2) * b(1, 4)
                - b(2, 1)
                + b(2, 2)
                + b(2, 3)
                - b(2, 4));
    let cst = 4.0 * (b(1, 2) + b(1, 3)) * (b(1, 3) - b(1, 4));
    Ok((quad * r * r + lin * r + cst) / (4.0 * r))
}

/// `n`-zone parameters, `n = targets.len()` odd, whose `f_1` has simple
/// zeros at `targets`. For odd `n` the basis `{1, r, h_2, …, h_n}` is
/// linearly independent, so a combination with `n` prescribed zeros exists.
pub fn nzone_parameters_with_zeros(targets: &[f64]) -> Result<NZoneParams> {
    let n = targets.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "prescribed zeros need an odd number >= 3 of targets, got {n}"
        )));
    }
    // λ with Σ λ_m g_m(r_t) = 0, g = (1, r, h_2, …, h_n)
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for (t, &r) in targets.iter().enumerate() {
        m[(t, 0)] = 1.0;
        m[(t, 1)] = r;
        for j in 2..=n {
            m[(t, j)] = log_basis(n, j, r)?;
        }
    }
    let svd = m.svd(true, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Fit("SVD failed".into()))?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut lambda: Vec<f64> = v_t.row(min_idx).iter().copied().collect();
    let norm = lambda.iter().map(|v| v.abs()).fold(0.0, f64::max);
    lambda.iter_mut().for_each(|v| *v /= norm);

    // the map (a, b, c) ↦ (C_0, C_1, d_2..d_n) is linear; take the min-norm preimage
    let dim = 3 * n;
    let coeffs_at = |x: &[f64]| {
        nzone_f1_coefficients(&NZoneParams {
            n,
            a: x[..n].to_vec(),
            b: x[n..2 * n].to_vec(),
            c: x[2 * n..].to_vec(),
        })
    };
    let mut a_mat = DMatrix::zeros(n + 1, dim);
    for col in 0..dim {
        let mut e = vec![0.0; dim];
        e[col] = 1.0;
        for (row, v) in coeffs_at(&e).into_iter().enumerate() {
            a_mat[(row, col)] = v;
        }
    }
    let rhs = DVector::from_vec(lambda);
    let x = a_mat
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok(NZoneParams {
        n,
        a: x.as_slice()[..n].to_vec(),
        b: x.as_slice()[n..2 * n].to_vec(),
        c: x.as_slice()[2 * n..].to_vec(),
    })
}

/// Three-zone parameters whose `f_1` has simple zeros at the three `targets`.
pub fn three_zero_parameters(targets: &[f64; 3]) -> NZoneParams {
    nzone_parameters_with_zeros(targets).expect("three distinct targets in (0, 1) are admissible")
}

/// A family of parameter points for the rank argument at order `l`.
#[derive(Debug, Clone)]
pub struct RankFamily {
    pub id: ExampleId,
    pub order: usize,
    /// Laurent powers `ρ^p` spanned by `f_l`.
    pub powers: (i32, i32),
    pub names: Vec<String>,
    pub base: Vec<f64>,
}

impl RankFamily {
    /// Four-zone parameters for the free vector `v`. At order 2 the
    /// constraints `f_1 ≡ 0` fix `a_11` and `b_11`.
    pub fn params(&self, v: &[f64]) -> Result<ExampleParams> {
        if v.len() != self.names.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} free parameters, got {}",
                self.names.len(),
                v.len()
            )));
        }
        let mut p = FourZoneParams::zeros(self.order);
        for (name, &x) in self.names.iter().zip(v) {
            let (kind, rest) = name.split_at(1);
            let i: usize = rest[..1].parse().expect("well-formed name");
            let j: usize = rest[1..].parse().expect("well-formed name");
            match kind {
                "a" => p.a[i - 1][j - 1] = x,
                _ => p.b[i - 1][j - 1] = x,
            }
        }
        if self.order == 2 {
            p.impose_vanishing_f1();
        }
        Ok(ExampleParams::FourZone(p))
    }
}

/// The families behind the order-1 and order-2 rank tables of the four-zone
/// examples.
pub fn rank_family(id: ExampleId, order: usize) -> Result<RankFamily> {
    let powers = match (id, order) {
        (ExampleId::LinearCenter4z, 1) => (0, 1),
        (ExampleId::LinearCenter4z, 2) => (-1, 1),
        (ExampleId::ConstantCenter4z, 1) => (1, 2),
        (ExampleId::ConstantCenter4z, 2) => (1, 3),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "rank families exist for the four-zone examples at orders 1 and 2, not {id} at order {order}"
            )))
        }
    };
    let mut names = Vec::new();
    for i in 1..=order {
        for kind in ["a", "b"] {
            for j in 1..=4 {
                // a_11 and b_11 are eliminated at order 2
                if order == 2 && i == 1 && j == 1 {
                    continue;
                }
                names.push(format!("{kind}{i}{j}"));
            }
        }
    }
    // fixed, generic base point
    let base = (0..names.len())
        .map(|m| 0.37 + 0.61 * ((m as f64 + 1.0) * 1.618_033_988_75).fract() - 0.3 * (m % 3) as f64)
        .collect();
    Ok(RankFamily {
        id,
        order,
        powers,
        names,
        base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::averaged;
    use crate::integrate::Tolerances;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ids_round_trip() {
        for id in ExampleId::ALL {
            assert_eq!(id.as_str().parse::<ExampleId>().unwrap(), id);
        }
        assert!("nope".parse::<ExampleId>().is_err());
    }

    #[test]
    fn parameter_strings() {
        let p = ExampleParams::parse(ExampleId::LinearCenter4z, "a1=1,1,1,1; b1=0,0,0,-pi").unwrap();
        assert_eq!(p, ExampleParams::FourZone(FourZoneParams::unit_root()));
        let p = ExampleParams::parse(ExampleId::LinearCenter4z, "b2=1,2,3,4").unwrap();
        let ExampleParams::FourZone(p) = p else { panic!() };
        assert_eq!(p.k(), 2);
        assert_eq!(p.b(2, 3), 3.0);
        assert_eq!(p.a(1, 1), 0.0);
        let p = ExampleParams::parse(ExampleId::QuadraticIsochronousNz, "n=2;b=1,1").unwrap();
        assert_eq!(
            p,
            ExampleParams::NZone(NZoneParams {
                n: 2,
                a: vec![0.0; 2],
                b: vec![1.0; 2],
                c: vec![0.0; 2]
            })
        );
        assert!(ExampleParams::parse(ExampleId::LinearCenter4z, "a1=1,2").is_err());
        assert!(ExampleParams::parse(ExampleId::LinearCenter4z, "q1=1,2,3,4").is_err());
        assert!(ExampleParams::parse(ExampleId::QuadraticIsochronousNz, "n=3;a=1,2").is_err());
        assert!(ExampleParams::parse(ExampleId::QuadraticIsochronousNz, "n=1").is_err());
        assert!(ExampleParams::parse(ExampleId::LinearCenter4z, "a1=x,1,1,1").is_err());
    }

    #[test]
    fn linear_center_zero_parameters() {
        let inst = build_example(
            ExampleId::LinearCenter4z,
            &ExampleParams::FourZone(FourZoneParams::zeros(2)),
        )
        .unwrap();
        for j in 0..4 {
            let t = inst
                .standard()
                .coefficients(j, 0.4 + j as f64 * FRAC_PI_2, 1.3, 2, 2)
                .unwrap();
            for i in 0..=2 {
                for l in 0..=2 {
                    assert_abs_diff_eq!(t.get(i, l), 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn linear_center_first_order_field() {
        let mut p = FourZoneParams::zeros(1);
        p.a[0] = [0.3, -1.2, 0.8, 2.0];
        p.b[0] = [1.1, 0.4, -0.7, 0.2];
        let inst = build_example(ExampleId::LinearCenter4z, &ExampleParams::FourZone(p.clone())).unwrap();
        for j in 0..4 {
            let theta = 0.2 + j as f64 * FRAC_PI_2 + 0.9;
            let r = 0.8;
            let t = inst.standard().coefficients(j, theta, r, 1, 0).unwrap();
            let expect = p.a[0][j] * r * theta.cos().powi(2) + p.b[0][j] * theta.cos();
            assert_abs_diff_eq!(t.get(1, 0), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_center_standard_form() {
        let inst = build_example(
            ExampleId::ConstantCenter4z,
            &ExampleParams::FourZone(FourZoneParams::zeros(1)),
        )
        .unwrap();
        let centers = [(-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (1.0, 1.0)];
        for (j, &(cx, cy)) in centers.iter().enumerate() {
            let v = inst.planar().velocity(j, 0.3, -0.2, 0.0).unwrap();
            assert_eq!(v, [cx, cy]);
        }
        let g = |j: usize, t: f64| {
            let (s, c) = t.sin_cos();
            match j {
                0 => (s - c, s + c),
                1 => (-(s + c), s - c),
                2 => (c - s, -(s + c)),
                _ => (s + c, c - s),
            }
        };
        for j in 0..4 {
            for m in 0..=10 {
                let theta = j as f64 * FRAC_PI_2 + FRAC_PI_2 * m as f64 / 10.0;
                let r = 1.7;
                let (gj, ghat) = g(j, theta);
                let t = inst.standard().coefficients(j, theta, r, 0, 1).unwrap();
                assert_abs_diff_eq!(t.get(0, 0), r * gj / ghat, epsilon = 1e-12);
                assert_abs_diff_eq!(t.get(0, 1), gj / ghat, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_closed_form_matches_transformer() {
        let p = NZoneParams {
            n: 3,
            a: vec![0.7, -1.1, 0.4],
            b: vec![0.2, 0.9, -0.5],
            c: vec![-0.3, 0.6, 1.2],
        };
        let inst = build_example(ExampleId::QuadraticIsochronousNz, &ExampleParams::NZone(p)).unwrap();
        let polar = inst.polar_system(1).unwrap();
        for j in 0..3 {
            let (a0, a1) = inst.standard().partition().bounds(j);
            for m in 0..=8 {
                let theta = a0 + (a1 - a0) * m as f64 / 8.0;
                for &r in &[0.05, 0.3, 0.6, 0.9] {
                    let d = inst.standard().coefficients(j, theta, r, 1, 1).unwrap();
                    let t = polar.coefficients(j, theta, r, 1, 1).unwrap();
                    assert_abs_diff_eq!(d.get(1, 0), t.get(1, 0), epsilon = 1e-12);
                    assert_abs_diff_eq!(d.get(1, 1), t.get(1, 1), epsilon = 1e-11);
                    assert_abs_diff_eq!(t.get(0, 0), 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn reference_values() {
        let mut p = FourZoneParams::zeros(1);
        p.a[0] = [4.0, 0.0, 0.0, 0.0];
        let v = reference_f1(ExampleId::LinearCenter4z, &ExampleParams::FourZone(p), 1.0).unwrap();
        assert_abs_diff_eq!(v, PI, epsilon = 1e-15);
        let two = ExampleParams::NZone(NZoneParams {
            n: 2,
            a: vec![0.0; 2],
            b: vec![1.0; 2],
            c: vec![0.0; 2],
        });
        assert_abs_diff_eq!(
            reference_f1(ExampleId::QuadraticIsochronousNz, &two, 1.0).unwrap(),
            PI,
            epsilon = 1e-14
        );
        let zero = ExampleParams::FourZone(FourZoneParams::zeros(1));
        assert_eq!(reference_f1(ExampleId::LinearCenter4z, &zero, 0.7).unwrap(), 0.0);
        let far = ExampleParams::NZone(NZoneParams {
            n: 4,
            a: vec![1.0; 4],
            b: vec![0.0; 4],
            c: vec![0.0; 4],
        });
        assert!(reference_f1(ExampleId::QuadraticIsochronousNz, &far, 1.2).is_err());
    }

    #[test]
    fn even_n_has_vanishing_log_term() {
        for n in [2usize, 4, 6, 8, 10, 12] {
            for m in 0..20 {
                let r = 0.05 + 0.85 * m as f64 / 19.0;
                assert!(log_basis(n, 1 + n / 2, r).unwrap().abs() < 1e-14);
            }
        }
        assert!(log_basis(5, 3, 0.5).unwrap().abs() > 1e-3);
    }

    #[test]
    fn prescribed_zeros_are_zeros() {
        let targets = [0.2, 0.45, 0.7];
        let p = three_zero_parameters(&targets);
        let params = ExampleParams::NZone(p);
        for &r in &targets {
            let v = reference_f1(ExampleId::QuadraticIsochronousNz, &params, r).unwrap();
            assert!(v.abs() < 1e-12, "f1({r}) = {v}");
        }
        let scale = reference_f1(ExampleId::QuadraticIsochronousNz, &params, 0.85)
            .unwrap()
            .abs();
        assert!(scale > 1e-3);
    }

    #[test]
    fn f2_requires_the_constraints() {
        let p = ExampleParams::FourZone(FourZoneParams::unit_root());
        assert!(reference_f2(ExampleId::LinearCenter4z, &p, 1.0).is_err());
    }

    #[test]
    fn first_order_matches_reference_on_defaults() {
        let tol = Tolerances::default();
        for id in ExampleId::ALL {
            let inst = build_example(id, &ExampleParams::default_for(id)).unwrap();
            for &rho in &[0.2, 0.5, 0.8] {
                let v = averaged(inst.standard(), 1, rho, tol).unwrap();
                assert_abs_diff_eq!(v, inst.reference_f1(rho).unwrap(), epsilon = 1e-8);
            }
        }
    }
}
