//! Index sets `S_l` of Faà di Bruno's formula and partial Bell polynomials.
//!
//! `S_l` is the set of tuples `(b_1,…,b_l)` of non-negative integers with
//! `b_1 + 2 b_2 + … + l b_l = l`; `L = b_1 + … + b_l`. Enumerations are
//! memoized per `l` and shared read-only afterwards.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest order for which factorials and index sets are tabulated.
pub const MAX_ORDER: usize = 12;

const FACTORIALS: [u64; MAX_ORDER + 1] = {
    let mut t = [1u64; MAX_ORDER + 1];
    let mut i = 1;
    while i <= MAX_ORDER {
        t[i] = t[i - 1] * i as u64;
        i += 1;
    }
    t
};

/// Exact `n!` for `n <= MAX_ORDER`.
pub fn factorial(n: usize) -> Result<u64> {
    FACTORIALS.get(n).copied().ok_or(Error::OrderTooLarge {
        order: n,
        max: MAX_ORDER,
    })
}

pub(crate) fn factorial_f64(n: usize) -> f64 {
    FACTORIALS[n] as f64
}

/// One element of `S_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTuple {
    b: Vec<u32>,
    big_l: usize,
    /// `1 / (b_1! · b_2! 2!^{b_2} ⋯ b_l! l!^{b_l})`
    weight: f64,
}

impl PartitionTuple {
    fn new(b: Vec<u32>) -> Self {
        let big_l = b.iter().map(|&x| x as usize).sum();
        let mut denom = 1.0;
        for (idx, &bm) in b.iter().enumerate() {
            let m = idx + 1;
            denom *= factorial_f64(bm as usize) * factorial_f64(m).powi(bm as i32);
        }
        PartitionTuple {
            b,
            big_l,
            weight: 1.0 / denom,
        }
    }

    pub fn b(&self) -> &[u32] {
        &self.b
    }

    pub fn l(&self) -> usize {
        self.b.len()
    }

    /// Total multiplicity `L = b_1 + … + b_l`, the derivative order it selects.
    pub fn big_l(&self) -> usize {
        self.big_l
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `Π_m x_m^{b_m}` with `x[0] = x_1`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.b
            .iter()
            .zip(x)
            .filter(|(&bm, _)| bm > 0)
            .map(|(&bm, &xm)| xm.powi(bm as i32))
            .product()
    }
}

fn enumerate_uncached(l: usize) -> Vec<PartitionTuple> {
    // Depth-first over b_1, b_2, … with b_1 descending first, which yields
    // lexicographically descending tuples.
    fn rec(m: usize, l: usize, remaining: usize, cur: &mut Vec<u32>, out: &mut Vec<PartitionTuple>) {
        if m > l {
            if remaining == 0 {
                out.push(PartitionTuple::new(cur.clone()));
            }
            return;
        }
        let max_b = remaining / m;
        for bm in (0..=max_b).rev() {
            cur.push(bm as u32);
            rec(m + 1, l, remaining - bm * m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, l, l, &mut Vec::with_capacity(l), &mut out);
    out
}

static TABLES: [OnceLock<Vec<PartitionTuple>>; MAX_ORDER] = [const { OnceLock::new() }; MAX_ORDER];

/// All tuples of `S_l` in lexicographically descending order.
pub fn enumerate_s(l: usize) -> Result<&'static [PartitionTuple]> {
    if l == 0 {
        return Err(Error::InvalidArgument("index set S_l needs l >= 1".into()));
    }
    if l > MAX_ORDER {
        return Err(Error::OrderTooLarge {
            order: l,
            max: MAX_ORDER,
        });
    }
    Ok(TABLES[l - 1].get_or_init(|| enumerate_uncached(l)))
}

/// Partial Bell polynomial `B_{p,q}(x_1, …, x_{p−q+1})`.
pub fn bell_partial(p: usize, q: usize, x: &[f64]) -> Result<f64> {
    if q < 1 || q > p {
        return Err(Error::InvalidArgument(format!(
            "partial Bell polynomial needs 1 <= q <= p, got p={p}, q={q}"
        )));
    }
    let width = p - q + 1;
    if x.len() != width {
        return Err(Error::InvalidArgument(format!(
            "B_{{{p},{q}}} takes {width} arguments, got {}",
            x.len()
        )));
    }
    let pf = factorial(p)?;
    // p!/(b_1!⋯ b_w! 1!^{b_1}⋯ w!^{b_w}) is an integer; keep it exact
    let total = enumerate_s(p)?
        .iter()
        .filter(|t| t.big_l() == q)
        .map(|t| {
            let mut denom = 1u64;
            let mut mono = 1.0;
            for (j, &bj) in t.b()[..width].iter().enumerate() {
                if bj > 0 {
                    denom *= FACTORIALS[bj as usize] * FACTORIALS[j + 1].pow(bj);
                    mono *= x[j].powi(bj as i32);
                }
            }
            (pf / denom) as f64 * mono
        })
        .sum();
    Ok(total)
}

/// `d^l/dα^l g(h(α))` from the derivatives `g^{(L)}(h)` (index L, with
/// `g_derivs[0] = g(h)`) and `h^{(j)}` (`h_derivs[0] = h'`).
pub fn faa_di_bruno(l: usize, g_derivs: &[f64], h_derivs: &[f64]) -> Result<f64> {
    let lf = factorial(l)? as f64;
    Ok(enumerate_s(l)?
        .iter()
        .map(|t| lf * t.weight() * g_derivs[t.big_l()] * t.monomial(h_derivs))
        .sum())
}
