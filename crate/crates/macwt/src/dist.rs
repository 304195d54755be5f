//! Dense joint probability tables and exact entropy arithmetic.
//!
//! Everything downstream (information terms, rate regions, leakage audits)
//! reduces to entropies of marginals of a dense row-major table, so this
//! module is deliberately small and exact: no sampling, no approximations
//! beyond f64, base-2 logarithms throughout.

use crate::error::{Error, Result};

/// Probabilities at or below this are treated as structural zeros:
/// they contribute nothing to entropies and never produce NaN via 0*log(0).
pub const STRUCTURAL_ZERO: f64 = 1e-15;

/// Hard ceiling on the number of states any dense enumeration may touch.
pub const ENUMERATION_GUARD: u128 = 1 << 24;

/// Checks a dense state count against [`ENUMERATION_GUARD`].
pub fn guard_support(support: u128) -> Result<()> {
    if support > ENUMERATION_GUARD {
        Err(Error::CapacityExceeded { support, limit: ENUMERATION_GUARD })
    } else {
        Ok(())
    }
}

/// A joint distribution over a tuple of finite variables, stored dense in
/// row-major order (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl ProbTable {
    /// Wraps a dense table, checking shape, nonnegativity and normalization.
    pub fn new(dims: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidModel("zero-size axis".into()));
        }
        if p.len() != total {
            return Err(Error::InvalidModel(format!(
                "table has {} entries, dims imply {}",
                p.len(),
                total
            )));
        }
        if p.iter().any(|&v| v < -STRUCTURAL_ZERO || !v.is_finite()) {
            return Err(Error::InvalidModel("negative or non-finite probability".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("table sums to {sum}, not 1")));
        }
        Ok(Self { dims, p })
    }

    /// Builds a table of the given shape from a function of the multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let total: usize = dims.iter().product();
        guard_support(total as u128)?;
        let mut idx = vec![0usize; dims.len()];
        let mut p = Vec::with_capacity(total);
        for _ in 0..total {
            p.push(f(&idx));
            // row-major increment, last axis fastest
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::new(dims, p)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Marginal over the kept axes, in the order given.
    pub fn marginal(&self, keep: &[usize]) -> ProbTable {
        for &ax in keep {
            assert!(ax < self.dims.len(), "axis {ax} out of range");
        }
        let out_dims: Vec<usize> = keep.iter().map(|&ax| self.dims[ax]).collect();
        let out_total: usize = out_dims.iter().product();
        let mut out = vec![0.0f64; out_total];
        let mut idx = vec![0usize; self.dims.len()];
        for &v in &self.p {
            let mut flat = 0usize;
            for &ax in keep {
                flat = flat * self.dims[ax] + idx[ax];
            }
            out[flat] += v;
            for ax in (0..self.dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        ProbTable { dims: out_dims, p: out }
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.p)
    }

    /// Entropy in bits of the marginal over the given axes.
    pub fn marginal_entropy(&self, axes: &[usize]) -> f64 {
        self.marginal(axes).entropy_bits()
    }

    /// I(A;B) in bits for disjoint axis groups.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> f64 {
        let ab: Vec<usize> = a.iter().chain(b).copied().collect();
        self.marginal_entropy(a) + self.marginal_entropy(b) - self.marginal_entropy(&ab)
    }

    /// I(A;B|C) in bits for pairwise-disjoint axis groups,
    /// computed as H(A,C) + H(B,C) - H(A,B,C) - H(C).
    pub fn conditional_mutual_information(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();
        let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        self.marginal_entropy(&ac) + self.marginal_entropy(&bc)
            - self.marginal_entropy(&abc)
            - self.marginal_entropy(c)
    }
}

/// Entropy in bits of a raw probability slice; entries at or below
/// [`STRUCTURAL_ZERO`] are skipped.
pub fn entropy_bits(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > STRUCTURAL_ZERO {
            h -= v * v.log2();
        }
    }
    h
}
