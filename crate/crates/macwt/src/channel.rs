//! Two-user discrete memoryless multiple-access wiretap channels.
//!
//! A channel is the finite transition law p(y,z | x1,x2): Bob observes y,
//! Eve observes z, and the two senders pick x1, x2 independently. Everything
//! here is exact enumeration over dense tables; the only approximation is
//! f64 arithmetic. Rates are bits per channel use (base-2 logs).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{guard_support, ProbTable};
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Finite-alphabet transition law p(y,z | x1,x2), stored dense in row-major
/// (x1, x2, y, z) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacWiretapChannel {
    pub x1_size: usize,
    pub x2_size: usize,
    pub y_size: usize,
    pub z_size: usize,
    law: Vec<f64>,
}

impl MacWiretapChannel {
    /// Builds a channel from a flat law of length x1·x2·y·z.
    ///
    /// Each (x1,x2) slice must be a probability distribution over (y,z)
    /// within 1e-12.
    pub fn new(
        x1_size: usize,
        x2_size: usize,
        y_size: usize,
        z_size: usize,
        law: Vec<f64>,
    ) -> Result<Self> {
        if x1_size == 0 || x2_size == 0 || y_size == 0 || z_size == 0 {
            return Err(Error::InvalidModel("all alphabet sizes must be >= 1".into()));
        }
        let expect = x1_size * x2_size * y_size * z_size;
        if law.len() != expect {
            return Err(Error::InvalidModel(format!(
                "law has {} entries, alphabet sizes imply {expect}",
                law.len()
            )));
        }
        if law.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidModel("law entries must be finite and nonnegative".into()));
        }
        let ch = Self { x1_size, x2_size, y_size, z_size, law };
        for x1 in 0..x1_size {
            for x2 in 0..x2_size {
                let mut s = 0.0;
                for y in 0..y_size {
                    for z in 0..z_size {
                        s += ch.law(x1, x2, y, z);
                    }
                }
                if (s - 1.0).abs() > SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "law slice at (x1={x1}, x2={x2}) sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(ch)
    }

    /// Builds a channel by evaluating p(y,z|x1,x2) pointwise.
    ///
    /// # Example
    /// ```
    /// use macwt::channel::MacWiretapChannel;
    ///
    /// // noiseless xor to Bob, constant to Eve
    /// let ch = MacWiretapChannel::from_fn(2, 2, 2, 1, |x1, x2, y, _z| {
    ///     if y == x1 ^ x2 { 1.0 } else { 0.0 }
    /// }).unwrap();
    /// assert_eq!(ch.law(0, 1, 1, 0), 1.0);
    /// ```
    pub fn from_fn(
        x1_size: usize,
        x2_size: usize,
        y_size: usize,
        z_size: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut law = Vec::with_capacity(x1_size * x2_size * y_size * z_size);
        for x1 in 0..x1_size {
            for x2 in 0..x2_size {
                for y in 0..y_size {
                    for z in 0..z_size {
                        law.push(f(x1, x2, y, z));
                    }
                }
            }
        }
        Self::new(x1_size, x2_size, y_size, z_size, law)
    }

    /// Loads and validates a channel from its JSON form: integer fields
    /// `x1_size`, `x2_size`, `y_size`, `z_size` and a flat `law` array in
    /// row-major (x1, x2, y, z) order.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MacWiretapChannel = serde_json::from_str(s)?;
        Self::new(raw.x1_size, raw.x2_size, raw.y_size, raw.z_size, raw.law)
    }

    /// Loads a channel from a JSON file. See [`Self::from_json_str`].
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    #[inline]
    pub fn law(&self, x1: usize, x2: usize, y: usize, z: usize) -> f64 {
        self.law[((x1 * self.x2_size + x2) * self.y_size + y) * self.z_size + z]
    }

    /// p(y | x1, x2), marginalized over Eve's output.
    pub fn y_law(&self, x1: usize, x2: usize, y: usize) -> f64 {
        (0..self.z_size).map(|z| self.law(x1, x2, y, z)).sum()
    }

    /// p(z | x1, x2), marginalized over Bob's output.
    pub fn z_law(&self, x1: usize, x2: usize, z: usize) -> f64 {
        (0..self.y_size).map(|y| self.law(x1, x2, y, z)).sum()
    }

    /// Number of dense joint states (x1, x2, y, z).
    pub fn support(&self) -> u128 {
        self.x1_size as u128 * self.x2_size as u128 * self.y_size as u128 * self.z_size as u128
    }

    /// The n-fold memoryless extension: alphabets become length-n sequences
    /// and the law becomes the per-use product.
    ///
    /// Sequences are encoded as integers with the first channel use in the
    /// most significant digit. Fails with a capacity error when the extended
    /// joint support would exceed the dense enumeration guard.
    pub fn product_extension(&self, n: u32) -> Result<MacWiretapChannel> {
        if n == 0 {
            return Err(Error::InvalidArgument("extension length must be >= 1".into()));
        }
        let support = self
            .support()
            .checked_pow(n)
            .ok_or(Error::CapacityExceeded { support: u128::MAX, limit: crate::dist::ENUMERATION_GUARD })?;
        guard_support(support)?;
        if n == 1 {
            return Ok(self.clone());
        }
        let pow = |base: usize| (base as u64).pow(n) as usize;
        let (sx1, sx2, sy, sz) = (pow(self.x1_size), pow(self.x2_size), pow(self.y_size), pow(self.z_size));
        let digits = |mut v: usize, base: usize| {
            let mut out = vec![0usize; n as usize];
            for slot in (0..n as usize).rev() {
                out[slot] = v % base;
                v /= base;
            }
            out
        };
        let mut law = Vec::with_capacity(sx1 * sx2 * sy * sz);
        for a1 in 0..sx1 {
            let d1 = digits(a1, self.x1_size);
            for a2 in 0..sx2 {
                let d2 = digits(a2, self.x2_size);
                for b in 0..sy {
                    let dy = digits(b, self.y_size);
                    for c in 0..sz {
                        let dz = digits(c, self.z_size);
                        let mut p = 1.0;
                        for t in 0..n as usize {
                            p *= self.law(d1[t], d2[t], dy[t], dz[t]);
                        }
                        law.push(p);
                    }
                }
            }
        }
        MacWiretapChannel::new(sx1, sx2, sy, sz, law)
    }
}

/// Independent per-user input distributions; the joint input law is always
/// the product p1 × p2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl InputDistribution {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        for (name, p) in [("p1", &p1), ("p2", &p2)] {
            if p.is_empty() {
                return Err(Error::InvalidModel(format!("{name} is empty")));
            }
            if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} has a negative entry")));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidModel(format!("{name} sums to {s}, not 1")));
            }
        }
        Ok(Self { p1, p2 })
    }

    /// Uniform inputs for the given channel.
    pub fn uniform(ch: &MacWiretapChannel) -> Self {
        Self {
            p1: vec![1.0 / ch.x1_size as f64; ch.x1_size],
            p2: vec![1.0 / ch.x2_size as f64; ch.x2_size],
        }
    }

    fn matches(&self, ch: &MacWiretapChannel) -> Result<()> {
        if self.p1.len() != ch.x1_size || self.p2.len() != ch.x2_size {
            return Err(Error::InvalidArgument(format!(
                "input distribution over {}x{} letters does not fit channel alphabets {}x{}",
                self.p1.len(),
                self.p2.len(),
                ch.x1_size,
                ch.x2_size
            )));
        }
        Ok(())
    }
}

/// All probability vectors of the given length whose entries are multiples
/// of 1/(steps-1), in lexicographic order. `steps = 2` gives the corners.
pub fn simplex_grid(len: usize, steps: usize) -> Vec<Vec<f64>> {
    assert!(len >= 1 && steps >= 2, "need len >= 1 and steps >= 2");
    let denom = (steps - 1) as f64;
    let mut out = Vec::new();
    let mut counts = vec![0usize; len];
    fn rec(counts: &mut Vec<usize>, slot: usize, left: usize, denom: f64, out: &mut Vec<Vec<f64>>) {
        if slot + 1 == counts.len() {
            counts[slot] = left;
            out.push(counts.iter().map(|&c| c as f64 / denom).collect());
            return;
        }
        for take in 0..=left {
            counts[slot] = take;
            rec(counts, slot + 1, left - take, denom, out);
        }
    }
    rec(&mut counts, 0, steps - 1, denom, &mut out);
    out
}

/// The product lattice of per-user simplex grids, the default search grid
/// for hulls (11 steps per binary user unless a scenario overrides it).
pub fn input_grid(ch: &MacWiretapChannel, steps: usize) -> Vec<InputDistribution> {
    let g1 = simplex_grid(ch.x1_size, steps);
    let g2 = simplex_grid(ch.x2_size, steps);
    let mut out = Vec::with_capacity(g1.len() * g2.len());
    for p1 in &g1 {
        for p2 in &g2 {
            out.push(InputDistribution { p1: p1.clone(), p2: p2.clone() });
        }
    }
    out
}

/// The five single-letter information quantities that drive every rate
/// region in this crate, in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoTerms {
    /// I(X1; Y | X2)
    pub i_x1_y_given_x2: f64,
    /// I(X2; Y | X1)
    pub i_x2_y_given_x1: f64,
    /// I(X1, X2; Y)
    pub i_x12_y: f64,
    /// I(X1; Z)
    pub i_x1_z: f64,
    /// I(X2; Z)
    pub i_x2_z: f64,
}

/// Exact joint distribution p(x1)p(x2)p(y,z|x1,x2) as a dense table with
/// axes (x1, x2, y, z).
pub fn marginals(ch: &MacWiretapChannel, q: &InputDistribution) -> Result<ProbTable> {
    q.matches(ch)?;
    ProbTable::from_fn(vec![ch.x1_size, ch.x2_size, ch.y_size, ch.z_size], |ix| {
        q.p1[ix[0]] * q.p2[ix[1]] * ch.law(ix[0], ix[1], ix[2], ix[3])
    })
}

/// Exact mutual-information terms for the channel under the given inputs.
pub fn info_terms(ch: &MacWiretapChannel, q: &InputDistribution) -> Result<InfoTerms> {
    let joint = marginals(ch, q)?;
    const X1: &[usize] = &[0];
    const X2: &[usize] = &[1];
    const Y: &[usize] = &[2];
    const Z: &[usize] = &[3];
    // tiny negative round-off is clamped; true MI is nonnegative
    let pos = |v: f64| v.max(0.0);
    Ok(InfoTerms {
        i_x1_y_given_x2: pos(joint.conditional_mutual_information(X1, Y, X2)),
        i_x2_y_given_x1: pos(joint.conditional_mutual_information(X2, Y, X1)),
        i_x12_y: pos(joint.mutual_information(&[0, 1], Y)),
        i_x1_z: pos(joint.mutual_information(X1, Z)),
        i_x2_z: pos(joint.mutual_information(X2, Z)),
    })
}
