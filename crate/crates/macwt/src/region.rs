//! Achievable rate pairs: secrecy and capacity pentagons, convex hulls over
//! input grids, and the ramp schedule that governs how fast the keyed
//! second-part rates may grow slot by slot.

use serde::{Deserialize, Serialize};

use crate::channel::{info_terms, InfoTerms, InputDistribution, MacWiretapChannel};
use crate::error::{Error, Result};

/// Turns with cross products below this are treated as collinear, keeping
/// hull vertex lists free of duplicate-in-spirit points.
const COLLINEAR_EPS: f64 = 1e-9;

/// A MAC-style rate region cut out by per-user and sum constraints:
/// { (r1, r2) >= 0 : r1 <= r1_max, r2 <= r2_max, r1 + r2 <= rsum_max }.
///
/// Constructors clip the three bounds to the feasible set, so the stored
/// scalars always satisfy max(r1_max, r2_max) <= rsum_max <= r1_max + r2_max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePentagon {
    pub r1_max: f64,
    pub r2_max: f64,
    pub rsum_max: f64,
}

impl RatePentagon {
    /// Clips raw (already nonnegative) bounds to a consistent pentagon. The
    /// region is the object of interest, not the raw scalars: a sum bound
    /// above r1+r2 is slack, and a per-user bound above the sum bound is
    /// unreachable, so both are lowered.
    pub fn from_bounds(r1: f64, r2: f64, rsum: f64) -> Self {
        debug_assert!(r1 >= 0.0 && r2 >= 0.0 && rsum >= 0.0);
        let rsum_max = rsum.min(r1 + r2);
        Self { r1_max: r1.min(rsum_max), r2_max: r2.min(rsum_max), rsum_max }
    }

    /// Corner points counterclockwise starting at the origin, deduplicated.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let (r1, r2, s) = (self.r1_max, self.r2_max, self.rsum_max);
        let mut v = vec![(0.0, 0.0), (r1, 0.0), (r1, s - r1), (s - r2, r2), (0.0, r2)];
        v.dedup();
        if v.len() > 1 && v.first() == v.last() {
            v.pop();
        }
        v
    }

    pub fn contains(&self, r1: f64, r2: f64, tol: f64) -> bool {
        r1 >= -tol
            && r2 >= -tol
            && r1 <= self.r1_max + tol
            && r2 <= self.r2_max + tol
            && r1 + r2 <= self.rsum_max + tol
    }
}

/// Rates achievable with secrecy: each bound is the Bob-side mutual
/// information minus what Eve learns, floored at zero, then clipped.
pub fn secrecy_pentagon(t: InfoTerms) -> RatePentagon {
    RatePentagon::from_bounds(
        (t.i_x1_y_given_x2 - t.i_x1_z).max(0.0),
        (t.i_x2_y_given_x1 - t.i_x2_z).max(0.0),
        (t.i_x12_y - t.i_x1_z - t.i_x2_z).max(0.0),
    )
}

/// The plain MAC pentagon under the same inputs, ignoring the wiretapper.
pub fn capacity_pentagon(t: InfoTerms) -> RatePentagon {
    RatePentagon::from_bounds(t.i_x1_y_given_x2, t.i_x2_y_given_x1, t.i_x12_y)
}

/// Which family of pentagons a hull is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Secrecy,
    Capacity,
}

/// A convex polygon of achievable rate pairs, vertices counterclockwise
/// starting at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub vertices: Vec<(f64, f64)>,
}

impl RateRegion {
    pub fn contains(&self, p: (f64, f64), tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => {
                let v = self.vertices[0];
                (p.0 - v.0).abs() <= tol && (p.1 - v.1).abs() <= tol
            }
            _ => self.vertices.iter().zip(self.vertices.iter().cycle().skip(1)).all(|(&a, &b)| {
                (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= -tol
            }),
        }
    }
}

/// Convex hull of the union of per-input pentagons over the grid.
///
/// Deterministic for a given grid: vertices are sorted before a monotone
/// chain pass, and collinear boundary points are dropped.
pub fn hull_over_inputs(
    ch: &MacWiretapChannel,
    grid: &[InputDistribution],
    which: RegionKind,
) -> Result<RateRegion> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("input grid is empty".into()));
    }
    let mut pts = Vec::with_capacity(grid.len() * 5);
    for q in grid {
        let t = info_terms(ch, q)?;
        let pent = match which {
            RegionKind::Secrecy => secrecy_pentagon(t),
            RegionKind::Capacity => capacity_pentagon(t),
        };
        pts.extend(pent.vertices());
    }
    Ok(RateRegion { vertices: convex_hull(pts) })
}

/// Monotone chain; output counterclockwise from the lexicographically
/// smallest point (the origin, for regions touching both axes).
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let chain = |iter: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut half: Vec<(f64, f64)> = Vec::new();
        for p in iter {
            while half.len() >= 2 && cross(half[half.len() - 2], half[half.len() - 1], p) <= COLLINEAR_EPS {
                half.pop();
            }
            half.push(p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut pts.iter().copied());
    hull.extend(chain(&mut pts.iter().rev().copied()));
    hull
}

/// Second- and first-part operating rates for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRates {
    pub slot: u64,
    /// Keyed rates in the long second part of the slot.
    pub second_part: (f64, f64),
    /// Fresh wiretap-coded rates in the short first part (constant per
    /// schedule; repeated here so each row is self-contained).
    pub first_part: (f64, f64),
}

/// How fast the keyed second-part rates may ramp toward full capacity while
/// the key buffers fill.
///
/// In slot k the buffer holds at most (k-1) slots of fresh key plus what
/// earlier keyed parts stored, which caps user i at min(k * s_i, c_i) with
/// the pair jointly clipped to min(k * s_sum, c_sum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    /// First slot from which user 1 could run at full individual capacity,
    /// ceil(I(X1;Y|X2) / (I(X1;Y|X2) - I(X1;Z))); None when the user's
    /// secrecy rate is zero and the ramp never lifts off.
    pub lambda1: Option<u64>,
    pub lambda2: Option<u64>,
    /// First slot from which the clipped rate pair is constant; always at
    /// least max(lambda1, lambda2) + 1 because the sum clip binds after the
    /// individual ones release.
    pub lambda_star: u64,
    /// Rates for slots 1 ..= lambda_star + 1; later slots repeat the last.
    pub per_slot: Vec<SlotRates>,
    /// Wiretap-coded rates used in every first part: the secrecy pair
    /// scaled onto the pentagon boundary.
    pub first_part: (f64, f64),
    /// The saturated second-part pair (R1*, R2*).
    pub saturated: (f64, f64),
}

impl RampSchedule {
    /// Second-part rate pair in slot k (1-based); constant past the table.
    pub fn second_part_at(&self, k: u64) -> (f64, f64) {
        assert!(k >= 1, "slots are 1-based");
        match self.per_slot.get(k as usize - 1) {
            Some(r) => r.second_part,
            None => self.saturated,
        }
    }
}

/// Builds the ramp schedule for the given single-letter terms.
pub fn ramp_schedule(t: InfoTerms) -> RampSchedule {
    let sec = secrecy_pentagon(t);
    let cap = capacity_pentagon(t);
    let (s1, s2, ssum) = (sec.r1_max, sec.r2_max, sec.rsum_max);

    // s_i > 0 guarantees the denominator below is positive
    let lambda_of = |c: f64, e: f64, s: f64| (s > 0.0).then(|| (c / (c - e)).ceil() as u64);
    let lambda1 = lambda_of(t.i_x1_y_given_x2, t.i_x1_z, s1);
    let lambda2 = lambda_of(t.i_x2_y_given_x1, t.i_x2_z, s2);

    let pair_at = |k: u64| clipped_pair(k as f64, &sec, &cap);

    // every min() above has released once k clears all three ratios
    let mut k_sat: u64 = 1;
    let mut bump = |c: f64, s: f64| {
        if s > 0.0 {
            k_sat = k_sat.max((c / s).ceil() as u64);
        }
    };
    bump(cap.r1_max, s1);
    bump(cap.r2_max, s2);
    bump(cap.rsum_max, ssum);
    let saturated = pair_at(k_sat);
    let first_constant = (1..=k_sat).find(|&k| pair_at(k) == saturated).unwrap_or(k_sat);
    let lambda_floor = lambda1.iter().chain(&lambda2).max().map_or(0, |&m| m + 1);
    let lambda_star = first_constant.max(lambda_floor).max(1);

    let first_part = {
        let direct = s1 + s2;
        let scale = if direct > ssum { ssum / direct } else { 1.0 };
        (s1 * scale, s2 * scale)
    };

    let per_slot = (1..=lambda_star + 1)
        .map(|k| SlotRates { slot: k, second_part: pair_at(k), first_part })
        .collect();

    RampSchedule { lambda1, lambda2, lambda_star, per_slot, first_part, saturated }
}

/// min(k*s_i, c_i) per user, then the pair is pulled onto the sum budget
/// min(k*s_sum, c_sum). Slack is split in proportion to the unclipped rates
/// k*s_i, i.e. with fixed weights s_i / (s1+s2); weighting by the already
/// clipped rates instead would let a later slot assign user 2 less than an
/// earlier one.
fn clipped_pair(k: f64, sec: &RatePentagon, cap: &RatePentagon) -> (f64, f64) {
    let u1 = (k * sec.r1_max).min(cap.r1_max);
    let u2 = (k * sec.r2_max).min(cap.r2_max);
    let budget = (k * sec.rsum_max).min(cap.rsum_max);
    if u1 + u2 <= budget {
        return (u1, u2);
    }
    // u1 + u2 > budget >= 0 implies s1 + s2 > 0
    let w1 = sec.r1_max / (sec.r1_max + sec.r2_max);
    let r1 = u1.min((budget - u2).max(budget * w1));
    (r1, budget - r1)
}

/// Whole-slot average when the second part is l times as long as the first:
/// (l * second + first) / (l + 1), componentwise.
pub fn slot_average_rate(second: (f64, f64), first: (f64, f64), l: u64) -> (f64, f64) {
    assert!(l >= 1, "second part must be at least as long as the first");
    let lf = l as f64;
    (
        (lf * second.0 + first.0) / (lf + 1.0),
        (lf * second.1 + first.1) / (lf + 1.0),
    )
}
