//! The slotted key-recycling state machine.
//!
//! Each slot has n1 + n2 channel uses. The short first part carries fresh
//! wiretap-coded bits; the long second part carries bits one-time-padded
//! with key drawn from a per-user buffer. Everything a user transmits in a
//! slot is banked as future key, so the buffer grows by the wiretap surplus
//! every slot and the padded rate can climb to full capacity.
//!
//! Key is consumed oldest-first under a protected window: once any buffered
//! segment is at least `window + 1` slots old, only such segments may be
//! spent. Younger buffers fall back to spending their newest slots the way
//! the ramp-up argument does, and the run records the first slot from which
//! the strict window held.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::RampSchedule;

/// Slot geometry and policy knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    /// Channel uses in the first (fresh wiretap) part.
    pub n1: u64,
    /// Second part is l times as long as the first.
    pub l: u64,
    /// Channel uses in the second (keyed) part; always l * n1.
    pub n2: u64,
    /// Leakage budget per first part, in bits.
    pub epsilon: f64,
    /// Slots a stored segment must age before it may be spent as key.
    pub window: u64,
}

impl SlotConfig {
    pub fn new(n1: u64, l: u64, epsilon: f64, window: u64) -> Result<Self> {
        if n1 == 0 || l == 0 {
            return Err(Error::InvalidModel("n1 and l must be positive".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidModel("epsilon must be positive".into()));
        }
        Ok(Self { n1, l, n2: l * n1, epsilon, window })
    }
}

/// A run of key bits banked in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySegment {
    pub origin_slot: u64,
    pub bits: u64,
}

/// One user's key buffer: segments in FIFO order, strictly increasing
/// origin, total tracked exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyBufferState {
    segments: VecDeque<KeySegment>,
    total_bits: u64,
}

impl KeyBufferState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn segments(&self) -> impl Iterator<Item = &KeySegment> {
        self.segments.iter()
    }

    /// Newest origin a consumer at `slot` may touch under the window rule,
    /// or None while no buffered segment is old enough (bootstrap phase:
    /// everything is spendable).
    fn cutoff(&self, slot: u64, window: u64) -> Option<u64> {
        let cut = slot.checked_sub(window + 1)?;
        self.segments.front().filter(|s| s.origin_slot <= cut).map(|_| cut)
    }

    /// Bits spendable at `slot` under the window rule.
    pub fn eligible_bits(&self, slot: u64, window: u64) -> u64 {
        match self.cutoff(slot, window) {
            Some(cut) => self
                .segments
                .iter()
                .take_while(|s| s.origin_slot <= cut)
                .map(|s| s.bits)
                .sum(),
            None => self.total_bits,
        }
    }

    fn store(&mut self, seg: KeySegment) {
        debug_assert!(seg.bits >= 1);
        debug_assert!(self.segments.back().is_none_or(|b| b.origin_slot < seg.origin_slot));
        self.total_bits += seg.bits;
        self.segments.push_back(seg);
    }

    /// Removes `bits` oldest-first, never touching origins past `cutoff`.
    /// Returns the origins drawn from, ascending.
    fn consume(&mut self, bits: u64, cutoff: Option<u64>) -> Result<Vec<u64>> {
        let mut origins = Vec::new();
        let mut left = bits;
        while left > 0 {
            let Some(front) = self.segments.front_mut() else {
                return Err(Error::Protocol(format!("key buffer short by {left} bits")));
            };
            if cutoff.is_some_and(|c| front.origin_slot > c) {
                return Err(Error::Protocol(format!(
                    "key request reaches origin {} past the window cutoff {}",
                    front.origin_slot,
                    cutoff.unwrap()
                )));
            }
            origins.push(front.origin_slot);
            let take = front.bits.min(left);
            front.bits -= take;
            self.total_bits -= take;
            left -= take;
            if front.bits == 0 {
                self.segments.pop_front();
            }
        }
        Ok(origins)
    }
}

/// What each user sends in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPlan {
    pub wiretap_bits: u64,
    pub keyed_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub slot: u64,
    pub users: [UserPlan; 2],
}

/// Everything one user did in one slot, plus the buffer level after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    /// 1 or 2.
    pub user: u8,
    pub wiretap_bits: u64,
    pub keyed_bits: u64,
    /// Key bits removed from the buffer; equals keyed_bits (one pad bit
    /// per message bit).
    pub key_consumed: u64,
    /// Bits banked for later slots: everything transmitted this slot.
    pub key_stored: u64,
    /// Origins the consumed key came from, ascending.
    pub key_origins: Vec<u64>,
    pub buffer_after: u64,
}

impl SlotRecord {
    pub fn oldest_origin_used(&self) -> Option<u64> {
        self.key_origins.first().copied()
    }

    pub fn newest_origin_used(&self) -> Option<u64> {
        self.key_origins.last().copied()
    }
}

/// Live protocol session: per-user buffers plus the fixed per-slot targets
/// derived from a ramp schedule.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    cfg: SlotConfig,
    /// Next slot to run, 1-based.
    slot: u64,
    buffers: [KeyBufferState; 2],
    /// Fresh wiretap bits per first part: floor(n1 * first-part rate).
    wiretap_bits: [u64; 2],
    /// Keyed-bit demand per second part: floor(n2 * saturated rate).
    demand_bits: [u64; 2],
}

impl ProtocolState {
    /// A session at slot 1 with empty buffers and no standing bit targets,
    /// for callers that compose their own per-slot plans (fading demand
    /// varies with the channel draw).
    pub fn open(cfg: &SlotConfig) -> Self {
        Self {
            cfg: *cfg,
            slot: 1,
            buffers: [KeyBufferState::new(), KeyBufferState::new()],
            wiretap_bits: [0, 0],
            demand_bits: [0, 0],
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn buffer(&self, user: usize) -> &KeyBufferState {
        &self.buffers[user]
    }

    pub fn config(&self) -> &SlotConfig {
        &self.cfg
    }
}

/// Opens a session with empty buffers at slot 1. Bit targets are floored
/// from the schedule's rates: buffers hold whole bits.
pub fn init_protocol(cfg: &SlotConfig, rates: &RampSchedule) -> ProtocolState {
    let floor_bits = |uses: u64, rate: f64| (uses as f64 * rate).floor() as u64;
    let mut state = ProtocolState::open(cfg);
    state.wiretap_bits = [
        floor_bits(cfg.n1, rates.first_part.0),
        floor_bits(cfg.n1, rates.first_part.1),
    ];
    state.demand_bits = [
        floor_bits(cfg.n2, rates.saturated.0),
        floor_bits(cfg.n2, rates.saturated.1),
    ];
    state
}

/// Plans the upcoming slot: full wiretap load in part 1, and in part 2 as
/// many keyed bits as demand and the spendable buffer allow. Never plans
/// more than `advance_slot` can honor.
pub fn plan_slot(state: &ProtocolState) -> SlotPlan {
    let k = state.slot;
    let users = [0, 1].map(|u| UserPlan {
        wiretap_bits: state.wiretap_bits[u],
        keyed_bits: state.demand_bits[u].min(state.buffers[u].eligible_bits(k, state.cfg.window)),
    });
    SlotPlan { slot: k, users }
}

/// Executes a plan: consumes key oldest-first under the window rule, banks
/// everything transmitted as a new segment, advances the slot counter.
///
/// Errors (leaving the state untouched) if the plan asks for more key than
/// is eligible, which `plan_slot` never does.
pub fn advance_slot(state: &mut ProtocolState, plan: &SlotPlan) -> Result<[SlotRecord; 2]> {
    let k = state.slot;
    if plan.slot != k {
        return Err(Error::Protocol(format!("plan for slot {} executed at slot {k}", plan.slot)));
    }
    for u in 0..2 {
        let eligible = state.buffers[u].eligible_bits(k, state.cfg.window);
        if plan.users[u].keyed_bits > eligible {
            return Err(Error::Protocol(format!(
                "slot {k} user {}: {} keyed bits requested, {eligible} eligible",
                u + 1,
                plan.users[u].keyed_bits
            )));
        }
    }
    let records = [0, 1].map(|u| {
        let UserPlan { wiretap_bits, keyed_bits } = plan.users[u];
        let buf = &mut state.buffers[u];
        let cutoff = buf.cutoff(k, state.cfg.window);
        // both checked above; consume cannot fail now
        let key_origins = buf.consume(keyed_bits, cutoff).expect("plan was validated");
        let key_stored = wiretap_bits + keyed_bits;
        if key_stored > 0 {
            buf.store(KeySegment { origin_slot: k, bits: key_stored });
        }
        SlotRecord {
            slot: k,
            user: u as u8 + 1,
            wiretap_bits,
            keyed_bits,
            key_consumed: keyed_bits,
            key_stored,
            key_origins,
            buffer_after: buf.total_bits(),
        }
    });
    state.slot += 1;
    Ok(records)
}

/// A full deterministic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    /// Two records per slot, user 1 then user 2.
    pub records: Vec<SlotRecord>,
    /// Buffer totals after each slot.
    pub buffer_trajectory: Vec<(u64, u64)>,
    /// First slot from which every consumed segment respected the window,
    /// None if a violation happened too close to the horizon to tell.
    pub window_holds_from: Option<u64>,
    /// Keyed bits per second-part use, averaged over the horizon.
    pub avg_keyed_rate: (f64, f64),
    /// All bits per channel use, averaged over the horizon.
    pub avg_slot_rate: (f64, f64),
}

/// Runs `horizon` slots from a fresh session.
pub fn run_protocol(cfg: &SlotConfig, rates: &RampSchedule, horizon: u64) -> Result<ProtocolRun> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1 slot".into()));
    }
    let mut state = init_protocol(cfg, rates);
    let mut records = Vec::with_capacity(2 * horizon as usize);
    let mut buffer_trajectory = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let plan = plan_slot(&state);
        let recs = advance_slot(&mut state, &plan)?;
        buffer_trajectory.push((recs[0].buffer_after, recs[1].buffer_after));
        records.extend(recs);
    }

    // last slot whose consumption reached into the protected window; the
    // clean suffix starts right after it
    let last_violation = records
        .iter()
        .filter(|r| r.newest_origin_used().is_some_and(|o| o + cfg.window + 1 > r.slot))
        .map(|r| r.slot)
        .max();
    let window_holds_from = match last_violation {
        None => Some(1),
        Some(v) if v < horizon => Some(v + 1),
        Some(_) => None,
    };

    let mut keyed = [0u64; 2];
    let mut total = [0u64; 2];
    for r in &records {
        let u = (r.user - 1) as usize;
        keyed[u] += r.keyed_bits;
        total[u] += r.wiretap_bits + r.keyed_bits;
    }
    let kf = horizon as f64;
    let avg_keyed_rate = (
        keyed[0] as f64 / (kf * cfg.n2 as f64),
        keyed[1] as f64 / (kf * cfg.n2 as f64),
    );
    let uses = kf * (cfg.n1 + cfg.n2) as f64;
    let avg_slot_rate = (total[0] as f64 / uses, total[1] as f64 / uses);

    Ok(ProtocolRun { records, buffer_trajectory, window_holds_from, avg_keyed_rate, avg_slot_rate })
}
