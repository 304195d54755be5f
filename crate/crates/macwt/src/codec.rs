//! Desk-scale coding primitives and the exact leakage auditor.
//!
//! Two encoders appear throughout: random binning (many codewords per
//! message; the surplus "confusion" randomness saturates the wiretapper's
//! channel) for the fresh part of a slot, and bitwise XOR with buffered key
//! for the long part. The auditor measures what an eavesdropper actually
//! learns about chosen messages by exact enumeration over messages,
//! confusion indices, keys, and channel noise, no sampling anywhere, so a
//! reported leakage of zero is a theorem about the instance, not an estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{info_terms, InputDistribution, MacWiretapChannel};
use crate::dist::{guard_support, ProbTable};
use crate::error::{Error, Result};

/// A random binning table: 2^message_bits bins of 2^confusion_bits rows,
/// each row a length-n sequence drawn i.i.d. from the user's input
/// distribution by a seeded generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningCodebook {
    /// 1 or 2.
    pub user: u8,
    /// Blocklength in channel uses.
    pub n: u32,
    pub message_bits: u32,
    pub confusion_bits: u32,
    /// Seed the table was drawn from; same seed, same table.
    pub seed: u64,
    /// The user's input alphabet size.
    pub alphabet: u16,
    /// Row-major (message, confusion) -> n symbols.
    codewords: Vec<u8>,
}

const CODEBOOK_MAGIC: &[u8; 4] = b"bwcb";

impl BinningCodebook {
    pub fn rows(&self) -> u64 {
        1u64 << (self.message_bits + self.confusion_bits)
    }

    pub fn messages(&self) -> u64 {
        1u64 << self.message_bits
    }

    pub fn confusions(&self) -> u64 {
        1u64 << self.confusion_bits
    }

    /// The stored sequence for (message, confusion).
    pub fn codeword(&self, message: u64, confusion: u64) -> Result<&[u8]> {
        if message >= self.messages() || confusion >= self.confusions() {
            return Err(Error::InvalidArgument(format!(
                "codeword index ({message}, {confusion}) out of range for a {}x{} table",
                self.messages(),
                self.confusions()
            )));
        }
        let row = ((message << self.confusion_bits) | confusion) as usize;
        let n = self.n as usize;
        Ok(&self.codewords[row * n..(row + 1) * n])
    }

    /// Flat binary form: a fixed header with the dimensions, then the
    /// symbol bytes row-major. Stable across versions of this crate.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 1 + 1 + 2 + 4 + 4 + 4 + 8 + self.codewords.len());
        out.extend_from_slice(CODEBOOK_MAGIC);
        out.push(1u8);
        out.push(self.user);
        out.extend_from_slice(&self.alphabet.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.message_bits.to_le_bytes());
        out.extend_from_slice(&self.confusion_bits.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.codewords);
        out
    }

    /// Parses [`Self::to_bytes`] output. Checks structure (dimensions,
    /// symbol range); the rate-vs-channel sanity of [`build_codebook`]
    /// cannot be rechecked here and is the producer's responsibility.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |why: &str| Error::InvalidModel(format!("codebook blob: {why}"));
        if bytes.len() < 28 {
            return Err(fail("truncated header"));
        }
        if &bytes[0..4] != CODEBOOK_MAGIC {
            return Err(fail("bad magic"));
        }
        if bytes[4] != 1 {
            return Err(fail("unknown version"));
        }
        let user = bytes[5];
        let alphabet = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let message_bits = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let confusion_bits = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        if !(1..=2).contains(&user) || alphabet < 2 || n == 0 || message_bits + confusion_bits > 32 {
            return Err(fail("implausible dimensions"));
        }
        let rows = 1usize << (message_bits + confusion_bits);
        let expect = rows
            .checked_mul(n as usize)
            .ok_or_else(|| fail("table size overflow"))?;
        if bytes.len() != 28 + expect {
            return Err(fail("payload length does not match dimensions"));
        }
        let codewords = bytes[28..].to_vec();
        if codewords.iter().any(|&s| s as u16 >= alphabet) {
            return Err(fail("symbol outside alphabet"));
        }
        Ok(Self { user, n, message_bits, confusion_bits, seed, alphabet, codewords })
    }
}

/// Draws a fresh binning codebook for one user.
///
/// Sanity at build time: the message rate must not exceed the user's
/// conditional mutual information toward the legitimate receiver under the
/// build distribution, and all 2^(m+c) rows must fit the sequence space.
pub fn build_codebook(
    ch: &MacWiretapChannel,
    q: &InputDistribution,
    user: u8,
    n: u32,
    message_bits: u32,
    confusion_bits: u32,
    seed: u64,
) -> Result<BinningCodebook> {
    if !(1..=2).contains(&user) {
        return Err(Error::InvalidArgument(format!("user must be 1 or 2, got {user}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be >= 1".into()));
    }
    let pmf = if user == 1 { &q.p1 } else { &q.p2 };
    let alphabet = pmf.len();
    if alphabet < 2 || alphabet > 256 {
        return Err(Error::InvalidModel(format!(
            "user {user} alphabet size {alphabet} outside the supported 2..=256"
        )));
    }
    guard_support((alphabet as u128).pow(n))?;
    let log_alpha = (alphabet as f64).log2();
    if (message_bits + confusion_bits) as f64 > n as f64 * log_alpha + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{message_bits}+{confusion_bits} bits do not fit {n} symbols over a {alphabet}-letter alphabet"
        )));
    }
    let t = info_terms(ch, q)?;
    let bob_bound = if user == 1 { t.i_x1_y_given_x2 } else { t.i_x2_y_given_x1 };
    if message_bits as f64 / n as f64 > bob_bound + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "message rate {}/{n} exceeds the receiver-side bound {bob_bound:.6} for user {user}",
            message_bits
        )));
    }

    let rows = 1usize << (message_bits + confusion_bits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codewords = Vec::with_capacity(rows * n as usize);
    for _ in 0..rows {
        for _ in 0..n {
            codewords.push(sample_symbol(pmf, &mut rng));
        }
    }
    Ok(BinningCodebook {
        user,
        n,
        message_bits,
        confusion_bits,
        seed,
        alphabet: alphabet as u16,
        codewords,
    })
}

fn sample_symbol(pmf: &[f64], rng: &mut impl Rng) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    (pmf.len() - 1) as u8
}

/// Stochastic encoder: looks up the row for `message`, drawing the
/// confusion index uniformly when not supplied. Returns the index used and
/// the sequence.
pub fn encode_wiretap<'a>(
    cb: &'a BinningCodebook,
    message: u64,
    randomness: Option<u64>,
    rng: &mut impl Rng,
) -> Result<(u64, &'a [u8])> {
    let confusion = match randomness {
        Some(r) => r,
        None => rng.gen_range(0..cb.confusions()),
    };
    Ok((confusion, cb.codeword(message, confusion)?))
}

/// Bitwise one-time pad: componentwise XOR of two equal-length vectors.
/// Applying it twice with the same key returns the message.
pub fn encode_keyed(message: &[u8], key: &[u8]) -> Result<Vec<u8>> {
    if message.len() != key.len() {
        return Err(Error::InvalidArgument(format!(
            "message has {} symbols, key {}",
            message.len(),
            key.len()
        )));
    }
    Ok(message.iter().zip(key).map(|(&m, &k)| m ^ k).collect())
}

/// Maximum-likelihood joint decoding of both users' messages from one
/// received sequence. Ties break to the lexicographically smallest
/// (message1, message2, confusion1, confusion2), making the decoder a
/// function of its inputs.
pub fn decode_joint(
    ch: &MacWiretapChannel,
    cb1: &BinningCodebook,
    cb2: &BinningCodebook,
    received: &[u8],
) -> Result<(u64, u64)> {
    if cb1.user != 1 || cb2.user != 2 {
        return Err(Error::InvalidArgument("decode_joint wants user-1 then user-2 codebooks".into()));
    }
    if cb1.n != cb2.n || received.len() != cb1.n as usize {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: codebooks n={}/{}, received {}",
            cb1.n,
            cb2.n,
            received.len()
        )));
    }
    if cb1.alphabet as usize != ch.x1_size || cb2.alphabet as usize != ch.x2_size {
        return Err(Error::InvalidArgument("codebook alphabets do not match the channel".into()));
    }
    if received.iter().any(|&y| y as usize >= ch.y_size) {
        return Err(Error::InvalidArgument("received symbol outside the channel's output alphabet".into()));
    }

    let mut best = (0u64, 0u64);
    let mut best_score = -1.0f64;
    for m1 in 0..cb1.messages() {
        for m2 in 0..cb2.messages() {
            for r1 in 0..cb1.confusions() {
                let x1 = cb1.codeword(m1, r1)?;
                for r2 in 0..cb2.confusions() {
                    let x2 = cb2.codeword(m2, r2)?;
                    let mut score = 1.0;
                    for (t, &y) in received.iter().enumerate() {
                        score *= ch.y_law(x1[t] as usize, x2[t] as usize, y as usize);
                    }
                    if score > best_score {
                        best_score = score;
                        best = (m1, m2);
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Which messages the audit measures leakage of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageScope {
    User1,
    User2,
    /// Both messages jointly.
    Collective,
}

/// Optional conditioning of the audited mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    None,
    /// Condition on one user's full transmitted sequence in the last slot
    /// of the scenario (the "other user's codeword" form of individual
    /// leakage).
    TransmittedSequence { user: u8 },
}

/// What the eavesdropper observes and how messages reach the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LeakageScenario {
    /// No channel at all: a uniform message XORed with a fresh uniform
    /// independent key, the pad output observed directly. Needs no
    /// codebooks and admits no conditioning.
    OneTimePad { message_bits: u32 },
    /// One slot of fresh wiretap coding by both users; the eavesdropper
    /// sees her n channel outputs. Codebooks: [user 1, user 2].
    WiretapSlot { messages: MessageScope },
    /// Two slots chained by key recycling: slot 1 carries fresh
    /// wiretap-coded messages, slot 2 carries new messages XORed with the
    /// own slot-1 message as key. The eavesdropper sees both slots.
    /// Codebooks: [slot-1 user 1, slot-1 user 2, slot-2 user 1, slot-2
    /// user 2]; slot-2 message_bits must match slot-1 per user (the pad is
    /// bit-for-bit). `messages` selects the fresh slot-2 messages.
    TwoSlotChain { messages: MessageScope },
}

/// Outcome of one exact audit. In multi-slot scenarios `@k` in `quantity`
/// marks slot k; single-slot audits need no marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    /// The measured expression, e.g. "I(W1; Z@1 | X2@1)".
    pub quantity: String,
    pub value_bits: f64,
    pub budget_bits: f64,
    /// value_bits <= budget_bits.
    pub satisfied: bool,
}

impl LeakageReport {
    fn new(quantity: String, value_bits: f64, budget_bits: f64) -> Self {
        // exact-arithmetic identities can ring at -1e-16; leakage is >= 0
        let value_bits = value_bits.max(0.0);
        Self { quantity, value_bits, budget_bits, satisfied: value_bits <= budget_bits }
    }
}

/// Sum of the two individual leakages: an upper bound on the collective
/// leakage whenever the two users' message/confusion sources are
/// independent.
pub fn leakage_chain_bound(individual1: f64, individual2: f64) -> f64 {
    debug_assert!(individual1 >= 0.0 && individual2 >= 0.0);
    individual1 + individual2
}

/// Measures the named mutual information exactly by dense enumeration.
///
/// The joint distribution over (messages, conditioning sequence,
/// eavesdropper outputs) is accumulated in full; the result is exact up to
/// f64 rounding. Fails with a capacity error when the enumeration would
/// exceed the dense-state guard.
pub fn exact_leakage(
    ch: &MacWiretapChannel,
    codebooks: &[&BinningCodebook],
    scenario: LeakageScenario,
    conditioning: Conditioning,
    budget_bits: f64,
) -> Result<LeakageReport> {
    match scenario {
        LeakageScenario::OneTimePad { message_bits } => {
            if !codebooks.is_empty() {
                return Err(Error::InvalidArgument("one-time-pad audit takes no codebooks".into()));
            }
            if conditioning != Conditioning::None {
                return Err(Error::InvalidArgument("one-time-pad audit has no conditioning variable".into()));
            }
            otp_leakage(message_bits, budget_bits)
        }
        LeakageScenario::WiretapSlot { messages } => {
            let [cb1, cb2] = expect_codebooks::<2>(codebooks)?;
            slot_leakage(ch, cb1, cb2, messages, conditioning, budget_bits)
        }
        LeakageScenario::TwoSlotChain { messages } => {
            let [a1, a2, b1, b2] = expect_codebooks::<4>(codebooks)?;
            chain_leakage(ch, [a1, a2], [b1, b2], messages, conditioning, budget_bits)
        }
    }
}

fn expect_codebooks<'a, const K: usize>(cbs: &[&'a BinningCodebook]) -> Result<[&'a BinningCodebook; K]> {
    let arr: [&BinningCodebook; K] = cbs
        .try_into()
        .map_err(|_| Error::InvalidArgument(format!("scenario needs {K} codebooks, got {}", cbs.len())))?;
    for (i, cb) in arr.iter().enumerate() {
        let want = (i % 2 + 1) as u8;
        if cb.user != want {
            return Err(Error::InvalidArgument(format!(
                "codebook {i} is for user {}, expected user {want}",
                cb.user
            )));
        }
    }
    Ok(arr)
}

fn otp_leakage(message_bits: u32, budget_bits: f64) -> Result<LeakageReport> {
    if message_bits == 0 || message_bits > 32 {
        return Err(Error::InvalidArgument("pad audit supports 1..=32 message bits".into()));
    }
    let card = 1u128 << message_bits;
    guard_support(card * card)?;
    let card = card as usize;
    let mut table = vec![0.0f64; card * card];
    let p = 1.0 / (card as f64 * card as f64);
    for w in 0..card {
        for k in 0..card {
            table[w * card + (w ^ k)] += p;
        }
    }
    let joint = ProbTable::new(vec![card, 1, card], table)?;
    let value = joint.conditional_mutual_information(&[0], &[2], &[1]);
    Ok(LeakageReport::new("I(W; W xor K)".into(), value, budget_bits))
}

/// Dense index of a symbol sequence, first use most significant.
fn seq_index(seq: &[u8], base: usize) -> usize {
    seq.iter().fold(0usize, |acc, &s| acc * base + s as usize)
}

/// Eavesdropper-output distribution over all z-sequences for fixed inputs.
fn z_seq_dist(ch: &MacWiretapChannel, x1: &[u8], x2: &[u8]) -> Vec<f64> {
    let mut d = vec![1.0f64];
    for (s1, s2) in x1.iter().zip(x2) {
        let mut next = vec![0.0; d.len() * ch.z_size];
        for (i, &p) in d.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for z in 0..ch.z_size {
                next[i * ch.z_size + z] = p * ch.z_law(*s1 as usize, *s2 as usize, z);
            }
        }
        d = next;
    }
    d
}

fn check_pair(ch: &MacWiretapChannel, cb1: &BinningCodebook, cb2: &BinningCodebook) -> Result<()> {
    if cb1.n != cb2.n {
        return Err(Error::InvalidArgument(format!(
            "paired codebooks disagree on blocklength: {} vs {}",
            cb1.n, cb2.n
        )));
    }
    if cb1.alphabet as usize != ch.x1_size || cb2.alphabet as usize != ch.x2_size {
        return Err(Error::InvalidArgument("codebook alphabets do not match the channel".into()));
    }
    Ok(())
}

struct AuditAxes {
    w_card: usize,
    c_card: usize,
    z_card: usize,
    table: Vec<f64>,
}

impl AuditAxes {
    fn new(w_card: usize, c_card: usize, z_card: usize, source_states: u128) -> Result<Self> {
        let table_states = w_card as u128 * c_card as u128 * z_card as u128;
        guard_support(source_states.max(table_states))?;
        Ok(Self { w_card, c_card, z_card, table: vec![0.0; w_card * c_card * z_card] })
    }

    #[inline]
    fn row(&mut self, w: usize, c: usize) -> &mut [f64] {
        let base = (w * self.c_card + c) * self.z_card;
        &mut self.table[base..base + self.z_card]
    }

    fn finish(self, quantity: String, budget_bits: f64) -> Result<LeakageReport> {
        let joint = ProbTable::new(vec![self.w_card, self.c_card, self.z_card], self.table)?;
        let value = joint.conditional_mutual_information(&[0], &[2], &[1]);
        Ok(LeakageReport::new(quantity, value, budget_bits))
    }
}

fn scope_label(messages: MessageScope, slot: Option<u32>) -> String {
    let at = slot.map(|s| format!("@{s}")).unwrap_or_default();
    match messages {
        MessageScope::User1 => format!("W1{at}"),
        MessageScope::User2 => format!("W2{at}"),
        MessageScope::Collective => format!("W1{at},W2{at}"),
    }
}

fn conditioning_label(conditioning: Conditioning, slot: Option<u32>) -> String {
    match conditioning {
        Conditioning::None => String::new(),
        Conditioning::TransmittedSequence { user } => {
            let at = slot.map(|s| format!("@{s}")).unwrap_or_default();
            format!(" | X{user}{at}")
        }
    }
}

fn conditioning_user(conditioning: Conditioning) -> Result<Option<usize>> {
    match conditioning {
        Conditioning::None => Ok(None),
        Conditioning::TransmittedSequence { user: u @ (1 | 2) } => Ok(Some(u as usize - 1)),
        Conditioning::TransmittedSequence { user } => {
            Err(Error::InvalidArgument(format!("conditioning user must be 1 or 2, got {user}")))
        }
    }
}

fn slot_leakage(
    ch: &MacWiretapChannel,
    cb1: &BinningCodebook,
    cb2: &BinningCodebook,
    messages: MessageScope,
    conditioning: Conditioning,
    budget_bits: f64,
) -> Result<LeakageReport> {
    check_pair(ch, cb1, cb2)?;
    let n = cb1.n;
    let cond_user = conditioning_user(conditioning)?;

    let z_card = (ch.z_size as u128).pow(n);
    let sources = cb1.rows() as u128 * cb2.rows() as u128;
    guard_support(z_card)?;
    let z_card = z_card as usize;
    let w_card = match messages {
        MessageScope::User1 => cb1.messages(),
        MessageScope::User2 => cb2.messages(),
        MessageScope::Collective => cb1.messages() * cb2.messages(),
    } as usize;
    let c_card = match cond_user {
        None => 1,
        Some(0) => (ch.x1_size as u128).pow(n) as usize,
        Some(_) => (ch.x2_size as u128).pow(n) as usize,
    };
    let mut axes = AuditAxes::new(w_card, c_card, z_card, sources * z_card as u128)?;

    let p_src = 1.0 / sources as f64;
    for w1 in 0..cb1.messages() {
        for r1 in 0..cb1.confusions() {
            let x1 = cb1.codeword(w1, r1)?;
            for w2 in 0..cb2.messages() {
                let w = match messages {
                    MessageScope::User1 => w1,
                    MessageScope::User2 => w2,
                    MessageScope::Collective => (w1 << cb2.message_bits) | w2,
                } as usize;
                for r2 in 0..cb2.confusions() {
                    let x2 = cb2.codeword(w2, r2)?;
                    let c = match cond_user {
                        None => 0,
                        Some(0) => seq_index(x1, ch.x1_size),
                        Some(_) => seq_index(x2, ch.x2_size),
                    };
                    let zd = z_seq_dist(ch, x1, x2);
                    let row = axes.row(w, c);
                    for (z, &pz) in zd.iter().enumerate() {
                        row[z] += p_src * pz;
                    }
                }
            }
        }
    }

    let quantity = format!(
        "I({}; Z{})",
        scope_label(messages, None),
        conditioning_label(conditioning, None)
    );
    axes.finish(quantity, budget_bits)
}

fn chain_leakage(
    ch: &MacWiretapChannel,
    slot1: [&BinningCodebook; 2],
    slot2: [&BinningCodebook; 2],
    messages: MessageScope,
    conditioning: Conditioning,
    budget_bits: f64,
) -> Result<LeakageReport> {
    check_pair(ch, slot1[0], slot1[1])?;
    check_pair(ch, slot2[0], slot2[1])?;
    for u in 0..2 {
        if slot1[u].message_bits != slot2[u].message_bits {
            return Err(Error::InvalidArgument(format!(
                "user {} slot-2 messages carry {} bits but the slot-1 key has {}",
                u + 1,
                slot2[u].message_bits,
                slot1[u].message_bits
            )));
        }
    }
    let cond_user = conditioning_user(conditioning)?;

    let zc1 = (ch.z_size as u128).pow(slot1[0].n);
    let zc2 = (ch.z_size as u128).pow(slot2[0].n);
    guard_support(zc1.saturating_mul(zc2))?;
    let (zc1, zc2) = (zc1 as usize, zc2 as usize);
    let sources = slot1[0].rows() as u128
        * slot1[1].rows() as u128
        * slot2[0].rows() as u128
        * slot2[1].rows() as u128;
    let w_card = match messages {
        MessageScope::User1 => slot2[0].messages(),
        MessageScope::User2 => slot2[1].messages(),
        MessageScope::Collective => slot2[0].messages() * slot2[1].messages(),
    } as usize;
    let c_card = match cond_user {
        None => 1,
        Some(0) => (ch.x1_size as u128).pow(slot2[0].n) as usize,
        Some(_) => (ch.x2_size as u128).pow(slot2[1].n) as usize,
    };
    let mut axes = AuditAxes::new(w_card, c_card, zc1 * zc2, sources * (zc1 * zc2) as u128)?;

    let p_src = 1.0 / sources as f64;
    // slot-1 messages double as keys, so the slot-2 transmitted index is
    // fresh-message XOR key
    for w1 in 0..slot1[0].messages() {
        for r1 in 0..slot1[0].confusions() {
            let xa1 = slot1[0].codeword(w1, r1)?;
            for w2 in 0..slot1[1].messages() {
                for r2 in 0..slot1[1].confusions() {
                    let xa2 = slot1[1].codeword(w2, r2)?;
                    let zd1 = z_seq_dist(ch, xa1, xa2);
                    for s1 in 0..slot2[0].messages() {
                        for t1 in 0..slot2[0].confusions() {
                            let xb1 = slot2[0].codeword(s1 ^ w1, t1)?;
                            for s2 in 0..slot2[1].messages() {
                                let w = match messages {
                                    MessageScope::User1 => s1,
                                    MessageScope::User2 => s2,
                                    MessageScope::Collective => {
                                        (s1 << slot2[1].message_bits) | s2
                                    }
                                } as usize;
                                for t2 in 0..slot2[1].confusions() {
                                    let xb2 = slot2[1].codeword(s2 ^ w2, t2)?;
                                    let c = match cond_user {
                                        None => 0,
                                        Some(0) => seq_index(xb1, ch.x1_size),
                                        Some(_) => seq_index(xb2, ch.x2_size),
                                    };
                                    let zd2 = z_seq_dist(ch, xb1, xb2);
                                    let row = axes.row(w, c);
                                    for (i, &pa) in zd1.iter().enumerate() {
                                        if pa == 0.0 {
                                            continue;
                                        }
                                        let chunk = &mut row[i * zc2..(i + 1) * zc2];
                                        for (j, &pb) in zd2.iter().enumerate() {
                                            chunk[j] += p_src * pa * pb;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let quantity = format!(
        "I({}; Z@1,Z@2{})",
        scope_label(messages, Some(2)),
        conditioning_label(conditioning, Some(2))
    );
    axes.finish(quantity, budget_bits)
}
