//! Dispatch and artifact emission.
//!
//! Each mode writes its fixed-header CSVs (plus any JSON reports) into one
//! output directory, then a manifest that attributes every file to the
//! module and operation that produced it. Given the same scenario and seed
//! the artifact bytes are identical run to run; the manifest is the one
//! file that is not (it carries wall-clock fields).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use macwt::channel::{info_terms, input_grid, InputDistribution, MacWiretapChannel};
use macwt::codec::{build_codebook, exact_leakage, BinningCodebook, Conditioning, LeakageReport};
use macwt::fading::FadingSlotRecord;
use macwt::protocol::SlotRecord;
use macwt::region::{
    hull_over_inputs, ramp_schedule, slot_average_rate, RampSchedule, RateRegion, RegionKind,
};
use macwt::{Error, Result};

use crate::scenario::{ChannelSpec, Mode, Scenario};

/// One artifact file and the code that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub module: String,
    pub operation: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario_hash: String,
    seed: u64,
    mode: Mode,
    started_at: u64,
    elapsed_ms: u64,
    outputs: &'a [OutputRecord],
}

/// Where everything landed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub outputs: Vec<OutputRecord>,
    pub manifest_path: PathBuf,
}

/// SHA-256 of the effective scenario (after any flag overrides), so an
/// override is visible in the manifest even though the file on disk never
/// changed.
pub fn scenario_hash(sc: &Scenario) -> String {
    let bytes = serde_json::to_vec(sc).expect("scenario serializes");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

struct Emitter<'a> {
    dir: &'a Path,
    outputs: Vec<OutputRecord>,
}

impl Emitter<'_> {
    fn write(
        &mut self,
        name: &str,
        contents: impl AsRef<[u8]>,
        module: &str,
        operation: &str,
    ) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.outputs.push(OutputRecord {
            file: name.into(),
            module: module.into(),
            operation: operation.into(),
        });
        Ok(())
    }
}

/// Runs a validated scenario, writing all artifacts plus `manifest.json`
/// into `out_dir` (created if needed).
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunOutcome> {
    scenario.validate()?;
    let started_at =
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_millis() as u64;
    let clock = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut em = Emitter { dir: out_dir, outputs: Vec::new() };

    match scenario.mode {
        Mode::Region => run_region(scenario, &mut em)?,
        Mode::Ramp => run_ramp(scenario, &mut em)?,
        Mode::Protocol => run_protocol_mode(scenario, &mut em)?,
        Mode::LeakageAudit => run_leakage(scenario, &mut em)?,
        Mode::Fading => run_fading_mode(scenario, &mut em)?,
    }

    let manifest = Manifest {
        scenario_hash: scenario_hash(scenario),
        seed: scenario.seed,
        mode: scenario.mode,
        started_at,
        elapsed_ms: clock.elapsed().as_millis() as u64,
        outputs: &em.outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, text)?;

    Ok(RunOutcome { out_dir: out_dir.to_owned(), outputs: em.outputs, manifest_path })
}

fn finite_channel(sc: &Scenario) -> Result<MacWiretapChannel> {
    match &sc.channel {
        Some(ChannelSpec::File { path }) => MacWiretapChannel::from_path(path),
        _ => Err(Error::InvalidModel("scenario: finite channel required".into())),
    }
}

fn operating_input(sc: &Scenario, ch: &MacWiretapChannel) -> Result<InputDistribution> {
    match &sc.input {
        Some(i) => InputDistribution::new(i.p1.clone(), i.p2.clone()),
        None => Ok(InputDistribution::uniform(ch)),
    }
}

fn ramp_for(sc: &Scenario, ch: &MacWiretapChannel) -> Result<RampSchedule> {
    let q = operating_input(sc, ch)?;
    Ok(ramp_schedule(info_terms(ch, &q)?))
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

// --- mode drivers ---

fn run_region(sc: &Scenario, em: &mut Emitter) -> Result<()> {
    let ch = finite_channel(sc)?;
    // grid_steps subdivides each axis, so the lattice has one more point
    // per axis than steps; the default 10 puts the uniform input on it
    let grid = input_grid(&ch, sc.grid_steps + 1);
    let secrecy = hull_over_inputs(&ch, &grid, RegionKind::Secrecy)?;
    let capacity = hull_over_inputs(&ch, &grid, RegionKind::Capacity)?;
    em.write("secrecy_region.csv", region_csv(&secrecy), "macwt::region", "hull_over_inputs")?;
    em.write("capacity_region.csv", region_csv(&capacity), "macwt::region", "hull_over_inputs")?;
    em.write(
        "fig_regions.csv",
        fig_regions(&[("secrecy", &secrecy), ("capacity", &capacity)]),
        "macwt_cli::runner",
        "emit_plotdata",
    )
}

fn run_ramp(sc: &Scenario, em: &mut Emitter) -> Result<()> {
    let ch = finite_channel(sc)?;
    let cfg = sc.slot.expect("validated").to_config()?;
    let ramp = ramp_for(sc, &ch)?;
    em.write("schedule.csv", schedule_csv(&ramp, cfg.l), "macwt::region", "ramp_schedule")?;
    em.write("ramp.json", pretty_json(&ramp)?, "macwt::region", "ramp_schedule")?;
    em.write("fig_staircase.csv", fig_staircase(&ramp), "macwt_cli::runner", "emit_plotdata")
}

fn run_protocol_mode(sc: &Scenario, em: &mut Emitter) -> Result<()> {
    let ch = finite_channel(sc)?;
    let cfg = sc.slot.expect("validated").to_config()?;
    let horizon = sc.horizon.expect("validated");
    let ramp = ramp_for(sc, &ch)?;
    let run = macwt::protocol::run_protocol(&cfg, &ramp, horizon)?;
    em.write("protocol_ledger.csv", protocol_csv(&run.records), "macwt::protocol", "run_protocol")?;
    let summary = serde_json::json!({
        "window_holds_from": run.window_holds_from,
        "avg_keyed_rate": run.avg_keyed_rate,
        "avg_slot_rate": run.avg_slot_rate,
    });
    em.write("protocol_summary.json", pretty_json(&summary)?, "macwt::protocol", "run_protocol")?;
    em.write(
        "fig_buffers.csv",
        fig_buffers(&run.buffer_trajectory),
        "macwt_cli::runner",
        "emit_plotdata",
    )
}

fn run_leakage(sc: &Scenario, em: &mut Emitter) -> Result<()> {
    let ch = finite_channel(sc)?;
    let q = operating_input(sc, &ch)?;
    let mut rows = Vec::new();
    for entry in sc.audits.as_ref().expect("validated") {
        let mut books = Vec::new();
        for (i, spec) in entry.codebooks.iter().enumerate() {
            let seed = sc.seed.wrapping_add(spec.seed_offset.unwrap_or(i as u64));
            let cb = build_codebook(
                &ch,
                &q,
                spec.user,
                spec.n,
                spec.message_bits,
                spec.confusion_bits,
                seed,
            )?;
            em.write(
                &format!("codebook_{}_{}.bin", entry.label, i),
                cb.to_bytes(),
                "macwt::codec",
                "build_codebook",
            )?;
            books.push(cb);
        }
        let refs: Vec<&BinningCodebook> = books.iter().collect();
        let report = exact_leakage(
            &ch,
            &refs,
            entry.scenario,
            entry.conditioning.unwrap_or(Conditioning::None),
            entry.budget_bits,
        )?;
        rows.push(AuditRow {
            label: entry.label.clone(),
            n: entry.codebooks.first().map(|c| c.n),
            report,
        });
    }
    em.write("leakage_audit.csv", leakage_csv(&rows), "macwt::codec", "exact_leakage")?;
    em.write(
        "fig_leakage_vs_n.csv",
        fig_leakage_vs_n(&rows),
        "macwt_cli::runner",
        "emit_plotdata",
    )
}

fn run_fading_mode(sc: &Scenario, em: &mut Emitter) -> Result<()> {
    let noise = match &sc.channel {
        Some(ChannelSpec::Gaussian { noise }) => *noise,
        _ => return Err(Error::InvalidModel("scenario: gaussian channel required".into())),
    };
    let cfg = sc.slot.expect("validated").to_config()?;
    let horizon = sc.horizon.expect("validated");
    let model = sc.gain_model.as_ref().expect("validated").with_seed(sc.seed);
    let policy = sc.power_policy.expect("validated");
    let run = macwt::fading::run_fading(&model, &policy, &cfg, noise, horizon)?;
    em.write("fading_ledger.csv", fading_csv(&run.ledger), "macwt::fading", "run_fading")?;
    em.write("ergodic_report.json", pretty_json(&run.report)?, "macwt::fading", "run_fading")?;
    let trajectory: Vec<(u64, u64)> =
        run.ledger.iter().map(|r| (r.buffer_after[0], r.buffer_after[1])).collect();
    em.write("fig_buffers.csv", fig_buffers(&trajectory), "macwt_cli::runner", "emit_plotdata")
}

// --- artifact formats ---
//
// All numbers go through plain Display: integers stay integers, floats use
// the shortest representation that parses back to the same f64, so byte
// identity across runs is exactly value identity.

/// Hull vertices, counterclockwise from the origin. One row per vertex.
pub fn region_csv(region: &RateRegion) -> String {
    let mut s = String::from("r1,r2\n");
    for &(r1, r2) in &region.vertices {
        let _ = writeln!(s, "{r1},{r2}");
    }
    s
}

/// Overlay of named polygons for the region figure.
pub fn fig_regions(regions: &[(&str, &RateRegion)]) -> String {
    let mut s = String::from("region,r1,r2\n");
    for (name, reg) in regions {
        for &(r1, r2) in &reg.vertices {
            let _ = writeln!(s, "{name},{r1},{r2}");
        }
    }
    s
}

/// Per-slot second-part rates and the resulting whole-slot averages.
pub fn schedule_csv(ramp: &RampSchedule, l: u64) -> String {
    let mut s = String::from("slot,r1_part2,r2_part2,r1_avg,r2_avg\n");
    for r in &ramp.per_slot {
        let avg = slot_average_rate(r.second_part, r.first_part, l);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.slot, r.second_part.0, r.second_part.1, avg.0, avg.1
        );
    }
    s
}

/// User 1's keyed rate while the ramp is still moving: slots 1 through
/// lambda_star, after which the pair is constant.
pub fn fig_staircase(ramp: &RampSchedule) -> String {
    let mut s = String::from("slot,rate\n");
    for k in 1..=ramp.lambda_star {
        let (r1, _) = ramp.second_part_at(k);
        let _ = writeln!(s, "{k},{r1}");
    }
    s
}

/// Two rows per slot (user 1 then user 2). An empty `oldest_origin_used`
/// cell means the user consumed no key that slot.
pub fn protocol_csv(records: &[SlotRecord]) -> String {
    let mut s = String::from(
        "slot,user,wiretap_bits,keyed_bits,key_consumed,key_stored,buffer_after,oldest_origin_used\n",
    );
    for r in records {
        let oldest = r.oldest_origin_used().map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.slot, r.user, r.wiretap_bits, r.keyed_bits, r.key_consumed, r.key_stored,
            r.buffer_after, oldest
        );
    }
    s
}

/// Buffer levels after each slot; rows are slots 1..=len.
pub fn fig_buffers(trajectory: &[(u64, u64)]) -> String {
    let mut s = String::from("slot,buffer1,buffer2\n");
    for (i, &(b1, b2)) in trajectory.iter().enumerate() {
        let _ = writeln!(s, "{},{b1},{b2}", i as u64 + 1);
    }
    s
}

struct AuditRow {
    label: String,
    n: Option<u32>,
    report: LeakageReport,
}

/// One row per audit. The measured quantity is quoted because it contains
/// commas in collective scopes.
fn leakage_csv(rows: &[AuditRow]) -> String {
    let mut s = String::from("scenario,quantity,value_bits,budget_bits,satisfied\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},\"{}\",{},{},{}",
            row.label, row.report.quantity, row.report.value_bits, row.report.budget_bits,
            row.report.satisfied
        );
    }
    s
}

/// Leakage against blocklength, for audits that built codebooks.
fn fig_leakage_vs_n(rows: &[AuditRow]) -> String {
    let mut s = String::from("label,n,leakage_bits\n");
    for row in rows {
        if let Some(n) = row.n {
            let _ = writeln!(s, "{},{n},{}", row.label, row.report.value_bits);
        }
    }
    s
}

/// One row per slot: the draw, the spent power, the five capacity terms,
/// and both users' bit counts and buffer levels.
pub fn fading_csv(ledger: &[FadingSlotRecord]) -> String {
    let mut s = String::from(
        "slot,h1,h2,g1,g2,P1,P2,C1,C2,C1e,C2e,C,\
         wiretap_bits_1,keyed_bits_1,buffer1,wiretap_bits_2,keyed_bits_2,buffer2\n",
    );
    for r in ledger {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.draw.slot, r.draw.h1, r.draw.h2, r.draw.g1, r.draw.g2,
            r.power.0, r.power.1,
            r.terms.c1, r.terms.c2, r.terms.c1e, r.terms.c2e, r.terms.c,
            r.wiretap_bits[0], r.keyed_bits[0], r.buffer_after[0],
            r.wiretap_bits[1], r.keyed_bits[1], r.buffer_after[1]
        );
    }
    s
}
