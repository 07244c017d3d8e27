//! Built-in self-test around the test-mode multiplier array.
//!
//! The on-chip test hardware is deliberately tiny because the stimulus set
//! is constant in the array width: a five-entry decoder ROM describes, per
//! session cycle, the stimulus and expected local response of the at most
//! two cell classes the cycle exercises; the pattern decoder fans the two
//! stimulus nibbles out across the operand and border inputs; and the output
//! response analyzer is a plain word comparator against golden responses. A
//! session applies the five ROM entries on cycles 0–4 and spends a final
//! sign-off cycle latching the verdict, six cycles in total regardless of n.

use serde::Serialize;
use thiserror::Error;

use crate::fault::{Fault, FaultList};
use crate::netlist::{apply_dft_transform, build_array_mult, Netlist, NetlistError};
use crate::sim::{fault_sim, faulty_output_words, SimError, SimMode, TestVector};
use crate::tpg::{mult_propagation_table, mult_table2_vectors, table2_layouts, Layout, TpgError};

#[derive(Debug, Error)]
pub enum BistError {
    #[error(transparent)]
    Tpg(#[from] TpgError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unit under test does not fit the program: {0}")]
    Shape(String),
}

// ---------------------------------------------------------------------------
// Decoder ROM
// ---------------------------------------------------------------------------

/// One decoder ROM word: per-cycle stimulus and expected response for the
/// two cell classes of the cycle's tiling (class A at the origin, class B at
/// the adjacent position the tiling alternates with). Uniform cycles store
/// the same nibble twice. Stimulus order is (x, y, cin, pin); response order
/// is (cout, pout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RomEntry {
    pub stim_a: [bool; 4],
    pub stim_b: [bool; 4],
    pub resp_a: [bool; 2],
    pub resp_b: [bool; 2],
}

impl RomEntry {
    /// The entry as one 12-bit word: stim_a ++ stim_b ++ resp_a ++ resp_b.
    pub fn packed_bits(&self) -> [bool; 12] {
        let mut w = [false; 12];
        w[..4].copy_from_slice(&self.stim_a);
        w[4..8].copy_from_slice(&self.stim_b);
        w[8..10].copy_from_slice(&self.resp_a);
        w[10..].copy_from_slice(&self.resp_b);
        w
    }

    /// Packed word as three hex digits (bit 0 of `stim_a` is the LSB).
    pub fn packed_hex(&self) -> String {
        // packed_bits is MSB-first within the word layout above; reverse to
        // the LSB-first convention bits_to_hex expects.
        let mut bits = self.packed_bits();
        bits.reverse();
        bits_to_hex(&bits)
    }
}

/// Derive the five-entry decoder ROM for width `n`.
///
/// Entry k comes from session cycle k's tiling: class A is the pattern at
/// cell (0,0), class B the pattern at the alternating neighbour — (1,0) for
/// row-alternating tilings, (0,1) for column-alternating ones, (0,0) again
/// for uniform. The stimulus nibble records the realized operand bits and
/// the pattern's chain inputs; the response pair is the pattern's chain
/// outputs. The resulting ROM is identical for every even n — the tilings
/// are periodic with period 2 — which is what makes the BIST hardware
/// constant-size.
pub fn build_decoder_rom(n: usize) -> Result<[RomEntry; 5], BistError> {
    let table = mult_propagation_table();
    let layouts = table2_layouts(n);
    let vectors = mult_table2_vectors(n)?;
    let mut entries = Vec::with_capacity(5);
    for (pa, v) in layouts.iter().zip(&vectors) {
        let pos_b = match pa.layout {
            Layout::Uniform(_) => (0usize, 0usize),
            Layout::RowAlternating(..) => (1, 0),
            Layout::Checkerboard(..) => (0, 1),
        };
        let x = v.get("X").expect("realized vector has X");
        let y = v.get("Y").expect("realized vector has Y");
        let cell = |i: usize, j: usize| -> ([bool; 4], [bool; 2]) {
            let p = table[pa.target(i, j) as usize];
            ([x[j], y[i], p.cin, p.pin], [p.cout(), p.pout()])
        };
        let (stim_a, resp_a) = cell(0, 0);
        let (stim_b, resp_b) = cell(pos_b.0, pos_b.1);
        entries.push(RomEntry { stim_a, stim_b, resp_a, resp_b });
    }
    Ok(entries.try_into().expect("five tilings"))
}

// ---------------------------------------------------------------------------
// Session program
// ---------------------------------------------------------------------------

/// Everything a self-test session needs: the ROM, the decoded full-width
/// vectors it expands to, and the golden output words of a fault-free array.
#[derive(Debug, Clone)]
pub struct BistProgram {
    pub n: usize,
    pub rom: [RomEntry; 5],
    /// Cycle k applies `vectors[k]` (the decoder's expansion of ROM entry k).
    pub vectors: Vec<TestVector>,
    /// Golden response per cycle: all output-port bits, ports in declaration
    /// order, bits least-significant-first.
    pub goldens: Vec<Vec<bool>>,
}

/// Number of cycles in a session: five ROM entries plus one sign-off cycle.
pub const SESSION_CYCLES: usize = 6;

impl BistProgram {
    /// Build the program for an n×n test-mode array, computing goldens from
    /// a freshly constructed reference instance.
    pub fn build(n: usize) -> Result<BistProgram, BistError> {
        let rom = build_decoder_rom(n)?;
        let vectors = mult_table2_vectors(n)?;
        let reference = apply_dft_transform(&build_array_mult(n)?)?;
        let goldens = vectors
            .iter()
            .map(|v| observed_bits(&reference, None, v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BistProgram { n, rom, vectors, goldens })
    }
}

/// All output-port bits of one evaluation, concatenated in port declaration
/// order, each port least-significant-first.
fn observed_bits(m: &Netlist, fault: Option<Fault>, v: &TestVector) -> Result<Vec<bool>, SimError> {
    let words = faulty_output_words(m, fault, std::slice::from_ref(v))?;
    Ok(words
        .iter()
        .flat_map(|(_, ws)| ws.iter().map(|w| w & 1 != 0))
        .collect())
}

/// Render bits (least-significant-first) as lowercase hex, one digit per
/// four bits, most significant digit first — the session log's word format.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let digits = bits.len().div_ceil(4).max(1);
    let mut s = String::with_capacity(digits);
    for d in (0..digits).rev() {
        let mut nibble = 0u8;
        for k in 0..4 {
            let idx = d * 4 + k;
            if idx < bits.len() && bits[idx] {
                nibble |= 1 << k;
            }
        }
        s.push(char::from_digit(nibble as u32, 16).unwrap());
    }
    s
}

// ---------------------------------------------------------------------------
// Session execution
// ---------------------------------------------------------------------------

/// One applied cycle of the session log.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct CycleLog {
    pub cycle: usize,
    pub rom_entry: usize,
    pub outputs_hex: String,
    pub golden_hex: String,
    #[serde(rename = "match")]
    pub matched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// First cycle whose response differed from golden.
    FailAt(usize),
}

/// Complete record of one self-test session.
#[derive(Debug, Clone)]
pub struct SessionReport {
    /// The five apply cycles. The sign-off cycle latches the verdict and
    /// drives no stimulus, so it has no log row.
    pub cycles: Vec<CycleLog>,
    pub verdict: Verdict,
    pub total_cycles: usize,
}

impl SessionReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Run one self-test session on `m`, optionally with a single injected
/// fault. Every apply cycle is logged even after a mismatch — the verdict is
/// the first failing cycle, but the full log is what makes sessions
/// comparable across faults.
pub fn run_bist_session(
    m: &Netlist,
    program: &BistProgram,
    fault: Option<Fault>,
) -> Result<SessionReport, BistError> {
    let out_width: usize = m.output_bits().len();
    if program.goldens.iter().any(|g| g.len() != out_width) {
        return Err(BistError::Shape(format!(
            "program golden width {} vs unit output width {}",
            program.goldens.first().map_or(0, Vec::len),
            out_width
        )));
    }
    let mut cycles = Vec::with_capacity(program.vectors.len());
    let mut verdict = Verdict::Pass;
    for (k, v) in program.vectors.iter().enumerate() {
        let outputs = observed_bits(m, fault, v)?;
        let matched = outputs == program.goldens[k];
        if !matched && verdict == Verdict::Pass {
            verdict = Verdict::FailAt(k);
        }
        cycles.push(CycleLog {
            cycle: k,
            rom_entry: k,
            outputs_hex: bits_to_hex(&outputs),
            golden_hex: bits_to_hex(&program.goldens[k]),
            matched,
        });
    }
    Ok(SessionReport { cycles, verdict, total_cycles: SESSION_CYCLES })
}

/// The session log as a JSON array of cycle rows.
pub fn session_log_json(report: &SessionReport) -> String {
    let mut s = serde_json::to_string_pretty(&report.cycles).expect("log serialization");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Injection sweep
// ---------------------------------------------------------------------------

/// Outcome of sweeping every non-redundant fault class through its own
/// session.
#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Classes swept (non-redundant ones).
    pub injected: usize,
    /// Sessions that failed (the expected outcome for detectable faults).
    pub failed: usize,
    /// Human-readable descriptions of faults whose session outcome
    /// contradicted direct fault simulation of the same vectors.
    pub disagreements: Vec<String>,
}

impl SweepReport {
    pub fn clean(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Inject each non-redundant class representative, run its session, and
/// cross-check the outcome against straight fault simulation of the same
/// five vectors: a fault must fail its session exactly when some vector
/// detects it, and the failing cycle must be the first detecting vector.
pub fn injection_sweep(
    m: &Netlist,
    program: &BistProgram,
    fl: &FaultList,
) -> Result<SweepReport, BistError> {
    let matrix = fault_sim(m, fl, &program.vectors, SimMode::Batched)?;
    let mut injected = 0;
    let mut failed = 0;
    let mut disagreements = Vec::new();
    for (ci, class) in fl.classes().iter().enumerate() {
        if fl.is_redundant(ci) {
            continue;
        }
        injected += 1;
        let rep = class.representative;
        let session = run_bist_session(m, program, Some(rep))?;
        let expected = matrix.first_detection(ci);
        match (session.verdict, expected) {
            (Verdict::Pass, None) => {}
            (Verdict::FailAt(c), Some(first)) if c == first => failed += 1,
            (got, want) => disagreements.push(format!(
                "{}: session {:?} vs simulation {:?}",
                rep.display(m),
                got,
                want
            )),
        }
    }
    Ok(SweepReport { injected, failed, disagreements })
}
