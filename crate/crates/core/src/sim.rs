//! Two-valued logic simulation: good-machine evaluation, word-batched
//! single-fault propagation, detection matrices, and coverage reporting.
//!
//! Batching packs up to 64 test vectors into the lanes of a `u64` and
//! evaluates one fault against all of them at once (parallel-pattern,
//! single-fault): the vector suites here are tiny and constant-size while
//! fault counts grow quadratically with array width, so the fault axis is
//! the one worth streaming. Faulty evaluation is event-driven — it starts
//! from the fault site and re-evaluates only gates reached by a changed
//! value, in topological order — which keeps per-fault cost proportional to
//! the fault's cone rather than the whole netlist.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::fault::{Fault, FaultList, FaultSite};
use crate::netlist::{GateKind, NetId, Netlist, PortDir};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("vector is missing input port `{0}`")]
    MissingInput(String),
    #[error("vector field `{0}` is not an input port of the netlist")]
    UnknownField(String),
    #[error("port `{0}` is {1} bits wide but the vector supplies {2}")]
    WidthMismatch(String, usize, usize),
    #[error("fault list does not match netlist: {0}")]
    FaultMismatch(String),
    #[error("vector file line {0}: {1}")]
    BadVectorFile(usize, String),
}

// ---------------------------------------------------------------------------
// Test vectors and the vector file format
// ---------------------------------------------------------------------------

/// A complete named input assignment, plus an optional label.
///
/// Bit vectors are stored least-significant-first (index k is bit k of the
/// port); the text format prints them most-significant-first, like numerals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TestVector {
    pub label: Option<String>,
    fields: Vec<(String, Vec<bool>)>,
}

impl TestVector {
    pub fn new() -> TestVector {
        TestVector::default()
    }

    pub fn with_label(label: &str) -> TestVector {
        TestVector { label: Some(label.to_string()), fields: Vec::new() }
    }

    /// Set a field, replacing any previous value of the same name.
    pub fn set(&mut self, name: &str, bits: Vec<bool>) {
        if let Some(f) = self.fields.iter_mut().find(|(n, _)| n == name) {
            f.1 = bits;
        } else {
            self.fields.push((name.to_string(), bits));
        }
    }

    pub fn set_uniform(&mut self, name: &str, width: usize, value: bool) {
        self.set(name, vec![value; width]);
    }

    /// Set from a closure over bit index.
    pub fn set_fn(&mut self, name: &str, width: usize, f: impl Fn(usize) -> bool) {
        self.set(name, (0..width).map(f).collect());
    }

    pub fn get(&self, name: &str) -> Option<&[bool]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &[bool])> {
        self.fields.iter().map(|(n, b)| (n.as_str(), b.as_slice()))
    }

    /// Remove a field if present (used to adapt suites between circuit
    /// variants, e.g. dropping `test_mode` for the un-transformed array).
    pub fn remove(&mut self, name: &str) {
        self.fields.retain(|(n, _)| n != name);
    }

    /// One line of the vector file format.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (i, (name, bits)) in self.fields.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{name}=");
            for &b in bits.iter().rev() {
                s.push(if b { '1' } else { '0' });
            }
        }
        if let Some(l) = &self.label {
            let _ = write!(s, "  # {l}");
        }
        s
    }
}

/// Serialize vectors to the text format: one vector per line, fields as
/// `name=bits` (most-significant bit first), `#` starting a comment; a
/// trailing comment on a vector line is its label.
pub fn write_vector_file(vectors: &[TestVector]) -> String {
    let mut s = String::new();
    for v in vectors {
        s.push_str(&v.to_line());
        s.push('\n');
    }
    s
}

/// Parse the text format produced by [`write_vector_file`].
pub fn parse_vector_file(text: &str) -> Result<Vec<TestVector>, SimError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let lineno = ln + 1;
        let (body, comment) = match raw.find('#') {
            Some(i) => (&raw[..i], raw[i + 1..].trim()),
            None => (raw, ""),
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let mut v = TestVector::new();
        if !comment.is_empty() {
            v.label = Some(comment.to_string());
        }
        for field in body.split_whitespace() {
            let (name, bits) = field
                .split_once('=')
                .ok_or_else(|| SimError::BadVectorFile(lineno, format!("expected name=bits, got `{field}`")))?;
            if name.is_empty() || bits.is_empty() {
                return Err(SimError::BadVectorFile(lineno, "empty field name or bits".into()));
            }
            let mut bv = Vec::with_capacity(bits.len());
            for c in bits.chars().rev() {
                match c {
                    '0' => bv.push(false),
                    '1' => bv.push(true),
                    _ => {
                        return Err(SimError::BadVectorFile(
                            lineno,
                            format!("bit string for `{name}` contains `{c}`"),
                        ))
                    }
                }
            }
            v.set(name, bv);
        }
        out.push(v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Good-machine evaluation
// ---------------------------------------------------------------------------

/// Pack up to 64 vectors into per-net words (lane k = vector k) and check
/// that each vector covers every input port exactly.
fn pack_inputs(m: &Netlist, vectors: &[TestVector]) -> Result<Vec<u64>, SimError> {
    assert!(vectors.len() <= 64, "at most 64 vectors per word batch");
    let mut values = vec![0u64; m.num_nets() as usize];
    for (lane, v) in vectors.iter().enumerate() {
        for (name, _) in v.fields() {
            let p = m.port(name).ok_or_else(|| SimError::UnknownField(name.to_string()))?;
            if p.dir != PortDir::Input {
                return Err(SimError::UnknownField(name.to_string()));
            }
        }
        for p in m.input_ports() {
            let bits = v.get(&p.name).ok_or_else(|| SimError::MissingInput(p.name.clone()))?;
            if bits.len() != p.width() {
                return Err(SimError::WidthMismatch(p.name.clone(), p.width(), bits.len()));
            }
            for (bi, &b) in bits.iter().enumerate() {
                if b {
                    values[p.bits[bi].0 as usize] |= 1 << lane;
                }
            }
        }
    }
    Ok(values)
}

/// One full topological evaluation pass over every gate.
fn eval_all(m: &Netlist, values: &mut [u64]) {
    for &g in m.topo() {
        let gate = m.gate(g);
        let mut ins = [0u64; 3];
        for (i, n) in gate.inputs.iter().enumerate() {
            ins[i] = values[n.0 as usize];
        }
        values[gate.output.0 as usize] = gate.kind.eval_word(&ins[..gate.inputs.len()]);
    }
}

/// Evaluate up to 64 vectors at once; returns the value word of every net.
///
/// Lane k of each word is the value under `vectors[k]`. This is the probing
/// entry point: internal nets (cell chain inputs, partial products) can be
/// inspected directly from the result.
pub fn good_net_words(m: &Netlist, vectors: &[TestVector]) -> Result<Vec<u64>, SimError> {
    let mut values = pack_inputs(m, vectors)?;
    eval_all(m, &mut values);
    Ok(values)
}

/// Word bits (lanes) that carry actual vectors for a batch of this size.
fn lane_mask(len: usize) -> u64 {
    if len >= 64 {
        !0
    } else {
        (1u64 << len) - 1
    }
}

/// Evaluate up to 64 vectors; returns per-output-port value words. Lanes
/// beyond `vectors.len()` read as 0.
pub fn output_words(m: &Netlist, vectors: &[TestVector]) -> Result<Vec<(String, Vec<u64>)>, SimError> {
    let values = good_net_words(m, vectors)?;
    let mask = lane_mask(vectors.len());
    Ok(m.output_ports()
        .map(|p| (p.name.clone(), p.bits.iter().map(|n| values[n.0 as usize] & mask).collect()))
        .collect())
}

/// Fault-free evaluation of a single vector: output ports to bit vectors.
pub fn good_sim(m: &Netlist, v: &TestVector) -> Result<Vec<(String, Vec<bool>)>, SimError> {
    let words = output_words(m, std::slice::from_ref(v))?;
    Ok(words
        .into_iter()
        .map(|(name, ws)| (name, ws.into_iter().map(|w| w & 1 != 0).collect()))
        .collect())
}

// ---------------------------------------------------------------------------
// Faulty-machine evaluation
// ---------------------------------------------------------------------------

/// Per-thread machinery for event-driven single-fault propagation.
///
/// Built for throughput across very many faults: gate metadata lives in
/// flat arrays indexed by topological position; the propagation frontier is
/// a bitset over those positions (every edge points forward in topological
/// order, so one ascending scan visits each scheduled gate exactly once, no
/// priority queue needed); and faulty values overwrite a working copy of
/// the good values, with an undo log restoring them in O(touched) per
/// fault. Each gate is evaluated at most once per fault, so each net is
/// logged at most once.
struct FaultEngine<'a> {
    m: &'a Netlist,
    good: &'a [u64],
    out_bits: &'a [(u32, u32, NetId)],
    // Gate tables, indexed by topological position.
    kind: Vec<GateKind>,
    first_in: Vec<u32>, // CSR offsets into `ins`
    ins: Vec<u32>,
    out_net: Vec<u32>,
    // Net-to-reader table: CSR of reader topological positions.
    first_reader: Vec<u32>,
    readers: Vec<u32>,
    // Working state.
    values: Vec<u64>,
    undo: Vec<(u32, u64)>,
    frontier: Vec<u64>,
    scan_from: usize,
}

impl<'a> FaultEngine<'a> {
    fn new(m: &'a Netlist, good: &'a [u64], out_bits: &'a [(u32, u32, NetId)]) -> FaultEngine<'a> {
        let num_gates = m.gates().len();
        let num_nets = m.num_nets() as usize;
        let mut kind = Vec::with_capacity(num_gates);
        let mut first_in = Vec::with_capacity(num_gates + 1);
        let mut ins = Vec::new();
        let mut out_net = Vec::with_capacity(num_gates);
        first_in.push(0);
        for &g in m.topo() {
            let gate = m.gate(g);
            kind.push(gate.kind);
            ins.extend(gate.inputs.iter().map(|n| n.0));
            first_in.push(ins.len() as u32);
            out_net.push(gate.output.0);
        }
        let mut first_reader = vec![0u32; num_nets + 1];
        for net in 0..num_nets as u32 {
            first_reader[net as usize + 1] =
                first_reader[net as usize] + m.readers(NetId(net)).len() as u32;
        }
        let mut readers = vec![0u32; *first_reader.last().unwrap() as usize];
        for net in 0..num_nets as u32 {
            let base = first_reader[net as usize] as usize;
            for (k, &(g, _)) in m.readers(NetId(net)).iter().enumerate() {
                readers[base + k] = m.topo_pos(g);
            }
        }
        FaultEngine {
            m,
            good,
            out_bits,
            kind,
            first_in,
            ins,
            out_net,
            first_reader,
            readers,
            values: good.to_vec(),
            undo: Vec::new(),
            frontier: vec![0u64; num_gates.div_ceil(64)],
            scan_from: usize::MAX,
        }
    }

    #[inline]
    fn value(&self, n: NetId) -> u64 {
        self.values[n.0 as usize]
    }

    /// Overwrite one net, remembering the old value for [`Self::restore`].
    #[inline]
    fn force(&mut self, net: u32, w: u64) {
        self.undo.push((net, self.values[net as usize]));
        self.values[net as usize] = w;
    }

    #[inline]
    fn schedule(&mut self, tp: u32) {
        self.frontier[tp as usize / 64] |= 1 << (tp % 64);
        self.scan_from = self.scan_from.min(tp as usize / 64);
    }

    fn schedule_readers(&mut self, net: u32) {
        for i in self.first_reader[net as usize]..self.first_reader[net as usize + 1] {
            self.schedule(self.readers[i as usize]);
        }
    }

    /// Undo every net write of the last propagation.
    fn restore(&mut self) {
        while let Some((net, old)) = self.undo.pop() {
            self.values[net as usize] = old;
        }
    }

    /// Lanes (as word bits) on which `fault` is detected at some output.
    fn detect_word(&mut self, fault: Fault, lane_mask: u64) -> u64 {
        let stuck_word = self.propagate(fault);
        let mut det = 0u64;
        for &(pi, bi, net) in self.out_bits {
            let good = self.good[net.0 as usize];
            det |= good ^ self.observed(fault, stuck_word, pi, bi, net);
        }
        self.restore();
        det & lane_mask
    }

    /// Value of output bit `(pi, bi)` as seen by an external observer,
    /// accounting for output-port faults that corrupt observation only.
    #[inline]
    fn observed(&self, fault: Fault, stuck_word: u64, pi: u32, bi: u32, net: NetId) -> u64 {
        match fault.site {
            FaultSite::PortBit { port, bit } if port == pi && bit == bi => stuck_word,
            _ => self.value(net),
        }
    }

    /// Event-driven single-fault propagation; afterwards `value()` returns
    /// faulty net words until [`Self::restore`] is called. Returns the
    /// fault's stuck word for observation.
    fn propagate(&mut self, fault: Fault) -> u64 {
        debug_assert!(self.undo.is_empty(), "propagate without restore");
        self.scan_from = usize::MAX;
        let stuck_word = if fault.stuck { !0u64 } else { 0u64 };
        let mut pin_override: Option<(u32, u8)> = None;
        match fault.site {
            FaultSite::GateIn { gate, pin } => {
                pin_override = Some((self.m.topo_pos(gate), pin));
                self.schedule(self.m.topo_pos(gate));
            }
            FaultSite::GateOut { gate } => {
                // The fault pins the net; the driving gate itself can never
                // be rescheduled, since nothing upstream of it changes.
                let out = self.m.gate(gate).output.0;
                if stuck_word != self.values[out as usize] {
                    self.force(out, stuck_word);
                    self.schedule_readers(out);
                }
            }
            FaultSite::PortBit { port, bit } => {
                let p = &self.m.ports()[port as usize];
                if p.dir == PortDir::Input {
                    let net = p.bits[bit as usize].0;
                    if stuck_word != self.values[net as usize] {
                        self.force(net, stuck_word);
                        self.schedule_readers(net);
                    }
                }
                // Output-port faults corrupt observation only; no propagation.
            }
        }

        let mut wi = self.scan_from;
        while wi < self.frontier.len() {
            let w = self.frontier[wi];
            if w == 0 {
                wi += 1;
                continue;
            }
            let bit = w.trailing_zeros();
            self.frontier[wi] = w & (w - 1);
            let tp = wi * 64 + bit as usize;

            let lo = self.first_in[tp] as usize;
            let hi = self.first_in[tp + 1] as usize;
            let mut ins = [0u64; 3];
            for (i, idx) in (lo..hi).enumerate() {
                ins[i] = self.values[self.ins[idx] as usize];
            }
            if let Some((ftp, pin)) = pin_override {
                if ftp as usize == tp {
                    ins[pin as usize] = stuck_word;
                }
            }
            let new = self.kind[tp].eval_word(&ins[..hi - lo]);
            let out = self.out_net[tp];
            if new != self.values[out as usize] {
                self.force(out, new);
                // Readers sit strictly later in topological order, so the
                // ascending scan is guaranteed to reach them.
                self.schedule_readers(out);
            }
        }
        stuck_word
    }
}

/// Evaluate up to 64 vectors under an optional single fault; returns
/// per-output-port value words exactly as an external observer would see
/// them. With `fault == None` this matches [`output_words`].
pub fn faulty_output_words(
    m: &Netlist,
    fault: Option<Fault>,
    vectors: &[TestVector],
) -> Result<Vec<(String, Vec<u64>)>, SimError> {
    let Some(fault) = fault else {
        return output_words(m, vectors);
    };
    let good = good_net_words(m, vectors)?;
    let out_bits = m.output_bits();
    let mut eng = FaultEngine::new(m, &good, &out_bits);
    let stuck_word = eng.propagate(fault);
    let mut per_port: Vec<(String, Vec<u64>)> = m
        .output_ports()
        .map(|p| (p.name.clone(), vec![0u64; p.width()]))
        .collect();
    let out_index: std::collections::HashMap<u32, usize> = m
        .ports()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.dir == PortDir::Output)
        .enumerate()
        .map(|(oi, (pi, _))| (pi as u32, oi))
        .collect();
    let mask = lane_mask(vectors.len());
    for &(pi, bi, net) in &out_bits {
        per_port[out_index[&pi]].1[bi as usize] = eng.observed(fault, stuck_word, pi, bi, net) & mask;
    }
    eng.restore();
    Ok(per_port)
}

// ---------------------------------------------------------------------------
// Detection matrices
// ---------------------------------------------------------------------------

/// How fault simulation consumes the vector list.
///
/// `Serial` applies one vector at a time; `Batched` packs 64 per word. The
/// two must produce bit-identical matrices — batching is an implementation
/// detail, never an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Serial,
    Batched,
}

/// Detection matrix: one row per fault class, one column per vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionMatrix {
    num_classes: usize,
    num_vectors: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl DetectionMatrix {
    fn new(num_classes: usize, num_vectors: usize) -> DetectionMatrix {
        let words_per_row = num_vectors.div_ceil(64);
        DetectionMatrix { num_classes, num_vectors, words_per_row, bits: vec![0; num_classes * words_per_row] }
    }

    fn set_word(&mut self, class: usize, word: usize, w: u64) {
        self.bits[class * self.words_per_row + word] = w;
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_vectors(&self) -> usize {
        self.num_vectors
    }

    pub fn is_detected_by(&self, class: usize, vector: usize) -> bool {
        assert!(vector < self.num_vectors);
        let w = self.bits[class * self.words_per_row + vector / 64];
        w >> (vector % 64) & 1 != 0
    }

    pub fn detected(&self, class: usize) -> bool {
        self.row(class).iter().any(|&w| w != 0)
    }

    pub fn first_detection(&self, class: usize) -> Option<usize> {
        for (wi, &w) in self.row(class).iter().enumerate() {
            if w != 0 {
                return Some(wi * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    fn row(&self, class: usize) -> &[u64] {
        &self.bits[class * self.words_per_row..(class + 1) * self.words_per_row]
    }

    /// OR another matrix over the same classes into this one (used to
    /// accumulate detections across successive vector batches).
    pub fn merge_detections(&mut self, other: &DetectionMatrix) {
        assert_eq!(self.num_classes, other.num_classes);
        assert_eq!(self.num_vectors, other.num_vectors);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }
}

fn validate_fault_sites(m: &Netlist, fl: &FaultList) -> Result<(), SimError> {
    for f in fl.faults() {
        let ok = match f.site {
            FaultSite::GateIn { gate, pin } => m
                .gates()
                .get(gate.0 as usize)
                .is_some_and(|g| (pin as usize) < g.kind.arity()),
            FaultSite::GateOut { gate } => (gate.0 as usize) < m.gates().len(),
            FaultSite::PortBit { port, bit } => m
                .ports()
                .get(port as usize)
                .is_some_and(|p| (bit as usize) < p.width()),
        };
        if !ok {
            return Err(SimError::FaultMismatch(format!("fault site {:?} not present", f.site)));
        }
    }
    Ok(())
}

fn worker_count() -> Option<usize> {
    std::env::var("CTAM_WORKERS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0)
}

/// Simulate the representatives of selected classes against a vector list.
///
/// Row k of the result corresponds to `class_indices[k]`. Only the class
/// representative is simulated: collapsing guarantees every member behaves
/// identically. Work is partitioned across classes; the `CTAM_WORKERS`
/// environment variable overrides the worker count, and results are
/// identical for any worker count.
pub fn fault_sim_classes(
    m: &Netlist,
    fl: &FaultList,
    class_indices: &[usize],
    vectors: &[TestVector],
    mode: SimMode,
) -> Result<DetectionMatrix, SimError> {
    validate_fault_sites(m, fl)?;
    let mut matrix = DetectionMatrix::new(class_indices.len(), vectors.len());
    let out_bits = m.output_bits();
    let chunk = match mode {
        SimMode::Serial => 1,
        SimMode::Batched => 64,
    };

    let run = |matrix: &mut DetectionMatrix| -> Result<(), SimError> {
        for (ci, vchunk) in vectors.chunks(chunk).enumerate() {
            let good = good_net_words(m, vchunk)?;
            let lane_mask = lane_mask(vchunk.len());
            let base_word = ci * chunk / 64;
            let shift = (ci * chunk) % 64;

            let compute = |eng: &mut FaultEngine, &class: &usize| -> u64 {
                eng.detect_word(fl.classes()[class].representative, lane_mask)
            };

            match mode {
                SimMode::Serial => {
                    let mut eng = FaultEngine::new(m, &good, &out_bits);
                    for (row, class) in class_indices.iter().enumerate() {
                        let det = compute(&mut eng, class);
                        let prev = matrix.row(row)[base_word];
                        matrix.set_word(row, base_word, prev | det << shift);
                    }
                }
                SimMode::Batched => {
                    use rayon::prelude::*;
                    let dets: Vec<u64> = class_indices
                        .par_iter()
                        .map_init(|| FaultEngine::new(m, &good, &out_bits), |eng, class| {
                            compute(eng, class)
                        })
                        .collect();
                    for (row, det) in dets.into_iter().enumerate() {
                        let prev = matrix.row(row)[base_word];
                        matrix.set_word(row, base_word, prev | det << shift);
                    }
                }
            }
        }
        Ok(())
    };

    if let (SimMode::Batched, Some(k)) = (mode, worker_count()) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("worker pool construction");
        pool.install(|| run(&mut matrix))?;
    } else {
        run(&mut matrix)?;
    }
    Ok(matrix)
}

/// Simulate every class of the list. Row order equals class order.
pub fn fault_sim(
    m: &Netlist,
    fl: &FaultList,
    vectors: &[TestVector],
    mode: SimMode,
) -> Result<DetectionMatrix, SimError> {
    let all: Vec<usize> = (0..fl.num_classes()).collect();
    fault_sim_classes(m, fl, &all, vectors, mode)
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

/// Summary of a fault-simulation run.
///
/// `coverage_pct` is `detected / (total_classes − redundant)`: redundant
/// classes — those structurally unobservable in test mode — are excluded
/// from the denominator but always listed.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoverageReport {
    pub total_classes: usize,
    pub redundant: usize,
    pub detected: usize,
    pub coverage_pct: f64,
    pub undetected: Vec<String>,
    pub redundant_faults: Vec<String>,
    pub first_detection_counts: Vec<usize>,
}

impl CoverageReport {
    pub fn full_coverage(&self) -> bool {
        self.detected + self.redundant == self.total_classes
    }
}

/// Fold a detection matrix into a coverage report.
pub fn coverage(m: &Netlist, fl: &FaultList, matrix: &DetectionMatrix) -> CoverageReport {
    assert_eq!(matrix.num_classes(), fl.num_classes(), "matrix/list mismatch");
    let mut detected = 0;
    let mut undetected = Vec::new();
    let mut first_counts = vec![0usize; matrix.num_vectors()];
    for (ci, class) in fl.classes().iter().enumerate() {
        if fl.is_redundant(ci) {
            continue;
        }
        if let Some(first) = matrix.first_detection(ci) {
            detected += 1;
            first_counts[first] += 1;
        } else {
            undetected.push(class.representative.display(m));
        }
    }
    let redundant = fl.redundant_count();
    let denom = fl.num_classes() - redundant;
    let coverage_pct = if denom == 0 { 100.0 } else { 100.0 * detected as f64 / denom as f64 };
    CoverageReport {
        total_classes: fl.num_classes(),
        redundant,
        detected,
        coverage_pct,
        undetected,
        redundant_faults: fl.redundant_representatives().iter().map(|f| f.display(m)).collect(),
        first_detection_counts: first_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{collapse_equivalent, enumerate_faults, FaultScope};
    use crate::netlist::build_rca;

    fn rca_vector(n: usize, a: u64, b: u64, cin: bool) -> TestVector {
        let mut v = TestVector::new();
        v.set_fn("A", n, |i| a >> i & 1 != 0);
        v.set_fn("B", n, |i| b >> i & 1 != 0);
        v.set("Cin", vec![cin]);
        v
    }

    #[test]
    fn good_sim_adds() {
        let m = build_rca(8).unwrap();
        let out = good_sim(&m, &rca_vector(8, 0xff, 0x01, false)).unwrap();
        let s = &out.iter().find(|(n, _)| n == "S").unwrap().1;
        let co = &out.iter().find(|(n, _)| n == "Cout").unwrap().1;
        assert!(s.iter().all(|&b| !b));
        assert!(co[0]);
    }

    #[test]
    fn pack_rejects_bad_vectors() {
        let m = build_rca(4).unwrap();
        let mut v = rca_vector(4, 1, 2, false);
        v.set("Extra", vec![true]);
        assert!(matches!(good_sim(&m, &v), Err(SimError::UnknownField(_))));
        let mut v = rca_vector(4, 1, 2, false);
        v.remove("B");
        assert_eq!(good_sim(&m, &v).unwrap_err(), SimError::MissingInput("B".into()));
        let mut v = rca_vector(4, 1, 2, false);
        v.set("A", vec![true; 5]);
        assert_eq!(good_sim(&m, &v).unwrap_err(), SimError::WidthMismatch("A".into(), 4, 5));
    }

    #[test]
    fn vector_file_round_trips_msb_first() {
        let mut v = TestVector::with_label("demo");
        v.set("A", vec![false, false, true, true]); // bits 2,3 set → text 1100
        v.set("Cin", vec![true]);
        let text = write_vector_file(std::slice::from_ref(&v));
        assert_eq!(text, "A=1100 Cin=1  # demo\n");
        let parsed = parse_vector_file(&text).unwrap();
        assert_eq!(parsed, vec![v]);
    }

    #[test]
    fn vector_file_skips_comments_and_reports_errors() {
        let parsed = parse_vector_file("# header\n\nA=01\n").unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].get("A").unwrap(), &[true, false]);
        assert!(matches!(
            parse_vector_file("A=012\n"),
            Err(SimError::BadVectorFile(1, _))
        ));
        assert!(matches!(
            parse_vector_file("A\n"),
            Err(SimError::BadVectorFile(1, _))
        ));
    }

    #[test]
    fn empty_vector_list_gives_zero_matrix() {
        let m = build_rca(2).unwrap();
        let fl = collapse_equivalent(&m, &enumerate_faults(&m, FaultScope::All));
        let matrix = fault_sim(&m, &fl, &[], SimMode::Batched).unwrap();
        assert_eq!(matrix.num_vectors(), 0);
        assert!((0..matrix.num_classes()).all(|c| !matrix.detected(c)));
    }

    #[test]
    fn output_stuck_fault_detected_only_when_good_differs() {
        // S of a 1-bit adder stuck at 0: detected exactly on vectors whose
        // good sum is 1.
        let m = build_rca(1).unwrap();
        let fl = enumerate_faults(&m, FaultScope::All);
        let s_port = m.port_index("S").unwrap() as u32;
        let f = Fault { site: FaultSite::PortBit { port: s_port, bit: 0 }, stuck: false };
        let id = fl.fault_id(&f).unwrap() as usize;
        let class = fl.class_of(&f).unwrap();
        assert_eq!(fl.classes()[class].members, vec![id as u32]);
        let vs = vec![
            rca_vector(1, 0, 0, false), // S=0: no difference
            rca_vector(1, 1, 0, false), // S=1: detected
            rca_vector(1, 1, 1, false), // S=0: no difference
            rca_vector(1, 1, 1, true),  // S=1: detected
        ];
        let matrix = fault_sim(&m, &fl, &vs, SimMode::Serial).unwrap();
        assert!(!matrix.is_detected_by(class, 0));
        assert!(matrix.is_detected_by(class, 1));
        assert!(!matrix.is_detected_by(class, 2));
        assert!(matrix.is_detected_by(class, 3));
        assert_eq!(matrix.first_detection(class), Some(1));
    }

    #[test]
    fn coverage_arithmetic() {
        let m = build_rca(1).unwrap();
        let fl = collapse_equivalent(&m, &enumerate_faults(&m, FaultScope::All));
        let matrix = fault_sim(&m, &fl, &[], SimMode::Batched).unwrap();
        let rep = coverage(&m, &fl, &matrix);
        assert_eq!(rep.detected, 0);
        assert_eq!(rep.total_classes, fl.num_classes());
        assert_eq!(rep.undetected.len(), rep.total_classes);
        assert_eq!(rep.coverage_pct, 0.0);
        assert!(!rep.full_coverage());
    }

    #[test]
    fn faulty_outputs_match_plain_outputs_without_fault() {
        let m = build_rca(4).unwrap();
        let vs = vec![rca_vector(4, 3, 5, true), rca_vector(4, 15, 15, false)];
        assert_eq!(faulty_output_words(&m, None, &vs).unwrap(), output_words(&m, &vs).unwrap());
    }

    #[test]
    fn faulty_outputs_show_observation_and_propagation_faults() {
        let m = build_rca(1).unwrap();
        let v = vec![rca_vector(1, 1, 0, false)]; // good: S=1, Cout=0
        // Observation-only fault on the S port bit.
        let s_port = m.port_index("S").unwrap() as u32;
        let f = Fault { site: FaultSite::PortBit { port: s_port, bit: 0 }, stuck: false };
        let out = faulty_output_words(&m, Some(f), &v).unwrap();
        let s = &out.iter().find(|(n, _)| n == "S").unwrap().1;
        assert_eq!(s[0] & 1, 0);
        // Propagating fault: input A stuck at 1 with A=1 changes nothing.
        let a_port = m.port_index("A").unwrap() as u32;
        let f = Fault { site: FaultSite::PortBit { port: a_port, bit: 0 }, stuck: true };
        let out = faulty_output_words(&m, Some(f), &v).unwrap();
        assert_eq!(out, output_words(&m, &v).unwrap());
    }

    #[test]
    fn fault_sim_rejects_foreign_lists() {
        let m2 = build_rca(2).unwrap();
        let m4 = build_rca(4).unwrap();
        let fl4 = enumerate_faults(&m4, FaultScope::All);
        assert!(matches!(
            fault_sim(&m2, &fl4, &[], SimMode::Serial),
            Err(SimError::FaultMismatch(_))
        ));
    }
}
