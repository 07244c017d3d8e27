//! `ctam` — command-line front end for the testable array-multiplier toolkit.
//!
//! Subcommands tie the library crates into reproducible runs:
//!
//! - `gen`   builds a circuit and writes it as JSON or structural HDL,
//! - `fsim`  runs stuck-at fault simulation for a vector suite and emits
//!   coverage reports (JSON or CSV),
//! - `bist`  runs self-test sessions against the ROM-driven program,
//!   optionally with an injected fault or a full injection sweep,
//! - `topup` searches (seeded, reproducible) for supplemental vectors that
//!   detect the faults a previous `fsim` report left undetected.
//!
//! Exit codes: 0 when the run's claims hold, 1 when they are violated
//! (coverage below 100%, a self-test disagreement, an unclosed top-up gap),
//! 2 for usage errors. Reports are byte-identical for identical
//! configurations regardless of the `CTAM_WORKERS` override (the CSV summary
//! is the one exception: its last column is wall-clock runtime).

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ctam_core::bist::{injection_sweep, run_bist_session, session_log_json, BistProgram, Verdict};
use ctam_core::export::{export_netlist_hdl, export_netlist_json};
use ctam_core::fault::{
    collapse_equivalent, enumerate_faults, mark_test_mode_redundant, Fault, FaultList, FaultScope,
};
use ctam_core::netlist::{apply_dft_transform, build_array_mult, build_rca, Netlist, PortDir};
use ctam_core::sim::{
    coverage, fault_sim, parse_vector_file, write_vector_file, CoverageReport, SimMode, TestVector,
};
use ctam_core::tpg::{
    explain_patterns, mult_exhaustive_ctest_vectors, mult_table2_vectors, rca_ctest_vectors,
    rca_deterministic_vectors, DetVariant,
};

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "ctam", version, about = "Testable array-multiplier toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a circuit and write it as JSON or structural HDL.
    Gen(GenArgs),
    /// Fault-simulate a vector suite and report coverage.
    Fsim(FsimArgs),
    /// Run ROM-driven self-test sessions (fault-free, injected, or a sweep).
    Bist(BistArgs),
    /// Search for supplemental vectors closing an fsim report's gap.
    Topup(TopupArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Kind {
    /// Ripple-carry adder.
    Rca,
    /// Plain array multiplier.
    Mult,
    /// Array multiplier with the test-mode border muxes inserted.
    DftMult,
    /// DFT multiplier driven by the self-test ROM program.
    BistMult,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Rca => "rca",
            Kind::Mult => "mult",
            Kind::DftMult => "dft-mult",
            Kind::BistMult => "bist-mult",
        })
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Scope {
    /// Faults of the functional circuit only.
    Core,
    /// Core faults plus the inserted test hardware.
    All,
}

impl Scope {
    fn as_str(self) -> &'static str {
        match self {
            Scope::Core => "core",
            Scope::All => "all",
        }
    }
}

impl From<Scope> for FaultScope {
    fn from(s: Scope) -> FaultScope {
        match s {
            Scope::Core => FaultScope::Core,
            Scope::All => FaultScope::All,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GenFormat {
    Json,
    Hdl,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    /// Circuit family.
    #[arg(long, value_enum)]
    kind: Kind,
    /// Operand width in bits.
    #[arg(long)]
    n: usize,
    /// Output file format.
    #[arg(long, value_enum, default_value_t = GenFormat::Json)]
    format: GenFormat,
    /// Output path (default: <circuit-name>.json or .v in the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FsimArgs {
    /// Circuit family (rca, mult, or dft-mult).
    #[arg(long, value_enum)]
    kind: Kind,
    /// Operand width in bits.
    #[arg(long)]
    n: usize,
    /// Vector suite: ctest8 | det5 | det4 | table2-5 | exhaustive8 | <vector file>.
    #[arg(long)]
    suite: String,
    /// Fault universe.
    #[arg(long, value_enum, default_value_t = Scope::Core)]
    scope: Scope,
    /// Report file format for --out.
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Report output path (default: print the report to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the per-cell pattern grids the suite applies (multiplier kinds).
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct BistArgs {
    /// Circuit family; self-test sessions exist for bist-mult only.
    #[arg(long, value_enum, default_value_t = Kind::BistMult)]
    kind: Kind,
    /// Operand width in bits.
    #[arg(long)]
    n: usize,
    /// Inject one stuck-at fault (e.g. gate:12:in0:sa1) and report its session.
    #[arg(long)]
    inject: Option<String>,
    /// Sweep every non-redundant collapsed core fault through its own session.
    #[arg(long)]
    sweep: bool,
    /// Write the session log (JSON) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopupArgs {
    /// Coverage report (JSON) from a previous `ctam fsim` run.
    report: PathBuf,
    /// Seed of the reproducible vector search.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output vector file for the supplemental vectors found.
    #[arg(long)]
    out: PathBuf,
}

// ---------------------------------------------------------------------------
// Entry point and exit-code policy
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    // Die quietly like other line-oriented tools when a downstream pipe
    // closes early (e.g. `ctam fsim ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Fsim(a) => cmd_fsim(a),
        Cmd::Bist(a) => cmd_bist(a),
        Cmd::Topup(a) => cmd_topup(a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

const CLAIMS_HOLD: ExitCode = ExitCode::SUCCESS;
const CLAIMS_VIOLATED: ExitCode = ExitCode::FAILURE;

fn build_circuit(kind: Kind, n: usize) -> Result<Netlist, String> {
    match kind {
        Kind::Rca => build_rca(n).map_err(|e| e.to_string()),
        Kind::Mult => build_array_mult(n).map_err(|e| e.to_string()),
        Kind::DftMult | Kind::BistMult => build_array_mult(n)
            .and_then(|m| apply_dft_transform(&m))
            .map_err(|e| e.to_string()),
    }
}

fn collapsed_fault_list(m: &Netlist, scope: Scope) -> FaultList {
    let mut fl = collapse_equivalent(m, &enumerate_faults(m, scope.into()));
    mark_test_mode_redundant(m, &mut fl);
    fl
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn cmd_gen(a: GenArgs) -> Result<ExitCode, String> {
    let m = build_circuit(a.kind, a.n)?;
    let (text, ext) = match a.format {
        GenFormat::Json => (export_netlist_json(&m), "json"),
        GenFormat::Hdl => (export_netlist_hdl(&m), "v"),
    };
    let path = a.out.unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", m.name())));
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;

    let st = m.stats();
    println!(
        "{} n={}: cells={} muxes={} gates={} nets={}",
        m.name(),
        a.n,
        st.cells,
        st.muxes,
        st.gates,
        st.nets
    );
    if matches!(a.kind, Kind::DftMult | Kind::BistMult) {
        let core_gates = st.gates - st.muxes;
        println!(
            "dft overhead: {} muxes / {} core gates = {:.3}%",
            st.muxes,
            core_gates,
            100.0 * st.muxes as f64 / core_gates as f64
        );
    }
    if a.kind == Kind::BistMult {
        let program = BistProgram::build(a.n).map_err(|e| e.to_string())?;
        let hex: Vec<String> = program.rom.iter().map(|e| e.packed_hex()).collect();
        println!("rom: {} entries x 12 bits [{}]", program.rom.len(), hex.join(","));
    }
    println!("wrote {}", path.display());
    Ok(CLAIMS_HOLD)
}

// ---------------------------------------------------------------------------
// fsim
// ---------------------------------------------------------------------------

/// The pinned construction choices reports carry so every number is
/// traceable to one concrete circuit.
#[derive(Serialize)]
struct DesignPins {
    fa_structure: &'static str,
    mux_loopback: &'static str,
    tiling_phase: &'static str,
}

const DESIGN: DesignPins = DesignPins {
    fa_structure: "sum = (a ^ b) ^ cin; carry = a\u{b7}b | (a ^ b)\u{b7}cin (first xor shared)",
    mux_loopback: "pin(i, n-1) <- pout(i-1, 0) in test mode, cout(i-1, n-1) otherwise",
    tiling_phase: "even-index rows/columns carry the first pattern of each alternating pair",
};

#[derive(Serialize)]
struct FsimReport<'a> {
    circuit: String,
    n: usize,
    suite: &'a str,
    scope: &'a str,
    vectors: usize,
    design: DesignPins,
    coverage: &'a CoverageReport,
}

fn resolve_suite(kind: Kind, n: usize, suite: &str) -> Result<Vec<TestVector>, String> {
    let adder_only = |vs: Vec<TestVector>| -> Result<Vec<TestVector>, String> {
        if kind == Kind::Rca {
            Ok(vs)
        } else {
            Err(format!("suite '{suite}' applies to --kind rca"))
        }
    };
    // The constant multiplier suites drive the circuit in test mode; for the
    // plain multiplier (which has no test_mode port) the same operand values
    // are applied functionally, which is exactly the comparison that shows
    // why the border muxes are needed.
    let mult_suite = |vs: Result<Vec<TestVector>, _>| -> Result<Vec<TestVector>, String> {
        let mut vs = vs.map_err(|e: ctam_core::tpg::TpgError| e.to_string())?;
        match kind {
            Kind::DftMult => Ok(vs),
            Kind::Mult => {
                for v in &mut vs {
                    v.remove("test_mode");
                }
                Ok(vs)
            }
            _ => Err(format!("suite '{suite}' applies to --kind mult or dft-mult")),
        }
    };
    match suite {
        "ctest8" => adder_only(rca_ctest_vectors(n)),
        "det5" => adder_only(rca_deterministic_vectors(n, DetVariant::Five)),
        "det4" => adder_only(rca_deterministic_vectors(n, DetVariant::Four)),
        "table2-5" => mult_suite(mult_table2_vectors(n)),
        "exhaustive8" => mult_suite(mult_exhaustive_ctest_vectors(n)),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("missing vector file {path}: {e}"))?;
            parse_vector_file(&text).map_err(|e| e.to_string())
        }
    }
}

fn cmd_fsim(a: FsimArgs) -> Result<ExitCode, String> {
    if a.kind == Kind::BistMult {
        return Err("fsim operates on rca, mult, or dft-mult (use `ctam bist` for sessions)".into());
    }
    let m = build_circuit(a.kind, a.n)?;
    let vectors = resolve_suite(a.kind, a.n, &a.suite)?;
    if a.explain {
        if a.kind == Kind::Rca {
            return Err("--explain draws multiplier cell grids; use a multiplier kind".into());
        }
        print!("{}", explain_patterns(&m, &vectors).map_err(|e| e.to_string())?);
    }

    let fl = collapsed_fault_list(&m, a.scope);
    let t0 = Instant::now();
    let matrix = fault_sim(&m, &fl, &vectors, SimMode::Batched).map_err(|e| e.to_string())?;
    let runtime_ms = t0.elapsed().as_millis();
    let cov = coverage(&m, &fl, &matrix);

    println!(
        "{} n={} suite={} scope={}: vectors={} classes={} redundant={} detected={} \
         coverage={:.2}% runtime={}ms",
        a.kind,
        a.n,
        a.suite,
        a.scope.as_str(),
        vectors.len(),
        cov.total_classes,
        cov.redundant,
        cov.detected,
        cov.coverage_pct,
        runtime_ms
    );
    for f in &cov.undetected {
        println!("undetected: {f}");
    }

    let report = FsimReport {
        circuit: a.kind.to_string(),
        n: a.n,
        suite: &a.suite,
        scope: a.scope.as_str(),
        vectors: vectors.len(),
        design: DESIGN,
        coverage: &cov,
    };
    let text = match a.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => format!(
            "circuit,n,suite,vectors,faults_total,redundant,detected,coverage_pct,runtime_ms\n\
             {},{},{},{},{},{},{},{:.2},{}\n",
            a.kind,
            a.n,
            a.suite,
            vectors.len(),
            cov.total_classes,
            cov.redundant,
            cov.detected,
            cov.coverage_pct,
            runtime_ms
        ),
    };
    match &a.out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }

    Ok(if cov.full_coverage() { CLAIMS_HOLD } else { CLAIMS_VIOLATED })
}

// ---------------------------------------------------------------------------
// bist
// ---------------------------------------------------------------------------

fn cmd_bist(a: BistArgs) -> Result<ExitCode, String> {
    if a.kind != Kind::BistMult {
        return Err("self-test sessions exist for --kind bist-mult only".into());
    }
    let m = build_circuit(a.kind, a.n)?;
    let program = BistProgram::build(a.n).map_err(|e| e.to_string())?;

    let fault_free = run_bist_session(&m, &program, None).map_err(|e| e.to_string())?;
    let mut claims_hold = fault_free.passed();
    match fault_free.verdict {
        Verdict::Pass => println!("fault-free session: PASS in {} cycles", fault_free.total_cycles),
        Verdict::FailAt(c) => println!("fault-free session: FAIL at cycle {c}"),
    }

    let injected = match &a.inject {
        Some(text) => {
            let fault = Fault::parse(text, &m).map_err(|e| e.to_string())?;
            let rep = run_bist_session(&m, &program, Some(fault)).map_err(|e| e.to_string())?;
            match rep.verdict {
                Verdict::FailAt(c) => println!("injected {text}: FAIL at cycle {c}"),
                Verdict::Pass => {
                    println!(
                        "injected {text}: PASS in {} cycles (fault escaped)",
                        rep.total_cycles
                    );
                    claims_hold = false;
                }
            }
            Some(rep)
        }
        None => None,
    };

    if a.sweep {
        let fl = collapsed_fault_list(&m, Scope::Core);
        let sweep = injection_sweep(&m, &program, &fl).map_err(|e| e.to_string())?;
        println!("injected: {}, failed-as-expected: {}", sweep.injected, sweep.failed);
        for d in &sweep.disagreements {
            println!("disagreement: {d}");
        }
        claims_hold &= sweep.clean();
    }

    if let Some(path) = &a.out {
        let log = session_log_json(injected.as_ref().unwrap_or(&fault_free));
        std::fs::write(path, log).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }

    Ok(if claims_hold { CLAIMS_HOLD } else { CLAIMS_VIOLATED })
}

// ---------------------------------------------------------------------------
// topup
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct ReportIn {
    circuit: String,
    n: usize,
    scope: String,
    coverage: CoverageIn,
}

#[derive(Deserialize)]
struct CoverageIn {
    undetected: Vec<String>,
}

/// Batches of random vectors per search; with 64 vectors per batch this
/// bounds the search at 16384 candidates.
const TOPUP_BATCH_BUDGET: usize = 256;

fn random_vector(m: &Netlist, rng: &mut ChaCha8Rng) -> TestVector {
    let mut v = TestVector::new();
    for p in m.ports() {
        if p.dir != PortDir::Input {
            continue;
        }
        if p.name == "test_mode" {
            // Supplemental vectors are searched in test mode, like the
            // deterministic suites they extend.
            v.set(&p.name, vec![true]);
        } else {
            let bits = (0..p.width()).map(|_| rng.next_u64() & 1 == 1).collect();
            v.set(&p.name, bits);
        }
    }
    v
}

fn cmd_topup(a: TopupArgs) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&a.report)
        .map_err(|e| format!("cannot read {}: {e}", a.report.display()))?;
    let report: ReportIn =
        serde_json::from_str(&text).map_err(|e| format!("not an fsim report: {e}"))?;
    let kind = match report.circuit.as_str() {
        "rca" => Kind::Rca,
        "mult" => Kind::Mult,
        "dft-mult" => Kind::DftMult,
        other => return Err(format!("cannot top up circuit kind '{other}'")),
    };
    let scope = match report.scope.as_str() {
        "core" => Scope::Core,
        "all" => Scope::All,
        other => return Err(format!("unknown fault scope '{other}'")),
    };

    let m = build_circuit(kind, report.n)?;
    let fl = collapsed_fault_list(&m, scope);
    let mut remaining: BTreeSet<usize> = BTreeSet::new();
    for name in &report.coverage.undetected {
        let ci = fl
            .classes()
            .iter()
            .position(|c| c.representative.display(&m) == *name)
            .ok_or_else(|| format!("fault '{name}' not found in {} n={}", kind, report.n))?;
        remaining.insert(ci);
    }
    let initial = remaining.len();
    if initial == 0 {
        std::fs::write(&a.out, write_vector_file(&[]))
            .map_err(|e| format!("cannot write {}: {e}", a.out.display()))?;
        println!("0 undetected faults in the report; wrote empty supplement {}", a.out.display());
        return Ok(CLAIMS_HOLD);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut kept: Vec<TestVector> = Vec::new();
    'search: for _ in 0..TOPUP_BATCH_BUDGET {
        let batch: Vec<TestVector> = (0..64).map(|_| random_vector(&m, &mut rng)).collect();
        let matrix = fault_sim(&m, &fl, &batch, SimMode::Batched).map_err(|e| e.to_string())?;
        for (lane, cand) in batch.iter().enumerate() {
            let hits: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&ci| matrix.is_detected_by(ci, lane))
                .collect();
            if hits.is_empty() {
                continue;
            }
            let mut v = cand.clone();
            v.label = Some(format!("topup-{}", kept.len()));
            kept.push(v);
            for ci in hits {
                remaining.remove(&ci);
            }
            if remaining.is_empty() {
                break 'search;
            }
        }
    }

    std::fs::write(&a.out, write_vector_file(&kept))
        .map_err(|e| format!("cannot write {}: {e}", a.out.display()))?;
    println!(
        "{} n={} seed={}: {} of {} undetected faults covered by {} supplemental vectors",
        kind,
        report.n,
        a.seed,
        initial - remaining.len(),
        initial,
        kept.len()
    );
    for ci in &remaining {
        println!("still undetected: {}", fl.classes()[*ci].representative.display(&m));
    }
    println!("wrote {}", a.out.display());
    Ok(if remaining.is_empty() { CLAIMS_HOLD } else { CLAIMS_VIOLATED })
}
