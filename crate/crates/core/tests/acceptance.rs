//! Acceptance gate: one test per shipped claim, each printing a single
//! `[acceptance] criterion N: PASS/FAIL — detail` line (visible with
//! `--nocapture`, and always visible for failing criteria).
//!
//! Criterion 3 is knowingly partial: its four-pattern adder sub-claim does
//! not hold on this (or any shared-XOR) adder-cell structure, and the test
//! fails with the counterexample rather than weakening the check. See the
//! README's "Known limitation" section.

mod common;

use std::collections::HashMap;
use std::time::Instant;

use common::{core_fault_list, dft_vector, lane_value, mult_vector, rca_vector};
use ctam_core::bist::{injection_sweep, run_bist_session, BistProgram, SESSION_CYCLES};
use ctam_core::fault::{collapse_equivalent, enumerate_faults, Fault, FaultScope};
use ctam_core::netlist::{
    apply_dft_transform, build_array_mult, build_mult_cell, build_rca, Netlist,
};
use ctam_core::sim::{
    coverage, fault_sim, faulty_output_words, output_words, SimMode, TestVector,
};
use ctam_core::tpg::{
    mult_exhaustive_ctest_vectors, mult_table2_vectors, rca_ctest_vectors,
    rca_deterministic_vectors, DetVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {criterion}: {tag} — {detail}");
}

#[test]
fn criterion_1_adder_eight_vector_full_coverage() {
    let mut details = Vec::new();
    let mut ok = true;
    for n in [4usize, 8, 16, 64] {
        let t0 = Instant::now();
        let m = build_rca(n).unwrap();
        let fl = collapse_equivalent(&m, &enumerate_faults(&m, FaultScope::All));
        let vs = rca_ctest_vectors(n);
        let matrix = fault_sim(&m, &fl, &vs, SimMode::Batched).unwrap();
        let rep = coverage(&m, &fl, &matrix);
        let dt = t0.elapsed();
        let this_ok = vs.len() == 8 && rep.coverage_pct == 100.0 && dt.as_secs_f64() < 1.0;
        ok &= this_ok;
        details.push(format!(
            "n={n}: {} vectors, {:.2}% of {} classes in {:.0} ms",
            vs.len(),
            rep.coverage_pct,
            rep.total_classes,
            dt.as_secs_f64() * 1e3
        ));
    }
    let detail = details.join("; ");
    verdict(1, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_2_multiplier_five_vector_full_coverage() {
    let mut details = Vec::new();
    let mut ok = true;
    for n in [4usize, 8, 16, 64] {
        let m = apply_dft_transform(&build_array_mult(n).unwrap()).unwrap();
        let fl = core_fault_list(&m);
        let vs = mult_table2_vectors(n).unwrap();
        let t0 = Instant::now();
        let matrix = fault_sim(&m, &fl, &vs, SimMode::Batched).unwrap();
        let sim_dt = t0.elapsed();
        let rep = coverage(&m, &fl, &matrix);
        let this_ok = vs.len() == 5
            && rep.full_coverage()
            && rep.coverage_pct == 100.0
            && (n != 64 || sim_dt.as_secs_f64() < 10.0);
        ok &= this_ok;
        details.push(format!(
            "n={n}: 5 vectors, {:.2}% of {} non-redundant classes ({} redundant) sim {:.0} ms",
            rep.coverage_pct,
            rep.total_classes - rep.redundant,
            rep.redundant,
            sim_dt.as_secs_f64() * 1e3
        ));
    }
    let detail = details.join("; ");
    verdict(2, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_3_cell_level_deterministic_sets() {
    // --- Adder cell, five-pattern set {1,2,3,4,6} ---
    let fa = build_rca(1).unwrap();
    let fa_fl = collapse_equivalent(&fa, &enumerate_faults(&fa, FaultScope::All));
    let fa_vec = |p: u8| rca_vector(1, (p as u128) >> 2 & 1, (p as u128) >> 1 & 1, p & 1 != 0);
    let five: Vec<TestVector> = [1u8, 2, 3, 4, 6].iter().map(|&p| fa_vec(p)).collect();
    let m5 = fault_sim(&fa, &fa_fl, &five, SimMode::Batched).unwrap();
    let five_cov = coverage(&fa, &fa_fl, &m5);
    let sub_a = five_cov.coverage_pct == 100.0 && fa_fl.num_classes() == 26;

    // --- Adder cell, four-pattern set {1,3,4,6} ---
    let four: Vec<TestVector> = [1u8, 3, 4, 6].iter().map(|&p| fa_vec(p)).collect();
    let m4 = fault_sim(&fa, &fa_fl, &four, SimMode::Batched).unwrap();
    let four_cov = coverage(&fa, &fa_fl, &m4);
    let sub_b = four_cov.coverage_pct == 100.0;
    // Characterize the gap precisely: the one missed class and its unique test.
    let exhaustive: Vec<TestVector> = (0..8u8).map(fa_vec).collect();
    let m8 = fault_sim(&fa, &fa_fl, &exhaustive, SimMode::Batched).unwrap();
    let gap: Vec<String> = (0..fa_fl.num_classes())
        .filter(|&c| !m4.detected(c))
        .map(|c| {
            let tests: Vec<usize> = (0..8).filter(|&v| m8.is_detected_by(c, v)).collect();
            format!(
                "{} (only exhaustive pattern(s) {:?} detect it)",
                fa_fl.classes()[c].representative.display(&fa),
                tests
            )
        })
        .collect();

    // --- Multiplier cell, five-pattern set with its (1,0)/(0,1) operand cases ---
    let mc = build_mult_cell();
    let mc_fl = collapse_equivalent(&mc, &enumerate_faults(&mc, FaultScope::All));
    let mc_vec = |x: u8, y: u8, cin: u8, pin: u8| {
        let mut v = TestVector::new();
        v.set("X", vec![x != 0]);
        v.set("Y", vec![y != 0]);
        v.set("Cin", vec![cin != 0]);
        v.set("Pin", vec![pin != 0]);
        v
    };
    let cell_five = vec![
        mc_vec(1, 0, 0, 1), // pattern 1
        mc_vec(1, 0, 1, 1), // pattern 3
        mc_vec(1, 1, 0, 0), // pattern 4
        mc_vec(0, 1, 1, 0), // pattern 2, X side low
        mc_vec(1, 1, 0, 1), // pattern 5
    ];
    let mm = fault_sim(&mc, &mc_fl, &cell_five, SimMode::Batched).unwrap();
    let mc_cov = coverage(&mc, &mc_fl, &mm);
    // Exactly two classes beyond the adder's 26: the operand stuck-at-1
    // pair, each testable only through its dedicated operand case.
    let x_sa1 = mc_fl.class_of(&Fault::parse("port:X:0:sa1", &mc).unwrap()).unwrap();
    let y_sa1 = mc_fl.class_of(&Fault::parse("port:Y:0:sa1", &mc).unwrap()).unwrap();
    let x_tests: Vec<usize> = (0..5).filter(|&v| mm.is_detected_by(x_sa1, v)).collect();
    let y_tests: Vec<usize> = (0..5).filter(|&v| mm.is_detected_by(y_sa1, v)).collect();
    let sub_c = mc_cov.coverage_pct == 100.0
        && mc_fl.num_classes() == 28
        && mc_fl.num_classes() - fa_fl.num_classes() == 2
        && x_tests == vec![3]
        && y_tests == vec![0, 1];

    let ok = sub_a && sub_b && sub_c;
    let detail = format!(
        "adder 5-set {{1,2,3,4,6}}: {}/26 [{}]; adder 4-set {{1,3,4,6}}: {}/26 [{}]{}{}; \
         multiplier-cell 5-set: {}/28, +2 operand classes, X-sa1 via (0,1) case only, \
         Y-sa1 via (1,0) cases only [{}]",
        five_cov.detected,
        if sub_a { "ok" } else { "FAIL" },
        four_cov.detected,
        if sub_b { "ok" } else { "FAIL" },
        if gap.is_empty() { String::new() } else { ", missed: ".to_string() + &gap.join(", ") },
        if sub_b { "" } else { " — the four-pattern claim does not hold on this cell structure" },
        mc_cov.detected,
        if sub_c { "ok" } else { "FAIL" },
    );
    verdict(3, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_4_mode_zero_transparency() {
    // Exhaustive at n = 4.
    let n = 4usize;
    let plain = build_array_mult(n).unwrap();
    let gated = apply_dft_transform(&plain).unwrap();
    let mut mismatches = 0u64;
    let mut batch_p: Vec<TestVector> = Vec::with_capacity(64);
    let mut batch_g: Vec<TestVector> = Vec::with_capacity(64);
    let flush = |bp: &mut Vec<TestVector>, bg: &mut Vec<TestVector>, mismatches: &mut u64| {
        if bp.is_empty() {
            return;
        }
        let wp = output_words(&plain, bp).unwrap();
        let wg = output_words(&gated, bg).unwrap();
        for lane in 0..bp.len() {
            if lane_value(&wp, "OUT", lane) != lane_value(&wg, "OUT", lane) {
                *mismatches += 1;
            }
        }
        bp.clear();
        bg.clear();
    };
    for combo in 0..1u64 << (4 * n) {
        let (x, y, p, c) = (combo & 15, combo >> 4 & 15, combo >> 8 & 15, combo >> 12 & 15);
        batch_p.push(mult_vector(n, x, y, p, c));
        batch_g.push(dft_vector(n, x, y, p, c, false));
        if batch_p.len() == 64 {
            flush(&mut batch_p, &mut batch_g, &mut mismatches);
        }
    }
    flush(&mut batch_p, &mut batch_g, &mut mismatches);
    let exhaustive_ok = mismatches == 0;

    // 10^5 seeded random vectors at n ∈ {8, 16}.
    let mut random_ok = true;
    for n in [8usize, 16] {
        let plain = build_array_mult(n).unwrap();
        let gated = apply_dft_transform(&plain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40 + n as u64);
        let mask = (1u64 << n) - 1;
        let mut remaining = 100_000usize;
        while remaining > 0 {
            let take = remaining.min(64);
            let mut bp = Vec::with_capacity(take);
            let mut bg = Vec::with_capacity(take);
            for _ in 0..take {
                let (x, y) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
                let (p, c) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
                bp.push(mult_vector(n, x, y, p, c));
                bg.push(dft_vector(n, x, y, p, c, false));
            }
            let wp = output_words(&plain, &bp).unwrap();
            let wg = output_words(&gated, &bg).unwrap();
            for lane in 0..take {
                random_ok &= lane_value(&wp, "OUT", lane) == lane_value(&wg, "OUT", lane);
            }
            remaining -= take;
        }
    }

    let ok = exhaustive_ok && random_ok;
    let detail = format!(
        "n=4 exhaustive 65536/65536 identical ({mismatches} mismatches); \
         n=8 and n=16: 100000 random vectors each, all identical"
    );
    verdict(4, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_5_self_test_sessions() {
    // Fault-free session: exactly six cycles, all five responses golden.
    let program4 = BistProgram::build(4).unwrap();
    let m4 = apply_dft_transform(&build_array_mult(4).unwrap()).unwrap();
    let report = run_bist_session(&m4, &program4, None).unwrap();
    let free_ok = report.passed()
        && report.total_cycles == SESSION_CYCLES
        && SESSION_CYCLES == 6
        && report.cycles.len() == 5
        && report.cycles.iter().all(|c| c.matched);

    // Full injection sweep at n = 8: session outcomes must agree with the
    // detection matrix on every non-redundant class.
    let n = 8usize;
    let m8 = apply_dft_transform(&build_array_mult(n).unwrap()).unwrap();
    let fl = core_fault_list(&m8);
    let program8 = BistProgram::build(n).unwrap();
    let sweep = injection_sweep(&m8, &program8, &fl).unwrap();
    let sweep_ok = sweep.clean() && sweep.injected == fl.num_classes() - fl.redundant_count();

    let ok = free_ok && sweep_ok;
    let detail = format!(
        "fault-free session: 6 cycles, 5/5 golden matches [{}]; n=8 sweep: {} faults injected, \
         {} failed their session, 0 disagreements with the detection matrix [{}]",
        if free_ok { "ok" } else { "FAIL" },
        sweep.injected,
        sweep.failed,
        if sweep_ok { "ok" } else { "FAIL" },
    );
    verdict(5, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_6_oracle_equivalences() {
    // (a) Serial vs. batched bit-identical on every shipped suite.
    let mut serial_ok = true;
    {
        let m = build_rca(8).unwrap();
        let fl = collapse_equivalent(&m, &enumerate_faults(&m, FaultScope::All));
        for vs in [
            rca_ctest_vectors(8),
            rca_deterministic_vectors(8, DetVariant::Five),
            rca_deterministic_vectors(8, DetVariant::Four),
        ] {
            serial_ok &= fault_sim(&m, &fl, &vs, SimMode::Serial).unwrap()
                == fault_sim(&m, &fl, &vs, SimMode::Batched).unwrap();
        }
        let d = apply_dft_transform(&build_array_mult(4).unwrap()).unwrap();
        let fl = core_fault_list(&d);
        for vs in [mult_table2_vectors(4).unwrap(), mult_exhaustive_ctest_vectors(4).unwrap()] {
            serial_ok &= fault_sim(&d, &fl, &vs, SimMode::Serial).unwrap()
                == fault_sim(&d, &fl, &vs, SimMode::Batched).unwrap();
        }
    }

    // (b) Collapsed classes equal exhaustive faulty-function partitions at
    // cell scale.
    fn partition_matches(m: &Netlist, vectors: &[TestVector]) -> bool {
        let fl = collapse_equivalent(m, &enumerate_faults(m, FaultScope::All));
        let mut by_sig: HashMap<Vec<Vec<u64>>, Vec<u32>> = HashMap::new();
        for (i, &f) in fl.faults().iter().enumerate() {
            let sig: Vec<Vec<u64>> = faulty_output_words(m, Some(f), vectors)
                .unwrap()
                .into_iter()
                .map(|(_, ws)| ws)
                .collect();
            by_sig.entry(sig).or_default().push(i as u32);
        }
        let mut functional: Vec<Vec<u32>> = by_sig.into_values().collect();
        functional.sort();
        let mut structural: Vec<Vec<u32>> =
            fl.classes().iter().map(|c| c.members.clone()).collect();
        for mem in &mut structural {
            mem.sort();
        }
        structural.sort();
        functional == structural
    }
    let fa = build_rca(1).unwrap();
    let fa_inputs: Vec<TestVector> =
        (0..8u128).map(|k| rca_vector(1, k >> 2 & 1, k >> 1 & 1, k & 1 != 0)).collect();
    let mc = build_mult_cell();
    let mc_inputs: Vec<TestVector> = (0..16u64)
        .map(|k| {
            let mut v = TestVector::new();
            v.set("X", vec![k & 8 != 0]);
            v.set("Y", vec![k & 4 != 0]);
            v.set("Cin", vec![k & 2 != 0]);
            v.set("Pin", vec![k & 1 != 0]);
            v
        })
        .collect();
    let partition_ok = partition_matches(&fa, &fa_inputs) && partition_matches(&mc, &mc_inputs);

    // (c) Functional correctness: OUT = X·Y + P_top (+ Cb), exhaustive n=4.
    let n = 4usize;
    let m = build_array_mult(n).unwrap();
    let mut arith_ok = true;
    let mut batch: Vec<TestVector> = Vec::with_capacity(64);
    let mut want: Vec<u128> = Vec::with_capacity(64);
    let flush = |batch: &mut Vec<TestVector>, want: &mut Vec<u128>, ok: &mut bool| {
        if batch.is_empty() {
            return;
        }
        let words = output_words(&m, batch).unwrap();
        for (lane, w) in want.iter().enumerate() {
            *ok &= lane_value(&words, "OUT", lane) == *w;
        }
        batch.clear();
        want.clear();
    };
    for combo in 0..1u64 << (4 * n) {
        let (x, y, p, c) = (combo & 15, combo >> 4 & 15, combo >> 8 & 15, combo >> 12 & 15);
        batch.push(mult_vector(n, x, y, p, c));
        want.push((x * y + p + c) as u128);
        if batch.len() == 64 {
            flush(&mut batch, &mut want, &mut arith_ok);
        }
    }
    flush(&mut batch, &mut want, &mut arith_ok);

    let ok = serial_ok && partition_ok && arith_ok;
    let detail = format!(
        "serial==batched on all 5 suites [{}]; collapse classes == exhaustive signature \
         partitions on both cells [{}]; OUT == X*Y + P_top + Cb exhaustive at n=4 [{}]",
        if serial_ok { "ok" } else { "FAIL" },
        if partition_ok { "ok" } else { "FAIL" },
        if arith_ok { "ok" } else { "FAIL" },
    );
    verdict(6, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_7_structural_overhead() {
    let mut ok = true;
    let mut ratios = Vec::new();
    let mut details = Vec::new();
    for n in [4usize, 16, 64] {
        let plain = build_array_mult(n).unwrap();
        let gated = apply_dft_transform(&plain).unwrap();
        let (base, with) = (plain.stats(), gated.stats());
        ok &= with.muxes == n - 1;
        ok &= with.gates == base.gates + (n - 1);
        let ratio = (with.gates - base.gates) as f64 / base.gates as f64;
        ratios.push(ratio);
        details.push(format!("n={n}: {} muxes, overhead {:.3}%", with.muxes, ratio * 100.0));
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    let detail = format!(
        "{}; relative overhead strictly decreasing [{}]",
        details.join("; "),
        if decreasing { "ok" } else { "FAIL" }
    );
    verdict(7, ok, &detail);
    assert!(ok, "{detail}");
}
