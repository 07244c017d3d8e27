//! Integration tests for circuit generation: arithmetic correctness of the
//! generated arrays, structural invariants, determinism, and the behavior
//! of the test-mode border transform.

mod common;

use common::{dft_vector, lane_value, mult_vector, port_value, rca_vector};
use ctam_core::export::export_netlist_json;
use ctam_core::netlist::{
    apply_dft_transform, build_array_mult, build_rca, GateKind, NetlistError, Role,
};
use ctam_core::sim::{good_net_words, good_sim, output_words, TestVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn adder_matches_integer_addition_exhaustively() {
    for n in 1..=3usize {
        let m = build_rca(n).unwrap();
        for a in 0..1u128 << n {
            for b in 0..1u128 << n {
                for cin in [false, true] {
                    let outs = good_sim(&m, &rca_vector(n, a, b, cin)).unwrap();
                    let got = port_value(&outs, "S") | port_value(&outs, "Cout") << n;
                    assert_eq!(got, a + b + cin as u128, "n={n} a={a} b={b} cin={cin}");
                }
            }
        }
    }
}

#[test]
fn adder_matches_integer_addition_at_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [8usize, 16, 64] {
        let m = build_rca(n).unwrap();
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        for _ in 0..200 {
            let a = rng.gen::<u64>() & mask;
            let b = rng.gen::<u64>() & mask;
            let cin = rng.gen::<bool>();
            let outs = good_sim(&m, &rca_vector(n, a as u128, b as u128, cin)).unwrap();
            let got = port_value(&outs, "S") | port_value(&outs, "Cout") << n;
            assert_eq!(got, a as u128 + b as u128 + cin as u128);
        }
    }
}

/// The array computes OUT = X·Y + P_top + Cb exactly in 2n bits; checked
/// over the complete 2^16 input space at n = 4, 64 vectors per batch.
#[test]
fn multiplier_identity_exhaustive_n4() {
    let n = 4usize;
    let m = build_array_mult(n).unwrap();
    let mut batch: Vec<TestVector> = Vec::with_capacity(64);
    let mut expected: Vec<u128> = Vec::with_capacity(64);
    let flush = |batch: &mut Vec<TestVector>, expected: &mut Vec<u128>| {
        if batch.is_empty() {
            return;
        }
        let words = output_words(&m, batch).unwrap();
        for (lane, want) in expected.iter().enumerate() {
            assert_eq!(lane_value(&words, "OUT", lane), *want);
        }
        batch.clear();
        expected.clear();
    };
    for combo in 0..1u64 << (4 * n) {
        let (x, y, p, c) = (combo & 15, combo >> 4 & 15, combo >> 8 & 15, combo >> 12 & 15);
        batch.push(mult_vector(n, x, y, p, c));
        expected.push((x * y + p + c) as u128);
        if batch.len() == 64 {
            flush(&mut batch, &mut expected);
        }
    }
    flush(&mut batch, &mut expected);
}

#[test]
fn multiplier_identity_random_wide() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [6usize, 8, 16] {
        let m = build_array_mult(n).unwrap();
        let mask = (1u64 << n) - 1;
        for _ in 0..100 {
            let (x, y) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
            let (p, c) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
            let outs = good_sim(&m, &mult_vector(n, x, y, p, c)).unwrap();
            assert_eq!(
                port_value(&outs, "OUT"),
                x as u128 * y as u128 + p as u128 + c as u128
            );
        }
    }
}

#[test]
fn generators_are_deterministic() {
    for _ in 0..2 {
        assert_eq!(
            export_netlist_json(&build_rca(8).unwrap()),
            export_netlist_json(&build_rca(8).unwrap())
        );
        let d1 = apply_dft_transform(&build_array_mult(6).unwrap()).unwrap();
        let d2 = apply_dft_transform(&build_array_mult(6).unwrap()).unwrap();
        assert_eq!(export_netlist_json(&d1), export_netlist_json(&d2));
    }
}

#[test]
fn generator_shapes_and_counts() {
    let m = build_rca(8).unwrap();
    let st = m.stats();
    assert_eq!((st.gates, st.cells, st.muxes), (40, 8, 0)); // 5 gates per adder

    let m = build_array_mult(4).unwrap();
    let st = m.stats();
    assert_eq!((st.gates, st.cells, st.muxes), (96, 16, 0)); // 6 gates per cell
    for (name, w) in [("X", 4), ("Y", 4), ("P_top", 4), ("Cb", 4), ("OUT", 8)] {
        assert_eq!(m.port(name).unwrap().width(), w, "port {name}");
    }

    let d = apply_dft_transform(&build_array_mult(16).unwrap()).unwrap();
    let st = d.stats();
    assert_eq!(st.cells, 256);
    assert_eq!(st.muxes, 15);
    assert_eq!(st.gates, 6 * 256 + 15);
    assert_eq!(d.port("test_mode").unwrap().width(), 1);
    assert_eq!(d.grid_dims(), Some((16, 16)));
}

#[test]
fn transform_keeps_functional_outputs_identical() {
    let n = 6usize;
    let m = build_array_mult(n).unwrap();
    let d = apply_dft_transform(&m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mask = (1u64 << n) - 1;
    for _ in 0..500 {
        let (x, y) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
        let (p, c) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
        let plain = good_sim(&m, &mult_vector(n, x, y, p, c)).unwrap();
        let gated = good_sim(&d, &dft_vector(n, x, y, p, c, false)).unwrap();
        assert_eq!(port_value(&plain, "OUT"), port_value(&gated, "OUT"));
    }
}

/// The border muxes reroute the left-edge column-chain input per mode:
/// functional mode feeds it the row-final carry from above, test mode the
/// row-initial column output from above (the loopback that closes each row
/// into a ring).
#[test]
fn border_mux_selects_carry_or_loopback() {
    let n = 4usize;
    let d = apply_dft_transform(&build_array_mult(n).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let (x, y) = (rng.gen::<u64>() & 15, rng.gen::<u64>() & 15);
        let (p, c) = (rng.gen::<u64>() & 15, rng.gen::<u64>() & 15);
        for tm in [false, true] {
            let words = good_net_words(&d, &[dft_vector(n, x, y, p, c, tm)]).unwrap();
            let val = |net: ctam_core::netlist::NetId| words[net.0 as usize] & 1;
            for i in 1..n {
                let here = d.mult_cell_nets(i, n - 1).unwrap();
                let above_last = d.mult_cell_nets(i - 1, n - 1).unwrap();
                let above_first = d.mult_cell_nets(i - 1, 0).unwrap();
                let want = if tm { val(above_first.pout) } else { val(above_last.cout) };
                assert_eq!(val(here.pin), want, "row {i} tm={tm}");
            }
        }
    }
}

#[test]
fn transform_mux_positions_and_count() {
    for n in [2usize, 4, 8] {
        let d = apply_dft_transform(&build_array_mult(n).unwrap()).unwrap();
        let muxes: Vec<_> = d
            .gates()
            .iter()
            .filter(|g| g.kind == GateKind::Mux2)
            .map(|g| g.cell.unwrap())
            .collect();
        assert_eq!(muxes.len(), n - 1);
        for (k, c) in muxes.iter().enumerate() {
            assert_eq!((c.row as usize, c.col as usize), (k + 1, n - 1));
            assert_eq!(c.role, Role::BorderMux);
        }
    }
}

#[test]
fn generator_input_validation() {
    assert_eq!(build_array_mult(3).unwrap_err(), NetlistError::OddWidth(3));
    assert_eq!(
        build_array_mult(3).unwrap_err().to_string(),
        "pair-tiling requires even width (got n = 3)"
    );
    assert!(build_array_mult(0).is_err());
    assert!(build_array_mult(514).is_err());
    assert!(build_rca(0).is_err());

    let d = apply_dft_transform(&build_array_mult(4).unwrap()).unwrap();
    assert_eq!(apply_dft_transform(&d).unwrap_err(), NetlistError::AlreadyTransformed);
    assert!(matches!(
        apply_dft_transform(&build_rca(4).unwrap()),
        Err(NetlistError::NotArrayMult(_))
    ));
}
