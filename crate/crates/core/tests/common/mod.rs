//! Helpers shared by the integration suites.
#![allow(dead_code)]

use ctam_core::fault::{
    collapse_equivalent, enumerate_faults, mark_test_mode_redundant, FaultList, FaultScope,
};
use ctam_core::netlist::Netlist;
use ctam_core::sim::TestVector;

/// Adder stimulus from integer operands (bit k of the integer = bit k of the
/// port).
pub fn rca_vector(n: usize, a: u128, b: u128, cin: bool) -> TestVector {
    let mut v = TestVector::new();
    v.set_fn("A", n, |i| a >> i & 1 != 0);
    v.set_fn("B", n, |i| b >> i & 1 != 0);
    v.set("Cin", vec![cin]);
    v
}

/// Multiplier stimulus from integer operands and border injections.
pub fn mult_vector(n: usize, x: u64, y: u64, p_top: u64, cb: u64) -> TestVector {
    let mut v = TestVector::new();
    v.set_fn("X", n, |i| x >> i & 1 != 0);
    v.set_fn("Y", n, |i| y >> i & 1 != 0);
    v.set_fn("P_top", n, |i| p_top >> i & 1 != 0);
    v.set_fn("Cb", n, |i| cb >> i & 1 != 0);
    v
}

/// Test-mode array stimulus: multiplier inputs plus the mode select.
pub fn dft_vector(n: usize, x: u64, y: u64, p_top: u64, cb: u64, test_mode: bool) -> TestVector {
    let mut v = mult_vector(n, x, y, p_top, cb);
    v.set("test_mode", vec![test_mode]);
    v
}

/// Read one named port of a `good_sim` result as an integer.
pub fn port_value(outs: &[(String, Vec<bool>)], name: &str) -> u128 {
    let bits = &outs.iter().find(|(n, _)| n == name).expect("port present").1;
    bits.iter()
        .enumerate()
        .fold(0u128, |acc, (i, &b)| acc | (b as u128) << i)
}

/// Extract lane `lane` of a per-port word list as an integer.
pub fn lane_value(words: &[(String, Vec<u64>)], name: &str, lane: usize) -> u128 {
    let ws = &words.iter().find(|(n, _)| n == name).expect("port present").1;
    ws.iter()
        .enumerate()
        .fold(0u128, |acc, (i, &w)| acc | ((w >> lane & 1) as u128) << i)
}

/// The collapsed functional-array fault list with redundancy marked — the
/// list every coverage claim is stated over.
pub fn core_fault_list(m: &Netlist) -> FaultList {
    let mut fl = collapse_equivalent(m, &enumerate_faults(m, FaultScope::Core));
    mark_test_mode_redundant(m, &mut fl);
    fl
}
