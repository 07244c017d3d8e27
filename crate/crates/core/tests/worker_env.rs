//! Worker-count independence, isolated in its own binary because the
//! `CTAM_WORKERS` environment variable is process-global state.

mod common;

use common::core_fault_list;
use ctam_core::netlist::{apply_dft_transform, build_array_mult};
use ctam_core::sim::{coverage, fault_sim, SimMode};
use ctam_core::tpg::mult_table2_vectors;

#[test]
fn results_do_not_depend_on_worker_count() {
    let d = apply_dft_transform(&build_array_mult(6).unwrap()).unwrap();
    let fl = core_fault_list(&d);
    let vs = mult_table2_vectors(6).unwrap();

    std::env::remove_var("CTAM_WORKERS");
    let baseline = fault_sim(&d, &fl, &vs, SimMode::Batched).unwrap();
    let base_report = coverage(&d, &fl, &baseline);

    for workers in ["1", "2", "4"] {
        std::env::set_var("CTAM_WORKERS", workers);
        let matrix = fault_sim(&d, &fl, &vs, SimMode::Batched).unwrap();
        assert_eq!(matrix, baseline, "workers = {workers}");
        assert_eq!(coverage(&d, &fl, &matrix), base_report, "workers = {workers}");
    }
    std::env::remove_var("CTAM_WORKERS");

    // Nonsense values fall back to the default pool rather than failing.
    std::env::set_var("CTAM_WORKERS", "not-a-number");
    let matrix = fault_sim(&d, &fl, &vs, SimMode::Batched).unwrap();
    assert_eq!(matrix, baseline);
    std::env::remove_var("CTAM_WORKERS");
}
