mod common;

use common::{fig2_circuit, fig2_scheme, max_diff};
use sfsim::dense::simulate_dense;
use sfsim::partition::{implicit_candidates, GatePart, PartitionScheme};
use sfsim::path::{run_task1, simulate_parts, CombineMode, SimParams};

#[test]
fn fig2_storage_and_output() {
    let c = fig2_circuit();
    let s = fig2_scheme(&c, true);
    let (a, b) = simulate_parts(&c, &s).unwrap();
    assert_eq!(a.stored_amplitudes(), 16);
    assert_eq!(b.stored_amplitudes(), 8);
    assert_eq!((s.exponents.a, s.exponents.b, s.exponents.c), (4, 3, 2));
    let dense = simulate_dense(&c, None).unwrap();
    for mode in [CombineMode::Gather, CombineMode::Regrouped] {
        let out = run_task1(&c, &s, mode, &SimParams::default()).unwrap();
        assert!(max_diff(out.amps(), dense.amps()) < 1e-12);
    }
}

#[test]
fn fig2_only_second_cut_qualifies() {
    let c = fig2_circuit();
    let s = fig2_scheme(&c, false);
    assert_eq!(implicit_candidates(&c, &s), vec![(4, 0)]);
    // absorbing the first cut is rejected: qubit 2 gets Y^1/2 in B afterwards
    assert!(PartitionScheme::manual(&c, vec![0, 1], vec![1, 2], common::fig2_assignment(), &[(1, 0)]).is_err());
}

#[test]
fn absorbed_b_expands_to_unabsorbed() {
    let c = fig2_circuit();
    let full = fig2_scheme(&c, false);
    let absorbed = fig2_scheme(&c, true);
    let (_, b_full) = simulate_parts(&c, &full).unwrap();
    let (_, b_abs) = simulate_parts(&c, &absorbed).unwrap();
    let controls: Vec<usize> = absorbed.implicit_czs.iter().map(|k| k.control).collect();
    let expanded = b_abs.expand_implicit(&controls);
    assert_eq!(expanded.len(), b_full.branches.len());
    for (x, y) in expanded.iter().zip(&b_full.branches) {
        assert_eq!(x.amps(), y.amps());
    }
}

#[test]
fn manual_scheme_rejects_bad_assignments() {
    let c = fig2_circuit();
    let mut bad = common::fig2_assignment();
    bad[6][0] = GatePart::B; // CZ(0, 1) lies in A
    assert!(PartitionScheme::manual(&c, vec![0, 1], vec![1, 2], bad, &[]).is_err());
    let mut bad = common::fig2_assignment();
    bad[8][0] = GatePart::B; // CZ(1, 2) joins A and B without a cut
    assert!(PartitionScheme::manual(&c, vec![0, 1], vec![1, 2], bad, &[]).is_err());
}
