mod common;

use common::{brute_min_objective, brute_side_table};
use sfsim::circuit::{generate_random_circuit, GridLayout, RuleSet};
use sfsim::partition::{dp_forward, find_scheme_with, objective, PartitionOptions, Side};

fn opts(b: usize, defer: bool) -> PartitionOptions {
    PartitionOptions { boundary_row: Some(b), defer_final_layer: defer, ..PartitionOptions::default() }
}

#[test]
fn side_tables_match_enumeration() {
    for (rows, cols) in [(2, 2), (3, 2), (2, 3)] {
        for b in 1..rows {
            for depth in [3, 6, 8] {
                for seed in 0..3u64 {
                    let rules = if seed % 2 == 0 { RuleSet::PaperSimple } else { RuleSet::GoogleV1 };
                    let c = generate_random_circuit(GridLayout::new(rows, cols), depth, seed, rules).unwrap();
                    for defer in [false, true] {
                        for side in [Side::A, Side::B] {
                            let dp = dp_forward(&c, side, &opts(b, defer)).unwrap();
                            let brute = brute_side_table(&c, b, side, defer);
                            assert_eq!(dp.values, brute, "{rows}x{cols} b={b} depth={depth} seed={seed} defer={defer} {side:?}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn schemes_are_optimal_on_small_grids() {
    for (rows, cols) in [(2, 2), (2, 3), (3, 2)] {
        for b in 1..rows {
            for depth in 4..=9 {
                for seed in 0..2u64 {
                    let c = generate_random_circuit(GridLayout::new(rows, cols), depth, seed, RuleSet::PaperSimple).unwrap();
                    let s = find_scheme_with(&c, 100, &opts(b, true)).unwrap();
                    let e = &s.exponents;
                    assert_eq!(objective(e.a, e.b, e.c), brute_min_objective(&c, b), "{rows}x{cols} b={b} depth={depth} seed={seed}");
                    s.validate(&c).unwrap();
                }
            }
        }
    }
}

#[test]
fn exponents_are_consistent_with_parts() {
    let c = generate_random_circuit(GridLayout::new(4, 4), 20, 5, RuleSet::GoogleV1).unwrap();
    let s = find_scheme_with(&c, 100, &PartitionOptions::default()).unwrap();
    assert_eq!(s.exponents.c, s.part_c.len());
    assert_eq!(s.exponents.a, s.part_a.len() + s.total_cuts());
    assert_eq!(s.exponents.b, s.part_b.len() + s.cut_czs.len());
    assert_eq!(s.cost.flops.branch_exponent, s.cut_czs.len());
    let assigned: usize = s.assignment.iter().map(Vec::len).sum();
    assert_eq!(assigned, c.gate_count());
}
