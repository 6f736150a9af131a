//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_min_objective, fig2_circuit, fig2_scheme, max_diff};
use sfsim::analysis::porter_thomas_check;
use sfsim::blocked::simulate_blocked;
use sfsim::circuit::{generate_random_circuit, Circuit, GridLayout, RuleSet};
use sfsim::dense::simulate_dense;
use sfsim::partition::{find_scheme_with, objective, slice_analysis, PartitionOptions};
use sfsim::path::{amplitude_by_split, build_combine_plan, run_task1, simulate_parts, CombineMode, SimParams};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn params() -> SimParams {
    SimParams { n_local: 8, ..SimParams::default() }
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (rows, cols, count, max_depth) in [(4, 4, 30, 24), (4, 5, 5, 20)] {
        for _ in 0..count {
            let depth = rng.gen_range(8..=max_depth);
            let rules = if rng.gen() { RuleSet::GoogleV1 } else { RuleSet::PaperSimple };
            let c = generate_random_circuit(GridLayout::new(rows, cols), depth, rng.gen(), rules).unwrap();
            let s = find_scheme_with(&c, 64, &PartitionOptions::default()).unwrap();
            let mode = if runs % 2 == 0 { CombineMode::Gather } else { CombineMode::Regrouped };
            let out = run_task1(&c, &s, mode, &params()).unwrap();
            worst = worst.max(max_diff(out.amps(), simulate_dense(&c, None).unwrap().amps()));
            runs += 1;
        }
    }
    outcome(worst < 1e-10, format!("{runs} circuits, max |d alpha| = {worst:.2e}"))
}

fn ac2() -> Outcome {
    let mut found = Vec::new();
    let mut pass = true;
    for (depth, want, cuts) in [(27, (35, 35, 28), 7), (35, (42, 42, 28), 14), (39, (42, 42, 42), 14)] {
        let c = generate_random_circuit(GridLayout::new(7, 7), depth, 1, RuleSet::PaperSimple).unwrap();
        let s = find_scheme_with(&c, 64, &PartitionOptions::structural()).unwrap();
        let e = (s.exponents.a, s.exponents.b, s.exponents.c);
        pass &= e == want && s.cut_czs.len() == cuts;
        found.push(format!("d{depth}: {e:?}/{}", s.cut_czs.len()));
    }
    outcome(pass, found.join(", "))
}

fn ac3() -> Outcome {
    let c = generate_random_circuit(GridLayout::new(7, 7), 35, 1, RuleSet::PaperSimple).unwrap();
    let s = find_scheme_with(&c, 64, &PartitionOptions::structural()).unwrap();
    let p = build_combine_plan(&s, 1 << 15, 28).unwrap();
    let got = (p.gather.exchanges, p.gather.rounds, p.regrouped.exchanges, p.regrouped.rounds);
    outcome(
        got == (1 << 21, 8192, 1 << 14, 64),
        format!("gather 2^{} exchanges / {} rounds, regrouped 2^{} / {}", got.0.ilog2(), got.1, got.2.ilog2(), got.3),
    )
}

fn ac4() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for b in 1..3 {
        for depth in 4..=12 {
            for seed in 0..2u64 {
                let rules = if seed == 0 { RuleSet::PaperSimple } else { RuleSet::GoogleV1 };
                let c = generate_random_circuit(GridLayout::new(3, 3), depth, seed, rules).unwrap();
                let opts = PartitionOptions { boundary_row: Some(b), ..PartitionOptions::default() };
                let e = find_scheme_with(&c, 100, &opts).unwrap().exponents;
                if objective(e.a, e.b, e.c) != brute_min_objective(&c, b) {
                    bad.push(format!("b{b} d{depth} s{seed}"));
                }
                cases += 1;
            }
        }
    }
    outcome(bad.is_empty(), format!("{cases} cases, mismatches: {bad:?}"))
}

fn ac5() -> Outcome {
    let trials = 10_000u64;
    let hits = (0..trials)
        .filter(|&i| {
            let c = generate_random_circuit(GridLayout::new(7, 7), 40, 5000 + i, RuleSet::PaperSimple).unwrap();
            slice_analysis(&c, 40).unwrap().feasible
        })
        .count();
    let frac = hits as f64 / trials as f64;
    outcome((frac - 65.0 / 81.0).abs() <= 0.02, format!("feasible fraction {frac:.4} vs {:.4}", 65.0 / 81.0))
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = generate_random_circuit(GridLayout::new(4, 4), 30, rng.gen(), RuleSet::PaperSimple).unwrap();
        let dense = simulate_dense(&c, None).unwrap();
        let split = rng.gen_range(1..30);
        for _ in 0..16 {
            let x = rng.gen_range(0..1u64 << 16);
            let a = amplitude_by_split(&c, x, split).unwrap();
            worst = worst.max((a - dense.amps()[x as usize]).norm());
        }
    }
    outcome(worst < 1e-10, format!("320 amplitudes, max error {worst:.2e}"))
}

fn without_final_czs(c: &Circuit) -> Circuit {
    let mut layers = c.layers.clone();
    layers.last_mut().unwrap().retain(|g| g.control.is_none());
    Circuit::new(c.layout, layers).unwrap()
}

fn ac7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut elision: f64 = 0.0;
    for (i, (rows, cols)) in [(4, 4), (3, 6), (4, 5)].into_iter().enumerate() {
        let c = generate_random_circuit(GridLayout::new(rows, cols), 20, 70 + i as u64, RuleSet::PaperSimple).unwrap();
        let dense = simulate_dense(&c, None).unwrap();
        for nl in [6, 8, 10] {
            worst = worst.max(max_diff(simulate_blocked(&c, nl).unwrap().amps(), dense.amps()));
        }
        let trimmed = simulate_dense(&without_final_czs(&c), None).unwrap();
        let dp = dense.probabilities().iter().zip(trimmed.probabilities()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        elision = elision.max(dp);
    }
    outcome(worst < 1e-10 && elision < 1e-12, format!("blocked max error {worst:.2e}, final-CZ removal max |dp| {elision:.2e}"))
}

fn ac8() -> Outcome {
    let c = generate_random_circuit(GridLayout::new(4, 5), 30, 800, RuleSet::PaperSimple).unwrap();
    let s = find_scheme_with(&c, 64, &PartitionOptions::default()).unwrap();
    let out = run_task1(&c, &s, CombineMode::Gather, &params()).unwrap();
    let norm = (out.norm_sqr() - 1.0).abs();
    let ks = porter_thomas_check(&out).unwrap().ks_distance;
    outcome(norm < 1e-9 && ks < 0.01, format!("| |psi|^2 - 1 | = {norm:.2e}, KS = {ks:.4}"))
}

fn ac9() -> Outcome {
    let c = fig2_circuit();
    let s = fig2_scheme(&c, true);
    let (a, b) = simulate_parts(&c, &s).unwrap();
    let (sa, sb) = (a.stored_amplitudes(), b.stored_amplitudes());
    let out = run_task1(&c, &s, CombineMode::Gather, &params()).unwrap();
    let err = max_diff(out.amps(), simulate_dense(&c, None).unwrap().amps());
    outcome(sa == 16 && sb == 8 && err < 1e-12, format!("stored A = {sa}, B = {sb}, max error {err:.2e}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC-1 partitioned output equals dense", 300, ac1),
        ("AC-2 7x7 exponents and cut counts", 60, ac2),
        ("AC-3 combine plan arithmetic", 5, ac3),
        ("AC-4 DP optimal on 3x3", 120, ac4),
        ("AC-5 slice feasibility fraction", 30, ac5),
        ("AC-6 split amplitudes equal dense", 180, ac6),
        ("AC-7 blocked equals dense, final CZs elided", 300, ac7),
        ("AC-8 norm and Porter-Thomas at 20 qubits", 600, ac8),
        ("AC-9 implicit decomposition storage", 5, ac9),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= Duration::from_secs(limit);
        failed += !pass as usize;
        println!(
            "{} {name}: {} [{:.1}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
