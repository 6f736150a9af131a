//! Reproduction runs at symbolic 7x7 scale and the randomized oracle sweep.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocked::simulate_blocked;
use crate::circuit::{generate_random_circuit, GridLayout, RuleSet, C64};
use crate::config::RunConfig;
use crate::dense::simulate_dense;
use crate::error::{Error, Result};
use crate::partition::{estimate_cost, find_scheme_with, slice_analysis, PartitionOptions, PartitionScheme};
use crate::path::{amplitude_by_split, build_combine_plan, run_task1, CombineMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    T2,
    T3,
    T6,
    Slice65,
}

impl std::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t2" => Ok(TableId::T2),
            "t3" => Ok(TableId::T3),
            "t6" => Ok(TableId::T6),
            "slice65" => Ok(TableId::Slice65),
            o => Err(Error::Config(format!("unknown table '{o}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: impl ToString, computed: impl ToString, pass: bool) -> Self {
        Check { name: name.into(), expected: expected.to_string(), computed: computed.to_string(), pass }
    }

    fn eq<T: PartialEq + ToString>(name: impl Into<String>, expected: T, computed: T) -> Self {
        let pass = expected == computed;
        Self::new(name, expected, computed, pass)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub pass: bool,
}

impl Report {
    fn finish(title: &str, checks: Vec<Check>, start: Instant) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report { title: title.into(), checks, seconds: start.elapsed().as_secs_f64(), pass }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} ({:.2}s)\n", self.title, self.seconds);
        for c in &self.checks {
            let tag = if c.pass { "ok  " } else { "FAIL" };
            out += &format!("  {tag} {}: expected {}, got {}\n", c.name, c.expected, c.computed);
        }
        out += if self.pass { "PASS\n" } else { "FAIL\n" };
        out
    }
}

const GRID: GridLayout = GridLayout { rows: 7, cols: 7 };
const SYMBOLIC_BUDGET: u32 = 64;

fn grid_scheme(depth: usize, seed: u64) -> Result<PartitionScheme> {
    let c = generate_random_circuit(GRID, depth, seed, RuleSet::PaperSimple)?;
    find_scheme_with(&c, SYMBOLIC_BUDGET, &PartitionOptions::structural())
}

pub fn run_repro(id: TableId, cfg: &RunConfig) -> Result<Report> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let title = match id {
        TableId::T2 => {
            for (depth, t) in [(27, 7), (39, 14)] {
                let s = grid_scheme(depth, cfg.seed)?;
                let f = estimate_cost(&s).flops;
                let shape = format!("2^{}(2^{}+n_C)", f.n, f.branch_exponent);
                checks.push(Check::eq(format!("depth {depth} flops (n_C = {})", f.n_c), format!("2^49(2^{t}+n_C)"), shape));
            }
            "computation amount"
        }
        TableId::T3 => {
            for (depth, e, t) in [(27, (35, 35, 28), 7), (35, (42, 42, 28), 14), (39, (42, 42, 42), 14)] {
                let s = grid_scheme(depth, cfg.seed)?;
                let x = &s.exponents;
                checks.push(Check::eq(format!("depth {depth} exponents"), format!("{e:?}"), format!("{:?}", (x.a, x.b, x.c))));
                checks.push(Check::eq(format!("depth {depth} cut CZs"), t, s.cut_czs.len()));
            }
            "space of parts A, B, C"
        }
        TableId::T6 => {
            let s = grid_scheme(35, cfg.seed)?;
            let p = build_combine_plan(&s, 1 << 15, 28)?;
            checks.push(Check::eq("gather exchanges", 1u64 << 21, p.gather.exchanges));
            checks.push(Check::eq("gather rounds", 8192, p.gather.rounds));
            checks.push(Check::eq("regrouped exchanges", 1u64 << 14, p.regrouped.exchanges));
            checks.push(Check::eq("regrouped rounds", 64, p.regrouped.rounds));
            "network communication"
        }
        TableId::Slice65 => {
            let (frac, trials) = slice_fraction(10_000, cfg.seed)?;
            let expected = 65.0 / 81.0;
            checks.push(Check::new(
                format!("feasible fraction over {trials} circuits"),
                format!("{expected:.4} +- 0.02"),
                format!("{frac:.4}"),
                (frac - expected).abs() <= 0.02,
            ));
            "slice probability"
        }
    };
    Ok(Report::finish(title, checks, start))
}

/// Fraction of depth-40 7x7 circuits whose layer 40 admits the slice trick.
pub fn slice_fraction(trials: usize, seed: u64) -> Result<(f64, usize)> {
    use rayon::prelude::*;
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let c = generate_random_circuit(GRID, 40, seed.wrapping_mul(1_000_003).wrapping_add(i), RuleSet::PaperSimple)?;
            Ok(slice_analysis(&c, 40)?.feasible as usize)
        })
        .sum::<Result<usize>>()?;
    Ok((hits as f64 / trials as f64, trials))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCase {
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub seed: u64,
    pub max_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub max_qubits: usize,
    pub cases: Vec<OracleCase>,
    pub worst_error: f64,
    pub seconds: f64,
    pub pass: bool,
}

const ORACLE_LAYOUTS: [(usize, usize); 6] = [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4), (4, 5)];

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Partitioned, split and blocked engines against the dense simulator.
pub fn run_oracle_suite(max_qubits: usize, cfg: &RunConfig) -> Result<OracleReport> {
    let start = Instant::now();
    if max_qubits > cfg.qubit_cap {
        return Err(Error::CapacityExceeded { what: "oracle sweep", required: max_qubits, cap: cfg.qubit_cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = cfg.sim_params();
    let mut cases = Vec::new();
    for (rows, cols) in ORACLE_LAYOUTS.into_iter().filter(|(r, c)| r * c <= max_qubits) {
        let n = rows * cols;
        for _ in 0..3 {
            let depth = rng.gen_range(8..=20);
            let seed = rng.gen();
            let c = generate_random_circuit(GridLayout::new(rows, cols), depth, seed, cfg.rules)?;
            let dense = simulate_dense(&c, None)?;
            let mut push = |kind: &str, err: f64| {
                cases.push(OracleCase { kind: kind.into(), rows, cols, depth, seed, max_error: err, pass: err < cfg.amp_tol })
            };
            let s = find_scheme_with(&c, SYMBOLIC_BUDGET, &PartitionOptions::default())?;
            for mode in [CombineMode::Gather, CombineMode::Regrouped] {
                let out = run_task1(&c, &s, mode, &params)?;
                push(&format!("partitioned-{mode:?}").to_lowercase(), max_diff(out.amps(), dense.amps()));
            }
            let split = rng.gen_range(0..=depth);
            let mut err: f64 = 0.0;
            for _ in 0..4 {
                let x = rng.gen_range(0..1u64 << n);
                err = err.max((amplitude_by_split(&c, x, split)? - dense.amps()[x as usize]).norm());
            }
            push("split", err);
            for nl in [2, n / 2, n - 1] {
                let b = simulate_blocked(&c, nl.max(1))?;
                push(&format!("blocked-{nl}"), max_diff(b.amps(), dense.amps()));
            }
        }
    }
    let worst = cases.iter().map(|c| c.max_error).fold(0.0, f64::max);
    Ok(OracleReport {
        max_qubits,
        pass: cases.iter().all(|c| c.pass),
        cases,
        worst_error: worst,
        seconds: start.elapsed().as_secs_f64(),
    })
}
