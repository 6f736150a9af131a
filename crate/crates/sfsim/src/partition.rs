//! Three-way partition of a grid circuit by two splitting lines.
//!
//! Rows above `boundary_row` start in part A, the rest in part B. Each column carries
//! an upper offset `u` (A rows handed to C, counted up from the boundary) and a lower
//! offset `d` (B rows handed to C). Offsets never decrease. A boundary CZ in a column
//! whose offsets are both zero is cut; any other CZ must stay inside one region.
//!
//! Both lines leave a column in the same window between two of its boundary CZs: with
//! sweep `m`, column k is cut at its first min(m, e_k) boundary CZs and must have left
//! before the next one. Under that rule the two sides decouple and each is a DP over
//! monotone per-column offsets, solved with a prefix minimum over the j <= i lattice.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind, GridLayout};
use crate::error::{Error, Result};

const INF: i32 = i32::MAX / 2;
const ILLEGAL: u8 = u8::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Which gates count as diagonal when granting implicit-decomposition credits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditModel {
    /// Uses the actual gate kinds (T counts as diagonal).
    #[default]
    Exact,
    /// Uses the layout only: every single-qubit slot is treated as non-diagonal.
    Structural,
}

impl CreditModel {
    fn blocks(self, g: &Gate) -> bool {
        match self {
            CreditModel::Exact => !g.is_diagonal(),
            CreditModel::Structural => g.kind != GateKind::Cz,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionOptions {
    /// Defaults to rows / 2 (rounded down), so A is never larger than B.
    pub boundary_row: Option<usize>,
    /// Moves final-layer CZs into a diagonal pass at the end of part C.
    pub defer_final_layer: bool,
    pub credit: CreditModel,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions { boundary_row: None, defer_final_layer: true, credit: CreditModel::Exact }
    }
}

impl PartitionOptions {
    pub fn structural() -> Self {
        PartitionOptions { credit: CreditModel::Structural, ..Default::default() }
    }

    fn boundary(&self, layout: GridLayout) -> Result<usize> {
        let b = self.boundary_row.unwrap_or(layout.rows / 2);
        if b == 0 || b >= layout.rows {
            return Err(Error::InvalidBoundary { row: b, rows: layout.rows });
        }
        Ok(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatePart {
    A,
    B,
    C,
    /// Decomposed CZ: projector on the B side, conditional Z on the A side.
    Cut,
    /// Final-layer CZ applied as a diagonal pass after part C.
    CPost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutCz {
    pub layer: usize,
    pub column: usize,
    /// Index of the gate inside its layer.
    pub gate: usize,
    /// Qubit on the B side; its value selects the branch.
    pub control: usize,
    /// Qubit on the A side; receives I or Z.
    pub target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exponents {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

/// 2^n (2^branch_exponent + n_c), kept symbolic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsExpr {
    pub n: usize,
    pub branch_exponent: usize,
    pub n_c: usize,
}

impl FlopsExpr {
    pub fn log2(&self) -> f64 {
        self.n as f64 + ((2f64).powi(self.branch_exponent as i32) + self.n_c as f64).log2()
    }
}

impl std::fmt::Display for FlopsExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "2^{}(2^{}+{})", self.n, self.branch_exponent, self.n_c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCost {
    pub space_bytes: f64,
    pub space_log2: f64,
    pub flops: FlopsExpr,
    pub branch_count_log2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLines {
    pub boundary_row: usize,
    /// upper[t][k]: A rows of column k inside C at layer t.
    pub upper: Vec<Vec<u8>>,
    /// lower[t][k]: B rows of column k inside C at layer t.
    pub lower: Vec<Vec<u8>>,
    pub sweep: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub n_qubits: usize,
    pub depth: usize,
    pub part_a: Vec<usize>,
    pub part_b: Vec<usize>,
    /// Qubits inside part C at the end, ascending.
    pub part_c: Vec<usize>,
    pub assignment: Vec<Vec<GatePart>>,
    pub cut_czs: Vec<CutCz>,
    pub implicit_czs: Vec<CutCz>,
    pub exponents: Exponents,
    pub n_c: usize,
    pub grid: Option<GridLines>,
    pub cost: PartitionCost,
}

impl PartitionScheme {
    /// Total number of decomposed CZ gates, implicit ones included.
    pub fn total_cuts(&self) -> usize {
        self.cut_czs.len() + self.implicit_czs.len()
    }

    /// Builds a scheme from an explicit per-gate assignment. Gates marked `Cut` whose
    /// (layer, gate) appear in `implicit` are absorbed on the B side.
    pub fn manual(
        c: &Circuit,
        part_a: Vec<usize>,
        part_c: Vec<usize>,
        assignment: Vec<Vec<GatePart>>,
        implicit: &[(usize, usize)],
    ) -> Result<Self> {
        let n = c.n_qubits();
        let mut in_a = vec![false; n];
        for &q in &part_a {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            in_a[q] = true;
        }
        let part_b: Vec<usize> = (0..n).filter(|&q| !in_a[q]).collect();
        let mut cut_czs = Vec::new();
        let mut implicit_czs = Vec::new();
        for (t, layer) in assignment.iter().enumerate() {
            for (gi, part) in layer.iter().enumerate() {
                if *part != GatePart::Cut {
                    continue;
                }
                let g = c.layers.get(t).and_then(|l| l.get(gi)).ok_or_else(|| Error::InvalidScheme(format!("no gate {gi} in layer {t}")))?;
                let ctl = g.control.ok_or_else(|| Error::InvalidScheme(format!("cut at layer {t} is not a CZ")))?;
                let (control, target) = if in_a[ctl] { (g.target, ctl) } else { (ctl, g.target) };
                let cut = CutCz { layer: t, column: c.layout.coords(control).1, gate: gi, control, target };
                if implicit.contains(&(t, gi)) {
                    implicit_czs.push(cut);
                } else {
                    cut_czs.push(cut);
                }
            }
        }
        let mut part_c = part_c;
        part_c.sort_unstable();
        let total = cut_czs.len() + implicit_czs.len();
        let exponents = Exponents { a: part_a.len() + total, b: part_b.len() + cut_czs.len(), c: part_c.len() };
        let n_c = assignment.iter().flatten().filter(|p| matches!(p, GatePart::C | GatePart::CPost)).count();
        let mut s = PartitionScheme {
            n_qubits: n,
            depth: c.depth(),
            part_a,
            part_b,
            part_c,
            assignment,
            cut_czs,
            implicit_czs,
            exponents,
            n_c,
            grid: None,
            cost: PartitionCost { space_bytes: 0.0, space_log2: 0.0, flops: FlopsExpr { n, branch_exponent: 0, n_c: 0 }, branch_count_log2: 0 },
        };
        s.cost = estimate_cost(&s);
        s.validate(c)?;
        Ok(s)
    }

    /// Checks that the assignment is executable: per qubit, home-part gates precede C gates;
    /// CZs never join different regions unless cut; deferred CZs are last on both qubits;
    /// implicit cuts see only diagonal B gates on their control afterwards.
    pub fn validate(&self, c: &Circuit) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScheme(m));
        let n = c.n_qubits();
        if self.n_qubits != n || self.assignment.len() != c.layers.len() {
            return bad("scheme shape does not match circuit".into());
        }
        let mut in_a = vec![false; n];
        self.part_a.iter().for_each(|&q| in_a[q] = true);
        if self.part_a.len() + self.part_b.len() != n || self.part_b.iter().any(|&q| in_a[q]) {
            return bad("parts A and B must split the qubits".into());
        }
        let mut in_c = vec![false; n];
        self.part_c.iter().for_each(|&q| in_c[q] = true);
        let mut entered_c = vec![false; n];
        let mut finished = vec![false; n];
        for (t, layer) in c.layers.iter().enumerate() {
            if self.assignment[t].len() != layer.len() {
                return bad(format!("layer {t}: assignment length mismatch"));
            }
            for (gi, g) in layer.iter().enumerate() {
                let part = self.assignment[t][gi];
                let qs: Vec<usize> = g.qubits().collect();
                if qs.iter().any(|&q| finished[q]) {
                    return bad(format!("layer {t}: gate after a deferred CZ"));
                }
                match part {
                    GatePart::A | GatePart::B => {
                        let want_a = part == GatePart::A;
                        if qs.iter().any(|&q| in_a[q] != want_a || entered_c[q]) {
                            return bad(format!("layer {t} gate {gi}: {part:?} gate outside its region"));
                        }
                    }
                    GatePart::C => {
                        if qs.iter().any(|&q| !in_c[q]) {
                            return bad(format!("layer {t} gate {gi}: C gate on a qubit outside C"));
                        }
                        qs.iter().for_each(|&q| entered_c[q] = true);
                    }
                    GatePart::Cut => {
                        if g.kind != GateKind::Cz || in_a[qs[0]] == in_a[qs[1]] || qs.iter().any(|&q| entered_c[q]) {
                            return bad(format!("layer {t} gate {gi}: invalid cut"));
                        }
                    }
                    GatePart::CPost => {
                        if g.kind != GateKind::Cz {
                            return bad(format!("layer {t} gate {gi}: deferred gate is not a CZ"));
                        }
                        qs.iter().for_each(|&q| finished[q] = true);
                    }
                }
            }
        }
        let cuts = self.assignment.iter().flatten().filter(|p| **p == GatePart::Cut).count();
        if cuts != self.total_cuts() {
            return bad("cut lists do not match the assignment".into());
        }
        for cut in &self.implicit_czs {
            if !implicit_eligible(c, self, cut, CreditModel::Exact) {
                return bad(format!("implicit cut at layer {} is not eligible", cut.layer));
            }
        }
        let e = &self.exponents;
        if e.a != self.part_a.len() + self.total_cuts() || e.b != self.part_b.len() + self.cut_czs.len() || e.c != self.part_c.len() {
            return bad("exponents do not match the recount".into());
        }
        Ok(())
    }
}

fn implicit_eligible(c: &Circuit, s: &PartitionScheme, cut: &CutCz, model: CreditModel) -> bool {
    for t in cut.layer + 1..c.layers.len() {
        for (gi, g) in c.layers[t].iter().enumerate() {
            if g.acts_on(cut.control) && s.assignment[t][gi] == GatePart::B && model.blocks(g) {
                return false;
            }
        }
    }
    true
}

/// Cut CZs of `s` whose B-side control sees no non-diagonal B gate after the cut.
pub fn implicit_candidates(c: &Circuit, s: &PartitionScheme) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = s
        .cut_czs
        .iter()
        .chain(&s.implicit_czs)
        .filter(|cut| implicit_eligible(c, s, cut, CreditModel::Exact))
        .map(|cut| (cut.layer, cut.column))
        .collect();
    out.sort_unstable();
    out
}

pub fn estimate_cost(s: &PartitionScheme) -> PartitionCost {
    let e = s.exponents;
    let space = 16.0 * ((e.a as f64).exp2() + (e.b as f64).exp2() + (e.c as f64).exp2());
    PartitionCost {
        space_bytes: space,
        space_log2: space.log2(),
        flops: FlopsExpr { n: s.n_qubits, branch_exponent: s.cut_czs.len(), n_c: s.n_c },
        branch_count_log2: s.cut_czs.len(),
    }
}

/// Side-local view of the grid used by the DP.
struct SideModel {
    side: Side,
    cols: usize,
    radix: usize,
    n_states: usize,
    home: i32,
    digits: Vec<u8>,
    strides: Vec<usize>,
    /// layer_cost[t][state]: cut count at layer t, or ILLEGAL.
    layer_cost: Vec<Vec<u8>>,
    /// credit[t][k]: credits granted when column k first leaves at layer t (t = depth + 1: never).
    credit: Vec<Vec<i32>>,
}

struct Geometry {
    layout: GridLayout,
    b: usize,
    depth: usize,
    defer: bool,
    /// events[k]: layers with a boundary CZ in column k, excluding deferred ones.
    events: Vec<Vec<usize>>,
}

impl Geometry {
    fn new(c: &Circuit, opts: &PartitionOptions) -> Result<Self> {
        let layout = c.layout;
        let b = opts.boundary(layout)?;
        let depth = c.depth();
        let defer = opts.defer_final_layer;
        let mut events = vec![Vec::new(); layout.cols];
        for t in 1..=depth {
            if defer && t == depth {
                continue;
            }
            for g in &c.layers[t] {
                if let Some(ctl) = g.control {
                    let (r1, c1) = layout.coords(ctl);
                    let (r2, c2) = layout.coords(g.target);
                    if (r1 < b) != (r2 < b) {
                        if c1 != c2 || r1.min(r2) != b - 1 || r1.max(r2) != b {
                            return Err(Error::InvalidScheme(format!("layer {t}: CZ {ctl}-{} crosses the boundary off-column", g.target)));
                        }
                        events[c1].push(t);
                    }
                }
            }
        }
        Ok(Geometry { layout, b, depth, defer, events })
    }

    /// Distance from the boundary, counted from 0 on each side.
    fn side_row(&self, q: usize) -> (Side, usize, usize) {
        let (r, c) = self.layout.coords(q);
        if r < self.b {
            (Side::A, self.b - 1 - r, c)
        } else {
            (Side::B, r - self.b, c)
        }
    }

    fn height(&self, side: Side) -> usize {
        match side {
            Side::A => self.b,
            Side::B => self.layout.rows - self.b,
        }
    }

    fn bonds(&self, c: &Circuit, t: usize) -> Vec<(usize, usize)> {
        if self.defer && t == self.depth {
            return Vec::new();
        }
        c.layers[t].iter().filter_map(|g| g.control.map(|ctl| (ctl, g.target))).collect()
    }

    fn side_model(&self, c: &Circuit, side: Side, credit: Option<CreditModel>) -> SideModel {
        let cols = self.layout.cols;
        let h = self.height(side);
        let radix = h + 1;
        let n_states = radix.pow(cols as u32);
        let strides: Vec<usize> = (0..cols).map(|k| radix.pow(k as u32)).collect();
        let mut digits = vec![0u8; n_states * cols];
        for s in 0..n_states {
            let mut x = s;
            for k in 0..cols {
                digits[s * cols + k] = (x % radix) as u8;
                x /= radix;
            }
        }
        let mut layer_cost = vec![vec![0u8; n_states]; self.depth + 1];
        for t in 1..=self.depth {
            // (row, col) pairs on this side that must share a region, and boundary columns
            let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::new();
            let mut boundary: Vec<usize> = Vec::new();
            for (p, q) in self.bonds(c, t) {
                let (sp, rp, cp) = self.side_row(p);
                let (sq, rq, cq) = self.side_row(q);
                match (sp == side, sq == side) {
                    (true, true) => pairs.push(((rp, cp), (rq, cq))),
                    (true, false) => boundary.push(cp),
                    (false, true) => boundary.push(cq),
                    (false, false) => {}
                }
            }
            let costs = &mut layer_cost[t];
            for (s, cost) in costs.iter_mut().enumerate() {
                let d = &digits[s * cols..(s + 1) * cols];
                let legal = pairs.iter().all(|&((r1, c1), (r2, c2))| (r1 < d[c1] as usize) == (r2 < d[c2] as usize));
                *cost = if legal { boundary.iter().filter(|&&k| d[k] == 0).count() as u8 } else { ILLEGAL };
            }
        }
        let mut credits = vec![vec![0i32; cols]; self.depth + 2];
        if let (Side::B, Some(model)) = (side, credit) {
            for k in 0..cols {
                let q = self.layout.rank(self.b, k);
                for (t, row) in credits.iter_mut().enumerate().skip(1) {
                    let mut count = 0;
                    let mut s = t - 1;
                    let events = &self.events[k];
                    // walk back from t-1 to the last blocking gate, counting boundary CZs
                    while s >= 1 {
                        if events.binary_search(&s).is_ok() {
                            count += 1;
                        } else if let Some(g) = c.gate_on(s, q) {
                            if model.blocks(g) {
                                break;
                            }
                        }
                        s -= 1;
                    }
                    row[k] = count;
                }
            }
        }
        let home = (h * cols) as i32;
        SideModel { side, cols, radix, n_states, home, digits, strides, layer_cost, credit: credits }
    }
}

struct DpRun {
    values: Vec<Vec<i32>>,
    parents: Vec<Vec<u32>>,
}

/// Per-column bounds (lo, hi): offset must be 0 while t <= lo and positive once t >= hi.
type Window = Vec<(usize, usize)>;

impl SideModel {
    fn digit(&self, s: usize, k: usize) -> u8 {
        self.digits[s * self.cols + k]
    }

    fn run(&self, depth: usize, window: Option<&Window>) -> DpRun {
        let n = self.n_states;
        let mut values = Vec::with_capacity(depth + 1);
        let mut parents = Vec::with_capacity(depth + 1);
        let mut v0 = vec![INF; n];
        v0[0] = self.home;
        values.push(v0);
        parents.push((0..n as u32).collect::<Vec<u32>>());
        let mut w = vec![0i32; n];
        let mut arg = vec![0u32; n];
        for t in 1..=depth {
            let prev = &values[t - 1];
            let cr = &self.credit[t];
            for s in 0..n {
                arg[s] = s as u32;
                w[s] = if prev[s] >= INF {
                    INF
                } else {
                    prev[s] - (0..self.cols).filter(|&k| self.digit(s, k) == 0).map(|k| cr[k]).sum::<i32>()
                };
            }
            for k in 0..self.cols {
                let stride = self.strides[k];
                for s in 0..n {
                    if self.digit(s, k) > 0 && w[s - stride] < w[s] {
                        w[s] = w[s - stride];
                        arg[s] = arg[s - stride];
                    }
                }
            }
            let costs = &self.layer_cost[t];
            let mut cur = vec![INF; n];
            let mut par = vec![0u32; n];
            for s in 0..n {
                if costs[s] == ILLEGAL || w[s] >= INF / 2 {
                    continue;
                }
                if let Some(win) = window {
                    let ok = win.iter().enumerate().all(|(k, &(lo, hi))| {
                        let dk = self.digit(s, k);
                        !(t <= lo && dk != 0) && !(t >= hi && dk == 0)
                    });
                    if !ok {
                        continue;
                    }
                }
                let stay: i32 = (0..self.cols).filter(|&k| self.digit(s, k) == 0).map(|k| cr[k]).sum();
                cur[s] = w[s] + stay + costs[s] as i32;
                par[s] = arg[s];
            }
            values.push(cur);
            parents.push(par);
        }
        DpRun { values, parents }
    }

    /// Value after granting credits to columns that never leave.
    fn final_value(&self, run: &DpRun, depth: usize, s: usize) -> i32 {
        let v = run.values[depth][s];
        if v >= INF {
            return INF;
        }
        let cr = &self.credit[depth + 1];
        v - (0..self.cols).filter(|&k| self.digit(s, k) == 0).map(|k| cr[k]).sum::<i32>()
    }

    fn offsets(&self, s: usize) -> Vec<u8> {
        self.digits[s * self.cols..(s + 1) * self.cols].to_vec()
    }

    fn trajectory(&self, run: &DpRun, depth: usize, last: usize) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new(); depth + 1];
        let mut s = last;
        for t in (0..=depth).rev() {
            out[t] = self.offsets(s);
            s = run.parents[t][s] as usize;
        }
        out
    }

    fn offset_sum(&self, s: usize) -> usize {
        self.digits[s * self.cols..(s + 1) * self.cols].iter().map(|&d| d as usize).sum()
    }
}

/// Table of one side's DP without the sweep restriction.
#[derive(Clone, Debug)]
pub struct DpTable {
    pub side: Side,
    pub boundary_row: usize,
    pub cols: usize,
    pub radix: usize,
    /// values[t][state]; unreachable or illegal entries are None.
    pub values: Vec<Vec<Option<i32>>>,
    pub parents: Vec<Vec<u32>>,
}

impl DpTable {
    pub fn index(&self, offsets: &[usize]) -> usize {
        offsets.iter().rev().fold(0, |acc, &o| acc * self.radix + o)
    }

    pub fn value(&self, t: usize, offsets: &[usize]) -> Option<i32> {
        self.values.get(t)?.get(self.index(offsets)).copied().flatten()
    }
}

pub fn dp_forward(c: &Circuit, side: Side, opts: &PartitionOptions) -> Result<DpTable> {
    let geo = Geometry::new(c, opts)?;
    let model = geo.side_model(c, side, Some(opts.credit));
    let run = model.run(geo.depth, None);
    Ok(DpTable {
        side,
        boundary_row: geo.b,
        cols: model.cols,
        radix: model.radix,
        values: run.values.iter().map(|v| v.iter().map(|&x| (x < INF / 2).then_some(x)).collect()).collect(),
        parents: run.parents,
    })
}

/// Space objective 2^a + 2^b + 2^c, exact for exponents below 127.
pub fn objective(a: usize, b: usize, c: usize) -> u128 {
    let p = |e: usize| if e >= 127 { u128::MAX / 4 } else { 1u128 << e };
    p(a).saturating_add(p(b)).saturating_add(p(c))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Choice {
    objective: u128,
    e_c: usize,
    offsets: Vec<u8>,
    sweep: usize,
    a_state: usize,
    b_state: usize,
    e_a: usize,
    e_b: usize,
}

/// Smallest f for each offset sum, with the lexicographically smallest state among ties.
fn best_by_sum(model: &SideModel, run: &DpRun, depth: usize) -> Vec<Option<(i32, usize)>> {
    let max_sum = (model.radix - 1) * model.cols;
    let mut best: Vec<Option<(i32, usize)>> = vec![None; max_sum + 1];
    for s in 0..model.n_states {
        let v = match model.side {
            Side::A => run.values[depth][s],
            Side::B => model.final_value(run, depth, s),
        };
        if v >= INF / 2 {
            continue;
        }
        let slot = &mut best[model.offset_sum(s)];
        let better = match *slot {
            None => true,
            Some((bv, bs)) => v < bv || (v == bv && model.offsets(s) < model.offsets(bs)),
        };
        if better {
            *slot = Some((v, s));
        }
    }
    best
}

/// Minimum-space scheme whose total storage 16 (S_A + S_B + S_C) fits in 2^budget_exp bytes.
pub fn find_scheme(c: &Circuit, budget_exp: u32) -> Result<PartitionScheme> {
    find_scheme_with(c, budget_exp, &PartitionOptions::default())
}

pub fn find_scheme_with(c: &Circuit, budget_exp: u32, opts: &PartitionOptions) -> Result<PartitionScheme> {
    let geo = Geometry::new(c, opts)?;
    let ma = geo.side_model(c, Side::A, None);
    let mb = geo.side_model(c, Side::B, Some(opts.credit));
    let max_m = geo.events.iter().map(Vec::len).max().unwrap_or(0);

    let mut best: Option<(Choice, DpRun, DpRun)> = None;
    for m in 0..=max_m {
        let window: Window = geo
            .events
            .iter()
            .map(|ev| {
                let cuts = m.min(ev.len());
                let lo = if cuts == 0 { 0 } else { ev[cuts - 1] };
                let hi = if m < ev.len() { ev[m] } else { usize::MAX };
                (lo, hi)
            })
            .collect();
        let (ra, rb) = rayon::join(|| ma.run(geo.depth, Some(&window)), || mb.run(geo.depth, Some(&window)));
        let ba = best_by_sum(&ma, &ra, geo.depth);
        let bb = best_by_sum(&mb, &rb, geo.depth);
        let mut local: Option<Choice> = None;
        for (su, ea) in ba.iter().enumerate() {
            let Some((fa, sa)) = *ea else { continue };
            for (sd, eb) in bb.iter().enumerate() {
                let Some((fb, sb)) = *eb else { continue };
                let mut offsets = ma.offsets(sa);
                offsets.extend(mb.offsets(sb));
                let choice = Choice {
                    objective: objective(fa as usize, fb as usize, su + sd),
                    e_c: su + sd,
                    offsets,
                    sweep: m,
                    a_state: sa,
                    b_state: sb,
                    e_a: fa as usize,
                    e_b: fb as usize,
                };
                if local.as_ref().is_none_or(|l| choice < *l) {
                    local = Some(choice);
                }
            }
        }
        if let Some(ch) = local {
            if best.as_ref().is_none_or(|(b, _, _)| ch < *b) {
                best = Some((ch, ra, rb));
            }
        }
    }
    let (choice, ra, rb) = best.ok_or_else(|| Error::InvalidScheme("no legal line placement".into()))?;
    let needed = (16.0 * choice.objective as f64).log2();
    if needed > budget_exp as f64 + 1e-12 {
        return Err(Error::NoFeasibleScheme { budget: budget_exp, needed });
    }
    let upper = ma.trajectory(&ra, geo.depth, choice.a_state);
    let lower = mb.trajectory(&rb, geo.depth, choice.b_state);
    let lines = GridLines { boundary_row: geo.b, upper, lower, sweep: choice.sweep };
    let scheme = scheme_from_lines(c, &geo, lines, opts.credit)?;
    if scheme.exponents.a != choice.e_a || scheme.exponents.b != choice.e_b || scheme.exponents.c != choice.e_c {
        return Err(Error::InvalidScheme(format!(
            "reconstructed exponents {:?} disagree with DP ({}, {}, {})",
            scheme.exponents, choice.e_a, choice.e_b, choice.e_c
        )));
    }
    Ok(scheme)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Region {
    A,
    B,
    C,
}

fn scheme_from_lines(c: &Circuit, geo: &Geometry, lines: GridLines, credit: CreditModel) -> Result<PartitionScheme> {
    let layout = c.layout;
    let n = layout.n_qubits();
    let depth = geo.depth;
    let region = |t: usize, q: usize| -> Region {
        let (side, rho, col) = geo.side_row(q);
        match side {
            Side::A if rho < lines.upper[t][col] as usize => Region::C,
            Side::A => Region::A,
            Side::B if rho < lines.lower[t][col] as usize => Region::C,
            Side::B => Region::B,
        }
    };
    let mut assignment = Vec::with_capacity(depth + 1);
    let mut cuts = Vec::new();
    for (t, layer) in c.layers.iter().enumerate() {
        let mut parts = Vec::with_capacity(layer.len());
        for (gi, g) in layer.iter().enumerate() {
            let regions: Vec<Region> = g.qubits().map(|q| region(t, q)).collect();
            let part = if g.kind == GateKind::Cz && geo.defer && t == depth && t > 0 {
                GatePart::CPost
            } else if regions.iter().all(|&r| r == regions[0]) {
                match regions[0] {
                    Region::A => GatePart::A,
                    Region::B => GatePart::B,
                    Region::C => GatePart::C,
                }
            } else if regions.len() == 2 && regions.contains(&Region::A) && regions.contains(&Region::B) {
                let ctl = g.control.expect("two-qubit gate");
                let (control, target) = if region(t, ctl) == Region::B { (ctl, g.target) } else { (g.target, ctl) };
                cuts.push(CutCz { layer: t, column: layout.coords(control).1, gate: gi, control, target });
                GatePart::Cut
            } else {
                return Err(Error::InvalidScheme(format!("layer {t}: gate {gi} straddles C and another part")));
            };
            parts.push(part);
        }
        assignment.push(parts);
    }
    cuts.sort_by_key(|k| (k.layer, k.column));

    // trailing eligible cuts of each column are absorbed on the B side
    let mut implicit = vec![false; cuts.len()];
    for k in 0..layout.cols {
        let q = layout.rank(geo.b, k);
        let leave = (1..=depth).find(|&t| lines.lower[t][k] > 0).unwrap_or(depth + 1);
        let mut idx: Vec<usize> = (0..cuts.len()).filter(|&i| cuts[i].column == k).collect();
        idx.sort_by_key(|&i| std::cmp::Reverse(cuts[i].layer));
        let mut s = leave - 1;
        for i in idx {
            let e = cuts[i].layer;
            let mut blocked = false;
            while s > e {
                if let Some(g) = c.gate_on(s, q) {
                    if credit.blocks(g) && g.kind != GateKind::Cz {
                        blocked = true;
                        break;
                    }
                }
                s -= 1;
            }
            if blocked {
                break;
            }
            implicit[i] = true;
            s = e.saturating_sub(1);
        }
    }
    let (imp, reg): (Vec<(CutCz, bool)>, Vec<(CutCz, bool)>) = cuts.into_iter().zip(implicit).partition(|(_, i)| *i);
    let cut_czs: Vec<CutCz> = reg.into_iter().map(|(c, _)| c).collect();
    let implicit_czs: Vec<CutCz> = imp.into_iter().map(|(c, _)| c).collect();

    let part_a: Vec<usize> = (0..n).filter(|&q| layout.coords(q).0 < geo.b).collect();
    let part_b: Vec<usize> = (0..n).filter(|&q| layout.coords(q).0 >= geo.b).collect();
    let part_c: Vec<usize> = (0..n).filter(|&q| region(depth, q) == Region::C).collect();
    let total = cut_czs.len() + implicit_czs.len();
    let exponents = Exponents { a: part_a.len() + total, b: part_b.len() + cut_czs.len(), c: part_c.len() };
    let n_c = assignment.iter().flatten().filter(|p| matches!(p, GatePart::C | GatePart::CPost)).count();
    let mut s = PartitionScheme {
        n_qubits: n,
        depth,
        part_a,
        part_b,
        part_c,
        assignment,
        cut_czs,
        implicit_czs,
        exponents,
        n_c,
        grid: Some(lines),
        cost: PartitionCost { space_bytes: 0.0, space_log2: 0.0, flops: FlopsExpr { n, branch_exponent: 0, n_c: 0 }, branch_count_log2: 0 },
    };
    s.cost = estimate_cost(&s);
    s.validate(c)?;
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub layer: usize,
    pub positions: Vec<usize>,
    pub t_positions: Vec<usize>,
    pub sliceable: Vec<usize>,
    pub feasible: bool,
}

/// Looks for T gates on the even columns of row 0 at `layer`. Each such qubit is
/// sliceable together with its most recent CZ partner, since only diagonal gates
/// separate that CZ from the output.
pub fn slice_analysis(c: &Circuit, layer: usize) -> Result<SliceReport> {
    if layer == 0 || layer > c.depth() {
        return Err(Error::InvalidSplitLayer { split: layer, depth: c.depth() });
    }
    let positions: Vec<usize> = (0..c.layout.cols).step_by(2).map(|col| c.layout.rank(0, col)).collect();
    let t_positions: Vec<usize> =
        positions.iter().copied().filter(|&q| c.gate_on(layer, q).is_some_and(|g| g.kind == GateKind::T)).collect();
    let mut sliceable = t_positions.clone();
    for &q in &t_positions {
        let partner = (1..layer).rev().find_map(|t| {
            c.gate_on(t, q).and_then(|g| g.control.map(|ctl| if ctl == q { g.target } else { ctl }))
        });
        sliceable.extend(partner);
    }
    sliceable.sort_unstable();
    sliceable.dedup();
    Ok(SliceReport { layer, feasible: !t_positions.is_empty(), positions, t_positions, sliceable })
}
