//! Executes a partition scheme: branch simulation of parts A and B, recombination into
//! part-C blocks, and the amplitude methods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocked::{run_schedule, schedule_layers, GateSchedule, DEFAULT_TILE};
use crate::circuit::{adjoint, single_qubit_matrix, Circuit, Gate, GateKind, Layer, C64};
use crate::dense::{inner_product_slices, simulate_dense_capped, StateVector, DEFAULT_QUBIT_CAP};
use crate::error::{Error, Result};
use crate::partition::{find_scheme_with, GatePart, PartitionOptions, PartitionScheme, Side};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimParams {
    /// Largest exponent of any single stored vector.
    pub qubit_cap: usize,
    pub n_local: usize,
    pub tile: usize,
    pub workers: usize,
    pub node_memory_exponent: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            qubit_cap: DEFAULT_QUBIT_CAP,
            n_local: 10,
            tile: DEFAULT_TILE,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            node_memory_exponent: 28,
        }
    }
}

/// Branch vectors of one part. For A the branch index is `regular | implicit << t`;
/// for B it is the regular label only, implicit labels living in the control qubits.
#[derive(Clone, Debug)]
pub struct PartOutput {
    pub side: Side,
    /// Global ranks of the part's qubits; local bit k is `qubits[k]`.
    pub qubits: Vec<usize>,
    pub regular_bits: usize,
    pub implicit_bits: usize,
    pub branches: Vec<StateVector>,
}

impl PartOutput {
    pub fn stored_amplitudes(&self) -> usize {
        self.branches.iter().map(StateVector::len).sum()
    }

    /// Reinstates the implicit labels of a B output as explicit branches, zero where the
    /// control qubit disagrees with the label.
    pub fn expand_implicit(&self, controls: &[usize]) -> Vec<StateVector> {
        let local: Vec<usize> = controls.iter().map(|c| self.qubits.iter().position(|q| q == c).expect("control in part")).collect();
        let mut out = Vec::new();
        for imp in 0..1usize << controls.len() {
            for b in &self.branches {
                let amps = b
                    .amps()
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        let ok = local.iter().enumerate().all(|(j, &k)| (i >> k) & 1 == (imp >> j) & 1);
                        if ok {
                            a
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                out.push(StateVector::from_amps(amps).expect("power of two"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum Label {
    Regular(usize),
    Implicit(usize),
}

#[derive(Clone, Copy, Debug)]
enum PartOp {
    Fixed(Gate),
    CondZ(usize, Label),
    Project(usize, Label),
}

fn local_index(qubits: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut pos = vec![None; n];
    for (k, &q) in qubits.iter().enumerate() {
        pos[q] = Some(k);
    }
    pos
}

fn part_ops(c: &Circuit, s: &PartitionScheme, side: Side, pos: &[Option<usize>]) -> Vec<PartOp> {
    let want = match side {
        Side::A => GatePart::A,
        Side::B => GatePart::B,
    };
    let label_of = |t: usize, gi: usize| -> Label {
        if let Some(i) = s.cut_czs.iter().position(|k| k.layer == t && k.gate == gi) {
            Label::Regular(i)
        } else {
            Label::Implicit(s.implicit_czs.iter().position(|k| k.layer == t && k.gate == gi).expect("listed cut"))
        }
    };
    let mut ops = Vec::new();
    for (t, layer) in c.layers.iter().enumerate() {
        for (gi, g) in layer.iter().enumerate() {
            let part = s.assignment[t][gi];
            if part == want {
                ops.push(PartOp::Fixed(g.remap(|q| pos[q].expect("gate inside its part"))));
            } else if part == GatePart::Cut {
                let cut = s.cut_czs.iter().chain(&s.implicit_czs).find(|k| k.layer == t && k.gate == gi).expect("listed cut");
                match (side, label_of(t, gi)) {
                    (Side::A, l) => ops.push(PartOp::CondZ(pos[cut.target].expect("target in A"), l)),
                    (Side::B, Label::Regular(i)) => ops.push(PartOp::Project(pos[cut.control].expect("control in B"), Label::Regular(i))),
                    (Side::B, Label::Implicit(_)) => {}
                }
            }
        }
    }
    ops
}

fn run_branch(n: usize, ops: &[PartOp], branch: usize, t: usize) -> Result<StateVector> {
    let bit = |l: Label| match l {
        Label::Regular(i) => (branch >> i) & 1,
        Label::Implicit(j) => (branch >> (t + j)) & 1,
    };
    let mut s = StateVector::zero(n);
    for op in ops {
        match *op {
            PartOp::Fixed(g) => s.apply_gate(&g)?,
            PartOp::CondZ(q, l) => {
                if bit(l) == 1 {
                    s.apply_single_qubit(&Gate::single(GateKind::Z, q))?;
                }
            }
            PartOp::Project(q, l) => {
                let kind = if bit(l) == 1 { GateKind::P1 } else { GateKind::P0 };
                s.apply_single_qubit(&Gate::single(kind, q))?;
            }
        }
    }
    Ok(s)
}

pub fn simulate_parts(c: &Circuit, s: &PartitionScheme) -> Result<(PartOutput, PartOutput)> {
    simulate_parts_with(c, s, &SimParams::default())
}

pub fn simulate_parts_with(c: &Circuit, s: &PartitionScheme, params: &SimParams) -> Result<(PartOutput, PartOutput)> {
    s.validate(c)?;
    for (what, e) in [("part A", s.exponents.a), ("part B", s.exponents.b)] {
        if e > params.qubit_cap {
            return Err(Error::CapacityExceeded { what, required: e, cap: params.qubit_cap });
        }
    }
    let n = c.n_qubits();
    let t = s.cut_czs.len();
    let imp = s.implicit_czs.len();
    let run = |side: Side, qubits: &Vec<usize>, count: usize| -> Result<PartOutput> {
        let pos = local_index(qubits, n);
        let ops = part_ops(c, s, side, &pos);
        let branches = (0..count).into_par_iter().map(|br| run_branch(qubits.len(), &ops, br, t)).collect::<Result<Vec<_>>>()?;
        Ok(PartOutput {
            side,
            qubits: qubits.clone(),
            regular_bits: t,
            implicit_bits: if side == Side::A { imp } else { 0 },
            branches,
        })
    };
    let a = run(Side::A, &s.part_a, 1 << (t + imp))?;
    let b = run(Side::B, &s.part_b, 1 << t)?;
    Ok((a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    #[default]
    Gather,
    Regrouped,
}

impl std::str::FromStr for CombineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gather" => Ok(CombineMode::Gather),
            "regrouped" | "alltoall" => Ok(CombineMode::Regrouped),
            o => Err(Error::Config(format!("unknown combine mode '{o}'"))),
        }
    }
}

/// Communication shape of the recombination step, in counts and exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinePlan {
    pub mode: CombineMode,
    pub n_qubits: usize,
    pub block_exponent: usize,
    pub entity_exponent: usize,
    pub entity_count: u64,
    pub group_exponent: usize,
    pub group_size: u64,
    pub exchanges: u64,
    pub rounds: u64,
    pub exchanges_per_round: u64,
    pub round_volume: u64,
    pub worker_count: u64,
    pub node_memory_exponent: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanComparison {
    pub gather: CombinePlan,
    pub regrouped: CombinePlan,
}

fn pow2(e: usize) -> u64 {
    if e >= 63 {
        u64::MAX
    } else {
        1u64 << e
    }
}

/// Implicit controls that end up inside part C; their labels become C index bits.
fn regroup_qubits(s: &PartitionScheme) -> Vec<usize> {
    let mut v: Vec<usize> = s.implicit_czs.iter().map(|k| k.control).filter(|q| s.part_c.binary_search(q).is_ok()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn build_combine_plan(s: &PartitionScheme, worker_count: u64, node_memory_exponent: u32) -> Result<PlanComparison> {
    let e_c = s.exponents.c;
    if (node_memory_exponent as usize) < e_c {
        return Err(Error::BlockTooLarge { block: e_c, node: node_memory_exponent });
    }
    let workers = worker_count.max(1);
    let entity_exp = s.n_qubits - e_c;
    let entities = pow2(entity_exp);
    let block = pow2(e_c);
    let b_outside = s.part_b.iter().filter(|q| s.part_c.binary_search(q).is_err()).count();
    let per_entity_b = s.exponents.b - b_outside;

    let g_gather = per_entity_b.saturating_sub(node_memory_exponent as usize);
    let gather_conc = (workers / pow2(g_gather)).max(1).min(entities);
    let gather = CombinePlan {
        mode: CombineMode::Gather,
        n_qubits: s.n_qubits,
        block_exponent: e_c,
        entity_exponent: entity_exp,
        entity_count: entities,
        group_exponent: g_gather,
        group_size: pow2(g_gather),
        exchanges: entities,
        rounds: entities.div_ceil(gather_conc),
        exchanges_per_round: gather_conc,
        round_volume: gather_conc.saturating_mul(block),
        worker_count: workers,
        node_memory_exponent,
    };

    let g_reg = regroup_qubits(s).len().min(entity_exp);
    let groups = pow2(entity_exp - g_reg);
    let reg_conc = (workers / pow2(g_reg)).max(1).min(groups);
    let regrouped = CombinePlan {
        mode: CombineMode::Regrouped,
        n_qubits: s.n_qubits,
        block_exponent: e_c,
        entity_exponent: entity_exp,
        entity_count: entities,
        group_exponent: g_reg,
        group_size: pow2(g_reg),
        exchanges: groups,
        rounds: entities.div_ceil(workers),
        exchanges_per_round: reg_conc,
        round_volume: reg_conc.saturating_mul(pow2(g_reg)).saturating_mul(block),
        worker_count: workers,
        node_memory_exponent,
    };
    Ok(PlanComparison { gather, regrouped })
}

fn scatter(bits: usize, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0, |acc, (k, &p)| acc | (((bits >> k) & 1) << p))
}

fn gather_bits(x: usize, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0, |acc, (k, &p)| acc | (((x >> p) & 1) << k))
}

/// Everything needed to build and evolve part-C blocks.
struct BlockEngine<'a> {
    a: &'a PartOutput,
    b: &'a PartOutput,
    n: usize,
    c_qubits: Vec<usize>,
    outer_qubits: Vec<usize>,
    a_pos: Vec<Option<usize>>,
    b_pos: Vec<Option<usize>>,
    implicit_controls: Vec<usize>,
    c_layers: Vec<Layer>,
    post: Vec<(usize, usize)>,
    schedule: Option<GateSchedule>,
    tile: usize,
}

impl<'a> BlockEngine<'a> {
    fn new(c: &Circuit, s: &PartitionScheme, a: &'a PartOutput, b: &'a PartOutput, params: &SimParams) -> Result<Self> {
        let n = c.n_qubits();
        if a.side != Side::A || b.side != Side::B || a.qubits != s.part_a || b.qubits != s.part_b {
            return Err(Error::InvalidScheme("part outputs do not belong to this scheme".into()));
        }
        let c_qubits = s.part_c.clone();
        let c_pos = local_index(&c_qubits, n);
        let outer_qubits: Vec<usize> = (0..n).filter(|q| c_pos[*q].is_none()).collect();
        let mut c_layers = Vec::new();
        let mut post = Vec::new();
        for (t, layer) in c.layers.iter().enumerate() {
            let mut l = Vec::new();
            for (gi, g) in layer.iter().enumerate() {
                match s.assignment[t][gi] {
                    GatePart::C => l.push(g.remap(|q| c_pos[q].expect("C gate on C qubit"))),
                    GatePart::CPost => post.push((g.control.expect("cz"), g.target)),
                    _ => {}
                }
            }
            if !l.is_empty() {
                c_layers.push(l);
            }
        }
        let e_c = c_qubits.len();
        let schedule = if e_c >= 2 && params.n_local < e_c && !c_layers.is_empty() {
            Some(schedule_layers(e_c, &c_layers, params.n_local.max(2))?)
        } else {
            None
        };
        Ok(BlockEngine {
            a,
            b,
            n,
            a_pos: local_index(&a.qubits, n),
            b_pos: local_index(&b.qubits, n),
            implicit_controls: s.implicit_czs.iter().map(|k| k.control).collect(),
            c_qubits,
            outer_qubits,
            c_layers,
            post,
            schedule,
            tile: params.tile,
        })
    }

    fn split(&self, x: usize) -> (usize, usize, usize) {
        let mut xa = 0;
        let mut xb = 0;
        for q in 0..self.n {
            let bit = (x >> q) & 1;
            if let Some(k) = self.a_pos[q] {
                xa |= bit << k;
            } else if let Some(k) = self.b_pos[q] {
                xb |= bit << k;
            }
        }
        (xa, xb, gather_bits(x, &self.implicit_controls))
    }

    /// Sum over regular branches of phi (x) xi at global index x.
    fn input_amplitude(&self, x: usize) -> C64 {
        let (xa, xb, imp) = self.split(x);
        let t = self.a.regular_bits;
        let mut acc = C64::new(0.0, 0.0);
        for (l, xi) in self.b.branches.iter().enumerate() {
            acc += self.a.branches[l | (imp << t)].amps()[xa] * xi.amps()[xb];
        }
        acc
    }

    fn global_index(&self, block: usize, y: usize) -> usize {
        scatter(block, &self.outer_qubits) | scatter(y, &self.c_qubits)
    }

    fn assemble(&self, block: usize) -> Vec<C64> {
        (0..1usize << self.c_qubits.len()).map(|y| self.input_amplitude(self.global_index(block, y))).collect()
    }

    fn evolve(&self, block: usize, amps: Vec<C64>) -> Result<Vec<C64>> {
        let mut st = StateVector::from_amps(amps)?;
        match &self.schedule {
            Some(sched) => run_schedule(&mut st, sched, self.tile)?,
            None => {
                for l in &self.c_layers {
                    st.apply_gates(l)?;
                }
            }
        }
        let mut amps = st.into_amps();
        if !self.post.is_empty() {
            for (y, a) in amps.iter_mut().enumerate() {
                let x = self.global_index(block, y);
                let odd = self.post.iter().filter(|&&(p, q)| (x >> p) & 1 == 1 && (x >> q) & 1 == 1).count() % 2;
                if odd == 1 {
                    *a = -*a;
                }
            }
        }
        Ok(amps)
    }
}

/// Task 1: the full output state.
pub fn combine_and_run_c(
    c: &Circuit,
    a: &PartOutput,
    b: &PartOutput,
    s: &PartitionScheme,
    plan: &CombinePlan,
    params: &SimParams,
) -> Result<StateVector> {
    let n = c.n_qubits();
    if plan.n_qubits != n || plan.block_exponent != s.exponents.c || plan.entity_exponent != n - s.exponents.c {
        return Err(Error::PlanMismatch(format!(
            "plan has block 2^{} of {} qubits, scheme has 2^{} of {}",
            plan.block_exponent, plan.n_qubits, s.exponents.c, n
        )));
    }
    if s.exponents.c > plan.node_memory_exponent as usize {
        return Err(Error::BlockTooLarge { block: s.exponents.c, node: plan.node_memory_exponent });
    }
    if n > params.qubit_cap {
        return Err(Error::CapacityExceeded { what: "output state", required: n, cap: params.qubit_cap });
    }
    let eng = BlockEngine::new(c, s, a, b, params)?;
    let e_c = eng.c_qubits.len();
    let blocks = 1usize << (n - e_c);
    let evolved: Vec<Vec<C64>> = match plan.mode {
        CombineMode::Gather => (0..blocks).into_par_iter().map(|blk| eng.evolve(blk, eng.assemble(blk))).collect::<Result<_>>()?,
        CombineMode::Regrouped => regrouped_blocks(&eng, s)?,
    };
    let mut out = vec![C64::new(0.0, 0.0); 1 << n];
    for (blk, amps) in evolved.into_iter().enumerate() {
        for (y, a) in amps.into_iter().enumerate() {
            out[eng.global_index(blk, y)] = a;
        }
    }
    StateVector::from_amps(out)
}

/// Blocks are built by groups: each "node" j fixes the labels of the regrouped C qubits
/// and spans all values of the paired outer qubits; a transpose then hands every block
/// its full set of labels.
fn regrouped_blocks(eng: &BlockEngine, s: &PartitionScheme) -> Result<Vec<Vec<C64>>> {
    let e_c = eng.c_qubits.len();
    let n_outer = eng.outer_qubits.len();
    let labels = regroup_qubits(s);
    let r = labels.len().min(n_outer);
    // local C positions of the regrouped label qubits, and the remaining C positions
    let j_pos: Vec<usize> = labels[..r].iter().map(|q| eng.c_qubits.binary_search(q).expect("in C")).collect();
    let z_pos: Vec<usize> = (0..e_c).filter(|k| !j_pos.contains(k)).collect();
    // paired outer bits are the lowest r outer positions; the rest index the group
    let g_pos: Vec<usize> = (0..r).collect();
    let rest_pos: Vec<usize> = (r..n_outer).collect();
    let zdim = 1usize << (e_c - r);
    let nodes = 1usize << r;

    let groups = 1usize << (n_outer - r);
    let per_group: Vec<Vec<(usize, Vec<C64>)>> = (0..groups)
        .into_par_iter()
        .map(|grp| -> Result<Vec<(usize, Vec<C64>)>> {
            let base = scatter(grp, &rest_pos);
            // staging[j][v][z]: node j, paired value v, other C bits z
            let mut staging = vec![C64::new(0.0, 0.0); nodes * nodes * zdim];
            for j in 0..nodes {
                for v in 0..nodes {
                    let blk = base | scatter(v, &g_pos);
                    for z in 0..zdim {
                        let y = scatter(j, &j_pos) | scatter(z, &z_pos);
                        staging[(j * nodes + v) * zdim + z] = eng.input_amplitude(eng.global_index(blk, y));
                    }
                }
            }
            // exchange: block v collects slice v from every node j
            let mut out = Vec::with_capacity(nodes);
            for v in 0..nodes {
                let blk = base | scatter(v, &g_pos);
                let mut amps = vec![C64::new(0.0, 0.0); 1 << e_c];
                for j in 0..nodes {
                    for z in 0..zdim {
                        amps[scatter(j, &j_pos) | scatter(z, &z_pos)] = staging[(j * nodes + v) * zdim + z];
                    }
                }
                out.push((blk, eng.evolve(blk, amps)?));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut blocks = vec![Vec::new(); 1 << n_outer];
    for (blk, amps) in per_group.into_iter().flatten() {
        blocks[blk] = amps;
    }
    Ok(blocks)
}

/// Task 2 for a few targets: only the blocks holding them are built.
pub fn sample_amplitudes(
    c: &Circuit,
    a: &PartOutput,
    b: &PartOutput,
    s: &PartitionScheme,
    targets: &[u64],
    params: &SimParams,
) -> Result<Vec<C64>> {
    let n = c.n_qubits();
    for &x in targets {
        if n < 64 && x >= 1u64 << n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
    }
    let eng = BlockEngine::new(c, s, a, b, params)?;
    let mut blocks: Vec<usize> = targets.iter().map(|&x| gather_bits(x as usize, &eng.outer_qubits)).collect();
    blocks.sort_unstable();
    blocks.dedup();
    let evolved: Vec<(usize, Vec<C64>)> =
        blocks.par_iter().map(|&blk| Ok((blk, eng.evolve(blk, eng.assemble(blk))?))).collect::<Result<_>>()?;
    Ok(targets
        .iter()
        .map(|&x| {
            let blk = gather_bits(x as usize, &eng.outer_qubits);
            let i = evolved.binary_search_by_key(&blk, |(b, _)| *b).expect("block built");
            evolved[i].1[gather_bits(x as usize, &eng.c_qubits)]
        })
        .collect())
}

/// Partition, simulate parts and recombine.
pub fn run_task1(c: &Circuit, s: &PartitionScheme, mode: CombineMode, params: &SimParams) -> Result<StateVector> {
    let (a, b) = simulate_parts_with(c, s, params)?;
    let plans = build_combine_plan(s, params.workers as u64, params.node_memory_exponent.max(s.exponents.c as u32))?;
    let plan = match mode {
        CombineMode::Gather => plans.gather,
        CombineMode::Regrouped => plans.regrouped,
    };
    combine_and_run_c(c, &a, &b, s, &plan, params)
}

/// Applies the inverse of `layers` (in reverse order) to `s`.
pub fn apply_inverse(s: &mut StateVector, layers: &[Layer]) -> Result<()> {
    for layer in layers.iter().rev() {
        for g in layer {
            match g.kind {
                GateKind::Cz => s.apply_gate(g)?,
                k => {
                    let m = adjoint(&single_qubit_matrix(k)?);
                    s.apply_matrix(&m, g.target)?;
                }
            }
        }
    }
    Ok(())
}

/// Block width used when summing the split inner product.
const SPLIT_BLOCK_EXP: usize = 10;

/// Task 2 for deep circuits: alpha_x = <U2^dag x | U1 H|0>, with U1 = layers 1..=split.
pub fn amplitude_by_split(c: &Circuit, x: u64, split_layer: usize) -> Result<C64> {
    let n = c.n_qubits();
    let depth = c.depth();
    if split_layer > depth {
        return Err(Error::InvalidSplitLayer { split: split_layer, depth });
    }
    if n < 64 && x >= 1u64 << n {
        return Err(Error::IndexOutOfRange { index: x, n });
    }
    let psi = simulate_dense_capped(&c.prefix(split_layer), None, DEFAULT_QUBIT_CAP)?;
    let mut phi = StateVector::basis(n, x as usize);
    apply_inverse(&mut phi, &c.layers[split_layer + 1..])?;
    let block = 1usize << SPLIT_BLOCK_EXP.min(n);
    let partials: Vec<C64> = phi
        .amps()
        .par_chunks(block)
        .zip(psi.amps().par_chunks(block))
        .map(|(p, q)| inner_product_slices(p, q).expect("equal chunks"))
        .collect();
    Ok(pairwise(&partials))
}

fn pairwise(xs: &[C64]) -> C64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise(a) + pairwise(b)
}

/// The two halves as standalone circuits for partition budgeting: layers 1..=split, and
/// layers split+1..=depth in reverse order.
pub fn split_halves(c: &Circuit, split_layer: usize) -> Result<(Circuit, Circuit)> {
    let depth = c.depth();
    if split_layer == 0 || split_layer >= depth {
        return Err(Error::InvalidSplitLayer { split: split_layer, depth });
    }
    let first = c.prefix(split_layer);
    let mut layers = vec![c.layers[0].clone()];
    layers.extend(c.layers[split_layer + 1..].iter().rev().cloned());
    Ok((first, Circuit { layout: c.layout, layers }))
}

/// Schemes for both halves under the same budget.
pub fn split_budget(c: &Circuit, split_layer: usize, budget_exp: u32, opts: &PartitionOptions) -> Result<(PartitionScheme, PartitionScheme)> {
    let (u1, u2) = split_halves(c, split_layer)?;
    Ok((find_scheme_with(&u1, budget_exp, opts)?, find_scheme_with(&u2, budget_exp, opts)?))
}
