#![allow(dead_code)]

use sfsim::circuit::{Circuit, GridLayout, C64};
use sfsim::partition::{objective, Side};

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// (side, distance from the boundary row, column) of qubit q.
pub fn cell(layout: GridLayout, b: usize, q: usize) -> (Side, usize, usize) {
    let (r, c) = (q / layout.cols, q % layout.cols);
    if r < b {
        (Side::A, b - 1 - r, c)
    } else {
        (Side::B, r - b, c)
    }
}

/// Every non-decreasing offset sequence d[0..=depth] with d[0] = 0 and values <= h.
pub fn column_paths(depth: usize, h: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8];
    fn rec(cur: &mut Vec<u8>, depth: usize, h: usize, out: &mut Vec<Vec<u8>>) {
        if cur.len() == depth + 1 {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for v in last..=h as u8 {
            cur.push(v);
            rec(cur, depth, h, out);
            cur.pop();
        }
    }
    rec(&mut cur, depth, h, &mut out);
    out
}

/// Layers with a boundary CZ in each column; the final layer is skipped when deferred.
pub fn boundary_events(c: &Circuit, b: usize, defer: bool) -> Vec<Vec<usize>> {
    let layout = c.layout;
    let mut ev = vec![Vec::new(); layout.cols];
    for t in 1..=c.depth() {
        if defer && t == c.depth() {
            continue;
        }
        for g in &c.layers[t] {
            if let Some(p) = g.control {
                let (sp, _, cp) = cell(layout, b, p);
                let (sq, _, _) = cell(layout, b, g.target);
                if sp != sq {
                    ev[cp].push(t);
                }
            }
        }
    }
    ev
}

/// Cut count of one side at layer t under per-column offsets, or None if some CZ on this
/// side joins a moved qubit with an unmoved one.
pub fn layer_cost(c: &Circuit, b: usize, side: Side, t: usize, offsets: &[u8], defer: bool) -> Option<usize> {
    if defer && t == c.depth() {
        return Some(0);
    }
    let mut cuts = 0;
    for g in &c.layers[t] {
        let Some(p) = g.control else { continue };
        let (sp, rp, cp) = cell(c.layout, b, p);
        let (sq, rq, cq) = cell(c.layout, b, g.target);
        let moved = |r: usize, col: usize| r < offsets[col] as usize;
        if sp == side && sq == side {
            if moved(rp, cp) != moved(rq, cq) {
                return None;
            }
        } else if sp == side || sq == side {
            let col = if sp == side { cp } else { cq };
            if offsets[col] == 0 {
                cuts += 1;
            }
        }
    }
    Some(cuts)
}

/// Cut CZs at `cut_layers` in column k that see only diagonal gates on their B qubit
/// until the qubit leaves at layer `leave`.
pub fn absorbed(c: &Circuit, b: usize, k: usize, cut_layers: &[usize], leave: usize) -> usize {
    let q = b * c.layout.cols + k;
    cut_layers
        .iter()
        .filter(|&&e| (e + 1..leave.min(c.depth() + 1)).all(|s| c.gate_on(s, q).is_none_or(|g| g.is_diagonal())))
        .count()
}

fn first_leave(path: &[u8], depth: usize) -> usize {
    (1..=depth).find(|&t| path[t] > 0).unwrap_or(depth + 1)
}

/// Unrestricted per-side table by enumerating every combination of column paths.
pub fn brute_side_table(c: &Circuit, b: usize, side: Side, defer: bool) -> Vec<Vec<Option<i32>>> {
    let depth = c.depth();
    let layout = c.layout;
    let h = if side == Side::A { b } else { layout.rows - b };
    let radix = h + 1;
    let n_states = radix.pow(layout.cols as u32);
    let paths = column_paths(depth, h);
    let events = boundary_events(c, b, defer);
    let mut table = vec![vec![None; n_states]; depth + 1];
    table[0][0] = Some((h * layout.cols) as i32);
    let mut idx = vec![0usize; layout.cols];
    loop {
        let chosen: Vec<&Vec<u8>> = idx.iter().map(|&i| &paths[i]).collect();
        let mut val = (h * layout.cols) as i32;
        for t in 1..=depth {
            let offs: Vec<u8> = chosen.iter().map(|p| p[t]).collect();
            let Some(cost) = layer_cost(c, b, side, t, &offs, defer) else { break };
            val += cost as i32;
            if side == Side::B {
                for (k, p) in chosen.iter().enumerate() {
                    if p[t] > 0 && p[t - 1] == 0 {
                        let cut: Vec<usize> = events[k].iter().copied().filter(|&e| e < t).collect();
                        val -= absorbed(c, b, k, &cut, t) as i32;
                    }
                }
            }
            let s = offs.iter().rev().fold(0, |acc, &o| acc * radix + o as usize);
            let e = &mut table[t][s];
            *e = Some(e.map_or(val, |x: i32| x.min(val)));
        }
        // odometer
        let mut k = 0;
        loop {
            if k == layout.cols {
                return table;
            }
            idx[k] += 1;
            if idx[k] < paths.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Minimum objective over all joint trajectories that sweep a common number m of
/// boundary events per column: column k cuts its first min(m, |E_k|) events and both
/// sides have left before the next one.
pub fn brute_min_objective(c: &Circuit, b: usize) -> u128 {
    let depth = c.depth();
    let layout = c.layout;
    let events = boundary_events(c, b, true);
    let max_m = events.iter().map(Vec::len).max().unwrap_or(0);
    let mut best = u128::MAX;
    for m in 0..=max_m {
        let cuts: usize = events.iter().map(|e| e.len().min(m)).sum();
        // per side: for each final offset sum, the best credit (A has none)
        let mut per_side = Vec::new();
        for side in [Side::A, Side::B] {
            let h = if side == Side::A { b } else { layout.rows - b };
            let paths = column_paths(depth, h);
            let allowed: Vec<Vec<usize>> = (0..layout.cols)
                .map(|k| {
                    let n_cut = events[k].len().min(m);
                    (0..paths.len())
                        .filter(|&i| {
                            let p = &paths[i];
                            events[k][..n_cut].iter().all(|&e| p[e] == 0)
                                && events[k].get(n_cut).is_none_or(|&e| p[e] > 0)
                        })
                        .collect()
                })
                .collect();
            let mut best_credit: Vec<Option<usize>> = vec![None; h * layout.cols + 1];
            if allowed.iter().all(|a| !a.is_empty()) {
                let mut idx = vec![0usize; layout.cols];
                'outer: loop {
                    let chosen: Vec<&Vec<u8>> = (0..layout.cols).map(|k| &paths[allowed[k][idx[k]]]).collect();
                    let legal = (1..=depth).all(|t| {
                        let offs: Vec<u8> = chosen.iter().map(|p| p[t]).collect();
                        layer_cost(c, b, side, t, &offs, true).is_some()
                    });
                    if legal {
                        let sum: usize = chosen.iter().map(|p| p[depth] as usize).sum();
                        let credit = if side == Side::B {
                            (0..layout.cols)
                                .map(|k| {
                                    let n_cut = events[k].len().min(m);
                                    absorbed(c, b, k, &events[k][..n_cut], first_leave(chosen[k], depth))
                                })
                                .sum()
                        } else {
                            0
                        };
                        let e = &mut best_credit[sum];
                        *e = Some(e.map_or(credit, |x| x.max(credit)));
                    }
                    let mut k = 0;
                    loop {
                        if k == layout.cols {
                            break 'outer;
                        }
                        idx[k] += 1;
                        if idx[k] < allowed[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
            per_side.push(best_credit);
        }
        let n_a = b * layout.cols;
        let n_b = (layout.rows - b) * layout.cols;
        for (sa, ca) in per_side[0].iter().enumerate() {
            if ca.is_none() {
                continue;
            }
            for (sb, cb) in per_side[1].iter().enumerate() {
                if let Some(cb) = cb {
                    best = best.min(objective(n_a + cuts, n_b + cuts - cb, sa + sb));
                }
            }
        }
    }
    best
}

use sfsim::circuit::{Gate, GateKind};
use sfsim::partition::{GatePart, PartitionScheme};

/// Four qubits on a 2x2 grid, A = {0, 1} on top and B = {2, 3} below. Two CZs between
/// qubits 2 and 1 are cut; a Y^1/2 on qubit 2 between them keeps the first one explicit,
/// and nothing in B touches qubit 2 after the second. Qubits 1 and 2 finish in part C.
pub fn fig2_circuit() -> Circuit {
    use GateKind::*;
    let s = Gate::single;
    let layers = vec![
        (0..4).map(|q| s(H, q)).collect(),
        vec![Gate::cz(2, 1)],
        vec![s(T, 1), Gate::cz(2, 3)],
        vec![s(YHalf, 2)],
        vec![Gate::cz(2, 1)],
        vec![s(YHalf, 1), s(XHalf, 3)],
        vec![Gate::cz(0, 1)],
        vec![s(XHalf, 2)],
        vec![Gate::cz(1, 2)],
        vec![s(YHalf, 1), s(T, 2)],
    ];
    Circuit::new(GridLayout::new(2, 2), layers).unwrap()
}

pub fn fig2_assignment() -> Vec<Vec<GatePart>> {
    use GatePart::*;
    vec![vec![A, A, B, B], vec![Cut], vec![A, B], vec![B], vec![Cut], vec![A, B], vec![A], vec![C], vec![C], vec![C, C]]
}

pub fn fig2_scheme(c: &Circuit, absorb: bool) -> PartitionScheme {
    let implicit: &[(usize, usize)] = if absorb { &[(4, 0)] } else { &[] };
    PartitionScheme::manual(c, vec![0, 1], vec![1, 2], fig2_assignment(), implicit).unwrap()
}
