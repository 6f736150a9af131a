//! Window-batched simulation with qubit-rank swaps.
//!
//! Physical ranks below `n_local` form a window of contiguous amplitudes. Non-diagonal
//! gates only run on window ranks; diagonal gates run anywhere since a global bit is
//! constant inside a window. A swap exchanges the bit field [0, w) with [s, s + w),
//! which is a transpose of 2^w x 2^w blocks.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{single_qubit_matrix, Circuit, Gate, GateKind, Layer, C64};
use crate::dense::{apply_cz, apply_diagonal, apply_matrix, StateVector};
use crate::error::{Error, Result};

pub const DEFAULT_TILE: usize = 64;

#[derive(Clone, Debug, Serialize)]
pub struct ScheduledGate {
    pub layer: usize,
    /// Gate on logical qubit ranks, as written in the circuit.
    pub logical: Gate,
    /// Same gate on physical ranks at the time it runs.
    pub physical: Gate,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum ScheduleItem {
    Batch { gates: Vec<ScheduledGate> },
    Swap { width: usize, offset: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct GateSchedule {
    pub n_qubits: usize,
    pub n_local: usize,
    pub items: Vec<ScheduleItem>,
    pub swap_count: usize,
    /// Physical rank of each logical qubit after the last item.
    pub final_placement: Vec<usize>,
}

impl GateSchedule {
    pub fn gate_count(&self) -> usize {
        self.items
            .iter()
            .map(|it| match it {
                ScheduleItem::Batch { gates } => gates.len(),
                ScheduleItem::Swap { .. } => 0,
            })
            .sum()
    }
}

/// Swap windows (offset, width) available for `n` qubits with `n_local` window ranks.
///
/// With 2 n_local >= n a single window exchanges the whole global field with the bottom
/// ranks. Narrower windows tile the global field in chunks of `n_local`.
pub fn swap_windows(n: usize, n_local: usize) -> Vec<(usize, usize)> {
    if n_local >= n {
        return Vec::new();
    }
    if 2 * n_local >= n {
        return vec![(n_local, n - n_local)];
    }
    let mut out = Vec::new();
    let mut s = n_local;
    while s < n {
        let w = n_local.min(n - s);
        out.push((s, w));
        s += w;
    }
    out
}

pub fn schedule_gates(c: &Circuit, n_local: usize) -> Result<GateSchedule> {
    schedule_layers(c.n_qubits(), &c.layers, n_local)
}

pub fn schedule_layers(n: usize, layers: &[Layer], n_local: usize) -> Result<GateSchedule> {
    let nl = n_local.min(n);
    if nl == 0 || (nl < 2 && nl < n) {
        return Err(Error::InvalidLocalQubits { n_local, n });
    }
    let ops: Vec<(usize, Gate)> =
        layers.iter().enumerate().flat_map(|(t, l)| l.iter().map(move |g| (t, *g))).collect();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    for (i, (_, g)) in ops.iter().enumerate() {
        for q in g.qubits() {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            queues[q].push_back(i);
        }
    }
    let windows = swap_windows(n, nl);
    let mut place: Vec<usize> = (0..n).collect();
    let mut remaining = ops.len();
    let mut items = Vec::new();
    let mut swap_count = 0;

    let is_ready = |queues: &[VecDeque<usize>], i: usize| ops[i].1.qubits().all(|q| queues[q].front() == Some(&i));

    while remaining > 0 {
        let mut batch = Vec::new();
        let mut blocked: Vec<usize> = Vec::new();
        loop {
            let mut ready: Vec<usize> = Vec::new();
            blocked.clear();
            for q in 0..n {
                if let Some(&i) = queues[q].front() {
                    if ops[i].1.qubits().min() == Some(q) && is_ready(&queues, i) {
                        let g = &ops[i].1;
                        if g.is_diagonal() || g.qubits().all(|p| place[p] < nl) {
                            ready.push(i);
                        } else {
                            blocked.push(i);
                        }
                    }
                }
            }
            if ready.is_empty() {
                break;
            }
            ready.sort_by_key(|&i| {
                let (t, g) = &ops[i];
                (*t, !g.is_diagonal(), g.qubits().min().unwrap_or(0))
            });
            for i in ready {
                let (t, g) = ops[i];
                for q in g.qubits() {
                    queues[q].pop_front();
                }
                batch.push(ScheduledGate { layer: t, logical: g, physical: g.remap(|q| place[q]) });
                remaining -= 1;
            }
        }
        if !batch.is_empty() {
            items.push(ScheduleItem::Batch { gates: batch });
        }
        if remaining == 0 {
            break;
        }
        // only the earliest blocked layer votes, so a prefix circuit swaps identically
        let first = blocked.iter().map(|&i| ops[i].0).min().unwrap_or(0);
        let want: Vec<usize> = blocked
            .iter()
            .filter(|&&i| ops[i].0 == first)
            .flat_map(|&i| ops[i].1.qubits())
            .map(|q| place[q])
            .filter(|&p| p >= nl)
            .collect();
        let &(offset, width) = windows
            .iter()
            .max_by_key(|(s, w)| (want.iter().filter(|&&p| p >= *s && p < s + w).count(), std::cmp::Reverse(*s)))
            .ok_or(Error::InvalidLocalQubits { n_local, n })?;
        if !want.iter().any(|&p| p >= offset && p < offset + width) {
            return Err(Error::InvalidLocalQubits { n_local, n });
        }
        for p in place.iter_mut() {
            if *p < width {
                *p += offset;
            } else if *p >= offset && *p < offset + width {
                *p -= offset;
            }
        }
        items.push(ScheduleItem::Swap { width, offset });
        swap_count += 1;
    }
    Ok(GateSchedule { n_qubits: n, n_local: nl, items, swap_count, final_placement: place })
}

struct SyncPtr(*mut C64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

/// Exchanges index bit fields [0, width) and [offset, offset + width).
pub fn swap_bit_fields(amps: &mut [C64], offset: usize, width: usize, tile: usize) -> Result<()> {
    let n = amps.len().trailing_zeros() as usize;
    if width == 0 || offset < width || offset + width > n {
        return Err(Error::InvalidSwapWidth { w: width, n });
    }
    let dim = 1usize << width;
    let tile = tile.max(1);
    let t = (1usize << (usize::BITS - 1 - tile.leading_zeros())).min(dim);
    let ntiles = dim / t;
    let mids = 1usize << (offset - width);
    let his = 1usize << (n - offset - width);
    let ptr = SyncPtr(amps.as_mut_ptr());
    let ptr = &ptr;
    (0..his * mids * ntiles).into_par_iter().for_each(|task| {
        let ti = task % ntiles;
        let hm = task / ntiles;
        let base = ((hm / mids) << (offset + width)) | ((hm % mids) << width);
        for tj in ti..ntiles {
            for i in ti * t..(ti + 1) * t {
                let j0 = if ti == tj { i + 1 } else { tj * t };
                for j in j0..(tj + 1) * t {
                    let a = base + (i << offset) + j;
                    let b = base + (j << offset) + i;
                    // SAFETY: each unordered element pair (i, j) belongs to exactly one task.
                    unsafe { std::ptr::swap(ptr.0.add(a), ptr.0.add(b)) };
                }
            }
        }
    });
    Ok(())
}

/// Exchanges bit fields [0, w) and [w, 2w) of every index.
pub fn swap_ranks(s: &mut StateVector, w: usize) -> Result<()> {
    if 2 * w > s.n_qubits() {
        return Err(Error::InvalidSwapWidth { w, n: s.n_qubits() });
    }
    swap_bit_fields(s.amps_mut(), w, w, DEFAULT_TILE)
}

fn apply_in_window(win: &mut [C64], h: usize, nl: usize, g: &Gate) {
    let bit = |k: usize| (h >> (k - nl)) & 1;
    match (g.kind, g.control) {
        (GateKind::Cz, Some(c)) => {
            let (a, b) = (c.min(g.target), c.max(g.target));
            if b < nl {
                apply_cz(win, a, b);
            } else if a < nl {
                if bit(b) == 1 {
                    apply_diagonal(win, C64::new(1.0, 0.0), C64::new(-1.0, 0.0), a);
                }
            } else if bit(a) == 1 && bit(b) == 1 {
                win.iter_mut().for_each(|x| *x = -*x);
            }
        }
        (kind, _) => {
            let m = single_qubit_matrix(kind).expect("single-qubit kind");
            let k = g.target;
            if k < nl {
                if kind.is_diagonal() {
                    apply_diagonal(win, m[0][0], m[1][1], k);
                } else {
                    apply_matrix(win, &m, k);
                }
            } else {
                let d = m[bit(k)][bit(k)];
                if d != C64::new(1.0, 0.0) {
                    win.iter_mut().for_each(|x| *x *= d);
                }
            }
        }
    }
}

/// Moves amplitudes from physical placement back to logical bit order.
pub fn restore_logical_order(s: &mut StateVector, placement: &[usize]) {
    if placement.iter().enumerate().all(|(q, &p)| q == p) {
        return;
    }
    let src = s.amps().to_vec();
    s.amps_mut().par_iter_mut().enumerate().for_each(|(x, out)| {
        let mut phys = 0usize;
        for (q, &p) in placement.iter().enumerate() {
            phys |= ((x >> q) & 1) << p;
        }
        *out = src[phys];
    });
}

/// Replays a schedule on a state held in logical order; the result is in logical order.
pub fn run_schedule(s: &mut StateVector, sched: &GateSchedule, tile: usize) -> Result<()> {
    let n = s.n_qubits();
    if n != sched.n_qubits {
        return Err(Error::LengthMismatch(n, sched.n_qubits));
    }
    let nl = sched.n_local;
    for item in &sched.items {
        match item {
            ScheduleItem::Batch { gates } => {
                if nl == n {
                    for g in gates {
                        s.apply_gate(&g.physical)?;
                    }
                } else {
                    s.amps_mut().par_chunks_mut(1 << nl).enumerate().for_each(|(h, win)| {
                        for g in gates {
                            apply_in_window(win, h, nl, &g.physical);
                        }
                    });
                }
            }
            ScheduleItem::Swap { width, offset } => swap_bit_fields(s.amps_mut(), *offset, *width, tile)?,
        }
    }
    restore_logical_order(s, &sched.final_placement);
    Ok(())
}

/// Runs `layers` on `s` through a window schedule.
pub fn simulate_layers_blocked(s: &mut StateVector, layers: &[Layer], n_local: usize, tile: usize) -> Result<usize> {
    let sched = schedule_layers(s.n_qubits(), layers, n_local)?;
    run_schedule(s, &sched, tile)?;
    Ok(sched.swap_count)
}

pub fn simulate_blocked(c: &Circuit, n_local: usize) -> Result<StateVector> {
    let n = c.n_qubits();
    if n > crate::dense::DEFAULT_QUBIT_CAP {
        return Err(Error::CapacityExceeded { what: "blocked state", required: n, cap: crate::dense::DEFAULT_QUBIT_CAP });
    }
    let mut s = StateVector::zero(n);
    simulate_layers_blocked(&mut s, &c.layers, n_local, DEFAULT_TILE)?;
    Ok(s)
}
