//! Dense state vectors and the reference gate kernels.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::circuit::{single_qubit_matrix, Circuit, Gate, GateKind, Mat2, C64};
use crate::error::{Error, Result};

/// Largest register simulated without an explicit override.
pub const DEFAULT_QUBIT_CAP: usize = 30;

/// Vectors at least this long are updated in parallel.
const PAR_LEN: usize = 1 << 14;
const PAR_CHUNK: usize = 1 << 12;

pub const STATE_MAGIC: [u8; 8] = *b"SFSTATE\x01";

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::LengthMismatch(amps.len(), amps.len().next_power_of_two()));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        pairwise_sum_f64(&self.amps, &|a: &C64| a.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.par_iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_rank(&self, k: usize) -> Result<()> {
        if k >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit: k, n: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply_single_qubit(&mut self, g: &Gate) -> Result<()> {
        if g.control.is_some() {
            return Err(Error::NotSingleQubit(g.kind));
        }
        self.check_rank(g.target)?;
        let m = single_qubit_matrix(g.kind)?;
        if g.kind.is_diagonal() {
            apply_diagonal(&mut self.amps, m[0][0], m[1][1], g.target);
        } else {
            apply_matrix(&mut self.amps, &m, g.target);
        }
        Ok(())
    }

    pub fn apply_matrix(&mut self, m: &Mat2, k: usize) -> Result<()> {
        self.check_rank(k)?;
        apply_matrix(&mut self.amps, m, k);
        Ok(())
    }

    /// Applies `u` to `t` on the indices whose bit `c` is set.
    pub fn apply_controlled(&mut self, u: &Mat2, c: usize, t: usize) -> Result<()> {
        if c == t {
            return Err(Error::SameQubit(c));
        }
        self.check_rank(c)?;
        self.check_rank(t)?;
        let is_z = u[0][1].norm() == 0.0 && u[1][0].norm() == 0.0 && u[0][0] == C64::new(1.0, 0.0) && u[1][1] == C64::new(-1.0, 0.0);
        if is_z {
            apply_cz(&mut self.amps, c, t);
            return Ok(());
        }
        let hb = c.max(t);
        let (cm, tm) = (1usize << c, 1usize << t);
        let block = 1usize << (hb + 1);
        let kernel = |chunk: &mut [C64]| {
            for i in 0..chunk.len() {
                if i & cm != 0 && i & tm == 0 {
                    let (x, y) = (chunk[i], chunk[i | tm]);
                    chunk[i] = u[0][0] * x + u[0][1] * y;
                    chunk[i | tm] = u[1][0] * x + u[1][1] * y;
                }
            }
        };
        if self.amps.len() >= PAR_LEN {
            self.amps.par_chunks_mut(block).for_each(kernel);
        } else {
            self.amps.chunks_mut(block).for_each(kernel);
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        match (g.kind, g.control) {
            (GateKind::Cz, Some(c)) => {
                if c == g.target {
                    return Err(Error::SameQubit(c));
                }
                self.check_rank(c)?;
                self.check_rank(g.target)?;
                apply_cz(&mut self.amps, c, g.target);
                Ok(())
            }
            (GateKind::Cz, None) => Err(Error::InvalidScheme("cz without control".into())),
            _ => self.apply_single_qubit(g),
        }
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, f: C64) {
        self.amps.par_iter_mut().for_each(|a| *a *= f);
    }
}

fn for_each_pair<F>(amps: &mut [C64], k: usize, f: F)
where
    F: Fn(&mut C64, &mut C64) + Sync,
{
    let half = 1usize << k;
    if amps.len() < PAR_LEN {
        for chunk in amps.chunks_mut(2 * half) {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
        }
    } else if half >= PAR_CHUNK {
        for chunk in amps.chunks_mut(2 * half) {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.par_chunks_mut(PAR_CHUNK)
                .zip(hi.par_chunks_mut(PAR_CHUNK))
                .for_each(|(l, h)| l.iter_mut().zip(h.iter_mut()).for_each(|(a, b)| f(a, b)));
        }
    } else {
        amps.par_chunks_mut(2 * half).with_min_len(PAR_CHUNK / (2 * half)).for_each(|chunk| {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
        });
    }
}

/// Pair update (a_i, a_{i+2^k}) <- m (a_i, a_{i+2^k}) for every i with bit k clear.
pub fn apply_matrix(amps: &mut [C64], m: &Mat2, k: usize) {
    let m = *m;
    for_each_pair(amps, k, move |a, b| {
        let (x, y) = (*a, *b);
        *a = m[0][0] * x + m[0][1] * y;
        *b = m[1][0] * x + m[1][1] * y;
    });
}

pub fn apply_diagonal(amps: &mut [C64], d0: C64, d1: C64, k: usize) {
    let one = C64::new(1.0, 0.0);
    if d0 == one {
        for_each_pair(amps, k, move |_, b| *b *= d1);
    } else {
        for_each_pair(amps, k, move |a, b| {
            *a *= d0;
            *b *= d1;
        });
    }
}

pub fn apply_cz(amps: &mut [C64], c: usize, t: usize) {
    let mask = (1usize << c) | (1usize << t);
    let flip = |(i, a): (usize, &mut C64)| {
        if i & mask == mask {
            *a = -*a;
        }
    };
    if amps.len() >= PAR_LEN {
        amps.par_iter_mut().enumerate().for_each(flip);
    } else {
        amps.iter_mut().enumerate().for_each(flip);
    }
}

fn pairwise_sum_f64<T: Sync>(xs: &[T], f: &(dyn Fn(&T) -> f64 + Sync)) -> f64 {
    if xs.len() <= 256 {
        return xs.iter().map(f).sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    if xs.len() >= PAR_LEN {
        let (x, y) = rayon::join(|| pairwise_sum_f64(a, f), || pairwise_sum_f64(b, f));
        x + y
    } else {
        pairwise_sum_f64(a, f) + pairwise_sum_f64(b, f)
    }
}

fn pairwise_dot(a: &[C64], b: &[C64]) -> C64 {
    if a.len() <= 256 {
        return a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    }
    let mid = a.len() / 2;
    let (a0, a1) = a.split_at(mid);
    let (b0, b1) = b.split_at(mid);
    if a.len() >= PAR_LEN {
        let (x, y) = rayon::join(|| pairwise_dot(a0, b0), || pairwise_dot(a1, b1));
        x + y
    } else {
        pairwise_dot(a0, b0) + pairwise_dot(a1, b1)
    }
}

/// Sum of conj(a_i) * b_i with pairwise accumulation.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    inner_product_slices(a.amps(), b.amps())
}

pub fn inner_product_slices(a: &[C64], b: &[C64]) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(pairwise_dot(a, b))
}

pub fn simulate_dense(c: &Circuit, initial: Option<StateVector>) -> Result<StateVector> {
    simulate_dense_capped(c, initial, DEFAULT_QUBIT_CAP)
}

pub fn simulate_dense_capped(c: &Circuit, initial: Option<StateVector>, cap: usize) -> Result<StateVector> {
    let n = c.n_qubits();
    if n > cap {
        return Err(Error::CapacityExceeded { what: "dense state", required: n, cap });
    }
    let mut s = match initial {
        Some(s) if s.n_qubits() != n => return Err(Error::LengthMismatch(s.len(), 1 << n)),
        Some(s) => s,
        None => StateVector::zero(n),
    };
    for layer in &c.layers {
        s.apply_gates(layer)?;
    }
    Ok(s)
}

pub fn write_state<W: Write>(mut w: W, s: &StateVector) -> Result<()> {
    w.write_all(&STATE_MAGIC)?;
    w.write_all(&[s.n_qubits as u8])?;
    let mut buf = Vec::with_capacity(16 * 4096);
    for chunk in s.amps.chunks(4096) {
        buf.clear();
        for a in chunk {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_state<R: Read>(mut r: R) -> Result<StateVector> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head).map_err(|_| Error::BadStateFile("truncated header".into()))?;
    if head[..8] != STATE_MAGIC {
        return Err(Error::BadStateFile("bad magic".into()));
    }
    let n = head[8] as usize;
    if n > 40 {
        return Err(Error::BadStateFile(format!("{n} qubits is implausible")));
    }
    let mut bytes = vec![0u8; 16 << n];
    r.read_exact(&mut bytes).map_err(|_| Error::BadStateFile("truncated amplitudes".into()))?;
    let amps = bytes
        .chunks_exact(16)
        .map(|b| {
            let re = f64::from_le_bytes(b[..8].try_into().unwrap());
            let im = f64::from_le_bytes(b[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Ok(StateVector { n_qubits: n, amps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_random_circuit, GridLayout, RuleSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C64> = (0..1 << n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amps(amps.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn hadamard_and_phase() {
        let mut s = StateVector::zero(1);
        s.apply_single_qubit(&Gate::single(GateKind::H, 0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amps()[0] - r).norm() < 1e-15 && (s.amps()[1] - r).norm() < 1e-15);
        let mut s = StateVector::basis(1, 1);
        s.apply_single_qubit(&Gate::single(GateKind::T, 0)).unwrap();
        assert!((s.amps()[1] - C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn x_half_twice_flips() {
        let mut s = StateVector::zero(1);
        let g = Gate::single(GateKind::XHalf, 0);
        s.apply_single_qubit(&g).unwrap();
        s.apply_single_qubit(&g).unwrap();
        assert!((s.amps()[1].norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cz_cases() {
        let mut s = StateVector::basis(2, 3);
        s.apply_gate(&Gate::cz(0, 1)).unwrap();
        assert_eq!(s.amps()[3], C64::new(-1.0, 0.0));
        let mut s = StateVector::basis(2, 1);
        s.apply_gate(&Gate::cz(1, 0)).unwrap();
        assert_eq!(s.amps()[1], C64::new(1.0, 0.0));
        let s0 = random_state(3, 1);
        let mut s = s0.clone();
        s.apply_gate(&Gate::cz(0, 2)).unwrap();
        s.apply_gate(&Gate::cz(0, 2)).unwrap();
        assert_eq!(s, s0);
        assert!(matches!(s.apply_gate(&Gate::cz(1, 1)), Err(Error::SameQubit(1))));
    }

    #[test]
    fn controlled_general_matches_projector_sum() {
        let s0 = random_state(4, 2);
        let u = single_qubit_matrix(GateKind::XHalf).unwrap();
        let mut a = s0.clone();
        a.apply_controlled(&u, 3, 1).unwrap();
        // P0 on c plus P1 on c followed by U on t
        let mut p0 = s0.clone();
        p0.apply_single_qubit(&Gate::single(GateKind::P0, 3)).unwrap();
        let mut p1 = s0;
        p1.apply_single_qubit(&Gate::single(GateKind::P1, 3)).unwrap();
        p1.apply_matrix(&u, 1).unwrap();
        for i in 0..16 {
            assert!((a.amps()[i] - p0.amps()[i] - p1.amps()[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn projectors_complete() {
        let s0 = random_state(5, 3);
        for k in 0..5 {
            let mut a = s0.clone();
            let mut b = s0.clone();
            a.apply_single_qubit(&Gate::single(GateKind::P0, k)).unwrap();
            b.apply_single_qubit(&Gate::single(GateKind::P1, k)).unwrap();
            for i in 0..32 {
                assert_eq!(a.amps()[i] + b.amps()[i], s0.amps()[i]);
            }
        }
    }

    #[test]
    fn rank_errors() {
        let mut s = StateVector::zero(2);
        assert!(s.apply_single_qubit(&Gate::single(GateKind::H, 2)).is_err());
        assert!(s.apply_single_qubit(&Gate::cz(0, 1)).is_err());
    }

    #[test]
    fn depth_zero_is_uniform() {
        let c = generate_random_circuit(GridLayout::new(1, 2), 1, 0, RuleSet::PaperSimple).unwrap().prefix(0);
        let s = simulate_dense(&c, None).unwrap();
        assert!(s.amps().iter().all(|a| (a - 0.5).norm() < 1e-15));
    }

    #[test]
    fn norm_kept_and_parallel_paths_agree() {
        let c = generate_random_circuit(GridLayout::new(2, 2), 8, 0, RuleSet::PaperSimple).unwrap();
        let s = simulate_dense(&c, None).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        // 16 qubits crosses the parallel threshold; compare against the serial kernels per gate
        let c = generate_random_circuit(GridLayout::new(4, 4), 6, 4, RuleSet::PaperSimple).unwrap();
        let s = simulate_dense(&c, None).unwrap();
        let mut r = StateVector::zero(16);
        for g in c.layers.iter().flatten() {
            let m = match g.kind {
                GateKind::Cz => None,
                k => Some(single_qubit_matrix(k).unwrap()),
            };
            let amps = r.amps_mut();
            match (m, g.control) {
                (Some(m), None) => {
                    let half = 1 << g.target;
                    for i in 0..amps.len() {
                        if i & half == 0 {
                            let (x, y) = (amps[i], amps[i | half]);
                            amps[i] = m[0][0] * x + m[0][1] * y;
                            amps[i | half] = m[1][0] * x + m[1][1] * y;
                        }
                    }
                }
                _ => {
                    let mask = (1 << g.control.unwrap()) | (1 << g.target);
                    for (i, a) in amps.iter_mut().enumerate() {
                        if i & mask == mask {
                            *a = -*a;
                        }
                    }
                }
            }
        }
        for (a, b) in s.amps().iter().zip(r.amps()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn inner_products() {
        let s = random_state(12, 5);
        assert!((inner_product(&s, &s).unwrap() - 1.0).norm() < 1e-12);
        assert_eq!(inner_product(&StateVector::basis(3, 1), &StateVector::basis(3, 2)).unwrap(), C64::new(0.0, 0.0));
        assert!(inner_product(&StateVector::zero(2), &StateVector::zero(3)).is_err());
    }

    #[test]
    fn capacity_guard() {
        let c = generate_random_circuit(GridLayout::new(2, 3), 2, 0, RuleSet::PaperSimple).unwrap();
        assert!(matches!(simulate_dense_capped(&c, None, 5), Err(Error::CapacityExceeded { .. })));
    }

    #[test]
    fn binary_round_trip() {
        let s = random_state(6, 7);
        let mut buf = Vec::new();
        write_state(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 9 + 16 * 64);
        assert_eq!(read_state(&buf[..]).unwrap(), s);
        buf[0] = b'X';
        assert!(read_state(&buf[..]).is_err());
    }
}
