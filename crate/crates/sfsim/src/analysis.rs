//! Porter-Thomas fit and cross-entropy fidelity.
//!
//! KS distance compares the empirical CDF of N*p with Exp(1). The fidelity estimate is
//! mean(ln(N*p(sample))) + gamma, which is 1 for an ideal sampler on a Porter-Thomas
//! state and 0 for a uniform one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::StateVector;
use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const MIN_PT_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PorterThomasReport {
    pub n_qubits: usize,
    pub ks_distance: f64,
    /// Bins over ln(N*p); mass includes `zero_fraction` only through its absence.
    pub histogram: Vec<HistogramBin>,
    pub zero_fraction: f64,
    /// Set when N*p takes a single value or has a single nonzero entry.
    pub degenerate: bool,
}

pub fn porter_thomas_check(s: &StateVector) -> Result<PorterThomasReport> {
    porter_thomas_check_with(s, DEFAULT_BIN_WIDTH)
}

pub fn porter_thomas_check_with(s: &StateVector, bin_width: f64) -> Result<PorterThomasReport> {
    let n = s.n_qubits();
    if n < MIN_PT_QUBITS {
        return Err(Error::TooFewQubits { min: MIN_PT_QUBITS, got: n });
    }
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let total = s.norm_sqr();
    if total == 0.0 {
        return Err(Error::ZeroState);
    }
    let len = s.len() as f64;
    let mut x: Vec<f64> = s.probabilities().into_iter().map(|p| p / total * len).collect();
    x.sort_unstable_by(f64::total_cmp);

    let mut ks: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = 1.0 - (-v).exp();
        ks = ks.max(f - i as f64 / len).max((i + 1) as f64 / len - f);
    }

    let zeros = x.iter().take_while(|&&v| v == 0.0).count();
    let logs: Vec<f64> = x[zeros..].iter().map(|v| v.ln()).collect();
    let mut histogram = Vec::new();
    if let (Some(&lo), Some(&hi)) = (logs.first(), logs.last()) {
        let first = (lo / bin_width).floor() as i64;
        let last = (hi / bin_width).floor() as i64;
        let mut counts = vec![0usize; (last - first + 1) as usize];
        for v in &logs {
            let k = ((v / bin_width).floor() as i64 - first).clamp(0, last - first) as usize;
            counts[k] += 1;
        }
        histogram = counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let lo = (first + k as i64) as f64 * bin_width;
                HistogramBin { lo, hi: lo + bin_width, mass: c as f64 / len }
            })
            .collect();
    }
    let degenerate = logs.len() <= 1 || x[x.len() - 1] - x[zeros] < 1e-9;
    Ok(PorterThomasReport {
        n_qubits: n,
        ks_distance: ks.clamp(0.0, 1.0),
        histogram,
        zero_fraction: zeros as f64 / len,
        degenerate,
    })
}

/// Returns -inf if any sample has zero ideal probability.
pub fn cross_entropy_fidelity(ideal: &StateVector, samples: &[u64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let total = ideal.norm_sqr();
    if total == 0.0 {
        return Err(Error::ZeroState);
    }
    let len = ideal.len() as f64;
    let mut acc = 0.0;
    for &x in samples {
        let a = *ideal
            .amps()
            .get(x as usize)
            .ok_or(Error::IndexOutOfRange { index: x, n: ideal.n_qubits() })?;
        let p = a.norm_sqr() / total;
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += (len * p).ln();
    }
    Ok(acc / samples.len() as f64 + EULER_GAMMA)
}

/// Inverse-CDF sampling from |amplitude|^2.
pub fn sample_ideal<R: Rng + ?Sized>(s: &StateVector, count: usize, rng: &mut R) -> Result<Vec<u64>> {
    let mut cdf = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    for p in s.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    if acc == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok((0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(s.len() - 1) as u64
        })
        .collect())
}

pub fn sample_uniform<R: Rng + ?Sized>(n_qubits: usize, count: usize, rng: &mut R) -> Vec<u64> {
    (0..count).map(|_| rng.gen_range(0..1u64 << n_qubits)).collect()
}
