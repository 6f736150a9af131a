//! Grid circuits: layout, gate set, random generator and the text format.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// 2x2 matrix in row-major order.
pub type Mat2 = [[C64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
}

impl GridLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridLayout { rows, cols }
    }

    pub fn n_qubits(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rank(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn coords(&self, q: usize) -> (usize, usize) {
        (q / self.cols, q % self.cols)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb) == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    H,
    XHalf,
    YHalf,
    T,
    Z,
    Cz,
    P0,
    P1,
}

impl GateKind {
    pub fn is_diagonal(self) -> bool {
        matches!(self, GateKind::T | GateKind::Z | GateKind::Cz | GateKind::P0 | GateKind::P1)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::XHalf => "xh",
            GateKind::YHalf => "yh",
            GateKind::T => "t",
            GateKind::Z => "z",
            GateKind::Cz => "cz",
            GateKind::P0 => "p0",
            GateKind::P1 => "p1",
        }
    }
}

/// A gate on one qubit, or a CZ with `control` set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
}

impl Gate {
    pub fn single(kind: GateKind, q: usize) -> Self {
        Gate { kind, target: q, control: None }
    }

    pub fn cz(c: usize, t: usize) -> Self {
        Gate { kind: GateKind::Cz, target: t, control: Some(c) }
    }

    pub fn is_diagonal(&self) -> bool {
        self.kind.is_diagonal()
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.target).chain(self.control)
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.target == q || self.control == Some(q)
    }

    /// The same gate with qubit ranks passed through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        Gate { kind: self.kind, target: f(self.target), control: self.control.map(f) }
    }
}

pub enum GateMatrix {
    One(Mat2),
    Two([[C64; 4]; 4]),
}

pub fn single_qubit_matrix(kind: GateKind) -> Result<Mat2> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let h = C64::new(0.5, 0.5);
    let hc = C64::new(0.5, -0.5);
    let s = FRAC_1_SQRT_2;
    Ok(match kind {
        GateKind::H => [[C64::new(s, 0.0), C64::new(s, 0.0)], [C64::new(s, 0.0), C64::new(-s, 0.0)]],
        GateKind::XHalf => [[h, hc], [hc, h]],
        GateKind::YHalf => [[h, -h], [h, h]],
        GateKind::T => [[one, z], [z, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
        GateKind::Z => [[one, z], [z, -one]],
        GateKind::P0 => [[one, z], [z, z]],
        GateKind::P1 => [[z, z], [z, one]],
        GateKind::Cz => return Err(Error::NotSingleQubit(kind)),
    })
}

pub fn gate_unitary(g: &Gate) -> GateMatrix {
    match g.kind {
        GateKind::Cz => {
            let mut m = [[C64::new(0.0, 0.0); 4]; 4];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = C64::new(if i == 3 { -1.0 } else { 1.0 }, 0.0);
            }
            GateMatrix::Two(m)
        }
        k => GateMatrix::One(single_qubit_matrix(k).expect("single-qubit kind")),
    }
}

pub fn is_diagonal(g: &Gate) -> bool {
    g.is_diagonal()
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub type Layer = Vec<Gate>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub layout: GridLayout,
    pub layers: Vec<Layer>,
}

impl Circuit {
    /// Builds a circuit and checks layer 0, ranges and overlaps.
    pub fn new(layout: GridLayout, layers: Vec<Layer>) -> Result<Self> {
        let c = Circuit { layout, layers };
        c.validate(false)?;
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, strict: bool) -> Result<()> {
        let n = self.n_qubits();
        let first = self.layers.first().ok_or(Error::Parse { line: 0, msg: "missing layer 0".into() })?;
        let mut seen = vec![false; n];
        for g in first {
            if g.kind != GateKind::H {
                return Err(Error::Parse { line: 0, msg: format!("layer 0 must be all H, found {:?}", g.kind) });
            }
        }
        for (t, layer) in self.layers.iter().enumerate() {
            seen.iter_mut().for_each(|s| *s = false);
            for g in layer {
                if let Some(c) = g.control {
                    if c == g.target {
                        return Err(Error::SameQubit(c));
                    }
                    if strict && !self.layout.adjacent(c, g.target) {
                        return Err(Error::Parse {
                            line: 0,
                            msg: format!("cz {} {} joins non-adjacent qubits", c, g.target),
                        });
                    }
                }
                for q in g.qubits() {
                    if q >= n {
                        return Err(Error::QubitOutOfRange { qubit: q, n });
                    }
                    if seen[q] {
                        return Err(Error::OverlappingGates { layer: t, qubit: q });
                    }
                    seen[q] = true;
                }
            }
            if t == 0 && seen.iter().any(|s| !s) {
                return Err(Error::Parse { line: 0, msg: "layer 0 must hold one H per qubit".into() });
            }
        }
        Ok(())
    }

    /// Layers 0..=depth of this circuit.
    pub fn prefix(&self, depth: usize) -> Circuit {
        Circuit { layout: self.layout, layers: self.layers[..=depth.min(self.depth())].to_vec() }
    }

    /// Gate acting on `q` in layer `t`, if any.
    pub fn gate_on(&self, t: usize, q: usize) -> Option<&Gate> {
        self.layers[t].iter().find(|g| g.acts_on(q))
    }
}

/// Order in which the eight CZ patterns are visited; layer t uses entry (t-1) mod 8.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CzSchedule {
    /// Two horizontal patterns, the two sparse vertical ones, then the rest.
    #[default]
    Staggered,
    /// Patterns 0..7 in numeric order.
    Sequential,
}

const STAGGERED_ORDER: [usize; 8] = [0, 1, 7, 6, 2, 3, 4, 5];
const PATTERN_OFFSET: [usize; 4] = [0, 2, 1, 3];

impl CzSchedule {
    pub fn pattern_for_layer(self, t: usize) -> usize {
        let slot = (t - 1) % 8;
        match self {
            CzSchedule::Staggered => STAGGERED_ORDER[slot],
            CzSchedule::Sequential => slot,
        }
    }
}

/// Bonds of CZ pattern `p` (0..3 horizontal, 4..7 vertical), as (lower rank, higher rank).
pub fn pattern_bonds(layout: GridLayout, p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if p < 4 {
        for r in 0..layout.rows {
            for c in 0..layout.cols.saturating_sub(1) {
                if (c + 2 * (r % 2)) % 4 == PATTERN_OFFSET[p] {
                    out.push((layout.rank(r, c), layout.rank(r, c + 1)));
                }
            }
        }
    } else {
        for c in 0..layout.cols {
            for r in 0..layout.rows.saturating_sub(1) {
                if (r + 2 * (c % 2)) % 4 == PATTERN_OFFSET[p - 4] {
                    out.push((layout.rank(r, c), layout.rank(r + 1, c)));
                }
            }
        }
        out.sort_unstable();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RuleSet {
    #[default]
    PaperSimple,
    GoogleV1,
}

impl std::str::FromStr for RuleSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "paper_simple" | "paper" | "simple" => Ok(RuleSet::PaperSimple),
            "google_v1" | "google" => Ok(RuleSet::GoogleV1),
            other => Err(Error::Config(format!("unknown rule set '{other}'"))),
        }
    }
}

const RANDOM_KINDS: [GateKind; 3] = [GateKind::XHalf, GateKind::YHalf, GateKind::T];

pub fn generate_random_circuit(layout: GridLayout, depth: usize, seed: u64, rules: RuleSet) -> Result<Circuit> {
    generate_with_schedule(layout, depth, seed, rules, CzSchedule::default())
}

pub fn generate_with_schedule(
    layout: GridLayout,
    depth: usize,
    seed: u64,
    rules: RuleSet,
    schedule: CzSchedule,
) -> Result<Circuit> {
    if depth < 1 {
        return Err(Error::InvalidDepth(depth));
    }
    if layout.rows * layout.cols < 2 {
        return Err(Error::LayoutTooSmall { rows: layout.rows, cols: layout.cols });
    }
    let n = layout.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push((0..n).map(|q| Gate::single(GateKind::H, q)).collect::<Layer>());

    let mut last_kind: Vec<Option<GateKind>> = vec![None; n];
    let mut in_cz = vec![false; n];
    for t in 1..=depth {
        let bonds = pattern_bonds(layout, schedule.pattern_for_layer(t));
        let mut busy = vec![false; n];
        let mut layer: Layer = Vec::with_capacity(n);
        for &(a, b) in &bonds {
            layer.push(Gate::cz(a, b));
            busy[a] = true;
            busy[b] = true;
        }
        for q in 0..n {
            if busy[q] {
                continue;
            }
            let kind = match rules {
                RuleSet::PaperSimple => RANDOM_KINDS[rng.gen_range(0..3)],
                RuleSet::GoogleV1 => {
                    if in_cz[q] {
                        continue;
                    }
                    match last_kind[q] {
                        None => GateKind::T,
                        Some(prev) => {
                            let choices: Vec<GateKind> = RANDOM_KINDS.iter().copied().filter(|&k| k != prev).collect();
                            choices[rng.gen_range(0..choices.len())]
                        }
                    }
                }
            };
            last_kind[q] = Some(kind);
            layer.push(Gate::single(kind, q));
        }
        in_cz = busy;
        layers.push(layer);
    }
    Ok(Circuit { layout, layers })
}

pub fn emit_circuit(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "grid {} {}", c.layout.rows, c.layout.cols);
    for (t, layer) in c.layers.iter().enumerate() {
        let _ = writeln!(s, "layer {t}");
        for g in layer {
            match g.control {
                Some(ctl) => {
                    let _ = writeln!(s, "cz {} {}", ctl, g.target);
                }
                None => {
                    let _ = writeln!(s, "{} {}", g.kind.mnemonic(), g.target);
                }
            }
        }
    }
    s
}

/// Parses the line-oriented circuit format. `strict` also rejects CZ between non-adjacent qubits.
pub fn parse_circuit(text: &str, strict: bool) -> Result<Circuit> {
    let mut layout: Option<GridLayout> = None;
    let mut layers: Vec<Layer> = Vec::new();
    let mut used: Vec<bool> = Vec::new();
    let perr = |line: usize, msg: String| Error::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<usize> {
            toks.get(i)
                .ok_or_else(|| perr(lineno, format!("'{}' expects more arguments", toks[0])))?
                .parse::<usize>()
                .map_err(|_| perr(lineno, format!("bad number '{}'", toks[i])))
        };
        match toks[0] {
            "grid" => {
                if layout.is_some() {
                    return Err(perr(lineno, "duplicate grid header".into()));
                }
                let (r, c) = (num(1)?, num(2)?);
                if r == 0 || c == 0 {
                    return Err(perr(lineno, "grid dimensions must be positive".into()));
                }
                layout = Some(GridLayout::new(r, c));
                used = vec![false; r * c];
            }
            "layer" => {
                if layout.is_none() {
                    return Err(perr(lineno, "layer before grid header".into()));
                }
                let k = num(1)?;
                if k != layers.len() {
                    return Err(perr(lineno, format!("expected layer {}, found layer {k}", layers.len())));
                }
                layers.push(Vec::new());
                used.iter_mut().for_each(|u| *u = false);
            }
            op => {
                let lay = layout.ok_or_else(|| perr(lineno, "gate before grid header".into()))?;
                let layer = layers.last_mut().ok_or_else(|| perr(lineno, "missing layer 0".into()))?;
                let n = lay.n_qubits();
                let gate = match op {
                    "cz" => {
                        let (c, t) = (num(1)?, num(2)?);
                        if c == t {
                            return Err(perr(lineno, format!("cz on a single qubit {c}")));
                        }
                        if strict && c < n && t < n && !lay.adjacent(c, t) {
                            return Err(perr(lineno, format!("cz {c} {t} joins non-adjacent qubits")));
                        }
                        Gate::cz(c, t)
                    }
                    "h" | "t" | "xh" | "yh" | "z" => {
                        let kind = match op {
                            "h" => GateKind::H,
                            "t" => GateKind::T,
                            "xh" => GateKind::XHalf,
                            "yh" => GateKind::YHalf,
                            _ => GateKind::Z,
                        };
                        Gate::single(kind, num(1)?)
                    }
                    "p0" | "p1" => return Err(perr(lineno, "projector gates are not allowed in circuit files".into())),
                    other => return Err(perr(lineno, format!("unknown gate '{other}'"))),
                };
                for q in gate.qubits() {
                    if q >= n {
                        return Err(perr(lineno, format!("qubit {q} out of range for {n} qubits")));
                    }
                    if used[q] {
                        return Err(perr(lineno, format!("qubit {q} used twice in layer {}", layers.len() - 1)));
                    }
                    used[q] = true;
                }
                layer.push(gate);
            }
        }
    }
    let layout = layout.ok_or_else(|| perr(0, "missing grid header".into()))?;
    if layers.is_empty() {
        return Err(perr(0, "missing layer 0".into()));
    }
    let c = Circuit { layout, layers };
    c.validate(strict)?;
    Ok(c)
}
