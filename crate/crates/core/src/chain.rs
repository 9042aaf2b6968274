//! Chain model: block sequences with parametric tails, validation, and
//! block-level queries (mass, moments, generating-function pieces).
//!
//! A chain describes an infinite transition matrix laid out as
//!
//! ```text
//!   B0    B1    B2    B3   ...
//!   B-1   A0    A1    A2   ...
//!   B-2   A-1   A0    A1   ...
//!   B-3   A-2   A-1   A0   ...
//! ```
//!
//! Interior rows repeat; the first row and first column are boundary
//! families. `A` blocks are `m x m`, the boundary level carries `m0` phases
//! (`m0 != m` is allowed).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Explicit partial sum cutoff for power-law tails; beyond it an integral
/// remainder bound is used and reported as uncertainty.
pub const POWER_TAIL_CUTOFF: u64 = 1_000_000;

/// A matrix-valued quantity together with a rigorous bound on the absolute
/// error of each entry (nonzero only when a power-law tail was summed).
#[derive(Debug, Clone)]
pub struct Approx {
    pub value: DMatrix<f64>,
    pub err: f64,
}

impl Approx {
    pub fn exact(value: DMatrix<f64>) -> Self {
        Approx { value, err: 0.0 }
    }
}

/// Entrywise block moment: either a finite matrix (with tail-sum error bound)
/// or infinity, witnessed by the first diverging entry.
#[derive(Debug, Clone)]
pub enum BlockMoment {
    Finite(Approx),
    Infinite { row: usize, col: usize },
}

impl BlockMoment {
    pub fn is_finite(&self) -> bool {
        matches!(self, BlockMoment::Finite(_))
    }

    pub fn finite(&self) -> Option<&Approx> {
        match self {
            BlockMoment::Finite(a) => Some(a),
            BlockMoment::Infinite { .. } => None,
        }
    }
}

/// Parametric law for blocks beyond the explicitly listed lags.
///
/// `Constant` is admissible only for the `B_minus` family: those blocks enter
/// one row each, so their sum across lags is never formed, and a chain with a
/// substochastic phase process needs `B_{-k}` mass that does not vanish.
#[derive(Debug, Clone)]
pub enum TailLaw {
    /// Zero beyond the explicit blocks.
    Finite,
    /// `C * ratio^k` at lag `k > start`, `ratio` strictly inside (0, 1).
    Geometric {
        start: usize,
        ratio: f64,
        coeff: DMatrix<f64>,
    },
    /// `C * k^(-alpha)` at lag `k > start`, `alpha > 1`.
    PowerLaw {
        start: usize,
        alpha: f64,
        coeff: DMatrix<f64>,
    },
    /// `C` at every lag `k > start`.
    Constant { start: usize, value: DMatrix<f64> },
}

impl TailLaw {
    pub fn start(&self) -> usize {
        match self {
            TailLaw::Finite => 0,
            TailLaw::Geometric { start, .. }
            | TailLaw::PowerLaw { start, .. }
            | TailLaw::Constant { start, .. } => *start,
        }
    }
}

/// One-sided sequence of nonnegative blocks `block_1, block_2, ...` with a
/// parametric tail making masses, moments and generating functions
/// computable in closed form.
#[derive(Debug, Clone)]
pub struct BlockSequence {
    /// Blocks at lags `1..=explicit.len()`.
    pub explicit: Vec<DMatrix<f64>>,
    pub tail: TailLaw,
    pub rows: usize,
    pub cols: usize,
}

// -- scalar tail summation helpers -------------------------------------------

/// Sum of `w^k` for `k >= from` (w in [0,1)).
fn geometric_tail(w: f64, from: u64) -> f64 {
    w.powi(from as i32) / (1.0 - w)
}

/// Sum of `k^l * w^k` for `k >= from`, `w` in [0,1). Terms decay
/// geometrically, so direct summation terminates at machine precision.
fn weighted_geometric_tail(w: f64, l: u32, from: u64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0f64;
    let mut k = from;
    let mut wk = w.powi(from as i32);
    loop {
        let term = (k as f64).powi(l as i32) * wk;
        acc += term;
        if term <= acc * 1e-17 && k > from + 4 {
            break;
        }
        k += 1;
        wk *= w;
        if wk == 0.0 {
            break;
        }
    }
    acc
}

/// Sum of `k^(l - alpha) * z^k` for `k >= from`, returned as value plus an
/// absolute error bound.
///
/// For `z < 1` the series is summed directly (geometrically convergent).
/// For `z = 1` and `l - alpha < -1` the partial sum runs to
/// [`POWER_TAIL_CUTOFF`] and the remainder is bracketed by integrals. Returns
/// `None` when the series diverges.
fn power_tail(alpha: f64, l: u32, z: f64, from: u64) -> Option<(f64, f64)> {
    let p = l as f64 - alpha;
    if z > 1.0 {
        return None;
    }
    if z < 1.0 {
        let mut acc = 0.0f64;
        let mut k = from.max(1);
        let mut zk = z.powi(k as i32);
        loop {
            let term = (k as f64).powf(p) * zk;
            acc += term;
            // k^p eventually decreases relative to the geometric factor;
            // stop once the geometric bound on the remainder is negligible.
            if k > from + 8 && term / (1.0 - z) <= acc.max(1e-300) * 1e-17 {
                break;
            }
            k += 1;
            zk *= z;
            if zk == 0.0 {
                break;
            }
        }
        return Some((acc, 0.0));
    }
    // z == 1: pure p-series tail.
    if p >= -1.0 {
        return None;
    }
    let from = from.max(1);
    let mut acc = 0.0f64;
    let mut k = from;
    while k <= POWER_TAIL_CUTOFF {
        acc += (k as f64).powf(p);
        k += 1;
    }
    // Integral bracket for the remainder beyond the cutoff:
    //   int_{M+1}^inf x^p dx  <=  sum_{k>M} k^p  <=  int_{M}^inf x^p dx.
    let m = POWER_TAIL_CUTOFF as f64;
    let lower = (m + 1.0).powf(p + 1.0) / (-(p + 1.0));
    let upper = m.powf(p + 1.0) / (-(p + 1.0));
    let mid = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    Some((acc + mid, half + 1e-16 * acc))
}

impl BlockSequence {
    pub fn finite(blocks: Vec<DMatrix<f64>>, rows: usize, cols: usize) -> Self {
        BlockSequence {
            explicit: blocks,
            tail: TailLaw::Finite,
            rows,
            cols,
        }
    }

    /// Lag of the last explicit block.
    pub fn explicit_end(&self) -> usize {
        self.explicit.len()
    }

    /// Last lag at which structure changes: beyond this the tail law alone
    /// decides the block.
    pub fn tail_start(&self) -> usize {
        self.explicit.len().max(self.tail.start())
    }

    /// Block at lag `k >= 1`, materializing the tail law on demand.
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        assert!(k >= 1, "block lags start at 1");
        if k <= self.explicit.len() {
            return self.explicit[k - 1].clone();
        }
        match &self.tail {
            TailLaw::Finite => DMatrix::zeros(self.rows, self.cols),
            TailLaw::Geometric { start, ratio, coeff } => {
                if k > *start {
                    coeff * ratio.powi(k as i32)
                } else {
                    DMatrix::zeros(self.rows, self.cols)
                }
            }
            TailLaw::PowerLaw { start, alpha, coeff } => {
                if k > *start {
                    coeff * (k as f64).powf(-alpha)
                } else {
                    DMatrix::zeros(self.rows, self.cols)
                }
            }
            TailLaw::Constant { start, value } => {
                if k > *start {
                    value.clone()
                } else {
                    DMatrix::zeros(self.rows, self.cols)
                }
            }
        }
    }

    /// Entrywise `sum_{k >= k0} block_k`. Errors out for constant tails,
    /// whose total mass is infinite.
    pub fn mass_from(&self, k0: usize) -> Result<Approx> {
        let k0 = k0.max(1);
        let mut value = DMatrix::zeros(self.rows, self.cols);
        for k in k0..=self.explicit.len() {
            value += &self.explicit[k - 1];
        }
        let mut err = 0.0f64;
        match &self.tail {
            TailLaw::Finite => {}
            TailLaw::Geometric { start, ratio, coeff } => {
                let from = (*start + 1).max(k0) as u64;
                value += coeff * geometric_tail(*ratio, from);
            }
            TailLaw::PowerLaw { start, alpha, coeff } => {
                let from = (*start + 1).max(k0) as u64;
                let (s, e) = power_tail(*alpha, 0, 1.0, from)
                    .expect("alpha > 1 guarantees a finite mass");
                value += coeff * s;
                err = e * coeff.amax();
            }
            TailLaw::Constant { .. } => {
                return Err(Error::InvalidTailLaw(
                    "constant tail has infinite total mass".into(),
                ))
            }
        }
        Ok(Approx { value, err })
    }

    /// Entrywise total mass `sum_{k >= 1} block_k`.
    pub fn total_mass(&self) -> Result<Approx> {
        self.mass_from(1)
    }

    /// Entrywise `sum_{k >= 1} k^l block_k`, or `Infinite` with a witnessing
    /// entry when the tail does not support the moment.
    pub fn moment(&self, l: u32) -> BlockMoment {
        let mut value = DMatrix::zeros(self.rows, self.cols);
        for (i, b) in self.explicit.iter().enumerate() {
            let k = (i + 1) as f64;
            value += b * k.powi(l as i32);
        }
        let mut err = 0.0f64;
        match &self.tail {
            TailLaw::Finite => {}
            TailLaw::Geometric { start, ratio, coeff } => {
                let from = (*start + 1) as u64;
                value += coeff * weighted_geometric_tail(*ratio, l, from);
            }
            TailLaw::PowerLaw { start, alpha, coeff } => {
                let from = (*start + 1) as u64;
                match power_tail(*alpha, l, 1.0, from) {
                    Some((s, e)) => {
                        value += coeff * s;
                        err = e * coeff.amax();
                    }
                    None => {
                        if let Some((r, c)) = first_positive(coeff) {
                            return BlockMoment::Infinite { row: r, col: c };
                        }
                        // all-zero coefficient: the tail contributes nothing
                    }
                }
            }
            TailLaw::Constant { start: _, value: v } => {
                if let Some((r, c)) = first_positive(v) {
                    return BlockMoment::Infinite { row: r, col: c };
                }
            }
        }
        BlockMoment::Finite(Approx { value, err })
    }

    /// Entrywise `sum_{k >= 1} z^k block_k` for `z > 0`.
    ///
    /// Returns `OutOfDomain` at or beyond the convergence radius.
    pub fn genfun(&self, z: f64) -> Result<Approx> {
        self.genfun_from(z, 1)
    }

    /// Entrywise `sum_{k >= k0} z^k block_k` for `z > 0`.
    pub fn genfun_from(&self, z: f64, k0: usize) -> Result<Approx> {
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::OutOfDomain {
                z,
                domain: "z must be positive and finite".into(),
            });
        }
        let k0 = k0.max(1);
        let mut value = DMatrix::zeros(self.rows, self.cols);
        for k in k0..=self.explicit.len() {
            value += &self.explicit[k - 1] * z.powi(k as i32);
        }
        let mut err = 0.0f64;
        match &self.tail {
            TailLaw::Finite => {}
            TailLaw::Geometric { start, ratio, coeff } => {
                let w = ratio * z;
                if first_positive(coeff).is_some() {
                    if w >= 1.0 {
                        return Err(Error::OutOfDomain {
                            z,
                            domain: format!("geometric tail radius 1/ratio = {}", 1.0 / ratio),
                        });
                    }
                    value += coeff * geometric_tail(w, (*start + 1).max(k0) as u64);
                }
            }
            TailLaw::PowerLaw { start, alpha, coeff } => {
                if first_positive(coeff).is_some() {
                    match power_tail(*alpha, 0, z, (*start + 1).max(k0) as u64) {
                        Some((s, e)) => {
                            value += coeff * s;
                            err = e * coeff.amax();
                        }
                        None => {
                            return Err(Error::OutOfDomain {
                                z,
                                domain: "power-law tail radius 1".into(),
                            })
                        }
                    }
                }
            }
            TailLaw::Constant { start, value: v } => {
                if first_positive(v).is_some() {
                    if z >= 1.0 {
                        return Err(Error::OutOfDomain {
                            z,
                            domain: "constant tail radius 1".into(),
                        });
                    }
                    value += v * geometric_tail(z, (*start + 1).max(k0) as u64);
                }
            }
        }
        Ok(Approx { value, err })
    }

    /// Convergence radius of the entrywise generating functions, minimized
    /// over entries with a nonzero tail coefficient (all-zero entries are
    /// polynomials and contribute infinity).
    pub fn radius(&self) -> f64 {
        match &self.tail {
            TailLaw::Finite => f64::INFINITY,
            TailLaw::Geometric { ratio, coeff, .. } => {
                if first_positive(coeff).is_some() {
                    1.0 / ratio
                } else {
                    f64::INFINITY
                }
            }
            TailLaw::PowerLaw { coeff, .. } => {
                if first_positive(coeff).is_some() {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            TailLaw::Constant { value, .. } => {
                if first_positive(value).is_some() {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

fn first_positive(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] > 0.0 {
                return Some((r, c));
            }
        }
    }
    None
}

// -- JSON-facing raw description ---------------------------------------------

/// Raw tail description as found in chain spec files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailSpec {
    Finite,
    Geometric {
        #[serde(rename = "K")]
        start: usize,
        ratio: f64,
        #[serde(rename = "C")]
        coeff: Vec<Vec<f64>>,
    },
    PowerLaw {
        #[serde(rename = "K")]
        start: usize,
        alpha: f64,
        #[serde(rename = "C")]
        coeff: Vec<Vec<f64>>,
    },
    Constant {
        #[serde(rename = "K")]
        start: usize,
        #[serde(rename = "C")]
        value: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub tail: TailSpec,
}

/// Raw chain description: the JSON schema of chain spec files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub m: usize,
    pub m0: usize,
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(rename = "B0")]
    pub b0: Vec<Vec<f64>>,
    #[serde(rename = "A_plus")]
    pub a_plus: SequenceSpec,
    #[serde(rename = "A_minus")]
    pub a_minus: SequenceSpec,
    #[serde(rename = "B_plus")]
    pub b_plus: SequenceSpec,
    #[serde(rename = "B_minus")]
    pub b_minus: SequenceSpec,
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain spec serializes")
    }
}

// -- validated chain ----------------------------------------------------------

/// A validated GI/G/1-type chain. Immutable after construction; all analyses
/// are pure functions over it.
#[derive(Debug, Clone)]
pub struct Gi1Chain {
    pub m: usize,
    pub m0: usize,
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub a_plus: BlockSequence,
    pub a_minus: BlockSequence,
    pub b_plus: BlockSequence,
    pub b_minus: BlockSequence,
    /// Row-sum tolerance this chain was validated against.
    pub eps_row: f64,
}

/// Phase process summary: `A = sum_k A_k`, its invariant vector and the mean
/// level increment.
#[derive(Debug, Clone)]
pub struct PhaseSummary {
    pub a: DMatrix<f64>,
    pub a_err: f64,
    pub is_stochastic: bool,
    /// Invariant probability vector of `A`; only defined when stochastic.
    pub mu: Option<DVector<f64>>,
    /// `mu (sum_k k A_k) e`; only defined when stochastic with finite first
    /// block moment.
    pub drift: Option<f64>,
}

fn to_dmatrix(raw: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let rows = raw.len();
    if rows == 0 {
        return Err(Error::DimensionMismatch(format!("{what}: empty matrix")));
    }
    let cols = raw[0].len();
    if cols == 0 || raw.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what}: ragged or empty rows"
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, row) in raw.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn check_entries(m: &DMatrix<f64>, what: &str, violations: &mut Vec<Error>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if !v.is_finite() {
                violations.push(Error::NonFiniteEntry {
                    location: format!("{what}[{r},{c}]"),
                });
            } else if v < 0.0 {
                violations.push(Error::NegativeEntry {
                    location: format!("{what}[{r},{c}]"),
                    value: v,
                });
            }
        }
    }
}

fn build_sequence(
    spec: &SequenceSpec,
    rows: usize,
    cols: usize,
    what: &str,
    allow_constant: bool,
    violations: &mut Vec<Error>,
) -> Result<BlockSequence> {
    let mut explicit = Vec::with_capacity(spec.blocks.len());
    for (i, raw) in spec.blocks.iter().enumerate() {
        let m = to_dmatrix(raw, &format!("{what} block {}", i + 1))?;
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{what} block {}: expected {rows}x{cols}, got {}x{}",
                i + 1,
                m.nrows(),
                m.ncols()
            )));
        }
        check_entries(&m, &format!("{what} block {}", i + 1), violations);
        explicit.push(m);
    }
    let tail = match &spec.tail {
        TailSpec::Finite => TailLaw::Finite,
        TailSpec::Geometric { start, ratio, coeff } => {
            if !(*ratio > 0.0 && *ratio < 1.0) {
                violations.push(Error::InvalidTailLaw(format!(
                    "{what}: geometric ratio {ratio} not in (0,1)"
                )));
            }
            if *start != explicit.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{what}: tail start K={start} must equal the number of explicit blocks ({})",
                    explicit.len()
                )));
            }
            let c = to_dmatrix(coeff, &format!("{what} tail coefficient"))?;
            if c.nrows() != rows || c.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{what} tail coefficient: expected {rows}x{cols}"
                )));
            }
            check_entries(&c, &format!("{what} tail coefficient"), violations);
            TailLaw::Geometric {
                start: *start,
                ratio: *ratio,
                coeff: c,
            }
        }
        TailSpec::PowerLaw { start, alpha, coeff } => {
            if !alpha.is_finite() || *alpha <= 1.0 {
                violations.push(Error::InvalidTailLaw(format!(
                    "{what}: power-law exponent {alpha} must exceed 1 for a finite mass"
                )));
            }
            if *start != explicit.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{what}: tail start K={start} must equal the number of explicit blocks ({})",
                    explicit.len()
                )));
            }
            let c = to_dmatrix(coeff, &format!("{what} tail coefficient"))?;
            if c.nrows() != rows || c.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{what} tail coefficient: expected {rows}x{cols}"
                )));
            }
            check_entries(&c, &format!("{what} tail coefficient"), violations);
            TailLaw::PowerLaw {
                start: *start,
                alpha: *alpha,
                coeff: c,
            }
        }
        TailSpec::Constant { start, value } => {
            if !allow_constant {
                violations.push(Error::InvalidTailLaw(format!(
                    "{what}: constant tails are only admissible for B_minus"
                )));
            }
            if *start != explicit.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{what}: tail start K={start} must equal the number of explicit blocks ({})",
                    explicit.len()
                )));
            }
            let c = to_dmatrix(value, &format!("{what} tail value"))?;
            if c.nrows() != rows || c.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{what} tail value: expected {rows}x{cols}"
                )));
            }
            check_entries(&c, &format!("{what} tail value"), violations);
            TailLaw::Constant {
                start: *start,
                value: c,
            }
        }
    };
    Ok(BlockSequence {
        explicit,
        tail,
        rows,
        cols,
    })
}

fn has_power_tail(seq: &BlockSequence) -> bool {
    matches!(seq.tail, TailLaw::PowerLaw { .. })
}

/// Default row-sum tolerance: tighter when every tail is exactly summable,
/// looser when power-law remainders are only bracketed.
pub fn default_eps_row(power_law_present: bool) -> f64 {
    if power_law_present {
        1e-8
    } else {
        1e-10
    }
}

impl Gi1Chain {
    /// Validate a raw description, returning the chain or the full list of
    /// violations (row-sum defects per level class, negative entries,
    /// reducible phase pattern). Chains failing validation are unusable by
    /// every downstream module.
    pub fn validate(spec: &ChainSpec, eps_row: Option<f64>) -> std::result::Result<Self, Vec<Error>> {
        let mut violations = Vec::new();
        let chain = match Self::assemble(spec, eps_row, &mut violations) {
            Ok(c) => c,
            Err(e) => {
                violations.push(e);
                return Err(violations);
            }
        };
        chain.check_row_sums(&mut violations);
        if !strongly_connected(&chain.phase_pattern()) {
            violations.push(Error::ReduciblePhaseProcess);
        }
        if violations.is_empty() {
            Ok(chain)
        } else {
            Err(violations)
        }
    }

    /// Convenience wrapper returning only the first violation.
    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        Self::validate(spec, None).map_err(|mut v| v.remove(0))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&ChainSpec::from_json(text)?)
    }

    fn assemble(
        spec: &ChainSpec,
        eps_row: Option<f64>,
        violations: &mut Vec<Error>,
    ) -> Result<Self> {
        let (m, m0) = (spec.m, spec.m0);
        if m == 0 || m0 == 0 {
            return Err(Error::DimensionMismatch("phase counts must be positive".into()));
        }
        let a0 = to_dmatrix(&spec.a0, "A0")?;
        let b0 = to_dmatrix(&spec.b0, "B0")?;
        if a0.nrows() != m || a0.ncols() != m {
            return Err(Error::DimensionMismatch(format!("A0 must be {m}x{m}")));
        }
        if b0.nrows() != m0 || b0.ncols() != m0 {
            return Err(Error::DimensionMismatch(format!("B0 must be {m0}x{m0}")));
        }
        check_entries(&a0, "A0", violations);
        check_entries(&b0, "B0", violations);
        let a_plus = build_sequence(&spec.a_plus, m, m, "A_plus", false, violations)?;
        let a_minus = build_sequence(&spec.a_minus, m, m, "A_minus", false, violations)?;
        let b_plus = build_sequence(&spec.b_plus, m0, m, "B_plus", false, violations)?;
        let b_minus = build_sequence(&spec.b_minus, m, m0, "B_minus", true, violations)?;
        let power = has_power_tail(&a_plus)
            || has_power_tail(&a_minus)
            || has_power_tail(&b_plus)
            || has_power_tail(&b_minus);
        Ok(Gi1Chain {
            m,
            m0,
            a0,
            b0,
            a_plus,
            a_minus,
            b_plus,
            b_minus,
            eps_row: eps_row.unwrap_or_else(|| default_eps_row(power)),
        })
    }

    /// Row-sum checks: level 0, explicit levels `1..=K_max+1`, then one
    /// check for the repeating regime beyond all tail starts. For finite
    /// `A_minus` tails and finite/constant `B_minus` tails the repeating
    /// check is exact; otherwise a window of deep rows is checked
    /// numerically.
    fn check_row_sums(&self, violations: &mut Vec<Error>) {
        let eps = self.eps_row;
        // Level 0: B0 + sum B_k.
        match self.b_plus.total_mass() {
            Ok(mass) => {
                let sums = &self.b0 * DVector::from_element(self.m0, 1.0)
                    + &mass.value * DVector::from_element(self.m, 1.0);
                let defect = max_abs_defect(&sums);
                if defect > eps + mass.err * self.m as f64 {
                    violations.push(Error::RowSumDefect {
                        level_class: "level 0".into(),
                        defect,
                    });
                }
            }
            Err(e) => violations.push(e),
        }
        // Explicit interior levels.
        let k_max = self
            .a_plus
            .tail_start()
            .max(self.a_minus.tail_start())
            .max(self.b_plus.tail_start())
            .max(self.b_minus.tail_start());
        for i in 1..=k_max + 1 {
            match self.interior_row_sums(i) {
                Ok((sums, err)) => {
                    let defect = max_abs_defect(&sums);
                    if defect > eps + err {
                        violations.push(Error::RowSumDefect {
                            level_class: format!("level {i}"),
                            defect,
                        });
                    }
                }
                Err(e) => violations.push(e),
            }
        }
        // Repeating regime beyond all tail starts.
        let exact_regime = matches!(self.a_minus.tail, TailLaw::Finite)
            && matches!(self.b_minus.tail, TailLaw::Finite | TailLaw::Constant { .. });
        let window = if exact_regime { 1 } else { 8 };
        for w in 1..=window {
            let i = k_max + 1 + w;
            match self.interior_row_sums(i) {
                Ok((sums, err)) => {
                    let defect = max_abs_defect(&sums);
                    if defect > eps + err {
                        violations.push(Error::RowSumDefect {
                            level_class: format!("repeating rows (checked at level {i})"),
                            defect,
                        });
                        break;
                    }
                }
                Err(e) => {
                    violations.push(e);
                    break;
                }
            }
        }
    }

    /// Row sums for interior level `i >= 1`:
    /// `B_{-i} e + (A_0 + sum_{k=1}^{i-1} A_{-k} + sum_{k>=1} A_k) e`.
    fn interior_row_sums(&self, i: usize) -> Result<(DVector<f64>, f64)> {
        let ones_m = DVector::from_element(self.m, 1.0);
        let ones_m0 = DVector::from_element(self.m0, 1.0);
        let mut sums = self.b_minus.block(i) * &ones_m0 + &self.a0 * &ones_m;
        let up = self.a_plus.total_mass()?;
        sums += &up.value * &ones_m;
        let mut err = up.err * self.m as f64;
        // Down-moves available from level i: lags 1..=i-1.
        if i >= 2 {
            let all = self.a_minus.total_mass()?;
            let beyond = self.a_minus.mass_from(i)?;
            sums += (&all.value - &beyond.value) * &ones_m;
            err += (all.err + beyond.err) * self.m as f64;
        }
        Ok((sums, err))
    }

    /// Positivity pattern of the phase matrix `A` (union of all A-block
    /// supports).
    fn phase_pattern(&self) -> Vec<Vec<bool>> {
        let mut pat = vec![vec![false; self.m]; self.m];
        let mut mark = |mtx: &DMatrix<f64>| {
            for r in 0..self.m {
                for c in 0..self.m {
                    if mtx[(r, c)] > 0.0 {
                        pat[r][c] = true;
                    }
                }
            }
        };
        mark(&self.a0);
        for b in &self.a_plus.explicit {
            mark(b);
        }
        for b in &self.a_minus.explicit {
            mark(b);
        }
        if let TailLaw::Geometric { coeff, .. } | TailLaw::PowerLaw { alpha: _, coeff, .. } =
            &self.a_plus.tail
        {
            mark(coeff);
        }
        if let TailLaw::Geometric { coeff, .. } | TailLaw::PowerLaw { alpha: _, coeff, .. } =
            &self.a_minus.tail
        {
            mark(coeff);
        }
        pat
    }

    /// The block of the infinite matrix at signed lag, `B`-family when
    /// `boundary` is set: positive lags select `B_lag`, negative lags
    /// `B_{-|lag|}`, lag 0 selects `B0`/`A0`.
    pub fn block_at(&self, lag: i64, boundary: bool) -> DMatrix<f64> {
        match (lag, boundary) {
            (0, false) => self.a0.clone(),
            (0, true) => self.b0.clone(),
            (k, false) if k > 0 => self.a_plus.block(k as usize),
            (k, false) => self.a_minus.block((-k) as usize),
            (k, true) if k > 0 => self.b_plus.block(k as usize),
            (k, true) => self.b_minus.block((-k) as usize),
        }
    }

    /// Assemble the phase process `A = sum_k A_k`, decide stochasticity, and
    /// when stochastic compute its invariant vector and the mean drift.
    pub fn phase_summary(&self) -> Result<PhaseSummary> {
        let up = self.a_plus.total_mass()?;
        let down = self.a_minus.total_mass()?;
        let a = &self.a0 + &up.value + &down.value;
        let a_err = up.err + down.err;
        let ones = DVector::from_element(self.m, 1.0);
        let sums = &a * &ones;
        let defect = max_abs_defect(&sums);
        let is_stochastic = defect <= self.eps_row + a_err * self.m as f64;
        if !is_stochastic {
            return Ok(PhaseSummary {
                a,
                a_err,
                is_stochastic,
                mu: None,
                drift: None,
            });
        }
        let mu = invariant_vector(&a)?;
        let m_up = match self.a_plus.moment(1) {
            BlockMoment::Finite(x) => x,
            BlockMoment::Infinite { row, col } => {
                return Err(Error::DriftUndefined(format!(
                    "sum k A_k diverges at entry ({row},{col})"
                )))
            }
        };
        let m_down = match self.a_minus.moment(1) {
            BlockMoment::Finite(x) => x,
            BlockMoment::Infinite { row, col } => {
                return Err(Error::DriftUndefined(format!(
                    "sum k A_-k diverges at entry ({row},{col})"
                )))
            }
        };
        let signed = &m_up.value - &m_down.value;
        let drift = (mu.transpose() * signed * ones)[(0, 0)];
        Ok(PhaseSummary {
            a,
            a_err,
            is_stochastic,
            mu: Some(mu),
            drift: Some(drift),
        })
    }

    /// Heuristic irreducibility/aperiodicity certificate for the full chain,
    /// computed on a truncated level window by graph reachability plus the
    /// gcd of cycle lengths. A `false` here is a warning, not a proof.
    pub fn truncated_irreducible_aperiodic(&self) -> (bool, bool) {
        let k_max = self
            .a_plus
            .tail_start()
            .max(self.a_minus.tail_start())
            .max(self.b_plus.tail_start())
            .max(self.b_minus.tail_start());
        let levels = k_max + 2;
        let t = crate::truncated::TruncatedChain::build(self, levels.max(4));
        let n = t.n_states();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| t.row(s).iter().map(|&(c, _)| c).collect())
            .collect();
        let irreducible = {
            let fwd = reachable(&adj, 0);
            let mut radj = vec![Vec::new(); n];
            for (s, row) in adj.iter().enumerate() {
                for &c in row {
                    radj[c].push(s);
                }
            }
            let bwd = reachable(&radj, 0);
            fwd.iter().all(|&x| x) && bwd.iter().all(|&x| x)
        };
        let aperiodic = irreducible && period_gcd(&adj) == 1;
        (irreducible, aperiodic)
    }
}

fn max_abs_defect(sums: &DVector<f64>) -> f64 {
    sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// Invariant probability vector of a stochastic matrix: solve `mu A = mu`,
/// `mu e = 1` by replacing one balance equation with the normalization.
pub fn invariant_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = a.nrows();
    if m == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let mut sys = a.transpose() - DMatrix::identity(m, m);
    for c in 0..m {
        sys[(m - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;
    let lu = sys.lu();
    let mu = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailure("invariant vector system is singular".into()))?;
    if mu.iter().any(|&x| x < -1e-9) {
        return Err(Error::SolveFailure(
            "invariant vector has negative entries".into(),
        ));
    }
    Ok(mu.map(|x| x.max(0.0)))
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(s) = stack.pop() {
        for &c in &adj[s] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Strong connectivity of a boolean pattern via forward/backward reachability.
pub fn strongly_connected(pat: &[Vec<bool>]) -> bool {
    let n = pat.len();
    if n == 0 {
        return false;
    }
    let adj: Vec<Vec<usize>> = pat
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect())
        .collect();
    let mut radj = vec![Vec::new(); n];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            radj[j].push(i);
        }
    }
    reachable(&adj, 0).iter().all(|&x| x) && reachable(&radj, 0).iter().all(|&x| x)
}

/// Period of a strongly connected digraph: gcd of `depth(u) + 1 - depth(v)`
/// over edges `u -> v` in a BFS layering.
fn period_gcd(adj: &[Vec<usize>]) -> u64 {
    let n = adj.len();
    let mut depth = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    depth[0] = 0;
    queue.push_back(0);
    let mut g: u64 = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            } else {
                let diff = depth[u] as i64 + 1 - depth[v] as i64;
                g = gcd(g, diff.unsigned_abs());
            }
        }
    }
    if g == 0 {
        0
    } else {
        g
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn c1_validates_and_rows_sum_by_hand() {
        let chain = fixtures::c1();
        // Hand-summation oracle for every level class of C1.
        let row0: f64 = 0.8 + 0.2;
        let row1: f64 = 0.4 + 0.4 + 0.2;
        let deep: f64 = 0.4 + 0.4 + 0.2;
        assert!((row0 - 1.0).abs() < 1e-15);
        assert!((row1 - 1.0).abs() < 1e-15);
        assert!((deep - 1.0).abs() < 1e-15);
        assert_eq!(chain.m, 1);
        assert_eq!(chain.m0, 1);
    }

    #[test]
    fn c1_with_inflated_a0_reports_row_sum_defect() {
        let mut spec = fixtures::c1_spec();
        spec.a0 = vec![vec![0.5]];
        let errs = Gi1Chain::validate(&spec, None).unwrap_err();
        let defect = errs.iter().find_map(|e| match e {
            Error::RowSumDefect { defect, .. } => Some(*defect),
            _ => None,
        });
        let d = defect.expect("row sum defect reported");
        assert!((d - 0.1).abs() < 1e-12, "defect {d}");
    }

    #[test]
    fn c4_validates_with_direct_summation() {
        let chain = fixtures::c4();
        assert_eq!(chain.m, 2);
        let s = chain.phase_summary().unwrap();
        assert!(s.is_stochastic);
    }

    #[test]
    fn negative_entry_rejected() {
        let mut spec = fixtures::c1_spec();
        spec.b0 = vec![vec![-0.1]];
        let errs = Gi1Chain::validate(&spec, None).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, Error::NegativeEntry { .. })));
    }

    #[test]
    fn block_at_materializes_tails() {
        let c1 = fixtures::c1();
        assert_eq!(c1.block_at(1, false)[(0, 0)], 0.2);
        assert_eq!(c1.block_at(7, false)[(0, 0)], 0.0);
        let c3 = fixtures::c3();
        let b2 = c3.block_at(2, true)[(0, 0)];
        let c = fixtures::C3_POWER_COEFF;
        assert!((b2 - c * 2f64.powf(-4.5)).abs() < 1e-15);
    }

    #[test]
    fn phase_summaries_match_hand_values() {
        let s1 = fixtures::c1().phase_summary().unwrap();
        assert!(s1.is_stochastic);
        assert!((s1.drift.unwrap() - (-0.2)).abs() < 1e-12);
        assert!((s1.mu.unwrap()[0] - 1.0).abs() < 1e-12);

        let s4 = fixtures::c4().phase_summary().unwrap();
        assert!(s4.is_stochastic);
        let mu = s4.mu.unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 0.5).abs() < 1e-12);
        assert!((s4.drift.unwrap() - (-0.3)).abs() < 1e-12);
        assert!((s4.a[(0, 0)] - 0.6).abs() < 1e-12 && (s4.a[(0, 1)] - 0.4).abs() < 1e-12);

        let s2 = fixtures::c2().phase_summary().unwrap();
        assert!(!s2.is_stochastic);
        assert!(s2.mu.is_none() && s2.drift.is_none());
        let sum: f64 = s2.a.row(0).iter().sum();
        assert!((sum - 0.9).abs() < 1e-12);
    }

    #[test]
    fn block_moments_match_oracles() {
        let c1 = fixtures::c1();
        // Single block at k = 1: the l-th moment is just that block.
        match c1.a_plus.moment(3) {
            BlockMoment::Finite(a) => assert!((a.value[(0, 0)] - 0.2).abs() < 1e-15),
            _ => panic!("finite"),
        }
        // Power law alpha = 4.5: brute-force partial sum oracle for l = 3.
        let c3 = fixtures::c3();
        let c = fixtures::C3_POWER_COEFF;
        let brute: f64 = (1..=1_000_000u64)
            .map(|k| (k as f64).powi(3) * c * (k as f64).powf(-4.5))
            .sum();
        let tail_bound = c * (1e6f64).powf(-0.5) / 0.5;
        match c3.b_plus.moment(3) {
            BlockMoment::Finite(a) => {
                assert!(
                    (a.value[(0, 0)] - brute).abs() <= 1e-8 + tail_bound,
                    "moment {} vs brute {brute}",
                    a.value[(0, 0)]
                );
            }
            _ => panic!("l=3 is finite for alpha=4.5"),
        }
        // l = 4 >= alpha - 1 diverges.
        assert!(!c3.b_plus.moment(4).is_finite());
    }

    #[test]
    fn moment_monotone_in_l_and_consistent_with_mass() {
        for chain in [fixtures::c1(), fixtures::c2(), fixtures::c3(), fixtures::c4()] {
            for seq in [&chain.a_plus, &chain.b_plus] {
                let mut last_finite = true;
                for l in 0..=6u32 {
                    let fin = seq.moment(l).is_finite();
                    assert!(
                        !(fin && !last_finite),
                        "moment finiteness must be monotone in l"
                    );
                    last_finite = fin;
                }
                // Two code paths for the total mass agree.
                if let (BlockMoment::Finite(m0), Ok(mass)) = (seq.moment(0), seq.total_mass()) {
                    let diff = (&m0.value - &mass.value).amax();
                    assert!(diff <= 1e-12 + m0.err + mass.err);
                }
            }
        }
    }

    #[test]
    fn reducible_phase_pattern_rejected() {
        let spec = ChainSpec {
            m: 2,
            m0: 2,
            a0: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            b0: vec![vec![0.8, 0.0], vec![0.0, 0.8]],
            a_plus: SequenceSpec {
                blocks: vec![vec![vec![0.2, 0.0], vec![0.0, 0.2]]],
                tail: TailSpec::Finite,
            },
            a_minus: SequenceSpec {
                blocks: vec![vec![vec![0.3, 0.0], vec![0.0, 0.3]]],
                tail: TailSpec::Finite,
            },
            b_plus: SequenceSpec {
                blocks: vec![vec![vec![0.2, 0.0], vec![0.0, 0.2]]],
                tail: TailSpec::Finite,
            },
            b_minus: SequenceSpec {
                blocks: vec![vec![vec![0.3, 0.0], vec![0.0, 0.3]]],
                tail: TailSpec::Finite,
            },
        };
        let errs = Gi1Chain::validate(&spec, None).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, Error::ReduciblePhaseProcess)));
    }

    #[test]
    fn constant_tail_only_for_b_minus() {
        let mut spec = fixtures::c2_spec();
        // Moving the constant tail onto A_plus must be rejected.
        spec.a_plus.tail = TailSpec::Constant {
            start: 1,
            value: vec![vec![0.05]],
        };
        let errs = Gi1Chain::validate(&spec, None).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, Error::InvalidTailLaw(_))));
    }

    #[test]
    fn chain_spec_round_trips_through_json() {
        let spec = fixtures::c3_spec();
        let text = spec.to_json();
        let back = ChainSpec::from_json(&text).unwrap();
        assert_eq!(spec.to_json(), back.to_json());
    }

    #[test]
    fn fixtures_are_irreducible_aperiodic_on_window() {
        for chain in [
            fixtures::c1(),
            fixtures::c2(),
            fixtures::c3(),
            fixtures::c4(),
            fixtures::c5(),
        ] {
            let (irr, aper) = chain.truncated_irreducible_aperiodic();
            assert!(irr && aper);
        }
    }
}
