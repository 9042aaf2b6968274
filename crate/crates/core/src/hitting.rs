//! First-passage analysis: exact hitting-time moment tables on truncations,
//! the one-step decomposition identity, stationary-weighted moment sums,
//! deterministic total-variation curves, and a seeded Monte Carlo simulator
//! for the untruncated chain.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{Gi1Chain, TailLaw};
use crate::error::{Error, Result};
use crate::numeric::{binomial, linear_fit};
use crate::stationary::StationarySolution;
use crate::truncated::{TruncatedChain, DENSE_STATE_CUTOFF};

/// Absorption mass at the truncation edge (from the lower half of the
/// levels) above which hitting tables are rejected.
pub const HITTING_LEAK_TOL: f64 = 1e-8;
/// Monte Carlo trajectory cap.
pub const TRAJECTORY_CAP: u64 = 1_000_000;

/// Moment table `E[tau_0^l]` for the first hitting time of level 0,
/// `tau_0 = inf{n >= 1: X_n in L_0}`, on the truncated chain.
#[derive(Debug, Clone)]
pub struct HittingMoments {
    pub levels: usize,
    pub l_max: u32,
    pub m: usize,
    pub m0: usize,
    /// `interior[l][(i-1)*m + r] = E_{(i,r)}[tau_0^l]`, `i = 1..=levels`.
    pub interior: Vec<Vec<f64>>,
    /// `boundary[l][j] = E_{(0,j)}[tau_0^l]` (return moments; a first step
    /// that lands in `L_0` contributes 1).
    pub boundary: Vec<Vec<f64>>,
    /// Largest probability, over states in the lower half of the levels, of
    /// touching the truncation edge before level 0.
    pub top_absorption: f64,
}

impl HittingMoments {
    pub fn interior_at(&self, l: u32, level: usize, phase: usize) -> f64 {
        self.interior[l as usize][(level - 1) * self.m + phase]
    }

    pub fn boundary_at(&self, l: u32, phase: usize) -> f64 {
        self.boundary[l as usize][phase]
    }
}

/// Exact moments of `tau_0` up to order `l_max` by the binomial recursion
/// `(I - Q) M_l = e + sum_{j=1}^{l-1} C(l,j) Q M_j` over the taboo kernel
/// `Q` (the truncation restricted to levels >= 1).
pub fn exact_hitting_moments(
    chain: &Gi1Chain,
    levels: usize,
    l_max: u32,
) -> Result<HittingMoments> {
    if l_max > 8 {
        return Err(Error::PreconditionViolated(format!(
            "moment order {l_max} > 8"
        )));
    }
    let t = TruncatedChain::build(chain, levels);
    let q = t.interior_kernel();
    let n = q.n;

    let top = q.top_absorption(1e-15, 2_000_000)?;
    let half = (levels / 2 * chain.m).max(chain.m);
    let top_absorption = top[..half].iter().copied().fold(0.0, f64::max);
    if top_absorption > HITTING_LEAK_TOL {
        return Err(Error::TruncationTooSmall(format!(
            "absorption at the truncation edge reaches {top_absorption:e} from the lower levels"
        )));
    }

    let mut interior: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let dense_lu = if n <= DENSE_STATE_CUTOFF {
        Some(q.dense_i_minus_q().lu())
    } else {
        None
    };
    let mut qm: Vec<Vec<f64>> = Vec::new(); // qm[j] = Q M_j
    {
        let mut buf = vec![0.0; n];
        q.apply_right(&interior[0], &mut buf);
        qm.push(buf);
    }
    for l in 1..=l_max {
        let mut rhs = vec![1.0; n];
        for j in 1..l {
            let c = binomial(l, j);
            for s in 0..n {
                rhs[s] += c * qm[j as usize][s];
            }
        }
        let sol = match &dense_lu {
            Some(lu) => {
                let x = lu.solve(&DVector::from_column_slice(&rhs)).ok_or_else(|| {
                    Error::SingularSystem("level 0 unreachable in truncation".into())
                })?;
                x.iter().copied().collect::<Vec<f64>>()
            }
            None => q.solve_i_minus_q(&rhs, 1e-13, 4_000_000)?,
        };
        if sol.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SingularSystem(
                "hitting moments are not finite nonnegative".into(),
            ));
        }
        let mut buf = vec![0.0; n];
        q.apply_right(&sol, &mut buf);
        interior.push(sol);
        qm.push(buf);
    }

    // Boundary return moments by one-step conditioning.
    let mut boundary: Vec<Vec<f64>> = vec![vec![1.0; chain.m0]];
    for l in 1..=l_max {
        let mut row_vals = vec![0.0; chain.m0];
        for (j, slot) in row_vals.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(c, p) in t.row(j) {
                if c < chain.m0 {
                    acc += p;
                } else {
                    let s = c - chain.m0;
                    let mut w = 0.0;
                    for jj in 0..=l {
                        w += binomial(l, jj) * interior[jj as usize][s];
                    }
                    acc += p * w;
                }
            }
            *slot = acc;
        }
        boundary.push(row_vals);
    }

    Ok(HittingMoments {
        levels,
        l_max,
        m: chain.m,
        m0: chain.m0,
        interior,
        boundary,
        top_absorption,
    })
}

/// Max relative residual of the one-step decomposition identity at order
/// `l`: the table value against `sum_s P(start, s) w_l(s)` with `w_l = 1`
/// on `L_0` and `sum_j C(l,j) E_s[tau_0^j]` elsewhere, for starts at level
/// 0 and level 1.
pub fn verify_decomposition(chain: &Gi1Chain, levels: usize, l: u32) -> Result<f64> {
    let moments = exact_hitting_moments(chain, levels, l)?;
    let t = TruncatedChain::build(chain, levels);
    let expand = |state: usize| -> f64 {
        let mut acc = 0.0;
        for &(c, p) in t.row(state) {
            if c < chain.m0 {
                acc += p;
            } else {
                let s = c - chain.m0;
                let mut w = 0.0;
                for j in 0..=l {
                    w += binomial(l, j) * moments.interior[j as usize][s];
                }
                acc += p * w;
            }
        }
        acc
    };
    let mut residual = 0.0f64;
    for j in 0..chain.m0 {
        let lhs = moments.boundary_at(l, j);
        let rhs = expand(j);
        residual = residual.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    for r in 0..chain.m {
        let lhs = moments.interior_at(l, 1, r);
        let rhs = expand(t.state_index(1, r));
        residual = residual.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(residual)
}

/// Partial sums `S_C = sum_{i<=C} sum_j E_{(i,j)}[tau_0^l] pi_{ij}` at the
/// checkpoints `C in {L/4, L/2, L}`, from precomputed tables.
pub fn stationary_weighted_sum(
    solution: &StationarySolution,
    moments: &HittingMoments,
    l: u32,
) -> [f64; 3] {
    let levels = solution.levels.min(moments.levels);
    let cuts = [levels / 4, levels / 2, levels];
    let mut out = [0.0; 3];
    let mut acc = 0.0;
    for i in 0..=levels {
        if i == 0 {
            for j in 0..moments.m0 {
                acc += moments.boundary_at(l, j) * solution.pi[0][j];
            }
        } else {
            for r in 0..moments.m {
                acc += moments.interior_at(l, i, r) * solution.pi[i][r];
            }
        }
        for (slot, &cut) in out.iter_mut().zip(cuts.iter()) {
            if i == cut {
                *slot = acc;
            }
        }
    }
    out
}

/// Verdict over three increasing partial sums.
pub fn partial_sum_verdict(sums: &[f64; 3]) -> &'static str {
    let d1 = sums[1] - sums[0];
    let d2 = sums[2] - sums[1];
    let rel = d2.abs() / sums[2].abs().max(1e-300);
    if rel < 1e-6 {
        "stabilizing"
    } else if d2 > d1 * 1.0001 || rel > 0.01 {
        "growing"
    } else {
        "inconclusive"
    }
}

/// Convenience wrapper computing both tables at the same truncation.
pub fn verify_stationary_weighted_sum(
    chain: &Gi1Chain,
    levels: usize,
    l: u32,
) -> Result<([f64; 3], &'static str)> {
    let solution = crate::stationary::truncate_and_solve(chain, levels)?;
    let moments = exact_hitting_moments(chain, levels, l)?;
    let sums = stationary_weighted_sum(&solution, &moments, l);
    Ok((sums, partial_sum_verdict(&sums)))
}

// -- total variation curves ----------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TvCurve {
    pub init: (usize, usize),
    /// `d_n = (1/2) sum_s |P^n(init, s) - pi(s)|` for `n = 0..=horizon`.
    pub distances: Vec<f64>,
    pub fitted_rate: f64,
    /// Envelope prefactor: the smallest `M` with
    /// `d_n <= M * fitted_rate^n` across the window.
    pub fitted_prefactor: f64,
    pub r_squared: f64,
    /// Index window (inclusive) of the log-linear fit:
    /// `1e-10 <= d_n <= 1e-2`.
    pub window: (usize, usize),
}

/// Iterate a point mass through the truncated kernel and record the total
/// variation distance to its stationary vector each step, then fit the
/// decay rate on the window clear of both the transient and the
/// floating-point floor.
pub fn tv_curve(
    chain: &Gi1Chain,
    levels: usize,
    init: (usize, usize),
    horizon: usize,
) -> Result<TvCurve> {
    crate::stationary::check_positive_recurrent(chain)?;
    let t = TruncatedChain::build(chain, levels);
    let (pi, _, _) = t.stationary(
        crate::stationary::STATIONARY_TOL,
        crate::stationary::STATIONARY_MAX_ITER,
    )?;
    let n = t.n_states();
    let (level, phase) = init;
    if level > levels || phase >= if level == 0 { chain.m0 } else { chain.m } {
        return Err(Error::PreconditionViolated(format!(
            "initial state ({level},{phase}) outside the truncation"
        )));
    }
    let mut v = vec![0.0; n];
    v[t.state_index(level, phase)] = 1.0;
    let mut distances = Vec::with_capacity(horizon + 1);
    let mut next = vec![0.0; n];
    let tv =
        |v: &[f64]| -> f64 { 0.5 * v.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>() };
    distances.push(tv(&v));
    for _ in 0..horizon {
        t.apply_left(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
        distances.push(tv(&v));
    }
    let idx: Vec<usize> = (0..distances.len())
        .filter(|&i| distances[i] >= 1e-10 && distances[i] <= 1e-2)
        .collect();
    if idx.len() < 5 {
        return Err(Error::HorizonTooShort);
    }
    let xs: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| distances[i].ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let rate = slope.exp();
    let prefactor = idx
        .iter()
        .map(|&i| distances[i].ln() - slope * i as f64)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    Ok(TvCurve {
        init,
        distances,
        fitted_rate: rate,
        fitted_prefactor: prefactor,
        r_squared: r2,
        window: (idx[0], *idx.last().unwrap()),
    })
}

// -- exact row samplers ----------------------------------------------------------

#[derive(Debug, Clone)]
enum Branch {
    /// Move to level 0 at the given phase.
    Boundary(usize),
    /// Move by `delta` levels to the given phase.
    Jump(i64, usize),
    /// Upward law tail: sample the lag from the scalar law, the phase from
    /// the coefficient row. `law` 0 selects the interior family, 1 the
    /// boundary family.
    LawUp { law: u8, phase_row: usize },
}

#[derive(Debug, Clone)]
struct RowDist {
    cum: Vec<f64>,
    branches: Vec<Branch>,
}

impl RowDist {
    fn sample(&self, u: f64) -> &Branch {
        let i = self.cum.partition_point(|&c| c < u);
        &self.branches[i.min(self.branches.len() - 1)]
    }
}

#[derive(Debug, Clone)]
enum LawKind {
    Geometric {
        start: usize,
        ratio: f64,
    },
    Power {
        start: usize,
        alpha: f64,
        /// Cumulative unnormalized masses for lags `start+1 ..= cutoff`.
        cdf: Vec<f64>,
        total: f64,
    },
}

/// Scalar lag sampler plus per-source-phase target-phase distributions for
/// one upward tail law.
#[derive(Debug, Clone)]
struct LawSampler {
    kind: LawKind,
    phase_cum: Vec<Vec<f64>>,
}

impl LawSampler {
    fn build(tail: &TailLaw, rows: usize) -> Option<LawSampler> {
        match tail {
            TailLaw::Finite | TailLaw::Constant { .. } => None,
            TailLaw::Geometric { start, ratio, coeff } => Some(LawSampler {
                kind: LawKind::Geometric {
                    start: *start,
                    ratio: *ratio,
                },
                phase_cum: phase_cums(coeff, rows),
            }),
            TailLaw::PowerLaw { start, alpha, coeff } => {
                let cutoff = crate::chain::POWER_TAIL_CUTOFF as usize;
                let mut cdf = Vec::with_capacity(cutoff - *start);
                let mut acc = 0.0f64;
                for k in (*start + 1)..=cutoff {
                    acc += (k as f64).powf(-*alpha);
                    cdf.push(acc);
                }
                let m = cutoff as f64;
                let p = -*alpha;
                let total =
                    acc + 0.5 * ((m + 1.0).powf(p + 1.0) + m.powf(p + 1.0)) / (-(p + 1.0));
                Some(LawSampler {
                    kind: LawKind::Power {
                        start: *start,
                        alpha: *alpha,
                        cdf,
                        total,
                    },
                    phase_cum: phase_cums(coeff, rows),
                })
            }
        }
    }

    fn sample_lag(&self, rng: &mut ChaCha8Rng) -> u64 {
        match &self.kind {
            LawKind::Geometric { start, ratio } => {
                let u: f64 = rng.random();
                let j = ((1.0 - u).ln() / ratio.ln()).floor().max(0.0) as u64;
                *start as u64 + 1 + j
            }
            LawKind::Power {
                start,
                alpha,
                cdf,
                total,
            } => {
                let u: f64 = rng.random();
                let target = u * total;
                if target >= *cdf.last().unwrap() {
                    // Pareto inversion beyond the table (astronomically rare
                    // for the bundled exponents, kept exact anyway).
                    let m = (cdf.len() + *start) as f64;
                    let u2: f64 = rng.random();
                    let k = m * (1.0 - u2).powf(1.0 / (1.0 - *alpha));
                    return k.ceil().max(m + 1.0) as u64;
                }
                let i = cdf.partition_point(|&c| c < target);
                *start as u64 + 1 + i as u64
            }
        }
    }

    fn sample_phase(&self, row: usize, rng: &mut ChaCha8Rng) -> usize {
        let cum = &self.phase_cum[row];
        let u: f64 = rng.random::<f64>() * cum.last().copied().unwrap_or(1.0);
        cum.partition_point(|&c| c < u).min(cum.len() - 1)
    }
}

fn phase_cums(coeff: &nalgebra::DMatrix<f64>, rows: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|r| {
            let mut acc = 0.0;
            (0..coeff.ncols())
                .map(|c| {
                    acc += coeff[(r, c)];
                    acc
                })
                .collect()
        })
        .collect()
}

/// Exact transition sampler for the untruncated chain. Rows are assembled
/// lazily per level class and cached; all draws are inverse-CDF over the
/// row distribution, so trajectories are a pure function of the seed.
pub struct ChainSampler<'a> {
    chain: &'a Gi1Chain,
    boundary_rows: Vec<RowDist>,
    interior_cache: std::collections::BTreeMap<usize, Vec<RowDist>>,
    /// Levels at and beyond this index share one row structure.
    deep_cutoff: usize,
    law_up_a: Option<LawSampler>,
    law_up_b: Option<LawSampler>,
}

impl<'a> ChainSampler<'a> {
    pub fn new(chain: &'a Gi1Chain) -> Self {
        let law_up_a = LawSampler::build(&chain.a_plus.tail, chain.m);
        let law_up_b = LawSampler::build(&chain.b_plus.tail, chain.m0);
        let a_minus_reach = match &chain.a_minus.tail {
            TailLaw::Finite => chain.a_minus.tail_start(),
            TailLaw::Geometric { start, ratio, .. } => {
                *start + ((1e-18f64.ln() / ratio.ln()).ceil() as usize).max(1)
            }
            TailLaw::PowerLaw { .. } | TailLaw::Constant { .. } => 100_000,
        };
        let b_minus_quiet = match &chain.b_minus.tail {
            TailLaw::Finite | TailLaw::Constant { .. } => chain.b_minus.tail_start(),
            TailLaw::Geometric { start, ratio, .. } => {
                *start + ((1e-18f64.ln() / ratio.ln()).ceil() as usize).max(1)
            }
            TailLaw::PowerLaw { .. } => 100_000,
        };
        let deep_cutoff = (a_minus_reach + 1).max(b_minus_quiet + 1).max(2);
        let mut sampler = ChainSampler {
            chain,
            boundary_rows: Vec::new(),
            interior_cache: std::collections::BTreeMap::new(),
            deep_cutoff,
            law_up_a,
            law_up_b,
        };
        sampler.boundary_rows = sampler.build_boundary_rows();
        sampler
    }

    fn build_boundary_rows(&self) -> Vec<RowDist> {
        let chain = self.chain;
        let mut rows = Vec::with_capacity(chain.m0);
        for j in 0..chain.m0 {
            let mut cum = Vec::new();
            let mut branches = Vec::new();
            let mut acc = 0.0;
            for c in 0..chain.m0 {
                let p = chain.b0[(j, c)];
                if p > 0.0 {
                    acc += p;
                    cum.push(acc);
                    branches.push(Branch::Boundary(c));
                }
            }
            for k in 1..=chain.b_plus.explicit_end() {
                let b = chain.b_plus.block(k);
                for c in 0..chain.m {
                    let p = b[(j, c)];
                    if p > 0.0 {
                        acc += p;
                        cum.push(acc);
                        branches.push(Branch::Jump(k as i64, c));
                    }
                }
            }
            if self.law_up_b.is_some() {
                let tail_mass: f64 = chain
                    .b_plus
                    .mass_from(chain.b_plus.tail_start() + 1)
                    .map(|a| a.value.row(j).iter().sum())
                    .unwrap_or(0.0);
                if tail_mass > 0.0 {
                    acc += tail_mass;
                    cum.push(acc);
                    branches.push(Branch::LawUp {
                        law: 1,
                        phase_row: j,
                    });
                }
            }
            normalize_row(&mut cum);
            rows.push(RowDist { cum, branches });
        }
        rows
    }

    fn build_interior_rows(&self, level: usize) -> Vec<RowDist> {
        let chain = self.chain;
        let mut rows = Vec::with_capacity(chain.m);
        for r in 0..chain.m {
            let mut cum = Vec::new();
            let mut branches = Vec::new();
            let mut acc = 0.0;
            // Direct boundary jump.
            let b_down = chain.b_minus.block(level);
            for c in 0..chain.m0 {
                let p = b_down[(r, c)];
                if p > 0.0 {
                    acc += p;
                    cum.push(acc);
                    branches.push(Branch::Boundary(c));
                }
            }
            // Interior down-moves (lags 1..=level-1 only).
            let down_reach = match &chain.a_minus.tail {
                TailLaw::Finite => chain.a_minus.tail_start(),
                _ => self.deep_cutoff,
            };
            for k in 1..=down_reach.min(level.saturating_sub(1)) {
                let b = chain.a_minus.block(k);
                for c in 0..chain.m {
                    let p = b[(r, c)];
                    if p > 0.0 {
                        acc += p;
                        cum.push(acc);
                        branches.push(Branch::Jump(-(k as i64), c));
                    }
                }
            }
            // Hold.
            for c in 0..chain.m {
                let p = chain.a0[(r, c)];
                if p > 0.0 {
                    acc += p;
                    cum.push(acc);
                    branches.push(Branch::Jump(0, c));
                }
            }
            // Explicit up-moves plus the law branch.
            for k in 1..=chain.a_plus.explicit_end() {
                let b = chain.a_plus.block(k);
                for c in 0..chain.m {
                    let p = b[(r, c)];
                    if p > 0.0 {
                        acc += p;
                        cum.push(acc);
                        branches.push(Branch::Jump(k as i64, c));
                    }
                }
            }
            if self.law_up_a.is_some() {
                let tail_mass: f64 = chain
                    .a_plus
                    .mass_from(chain.a_plus.tail_start() + 1)
                    .map(|a| a.value.row(r).iter().sum())
                    .unwrap_or(0.0);
                if tail_mass > 0.0 {
                    acc += tail_mass;
                    cum.push(acc);
                    branches.push(Branch::LawUp {
                        law: 0,
                        phase_row: r,
                    });
                }
            }
            normalize_row(&mut cum);
            rows.push(RowDist { cum, branches });
        }
        rows
    }

    /// One transition from `(level, phase)`.
    pub fn step(&mut self, level: u64, phase: usize, rng: &mut ChaCha8Rng) -> (u64, usize) {
        let key = (level as usize).min(self.deep_cutoff);
        if level > 0 && !self.interior_cache.contains_key(&key) {
            let rows = self.build_interior_rows(key);
            self.interior_cache.insert(key, rows);
        }
        let row = if level == 0 {
            &self.boundary_rows[phase]
        } else {
            &self.interior_cache[&key][phase]
        };
        let u: f64 = rng.random();
        match row.sample(u) {
            Branch::Boundary(c) => (0, *c),
            Branch::Jump(delta, c) => ((level as i64 + delta).max(0) as u64, *c),
            Branch::LawUp { law, phase_row } => {
                let sampler = if *law == 0 {
                    self.law_up_a.as_ref().unwrap()
                } else {
                    self.law_up_b.as_ref().unwrap()
                };
                let lag = sampler.sample_lag(rng);
                let c = sampler.sample_phase(*phase_row, rng);
                (level + lag, c)
            }
        }
    }
}

fn normalize_row(cum: &mut [f64]) {
    if let Some(&total) = cum.last() {
        if total > 0.0 {
            for c in cum.iter_mut() {
                *c /= total;
            }
        }
    }
}

/// Deterministic seeded trajectory: the path of `(level, phase)` after
/// `steps` transitions, including the start.
pub fn simulate_trajectory(
    chain: &Gi1Chain,
    start: (u64, usize),
    steps: usize,
    seed: u64,
) -> Vec<(u64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = ChainSampler::new(chain);
    let mut path = Vec::with_capacity(steps + 1);
    let (mut level, mut phase) = start;
    path.push((level, phase));
    for _ in 0..steps {
        let (nl, np) = sampler.step(level, phase, &mut rng);
        level = nl;
        phase = np;
        path.push((level, phase));
    }
    path
}

/// Outcome of one Monte Carlo start level in the hitting-time lower-bound
/// check.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundStart {
    pub level: u64,
    /// `(1/2) ((i-1)/(4 mu))^l`.
    pub bound: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `estimate >= bound - 3 SE`.
    pub moment_ok: bool,
    /// Steps of the confinement window, `floor(i / (4 mu))`.
    pub window_steps: u64,
    /// Estimated probability that the level stays at or below
    /// `i + floor(i/2)` throughout the window (the upward-excursion event
    /// the dominating-walk comparison controls).
    pub confinement_prob: f64,
    pub confinement_se: f64,
    /// `confinement_prob > 1/2 - 3 SE`.
    pub confinement_ok: bool,
    pub capped_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    /// Mean of the dominating upward-step variable:
    /// `sum_k min(1, h(k))` for `h(k)` the larger of the level-0 and
    /// level-1 upward row tails at distance `k`.
    pub mu: f64,
    pub starts: Vec<LowerBoundStart>,
}

/// Dominating-step mean from the upward row tails.
pub fn dominating_mu(chain: &Gi1Chain) -> Result<f64> {
    let horizon = match (&chain.a_plus.tail, &chain.b_plus.tail) {
        (TailLaw::Finite, TailLaw::Finite) => {
            chain.a_plus.tail_start().max(chain.b_plus.tail_start()) + 1
        }
        _ => 200_000,
    };
    let row_max = |mat: &nalgebra::DMatrix<f64>| -> f64 {
        (0..mat.nrows())
            .map(|r| mat.row(r).iter().sum::<f64>())
            .fold(0.0, f64::max)
    };
    // Suffix sums accumulated backward make each h(k) O(1).
    let mut tail_a = chain.a_plus.mass_from(horizon + 1)?.value;
    let mut tail_b = chain.b_plus.mass_from(horizon + 1)?.value;
    let mut mu = 0.0f64;
    let mut h_by_k = Vec::with_capacity(horizon);
    for k in (1..=horizon).rev() {
        tail_a += chain.a_plus.block(k);
        tail_b += chain.b_plus.block(k);
        h_by_k.push(row_max(&tail_a).max(row_max(&tail_b)));
    }
    for h in h_by_k {
        mu += h.min(1.0);
    }
    if mu <= 0.0 {
        return Err(Error::PreconditionViolated(
            "no upward movement; the dominating mean is zero".into(),
        ));
    }
    Ok(mu)
}

/// Monte Carlo check of the hitting-time lower bound: from each start level
/// `i`, estimate `E[(tau_0 - 1)^l]` against `(1/2)((i-1)/(4 mu))^l`, and
/// the probability of the upward-confinement event over `floor(i/(4 mu))`
/// steps. Replicas for different starts use per-start derived streams of
/// the same seed.
pub fn verify_lower_bound(
    chain: &Gi1Chain,
    l: u32,
    starts: &[u64],
    n_samples: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    if !chain.a_plus.moment(1).is_finite() || !chain.b_plus.moment(1).is_finite() {
        return Err(Error::PreconditionViolated(
            "first upward block moments must be finite".into(),
        ));
    }
    let mu = dominating_mu(chain)?;
    let mut out = Vec::with_capacity(starts.len());
    for (idx, &level) in starts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64 + 1);
        let mut sampler = ChainSampler::new(chain);
        let window_steps = (level as f64 / (4.0 * mu)).floor() as u64;
        let ceiling = level + level / 2;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        let mut confined = 0usize;
        let mut capped = 0usize;
        for _ in 0..n_samples {
            let mut lvl = level;
            let mut phase = 0usize;
            let mut tau: u64 = 0;
            let mut stays = true;
            loop {
                let (nl, np) = sampler.step(lvl, phase, &mut rng);
                lvl = nl;
                phase = np;
                tau += 1;
                if tau <= window_steps && lvl > ceiling {
                    stays = false;
                }
                if lvl == 0 {
                    break;
                }
                if tau >= TRAJECTORY_CAP {
                    capped += 1;
                    break;
                }
            }
            if stays {
                confined += 1;
            }
            let v = ((tau.saturating_sub(1)) as f64).powi(l as i32);
            sum += v;
            sum_sq += v * v;
        }
        let n = n_samples as f64;
        if capped as f64 / n > 0.01 {
            return Err(Error::PreconditionViolated(format!(
                "{:.2}% of trajectories from level {level} hit the {TRAJECTORY_CAP}-step cap",
                100.0 * capped as f64 / n
            )));
        }
        let estimate = sum / n;
        let var = (sum_sq / n - estimate * estimate).max(0.0);
        let std_error = (var / n).sqrt();
        let bound = 0.5 * ((level as f64 - 1.0) / (4.0 * mu)).powi(l as i32);
        let confinement_prob = confined as f64 / n;
        let confinement_se = (confinement_prob * (1.0 - confinement_prob) / n).sqrt();
        out.push(LowerBoundStart {
            level,
            bound,
            estimate,
            std_error,
            moment_ok: estimate >= bound - 3.0 * std_error,
            window_steps,
            confinement_prob,
            confinement_se,
            confinement_ok: confinement_prob > 0.5 - 3.0 * confinement_se,
            capped_fraction: capped as f64 / n,
        });
    }
    Ok(LowerBoundReport { mu, starts: out })
}

/// Seeded Monte Carlo estimate of the mean hitting time of level 0 from one
/// start: `(mean, standard error, capped fraction)`.
pub fn mc_mean_hitting(
    chain: &Gi1Chain,
    start: (u64, usize),
    n_samples: usize,
    seed: u64,
) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = ChainSampler::new(chain);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut capped = 0usize;
    for _ in 0..n_samples {
        let (mut lvl, mut phase) = start;
        let mut tau: u64 = 0;
        loop {
            let (nl, np) = sampler.step(lvl, phase, &mut rng);
            lvl = nl;
            phase = np;
            tau += 1;
            if lvl == 0 {
                break;
            }
            if tau >= TRAJECTORY_CAP {
                capped += 1;
                break;
            }
        }
        sum += tau as f64;
        sum_sq += (tau * tau) as f64;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt(), capped as f64 / n)
}
