//! Stationary analysis: level truncation with last-level augmentation,
//! taboo-solve visit measures `R_{0,k}` / `R_k`, the factorization identity
//! tying them to the stationary law, tail-rate fits, and stationary moments.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::chain::Gi1Chain;
use crate::error::{Error, Result};
use crate::numeric::linear_fit;
use crate::truncated::{TruncatedChain, DENSE_STATE_CUTOFF};

/// Convergence target of the stationary solve (`sup |pi P - pi|`).
pub const STATIONARY_TOL: f64 = 1e-13;
pub const STATIONARY_MAX_ITER: usize = 4_000_000;
/// Levels kept between the last reported visit matrix and the truncation
/// edge of the taboo region.
pub const R_MEASURE_MARGIN: usize = 50;
/// Visit mass reaching the truncation edge above which R-measures are
/// rejected.
pub const R_MEASURE_LEAK_TOL: f64 = 1e-8;

/// Geometric vs power-law tail fit of the per-level stationary mass.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailFit {
    /// Fitted geometric decay rate `exp(slope of log pi_i over i)`.
    pub rate: f64,
    pub r_squared: f64,
    /// Log-log fit slope (power-law exponent estimate).
    pub power_slope: f64,
    pub power_r_squared: f64,
    /// Which model explains the window better.
    pub better_fit: &'static str,
    /// Fit window in levels (inclusive).
    pub window: (usize, usize),
}

/// Truncated stationary distribution.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    /// Highest retained level.
    pub levels: usize,
    /// `pi[0]` has `m0` entries; `pi[i]`, `i >= 1`, has `m` entries.
    pub pi: Vec<DVector<f64>>,
    /// Truncation scheme tag.
    pub augmentation: &'static str,
    /// Stationary mass held at the augmented last level; the tail mass the
    /// truncation folded back.
    pub mass_defect: f64,
    /// Sup-norm residual of `pi P_L - pi`.
    pub residual: f64,
    /// Power-iteration count (0 for the dense path).
    pub iterations: usize,
}

impl StationarySolution {
    /// Total mass at one level.
    pub fn level_mass(&self, i: usize) -> f64 {
        self.pi[i].iter().sum()
    }
}

/// Is the chain positive recurrent, as decidable from the phase process?
/// Substochastic `A` (uniformly bounded hitting times) is always positive
/// recurrent; stochastic `A` requires negative drift.
pub fn check_positive_recurrent(chain: &Gi1Chain) -> Result<()> {
    let summary = chain.phase_summary()?;
    if !summary.is_stochastic {
        return Ok(());
    }
    match summary.drift {
        Some(d) if d < 0.0 => Ok(()),
        Some(d) => Err(Error::NotPositiveRecurrent(format!(
            "phase process is stochastic with drift {d} >= 0"
        ))),
        None => Err(Error::DriftUndefined("first block moment diverges".into())),
    }
}

/// Solve `pi P_L = pi` on the truncation at `levels` and normalize.
///
/// Dense LU below [`DENSE_STATE_CUTOFF`] states, damped power iteration
/// above (warm-started from a coarser dense solve extended by its last
/// level ratio).
pub fn truncate_and_solve(chain: &Gi1Chain, levels: usize) -> Result<StationarySolution> {
    if levels < 10 {
        return Err(Error::PreconditionViolated(format!(
            "truncation level {levels} < 10"
        )));
    }
    check_positive_recurrent(chain)?;
    let t = TruncatedChain::build(chain, levels);
    let n = t.n_states();
    let (flat, residual, iterations) = if n <= DENSE_STATE_CUTOFF {
        t.stationary(STATIONARY_TOL, STATIONARY_MAX_ITER)?
    } else {
        let coarse_levels = (DENSE_STATE_CUTOFF - chain.m0) / chain.m;
        let coarse = TruncatedChain::build(chain, coarse_levels);
        let (cpi, _, _) = coarse.stationary(STATIONARY_TOL, STATIONARY_MAX_ITER)?;
        let mut init = vec![0.0; n];
        init[..cpi.len()].copy_from_slice(&cpi);
        let last = t.state_index(coarse_levels, 0);
        let prev = t.state_index(coarse_levels - 1, 0);
        let mut ratio: f64 = 0.0;
        for r in 0..chain.m {
            let num = cpi[prev + r];
            if num > 0.0 {
                ratio = ratio.max(cpi[last + r] / num);
            }
        }
        let ratio = ratio.clamp(0.0, 0.999999);
        for level in coarse_levels + 1..=levels {
            for r in 0..chain.m {
                let src = t.state_index(level - 1, r);
                let dst = t.state_index(level, r);
                init[dst] = init[src] * ratio;
            }
        }
        let total: f64 = init.iter().sum();
        for x in init.iter_mut() {
            *x /= total;
        }
        t.power_stationary(Some(init), STATIONARY_TOL, STATIONARY_MAX_ITER)?
    };

    let mut pi = Vec::with_capacity(levels + 1);
    pi.push(DVector::from_iterator(
        chain.m0,
        flat[..chain.m0].iter().copied(),
    ));
    for i in 1..=levels {
        let s = t.state_index(i, 0);
        pi.push(DVector::from_iterator(
            chain.m,
            flat[s..s + chain.m].iter().copied(),
        ));
    }
    let mass_defect = pi[levels].iter().sum();
    Ok(StationarySolution {
        levels,
        pi,
        augmentation: "last-level",
        mass_defect,
        residual,
        iterations,
    })
}

/// Expected-visit matrices: `r0[k-1] = R_{0,k}` (boundary to level k) and
/// `r[k-1] = R_k` (level i to level i+k), `k = 1..=l_prime`.
#[derive(Debug, Clone)]
pub struct RMeasureSet {
    pub r0: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    /// Largest probability, over starting levels up to `l_prime`, of the
    /// taboo excursion touching the truncation edge.
    pub leak: f64,
}

/// Compute `R_{0,k}` and `R_k` for `k = 1..=l_prime` by one taboo solve on
/// the level-homogeneous region above the target.
///
/// For a target level `j >= 1` the region `L_{>=j}` relabels to relative
/// levels `0..depth`; `X = (I - Q)^{-1} E_0` stacks the expected visit
/// counts to the target level, and
/// `R_k = sum_d A_{k+d} X_d`, `R_{0,k} = sum_d B_{k+d} X_d`.
pub fn r_measures(chain: &Gi1Chain, levels: usize, l_prime: usize) -> Result<RMeasureSet> {
    if levels < l_prime + R_MEASURE_MARGIN {
        return Err(Error::TruncationTooSmall(format!(
            "need levels >= l_prime + {R_MEASURE_MARGIN} (got {levels} vs {l_prime})"
        )));
    }
    let m = chain.m;
    let depth = levels - l_prime;
    let n = depth * m;
    let idx = |d: usize, r: usize| d * m + r;

    // Region kernel rows: relative level d -> d + lag, lag in [-d, depth-1-d],
    // with the upward remainder folded into the top relative level.
    let mut q_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let up_total = chain.a_plus.total_mass()?.value;
    for d in 0..depth {
        let lag_top = depth - 1 - d;
        let top = if lag_top == 0 {
            &chain.a0 + &up_total
        } else {
            chain.a_plus.mass_from(lag_top)?.value
        };
        for r in 0..m {
            let mut row = Vec::new();
            for dd in 0..depth - 1 {
                let lag = dd as i64 - d as i64;
                let block = if lag == 0 {
                    chain.a0.clone()
                } else if lag > 0 {
                    chain.a_plus.block(lag as usize)
                } else {
                    chain.a_minus.block((-lag) as usize)
                };
                for c in 0..m {
                    let v = block[(r, c)];
                    if v != 0.0 {
                        row.push((idx(dd, c), v));
                    }
                }
            }
            for c in 0..m {
                let v = top[(r, c)];
                if v != 0.0 {
                    row.push((idx(depth - 1, c), v));
                }
            }
            q_rows.push(row);
        }
    }

    // X = (I - Q)^{-1} E_0: dense solve (the margin keeps the region small
    // in practice) or monotone iteration per column.
    let x = if n <= DENSE_STATE_CUTOFF {
        let mut a = DMatrix::identity(n, n);
        for (s, row) in q_rows.iter().enumerate() {
            for &(c, p) in row {
                a[(s, c)] -= p;
            }
        }
        let lu = a.lu();
        let mut x = DMatrix::zeros(n, m);
        for col in 0..m {
            let mut rhs = DVector::zeros(n);
            rhs[idx(0, col)] = 1.0;
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| Error::SingularSystem("taboo region solve failed".into()))?;
            x.set_column(col, &sol);
        }
        x
    } else {
        let mut x = DMatrix::zeros(n, m);
        for col in 0..m {
            let mut v = vec![0.0; n];
            let mut next = vec![0.0; n];
            for it in 0..1_000_000usize {
                let mut delta = 0.0f64;
                for (s, row) in q_rows.iter().enumerate() {
                    let mut acc = if s == idx(0, col) { 1.0 } else { 0.0 };
                    for &(c, p) in row {
                        acc += p * v[c];
                    }
                    next[s] = acc;
                }
                for s in 0..n {
                    delta = delta.max((next[s] - v[s]).abs());
                    v[s] = next[s];
                }
                if delta <= 1e-14 {
                    break;
                }
                if it == 999_999 {
                    return Err(Error::ConvergenceFailure {
                        iterations: it,
                        residual: delta,
                    });
                }
            }
            for s in 0..n {
                x[(s, col)] = v[s];
            }
        }
        x
    };

    // Leak monitor: probability of touching the top relative level before
    // leaving the region, from the starting levels that feed the reported
    // measures.
    let top_start = idx(depth - 1, 0);
    let mut h = vec![0.0; n];
    {
        let mut next = vec![0.0; n];
        for _ in 0..200_000usize {
            let mut delta = 0.0f64;
            for (s, row) in q_rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(c, p) in row {
                    acc += if c >= top_start { p } else { p * h[c] };
                }
                next[s] = acc;
            }
            for s in 0..n {
                delta = delta.max((next[s] - h[s]).abs());
                h[s] = next[s];
            }
            if delta <= 1e-15 {
                break;
            }
        }
    }
    let leak = (0..l_prime.min(depth - 1))
        .flat_map(|d| (0..m).map(move |r| (d, r)))
        .map(|(d, r)| h[idx(d, r)])
        .fold(0.0, f64::max);
    if leak > R_MEASURE_LEAK_TOL {
        return Err(Error::TruncationTooSmall(format!(
            "taboo excursions reach the truncation edge with probability {leak:e}"
        )));
    }

    // R_k and R_{0,k}: first-step mass into the region times visit counts.
    let mut r_out = Vec::with_capacity(l_prime);
    let mut r0_out = Vec::with_capacity(l_prime);
    for k in 1..=l_prime {
        let mut rk = DMatrix::zeros(m, m);
        let mut r0k = DMatrix::zeros(chain.m0, m);
        for d in 0..depth {
            let a_block = chain.a_plus.block(k + d);
            let b_block = chain.b_plus.block(k + d);
            let xd = x.rows(idx(d, 0), m);
            if a_block.amax() > 0.0 {
                rk += a_block * xd;
            }
            if b_block.amax() > 0.0 {
                r0k += b_block * xd;
            }
        }
        r_out.push(rk);
        r0_out.push(r0k);
    }
    Ok(RMeasureSet {
        r0: r0_out,
        r: r_out,
        leak,
    })
}

/// Sup-norm residual of the factorization identity at `0 < z < 1`:
/// `sum_{k>=1} z^k pi_k [I - R*(z)] = pi_0 R0*(z)`, all series truncated at
/// the available data.
pub fn factorization_residual(
    chain: &Gi1Chain,
    solution: &StationarySolution,
    rset: &RMeasureSet,
    z: f64,
) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::OutOfDomain {
            z,
            domain: "(0, 1)".into(),
        });
    }
    let m = chain.m;
    let mut pi_star_plus = RowDVector::zeros(m);
    let mut zk = 1.0;
    for k in 1..=solution.levels {
        zk *= z;
        pi_star_plus += solution.pi[k].transpose() * zk;
    }
    let mut r_star = DMatrix::zeros(m, m);
    let mut r0_star = DMatrix::zeros(chain.m0, m);
    let mut zk = 1.0;
    for k in 1..=rset.r.len() {
        zk *= z;
        r_star += &rset.r[k - 1] * zk;
        r0_star += &rset.r0[k - 1] * zk;
    }
    let lhs = &pi_star_plus * (DMatrix::identity(m, m) - r_star);
    let rhs = solution.pi[0].transpose() * r0_star;
    Ok((lhs - rhs).amax())
}

/// Least-squares tail fit of `log(pi_i e)` over the window `[L/2, 3L/4]`
/// (early levels are boundary-contaminated, late levels augmentation-biased).
pub fn tail_fit(solution: &StationarySolution) -> Result<TailFit> {
    if solution.levels < 100 {
        return Err(Error::PreconditionViolated(
            "tail fit needs at least 100 levels".into(),
        ));
    }
    let lo = solution.levels / 2;
    let hi = 3 * solution.levels / 4;
    let mut xs = Vec::new();
    let mut lxs = Vec::new();
    let mut ys = Vec::new();
    for i in lo..=hi {
        let mass = solution.level_mass(i);
        if mass <= 1e-300 {
            return Err(Error::DegenerateWindow(format!(
                "level {i} mass underflowed"
            )));
        }
        xs.push(i as f64);
        lxs.push((i as f64).ln());
        ys.push(mass.ln());
    }
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let (pslope, _, pr2) = linear_fit(&lxs, &ys);
    Ok(TailFit {
        rate: slope.exp(),
        r_squared: r2,
        power_slope: pslope,
        power_r_squared: pr2,
        better_fit: if pr2 > r2 { "power-law" } else { "geometric" },
        window: (lo, hi),
    })
}

/// Partial sums `S_C = sum_{i<=C} i^l pi_i e` at the three checkpoints
/// `C in {L/4, L/2, L}`.
pub fn stationary_moment(solution: &StationarySolution, l: u32) -> [f64; 3] {
    let cuts = [solution.levels / 4, solution.levels / 2, solution.levels];
    let mut out = [0.0; 3];
    let mut acc = 0.0;
    for i in 0..=solution.levels {
        acc += (i as f64).powi(l as i32) * solution.level_mass(i);
        for (slot, &cut) in out.iter_mut().zip(cuts.iter()) {
            if i == cut {
                *slot = acc;
            }
        }
    }
    out
}
