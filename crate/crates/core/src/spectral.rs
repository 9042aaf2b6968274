//! Spectral analysis of the interior generating matrix `A*(z)`: convergence
//! radii, the Perron root `chi(z)` with its eigenvector `Y(z)`, the drift
//! identity `chi'(1) = mu (sum k A_k) e`, and the decay root `eta` — the
//! smallest `z > 1` with `chi(z) = 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{Approx, BlockMoment, Gi1Chain};
use crate::error::{Error, Result};
use crate::numeric::{brent, power_iteration};

/// Step away from 1 at which the eta bracket search starts.
pub const ETA_STEP: f64 = 1e-6;
/// Upper cap of the eta scan when the radius is unbounded.
pub const ETA_SCAN_CAP: f64 = 1e6;
/// Brent refinement target on `|chi(z) - 1|`.
pub const ETA_TOL: f64 = 1e-12;
/// Rayleigh-quotient convergence threshold of the Perron power iteration.
pub const PERRON_TOL: f64 = 1e-14;
pub const PERRON_MAX_ITER: usize = 100_000;

/// Convergence radii of the upward generating functions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Radii {
    pub phi_a_plus: f64,
    pub phi_b_plus: f64,
}

pub fn radii(chain: &Gi1Chain) -> Radii {
    Radii {
        phi_a_plus: chain.a_plus.radius(),
        phi_b_plus: chain.b_plus.radius(),
    }
}

/// Generating-function evaluation at a point `z`.
#[derive(Debug, Clone)]
pub struct GenFunEval {
    pub z: f64,
    /// `A*(z) = sum_{k=-inf}^{inf} z^k A_k`.
    pub a_star: DMatrix<f64>,
    /// Upward part `sum_{k>=1} z^k A_k`.
    pub a_star_plus: DMatrix<f64>,
    /// Upward boundary part `sum_{k>=1} z^k B_k`; `None` when `z` is outside
    /// the `B_plus` radius.
    pub b_star_plus: Option<DMatrix<f64>>,
    /// Absolute error bound from bracketed power-law tail sums.
    pub err: f64,
}

/// Evaluate `A*(z)` (and the upward parts) with closed-form tail summation.
/// Downward lags are summed as a series in `1/z`.
pub fn eval_genfun(chain: &Gi1Chain, z: f64) -> Result<GenFunEval> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::OutOfDomain {
            z,
            domain: "z must be positive".into(),
        });
    }
    let phi_a = chain.a_plus.radius();
    if z >= phi_a {
        return Err(Error::OutOfDomain {
            z,
            domain: format!("(0, {phi_a}) (upward radius)"),
        });
    }
    let up: Approx = chain.a_plus.genfun(z)?;
    let down: Approx = chain.a_minus.genfun(1.0 / z)?;
    let a_star = &chain.a0 + &up.value + &down.value;
    let b_star_plus = match chain.b_plus.genfun(z) {
        Ok(b) => Some(b.value),
        Err(Error::OutOfDomain { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GenFunEval {
        z,
        a_star: a_star.clone(),
        a_star_plus: up.value,
        b_star_plus,
        err: up.err + down.err,
    })
}

/// Perron pair of `A*(z)`: spectral radius and eigenvector with minimum
/// entry 1.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub z: f64,
    pub chi: f64,
    pub y: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn perron(chain: &Gi1Chain, z: f64) -> Result<PerronPair> {
    let gf = eval_genfun(chain, z)?;
    let pr = power_iteration(&gf.a_star, PERRON_TOL, PERRON_MAX_ITER)?;
    let norm = gf.a_star.amax().max(1e-300);
    if pr.residual > 1e-10 * norm {
        return Err(Error::ConvergenceFailure {
            iterations: pr.iterations,
            residual: pr.residual,
        });
    }
    Ok(PerronPair {
        z,
        chi: pr.rho,
        y: pr.y,
        residual: pr.residual,
        iterations: pr.iterations,
    })
}

/// `chi'(1) = mu (sum_k k A_k) e`, cross-checked against a central finite
/// difference of the Perron root at 1.
pub fn chi_derivative_at_one(chain: &Gi1Chain) -> Result<f64> {
    let summary = chain.phase_summary()?;
    if !summary.is_stochastic {
        return Err(Error::PreconditionViolated(
            "phase process must be stochastic".into(),
        ));
    }
    let mu = summary.mu.expect("stochastic summary carries mu");
    let m_up = match chain.a_plus.moment(1) {
        BlockMoment::Finite(x) => x,
        BlockMoment::Infinite { row, col } => {
            return Err(Error::DriftUndefined(format!(
                "sum k A_k diverges at entry ({row},{col})"
            )))
        }
    };
    let m_down = match chain.a_minus.moment(1) {
        BlockMoment::Finite(x) => x,
        BlockMoment::Infinite { row, col } => {
            return Err(Error::DriftUndefined(format!(
                "sum k A_-k diverges at entry ({row},{col})"
            )))
        }
    };
    let ones = DVector::from_element(chain.m, 1.0);
    let analytic = (mu.transpose() * (&m_up.value - &m_down.value) * ones)[(0, 0)];
    let h = 1e-5;
    let hi = perron(chain, 1.0 + h)?.chi;
    let lo = perron(chain, 1.0 - h)?.chi;
    let fd = (hi - lo) / (2.0 * h);
    if (fd - analytic).abs() > 1e-6 {
        return Err(Error::SolveFailure(format!(
            "chi'(1) cross-check failed: analytic {analytic}, finite difference {fd}"
        )));
    }
    Ok(analytic)
}

/// Location of the decay root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Eta {
    /// `chi(eta) = 1` with `1 < eta < phi_A+`.
    Root { value: f64 },
    /// No crossing found up to the scan cap (finite value, unbounded radius).
    BeyondScan { bound: f64 },
    /// Provably no root: the chain has no upward interior movement, so
    /// `chi` is nonincreasing on `(1, inf)`.
    Infinite,
}

impl Eta {
    /// Numeric value usable in `min(...)` expressions: the root itself, or a
    /// proven lower bound.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Eta::Root { value } => *value,
            Eta::BeyondScan { bound } => *bound,
            Eta::Infinite => f64::INFINITY,
        }
    }

    pub fn root(&self) -> Option<f64> {
        match self {
            Eta::Root { value } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaResult {
    pub eta: Eta,
    /// Bracket handed to the refinement.
    pub bracket: (f64, f64),
    /// `|chi(eta) - 1|` at the returned root (0 for the other variants).
    pub residual: f64,
    /// `|det(I - A*(eta))|` cross-check at the root.
    pub det_residual: f64,
    pub phi_a_plus: f64,
}

/// `det(I - A*(z))`, the determinant whose minimal positive root the Perron
/// branch locates.
pub fn det_i_minus_a_star(chain: &Gi1Chain, z: f64) -> Result<f64> {
    let gf = eval_genfun(chain, z)?;
    let n = chain.m;
    Ok((DMatrix::identity(n, n) - gf.a_star).determinant())
}

/// Find the smallest `z` in `(1, phi_A+)` with `chi(z) = 1` by bracketed
/// root finding on `chi(z) - 1`.
///
/// `chi(1) = 1` with `chi'(1) = drift < 0`, so the search starts just above
/// 1 and expands geometrically toward the radius. If no sign change is found
/// up to the cap the result reports how far was scanned.
pub fn find_eta(chain: &Gi1Chain) -> Result<EtaResult> {
    let summary = chain.phase_summary()?;
    if !summary.is_stochastic {
        return Err(Error::PreconditionViolated(
            "phase process must be stochastic".into(),
        ));
    }
    let drift = summary
        .drift
        .ok_or_else(|| Error::PreconditionViolated("drift undefined".into()))?;
    if drift >= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "drift {drift} must be negative"
        )));
    }
    let phi_a = chain.a_plus.radius();
    if phi_a <= 1.0 {
        return Err(Error::PreconditionViolated(format!(
            "phi_A+ = {phi_a} must exceed 1"
        )));
    }
    // No upward interior movement: chi is nonincreasing, the root set is
    // empty.
    let up_mass = chain.a_plus.total_mass()?;
    if up_mass.value.amax() == 0.0 {
        return Ok(EtaResult {
            eta: Eta::Infinite,
            bracket: (1.0, f64::INFINITY),
            residual: 0.0,
            det_residual: 0.0,
            phi_a_plus: phi_a,
        });
    }

    let cap = if phi_a.is_finite() {
        phi_a * (1.0 - 1e-12)
    } else {
        ETA_SCAN_CAP
    };
    let g = |z: f64| -> Result<f64> { Ok(perron(chain, z)?.chi - 1.0) };

    let mut a = 1.0 + ETA_STEP;
    let mut ga = g(a)?;
    while ga >= 0.0 && a - 1.0 > 1e-14 {
        // Root hugging 1: shrink the initial step.
        a = 1.0 + (a - 1.0) / 10.0;
        ga = g(a)?;
    }
    if ga >= 0.0 {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            residual: ga,
        });
    }
    let mut lo = a;
    let mut hi = a;
    let mut found = false;
    loop {
        let next = (hi * 2.0).min(cap);
        let gn = g(next)?;
        if gn > 0.0 {
            lo = hi;
            hi = next;
            found = true;
            break;
        }
        hi = next;
        if next >= cap {
            break;
        }
    }
    if !found {
        return Ok(EtaResult {
            eta: Eta::BeyondScan { bound: cap },
            bracket: (a, cap),
            residual: 0.0,
            det_residual: 0.0,
            phi_a_plus: phi_a,
        });
    }
    let root = brent(
        |z| perron(chain, z).map(|p| p.chi - 1.0).unwrap_or(f64::NAN),
        lo,
        hi,
        ETA_TOL,
        200,
    )?;
    let residual = (perron(chain, root)?.chi - 1.0).abs();
    let det_residual = det_i_minus_a_star(chain, root)?.abs();
    Ok(EtaResult {
        eta: Eta::Root { value: root },
        bracket: (lo, hi),
        residual,
        det_residual,
        phi_a_plus: phi_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn radii_from_tail_laws() {
        let r1 = radii(&fixtures::c1());
        assert!(r1.phi_a_plus.is_infinite() && r1.phi_b_plus.is_infinite());
        let rg = radii(&fixtures::c1_geometric_upper());
        assert!((rg.phi_a_plus - 2.0).abs() < 1e-15);
        let r3 = radii(&fixtures::c3());
        assert!((r3.phi_b_plus - 1.0).abs() < 1e-15);
        assert!(r3.phi_a_plus.is_infinite());
    }

    #[test]
    fn genfun_matches_direct_evaluation() {
        let c1 = fixtures::c1();
        let at1 = eval_genfun(&c1, 1.0).unwrap();
        assert!((at1.a_star[(0, 0)] - 1.0).abs() < 1e-14);
        let at2 = eval_genfun(&c1, 2.0).unwrap();
        assert!((at2.a_star[(0, 0)] - (0.4 / 2.0 + 0.4 + 0.2 * 2.0)).abs() < 1e-14);

        let c4 = fixtures::c4();
        let at3 = eval_genfun(&c4, 3.0).unwrap();
        let row: f64 = at3.a_star.row(0).iter().sum();
        assert!((row - (0.45 / 3.0 + 0.4 + 0.15 * 3.0)).abs() < 1e-13);
    }

    #[test]
    fn genfun_rejects_out_of_domain() {
        let cg = fixtures::c1_geometric_upper();
        assert!(matches!(
            eval_genfun(&cg, 2.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(eval_genfun(&cg, 1.9999).is_ok());
    }

    #[test]
    fn perron_matches_scalar_formula() {
        let c1 = fixtures::c1();
        let p = perron(&c1, 1.0).unwrap();
        assert!((p.chi - 1.0).abs() < 1e-12);
        assert!((p.y[0] - 1.0).abs() < 1e-12);
        let p = perron(&c1, 1.5).unwrap();
        assert!((p.chi - (0.4 / 1.5 + 0.4 + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn perron_c4_at_one_is_stochastic_pair() {
        let p = perron(&fixtures::c4(), 1.0).unwrap();
        assert!((p.chi - 1.0).abs() < 1e-11);
        assert!((p.y[0] - 1.0).abs() < 1e-8);
        assert!((p.y[1] - 1.0).abs() < 1e-8);
        let norm = eval_genfun(&fixtures::c4(), 1.0).unwrap().a_star.amax();
        assert!(p.residual <= 1e-10 * norm);
    }

    #[test]
    fn chi_derivative_matches_drift() {
        assert!((chi_derivative_at_one(&fixtures::c1()).unwrap() - (-0.2)).abs() < 1e-9);
        assert!((chi_derivative_at_one(&fixtures::c4()).unwrap() - (-0.3)).abs() < 1e-9);
        assert!(chi_derivative_at_one(&fixtures::c1_zero_drift())
            .unwrap()
            .abs() < 1e-9);
    }

    #[test]
    fn eta_c1_is_two() {
        let r = find_eta(&fixtures::c1()).unwrap();
        let root = r.eta.root().unwrap();
        assert!((root - 2.0).abs() < 1e-8, "eta = {root}");
        assert!(r.det_residual <= 1e-8);
    }

    #[test]
    fn eta_c3_equals_c1() {
        // Boundary blocks do not enter A*(z).
        let r = find_eta(&fixtures::c3()).unwrap();
        assert!((r.eta.root().unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn eta_c4_is_three() {
        let r = find_eta(&fixtures::c4()).unwrap();
        let root = r.eta.root().unwrap();
        assert!((root - 3.0).abs() < 1e-8, "eta = {root}");
        assert!(r.det_residual <= 1e-8);
    }

    #[test]
    fn eta_geometric_tail_root_inside_radius() {
        // 0.55 z^2 - 1.25 z + 0.7 = 0 has roots 1 and 14/11.
        let r = find_eta(&fixtures::c1_geometric_upper()).unwrap();
        assert!((r.eta.root().unwrap() - 14.0 / 11.0).abs() < 1e-8);
    }

    #[test]
    fn eta_beyond_scan_for_vanishing_up_mass() {
        // Up-step mass 1e-7: chi crosses 1 only near z = 3e6, beyond the
        // scan cap, so the result reports the scanned bound.
        let spec = crate::chain::ChainSpec {
            m: 1,
            m0: 1,
            a0: vec![vec![0.7 - 1e-7]],
            b0: vec![vec![0.9]],
            a_plus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![1e-7]]],
                tail: crate::chain::TailSpec::Finite,
            },
            a_minus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.3]]],
                tail: crate::chain::TailSpec::Finite,
            },
            b_plus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.1]]],
                tail: crate::chain::TailSpec::Finite,
            },
            b_minus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.3]]],
                tail: crate::chain::TailSpec::Finite,
            },
        };
        let chain = crate::chain::Gi1Chain::from_spec(&spec).unwrap();
        let r = find_eta(&chain).unwrap();
        match r.eta {
            Eta::BeyondScan { bound } => assert_eq!(bound, ETA_SCAN_CAP),
            other => panic!("expected a beyond-scan report, got {other:?}"),
        }
        assert!(r.eta.lower_bound() >= ETA_SCAN_CAP);
    }

    #[test]
    fn eta_infinite_without_upward_interior_moves() {
        // No interior up-moves at all: chi is nonincreasing in z, the root
        // set is provably empty.
        let spec = crate::chain::ChainSpec {
            m: 1,
            m0: 1,
            a0: vec![vec![0.6]],
            b0: vec![vec![0.8]],
            a_plus: crate::chain::SequenceSpec {
                blocks: vec![],
                tail: crate::chain::TailSpec::Finite,
            },
            a_minus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.4]]],
                tail: crate::chain::TailSpec::Finite,
            },
            b_plus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.2]]],
                tail: crate::chain::TailSpec::Finite,
            },
            b_minus: crate::chain::SequenceSpec {
                blocks: vec![vec![vec![0.4]]],
                tail: crate::chain::TailSpec::Finite,
            },
        };
        let chain = crate::chain::Gi1Chain::from_spec(&spec).unwrap();
        let r = find_eta(&chain).unwrap();
        assert_eq!(r.eta, Eta::Infinite);
    }

    #[test]
    fn eta_preconditions() {
        assert!(matches!(
            find_eta(&fixtures::c2()),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            find_eta(&fixtures::c1_zero_drift()),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn chi_below_one_inside_decay_interval() {
        // Sampled z in (1, eta): chi(z) < 1.
        for chain in [fixtures::c1(), fixtures::c4()] {
            let eta = find_eta(&chain).unwrap().eta.root().unwrap();
            for i in 1..=50 {
                let z = 1.0 + (eta - 1.0) * i as f64 / 51.0;
                let chi = perron(&chain, z).unwrap().chi;
                assert!(chi < 1.0, "chi({z}) = {chi}");
            }
        }
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let c4 = fixtures::c4();
        let a = perron(&c4, 1.7).unwrap();
        let b = perron(&c4, 1.7 * 1.0).unwrap();
        assert_eq!(a.chi.to_bits(), b.chi.to_bits());
        assert_eq!(a.y[0].to_bits(), b.y[0].to_bits());
        let ra = find_eta(&c4).unwrap();
        let rb = find_eta(&c4).unwrap();
        assert_eq!(
            ra.eta.root().unwrap().to_bits(),
            rb.eta.root().unwrap().to_bits()
        );
    }
}
