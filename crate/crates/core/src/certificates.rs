//! Machine-checkable ergodicity certificates.
//!
//! Geometric regime: a drift function `V(i,r) = z^i y_r` built from the
//! Perron pair at a point `1 < z < min(phi_A+, phi_B+, eta)`, together with
//! the finite exception set `L_{<=N}` and contraction factor
//! `lambda = 1 - delta/2`. The verifier recomputes `P V` level by level with
//! exact tail sums, so no truncation error enters the certificate.
//!
//! Strong regime: the phase process is substochastic, and
//! `(I - A)^{-1} e` bounds every mean hitting time to the boundary; both the
//! direct solve and the minimal-nonnegative-solution iteration are computed
//! and cross-checked.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::Gi1Chain;
use crate::error::{Error, Result};
use crate::spectral::{self, Eta};

/// Geometric-ergodicity drift certificate.
#[derive(Debug, Clone)]
pub struct DriftCertificate {
    pub z: f64,
    /// Perron eigenvector at `z`, min entry 1.
    pub y: DVector<f64>,
    /// `max_r y_r >= 1`.
    pub alpha: f64,
    pub chi: f64,
    /// `1 - chi(z) > 0`.
    pub delta: f64,
    /// Exception-set threshold: the finite set is `L_{<=threshold}`.
    pub threshold: usize,
    /// Contraction factor `1 - delta/2`.
    pub lambda: f64,
}

/// Strong-ergodicity certificate: uniform hitting-time bound.
#[derive(Debug, Clone)]
pub struct StrongCertificate {
    /// `(I - A)^{-1} e`, per starting phase.
    pub bound_vector: DVector<f64>,
    /// Max entry of the bound vector.
    pub bound: f64,
    /// Steps of the minimal-solution iteration until the sup-norm increment
    /// fell below 1e-12.
    pub iterations_to_converge: usize,
    /// Sup-norm gap between the iteration limit and the direct solve.
    pub iteration_gap: f64,
}

/// Per-level outcome of the drift verification.
#[derive(Debug, Clone, Serialize)]
pub struct LevelMargin {
    pub level: usize,
    /// `min_r (lambda y_r - PV(level,r)/z^level)`: the contraction margin
    /// per unit of the drift function. Nonnegative means the level passes.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub threshold: usize,
    pub lambda: f64,
    /// `PV/V` head values for levels `0..=threshold` (finiteness check).
    pub head_pv_over_v: Vec<f64>,
    /// Margins for levels `threshold+1 ..= i_max`.
    pub margins: Vec<LevelMargin>,
}

/// Admissible upper end for certificate points.
fn z_ceiling(chain: &Gi1Chain) -> Result<f64> {
    let radii = spectral::radii(chain);
    let min_radius = radii.phi_a_plus.min(radii.phi_b_plus);
    if min_radius <= 1.0 {
        return Err(Error::NotGeometricRegime { radius: min_radius });
    }
    let eta = spectral::find_eta(chain)?;
    let eta_bound = match eta.eta {
        Eta::Root { value } => value,
        Eta::BeyondScan { bound } => bound,
        Eta::Infinite => f64::INFINITY,
    };
    Ok(min_radius.min(eta_bound).min(spectral::ETA_SCAN_CAP))
}

/// Build the drift certificate at `z`, or at the geometric midpoint of the
/// admissible interval `(1, min(phi_A+, phi_B+, eta))` when `z` is `None`.
pub fn build_drift_certificate(chain: &Gi1Chain, z: Option<f64>) -> Result<DriftCertificate> {
    let summary = chain.phase_summary()?;
    if !summary.is_stochastic {
        return Err(Error::PreconditionViolated(
            "phase process is not stochastic; use the strong certificate".into(),
        ));
    }
    match summary.drift {
        Some(d) if d < 0.0 => {}
        Some(d) => {
            return Err(Error::NotPositiveRecurrent(format!(
                "drift {d} is nonnegative"
            )))
        }
        None => return Err(Error::DriftUndefined("first block moment diverges".into())),
    }
    let ceiling = z_ceiling(chain)?;
    let z = match z {
        Some(z) => {
            if !(z > 1.0 && z < ceiling) {
                return Err(Error::PreconditionViolated(format!(
                    "z = {z} must lie strictly inside (1, {ceiling})"
                )));
            }
            z
        }
        None => ceiling.sqrt(),
    };
    let pair = spectral::perron(chain, z)?;
    let delta = 1.0 - pair.chi;
    if delta <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "chi({z}) = {} is not below 1",
            pair.chi
        )));
    }
    let alpha = pair.y.max();
    let threshold = (((2.0 * alpha).ln() - delta.ln()) / z.ln()).ceil() as usize;
    Ok(DriftCertificate {
        z,
        y: pair.y,
        alpha,
        chi: pair.chi,
        delta,
        threshold,
        lambda: 1.0 - delta / 2.0,
    })
}

/// `PV(i,.) / z^i` for an interior level `i >= 1`, with exact tail sums.
///
/// The drift function takes the value 1 on boundary phases, `z^i y_r`
/// elsewhere, so
/// `PV(i,r) = (B_{-i} ones)_r + z^i [A*(z) Y - sum_{k>=i} z^{-k} A_{-k} Y]_r`.
fn pv_over_v_interior(
    chain: &Gi1Chain,
    cert: &DriftCertificate,
    a_star_y: &DVector<f64>,
    i: usize,
) -> DVector<f64> {
    let z = cert.z;
    let ones0 = DVector::from_element(chain.m0, 1.0);
    let boundary_part = chain.b_minus.block(i) * ones0 * z.powi(-(i as i32));
    // Down-moves deeper than the current level are not part of the row;
    // remove their generating-function contribution.
    let correction = chain
        .a_minus
        .genfun_from(1.0 / z, i)
        .expect("1/z < 1 stays inside the downward domain")
        .value;
    boundary_part + a_star_y - correction * &cert.y
}

/// Verify the drift condition: contraction at every level in
/// `(threshold, i_max]` and finiteness of `PV` on `L_{<=threshold}`.
pub fn verify_drift_condition(
    chain: &Gi1Chain,
    cert: &DriftCertificate,
    i_max: usize,
) -> Result<VerificationReport> {
    let z = cert.z;
    let gf = spectral::eval_genfun(chain, z)?;
    let a_star_y = &gf.a_star * &cert.y;

    let mut head = Vec::with_capacity(cert.threshold + 1);
    // Level 0: PV(0,j) = (B0 ones)_j + (B*_+(z) Y)_j, finite because
    // z < phi_B+.
    let b_star = gf.b_star_plus.ok_or(Error::OutOfDomain {
        z,
        domain: "z must lie inside the boundary radius".into(),
    })?;
    let ones0 = DVector::from_element(chain.m0, 1.0);
    let pv0 = &chain.b0 * ones0 + b_star * &cert.y;
    let head0 = pv0.max();
    if !head0.is_finite() {
        return Err(Error::CertificateViolated {
            level: 0,
            phase: 0,
            margin: f64::NEG_INFINITY,
        });
    }
    head.push(head0);
    for i in 1..=cert.threshold {
        let pv_v = pv_over_v_interior(chain, cert, &a_star_y, i);
        let worst = pv_v.max();
        if !worst.is_finite() {
            return Err(Error::CertificateViolated {
                level: i,
                phase: 0,
                margin: f64::NEG_INFINITY,
            });
        }
        head.push(worst);
    }

    let mut margins = Vec::new();
    for i in cert.threshold + 1..=i_max {
        let pv_v = pv_over_v_interior(chain, cert, &a_star_y, i);
        let mut margin = f64::INFINITY;
        for r in 0..chain.m {
            let m_r = cert.lambda * cert.y[r] - pv_v[r];
            if m_r < margin {
                margin = m_r;
            }
            if m_r < -1e-12 {
                return Err(Error::CertificateViolated {
                    level: i,
                    phase: r,
                    margin: m_r,
                });
            }
        }
        margins.push(LevelMargin { level: i, margin });
    }
    Ok(VerificationReport {
        threshold: cert.threshold,
        lambda: cert.lambda,
        head_pv_over_v: head,
        margins,
    })
}

/// Uniform hitting-time bound for substochastic phase processes:
/// `(I - A)^{-1} e` by direct solve AND by the monotone iteration
/// `X <- A X + e` from zero; the two must agree to 1e-9.
pub fn build_strong_certificate(chain: &Gi1Chain) -> Result<StrongCertificate> {
    let summary = chain.phase_summary()?;
    if summary.is_stochastic {
        return Err(Error::PhaseStochastic);
    }
    let m = chain.m;
    let ones = DVector::from_element(m, 1.0);
    let i_minus_a = DMatrix::identity(m, m) - &summary.a;
    let direct = i_minus_a
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::SolveFailure("(I - A) is singular".into()))?;
    if direct.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::SolveFailure(
            "(I - A)^{-1} e is not a finite nonnegative vector".into(),
        ));
    }

    let mut x = DVector::zeros(m);
    let mut iterations = 0usize;
    loop {
        let next = &summary.a * &x + &ones;
        // The iterates increase monotonically toward the minimal solution
        // and stay below the direct bound.
        for r in 0..m {
            debug_assert!(next[r] >= x[r] - 1e-12);
            debug_assert!(next[r] <= direct[r] + 1e-9 * direct[r].abs().max(1.0));
        }
        let delta = (&next - &x).amax();
        x = next;
        iterations += 1;
        if delta <= 1e-12 {
            break;
        }
        if iterations > 10_000_000 {
            return Err(Error::ConvergenceFailure {
                iterations,
                residual: delta,
            });
        }
    }
    let gap = (&x - &direct).amax();
    if gap > 1e-9 {
        return Err(Error::SolveFailure(format!(
            "minimal-solution iteration disagrees with the direct solve by {gap:e}"
        )));
    }
    Ok(StrongCertificate {
        bound: direct.max(),
        bound_vector: direct,
        iterations_to_converge: iterations,
        iteration_gap: gap,
    })
}
