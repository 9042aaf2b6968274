//! Ergodicity classification: one verdict composed from the substochastic
//! test, the drift sign, the upward radii, and the block-moment scan, with
//! certificates attached as evidence.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::certificates;
use crate::chain::{BlockMoment, Gi1Chain};
use crate::error::{Error, Result};
use crate::hitting::partial_sum_verdict;
use crate::spectral::{self, Eta};
use crate::stationary;

/// Strength-ordered verdicts: substochastic phase implies geometric decay,
/// which implies every polynomial degree, which implies plain ergodicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    StronglyErgodic,
    GeometricallyErgodic,
    PolynomiallyErgodic { degree: u32, at_cap: bool },
    Ergodic,
    NotPositiveRecurrent,
    Indeterminate,
}

impl Verdict {
    /// Rank in the implication order (higher is stronger).
    pub fn rank(&self) -> u8 {
        match self {
            Verdict::StronglyErgodic => 4,
            Verdict::GeometricallyErgodic => 3,
            Verdict::PolynomiallyErgodic { .. } => 2,
            Verdict::Ergodic => 1,
            Verdict::NotPositiveRecurrent | Verdict::Indeterminate => 0,
        }
    }
}

/// Serializable drift-certificate summary.
#[derive(Debug, Clone, Serialize)]
pub struct DriftCertificateSummary {
    pub z: f64,
    pub y: Vec<f64>,
    pub alpha: f64,
    pub chi: f64,
    pub delta: f64,
    pub threshold: usize,
    pub lambda: f64,
}

impl From<&certificates::DriftCertificate> for DriftCertificateSummary {
    fn from(c: &certificates::DriftCertificate) -> Self {
        DriftCertificateSummary {
            z: c.z,
            y: c.y.iter().copied().collect(),
            alpha: c.alpha,
            chi: c.chi,
            delta: c.delta,
            threshold: c.threshold,
            lambda: c.lambda,
        }
    }
}

/// Serializable strong-certificate summary.
#[derive(Debug, Clone, Serialize)]
pub struct StrongCertificateSummary {
    pub bound: f64,
    pub bound_vector: Vec<f64>,
    pub iterations_to_converge: usize,
    pub iteration_gap: f64,
}

impl From<&certificates::StrongCertificate> for StrongCertificateSummary {
    fn from(c: &certificates::StrongCertificate) -> Self {
        StrongCertificateSummary {
            bound: c.bound,
            bound_vector: c.bound_vector.iter().copied().collect(),
            iterations_to_converge: c.iterations_to_converge,
            iteration_gap: c.iteration_gap,
        }
    }
}

/// Classification result with per-criterion evidence.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Weaker classes implied by the verdict.
    pub implied: Vec<&'static str>,
    pub evidence: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_certificate: Option<DriftCertificateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong_certificate: Option<StrongCertificateSummary>,
}

fn finite_or_tag(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

/// Classify the chain: substochastic phase first, then drift sign, then the
/// geometric-regime radii test, then the block-moment scan up to
/// `max_degree`.
pub fn classify(chain: &Gi1Chain, max_degree: u32) -> Result<ErgodicityReport> {
    let mut evidence = BTreeMap::new();
    let mut warnings = Vec::new();

    let (irr, aper) = chain.truncated_irreducible_aperiodic();
    warnings.push(
        "irreducibility/aperiodicity certified only on a truncated level window (heuristic)"
            .to_string(),
    );
    if !irr || !aper {
        warnings.push(format!(
            "truncated window check failed: irreducible = {irr}, aperiodic = {aper}"
        ));
    }

    let summary = match chain.phase_summary() {
        Ok(s) => s,
        Err(Error::DriftUndefined(msg)) => {
            warnings.push(format!(
                "mean level increment undefined ({msg}); no criterion applies"
            ));
            return Ok(ErgodicityReport {
                verdict: Verdict::Indeterminate,
                implied: vec![],
                evidence,
                warnings,
                drift_certificate: None,
                strong_certificate: None,
            });
        }
        Err(e) => return Err(e),
    };
    let row_sums: Vec<f64> = (0..chain.m)
        .map(|r| summary.a.row(r).iter().sum())
        .collect();
    evidence.insert(
        "phase_row_sums".into(),
        json!(row_sums),
    );

    if !summary.is_stochastic {
        let cert = certificates::build_strong_certificate(chain)?;
        evidence.insert("strong_bound".into(), json!(cert.bound));
        return Ok(ErgodicityReport {
            verdict: Verdict::StronglyErgodic,
            implied: vec![
                "geometrically-ergodic",
                "polynomially-ergodic (every degree)",
                "ergodic",
            ],
            evidence,
            warnings,
            drift_certificate: None,
            strong_certificate: Some((&cert).into()),
        });
    }

    let drift = summary.drift.expect("stochastic summary carries drift");
    evidence.insert("drift".into(), json!(drift));
    if drift >= 0.0 {
        warnings.push(
            "drift sign only: null recurrence and transience are not distinguished".to_string(),
        );
        return Ok(ErgodicityReport {
            verdict: Verdict::NotPositiveRecurrent,
            implied: vec![],
            evidence,
            warnings,
            drift_certificate: None,
            strong_certificate: None,
        });
    }

    let radii = spectral::radii(chain);
    evidence.insert("phi_a_plus".into(), finite_or_tag(radii.phi_a_plus));
    evidence.insert("phi_b_plus".into(), finite_or_tag(radii.phi_b_plus));

    if radii.phi_a_plus.min(radii.phi_b_plus) > 1.0 {
        let eta = spectral::find_eta(chain)?;
        match eta.eta {
            Eta::Root { value } => {
                evidence.insert("eta".into(), json!(value));
                evidence.insert("eta_det_residual".into(), json!(eta.det_residual));
            }
            Eta::BeyondScan { bound } => {
                evidence.insert("eta".into(), json!(format!("> {bound:e}")));
            }
            Eta::Infinite => {
                evidence.insert("eta".into(), json!("inf"));
            }
        }
        let cert = certificates::build_drift_certificate(chain, None)?;
        evidence.insert("certificate_z".into(), json!(cert.z));
        evidence.insert("certificate_lambda".into(), json!(cert.lambda));
        evidence.insert("certificate_threshold".into(), json!(cert.threshold));
        return Ok(ErgodicityReport {
            verdict: Verdict::GeometricallyErgodic,
            implied: vec!["polynomially-ergodic (every degree)", "ergodic"],
            evidence,
            warnings,
            drift_certificate: Some((&cert).into()),
            strong_certificate: None,
        });
    }

    // Polynomial scan; the standing hypothesis (finite first moments both
    // upward families) must hold before any degree is meaningful.
    if !chain.b_plus.moment(1).is_finite() {
        warnings.push("mean upward boundary jump diverges; mean return time to level 0 is infinite".into());
        return Ok(ErgodicityReport {
            verdict: Verdict::NotPositiveRecurrent,
            implied: vec![],
            evidence,
            warnings,
            drift_certificate: None,
            strong_certificate: None,
        });
    }

    let mut degree: u32 = 1;
    let mut moment_table = Vec::new();
    for l in 2..=max_degree {
        let a_fin = chain.a_plus.moment(l).is_finite();
        let b_fin = chain.b_plus.moment(l).is_finite();
        moment_table.push(json!({
            "l": l,
            "a_plus_finite": a_fin,
            "b_plus_finite": b_fin,
        }));
        if a_fin && b_fin {
            degree = l;
        } else {
            break;
        }
    }
    evidence.insert("block_moments".into(), Value::Array(moment_table));
    if degree == 1 {
        return Ok(ErgodicityReport {
            verdict: Verdict::Ergodic,
            implied: vec![],
            evidence,
            warnings,
            drift_certificate: None,
            strong_certificate: None,
        });
    }
    let at_cap = degree == max_degree;
    if at_cap {
        warnings.push(format!(
            "moment scan capped at degree {max_degree}; the true degree may be higher"
        ));
    }
    Ok(ErgodicityReport {
        verdict: Verdict::PolynomiallyErgodic { degree, at_cap },
        implied: vec!["ergodic"],
        evidence,
        warnings,
        drift_certificate: None,
        strong_certificate: None,
    })
}

/// Evaluation of the stationary-moment criterion at one degree, with the
/// block-moment side for cross-checking.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionEval {
    pub l: u32,
    /// Partial sums `sum_{i<=C} i^l pi_i e` at `C = L/4, L/2, L`.
    pub partial_sums: [f64; 3],
    /// "converged" (relative increment < 1e-6), "diverging" (increments
    /// growing), or "inconclusive".
    pub stationary_verdict: &'static str,
    /// Are both upward block families l-moment finite?
    pub block_moment_finite: bool,
    /// Do the two criteria point the same way? An inconclusive partial-sum
    /// verdict abstains rather than disagreeing.
    pub agree: bool,
}

/// Tail-sum criterion on the truncated stationary law, cross-checked
/// against the block-moment criterion at the same degree.
pub fn stationary_moment_criterion(
    chain: &Gi1Chain,
    l: u32,
    levels: usize,
) -> Result<CriterionEval> {
    let solution = stationary::truncate_and_solve(chain, levels)?;
    stationary_moment_criterion_from(chain, &solution, l)
}

/// Same as [`stationary_moment_criterion`] with a precomputed solution.
pub fn stationary_moment_criterion_from(
    chain: &Gi1Chain,
    solution: &stationary::StationarySolution,
    l: u32,
) -> Result<CriterionEval> {
    let sums = stationary::stationary_moment(solution, l);
    let verdict = match partial_sum_verdict(&sums) {
        "stabilizing" => "converged",
        "growing" => "diverging",
        other => other,
    };
    let block_moment_finite = matches!(chain.a_plus.moment(l), BlockMoment::Finite(_))
        && matches!(chain.b_plus.moment(l), BlockMoment::Finite(_));
    let agree = match verdict {
        "converged" => block_moment_finite,
        "diverging" => !block_moment_finite,
        _ => true,
    };
    Ok(CriterionEval {
        l,
        partial_sums: sums,
        stationary_verdict: verdict,
        block_moment_finite,
        agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainSpec, SequenceSpec, TailSpec};
    use crate::fixtures;

    /// Stochastic scalar chain whose interior upward tail is a power law
    /// with exponent 1.5: the first block moment diverges, so no drift is
    /// defined.
    fn heavy_interior() -> Gi1Chain {
        // zeta(1.5) = 2.6123753486854883; up mass 0.1.
        let c = 0.1 / 2.612_375_348_685_488;
        let spec = ChainSpec {
            m: 1,
            m0: 1,
            a0: vec![vec![0.4]],
            b0: vec![vec![0.9]],
            a_plus: SequenceSpec {
                blocks: vec![],
                tail: TailSpec::PowerLaw {
                    start: 0,
                    alpha: 1.5,
                    coeff: vec![vec![c]],
                },
            },
            a_minus: SequenceSpec {
                blocks: vec![vec![vec![0.5]]],
                tail: TailSpec::Finite,
            },
            b_plus: SequenceSpec {
                blocks: vec![vec![vec![0.1]]],
                tail: TailSpec::Finite,
            },
            b_minus: SequenceSpec {
                blocks: vec![vec![vec![0.5]]],
                tail: TailSpec::Finite,
            },
        };
        Gi1Chain::from_spec(&spec).expect("heavy interior chain is valid")
    }

    /// C1 with part of the boundary jump mass moved into a power-law tail.
    fn c1_with_heavy_boundary() -> Gi1Chain {
        // B_plus: 0.15 at lag 1 plus C k^{-4.5} beyond, total mass 0.05.
        let c = 0.05 / (1.054_707_510_761_454_3 - 1.0);
        let mut spec = fixtures::c1_spec();
        spec.b_plus = SequenceSpec {
            blocks: vec![vec![vec![0.15]]],
            tail: TailSpec::PowerLaw {
                start: 1,
                alpha: 4.5,
                coeff: vec![vec![c]],
            },
        };
        Gi1Chain::from_spec(&spec).expect("heavy boundary variant is valid")
    }

    #[test]
    fn c2_is_strongly_ergodic_with_bound_ten() {
        let report = classify(&fixtures::c2(), 6).unwrap();
        assert_eq!(report.verdict, Verdict::StronglyErgodic);
        let cert = report.strong_certificate.unwrap();
        assert!((cert.bound - 10.0).abs() < 1e-9);
    }

    #[test]
    fn c1_is_geometrically_ergodic_with_midpoint_certificate() {
        let report = classify(&fixtures::c1(), 6).unwrap();
        assert_eq!(report.verdict, Verdict::GeometricallyErgodic);
        let eta = report.evidence["eta"].as_f64().unwrap();
        assert!((eta - 2.0).abs() < 1e-8);
        let cert = report.drift_certificate.unwrap();
        assert!((cert.z - 2f64.sqrt()).abs() < 1e-9);
        assert!((report.evidence["drift"].as_f64().unwrap() - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn c3_is_polynomially_ergodic_of_degree_three() {
        let report = classify(&fixtures::c3(), 6).unwrap();
        assert_eq!(
            report.verdict,
            Verdict::PolynomiallyErgodic {
                degree: 3,
                at_cap: false
            }
        );
    }

    #[test]
    fn zero_drift_not_positive_recurrent_with_warning() {
        let report = classify(&fixtures::c1_zero_drift(), 6).unwrap();
        assert_eq!(report.verdict, Verdict::NotPositiveRecurrent);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("not distinguished")));
    }

    #[test]
    fn heavy_interior_tail_is_indeterminate() {
        let report = classify(&heavy_interior(), 6).unwrap();
        assert_eq!(report.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn far_tail_mass_never_upgrades_the_verdict() {
        let base = classify(&fixtures::c1(), 6).unwrap();
        let heavier = classify(&c1_with_heavy_boundary(), 6).unwrap();
        assert!(heavier.verdict.rank() <= base.verdict.rank());
        assert_eq!(
            heavier.verdict,
            Verdict::PolynomiallyErgodic {
                degree: 3,
                at_cap: false
            }
        );
    }

    #[test]
    fn classification_is_deterministic() {
        let a = serde_json::to_string(&classify(&fixtures::c1(), 6).unwrap()).unwrap();
        let b = serde_json::to_string(&classify(&fixtures::c1(), 6).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&classify(&fixtures::c3(), 6).unwrap()).unwrap();
        let d = serde_json::to_string(&classify(&fixtures::c3(), 6).unwrap()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn geometric_chain_stationary_criterion_converges_and_agrees() {
        let chain = fixtures::c1();
        let eval = stationary_moment_criterion(&chain, 3, 400).unwrap();
        assert_eq!(eval.stationary_verdict, "converged");
        assert!(eval.block_moment_finite);
        assert!(eval.agree);
        // l = 0 partial sums converge to the normalization.
        let eval0 = stationary_moment_criterion(&chain, 0, 400).unwrap();
        assert!((eval0.partial_sums[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn geometric_tail_bounds_certificate_rate() {
        // The stationary tail rate is at most 1/z for any admissible
        // certificate point z.
        let chain = fixtures::c1();
        let cert = certificates::build_drift_certificate(&chain, None).unwrap();
        let sol = stationary::truncate_and_solve(&chain, 200).unwrap();
        let fit = stationary::tail_fit(&sol).unwrap();
        assert!(fit.rate <= 1.0 / cert.z + 1e-9);
    }
}
