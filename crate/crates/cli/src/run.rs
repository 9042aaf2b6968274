//! Subcommand implementations.

use ergokit::certificates;
use ergokit::classifier;
use ergokit::hitting;
use ergokit::spectral::{self, Eta};
use ergokit::stationary;
use serde_json::{json, Value};

use crate::output::{f17, jf, print_or_write};
use crate::{exit_code_for, load_chain, ChainArg, Cli, Command};

pub type CliResult = Result<(), (u8, String)>;

fn analysis<T>(r: Result<T, ergokit::Error>) -> Result<T, (u8, String)> {
    r.map_err(|e| (exit_code_for(&e), e.to_string()))
}

fn parse_state(text: &str) -> Result<(usize, usize), (u8, String)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err((2, format!("expected level,phase, got {text}")));
    }
    let level = parts[0]
        .trim()
        .parse()
        .map_err(|e| (2u8, format!("bad level: {e}")))?;
    let phase = parts[1]
        .trim()
        .parse()
        .map_err(|e| (2u8, format!("bad phase: {e}")))?;
    Ok((level, phase))
}

pub fn dispatch(cli: Cli) -> (bool, CliResult) {
    match cli.command {
        Command::Validate(arg) => (arg.json, validate(&arg)),
        Command::Classify { chain, max_degree } => (chain.json, classify(&chain, max_degree)),
        Command::Eta(arg) => (arg.json, eta(&arg)),
        Command::Chi { chain, grid } => (chain.json, chi(&chain, &grid)),
        Command::Certificate {
            chain,
            kind,
            z,
            verify_levels,
            margins_csv,
        } => (
            chain.json,
            certificate(&chain, &kind, z, verify_levels, &margins_csv),
        ),
        Command::Stationary {
            chain,
            levels,
            tail_fit,
            moments,
            csv,
        } => (
            chain.json,
            stationary_cmd(&chain, levels, tail_fit, &moments, &csv),
        ),
        Command::Hitting {
            chain,
            levels,
            lmax,
            mc,
            seed,
            start,
        } => (chain.json, hitting_cmd(&chain, levels, lmax, mc, seed, &start)),
        Command::TvCurve {
            chain,
            init,
            horizon,
            levels,
        } => (chain.json, tv_curve(&chain, &init, horizon, levels)),
        Command::Report {
            chain,
            max_degree,
            levels,
            horizon,
            out,
        } => (chain.json, report(&chain, max_degree, levels, horizon, &out)),
    }
}

fn validate(arg: &ChainArg) -> CliResult {
    let chain = load_chain(arg)?;
    let (irr, aper) = chain.truncated_irreducible_aperiodic();
    if arg.json {
        println!(
            "{}",
            json!({
                "valid": true,
                "m": chain.m,
                "m0": chain.m0,
                "eps_row": chain.eps_row,
                "window_irreducible": irr,
                "window_aperiodic": aper,
            })
        );
    } else {
        println!("valid chain: m = {}, m0 = {}", chain.m, chain.m0);
        println!("row-sum tolerance: {}", f17(chain.eps_row));
        println!("truncated-window irreducible/aperiodic (heuristic): {irr}/{aper}");
    }
    Ok(())
}

fn classify(arg: &ChainArg, max_degree: u32) -> CliResult {
    let chain = load_chain(arg)?;
    let report = analysis(classifier::classify(&chain, max_degree))?;
    if arg.json {
        println!("{}", serde_json::to_string(&report).unwrap());
    } else {
        println!("verdict: {:?}", report.verdict);
        if !report.implied.is_empty() {
            println!("implies: {}", report.implied.join(", "));
        }
        println!("evidence:");
        for (k, v) in &report.evidence {
            println!("  {k}: {v}");
        }
        if let Some(c) = &report.drift_certificate {
            println!(
                "drift certificate: z = {}, lambda = {}, threshold = {}",
                f17(c.z),
                f17(c.lambda),
                c.threshold
            );
        }
        if let Some(c) = &report.strong_certificate {
            println!("strong certificate: bound = {}", f17(c.bound));
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn eta(arg: &ChainArg) -> CliResult {
    let chain = load_chain(arg)?;
    let result = analysis(spectral::find_eta(&chain))?;
    let eta_value = match result.eta {
        Eta::Root { value } => jf(value),
        Eta::BeyondScan { bound } => json!(format!("> {bound:e}")),
        Eta::Infinite => json!("inf"),
    };
    let doc = json!({
        "eta": eta_value,
        "residual": jf(result.residual),
        "bracket": [jf(result.bracket.0), jf(result.bracket.1)],
        "det_residual": jf(result.det_residual),
        "phi_A_plus": jf(result.phi_a_plus),
    });
    println!("{doc}");
    Ok(())
}

fn chi(arg: &ChainArg, grid: &str) -> CliResult {
    let chain = load_chain(arg)?;
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err((2, format!("expected z0:z1:n, got {grid}")));
    }
    let z0: f64 = parts[0].parse().map_err(|e| (2u8, format!("bad z0: {e}")))?;
    let z1: f64 = parts[1].parse().map_err(|e| (2u8, format!("bad z1: {e}")))?;
    let n: usize = parts[2].parse().map_err(|e| (2u8, format!("bad n: {e}")))?;
    if n < 2 || !z0.is_finite() || !z1.is_finite() || z1 <= z0 || z0 <= 0.0 {
        return Err((2, "grid needs z1 > z0 > 0 and n >= 2".into()));
    }
    println!("z,chi,min_Y,max_Y");
    for i in 0..n {
        let z = z0 + (z1 - z0) * i as f64 / (n - 1) as f64;
        let pair = analysis(spectral::perron(&chain, z))?;
        println!(
            "{},{},{},{}",
            f17(z),
            f17(pair.chi),
            f17(pair.y.min()),
            f17(pair.y.max())
        );
    }
    Ok(())
}

fn certificate(
    arg: &ChainArg,
    kind: &str,
    z: Option<f64>,
    verify_levels: usize,
    margins_csv: &Option<String>,
) -> CliResult {
    let chain = load_chain(arg)?;
    match kind {
        "geometric" => {
            let cert = analysis(certificates::build_drift_certificate(&chain, z))?;
            let report = analysis(certificates::verify_drift_condition(
                &chain,
                &cert,
                cert.threshold + verify_levels,
            ))?;
            let doc = json!({
                "kind": "geometric",
                "z": cert.z,
                "y": cert.y.iter().copied().collect::<Vec<f64>>(),
                "alpha": cert.alpha,
                "chi": cert.chi,
                "delta": cert.delta,
                "threshold": cert.threshold,
                "lambda": cert.lambda,
                "verified_levels": report.margins.len(),
                "min_margin": report.margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min),
            });
            let mut csv = String::from("level,margin\n");
            for m in &report.margins {
                csv.push_str(&format!("{},{}\n", m.level, f17(m.margin)));
            }
            if arg.json {
                println!("{doc}");
            } else {
                println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            }
            match margins_csv {
                Some(path) => std::fs::write(path, csv)
                    .map_err(|e| (3u8, format!("cannot write margins: {e}")))?,
                None => {
                    println!();
                    print!("{csv}");
                }
            }
            Ok(())
        }
        "strong" => {
            let cert = analysis(certificates::build_strong_certificate(&chain))?;
            let doc = json!({
                "kind": "strong",
                "bound": cert.bound,
                "bound_vector": cert.bound_vector.iter().copied().collect::<Vec<f64>>(),
                "iterations_to_converge": cert.iterations_to_converge,
                "iteration_gap": cert.iteration_gap,
            });
            if arg.json {
                println!("{doc}");
            } else {
                println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            }
            Ok(())
        }
        other => Err((2, format!("unknown certificate kind {other}"))),
    }
}

fn stationary_cmd(
    arg: &ChainArg,
    levels: usize,
    tail_fit: bool,
    moments: &[u32],
    csv_target: &Option<String>,
) -> CliResult {
    let chain = load_chain(arg)?;
    let sol = analysis(stationary::truncate_and_solve(&chain, levels))?;
    let mut doc = json!({
        "levels": sol.levels,
        "augmentation": sol.augmentation,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "mass_defect": sol.mass_defect,
    });
    if tail_fit {
        let fit = analysis(stationary::tail_fit(&sol))?;
        doc["tail_fit"] = serde_json::to_value(&fit).unwrap();
    }
    if !moments.is_empty() {
        let mut table = Vec::new();
        for &l in moments {
            let sums = stationary::stationary_moment(&sol, l);
            table.push(json!({
                "l": l,
                "partial_sums": sums,
                "verdict": hitting::partial_sum_verdict(&sums),
            }));
        }
        doc["moments"] = Value::Array(table);
    }
    println!("{}", if arg.json { doc.to_string() } else { serde_json::to_string_pretty(&doc).unwrap() });
    let mut csv = String::from("level,phase,pi\n");
    for (i, v) in sol.pi.iter().enumerate() {
        for (r, x) in v.iter().enumerate() {
            csv.push_str(&format!("{i},{r},{}\n", f17(*x)));
        }
    }
    match csv_target {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| (3u8, format!("cannot write csv: {e}")))?
        }
        None => {
            if !arg.json {
                println!();
                print!("{csv}");
            }
        }
    }
    Ok(())
}

fn hitting_cmd(
    arg: &ChainArg,
    levels: usize,
    lmax: u32,
    mc: Option<usize>,
    seed: Option<u64>,
    start: &str,
) -> CliResult {
    let chain = load_chain(arg)?;
    let moments = analysis(hitting::exact_hitting_moments(&chain, levels, lmax))?;
    let mut doc = json!({
        "levels": levels,
        "l_max": lmax,
        "top_absorption": moments.top_absorption,
        "boundary": moments.boundary,
    });
    if let Some(n) = mc {
        let seed = seed.expect("clap enforces seed with --mc");
        let (level, phase) = parse_state(start)?;
        if level == 0 || level > levels {
            return Err((2, "Monte Carlo start must be an interior level within the truncation".into()));
        }
        let exact = moments.interior_at(1, level, phase);
        let (mean, se, capped) = hitting::mc_mean_hitting(&chain, (level as u64, phase), n, seed);
        doc["monte_carlo"] = json!({
            "start": [level, phase],
            "samples": n,
            "seed": seed,
            "mean": mean,
            "std_error": se,
            "capped_fraction": capped,
            "exact": exact,
            "within_3se": (mean - exact).abs() <= 3.0 * se,
        });
    }
    println!("{}", if arg.json { doc.to_string() } else { serde_json::to_string_pretty(&doc).unwrap() });
    if !arg.json {
        println!();
        let mut csv = String::from("level,phase,l,moment\n");
        for l in 1..=lmax {
            for i in 1..=levels.min(50) {
                for r in 0..chain.m {
                    csv.push_str(&format!(
                        "{i},{r},{l},{}\n",
                        f17(moments.interior_at(l, i, r))
                    ));
                }
            }
        }
        print!("{csv}");
    }
    Ok(())
}

fn tv_curve(arg: &ChainArg, init: &str, horizon: usize, levels: usize) -> CliResult {
    let chain = load_chain(arg)?;
    let (level, phase) = parse_state(init)?;
    let curve = analysis(hitting::tv_curve(&chain, levels, (level, phase), horizon))?;
    if arg.json {
        println!(
            "{}",
            json!({
                "init": [level, phase],
                "fitted_rate": curve.fitted_rate,
                "fitted_prefactor": curve.fitted_prefactor,
                "r_squared": curve.r_squared,
                "window": [curve.window.0, curve.window.1],
                "distances": curve.distances,
            })
        );
    } else {
        println!("n,tv");
        for (n, d) in curve.distances.iter().enumerate() {
            println!("{n},{}", f17(*d));
        }
    }
    Ok(())
}

fn report(
    arg: &ChainArg,
    max_degree: u32,
    levels: usize,
    horizon: usize,
    out: &Option<String>,
) -> CliResult {
    let chain = load_chain(arg)?;
    let classification = analysis(classifier::classify(&chain, max_degree))?;

    // The stationary sections are meaningful only for positive recurrent
    // chains; carry the reason through otherwise.
    let stationary_part = match stationary::truncate_and_solve(&chain, levels) {
        Ok(sol) => {
            let fit = stationary::tail_fit(&sol).ok();
            json!({
                "levels": sol.levels,
                "residual": sol.residual,
                "mass_defect": sol.mass_defect,
                "tail_fit": fit.map(|f| serde_json::to_value(&f).unwrap()),
            })
        }
        Err(e @ ergokit::Error::NotPositiveRecurrent(_))
        | Err(e @ ergokit::Error::DriftUndefined(_)) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err((exit_code_for(&e), e.to_string())),
    };
    let tv_part = match hitting::tv_curve(&chain, levels, (1, 0), horizon) {
        Ok(curve) => json!({
            "init": [1, 0],
            "fitted_rate": curve.fitted_rate,
            "r_squared": curve.r_squared,
            "window": [curve.window.0, curve.window.1],
        }),
        Err(e @ ergokit::Error::NotPositiveRecurrent(_))
        | Err(e @ ergokit::Error::DriftUndefined(_))
        | Err(e @ ergokit::Error::HorizonTooShort) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err((exit_code_for(&e), e.to_string())),
    };

    let doc = json!({
        "classification": serde_json::to_value(&classification).unwrap(),
        "stationary": stationary_part,
        "tv_curve": tv_part,
    });
    let rendered = if arg.json {
        doc.to_string() + "\n"
    } else {
        serde_json::to_string_pretty(&doc).unwrap() + "\n"
    };
    print_or_write(out, &rendered).map_err(|e| (3u8, format!("cannot write report: {e}")))?;
    Ok(())
}
