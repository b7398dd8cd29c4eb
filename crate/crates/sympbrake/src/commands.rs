//! The three commands. Each returns an exit code, a JSON report, a text
//! table for `--pretty` and any SVG plots.

use std::f64::consts::PI;
use std::fmt::Write;

use serde_json::{json, Value};
use sympbrake_core::linalg::cis;
use sympbrake_core::maslov::{i_lagrangian, i_omega, m_eps_signature_stable, theorem21_check, Lagrangian, Side};
use sympbrake_core::Error;

use crate::config::RunConfig;
use crate::error::{is_refinement, CliError, EXIT_IDENTITY, EXIT_OK, EXIT_REFINEMENT};
use crate::experiments::{orbit_experiment, OrbitExperiment};
use crate::formats::{HypersurfaceDoc, PathDoc};
use crate::plot::{Chart, Series};
use crate::verify::{run_suite, SuiteReport, VerifyOptions};

pub struct Outcome {
    pub code: u8,
    pub report: Value,
    pub pretty: String,
    /// `(file name, SVG)` pairs for `--plot`.
    pub plots: Vec<(String, String)>,
}

fn envelope(command: &str, cfg: &RunConfig, code: u8, result: Value) -> Value {
    json!({
        "command": command,
        "seed": cfg.seed,
        "tolerances": cfg.tolerances,
        "config": cfg,
        "exit_code": code,
        "result": result,
    })
}

fn read_input(cfg: &RunConfig, what: &str) -> Result<String, CliError> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Input(format!("no {what} document given")))?;
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn refinement(e: Error) -> Result<Value, CliError> {
    match &e {
        Error::RefinementNeeded { t, reason } => Ok(json!({ "t": t, "reason": reason })),
        _ if is_refinement(&e) => Ok(json!({ "reason": e.to_string() })),
        _ => Err(CliError::Input(e.to_string())),
    }
}

pub fn index_path(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let doc = PathDoc::parse(&read_input(cfg, "path")?)?;
    let path = doc.build(cfg.tolerances.input_symplectic)?;
    let run = || -> sympbrake_core::Result<Value> {
        let mut omegas = Vec::new();
        for &theta in &cfg.omega_angles {
            let w = if theta == 0.0 { cis(0.0) } else if theta == PI { sympbrake_core::linalg::C64::new(-1.0, 0.0) } else { cis(theta) };
            let p = i_omega(&path, w)?;
            omegas.push(json!({ "angle": theta, "re": w.re, "im": w.im, "index": p.index, "nullity": p.nullity }));
        }
        let l0 = i_lagrangian(&path, Lagrangian::L0)?;
        let l1 = i_lagrangian(&path, Lagrangian::L1)?;
        let plus = m_eps_signature_stable(path.endpoint(), Side::Plus)?;
        let minus = m_eps_signature_stable(path.endpoint(), Side::Minus)?;
        let t21 = theorem21_check(&path)?;
        Ok(json!({
            "k": doc.k,
            "tau": doc.tau,
            "omega": omegas,
            "l0": l0,
            "l1": l1,
            "m_eps": { "plus": plus, "minus": minus },
            "theorem21": t21,
        }))
    };
    let (code, result) = match run() {
        Ok(v) => (if v["theorem21"]["pass"] == json!(true) { EXIT_OK } else { EXIT_IDENTITY }, v),
        Err(e) => (EXIT_REFINEMENT, json!({ "refinement": refinement(e)? })),
    };
    let mut pretty = String::new();
    if code == EXIT_REFINEMENT {
        let _ = writeln!(pretty, "refinement needed: {}", result["refinement"]);
    } else {
        let _ = writeln!(pretty, "path in Sp({}) on [0, {}]", 2 * doc.k, doc.tau);
        let _ = writeln!(pretty, "{:>12} {:>8} {:>8}", "omega angle", "index", "nullity");
        for o in result["omega"].as_array().into_iter().flatten() {
            let _ = writeln!(pretty, "{:>12.6} {:>8} {:>8}", o["angle"].as_f64().unwrap_or(f64::NAN), o["index"].to_string(), o["nullity"].to_string());
        }
        for key in ["l0", "l1"] {
            let _ = writeln!(pretty, "{:>12} {:>8} {:>8}", key.to_uppercase(), result[key]["index"].to_string(), result[key]["nullity"].to_string());
        }
        let _ = writeln!(pretty, "sgn M_eps: {} (eps > 0), {} (eps < 0)", result["m_eps"]["plus"], result["m_eps"]["minus"]);
        let _ = writeln!(pretty, "index difference identities: {}", if code == EXIT_OK { "pass" } else { "FAIL" });
    }
    let mut plots = Vec::new();
    if code != EXIT_REFINEMENT && path.can_evaluate() {
        let pts: Vec<(f64, f64)> = (0..=64)
            .filter_map(|i| {
                let th = 2.0 * PI * i as f64 / 64.0;
                i_omega(&path, cis(th)).ok().map(|p| (th, p.index as f64))
            })
            .collect();
        let chart = Chart {
            title: "index along the unit circle".into(),
            x_label: "omega angle".into(),
            y_label: "i_omega".into(),
            series: vec![Series { label: "i_omega".into(), points: pts, line: false }],
        };
        plots.push(("index_vs_omega.svg".into(), chart.to_svg()));
    }
    Ok(Outcome { code, report: envelope("index-path", cfg, code, result), pretty, plots })
}

fn suite_table(r: &SuiteReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>8} {:>8}", "identity", "checked", "passed");
    for (k, t) in &r.tallies {
        let _ = writeln!(s, "{:<24} {:>8} {:>8}", k, t.checked, t.passed);
    }
    let _ = writeln!(s, "failures: {}, unresolved: {}", r.failures.len(), r.unresolved.len());
    s
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.sweep.validate()?;
    let opts = VerifyOptions { seed: cfg.seed, sizes: cfg.sweep.clone(), tol: cfg.tolerances.clone(), fault: cfg.fault };
    let report = run_suite(&opts);
    let code = if !report.failures.is_empty() {
        EXIT_IDENTITY
    } else if !report.unresolved.is_empty() {
        EXIT_REFINEMENT
    } else {
        EXIT_OK
    };
    let pretty = suite_table(&report);
    let result = json!({
        "all_pass": report.all_pass(),
        "tallies": report.tallies,
        "failure_count": report.failures.len(),
        "failures": report.failures,
        "unresolved": report.unresolved,
    });
    Ok(Outcome { code, report: envelope("verify", cfg, code, result), pretty, plots: Vec::new() })
}

fn orbit_table(x: &OrbitExperiment) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} in R^{}", x.label, 2 * x.n);
    let _ = writeln!(
        s,
        "{:>3} {:>14} {:>10} {:>9} {:>5} {:>6} {:>10} {:>10} {:>8}",
        "#", "tau", "residual", "symmetric", "dual", "nu_L0", "i_L0", "i_L1", "gap"
    );
    for (i, o) in x.orbits.iter().enumerate() {
        let idx = o.indices.as_ref();
        let _ = writeln!(
            s,
            "{:>3} {:>14.10} {:>10.2e} {:>9} {:>5} {:>6} {:>10} {:>10} {:>8}",
            i,
            o.tau,
            o.residual,
            o.symmetric,
            o.dual,
            o.nu_l0.map_or("-".into(), |v| v.to_string()),
            idx.map_or("-".into(), |r| r.l0.index.to_string()),
            idx.map_or("-".into(), |r| r.l1.index.to_string()),
            idx.map_or("-".into(), |r| format!("{:.1}", r.theorem31.gap)),
        );
    }
    let a = &x.audit;
    let _ = writeln!(
        s,
        "distinct {} (bound {}), symmetric {}, degenerate {}, shots {} ({} failed): {:?}",
        a.distinct, a.bound, a.symmetric, a.degenerate, a.shots, a.failures, a.status
    );
    for w in &x.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for u in &x.unresolved {
        let _ = writeln!(s, "unresolved: {u}");
    }
    s
}

fn orbit_plots(x: &OrbitExperiment) -> Vec<(String, String)> {
    let mut plots = Vec::new();
    if let Some(radii) = &x.radii {
        let analytic: Vec<(f64, f64)> = radii.iter().zip(&x.analytic).map(|(r, o)| (*r, o.tau)).collect();
        let found: Vec<(f64, f64)> = x
            .matches
            .iter()
            .filter_map(|m| m.analytic.map(|k| (radii[k], x.orbits[m.orbit].tau)))
            .collect();
        let mut curve: Vec<(f64, f64)> = Vec::new();
        let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        for i in 0..=50 {
            let r = lo + (hi - lo) * i as f64 / 50.0;
            curve.push((r, PI * r * r));
        }
        let chart = Chart {
            title: "brake orbit period against radius".into(),
            x_label: "radius r_k".into(),
            y_label: "period tau".into(),
            series: vec![
                Series { label: "pi r^2".into(), points: curve, line: true },
                Series { label: "analytic".into(), points: analytic, line: false },
                Series { label: "shooting".into(), points: found, line: false },
            ],
        };
        plots.push(("period_vs_radius.svg".into(), chart.to_svg()));
    }
    let series: Vec<Series> = x
        .orbits
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            let prof = o.indices.as_ref()?.profile.as_ref()?;
            Some(Series {
                label: format!("orbit {i}"),
                points: prof.records.iter().map(|r| (r.k as f64, r.l0.index as f64)).collect(),
                line: true,
            })
        })
        .collect();
    if !series.is_empty() {
        let chart = Chart { title: "L0 index of brake iterates".into(), x_label: "iterate k".into(), y_label: "i_L0".into(), series };
        plots.push(("index_vs_iterate.svg".into(), chart.to_svg()));
    }
    plots
}

pub fn ellipsoid(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let doc = match (&cfg.radii, &cfg.input) {
        (Some(r), _) => HypersurfaceDoc::Ellipsoid { radii: r.clone() },
        (None, Some(_)) => HypersurfaceDoc::parse(&read_input(cfg, "hypersurface")?)?,
        (None, None) => return Err(CliError::Input("give radii or a hypersurface document".into())),
    };
    let surface = doc.build()?;
    let x = match orbit_experiment(&surface, &cfg.tolerances, cfg.seed) {
        Ok(x) => x,
        Err(CliError::Refinement(msg)) => {
            let code = EXIT_REFINEMENT;
            return Ok(Outcome {
                code,
                report: envelope("ellipsoid", cfg, code, json!({ "refinement": { "reason": msg } })),
                pretty: format!("refinement needed: {msg}\n"),
                plots: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let code = if x.unresolved.is_empty() { EXIT_OK } else { EXIT_REFINEMENT };
    let pretty = orbit_table(&x);
    let plots = orbit_plots(&x);
    let result = json!({ "hypersurface": doc, "experiment": x });
    Ok(Outcome { code, report: envelope("ellipsoid", cfg, code, result), pretty, plots })
}
