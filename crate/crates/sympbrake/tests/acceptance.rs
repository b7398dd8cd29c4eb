//! The acceptance suite: ten criteria at their stated tolerances, one line each.
//!
//! Runs sequentially in one test so that the timings are not shared with
//! other work. Lines go straight to stderr so they show without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use sympbrake::experiments::{jump_experiment, orbit_experiment, theorem31_sweep, OrbitExperiment};
use sympbrake::formats::HypersurfaceDoc;
use sympbrake::verify::{
    path_family, signature_table_sweep, splitting_products_sweep, splitting_table_sweep, unipotent_sweep, Family,
    SuiteReport, VerifyOptions,
};
use sympbrake::{SweepSizes, Tolerances};

const SEED: u64 = 20240601;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: usize, name: &'static str, pass: bool, detail: String) {
    let _ = writeln!(std::io::stderr(), "[{}] {:>2} {:<28} {}", if pass { "PASS" } else { "FAIL" }, id, name, detail);
    lines.push(Line { id, name, pass, detail });
}

fn tally_line(r: &SuiteReport, identity: &str) -> (bool, String) {
    let t = r.tally(identity);
    let failed = r.failures.iter().filter(|f| f.identity == identity).count();
    (t.checked > 0 && t.passed == t.checked && failed == 0, format!("{identity} {}/{}", t.passed, t.checked))
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn ellipsoid(radii: &[f64]) -> OrbitExperiment {
    let surface = HypersurfaceDoc::Ellipsoid { radii: radii.to_vec() }.build().expect("valid ellipsoid");
    orbit_experiment(&surface, &Tolerances::default(), SEED).expect("orbit experiment runs")
}

/// Exactly n orbits, symmetric to 1e-8, ν_L0 = 1, periods within 1e-8 of π r², count at the bound.
fn example_check(x: &OrbitExperiment) -> (bool, String) {
    let n = x.n;
    let mut matched = vec![0usize; x.analytic.len()];
    let mut periods_ok = true;
    for m in &x.matches {
        match (m.analytic, m.period_rel_error) {
            (Some(k), Some(e)) if e <= 1e-8 => matched[k] += 1,
            _ => periods_ok = false,
        }
    }
    let all_matched = matched.iter().all(|&c| c == 1);
    let symmetric = x.orbits.iter().all(|o| o.symmetric && o.symmetry_defect <= 1e-8);
    let nondegenerate = x.orbits.iter().all(|o| o.nu_l0 == Some(1));
    let bound = x.audit.distinct >= x.audit.bound;
    let pass = x.audit.distinct == n && symmetric && nondegenerate && periods_ok && all_matched && bound;
    let nus: Vec<String> = x.orbits.iter().map(|o| o.nu_l0.map_or("-".into(), |v| v.to_string())).collect();
    (
        pass,
        format!(
            "n={n}: distinct {} (bound {}), symmetric {}/{}, nu_L0 [{}], periods matched {}",
            x.audit.distinct,
            x.audit.bound,
            x.orbits.iter().filter(|o| o.symmetric && o.symmetry_defect <= 1e-8).count(),
            x.orbits.len(),
            nus.join(","),
            periods_ok && all_matched
        ),
    )
}

fn recovery_check(x: &OrbitExperiment) -> (bool, String) {
    let ok = x.recovery.iter().filter(|r| r.recovered).count();
    let worst = x.recovery.iter().map(|r| r.residual).fold(0.0f64, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let steps = x.recovery.iter().map(|r| r.iterations).max().unwrap_or(0);
    (
        !x.recovery.is_empty() && ok == x.recovery.len(),
        format!("n={}: recovered {ok}/{} (max residual {worst:.1e}, max steps {steps})", x.n, x.recovery.len()),
    )
}

#[test]
fn acceptance() {
    let _ = writeln!(std::io::stderr());
    let mut lines = Vec::new();
    let opts = VerifyOptions::new(SEED, SweepSizes { sp2: 1000, sp4: 200, ..SweepSizes::default() });

    // 1, 5, 6: one pass over the Sp(2) and Sp(4) path families
    let t = Instant::now();
    let mut paths = path_family(&opts, Family::Sp2);
    paths.merge(path_family(&opts, Family::Sp4));
    let elapsed = t.elapsed();
    let (ok, d) = tally_line(&paths, "theorem21");
    let ok = ok && paths.unresolved.is_empty() && elapsed <= Duration::from_secs(60);
    report(&mut lines, 1, "index difference sweep", ok, format!("{d}, unresolved {}, {}", paths.unresolved.len(), secs(elapsed)));

    let t = Instant::now();
    let table = signature_table_sweep();
    let elapsed = t.elapsed();
    let (ok, d) = tally_line(&table, "signature_table");
    report(&mut lines, 2, "signature table", ok && elapsed <= Duration::from_secs(1), format!("{d}, {}", secs(elapsed)));

    let mut split = splitting_table_sweep();
    split.merge(splitting_products_sweep(&VerifyOptions::new(SEED, SweepSizes { products: 100, ..SweepSizes::default() })));
    let (a, da) = tally_line(&split, "splitting_table");
    let (b, db) = tally_line(&split, "splitting_additivity");
    let ok = a && b && split.tally("splitting_additivity").checked >= 100 && split.unresolved.is_empty();
    report(&mut lines, 3, "splitting table", ok, format!("{da}, {db}"));

    let uni = unipotent_sweep(&VerifyOptions::new(SEED, SweepSizes { unipotent: 200, ..SweepSizes::default() }));
    let (ok, d) = tally_line(&uni, "unipotent");
    report(&mut lines, 4, "unipotent round trip", ok && uni.unresolved.is_empty(), d);

    let (a, da) = tally_line(&paths, "bott");
    let (b, db) = tally_line(&paths, "decomposition");
    report(&mut lines, 5, "bott and decomposition", a && b, format!("{da}, {db}"));

    let structured = path_family(&opts, Family::Sp4Structured);
    let (a, da) = tally_line(&paths, "brake_square");
    let (b, db) = tally_line(&structured, "square_structure");
    report(&mut lines, 6, "brake iteration", a && b && structured.unresolved.is_empty(), format!("{da}, {db}"));

    // 7 and 10 share the two ellipsoid experiments
    let t = Instant::now();
    let e2 = ellipsoid(&[1.0, 2f64.sqrt()]);
    let e3 = ellipsoid(&[1.0, 2f64.powf(0.25), 3f64.powf(0.25)]);
    let elapsed = t.elapsed();
    let (a, da) = example_check(&e2);
    let (b, db) = example_check(&e3);
    report(&mut lines, 7, "ellipsoid brake orbits", a && b && elapsed <= Duration::from_secs(120), format!("{da}; {db}; {}", secs(elapsed)));

    let gaps = theorem31_sweep(SEED, 20, &[3, 5]).expect("gap sweep runs");
    report(
        &mut lines,
        8,
        "gap positivity",
        gaps.counterexamples == 0,
        format!("{} cases, {} meet the hypotheses, {} counterexamples", gaps.cases.len(), gaps.satisfying, gaps.counterexamples),
    );

    let jump = jump_experiment(&[1.0, 2f64.sqrt()], 16, 200).expect("jump search runs");
    let exact = jump.search.tuples.iter().all(|t| t.residuals.iter().all(|r| r[..3].iter().all(|v| *v == Some(0))));
    let first = jump.search.tuples.first().map_or("none".into(), |t| format!("R={} m={:?}", t.r, t.m));
    report(
        &mut lines,
        9,
        "index jump tuples",
        !jump.search.tuples.is_empty() && exact,
        format!("{} tuples up to R={} (reach {}), first {first}", jump.search.tuples.len(), jump.search.r_max, jump.reach),
    );

    let (a, da) = recovery_check(&e2);
    let (b, db) = recovery_check(&e3);
    report(&mut lines, 10, "solver robustness", a && b, format!("{da}; {db}"));

    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| format!("{} {}: {}", l.id, l.name, l.detail)).collect();
    let _ = writeln!(std::io::stderr(), "acceptance: {}/{} criteria pass", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
