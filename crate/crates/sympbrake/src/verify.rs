//! Identity sweeps over seeded random paths and matrices.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sympbrake_core::iteration::{bott_check, brake_iterate, brake_square_endpoint, decomposition_check, g4_check};
use sympbrake_core::linalg::{cis, max_abs, rotation, C64};
use sympbrake_core::maslov::{i_omega, lemma25_audit, nu_omega, signature_table, theorem21_check, Theorem21Report};
use sympbrake_core::normalforms::{
    circle_spectrum, classify_unipotent, n2_b4, realize_block, splitting_numbers, splitting_numbers_numeric, NormalFormBlock,
    NormalFormDecomposition, SplittingPair, DEFAULT_CLUSTER_TOL,
};
use sympbrake_core::serde_matrix::MatrixDoc;
use sympbrake_core::{Mat, SymplecticMatrix, SymplecticPath};

use crate::config::{Fault, SweepSizes, Tolerances};
use crate::formats::PathDoc;
use crate::sample;

const ONE: C64 = C64::new(1.0, 0.0);
const MINUS_ONE: C64 = C64::new(-1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Sp2,
    Sp4,
    /// `Sp(4)` paths ending at `(−I₂) ⋄ Q`.
    Sp4Structured,
    Lemma25,
    SignatureTable,
    SplittingTable,
    SplittingProducts,
    Unipotent,
}

impl Family {
    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub checked: usize,
    pub passed: usize,
}

/// A sample on which an identity failed, with everything needed to replay it.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub identity: String,
    pub family: Family,
    pub id: usize,
    pub sample: Value,
    pub detail: Value,
}

/// A sample the numerics could not settle.
#[derive(Debug, Clone, Serialize)]
pub struct Unresolved {
    pub family: Family,
    pub id: usize,
    pub sample: Value,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub tallies: BTreeMap<String, Tally>,
    pub failures: Vec<Failure>,
    pub unresolved: Vec<Unresolved>,
}

impl SuiteReport {
    pub fn merge(&mut self, other: SuiteReport) {
        for (k, t) in other.tallies {
            let e = self.tallies.entry(k).or_default();
            e.checked += t.checked;
            e.passed += t.passed;
        }
        self.failures.extend(other.failures);
        self.unresolved.extend(other.unresolved);
    }

    pub fn all_pass(&self) -> bool {
        self.failures.is_empty() && self.unresolved.is_empty() && self.tallies.values().all(|t| t.checked == t.passed)
    }

    pub fn tally(&self, identity: &str) -> Tally {
        self.tallies.get(identity).cloned().unwrap_or_default()
    }

    fn record(&mut self, identity: &str, family: Family, id: usize, sample: &Value, ok: bool, detail: Value) {
        let t = self.tallies.entry(identity.to_string()).or_default();
        t.checked += 1;
        if ok {
            t.passed += 1;
        } else {
            self.failures.push(Failure { identity: identity.to_string(), family, id, sample: sample.clone(), detail });
        }
    }

    fn unresolved(&mut self, family: Family, id: usize, sample: &Value, error: String) {
        self.unresolved.push(Unresolved { family, id, sample: sample.clone(), error });
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub sizes: SweepSizes,
    pub tol: Tolerances,
    pub fault: Option<Fault>,
}

impl VerifyOptions {
    pub fn new(seed: u64, sizes: SweepSizes) -> Self {
        Self { seed, sizes, tol: Tolerances::default(), fault: None }
    }
}

/// Run `f` on sample ids `0..count` in parallel and merge in id order.
fn sweep(count: usize, f: impl Fn(usize) -> SuiteReport + Sync + Send) -> SuiteReport {
    let parts: Vec<SuiteReport> = (0..count).into_par_iter().map(f).collect();
    let mut out = SuiteReport::default();
    for p in parts {
        out.merge(p);
    }
    out
}

fn theorem21_holds(r: &Theorem21Report, fault: Option<Fault>) -> bool {
    match fault {
        None => r.pass,
        Some(Fault::SignFlip) => {
            r.sgn_plus % 2 == 0 && r.first.0 == -r.sgn_plus / 2 && r.second.0 == r.second.1
        }
    }
}

/// Theorem 2.1, Bott, the `L0`/`L1` decomposition and the brake-square
/// identity (plus the `(−I₂) ⋄ Q` square data when present) on one path.
pub fn check_path(doc: &PathDoc, family: Family, id: usize, opts: &VerifyOptions) -> SuiteReport {
    let mut out = SuiteReport::default();
    let sample = serde_json::to_value(doc).expect("path documents serialize");
    let path = match doc.build(opts.tol.input_symplectic) {
        Ok(p) => p,
        Err(e) => {
            out.unresolved(family, id, &sample, e.to_string());
            return out;
        }
    };
    let run = |out: &mut SuiteReport| -> sympbrake_core::Result<()> {
        let t21 = theorem21_check(&path)?;
        out.record("theorem21", family, id, &sample, theorem21_holds(&t21, opts.fault), json!(t21));
        let bott = bott_check(&path)?;
        out.record("bott", family, id, &sample, bott.pass, json!(bott));
        let dec = decomposition_check(&path)?;
        out.record("decomposition", family, id, &sample, dec.pass, json!(dec));
        let p = path.endpoint();
        let twice = brake_iterate(&path, 2)?;
        let model = brake_square_endpoint(p);
        let defect = max_abs(&(twice.endpoint() - &model)) / max_abs(&model).max(1.0);
        out.record("brake_square", family, id, &sample, defect <= opts.tol.brake_square, json!({ "relative_defect": defect }));
        if let Some(g4) = g4_check(p, None)? {
            out.record("square_structure", family, id, &sample, g4.matches, json!(g4));
        } else if family == Family::Sp4Structured {
            out.record("square_structure", family, id, &sample, false, json!({ "error": "(-I2) block not detected" }));
        }
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.unresolved(family, id, &sample, e.to_string());
    }
    out
}

pub fn path_family(opts: &VerifyOptions, family: Family) -> SuiteReport {
    let s = &opts.sizes;
    let (count, k) = match family {
        Family::Sp2 => (s.sp2, 1),
        Family::Sp4 | Family::Sp4Structured => (s.sp4, 2),
        _ => return SuiteReport::default(),
    };
    sweep(count, |id| {
        let mut rng = sample::rng_for(opts.seed, family.stream(), id);
        let doc = if family == Family::Sp4Structured {
            sample::structured_path(&mut rng, s.pieces, s.scale)
        } else {
            sample::generator_path(&mut rng, k, s.pieces, s.scale)
        };
        check_path(&doc, family, id, opts)
    })
}

/// Signature bounds on random endpoints in `Sp(2)` and `Sp(4)`.
pub fn lemma25_sweep(opts: &VerifyOptions) -> SuiteReport {
    let family = Family::Lemma25;
    sweep(opts.sizes.sp4, |id| {
        let mut rng = sample::rng_for(opts.seed, family.stream(), id);
        let k = 1 + id % 2;
        let p = sample::symplectic(&mut rng, k, 0.8);
        let sample = json!(MatrixDoc::from(&p));
        let mut out = SuiteReport::default();
        match lemma25_audit(&p) {
            Ok(r) => out.record("lemma25", family, id, &sample, r.pass, json!(r)),
            Err(e) => out.unresolved(family, id, &sample, e.to_string()),
        }
        out
    })
}

/// The `Sp(2)` signature table on `b ∈ {0.1, 1, 10}`, `θ ∈ {0.5, π/2, 3}`.
pub fn signature_table_sweep() -> SuiteReport {
    let family = Family::SignatureTable;
    let mut out = SuiteReport::default();
    let mut id = 0;
    for b in [0.1, 1.0, 10.0] {
        for theta in [0.5, PI / 2.0, 3.0] {
            let sample = json!({ "b": b, "theta": theta });
            match signature_table(b, theta) {
                Ok(rows) => {
                    for row in rows {
                        out.record("signature_table", family, id, &sample, row.computed == row.expected, json!(row));
                    }
                }
                Err(e) => out.unresolved(family, id, &sample, e.to_string()),
            }
            id += 1;
        }
    }
    out
}

/// Splitting-table entries for `±N₁(1, b)`, `R(θ)` and `D(2)`, by table
/// lookup and by the perturbative definition.
pub fn splitting_table_sweep() -> SuiteReport {
    let family = Family::SplittingTable;
    let m = |v: [f64; 4]| Mat::from_row_slice(2, 2, &v);
    let pair = |s_plus, s_minus| SplittingPair { s_plus, s_minus };
    let mut cases: Vec<(Mat, C64, SplittingPair)> = vec![
        (m([1.0, 1.0, 0.0, 1.0]), ONE, pair(1, 1)),
        (m([1.0, 0.0, 0.0, 1.0]), ONE, pair(1, 1)),
        (m([-1.0, 1.0, 0.0, -1.0]), MINUS_ONE, pair(0, 0)),
        (m([-1.0, 0.0, 0.0, -1.0]), MINUS_ONE, pair(1, 1)),
        (m([1.0, -1.0, 0.0, 1.0]), ONE, pair(0, 0)),
        (m([-1.0, -1.0, 0.0, -1.0]), MINUS_ONE, pair(1, 1)),
    ];
    for theta in [0.5, PI / 2.0, 3.0, 4.0, 5.5] {
        cases.push((rotation(theta), cis(theta), pair(0, 1)));
        cases.push((rotation(theta), cis(-theta), pair(1, 0)));
    }
    for w in [ONE, MINUS_ONE, cis(0.4), cis(2.0)] {
        cases.push((m([2.0, 0.0, 0.0, 0.5]), w, pair(0, 0)));
    }
    let mut out = SuiteReport::default();
    for (id, (mat, w, expected)) in cases.into_iter().enumerate() {
        let sample = json!({ "matrix": MatrixDoc::from(&mat), "omega": [w.re, w.im] });
        let s = SymplecticMatrix::from_trusted(mat);
        match (splitting_numbers(&s, w), splitting_numbers_numeric(&s, w)) {
            (Ok(t), Ok(n)) => {
                out.record("splitting_table", family, id, &sample, t == expected && n == expected, json!({ "table": t, "numeric": n, "expected": expected }));
            }
            (Err(e), _) | (_, Err(e)) => out.unresolved(family, id, &sample, e.to_string()),
        }
    }
    out
}

fn random_block(rng: &mut rand_pcg::Pcg64) -> NormalFormBlock {
    let x: f64 = rng.random_range(-1.0..1.0);
    let b: i8 = rng.random_range(-1..=1);
    match rng.random_range(0..6u8) {
        0 => NormalFormBlock::D { lambda: if x > 0.0 { 2 } else { -2 } },
        1 => NormalFormBlock::N1 { lambda: 1, b },
        2 => NormalFormBlock::N1 { lambda: -1, b },
        3 | 4 => NormalFormBlock::R { theta: 0.2 + 2.8 * x.abs() + if x < 0.0 { PI } else { 0.0 } },
        _ => {
            let theta = 0.3 + 2.5 * x.abs();
            let (b2, b3) = if b >= 0 { (1.0, 0.0) } else { (0.0, 1.0) };
            let b4 = n2_b4(theta, 0.5, b2, b3).expect("sin θ is away from zero");
            NormalFormBlock::n2(theta, Mat::from_row_slice(2, 2, &[0.5, b2, b3, b4])).expect("compatible N2 block")
        }
    }
}

/// `S^±` of a random `⋄`-product against the sum over its factors.
pub fn splitting_products_sweep(opts: &VerifyOptions) -> SuiteReport {
    let family = Family::SplittingProducts;
    sweep(opts.sizes.products, |id| {
        let mut rng = sample::rng_for(opts.seed, family.stream(), id);
        let count = rng.random_range(2..=3usize);
        let blocks: Vec<NormalFormBlock> = (0..count).map(|_| random_block(&mut rng)).collect();
        let sample = json!(blocks);
        let mut out = SuiteReport::default();
        let run = |out: &mut SuiteReport| -> sympbrake_core::Result<()> {
            let whole = NormalFormDecomposition { blocks: blocks.clone(), residual: None }.realize()?;
            let mut ok = true;
            let mut detail = Vec::new();
            for e in circle_spectrum(&whole, DEFAULT_CLUSTER_TOL) {
                let w = e.omega();
                let mut sum = SplittingPair::ZERO;
                for b in &blocks {
                    sum = sum + splitting_numbers(&realize_block(b)?, w)?;
                }
                let s = splitting_numbers(&whole, w)?;
                ok &= s == sum;
                detail.push(json!({ "angle": e.angle, "product": s, "sum": sum }));
            }
            out.record("splitting_additivity", family, id, &sample, ok, json!(detail));
            Ok(())
        };
        if let Err(e) = run(&mut out) {
            out.unresolved(family, id, &sample, e.to_string());
        }
        out
    })
}

/// `(p, q, r)` of `[[I, 0], [C, I]]` against `k`, `ν₁` and `S⁺(1)`.
pub fn unipotent_sweep(opts: &VerifyOptions) -> SuiteReport {
    let family = Family::Unipotent;
    sweep(opts.sizes.unipotent, |id| {
        let mut rng = sample::rng_for(opts.seed, family.stream(), id);
        let k = 1 + id % 4;
        // C = Gᵀ diag(±1, 0) G with a random number of zero eigenvalues
        let g = sample::symmetric(&mut rng, k, 1.0) + Mat::identity(k, k) * 3.0;
        let rank = rng.random_range(0..=k);
        let diag = nalgebra::DVector::from_fn(k, |i, _| if i < rank { if rng.random_bool(0.5) { 1.0 } else { -1.0 } } else { 0.0 });
        let c = g.transpose() * Mat::from_diagonal(&diag) * &g;
        let c = sympbrake_core::linalg::symmetrize(&c);
        let sample = json!(MatrixDoc::from(&c));
        let mut out = SuiteReport::default();
        let run = |out: &mut SuiteReport| -> sympbrake_core::Result<()> {
            let u = classify_unipotent(&c)?;
            let z = Mat::zeros(k, k);
            let i = Mat::identity(k, k);
            let p = sympbrake_core::linalg::from_blocks(&i, &z, &c, &i);
            let nu = nu_omega(&p, ONE);
            // γ(t) = [[I, 0], [tC, I]] stays unipotent, so any ε in (0, π) gives the jump
            let b = sympbrake_core::linalg::from_blocks(&c, &z, &z, &z);
            let path = SymplecticPath::constant_generator(b, 1.0)?;
            let base = i_omega(&path, ONE)?.index;
            let s_plus = i_omega(&path, cis(0.1))?.index - base;
            let s_minus = i_omega(&path, cis(-0.1))?.index - base;
            let expected = (u.p + u.q) as i64;
            let ok = u.p + u.q + u.r == k && nu == 2 * u.p + u.q + u.r && s_plus == expected && s_minus == expected;
            out.record(
                "unipotent",
                family,
                id,
                &sample,
                ok,
                json!({ "k": k, "p": u.p, "q": u.q, "r": u.r, "nu1": nu, "s_plus": s_plus, "s_minus": s_minus }),
            );
            Ok(())
        };
        if let Err(e) = run(&mut out) {
            out.unresolved(family, id, &sample, e.to_string());
        }
        out
    })
}

/// Every sweep of the suite, in a fixed order.
pub fn run_suite(opts: &VerifyOptions) -> SuiteReport {
    let mut out = SuiteReport::default();
    for family in [Family::Sp2, Family::Sp4, Family::Sp4Structured] {
        out.merge(path_family(opts, family));
    }
    out.merge(lemma25_sweep(opts));
    out.merge(signature_table_sweep());
    out.merge(splitting_table_sweep());
    out.merge(splitting_products_sweep(opts));
    out.merge(unipotent_sweep(opts));
    out
}
