//! Acceptance gate: one PASS/FAIL line per criterion. The process fails if the set
//! of failing criteria differs from `KNOWN_RED`, so a regression and an unexpected
//! recovery are both visible.

use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};

use bpt_core::kernel::average_t;
use bpt_core::norm::{norm_reports, theorem_constants, verify_suite, Mutation, Suite, VerifyConfig, VerifyReport};
use bpt_core::poisson::{oracle_edge, Evaluator};
use bpt_core::rational::{frac, int, qpow, Rational};
use bpt_core::tree::ProblemInstance;

const QS: [u32; 3] = [2, 3, 5];
/// Criteria 1, 5, 6: d in 1..=12, aligned i in [-6, d+6], transverse 1 <= j <= 6.
const ROUTE_D_MAX: i64 = 12;
const ALIGNED_WINDOW: i64 = 6;
const J_MAX: i64 = 6;
const ROUTE_BUDGET: Duration = Duration::from_secs(30);
/// Criteria 2, 3: 1 <= d <= 40.
const NORM_D_MAX: i64 = 40;
const NORM_BUDGET: Duration = Duration::from_secs(10);
/// Criterion 4: |k - i| <= 8 (fixed in the suite), |l - j| <= 6.
const MEASURE_D_MAX: i64 = 6;
/// Criterion 5: harmonicity within distance 3 of [x, y].
const HARMONIC_RADIUS: u32 = 3;
/// Criterion 7: q = 2, d in {1, 2, 3}, edges within distance 12, tolerance q^{-10}.
const BRUTE_Q: u32 = 2;
const BRUTE_DS: [i64; 3] = [1, 2, 3];
const BRUTE_RADIUS: u32 = 12;
const BRUTE_TOL_EXP: i64 = -10;

/// Criteria expected to fail, with the reason recorded alongside the implementation notes.
const KNOWN_RED: [u32; 1] = [7];

struct Line {
    id: u32,
    pass: bool,
}

fn report(id: u32, title: &str, pass: bool, detail: String) -> Line {
    println!("[{}] {id}. {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    Line { id, pass }
}

fn config(q: u32, d_max: i64, suites: Vec<Suite>) -> VerifyConfig {
    let mut cfg = VerifyConfig::new(q, d_max).with_suites(suites);
    cfg.window = ALIGNED_WINDOW;
    cfg.j_max = J_MAX;
    cfg.harmonic_radius = HARMONIC_RADIUS;
    cfg
}

fn summarize(reports: &[VerifyReport]) -> (bool, String) {
    let checked: usize = reports.iter().flat_map(|r| &r.checks).map(|c| c.checked).sum();
    match reports.iter().flat_map(|r| &r.checks).find(|c| !c.passed()) {
        None => (true, format!("{checked} exact comparisons")),
        Some(c) => (
            false,
            format!(
                "{}/{} failed {} times; first witness {}",
                c.suite,
                c.name,
                c.failed,
                c.first_failure.as_ref().expect("failure has witness")
            ),
        ),
    }
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let reports: Vec<_> = QS.iter().map(|&q| verify_suite(&config(q, ROUTE_D_MAX, vec![Suite::Routes]))).collect();
    let elapsed = start.elapsed();
    let (ok, detail) = summarize(&reports);
    let in_time = elapsed < ROUTE_BUDGET;
    report(
        1,
        "route equality (series = rearranged = closed = oracle)",
        ok && in_time,
        format!("{detail}; {elapsed:.1?} (budget {ROUTE_BUDGET:?})"),
    )
}

fn criteria_2_3() -> (Line, Line) {
    let start = Instant::now();
    let mut bound_fail = None;
    let mut gj_fail = None;
    let mut fits = Vec::new();
    for q in QS {
        let (fit, rows) = norm_reports(q, NORM_D_MAX).expect("norms are computable");
        for r in &rows {
            if !(r.lower <= r.norm_sq && r.norm_sq <= r.upper) && bound_fail.is_none() {
                bound_fail = Some(format!("q={q} d={}: {} not in [{}, {}]", r.d, r.norm_sq, r.lower, r.upper));
            }
            if r.d >= 3 && !r.gj_residual.is_zero() && gj_fail.is_none() {
                gj_fail = Some(format!("q={q} d={}: residual {}", r.d, r.gj_residual));
            }
        }
        fits.push((q, fit));
    }
    let elapsed = start.elapsed();
    let constants_ok = theorem_constants(2) == (int(72), frac(320, 3));
    let two = report(
        2,
        "4d <= norm^2 <= Cd + K, q in {2,3,5}, d <= 40",
        bound_fail.is_none() && constants_ok && elapsed < NORM_BUDGET,
        bound_fail.unwrap_or_else(|| format!("C=72, K=320/3 at q=2; {elapsed:.1?} (budget {NORM_BUDGET:?})")),
    );
    let q2 = &fits[0].1;
    let fit_ok = q2.c == int(72) && q2.k == int(96);
    let listed: Vec<String> = fits.iter().map(|(q, f)| format!("q={q}: ({}, {})", f.c, f.k)).collect();
    let three = report(
        3,
        "growth identity C'd - K'(1 - q^-d) exact for 3 <= d <= 40",
        gj_fail.is_none() && fit_ok,
        gj_fail.unwrap_or_else(|| format!("residual 0; fits {}", listed.join(", "))),
    );
    (two, three)
}

fn criterion_4() -> Line {
    let reports: Vec<_> = QS.iter().map(|&q| verify_suite(&config(q, MEASURE_D_MAX, vec![Suite::Measures]))).collect();
    let (ok, detail) = summarize(&reports);
    report(4, "cell measures match the shadow algebra; partitions have mass 0", ok, detail)
}

fn criterion_5() -> Line {
    let suites = vec![Suite::Symmetry, Suite::Harmonicity, Suite::Alternation, Suite::SpineLower, Suite::Kernels];
    let reports: Vec<_> = QS.iter().map(|&q| verify_suite(&config(q, ROUTE_D_MAX, suites.clone()))).collect();
    let (mut ok, mut detail) = summarize(&reports);
    // |T_i f| >= 1 on a wider window than the suite's
    'outer: for q in QS {
        for d in 1..=ROUTE_D_MAX {
            let inst = ProblemInstance::new(i64::from(q), d).unwrap();
            for i in 0..d {
                let t = average_t(&inst, i).unwrap();
                if let Some(k) = (-200..=200).find(|&k| t.eval(k).abs() < Rational::one()) {
                    ok = false;
                    detail = format!("|T_i f| < 1 at q={q} d={d} i={i} k={k}");
                    break 'outer;
                }
            }
        }
    }
    report(5, "symmetries, harmonicity, alternation, P >= 2 on [x,y], |T_i f| >= 1", ok, detail)
}

fn criterion_6() -> Line {
    let reports: Vec<_> = QS.iter().map(|&q| verify_suite(&config(q, ROUTE_D_MAX, vec![Suite::EdgeBounds]))).collect();
    let (ok, detail) = summarize(&reports);
    report(6, "per-edge envelopes", ok, detail)
}

/// Exact Σ of count·P² over classes whose far endpoint lies beyond `radius`.
fn omitted_tail(ev: &Evaluator, radius: i64) -> Rational {
    let inst = ev.instance();
    let (q, d) = (inst.q(), inst.d());
    let qr = int(i64::from(q));
    let step = &qr * qpow(q, -2);
    let geometric = |first: Rational| first / (Rational::one() - &step);
    let m = radius + 1;
    let left = ev.aligned_series(-m).unwrap();
    let right = ev.aligned_series(d - 1 + m).unwrap();
    let mut half = geometric(qpow(q, m) * &left * &left) + geometric(qpow(q, m) * &right * &right);
    for i in 1..d {
        let p = ev.transverse_series(i, m).unwrap();
        half += geometric((&qr - Rational::one()) * qpow(q, m - 1) * &p * &p);
    }
    half * int(2)
}

fn criterion_7() -> Line {
    let tol = qpow(BRUTE_Q, BRUTE_TOL_EXP);
    let mut worst = Rational::zero();
    let mut exact_split = true;
    let mut needed = Vec::new();
    for d in BRUTE_DS {
        let inst = ProblemInstance::new(i64::from(BRUTE_Q), d).unwrap();
        let brute: Rational = inst
            .edges_near_segment(BRUTE_RADIUS)
            .iter()
            .map(|e| {
                let v = oracle_edge(&inst, e);
                &v * &v
            })
            .sum();
        let ev = Evaluator::new(inst);
        let closed = bpt_core::norm::norm_squared(&inst).unwrap();
        let gap = (&closed - &brute).abs();
        exact_split &= brute + omitted_tail(&ev, i64::from(BRUTE_RADIUS)) == closed;
        let radius = (1..).find(|&r| omitted_tail(&ev, r) <= tol).unwrap();
        needed.push(format!("d={d}: gap {gap}, radius {radius}"));
        if gap > worst {
            worst = gap;
        }
    }
    let pass = worst <= tol;
    println!(
        "       brute + exact omitted tail = closed form: {exact_split}; per d (radius meeting 2^{BRUTE_TOL_EXP}): {}",
        needed.join(", ")
    );
    report(
        7,
        "brute-force oracle sum within distance 12 vs closed form, tol 2^-10",
        pass,
        format!("largest gap {worst} (= 2^{:.2}) vs tolerance {tol}", log2(&worst)),
    )
}

fn log2(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().map_or(f64::NAN, f64::log2)
}

fn criterion_8() -> Line {
    let mutations = [Mutation::HalveK, Mutation::HalveC, Mutation::PerturbGHalfAt1, Mutation::ScaleCellMeasures];
    let mut ok = true;
    let mut details = Vec::new();
    for q in [2, 3] {
        let clean = verify_suite(&VerifyConfig::new(q, 4));
        ok &= clean.passed();
        for m in mutations {
            let r = verify_suite(&VerifyConfig::new(q, 4).with_mutation(m));
            match r.first_failure() {
                Some(c) if c.first_failure.is_some() => {
                    if q == 2 {
                        details.push(format!("{m:?} -> {}/{}", c.suite, c.name));
                    }
                }
                _ => {
                    ok = false;
                    details.push(format!("{m:?} undetected at q={q}"));
                }
            }
        }
    }
    report(8, "every mutation is caught with a witness; clean run passes", ok, details.join("; "))
}

fn main() {
    let mut lines = vec![criterion_1()];
    let (two, three) = criteria_2_3();
    lines.extend([two, three, criterion_4(), criterion_5(), criterion_6(), criterion_7(), criterion_8()]);
    let red: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("failing criteria: {red:?} (known red: {KNOWN_RED:?})");
    if red != KNOWN_RED {
        eprintln!("acceptance outcome differs from the recorded expectation");
        std::process::exit(1);
    }
}
