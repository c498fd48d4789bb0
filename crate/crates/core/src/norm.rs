//! ℓ²(E) norm of the transform over all oriented edges, the two-sided bound with
//! explicit constants, the fitted exact growth formula, and the verification suites.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{average_t_of, Interval, KernelSet};
use crate::measure::{
    cross_cell_measure, cross_cell_shadows, edge_measure_shadow, edge_measure_union, negative_part, positive_part,
    spine_cell_measure, spine_cell_shadows, visual_measure_general,
};
use crate::poisson::{oracle_edge, per_edge_bound, Evaluator, Route};
use crate::rational::{frac, int, qpow, Rational};
use crate::tree::{classify_edge, realize_edge, Edge, EdgeClass, EdgeKind, ProblemInstance, Shadow, Vertex};

/// Number of consecutive ratios that must agree before a tail is summed in closed form.
const RATIO_CHECKS: i64 = 5;

fn geometric_ratio(values: &[Rational]) -> Result<Rational> {
    let first = &values[0];
    let ratio = &values[1] / first;
    for w in values.windows(2) {
        if w[1] != &w[0] * &ratio {
            return Err(Error::NotSummable(format!("tail is not geometric: {} then {}", w[0], w[1])));
        }
    }
    Ok(ratio)
}

/// Σ_{m>=0} a·(q·ρ²)^m · P², given the first term, as an exact geometric series.
fn geometric_tail(first_weight: Rational, first: &Rational, ratio: &Rational, q: u32) -> Result<Rational> {
    let step = int(i64::from(q)) * ratio * ratio;
    if step >= Rational::one() {
        return Err(Error::NotSummable(format!("weighted tail ratio {step} is not below 1")));
    }
    Ok(first_weight * first * first / (Rational::one() - step))
}

/// Σ of P² over one tail, given successive values (first one included) and the count of the first edge.
fn tail_sum(values: &[Rational], first_count: Rational, q: u32) -> Result<Rational> {
    if values.iter().all(Zero::is_zero) {
        return Ok(Rational::zero());
    }
    let ratio = geometric_ratio(values)?;
    geometric_tail(first_count, &values[0], &ratio, q)
}

/// ‖𝒫B(x, y)‖² over oriented edges, with the transform evaluated by the series route of `ev`.
pub fn norm_squared_with(ev: &Evaluator) -> Result<Rational> {
    let inst = ev.instance();
    let (q, d) = (inst.q(), inst.d());
    if d == 0 {
        return Ok(Rational::zero());
    }
    let qr = int(i64::from(q));
    let mut half = Rational::zero();
    for i in 0..d {
        let p = ev.aligned_series(i)?;
        half += &p * &p;
    }
    // n(-m) = q^m, n(d-1+m) = q^m for m >= 1
    let left: Vec<Rational> = (1..=RATIO_CHECKS + 1).map(|m| ev.aligned_series(-m)).collect::<Result<_>>()?;
    half += tail_sum(&left, qr.clone(), q)?;
    let right: Vec<Rational> = (0..=RATIO_CHECKS).map(|m| ev.aligned_series(d + m)).collect::<Result<_>>()?;
    half += tail_sum(&right, qr.clone(), q)?;
    // n(i, j) = (q-1) q^{j-1}
    for i in 1..d {
        let row: Vec<Rational> = (1..=RATIO_CHECKS + 1).map(|j| ev.transverse_series(i, j)).collect::<Result<_>>()?;
        half += tail_sum(&row, &qr - Rational::one(), q)?;
    }
    Ok(half * int(2))
}

pub fn norm_squared(inst: &ProblemInstance) -> Result<Rational> {
    norm_squared_with(&Evaluator::new(*inst))
}

/// C = 8(q+1)²/(q-1)² and K = 16q²(2q+1)/((q-1)³(q+1)).
pub fn theorem_constants(q: u32) -> (Rational, Rational) {
    let q = int(i64::from(q));
    let one = Rational::one();
    let qm = &q - &one;
    let qp = &q + &one;
    let c = int(8) * &qp * &qp / (&qm * &qm);
    let k = int(16) * &q * &q * (int(2) * &q + &one) / (&qm * &qm * &qm * &qp);
    (c, k)
}

/// (4d, C·d + K).
pub fn theorem_bounds(inst: &ProblemInstance) -> (Rational, Rational) {
    let (c, k) = theorem_constants(inst.q());
    let d = int(inst.d());
    (int(4) * &d, c * d + k)
}

/// Fitted constants of ‖𝒫B‖² = C'·d − K'·(1 − q^{-d}).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GjFit {
    pub q: u32,
    pub c: Rational,
    pub k: Rational,
}

impl GjFit {
    pub fn predict(&self, d: i64) -> Rational {
        &self.c * int(d) - &self.k * (Rational::one() - qpow(self.q, -d))
    }
}

/// Solves the 2×2 system from the norms at d = 1 and d = 2.
pub fn fit_gj_from(q: u32, n1: &Rational, n2: &Rational) -> Result<GjFit> {
    let one = Rational::one();
    // rows: [d, -(1 - q^{-d})]
    let (a11, a12) = (int(1), -(&one - qpow(q, -1)));
    let (a21, a22) = (int(2), -(&one - qpow(q, -2)));
    let det = &a11 * &a22 - &a12 * &a21;
    if det.is_zero() {
        return Err(Error::SingularSystem);
    }
    let c = (n1 * &a22 - &a12 * n2) / &det;
    let k = (&a11 * n2 - &a21 * n1) / &det;
    Ok(GjFit { q, c, k })
}

pub fn fit_gj(q: u32) -> Result<GjFit> {
    let norm = |d| -> Result<Rational> { norm_squared(&ProblemInstance::new(i64::from(q), d)?) };
    fit_gj_from(q, &norm(1)?, &norm(2)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormReport {
    pub d: i64,
    pub norm_sq: Rational,
    pub lower: Rational,
    pub upper: Rational,
    pub gj_prediction: Rational,
    pub gj_residual: Rational,
}

/// One report per d in 1..=d_max, computed in parallel, plus the fit they share.
pub fn norm_reports(q: u32, d_max: i64) -> Result<(GjFit, Vec<NormReport>)> {
    let fit = fit_gj(q)?;
    let reports = (1..=d_max)
        .into_par_iter()
        .map(|d| {
            let inst = ProblemInstance::new(i64::from(q), d)?;
            let norm_sq = norm_squared(&inst)?;
            let (lower, upper) = theorem_bounds(&inst);
            let gj_prediction = fit.predict(d);
            let gj_residual = &norm_sq - &gj_prediction;
            Ok(NormReport { d, norm_sq, lower, upper, gj_prediction, gj_residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, reports))
}

/// Σ over all oriented edges of the squared per-edge envelopes, with the aligned
/// envelope taken symmetric; this is the quantity the upper bound dominates.
pub fn envelope_sum(inst: &ProblemInstance) -> Rational {
    let (q, d) = (inst.q(), inst.d());
    let qr = int(i64::from(q));
    let one = Rational::one();
    let qm = &qr - &one;
    let qp = &qr + &one;
    // the spine carries d edges at 2(q+1)/(q-1); each end tail contributes Σ_{m>=1} q^m (2/(q-1))² q^{-2(m-1)}
    let spine = int(4) * &qp * &qp / (&qm * &qm) * int(d);
    let ends = int(8) * &qr * &qr / (&qm * &qm * &qm);
    let transverse: Rational = (1..d).map(|i| int(4) * &qr / (&qm * &qm) * qpow(q, -2 * i.min(d - i))).sum();
    int(2) * (spine + ends + transverse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Suite {
    Routes,
    Symmetry,
    Harmonicity,
    Alternation,
    EdgeBounds,
    SpineLower,
    Kernels,
    Theorem,
    Summation,
    Gj,
    Measures,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Routes,
        Suite::Symmetry,
        Suite::Harmonicity,
        Suite::Alternation,
        Suite::EdgeBounds,
        Suite::SpineLower,
        Suite::Kernels,
        Suite::Theorem,
        Suite::Summation,
        Suite::Gj,
        Suite::Measures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Routes => "routes",
            Suite::Symmetry => "symmetry",
            Suite::Harmonicity => "harmonicity",
            Suite::Alternation => "alternation",
            Suite::EdgeBounds => "edge-bounds",
            Suite::SpineLower => "spine-lower",
            Suite::Kernels => "kernels",
            Suite::Theorem => "theorem",
            Suite::Summation => "summation",
            Suite::Gj => "gj",
            Suite::Measures => "measures",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Deliberate corruptions used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mutation {
    None,
    HalveK,
    HalveC,
    /// g_½(1) = -1 + 1/64 in every kernel computation.
    PerturbGHalfAt1,
    /// Closed-form cell measures doubled.
    ScaleCellMeasures,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub q: u32,
    pub d_max: i64,
    pub suites: Vec<Suite>,
    pub mutation: Mutation,
    /// Aligned parameters range over [-window, d + window].
    pub window: i64,
    pub j_max: i64,
    pub harmonic_radius: u32,
    pub oracle_radius: u32,
}

impl VerifyConfig {
    pub fn new(q: u32, d_max: i64) -> Self {
        Self {
            q,
            d_max,
            suites: Suite::ALL.to_vec(),
            mutation: Mutation::None,
            window: 6,
            j_max: 6,
            harmonic_radius: 3,
            oracle_radius: 1,
        }
    }

    pub fn with_suites(mut self, suites: Vec<Suite>) -> Self {
        self.suites = suites;
        self
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = mutation;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub q: u32,
    pub d: i64,
    pub i: Option<i64>,
    pub j: Option<i64>,
    pub detail: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={} d={}", self.q, self.d)?;
        if let Some(i) = self.i {
            write!(f, " i={i}")?;
        }
        if let Some(j) = self.j {
            write!(f, " j={j}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub checked: usize,
    pub failed: usize,
    pub first_failure: Option<Witness>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub q: u32,
    pub d_max: i64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed())
    }
}

/// Accumulates named checks in insertion order.
struct Tally {
    q: u32,
    d: i64,
    checks: Vec<CheckResult>,
}

impl Tally {
    fn new(q: u32, d: i64) -> Self {
        Self { q, d, checks: Vec::new() }
    }

    fn slot(&mut self, suite: Suite, name: &str) -> &mut CheckResult {
        let pos = match self.checks.iter().position(|c| c.suite == suite && c.name == name) {
            Some(p) => p,
            None => {
                self.checks.push(CheckResult {
                    suite,
                    name: name.to_string(),
                    checked: 0,
                    failed: 0,
                    first_failure: None,
                });
                self.checks.len() - 1
            }
        };
        &mut self.checks[pos]
    }

    fn record(
        &mut self,
        suite: Suite,
        name: &str,
        ok: bool,
        i: Option<i64>,
        j: Option<i64>,
        detail: impl FnOnce() -> String,
    ) {
        let (q, d) = (self.q, self.d);
        let slot = self.slot(suite, name);
        slot.checked += 1;
        if !ok {
            slot.failed += 1;
            if slot.first_failure.is_none() {
                slot.first_failure = Some(Witness { q, d, i, j, detail: detail() });
            }
        }
    }

    fn record_result<T>(
        &mut self,
        suite: Suite,
        name: &str,
        value: Result<T>,
        i: Option<i64>,
        j: Option<i64>,
    ) -> Option<T> {
        match value {
            Ok(v) => Some(v),
            Err(e) => {
                self.record(suite, name, false, i, j, || e.to_string());
                None
            }
        }
    }

    fn merge(&mut self, other: Tally) {
        for c in other.checks {
            let slot = self.slot(c.suite, &c.name);
            slot.checked += c.checked;
            slot.failed += c.failed;
            if slot.first_failure.is_none() {
                slot.first_failure = c.first_failure;
            }
        }
    }
}

fn mutated_kernels(inst: &ProblemInstance, mutation: Mutation) -> KernelSet {
    let mut ks = KernelSet::new(inst);
    if mutation == Mutation::PerturbGHalfAt1 {
        ks.g_half = ks.g_half.with_override(1, frac(-63, 64));
    }
    ks
}

fn mutated_constants(q: u32, mutation: Mutation) -> (Rational, Rational) {
    let (c, k) = theorem_constants(q);
    let half = frac(1, 2);
    match mutation {
        Mutation::HalveC => (c * half, k),
        Mutation::HalveK => (c, k * half),
        _ => (c, k),
    }
}

fn cell_scale(mutation: Mutation) -> Rational {
    if mutation == Mutation::ScaleCellMeasures {
        int(2)
    } else {
        Rational::one()
    }
}

/// Runs the selected suites for every 1 <= d <= d_max; failures are reported as data.
pub fn verify_suite(cfg: &VerifyConfig) -> VerifyReport {
    let q = cfg.q;
    let fit = if cfg.suites.contains(&Suite::Gj) {
        let ev = |d| {
            ProblemInstance::new(i64::from(q), d)
                .map(|inst| Evaluator::with_kernels(inst, mutated_kernels(&inst, cfg.mutation)))
        };
        Some(
            ev(1)
                .and_then(|e| norm_squared_with(&e))
                .and_then(|n1| ev(2).and_then(|e| norm_squared_with(&e)).and_then(|n2| fit_gj_from(q, &n1, &n2))),
        )
    } else {
        None
    };
    let parts: Vec<Tally> = (1..=cfg.d_max).into_par_iter().map(|d| verify_one(cfg, d, fit.as_ref())).collect();
    let mut all = Tally::new(q, 0);
    for part in parts {
        all.merge(part);
    }
    let mut checks = all.checks;
    checks.sort_by_key(|c| c.suite);
    VerifyReport { q, d_max: cfg.d_max, checks }
}

fn verify_one(cfg: &VerifyConfig, d: i64, fit: Option<&Result<GjFit>>) -> Tally {
    let q = cfg.q;
    let mut t = Tally::new(q, d);
    let inst = match ProblemInstance::new(i64::from(q), d) {
        Ok(inst) => inst,
        Err(e) => {
            t.record(Suite::Routes, "instance", false, None, None, || e.to_string());
            return t;
        }
    };
    let ev = Evaluator::with_kernels(inst, mutated_kernels(&inst, cfg.mutation));
    let aligned: Vec<i64> = (-cfg.window..=d + cfg.window).collect();
    let transverse: Vec<(i64, i64)> = (1..d).flat_map(|i| (1..=cfg.j_max).map(move |j| (i, j))).collect();
    let has = |s: Suite| cfg.suites.contains(&s);

    // series values shared by several suites
    let mut p_al: HashMap<i64, Rational> = HashMap::new();
    let mut p_tr: HashMap<(i64, i64), Rational> = HashMap::new();
    for &i in &aligned {
        if let Some(v) = t.record_result(Suite::Routes, "series", ev.aligned_series(i), Some(i), None) {
            p_al.insert(i, v);
        }
    }
    for &(i, j) in &transverse {
        if let Some(v) = t.record_result(Suite::Routes, "series", ev.transverse_series(i, j), Some(i), Some(j)) {
            p_tr.insert((i, j), v);
        }
    }

    if has(Suite::Routes) {
        for &i in &aligned {
            let Some(s) = p_al.get(&i) else { continue };
            let class = EdgeClass::aligned(i);
            if let Some(r) =
                t.record_result(Suite::Routes, "rearranged = series", ev.aligned_rearranged(i), Some(i), None)
            {
                t.record(Suite::Routes, "rearranged = series", &r == s, Some(i), None, || {
                    format!("rearranged {r} vs series {s}")
                });
            }
            if let Some(o) =
                t.record_result(Suite::Routes, "oracle = series", ev.transform(&class, Route::Oracle), Some(i), None)
            {
                let o = o.value;
                t.record(Suite::Routes, "oracle = series", &o == s, Some(i), None, || {
                    format!("oracle {o} vs series {s}")
                });
            }
        }
        for &(i, j) in &transverse {
            let Some(s) = p_tr.get(&(i, j)) else { continue };
            if let Some(c) =
                t.record_result(Suite::Routes, "closed = series", ev.transverse_closed(i, j), Some(i), Some(j))
            {
                t.record(Suite::Routes, "closed = series", &c == s, Some(i), Some(j), || {
                    format!("closed {c} vs series {s}")
                });
            }
            let class = EdgeClass { kind: EdgeKind::Transverse(i, j), reversed: false };
            if let Some(o) =
                t.record_result(Suite::Routes, "oracle = series", ev.transform(&class, Route::Oracle), Some(i), Some(j))
            {
                let o = o.value;
                t.record(Suite::Routes, "oracle = series", &o == s, Some(i), Some(j), || {
                    format!("oracle {o} vs series {s}")
                });
            }
        }
    }

    if has(Suite::Symmetry) {
        for &i in &aligned {
            let (Some(a), Ok(b)) = (p_al.get(&i), ev.aligned_series(d - 1 - i)) else { continue };
            t.record(Suite::Symmetry, "P(i) = P(d-1-i)", a == &b, Some(i), None, || format!("{a} vs {b}"));
        }
        for &(i, j) in &transverse {
            let (Some(a), Some(b)) = (p_tr.get(&(i, j)), p_tr.get(&(d - i, j))) else { continue };
            t.record(Suite::Symmetry, "P_j(i) = -P_j(d-i)", a == &-b.clone(), Some(i), Some(j), || {
                format!("{a} vs {b}")
            });
        }
    }

    if has(Suite::EdgeBounds) {
        for &i in &aligned {
            let Some(p) = p_al.get(&i) else { continue };
            let bound = per_edge_bound(&inst, &EdgeClass::aligned(i)).expect("aligned bound");
            t.record(Suite::EdgeBounds, "|P(i)| <= envelope", p.abs() <= bound, Some(i), None, || {
                format!("|{p}| > {bound}")
            });
        }
        for &(i, j) in &transverse {
            let Some(p) = p_tr.get(&(i, j)) else { continue };
            let class = EdgeClass { kind: EdgeKind::Transverse(i, j), reversed: false };
            let bound = per_edge_bound(&inst, &class).expect("valid transverse class");
            t.record(Suite::EdgeBounds, "|P(i,j)| <= envelope", p.abs() <= bound, Some(i), Some(j), || {
                format!("|{p}| > {bound}")
            });
        }
    }

    if has(Suite::SpineLower) {
        for &i in &aligned {
            let Some(p) = p_al.get(&i) else { continue };
            t.record(Suite::SpineLower, "P(i) >= 0", !p.is_negative(), Some(i), None, || format!("P = {p}"));
            if (0..d).contains(&i) {
                t.record(Suite::SpineLower, "P(i) >= 2 on [x,y]", p >= &int(2), Some(i), None, || format!("P = {p}"));
            }
        }
    }

    if has(Suite::Kernels) {
        check_kernels(&mut t, &ev);
    }
    if has(Suite::Harmonicity) {
        check_harmonicity(&mut t, cfg, &ev);
    }
    if has(Suite::Alternation) {
        check_alternation(&mut t, cfg, &ev);
    }

    let needs_norm = has(Suite::Theorem) || has(Suite::Summation) || has(Suite::Gj);
    let norm = if needs_norm {
        t.record_result(Suite::Theorem, "norm computable", norm_squared_with(&ev), None, None)
    } else {
        None
    };
    if let Some(norm) = &norm {
        let (c, k) = mutated_constants(q, cfg.mutation);
        let lower = int(4 * d);
        let upper = &c * int(d) + &k;
        if has(Suite::Theorem) {
            t.record(Suite::Theorem, "4d <= norm^2", &lower <= norm, None, None, || format!("norm^2 {norm} < {lower}"));
            t.record(Suite::Theorem, "norm^2 <= Cd + K", norm <= &upper, None, None, || {
                format!("norm^2 {norm} > {upper}")
            });
        }
        if has(Suite::Summation) {
            let env = envelope_sum(&inst);
            t.record(Suite::Summation, "norm^2 <= envelope sum", norm <= &env, None, None, || {
                format!("norm^2 {norm} > {env}")
            });
            t.record(Suite::Summation, "envelope sum <= Cd + K", env <= upper, None, None, || {
                format!("envelope sum {env} > {upper}")
            });
        }
        if has(Suite::Gj) {
            match fit {
                Some(Ok(fit)) => {
                    let pred = fit.predict(d);
                    t.record(Suite::Gj, "residual = 0", &pred == norm, None, None, || {
                        format!("norm^2 {norm} vs prediction {pred}")
                    });
                    t.record(Suite::Gj, "C' > 0", fit.c.is_positive(), None, None, || format!("C' = {}", fit.c));
                }
                Some(Err(e)) => t.record(Suite::Gj, "fit", false, None, None, || e.to_string()),
                None => {}
            }
        }
    }

    if has(Suite::Measures) {
        check_measures(&mut t, cfg, &inst);
    }
    t
}

fn check_kernels(t: &mut Tally, ev: &Evaluator) {
    let inst = ev.instance();
    let d = inst.d();
    let ks = ev.kernels();
    let minus = -Rational::one();
    let pairs = [
        ("-f reflected = f shifted by -d", ks.f.reflect().scale(&minus), ks.f.translate(-d)),
        ("g reflected = g", ks.g.reflect(), ks.g.clone()),
        ("h reflected = h", ks.h.reflect(), ks.h.clone()),
        ("-g_half reflected = g_half shifted by -1", ks.g_half.reflect().scale(&minus), ks.g_half.translate(-1)),
    ];
    for (name, a, b) in pairs {
        t.record(Suite::Kernels, name, a.same_function(&b), None, None, || "structural mismatch".into());
        let bad = (-50..=50).find(|&k| a.eval(k) != b.eval(k));
        t.record(Suite::Kernels, name, bad.is_none(), bad, None, || {
            format!("pointwise mismatch at k={}", bad.unwrap_or_default())
        });
    }
    for i in 0..d {
        let ti = average_t_of(&ks.f, d, i);
        let bad = (-50..=50).find(|&k| ti.eval(k).abs() < int(1));
        t.record(Suite::Kernels, "|T_i f| >= 1", bad.is_none(), Some(i), None, || {
            format!("at k={}", bad.unwrap_or_default())
        });
        let bad = (-50..=50).find(|&k| (ti.eval(k) * ks.g_half.eval(k)).is_negative());
        t.record(Suite::Kernels, "T_i f shares the sign of g_half", bad.is_none(), Some(i), None, || {
            format!("at k={}", bad.unwrap_or_default())
        });
    }
}

fn class_params(class: &EdgeClass) -> (Option<i64>, Option<i64>) {
    match class.kind {
        EdgeKind::Aligned(i) => (Some(i), None),
        EdgeKind::Transverse(i, j) => (Some(i), Some(j)),
    }
}

fn check_harmonicity(t: &mut Tally, cfg: &VerifyConfig, ev: &Evaluator) {
    let inst = ev.instance();
    let mut cache: HashMap<EdgeClass, Result<Rational>> = HashMap::new();
    for v in inst.vertices_near_segment(cfg.harmonic_radius) {
        let mut sum = Rational::zero();
        let mut failure = None;
        for n in inst.neighbors(&v) {
            let class = classify_edge(inst, &v, &n).expect("neighbours are adjacent");
            let value = cache.entry(class).or_insert_with(|| ev.transform(&class, Route::Series).map(|tv| tv.value));
            match value {
                Ok(x) => sum += &*x,
                Err(e) => failure = Some(e.to_string()),
            }
        }
        let ok = failure.is_none() && sum.is_zero();
        t.record(Suite::Harmonicity, "formula sum at vertex", ok, Some(v.spine), None, || {
            failure.unwrap_or_else(|| format!("sum {sum} at {v}"))
        });
    }
    for v in inst.vertices_near_segment(cfg.oracle_radius) {
        let sum: Rational =
            inst.neighbors(&v).into_iter().map(|n| oracle_edge(inst, &Edge { origin: v.clone(), target: n })).sum();
        t.record(Suite::Harmonicity, "oracle sum at vertex", sum.is_zero(), Some(v.spine), None, || {
            format!("sum {sum} at {v}")
        });
    }
}

fn check_alternation(t: &mut Tally, cfg: &VerifyConfig, ev: &Evaluator) {
    let inst = ev.instance();
    for e in inst.edges_near_segment(cfg.oracle_radius + 1) {
        let a = oracle_edge(inst, &e);
        let b = oracle_edge(inst, &e.reversed());
        let class = classify_edge(inst, &e.origin, &e.target).expect("edge");
        let (i, j) = class_params(&class);
        t.record(Suite::Alternation, "oracle", a == -b.clone(), i, j, || {
            format!("{a} vs {b} on {}->{}", e.origin, e.target)
        });
        if let (Ok(fa), Ok(fb)) = (ev.transform(&class, Route::Series), ev.transform(&class.flipped(), Route::Series)) {
            t.record(Suite::Alternation, "formula", fa.value == -fb.value.clone(), i, j, || {
                format!("{} vs {}", fa.value, fb.value)
            });
            t.record(Suite::Alternation, "formula = oracle on edge", fa.value == a, i, j, || {
                format!("formula {} vs oracle {a}", fa.value)
            });
        }
    }
}

fn check_measures(t: &mut Tally, cfg: &VerifyConfig, inst: &ProblemInstance) {
    let q = inst.q();
    let d = inst.d();
    let scale = cell_scale(cfg.mutation);
    let (k_span, l_span) = (8, cfg.j_max);
    let one = Rational::one();

    let mut aligned_params = vec![-1, 0, d];
    aligned_params.dedup();
    for &i in &aligned_params {
        let class = EdgeClass::aligned(i);
        let edge = realize_edge(inst, &class).expect("aligned edge");
        let plus =
            visual_measure_general(inst, &edge.origin, &positive_part(&edge)) * frac(i64::from(q) + 1, i64::from(q));
        let minus = visual_measure_general(inst, &edge.origin, &negative_part(&edge)) * int(i64::from(q) + 1);
        t.record(
            Suite::Measures,
            "nu_e^+ and nu_e^- are probabilities",
            plus == one && minus == one,
            Some(i),
            None,
            || format!("masses {plus}, {minus}"),
        );
        for k in i - k_span..=i + k_span {
            let closed = spine_cell_measure(inst, i, k) * &scale;
            let oracle = edge_measure_union(inst, &edge, &spine_cell_shadows(inst, k));
            t.record(Suite::Measures, "spine cell", closed == oracle, Some(i), None, || {
                format!("k={k}: closed form {closed} vs shadows {oracle}")
            });
        }
        let total = KernelSet::new(inst).g_half.sum_all().map(|s| s * frac(i64::from(q) - 1, i64::from(q)) * &scale);
        if let Some(total) = t.record_result(Suite::Measures, "spine partition mass = 0", total, Some(i), None) {
            t.record(Suite::Measures, "spine partition mass = 0", total.is_zero(), Some(i), None, || {
                format!("mass {total}")
            });
        }
    }

    for i in 1..d {
        for j in [1, 2, l_span] {
            let class = EdgeClass { kind: EdgeKind::Transverse(i, j), reversed: false };
            let edge = realize_edge(inst, &class).expect("transverse edge");
            let cell = |k: i64, l: i64| -> (Rational, Rational) {
                let closed = cross_cell_measure(inst, i, j, k, l).expect("valid class") * &scale;
                let shadows = cross_cell_shadows(inst, i, j, k, l).expect("valid class");
                (closed, edge_measure_union(inst, &edge, &shadows))
            };
            // for q = 2 the cells (i, l >= j) are empty; their closed-form values cancel only in aggregate
            let degenerate = |k: i64, l: i64| q == 2 && k == i && l >= j;
            for k in i - k_span..=i + k_span {
                for l in j - l_span..=j + l_span {
                    if degenerate(k, l) {
                        continue;
                    }
                    let (closed, oracle) = cell(k, l);
                    t.record(Suite::Measures, "cross cell", closed == oracle, Some(i), Some(j), || {
                        format!("(k,l)=({k},{l}): closed form {closed} vs shadows {oracle}")
                    });
                }
            }
            let qq = i64::from(q);
            let ks = KernelSet::new(inst);
            if q == 2 {
                let tail = ks.g_half.sum_over(Interval::new(Some(j + 1), None)).map(|s| s * frac(qq - 1, qq));
                if let Some(tail) =
                    t.record_result(Suite::Measures, "degenerate cells in aggregate", tail, Some(i), Some(j))
                {
                    let closed = (cross_cell_measure(inst, i, j, i, j).expect("valid class") + tail) * &scale;
                    let empty =
                        (j..=j + l_span).all(|l| cross_cell_shadows(inst, i, j, i, l).expect("valid").is_empty());
                    t.record(
                        Suite::Measures,
                        "degenerate cells in aggregate",
                        closed.is_zero() && empty,
                        Some(i),
                        Some(j),
                        || format!("closed-form aggregate {closed}, empty cells {empty}"),
                    );
                }
            }
            // total mass from the closed forms: row l = j, column k = i, centre
            let total = ks.g_half.sum_all().and_then(|gsum| {
                let gj = ks.g_half.eval(j);
                let hsum = ks.h.sum_all()?;
                let column = (gsum - &gj) * frac(qq - 1, qq);
                let row = &gj * frac(qq - 1, qq * qq) * hsum;
                Ok((column + row + cross_cell_measure(inst, i, j, i, j)?) * &scale)
            });
            if let Some(total) = t.record_result(Suite::Measures, "cross partition mass = 0", total, Some(i), Some(j)) {
                t.record(Suite::Measures, "cross partition mass = 0", total.is_zero(), Some(i), Some(j), || {
                    format!("mass {total}")
                });
            }
            let whole: Rational = {
                let x = inst.x();
                let s = Shadow::new(x.clone(), Vertex::spine(1)).expect("shadow");
                edge_measure_shadow(inst, &edge, &s) + edge_measure_shadow(inst, &edge, &s.complement())
            };
            t.record(Suite::Measures, "nu_e(boundary) = 0", whole.is_zero(), Some(i), Some(j), || {
                format!("mass {whole}")
            });
        }
    }
}
