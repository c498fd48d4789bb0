//! Exact piecewise kernels on ℤ and their infinite pairings.
//!
//! A [`PiecewiseKernel`] splits ℤ into consecutive integer intervals (the first
//! and last unbounded). On each interval the kernel is a finite sum of terms
//! `p(k)·r^k` with `p` a rational polynomial and `r` a non-zero rational; finitely
//! many points may carry an override value. This family is closed under
//! translation, reflection, linear combination and pointwise product, and sums
//! over unbounded intervals have closed forms whenever the tail decays
//! geometrically, so every series below is an exact finite computation.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, pow, qpow, Rational};
use crate::tree::{check_transverse, ProblemInstance};

/// g(x) = q^{-|x|}.
pub fn g_at(q: u32, x: i64) -> Rational {
    qpow(q, -x.abs())
}

/// g_½(x): g(x) for x <= 0 and -g(x-1) for x >= 1.
pub fn g_half_at(q: u32, x: i64) -> Rational {
    if x <= 0 {
        g_at(q, x)
    } else {
        -g_at(q, x - 1)
    }
}

/// h(x): g(x+1) left of -1, 1 on {-1, 1}, 0 at 0, g(x-1) right of 1.
pub fn h_at(q: u32, x: i64) -> Rational {
    match x {
        0 => Rational::zero(),
        -1 | 1 => Rational::one(),
        x if x < 0 => g_at(q, x + 1),
        x => g_at(q, x - 1),
    }
}

/// f(x) = d on x <= 0, d - 2x on [0, d], -d on x >= d.
pub fn f_at(d: i64, x: i64) -> Rational {
    int(d - 2 * x.clamp(0, d))
}

// polynomial helpers; coefficients in increasing degree

fn poly_trim(mut p: Vec<Rational>) -> Vec<Rational> {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn poly_eval(p: &[Rational], k: i64) -> Rational {
    let k = int(k);
    p.iter().rev().fold(Rational::zero(), |acc, c| acc * &k + c)
}

fn poly_add(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = a.len().max(b.len());
    let zero = Rational::zero();
    (0..n).map(|m| a.get(m).unwrap_or(&zero) + b.get(m).unwrap_or(&zero)).collect()
}

fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (m, x) in a.iter().enumerate() {
        for (n, y) in b.iter().enumerate() {
            out[m + n] += x * y;
        }
    }
    out
}

/// Coefficients of k ↦ p(k + c).
fn poly_shift(p: &[Rational], c: i64) -> Vec<Rational> {
    let step = [int(c), int(1)];
    let mut out: Vec<Rational> = Vec::new();
    for coef in p.iter().rev() {
        out = poly_add(&poly_mul(&out, &step), std::slice::from_ref(coef));
    }
    poly_trim(out)
}

/// One summand `p(k)·r^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    coeffs: Vec<Rational>,
    ratio: Rational,
}

impl Term {
    pub fn new(coeffs: Vec<Rational>, ratio: Rational) -> Self {
        assert!(!ratio.is_zero(), "geometric ratio must be non-zero");
        Self { coeffs: poly_trim(coeffs), ratio }
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c], Rational::one())
    }

    /// a·k + b.
    pub fn affine(a: Rational, b: Rational) -> Self {
        Self::new(vec![b, a], Rational::one())
    }

    /// c·r^k.
    pub fn geometric(c: Rational, ratio: Rational) -> Self {
        Self::new(vec![c], ratio)
    }

    pub fn eval(&self, k: i64) -> Rational {
        if self.coeffs.is_empty() {
            return Rational::zero();
        }
        poly_eval(&self.coeffs, k) * pow(&self.ratio, k)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn scaled(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect(), self.ratio.clone())
    }

    /// k ↦ term(k - t).
    fn translated(&self, t: i64) -> Self {
        let factor = pow(&self.ratio, -t);
        Self::new(poly_shift(&self.coeffs, -t).into_iter().map(|x| x * &factor).collect(), self.ratio.clone())
    }

    /// k ↦ term(-k).
    fn reflected(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(n, c)| if n % 2 == 1 { -c } else { c.clone() }).collect();
        Self::new(coeffs, self.ratio.recip())
    }

    fn times(&self, other: &Self) -> Self {
        Self::new(poly_mul(&self.coeffs, &other.coeffs), &self.ratio * &other.ratio)
    }

    fn sum_finite(&self, a: i64, b: i64) -> Rational {
        if a > b || self.is_zero() {
            return Rational::zero();
        }
        let mut power = pow(&self.ratio, a);
        let mut total = Rational::zero();
        for k in a..=b {
            total += poly_eval(&self.coeffs, k) * &power;
            power *= &self.ratio;
        }
        total
    }

    /// Σ_{k >= a} p(k) r^k, via the binomial basis: Σ_{m>=0} C(m,n) r^m = r^n / (1-r)^{n+1}.
    fn sum_right_tail(&self, a: i64) -> Result<Rational> {
        if self.is_zero() {
            return Ok(Rational::zero());
        }
        if self.ratio.abs() >= Rational::one() {
            return Err(Error::NotSummable(format!("right tail with ratio {}", self.ratio)));
        }
        let shifted = poly_shift(&self.coeffs, a);
        let deg = shifted.len() - 1;
        let mut diffs: Vec<Rational> = (0..=deg as i64).map(|m| poly_eval(&shifted, m)).collect();
        let one_minus = Rational::one() - &self.ratio;
        let mut total = Rational::zero();
        for n in 0..=deg {
            total += &diffs[0] * pow(&self.ratio, n as i64) / pow(&one_minus, n as i64 + 1);
            diffs = diffs.windows(2).map(|w| &w[1] - &w[0]).collect();
        }
        Ok(total * pow(&self.ratio, a))
    }

    fn sum_over(&self, lo: Option<i64>, hi: Option<i64>) -> Result<Rational> {
        match (lo, hi) {
            (Some(a), Some(b)) => Ok(self.sum_finite(a, b)),
            (Some(a), None) => self.sum_right_tail(a),
            (None, Some(b)) => self.reflected().sum_right_tail(-b),
            (None, None) => Ok(self.reflected().sum_right_tail(1)? + self.sum_right_tail(0)?),
        }
    }
}

fn normalize_terms(terms: Vec<Term>) -> Vec<Term> {
    let mut by_ratio: BTreeMap<Rational, Vec<Rational>> = BTreeMap::new();
    for t in terms {
        let slot = by_ratio.entry(t.ratio).or_default();
        *slot = poly_add(slot, &t.coeffs);
    }
    by_ratio.into_iter().map(|(ratio, coeffs)| Term::new(coeffs, ratio)).filter(|t| !t.is_zero()).collect()
}

/// An integer interval, `None` meaning unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl Interval {
    pub fn new(lo: Option<i64>, hi: Option<i64>) -> Self {
        Self { lo, hi }
    }

    fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(a), Some(b)) if a > b)
    }

    fn intersect(&self, other: &Interval) -> Interval {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Interval { lo, hi }
    }

    fn contains(&self, k: i64) -> bool {
        self.lo.is_none_or(|a| a <= k) && self.hi.is_none_or(|b| k <= b)
    }
}

/// A function ℤ → ℚ given piecewise by exponential polynomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseKernel {
    /// Strictly increasing; piece m covers [breaks[m-1], breaks[m]).
    breaks: Vec<i64>,
    pieces: Vec<Vec<Term>>,
    overrides: BTreeMap<i64, Rational>,
}

impl PiecewiseKernel {
    pub fn zero() -> Self {
        Self { breaks: Vec::new(), pieces: vec![Vec::new()], overrides: BTreeMap::new() }
    }

    pub fn constant(c: Rational) -> Self {
        Self { breaks: Vec::new(), pieces: vec![vec![Term::constant(c)]], overrides: BTreeMap::new() }.normalized()
    }

    /// The indicator of a single point.
    pub fn indicator(k: i64) -> Self {
        Self::zero().with_override(k, Rational::one())
    }

    /// Builds a kernel from consecutive intervals covering ℤ; empty intervals are skipped.
    pub fn from_intervals(segments: Vec<(Interval, Vec<Term>)>) -> Result<Self> {
        let segments: Vec<_> = segments.into_iter().filter(|(iv, _)| !iv.is_empty()).collect();
        let bad = |msg: &str| Error::InvalidParameters(format!("kernel intervals: {msg}"));
        let first = segments.first().ok_or_else(|| bad("no intervals"))?;
        if first.0.lo.is_some() {
            return Err(bad("first interval must be unbounded below"));
        }
        if segments.last().expect("non-empty").0.hi.is_some() {
            return Err(bad("last interval must be unbounded above"));
        }
        let mut breaks = Vec::new();
        for w in segments.windows(2) {
            match (w[0].0.hi, w[1].0.lo) {
                (Some(h), Some(l)) if l == h + 1 => breaks.push(l),
                _ => return Err(bad("intervals must be consecutive")),
            }
        }
        let pieces = segments.into_iter().map(|(_, t)| t).collect();
        Ok(Self { breaks, pieces, overrides: BTreeMap::new() }.normalized())
    }

    /// Replaces the value at `k`.
    pub fn with_override(mut self, k: i64, value: Rational) -> Self {
        self.overrides.insert(k, value);
        self.normalized()
    }

    pub fn interval(&self, m: usize) -> Interval {
        let lo = if m == 0 { None } else { Some(self.breaks[m - 1]) };
        let hi = self.breaks.get(m).map(|b| b - 1);
        Interval { lo, hi }
    }

    /// The pieces, each with its interval and terms.
    pub fn pieces(&self) -> impl Iterator<Item = (Interval, &[Term])> {
        self.pieces.iter().enumerate().map(|(m, t)| (self.interval(m), t.as_slice()))
    }

    pub fn overrides(&self) -> &BTreeMap<i64, Rational> {
        &self.overrides
    }

    fn piece_at(&self, k: i64) -> usize {
        self.breaks.partition_point(|&b| b <= k)
    }

    fn piece_value(&self, k: i64) -> Rational {
        self.pieces[self.piece_at(k)].iter().map(|t| t.eval(k)).sum()
    }

    pub fn eval(&self, k: i64) -> Rational {
        match self.overrides.get(&k) {
            Some(v) => v.clone(),
            None => self.piece_value(k),
        }
    }

    fn normalized(mut self) -> Self {
        self.pieces = self.pieces.into_iter().map(normalize_terms).collect();
        let mut m = 0;
        while m < self.breaks.len() {
            if self.pieces[m] == self.pieces[m + 1] {
                self.breaks.remove(m);
                self.pieces.remove(m + 1);
            } else {
                m += 1;
            }
        }
        let redundant: Vec<i64> =
            self.overrides.iter().filter(|(k, v)| self.piece_value(**k) == **v).map(|(k, _)| *k).collect();
        for k in redundant {
            self.overrides.remove(&k);
        }
        self
    }

    /// Common refinement: merged breaks and, per sub-piece, the piece index in each operand.
    fn refine(&self, other: &Self) -> (Vec<i64>, Vec<(usize, usize)>) {
        let mut breaks: Vec<i64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_unstable();
        breaks.dedup();
        let idx = (0..=breaks.len())
            .map(|m| {
                let rep = if m == 0 { breaks.first().map_or(0, |b| b - 1) } else { breaks[m - 1] };
                (self.piece_at(rep), other.piece_at(rep))
            })
            .collect();
        (breaks, idx)
    }

    fn combine(
        &self,
        other: &Self,
        terms: impl Fn(&[Term], &[Term]) -> Vec<Term>,
        values: impl Fn(Rational, Rational) -> Rational,
    ) -> Self {
        let (breaks, idx) = self.refine(other);
        let pieces = idx.iter().map(|&(a, b)| terms(&self.pieces[a], &other.pieces[b])).collect();
        let overrides = self
            .overrides
            .keys()
            .chain(other.overrides.keys())
            .map(|&k| (k, values(self.eval(k), other.eval(k))))
            .collect();
        Self { breaks, pieces, overrides }.normalized()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a.iter().chain(b).cloned().collect(), |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|ts| ts.iter().map(|t| t.scaled(c)).collect()).collect(),
            overrides: self.overrides.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
        .normalized()
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a.iter().flat_map(|x| b.iter().map(move |y| x.times(y))).collect(), |a, b| a * b)
    }

    /// τ_t: k ↦ self(k - t).
    pub fn translate(&self, t: i64) -> Self {
        Self {
            breaks: self.breaks.iter().map(|b| b + t).collect(),
            pieces: self.pieces.iter().map(|ts| ts.iter().map(|x| x.translated(t)).collect()).collect(),
            overrides: self.overrides.iter().map(|(k, v)| (k + t, v.clone())).collect(),
        }
        .normalized()
    }

    /// Reflection k ↦ self(-k).
    pub fn reflect(&self) -> Self {
        // [b_{m-1}, b_m) maps to [1 - b_m, 1 - b_{m-1})
        let breaks = self.breaks.iter().rev().map(|b| 1 - b).collect();
        let pieces = self.pieces.iter().rev().map(|ts| ts.iter().map(Term::reflected).collect()).collect();
        let overrides = self.overrides.iter().map(|(k, v)| (-k, v.clone())).collect();
        Self { breaks, pieces, overrides }.normalized()
    }

    /// Σ_{k ∈ range} self(k).
    pub fn sum_over(&self, range: Interval) -> Result<Rational> {
        let mut total = Rational::zero();
        for (m, terms) in self.pieces.iter().enumerate() {
            let iv = self.interval(m).intersect(&range);
            if iv.is_empty() {
                continue;
            }
            for t in terms {
                total += t.sum_over(iv.lo, iv.hi)?;
            }
        }
        for (k, v) in &self.overrides {
            if range.contains(*k) {
                total += v - self.piece_value(*k);
            }
        }
        Ok(total)
    }

    /// Σ_{k ∈ ℤ} self(k).
    pub fn sum_all(&self) -> Result<Rational> {
        self.sum_over(Interval::new(None, None))
    }

    /// Σ_{k >= 1} |self(k)|.
    pub fn l1_norm_positives(&self) -> Result<Rational> {
        let positives = Interval::new(Some(1), None);
        let last = self.pieces.len() - 1;
        let mut total = Rational::zero();
        for m in 0..last {
            let iv = self.interval(m).intersect(&positives);
            if let (Some(a), Some(b)) = (iv.lo, iv.hi) {
                total += (a..=b).map(|k| self.eval(k).abs()).sum::<Rational>();
            }
        }
        let start = self.interval(last).lo.map_or(1, |a| a.max(1));
        let terms = &self.pieces[last];
        if terms.is_empty() {
            let tail_overrides = self.overrides.range(start..).map(|(_, v)| v.abs());
            return Ok(total + tail_overrides.sum::<Rational>());
        }
        let [term] = terms.as_slice() else {
            return Err(Error::SignIndeterminate("tail mixes several geometric ratios".into()));
        };
        if !term.ratio.is_positive() {
            return Err(Error::SignIndeterminate(format!("tail ratio {} is not positive", term.ratio)));
        }
        // beyond the Cauchy root bound the polynomial keeps the sign of its leading coefficient
        let lead = term.coeffs.last().expect("non-zero term");
        let bound = term.coeffs.iter().map(|c| (c / lead).abs()).max().unwrap_or_else(Rational::zero);
        let root_free = bound.floor().to_integer();
        let root_free: i64 =
            i64::try_from(root_free).map_err(|_| Error::NotSummable("root bound too large".into()))? + 2;
        let last_override = self.overrides.keys().next_back().map_or(start, |k| k + 1);
        let cut = start.max(root_free).max(last_override);
        total += (start..cut).map(|k| self.eval(k).abs()).sum::<Rational>();
        let tail = term.sum_over(Some(cut), None)?;
        Ok(total + if lead.is_negative() { -tail } else { tail })
    }

    /// Extensional equality on ℤ, independent of how the pieces are cut.
    pub fn same_function(&self, other: &Self) -> bool {
        let (breaks, idx) = self.refine(other);
        for (m, &(a, b)) in idx.iter().enumerate() {
            let lo = if m == 0 { None } else { Some(breaks[m - 1]) };
            let hi = breaks.get(m).map(|x| x - 1);
            match (lo, hi) {
                (Some(lo), Some(hi)) => {
                    if (lo..=hi).any(|k| self.eval(k) != other.eval(k)) {
                        return false;
                    }
                }
                _ => {
                    if self.pieces[a] != other.pieces[b] {
                        return false;
                    }
                }
            }
        }
        self.overrides.keys().chain(other.overrides.keys()).all(|&k| self.eval(k) == other.eval(k))
    }
}

/// Σ_k a(k)·b(k).
pub fn pair(a: &PiecewiseKernel, b: &PiecewiseKernel) -> Result<Rational> {
    a.mul(b).sum_all()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    F,
    G,
    GHalf,
    H,
}

/// Exact restriction to ℤ of f, g, g_½ or h for the instance.
pub fn make_kernel(kind: KernelKind, inst: &ProblemInstance) -> PiecewiseKernel {
    let q = int(i64::from(inst.q()));
    let qinv = q.recip();
    let below = |hi: i64| Interval::new(None, Some(hi));
    let above = |lo: i64| Interval::new(Some(lo), None);
    let segments = match kind {
        KernelKind::F => {
            let d = inst.d();
            if d == 0 {
                return PiecewiseKernel::zero();
            }
            vec![
                (below(0), vec![Term::constant(int(d))]),
                (Interval::new(Some(1), Some(d - 1)), vec![Term::affine(int(-2), int(d))]),
                (above(d), vec![Term::constant(int(-d))]),
            ]
        }
        KernelKind::G => {
            vec![(below(0), vec![Term::geometric(int(1), q.clone())]), (above(1), vec![Term::geometric(int(1), qinv)])]
        }
        KernelKind::GHalf => vec![
            (below(0), vec![Term::geometric(int(1), q.clone())]),
            (above(1), vec![Term::geometric(-q.clone(), qinv)]),
        ],
        KernelKind::H => {
            let h = PiecewiseKernel::from_intervals(vec![
                (below(-2), vec![Term::geometric(q.clone(), q.clone())]),
                (Interval::new(Some(-1), Some(1)), vec![Term::constant(int(1))]),
                (above(2), vec![Term::geometric(q.clone(), qinv)]),
            ])
            .expect("consecutive intervals");
            return h.with_override(0, Rational::zero());
        }
    };
    PiecewiseKernel::from_intervals(segments).expect("consecutive intervals")
}

/// T_i f = ½(τ_{-i} + τ_{-d+i+1}) f.
pub fn average_t(inst: &ProblemInstance, i: i64) -> Result<PiecewiseKernel> {
    if inst.d() < 1 {
        return Err(Error::InvalidParameters("T_i requires d >= 1".into()));
    }
    Ok(average_t_of(&make_kernel(KernelKind::F, inst), inst.d(), i))
}

pub(crate) fn average_t_of(f: &PiecewiseKernel, d: i64, i: i64) -> PiecewiseKernel {
    f.translate(-i).add(&f.translate(-d + i + 1)).scale(&Rational::new(1.into(), 2.into()))
}

/// T̃_i f = ½(τ_{-i} − τ_{i-d}) f, for 1 <= i <= d-1.
pub fn average_t_tilde(inst: &ProblemInstance, i: i64) -> Result<PiecewiseKernel> {
    check_transverse(inst, i, 1)?;
    let f = make_kernel(KernelKind::F, inst);
    Ok(f.translate(-i).sub(&f.translate(i - inst.d())).scale(&Rational::new(1.into(), 2.into())))
}

/// The four kernels of one instance, built once and shared by a sweep.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub f: PiecewiseKernel,
    pub g: PiecewiseKernel,
    pub g_half: PiecewiseKernel,
    pub h: PiecewiseKernel,
}

impl KernelSet {
    pub fn new(inst: &ProblemInstance) -> Self {
        Self {
            f: make_kernel(KernelKind::F, inst),
            g: make_kernel(KernelKind::G, inst),
            g_half: make_kernel(KernelKind::GHalf, inst),
            h: make_kernel(KernelKind::H, inst),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;
    use proptest::prelude::*;

    fn inst(q: i64, d: i64) -> ProblemInstance {
        ProblemInstance::new(q, d).unwrap()
    }

    /// Truncated Σ_{|k| <= n} of a kernel.
    fn truncated_sum(k: &PiecewiseKernel, n: i64) -> Rational {
        (-n..=n).map(|x| k.eval(x)).sum()
    }

    #[test]
    fn kernel_point_values() {
        let i = inst(2, 4);
        for x in -20..20 {
            assert_eq!(make_kernel(KernelKind::F, &i).eval(x), f_at(4, x));
            assert_eq!(make_kernel(KernelKind::G, &i).eval(x), g_at(2, x));
            assert_eq!(make_kernel(KernelKind::GHalf, &i).eval(x), g_half_at(2, x));
            assert_eq!(make_kernel(KernelKind::H, &i).eval(x), h_at(2, x));
        }
        assert_eq!(make_kernel(KernelKind::F, &i).eval(0), int(4));
        assert_eq!(make_kernel(KernelKind::GHalf, &i).eval(1), int(-1));
        assert_eq!(make_kernel(KernelKind::H, &i).eval(0), int(0));
        assert!(make_kernel(KernelKind::F, &inst(3, 0)).same_function(&PiecewiseKernel::zero()));
    }

    #[test]
    fn translate_and_reflect() {
        let i = inst(3, 5);
        let f = make_kernel(KernelKind::F, &i);
        assert_eq!(f.translate(0), f);
        let g = make_kernel(KernelKind::G, &i);
        assert!(g.reflect().same_function(&g));
        assert_eq!(f.translate(3).reflect().eval(-3), f.eval(0));
        for t in [-7, -1, 0, 2, 9] {
            assert_eq!(f.translate(t).reflect(), f.reflect().translate(-t));
            let h = make_kernel(KernelKind::H, &i);
            assert_eq!(h.translate(t).reflect(), h.reflect().translate(-t));
        }
    }

    #[test]
    fn kernel_symmetries_hold_structurally_and_pointwise() {
        for q in [2, 3, 5] {
            for d in 1..=10 {
                let i = inst(q, d);
                let ks = KernelSet::new(&i);
                let minus_one = -Rational::one();
                let lhs_f = ks.f.reflect().scale(&minus_one);
                let rhs_f = ks.f.translate(-d);
                let lhs_gh = ks.g_half.reflect().scale(&minus_one);
                let rhs_gh = ks.g_half.translate(-1);
                assert!(lhs_f.same_function(&rhs_f));
                assert!(ks.g.reflect().same_function(&ks.g));
                assert!(ks.h.reflect().same_function(&ks.h));
                assert!(lhs_gh.same_function(&rhs_gh));
                for k in -50..=50 {
                    assert_eq!(lhs_f.eval(k), rhs_f.eval(k));
                    assert_eq!(ks.g.eval(-k), ks.g.eval(k));
                    assert_eq!(ks.h.eval(-k), ks.h.eval(k));
                    assert_eq!(lhs_gh.eval(k), rhs_gh.eval(k));
                }
            }
        }
    }

    #[test]
    fn pair_examples() {
        let i = inst(2, 2);
        let ks = KernelSet::new(&i);
        assert_eq!(pair(&PiecewiseKernel::indicator(0), &ks.g_half).unwrap(), int(1));
        assert_eq!(pair(&PiecewiseKernel::constant(int(1)), &ks.g_half).unwrap(), int(0));
        assert_eq!(pair(&ks.f, &ks.g_half).unwrap(), int(6));
    }

    /// Truncated reference for ⟨f, g_½⟩ at q = 2, d = 2: the omitted tail is below
    /// 2·2·Σ_{|k|>60} 2^{-(|k|-1)} < 2^{-50}.
    #[test]
    fn pair_agrees_with_truncated_sum() {
        let i = inst(2, 2);
        let ks = KernelSet::new(&i);
        let truncated: Rational = (-60..=60).map(|k| f_at(2, k) * g_half_at(2, k)).sum();
        let exact = pair(&ks.f, &ks.g_half).unwrap();
        assert!((exact - truncated).abs() < qpow(2, -50));
    }

    #[test]
    fn divergent_pairing_is_rejected() {
        let i = inst(2, 3);
        let f = make_kernel(KernelKind::F, &i);
        assert!(matches!(pair(&f, &PiecewiseKernel::constant(int(1))), Err(Error::NotSummable(_))));
    }

    #[test]
    fn polynomial_tails_sum_exactly() {
        // Σ_{k>=0} k² 2^{-k} = 6 and Σ_{k>=3} (k+1) 3^{-k} = 9/4 - 2 = 1/4
        let t = Term::new(vec![int(0), int(0), int(1)], frac(1, 2));
        assert_eq!(t.sum_over(Some(0), None).unwrap(), int(6));
        let t = Term::new(vec![int(1), int(1)], frac(1, 3));
        let truncated: Rational = (3..200).map(|k| t.eval(k)).sum();
        let exact = t.sum_over(Some(3), None).unwrap();
        assert_eq!(exact, frac(1, 4));
        assert!((exact - truncated).abs() < qpow(3, -150));
        // left tail of k·2^k over k <= -1 equals -2
        let t = Term::new(vec![int(0), int(1)], int(2));
        assert_eq!(t.sum_over(None, Some(-1)).unwrap(), int(-2));
    }

    #[test]
    fn average_t_examples() {
        let i = inst(2, 4);
        let t0 = average_t(&i, 0).unwrap();
        assert_eq!(t0.eval(1), int(-1));
        assert_eq!(t0.eval(0), int(1));
        for d in 1..8 {
            let i = inst(3, d);
            for a in -6..d + 6 {
                let t = average_t(&i, a).unwrap();
                let minus_shift = t.translate(-1).scale(&-Rational::one());
                assert!(t.reflect().same_function(&minus_shift));
                for k in -30..30 {
                    assert_eq!(t.eval(k), -t.eval(1 - k));
                }
            }
        }
        assert!(average_t(&inst(2, 0), 0).is_err());
    }

    #[test]
    fn average_t_sign_floor_and_envelope() {
        for q in [2, 3, 5] {
            for d in 1..=10 {
                let i = inst(q, d);
                let gh = make_kernel(KernelKind::GHalf, &i);
                for a in -6..=d + 6 {
                    let t = average_t(&i, a).unwrap();
                    for k in -50..=50 {
                        assert!(!(t.eval(k) * gh.eval(k)).is_negative(), "sign q={q} d={d} i={a} k={k}");
                        if (0..d).contains(&a) {
                            assert!(t.eval(k).abs() >= int(1), "floor d={d} i={a} k={k}");
                        }
                    }
                    // k <= 0 follows from the symmetry about 1/2
                    for k in 1..=50 {
                        let envelope = if a < 0 {
                            int((k + a).max(0))
                        } else if a < d {
                            int(2 * k - 1)
                        } else {
                            int((k - (a - d + 1)).max(0))
                        };
                        assert!(t.eval(k).abs() <= envelope, "envelope q={q} d={d} i={a} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn average_t_tilde_examples() {
        let i = inst(2, 4);
        let t = average_t_tilde(&i, 1).unwrap();
        assert_eq!(t.eval(0), int(2));
        assert_eq!(t.eval(2), int(1));
        assert_eq!(t.eval(3), int(0));
        for d in 2..10 {
            let i = inst(5, d);
            for a in 1..=d / 2 {
                let t = average_t_tilde(&i, a).unwrap();
                assert!(t.reflect().same_function(&t));
                let fi = d - 2 * a;
                for k in 0..=d + 3 {
                    let expected = if k <= a {
                        int(fi)
                    } else if k <= d - a {
                        int(fi - (k - a))
                    } else {
                        int(0)
                    };
                    assert_eq!(t.eval(k), expected, "d={d} i={a} k={k}");
                    assert!(!t.eval(-k).is_negative());
                }
            }
        }
        assert!(average_t_tilde(&inst(2, 4), 0).is_err());
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(make_kernel(KernelKind::GHalf, &inst(2, 1)).l1_norm_positives().unwrap(), int(2));
        for q in 2..8 {
            let gh = make_kernel(KernelKind::GHalf, &inst(q, 1));
            assert_eq!(gh.l1_norm_positives().unwrap(), frac(q, q - 1));
        }
        assert_eq!(PiecewiseKernel::zero().l1_norm_positives().unwrap(), int(0));
        // sign change in the tail: |k - 5| 2^{-k}
        let k = PiecewiseKernel::from_intervals(vec![
            (Interval::new(None, Some(0)), vec![]),
            (Interval::new(Some(1), None), vec![Term::new(vec![int(-5), int(1)], frac(1, 2))]),
        ])
        .unwrap();
        let truncated: Rational = (1..300).map(|x| k.eval(x).abs()).sum();
        assert!((k.l1_norm_positives().unwrap() - truncated).abs() < qpow(2, -280));
    }

    #[test]
    fn geometric_row_sum_identity_only_at_q2() {
        for q in 2..7u32 {
            let gh = make_kernel(KernelKind::GHalf, &inst(i64::from(q), 1));
            for j in 1..8 {
                let tail = gh.sum_over(Interval::new(Some(j), None)).unwrap();
                assert_eq!(tail == int(i64::from(q)) * g_half_at(q, j), q == 2, "q={q} j={j}");
            }
        }
    }

    fn arb_kernel() -> impl Strategy<Value = PiecewiseKernel> {
        (2i64..6, 0i64..8, prop::sample::select(vec![KernelKind::F, KernelKind::G, KernelKind::GHalf, KernelKind::H]))
            .prop_map(|(q, d, kind)| make_kernel(kind, &inst(q, d)))
    }

    proptest! {
        #[test]
        fn pairing_is_invariant_under_translation_and_reflection(
            q in 2i64..6, d in 1i64..8, t in -20i64..=20, s in -5i64..=5,
        ) {
            let ks = KernelSet::new(&inst(q, d));
            let a = ks.f.translate(s);
            for b in [&ks.g_half, &ks.h, &ks.g] {
                let base = pair(&a, b).unwrap();
                prop_assert_eq!(pair(&a.translate(t), &b.translate(t)).unwrap(), base.clone());
                prop_assert_eq!(pair(&a.reflect(), &b.reflect()).unwrap(), base);
            }
        }

        #[test]
        fn algebra_matches_pointwise_values(a in arb_kernel(), b in arb_kernel(), t in -10i64..10) {
            let sum = a.add(&b);
            let prod = a.mul(&b.translate(t));
            for k in -25..25 {
                prop_assert_eq!(sum.eval(k), a.eval(k) + b.eval(k));
                prop_assert_eq!(prod.eval(k), a.eval(k) * b.eval(k - t));
            }
        }

        #[test]
        fn exact_sum_matches_truncation(q in 2i64..6, d in 0i64..6, t in -6i64..6) {
            let ks = KernelSet::new(&inst(q, d));
            let k = ks.f.mul(&ks.h.translate(t));
            let exact = k.sum_all().unwrap();
            // omitted terms are bounded by 2·d·q·Σ_{m>=70-|t|} q^{-m}
            prop_assert!((exact - truncated_sum(&k, 80)).abs() < qpow(q as u32, -60));
        }
    }
}
