//! The Poisson transform of B(x, y) on edge classes, by three independent routes:
//! the integration-formula series, the rearranged closed forms, and a finite
//! level-set oracle built on the shadow algebra.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{average_t_of, f_at, pair, KernelSet};
use crate::measure::edge_measure_shadow;
use crate::rational::{frac, int, qpow, Rational};
use crate::tree::{check_transverse, realize_edge, Edge, EdgeClass, EdgeKind, ProblemInstance, Shadow, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Route {
    Series,
    /// Spherical rearrangement: ℓ¹ norms for aligned edges, the closed form for transverse ones.
    Rearranged,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformValue {
    pub value: Rational,
    pub route: Route,
}

/// Kernel-backed evaluator for one instance; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Evaluator {
    inst: ProblemInstance,
    kernels: KernelSet,
}

impl Evaluator {
    pub fn new(inst: ProblemInstance) -> Self {
        Self { kernels: KernelSet::new(&inst), inst }
    }

    /// Uses a prepared (possibly altered) kernel set.
    pub fn with_kernels(inst: ProblemInstance, kernels: KernelSet) -> Self {
        Self { inst, kernels }
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.inst
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    fn q(&self) -> i64 {
        i64::from(self.inst.q())
    }

    fn g_half(&self, x: i64) -> Rational {
        self.kernels.g_half.eval(x)
    }

    /// P(i) = (q-1)/q · ⟨f, τ_i g_½⟩.
    pub fn aligned_series(&self, i: i64) -> Result<Rational> {
        let q = self.q();
        Ok(frac(q - 1, q) * pair(&self.kernels.f, &self.kernels.g_half.translate(i))?)
    }

    /// P(i) = 2(q-1)/q · ‖T_i f · g_½‖_{ℓ¹(ℕ*)}.
    pub fn aligned_rearranged(&self, i: i64) -> Result<Rational> {
        let q = self.q();
        let t = average_t_of(&self.kernels.f, self.inst.d(), i);
        Ok(frac(2 * (q - 1), q) * t.mul(&self.kernels.g_half).l1_norm_positives()?)
    }

    /// P(i, j) = -(2/q) f(i) g_½(j) + (q-1)/q² · g_½(j) ⟨f, τ_i h⟩.
    pub fn transverse_series(&self, i: i64, j: i64) -> Result<Rational> {
        check_transverse(&self.inst, i, j)?;
        let q = self.q();
        let gj = self.g_half(j);
        let fi = self.kernels.f.eval(i);
        let paired = pair(&self.kernels.f, &self.kernels.h.translate(i))?;
        Ok(frac(-2, q) * fi * &gj + frac(q - 1, q * q) * gj * paired)
    }

    /// Closed form -2q^{-i}/(q-1) · g_½(j) · (1 - q^{-f(i)}) on 1 <= i <= d/2,
    /// extended by P_j(d-i) = -P_j(i). The intermediate Δ(i), Σ(i) must reproduce it.
    pub fn transverse_closed(&self, i: i64, j: i64) -> Result<Rational> {
        check_transverse(&self.inst, i, j)?;
        let d = self.inst.d();
        if 2 * i > d {
            return Ok(-self.transverse_closed(d - i, j)?);
        }
        let q = self.q();
        let qu = self.inst.q();
        let fi = d - 2 * i;
        let gj = self.g_half(j);
        let closed = frac(-2, q - 1) * qpow(qu, -i) * &gj * (Rational::one() - qpow(qu, -fi));

        let f = &self.kernels.f;
        let tilde = f.translate(-i).sub(&f.translate(i - d)).scale(&frac(1, 2));
        let delta = tilde.mul(&self.kernels.h).l1_norm_positives()?;
        let sigma = delta - frac(q * fi, q - 1);
        let via_sigma = frac(2 * (q - 1), q * q) * gj * sigma;
        if via_sigma != closed {
            return Err(Error::RouteMismatch(format!(
                "Σ-form {via_sigma} differs from closed form {closed} at (i, j) = ({i}, {j})"
            )));
        }
        Ok(closed)
    }

    /// Value of the transform on a class by the chosen route; reversal negates.
    pub fn transform(&self, class: &EdgeClass, route: Route) -> Result<TransformValue> {
        let value = match (route, class.kind) {
            (Route::Oracle, _) => return Ok(TransformValue { value: oracle_transform(&self.inst, class)?, route }),
            (Route::Series, EdgeKind::Aligned(i)) => self.aligned_series(i)?,
            (Route::Rearranged, EdgeKind::Aligned(i)) => self.aligned_rearranged(i)?,
            (Route::Series, EdgeKind::Transverse(i, j)) => self.transverse_series(i, j)?,
            (Route::Rearranged, EdgeKind::Transverse(i, j)) => self.transverse_closed(i, j)?,
        };
        Ok(TransformValue { value: if class.reversed { -value } else { value }, route })
    }
}

pub fn p_aligned_series(inst: &ProblemInstance, i: i64) -> Result<Rational> {
    Evaluator::new(*inst).aligned_series(i)
}

pub fn p_aligned_rearranged(inst: &ProblemInstance, i: i64) -> Result<Rational> {
    Evaluator::new(*inst).aligned_rearranged(i)
}

pub fn p_transverse_series(inst: &ProblemInstance, i: i64, j: i64) -> Result<Rational> {
    Evaluator::new(*inst).transverse_series(i, j)
}

pub fn p_transverse_closed(inst: &ProblemInstance, i: i64, j: i64) -> Result<Rational> {
    Evaluator::new(*inst).transverse_closed(i, j)
}

/// ∫ B(x, y) dν_e over the d+1 Busemann level sets, for any concrete edge.
pub fn oracle_edge(inst: &ProblemInstance, edge: &Edge) -> Rational {
    let d = inst.d();
    if d == 0 {
        return Rational::zero();
    }
    // m_k = ν_e(Ω_x(σ(k))); the level set of value d-2k is Ω_x(σ(k)) ∖ Ω_x(σ(k+1))
    let x = inst.x();
    let m: Vec<Rational> = (1..=d)
        .map(|k| {
            let shadow = Shadow::new(x.clone(), Vertex::spine(k)).expect("k >= 1");
            edge_measure_shadow(inst, edge, &shadow)
        })
        .collect();
    let level = |k: i64| -> Rational {
        let inner = |k: i64| if k == 0 { Rational::zero() } else { m[(k - 1) as usize].clone() };
        match k {
            0 => -inner(1),
            k if k == d => inner(d),
            k => inner(k) - inner(k + 1),
        }
    };
    (0..=d).map(|k| int(d - 2 * k) * level(k)).sum()
}

/// The level-set oracle on a realized edge of the class.
pub fn oracle_transform(inst: &ProblemInstance, class: &EdgeClass) -> Result<Rational> {
    Ok(oracle_edge(inst, &realize_edge(inst, class)?))
}

/// Per-edge envelopes for |P(i)| and |P(i, j)| as stated for the summation argument.
pub fn per_edge_bound(inst: &ProblemInstance, class: &EdgeClass) -> Result<Rational> {
    let q = inst.q();
    let qq = i64::from(q);
    let d = inst.d();
    let c = frac(2, qq - 1);
    Ok(match class.kind {
        EdgeKind::Aligned(i) if i < 0 => c * qpow(q, -(i.abs() - 1)),
        EdgeKind::Aligned(i) if i < d => frac(2 * (qq + 1), qq - 1),
        EdgeKind::Aligned(i) => c * qpow(q, -(i - d - 1)),
        EdgeKind::Transverse(i, j) => {
            check_transverse(inst, i, j)?;
            if 2 * i <= d {
                c * qpow(q, -(i + j - 1))
            } else {
                c * qpow(q, -(d - i + j - 1))
            }
        }
    })
}

/// The aligned envelope symmetric under i ↦ d-1-i: identical to [`per_edge_bound`]
/// except on i >= d, where it is 2/(q-1)·q^{-(i-d)}.
pub fn per_edge_bound_symmetric(inst: &ProblemInstance, class: &EdgeClass) -> Result<Rational> {
    match class.kind {
        EdgeKind::Aligned(i) if i >= inst.d() => {
            let q = inst.q();
            Ok(frac(2, i64::from(q) - 1) * qpow(q, -(i - inst.d())))
        }
        _ => per_edge_bound(inst, class),
    }
}

/// B(x, y) sampled on the shadows Ω_x(u), u ∈ S_R(x); exact when R >= d.
pub fn busemann_on_sphere(inst: &ProblemInstance, radius: u32) -> BTreeMap<Vertex, Rational> {
    inst.sphere(&inst.x(), radius)
        .into_iter()
        .map(|u| {
            let value = f_at(inst.d(), u.spine);
            (u, value)
        })
        .collect()
}

/// Σ_u φ(u) ν_e(Ω_x(u)) for φ constant on each depth-R shadow seen from x.
pub fn transform_locally_constant(
    inst: &ProblemInstance,
    phi: &BTreeMap<Vertex, Rational>,
    radius: u32,
    class: &EdgeClass,
) -> Result<Rational> {
    if radius == 0 {
        return Err(Error::InvalidParameters("locally constant functions need R >= 1".into()));
    }
    let edge = realize_edge(inst, class)?;
    let x = inst.x();
    let mut total = Rational::zero();
    for u in inst.sphere(&x, radius) {
        let value = phi.get(&u).ok_or_else(|| Error::IncompleteCover(u.to_string()))?;
        if !value.is_zero() {
            let shadow = Shadow::new(x.clone(), u).expect("radius >= 1");
            total += value * edge_measure_shadow(inst, &edge, &shadow);
        }
    }
    Ok(total)
}
