//! Visual measures ν_x, signed edge measures ν_e and the cell measures of the
//! two boundary partitions used by the integration formulae.
//!
//! Every value is an exact rational. Measures of arbitrary shadows are obtained
//! from the half-tree each shadow bounds: two shadows are nested, disjoint, equal
//! or jointly cover ∂X, and inclusion-exclusion handles the last case.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::kernel::{g_half_at, h_at};
use crate::rational::{frac, int, qpow, Rational};
use crate::tree::{check_transverse, distance, shadow_relation, Edge, ProblemInstance, Shadow, ShadowRelation, Vertex};

fn sphere_share(q: u32, n: i64) -> Rational {
    // 1 / (q^{n-1} (q+1))
    (qpow(q, n - 1) * int(i64::from(q) + 1)).recip()
}

/// ν_base(Ω_base(z)) = 1/(q^{n-1}(q+1)) with n = d(base, z).
pub fn visual_measure(inst: &ProblemInstance, base: &Vertex, shadow: &Shadow) -> Result<Rational> {
    if shadow.base() != base {
        return Err(Error::BaseMismatch);
    }
    Ok(sphere_share(inst.q(), distance(base, shadow.interior())))
}

/// ν_u of a shadow taken from any base point.
pub fn visual_measure_general(inst: &ProblemInstance, u: &Vertex, shadow: &Shadow) -> Rational {
    let (w, z) = shadow.cut();
    if shadow.contains_vertex(u) {
        Rational::one() - sphere_share(inst.q(), distance(u, &w))
    } else {
        sphere_share(inst.q(), distance(u, z))
    }
}

/// ν_u(A ∩ B) for two shadows.
pub fn visual_measure_intersection(inst: &ProblemInstance, u: &Vertex, a: &Shadow, b: &Shadow) -> Rational {
    match shadow_relation(a, b) {
        ShadowRelation::Equal | ShadowRelation::FirstInsideSecond => visual_measure_general(inst, u, a),
        ShadowRelation::SecondInsideFirst => visual_measure_general(inst, u, b),
        ShadowRelation::Disjoint => Rational::zero(),
        ShadowRelation::ComplementOverlap => {
            visual_measure_general(inst, u, a) + visual_measure_general(inst, u, b) - Rational::one()
        }
    }
}

/// Ω_e^+ = Ω_{t(e)}(o(e)), carrying the probability ν_e^+.
pub fn positive_part(edge: &Edge) -> Shadow {
    Shadow::new(edge.target.clone(), edge.origin.clone()).expect("edge endpoints differ")
}

/// Ω_e^- = Ω_{o(e)}(t(e)), carrying the probability ν_e^-.
pub fn negative_part(edge: &Edge) -> Shadow {
    Shadow::new(edge.origin.clone(), edge.target.clone()).expect("edge endpoints differ")
}

/// ν_e(S) = (q+1)/q · ν_o(S ∩ Ω_e^+) − (q+1) · ν_o(S ∩ Ω_e^-).
pub fn edge_measure_shadow(inst: &ProblemInstance, edge: &Edge, shadow: &Shadow) -> Rational {
    let q1 = int(i64::from(inst.q()) + 1);
    let o = &edge.origin;
    let whole = visual_measure_general(inst, o, shadow);
    let minus = visual_measure_intersection(inst, o, shadow, &negative_part(edge));
    let plus = whole - &minus;
    &q1 * plus / int(i64::from(inst.q())) - q1 * minus
}

/// ν_e of a finite disjoint union of shadows.
pub fn edge_measure_union(inst: &ProblemInstance, edge: &Edge, shadows: &[Shadow]) -> Rational {
    shadows.iter().map(|s| edge_measure_shadow(inst, edge, s)).sum()
}

/// ν_e(Ω^σ_k) for the aligned edge with parameter i, from the closed form.
pub fn spine_cell_measure(inst: &ProblemInstance, i: i64, k: i64) -> Rational {
    let q = inst.q();
    frac(i64::from(q) - 1, i64::from(q)) * g_half_at(q, k - i)
}

/// ν_e(Ω_{k,l}) for the transverse edge with parameters (i, j), from the closed form.
/// For q = 2 the formulas are returned unchanged even though some cells are empty.
pub fn cross_cell_measure(inst: &ProblemInstance, i: i64, j: i64, k: i64, l: i64) -> Result<Rational> {
    check_transverse(inst, i, j)?;
    let q = inst.q();
    let qq = i64::from(q);
    let factor = frac(qq - 1, qq);
    Ok(match (k == i, l == j) {
        (false, false) => Rational::zero(),
        (true, false) => factor * g_half_at(q, l),
        (false, true) => factor * g_half_at(q, j) * frac(1, qq) * h_at(q, k - i),
        (true, true) => frac(qq - 3, qq) * g_half_at(q, j),
    })
}

/// dν_x/dν_y on the level set where B(x, y) takes `level_value`.
pub fn radon_nikodym(inst: &ProblemInstance, level_value: i64) -> Result<Rational> {
    let d = inst.d();
    if level_value.abs() > d || (d - level_value) % 2 != 0 {
        return Err(Error::InvalidLevel(level_value));
    }
    Ok(qpow(inst.q(), level_value))
}

/// The shadows (seen from x) whose disjoint union is Ω^σ_k: one per branch at σ(k).
pub fn spine_cell_shadows(inst: &ProblemInstance, k: i64) -> Vec<Shadow> {
    let root = Vertex::spine(k);
    (0..inst.q() - 1).map(|b| Shadow::new(inst.x(), root.child(b)).expect("branch differs from x")).collect()
}

/// The geodesic τ through the transverse edge (i, j): τ(l) for l <= j runs down
/// branch 0 at σ(i); for l > j it continues into branch 1 (only when q >= 3).
pub fn cross_line_vertex(inst: &ProblemInstance, i: i64, j: i64, l: i64) -> Option<Vertex> {
    if l <= j {
        Some(Vertex::new(i, vec![0; (j - l) as usize]))
    } else if inst.q() >= 3 {
        let mut path = vec![1];
        path.extend(std::iter::repeat_n(0, (l - j - 1) as usize));
        Some(Vertex::new(i, path))
    } else {
        None
    }
}

/// The shadows whose disjoint union is Ω_{k,l} = Ω^σ_k ∩ Ω^τ_l for the transverse edge (i, j).
pub fn cross_cell_shadows(inst: &ProblemInstance, i: i64, j: i64, k: i64, l: i64) -> Result<Vec<Shadow>> {
    check_transverse(inst, i, j)?;
    let q = inst.q();
    let x = inst.x();
    let cell = |v: Vertex, skip: &[u32], width: u32| -> Vec<Shadow> {
        (0..width)
            .filter(|b| !skip.contains(b))
            .map(|b| Shadow::new(x.clone(), v.child(b)).expect("off-spine child differs from x"))
            .collect()
    };
    Ok(match (k == i, l == j) {
        (false, false) => Vec::new(),
        (false, true) => spine_cell_shadows(inst, k),
        // centre of the cross: branches at σ(i) other than the two arms of τ
        (true, true) => cell(Vertex::spine(i), &[0, 1], q - 1),
        // along τ: children of τ(l) off τ; child 0 continues τ
        (true, false) => match cross_line_vertex(inst, i, j, l) {
            Some(v) => cell(v, &[0], q),
            None => Vec::new(),
        },
    })
}
