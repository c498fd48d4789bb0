//! Lazy coordinates on the (q+1)-regular tree anchored on the geodesic through x and y.
//!
//! A vertex is addressed by its position `σ(s)` on a fixed bi-infinite geodesic
//! `σ` with `x = σ(0)`, `y = σ(d)`, followed by a path into the subtree hanging
//! off `σ(s)`. At a spine vertex there are `q-1` branches (indices `0..q-1`);
//! below that every vertex has `q` children (indices `0..q`). Nothing is ever
//! materialized beyond the finitely many vertices a caller asks about.

use std::fmt;

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{Error, Result};

/// The pair (q, d): tree valency q+1 and distance d(x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ProblemInstance {
    q: u32,
    d: u32,
}

impl ProblemInstance {
    pub fn new(q: i64, d: i64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidInstance(format!("q must satisfy q >= 2, got {q}")));
        }
        if d < 0 {
            return Err(Error::InvalidInstance(format!("d must satisfy d >= 0, got {d}")));
        }
        let q = u32::try_from(q).map_err(|_| Error::InvalidInstance(format!("q={q} too large")))?;
        let d = u32::try_from(d).map_err(|_| Error::InvalidInstance(format!("d={d} too large")))?;
        Ok(Self { q, d })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn d(&self) -> i64 {
        i64::from(self.d)
    }

    pub fn x(&self) -> Vertex {
        Vertex::spine(0)
    }

    pub fn y(&self) -> Vertex {
        Vertex::spine(self.d())
    }

    /// Checks that every branch index is within the valency.
    pub fn validate_vertex(&self, v: &Vertex) -> Result<()> {
        for (depth, &b) in v.branch.iter().enumerate() {
            let limit = if depth == 0 { self.q - 1 } else { self.q };
            if b >= limit {
                return Err(Error::InvalidVertex(format!("{v}: branch index {b} at depth {depth} must be < {limit}")));
            }
        }
        Ok(())
    }

    /// Distance from `v` to the segment [x, y].
    pub fn distance_to_segment(&self, v: &Vertex) -> i64 {
        let off = if v.spine < 0 {
            -v.spine
        } else if v.spine > self.d() {
            v.spine - self.d()
        } else {
            0
        };
        off + v.depth()
    }

    /// All neighbours of `v`, in a fixed order.
    pub fn neighbors(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.q as usize + 1);
        if v.branch.is_empty() {
            out.push(Vertex::spine(v.spine - 1));
            out.push(Vertex::spine(v.spine + 1));
            out.extend((0..self.q - 1).map(|b| v.child(b)));
        } else {
            out.push(v.parent().expect("off-spine vertex has a parent"));
            out.extend((0..self.q).map(|b| v.child(b)));
        }
        out
    }

    /// Vertices at distance exactly `radius` from `center`.
    pub fn sphere(&self, center: &Vertex, radius: u32) -> Vec<Vertex> {
        let mut frontier = vec![(center.clone(), None::<Vertex>)];
        for _ in 0..radius {
            let mut next = Vec::with_capacity(frontier.len() * self.q as usize);
            for (v, from) in &frontier {
                for n in self.neighbors(v) {
                    if Some(&n) != from.as_ref() {
                        next.push((n, Some(v.clone())));
                    }
                }
            }
            frontier = next;
        }
        frontier.into_iter().map(|(v, _)| v).collect()
    }

    /// Every vertex within distance `radius` of [x, y].
    pub fn vertices_near_segment(&self, radius: u32) -> Vec<Vertex> {
        let r = i64::from(radius);
        let mut out = Vec::new();
        for s in -r..=self.d() + r {
            let root = Vertex::spine(s);
            let budget = r - self.distance_to_segment(&root);
            if budget < 0 {
                continue;
            }
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                if v.depth() < budget {
                    let width = if v.branch.is_empty() { self.q - 1 } else { self.q };
                    stack.extend((0..width).map(|b| v.child(b)));
                }
                out.push(v);
            }
        }
        out
    }

    /// Oriented edges (both orientations) whose endpoints are both within `radius` of [x, y].
    pub fn edges_near_segment(&self, radius: u32) -> Vec<Edge> {
        let r = i64::from(radius);
        let mut out = Vec::new();
        for v in self.vertices_near_segment(radius) {
            for n in self.neighbors(&v) {
                if self.distance_to_segment(&n) <= r {
                    out.push(Edge { origin: v.clone(), target: n });
                }
            }
        }
        out
    }
}

/// A vertex in spine-anchored coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub spine: i64,
    pub branch: Vec<u32>,
}

impl Vertex {
    pub fn spine(index: i64) -> Self {
        Self { spine: index, branch: Vec::new() }
    }

    pub fn new(spine: i64, branch: Vec<u32>) -> Self {
        Self { spine, branch }
    }

    pub fn child(&self, b: u32) -> Self {
        let mut branch = self.branch.clone();
        branch.push(b);
        Self { spine: self.spine, branch }
    }

    pub fn parent(&self) -> Option<Self> {
        let mut branch = self.branch.clone();
        branch.pop()?;
        Some(Self { spine: self.spine, branch })
    }

    /// Distance to the spine σ.
    pub fn depth(&self) -> i64 {
        self.branch.len() as i64
    }

    pub fn on_spine(&self) -> bool {
        self.branch.is_empty()
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "σ({})", self.spine)?;
        if !self.branch.is_empty() {
            write!(f, "+{:?}", self.branch)?;
        }
        Ok(())
    }
}

fn common_prefix(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Graph distance.
pub fn distance(u: &Vertex, v: &Vertex) -> i64 {
    if u.spine == v.spine {
        let c = common_prefix(&u.branch, &v.branch) as i64;
        u.depth() + v.depth() - 2 * c
    } else {
        u.depth() + v.depth() + (u.spine - v.spine).abs()
    }
}

pub fn adjacent(u: &Vertex, v: &Vertex) -> bool {
    distance(u, v) == 1
}

/// The neighbour of `from` on the geodesic to `to`. Requires `from != to`.
pub fn step_toward(from: &Vertex, to: &Vertex) -> Vertex {
    debug_assert_ne!(from, to);
    if from.spine == to.spine {
        let c = common_prefix(&from.branch, &to.branch);
        if c == from.branch.len() {
            from.child(to.branch[c])
        } else {
            from.parent().expect("non-prefix path is non-empty")
        }
    } else if !from.branch.is_empty() {
        from.parent().expect("non-empty path")
    } else {
        Vertex::spine(from.spine + (to.spine - from.spine).signum())
    }
}

/// An oriented edge given by its endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub origin: Vertex,
    pub target: Vertex,
}

impl Edge {
    pub fn new(origin: Vertex, target: Vertex) -> Result<Self> {
        if !adjacent(&origin, &target) {
            return Err(Error::NotAnEdge(origin.to_string(), target.to_string()));
        }
        Ok(Self { origin, target })
    }

    pub fn reversed(&self) -> Self {
        Self { origin: self.target.clone(), target: self.origin.clone() }
    }
}

/// Position of an edge relative to [x, y], in the preferred orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    /// Lies on a geodesic line through x and y with origin σ(i) and target σ(i+1).
    Aligned(i64),
    /// Projects onto σ(i) with 1 <= i <= d-1; origin at distance j from σ(i), pointing toward it.
    Transverse(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EdgeClass {
    pub kind: EdgeKind,
    /// Set when the edge carries the orientation opposite to the convention.
    pub reversed: bool,
}

impl EdgeClass {
    pub fn aligned(i: i64) -> Self {
        Self { kind: EdgeKind::Aligned(i), reversed: false }
    }

    pub fn transverse(inst: &ProblemInstance, i: i64, j: i64) -> Result<Self> {
        check_transverse(inst, i, j)?;
        Ok(Self { kind: EdgeKind::Transverse(i, j), reversed: false })
    }

    pub fn flipped(self) -> Self {
        Self { reversed: !self.reversed, ..self }
    }
}

pub(crate) fn check_transverse(inst: &ProblemInstance, i: i64, j: i64) -> Result<()> {
    let d = inst.d();
    if (i == 0 || i == d) && j >= 1 {
        return Err(Error::ProjectionAtEndpoint(i));
    }
    if !(1..=d - 1).contains(&i) {
        return Err(Error::InvalidParameters(format!("transverse parameter i={i} must satisfy 1 <= i <= d-1 (d={d})")));
    }
    if j < 1 {
        return Err(Error::InvalidParameters(format!("transverse parameter j={j} must satisfy j >= 1")));
    }
    Ok(())
}

/// Classifies an oriented edge relative to [x, y].
pub fn classify_edge(inst: &ProblemInstance, origin: &Vertex, target: &Vertex) -> Result<EdgeClass> {
    inst.validate_vertex(origin)?;
    inst.validate_vertex(target)?;
    if !adjacent(origin, target) {
        return Err(Error::NotAnEdge(origin.to_string(), target.to_string()));
    }
    let d = inst.d();
    let (x, y) = (inst.x(), inst.y());
    // behind x (including the branches at x): origin is the endpoint farther from x
    if origin.spine <= 0 && target.spine <= 0 {
        let (a, b) = (distance(&x, origin), distance(&x, target));
        return Ok(EdgeClass { kind: EdgeKind::Aligned(-a.max(b)), reversed: a < b });
    }
    // beyond y: origin is the endpoint nearer to y
    if origin.spine >= d && target.spine >= d {
        let (a, b) = (distance(&y, origin), distance(&y, target));
        return Ok(EdgeClass { kind: EdgeKind::Aligned(d + a.min(b)), reversed: a > b });
    }
    if origin.on_spine() && target.on_spine() {
        let i = origin.spine.min(target.spine);
        return Ok(EdgeClass { kind: EdgeKind::Aligned(i), reversed: origin.spine > target.spine });
    }
    // same spine index strictly inside (0, d), at least one endpoint off the spine
    let i = origin.spine;
    let j = origin.depth().max(target.depth());
    check_transverse(inst, i, j)?;
    Ok(EdgeClass { kind: EdgeKind::Transverse(i, j), reversed: origin.depth() < target.depth() })
}

/// A concrete edge of the given class, oriented as the class says.
pub fn realize_edge(inst: &ProblemInstance, class: &EdgeClass) -> Result<Edge> {
    let edge = match class.kind {
        EdgeKind::Aligned(i) => Edge { origin: Vertex::spine(i), target: Vertex::spine(i + 1) },
        EdgeKind::Transverse(i, j) => {
            check_transverse(inst, i, j)?;
            let deep = Vertex::new(i, vec![0; j as usize]);
            let shallow = deep.parent().expect("j >= 1");
            Edge { origin: deep, target: shallow }
        }
    };
    Ok(if class.reversed { edge.reversed() } else { edge })
}

/// Number of edges (in preferred orientation) carrying the given parameters.
pub fn count_edges(inst: &ProblemInstance, kind: EdgeKind) -> Result<BigInt> {
    let q = BigInt::from(inst.q());
    let d = inst.d();
    let pow = |e: i64| num_traits::pow::Pow::pow(&q, e as u32);
    Ok(match kind {
        EdgeKind::Aligned(i) if i < 0 => pow(-i),
        EdgeKind::Aligned(i) if i < d => BigInt::from(1),
        EdgeKind::Aligned(i) => pow(i - d + 1),
        EdgeKind::Transverse(i, j) => {
            check_transverse(inst, i, j)?;
            (&q - 1) * pow(j - 1)
        }
    })
}

/// The boundary set Ω_base(interior): ends of rays from `base` passing through `interior`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Shadow {
    base: Vertex,
    interior: Vertex,
}

impl Shadow {
    pub fn new(base: Vertex, interior: Vertex) -> Result<Self> {
        if base == interior {
            return Err(Error::DegenerateShadow);
        }
        Ok(Self { base, interior })
    }

    pub fn base(&self) -> &Vertex {
        &self.base
    }

    pub fn interior(&self) -> &Vertex {
        &self.interior
    }

    /// The oriented edge (w, z) cutting off the half-tree this shadow bounds:
    /// `z` is the interior vertex and `w` its neighbour toward the base.
    pub fn cut(&self) -> (Vertex, &Vertex) {
        (step_toward(&self.interior, &self.base), &self.interior)
    }

    /// Whether `v` lies in the half-tree bounded by the shadow.
    pub fn contains_vertex(&self, v: &Vertex) -> bool {
        let (w, z) = self.cut();
        distance(v, z) < distance(v, &w)
    }

    /// The complementary shadow.
    pub fn complement(&self) -> Shadow {
        let (w, z) = self.cut();
        Shadow { base: z.clone(), interior: w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShadowRelation {
    Equal,
    FirstInsideSecond,
    SecondInsideFirst,
    Disjoint,
    /// The union is all of ∂X and the intersection is non-empty.
    ComplementOverlap,
}

/// Set relation between two shadows, read off from the half-trees they bound.
pub fn shadow_relation(s1: &Shadow, s2: &Shadow) -> ShadowRelation {
    let (w1, z1) = s1.cut();
    let (w2, z2) = s2.cut();
    if w1 == w2 && z1 == z2 {
        return ShadowRelation::Equal;
    }
    if &w1 == z2 && z1 == &w2 {
        return ShadowRelation::Disjoint;
    }
    // distinct geometric edges: each lies wholly on one side of the other
    let e1_in_h2 = s2.contains_vertex(z1);
    let e2_in_h1 = s1.contains_vertex(z2);
    match (e1_in_h2, e2_in_h1) {
        (true, false) => ShadowRelation::FirstInsideSecond,
        (false, true) => ShadowRelation::SecondInsideFirst,
        (true, true) => ShadowRelation::ComplementOverlap,
        (false, false) => ShadowRelation::Disjoint,
    }
}
