//! Correspondences as weighted sums of graph components, evaluated directly
//! or as a chain of factors.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{cov_graph, identity_graph, map_graph, mobius_graph, Direction, GraphPolynomial};
use crate::poly::DEFAULT_CLUSTER_RADIUS;
use crate::rational::{MobiusMap, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

/// Residual bound for fiber points under their defining polynomial.
pub const FIBER_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub graph: GraphPolynomial,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrespondence")]
pub struct Correspondence {
    components: Vec<Component>,
    chain: Vec<Correspondence>,
    d1: usize,
    d2: usize,
}

#[derive(Deserialize)]
struct RawCorrespondence {
    #[serde(default)]
    components: Vec<Component>,
    #[serde(default)]
    chain: Vec<Correspondence>,
    d1: usize,
    d2: usize,
}

impl TryFrom<RawCorrespondence> for Correspondence {
    type Error = Error;
    fn try_from(r: RawCorrespondence) -> Result<Self> {
        let c = match (r.components.is_empty(), r.chain.is_empty()) {
            (false, true) => Correspondence::direct(r.components)?,
            (true, false) => Correspondence::chained(r.chain)?,
            _ => {
                return Err(Error::Invalid(
                    "correspondence needs either components or a chain".into(),
                ))
            }
        };
        if (c.d1, c.d2) != (r.d1, r.d2) {
            return Err(Error::Invalid(format!(
                "declared bidegree ({}, {}) differs from computed ({}, {})",
                r.d1, r.d2, c.d1, c.d2
            )));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberPoint {
    pub point: SpherePoint,
    pub multiplicity: usize,
    pub residual: f64,
    /// Component index; mixed radix over the stages of a chain.
    pub label: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FiberResult {
    pub points: Vec<FiberPoint>,
}

impl FiberResult {
    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    /// Distinct points regardless of label, with summed multiplicity.
    pub fn distinct(&self, radius: f64) -> Vec<(SpherePoint, usize)> {
        let mut out: Vec<(SpherePoint, usize)> = Vec::new();
        for p in &self.points {
            match out.iter_mut().find(|(q, _)| chordal_distance(q, &p.point) < radius) {
                Some(slot) => slot.1 += p.multiplicity,
                None => out.push((p.point, p.multiplicity)),
            }
        }
        out.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        out
    }

    /// Multiplicity found within `radius` of `target`.
    pub fn multiplicity_near(&self, target: &SpherePoint, radius: f64) -> usize {
        self.points
            .iter()
            .filter(|p| chordal_distance(&p.point, target) < radius)
            .map(|p| p.multiplicity)
            .sum()
    }
}

fn cmp_fiber(a: &FiberPoint, b: &FiberPoint) -> Ordering {
    a.label.cmp(&b.label).then(a.point.canonical_cmp(&b.point))
}

/// Merge entries with equal labels that lie within `radius`, then sort.
fn merge(points: Vec<FiberPoint>, radius: f64) -> Vec<FiberPoint> {
    let mut out: Vec<FiberPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out
            .iter_mut()
            .find(|q| q.label == p.label && chordal_distance(&q.point, &p.point) < radius)
        {
            Some(q) => {
                q.multiplicity += p.multiplicity;
                q.residual = q.residual.max(p.residual);
            }
            None => out.push(p),
        }
    }
    out.sort_by(cmp_fiber);
    out
}

impl Correspondence {
    pub fn direct(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invalid("no components".into()));
        }
        if components.iter().any(|c| c.multiplicity == 0) {
            return Err(Error::Invalid("component multiplicity must be positive".into()));
        }
        let d1 = components.iter().map(|c| c.multiplicity * c.graph.deg_w()).sum();
        let d2 = components.iter().map(|c| c.multiplicity * c.graph.deg_z()).sum();
        if d1 == 0 || d2 == 0 {
            return Err(Error::Invalid(format!(
                "projections must be surjective, got bidegree ({d1}, {d2})"
            )));
        }
        Ok(Correspondence {
            components,
            chain: Vec::new(),
            d1,
            d2,
        })
    }

    pub fn single(graph: GraphPolynomial) -> Result<Self> {
        Self::direct(vec![Component {
            graph,
            multiplicity: 1,
        }])
    }

    /// Chain of factors in application order; nested chains are flattened.
    pub fn chained(factors: Vec<Correspondence>) -> Result<Self> {
        let mut flat = Vec::new();
        for f in factors {
            if f.chain.is_empty() {
                flat.push(f);
            } else {
                flat.extend(f.chain);
            }
        }
        if flat.is_empty() {
            return Err(Error::Invalid("empty chain".into()));
        }
        let d1 = flat.iter().map(|f| f.d1).product();
        let d2 = flat.iter().map(|f| f.d2).product();
        Ok(Correspondence {
            components: Vec::new(),
            chain: flat,
            d1,
            d2,
        })
    }

    /// Deleted covering correspondence of `r`.
    pub fn cov(r: &RationalMap) -> Result<Self> {
        Self::single(cov_graph(r)?)
    }

    pub fn mobius(m: &MobiusMap) -> Self {
        Self::single(mobius_graph(m)).expect("bidegree (1, 1)")
    }

    /// Graph of a single-valued rational map: bidegree `(1, deg r)`.
    pub fn of_map(r: &RationalMap) -> Self {
        Self::single(map_graph(r)).expect("surjective map")
    }

    pub fn identity() -> Self {
        Self::single(identity_graph()).expect("bidegree (1, 1)")
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn is_direct(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Factors in application order; a direct correspondence is its own
    /// single stage.
    pub fn stages(&self) -> Vec<&Correspondence> {
        if self.chain.is_empty() {
            vec![self]
        } else {
            self.chain.iter().collect()
        }
    }

    /// Number of distinct label values produced by fibers.
    pub fn label_count(&self) -> usize {
        if self.chain.is_empty() {
            self.components.len()
        } else {
            self.chain.iter().map(|f| f.label_count()).product()
        }
    }

    /// The transposed correspondence `F^{-1}`.
    pub fn inverse(&self) -> Self {
        if self.chain.is_empty() {
            Correspondence {
                components: self
                    .components
                    .iter()
                    .map(|c| Component {
                        graph: c.graph.transpose(),
                        multiplicity: c.multiplicity,
                    })
                    .collect(),
                chain: Vec::new(),
                d1: self.d2,
                d2: self.d1,
            }
        } else {
            Correspondence {
                components: Vec::new(),
                chain: self.chain.iter().rev().map(|f| f.inverse()).collect(),
                d1: self.d2,
                d2: self.d1,
            }
        }
    }

    pub fn forward(&self, z: &SpherePoint) -> Result<FiberResult> {
        self.fiber(z, Direction::Forward)
    }

    pub fn backward(&self, w: &SpherePoint) -> Result<FiberResult> {
        self.fiber(w, Direction::Backward)
    }

    pub fn fiber(&self, base: &SpherePoint, dir: Direction) -> Result<FiberResult> {
        if self.chain.is_empty() {
            return self.direct_fiber(base, dir);
        }
        let order: Vec<usize> = match dir {
            Direction::Forward => (0..self.chain.len()).collect(),
            Direction::Backward => (0..self.chain.len()).rev().collect(),
        };
        let mut current = vec![FiberPoint {
            point: *base,
            multiplicity: 1,
            residual: 0.0,
            label: 0,
        }];
        for &s in &order {
            let stage = &self.chain[s];
            let radix = stage.label_count();
            let mut next = Vec::new();
            for p in &current {
                let f = stage.direct_fiber(&p.point, dir).map_err(|e| match e {
                    Error::FiberDegenerate { path } => Error::FiberDegenerate {
                        path: std::iter::once(s).chain(path).collect(),
                    },
                    other => other,
                })?;
                for q in f.points {
                    next.push(FiberPoint {
                        point: q.point,
                        multiplicity: p.multiplicity * q.multiplicity,
                        residual: p.residual.max(q.residual),
                        label: p.label * radix + q.label,
                    });
                }
            }
            current = merge(next, DEFAULT_CLUSTER_RADIUS);
        }
        Ok(FiberResult { points: current })
    }

    fn direct_fiber(&self, base: &SpherePoint, dir: Direction) -> Result<FiberResult> {
        let mut points = Vec::new();
        for (k, comp) in self.components.iter().enumerate() {
            let roots = comp.graph.fiber(base, dir).map_err(|e| match e {
                Error::FiberDegenerate { .. } => Error::FiberDegenerate { path: vec![k] },
                other => other,
            })?;
            for r in roots {
                let residual = match dir {
                    Direction::Forward => comp.graph.residual(base, &r.point),
                    Direction::Backward => comp.graph.residual(&r.point, base),
                };
                points.push(FiberPoint {
                    point: r.point,
                    multiplicity: r.multiplicity * comp.multiplicity,
                    residual,
                    label: k,
                });
            }
        }
        points.sort_by(cmp_fiber);
        Ok(FiberResult { points })
    }

    /// Smallest scaled residual of `(z, w)` over components, or over witness
    /// paths through all but the last stage of a chain.
    pub fn graph_residual(&self, z: &SpherePoint, w: &SpherePoint) -> f64 {
        if self.chain.is_empty() {
            return self
                .components
                .iter()
                .map(|c| c.graph.residual(z, w))
                .fold(f64::INFINITY, f64::min);
        }
        let (last, head) = self.chain.split_last().expect("nonempty chain");
        let mids = if head.is_empty() {
            vec![*z]
        } else {
            match Correspondence::chained(head.to_vec()).and_then(|h| h.forward(z)) {
                Ok(f) => f.points.iter().map(|p| p.point).collect(),
                Err(_) => return f64::INFINITY,
            }
        };
        mids.iter()
            .map(|m| last.graph_residual(m, w))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_on_graph(&self, z: &SpherePoint, w: &SpherePoint, tol: f64) -> (bool, f64) {
        let r = self.graph_residual(z, w);
        (r < tol, r)
    }

    /// Check that 20 pseudo-random base points have `d1` images and `d2`
    /// preimages counted with multiplicity.
    pub fn verify_bidegree(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = SpherePoint::random(&mut rng);
            let f = self.forward(&p)?.total_multiplicity();
            let b = self.backward(&p)?.total_multiplicity();
            if f != self.d1 {
                return Err(Error::DegreeMismatch {
                    expected: self.d1,
                    got: f,
                });
            }
            if b != self.d2 {
                return Err(Error::DegreeMismatch {
                    expected: self.d2,
                    got: b,
                });
            }
        }
        Ok(())
    }
}

/// `F1 o F2`: apply `c2` first, then `c1`.
pub fn compose(c1: &Correspondence, c2: &Correspondence) -> Correspondence {
    Correspondence::chained(vec![c2.clone(), c1.clone()]).expect("nonempty chain")
}
