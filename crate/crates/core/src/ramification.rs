//! Ramification sets `A_j` of a correspondence graph and their projections
//! `B_j`, the critical values.

use crate::correspondence::Correspondence;
use crate::error::Result;
use crate::graph::{Direction, GraphPolynomial};
use crate::poly::{cluster_roots, projective_roots, Root, DEFAULT_CLUSTER_RADIUS};
use crate::resultant::w_discriminant;
use crate::sphere::SpherePoint;

/// Fiber roots closer than this over a discriminant zero count as merged.
pub const MERGE_RADIUS: f64 = 1e-4;

/// Projection whose local injectivity fails: `One` fixes `z`, `Two` fixes `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub fn from_index(j: usize) -> Option<Side> {
        match j {
            1 => Some(Side::One),
            2 => Some(Side::Two),
            _ => None,
        }
    }
}

/// Points `(z, w)` of the graph near which the fiber over `z` has merging
/// `w`-roots.
pub fn graph_ramification(b: &GraphPolynomial) -> Result<Vec<(SpherePoint, SpherePoint)>> {
    let (disc, nominal) = w_discriminant(b)?;
    if nominal == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for z in projective_roots(&disc, nominal, DEFAULT_CLUSTER_RADIUS)? {
        let raw = b.raw_fiber(&z.point, Direction::Forward)?;
        for w in cluster_roots(&raw, MERGE_RADIUS) {
            if w.multiplicity >= 2 {
                out.push((z.point, w.point));
            }
        }
    }
    Ok(out)
}

fn direct_ramification(c: &Correspondence) -> Result<Vec<(SpherePoint, SpherePoint)>> {
    let mut out = Vec::new();
    for comp in c.components() {
        out.extend(graph_ramification(&comp.graph)?);
    }
    Ok(out)
}

/// `A_side(C)`. For a chain each stage's set is carried back to the start
/// and forward to the end along the other stages.
pub fn ramification_points(c: &Correspondence, side: Side) -> Result<Vec<(SpherePoint, SpherePoint)>> {
    if side == Side::Two {
        return Ok(ramification_points(&c.inverse(), Side::One)?
            .into_iter()
            .map(|(w, z)| (z, w))
            .collect());
    }
    let stages = c.stages();
    if stages.len() == 1 {
        return direct_ramification(stages[0]);
    }
    let mut out = Vec::new();
    for (j, stage) in stages.iter().enumerate() {
        let head: Vec<Correspondence> = stages[..j].iter().map(|s| (*s).clone()).collect();
        let tail: Vec<Correspondence> = stages[j + 1..].iter().map(|s| (*s).clone()).collect();
        let head = (!head.is_empty()).then(|| Correspondence::chained(head)).transpose()?;
        let tail = (!tail.is_empty()).then(|| Correspondence::chained(tail)).transpose()?;
        for (u, v) in direct_ramification(stage)? {
            let zs = match &head {
                Some(h) => h.backward(&u)?.distinct(DEFAULT_CLUSTER_RADIUS),
                None => vec![(u, 1)],
            };
            let ws = match &tail {
                Some(t) => t.forward(&v)?.distinct(DEFAULT_CLUSTER_RADIUS),
                None => vec![(v, 1)],
            };
            for (z, _) in &zs {
                for (w, _) in &ws {
                    out.push((*z, *w));
                }
            }
        }
    }
    Ok(out)
}

/// `B_side = pi_side(A_side)`, clustered.
pub fn critical_values(c: &Correspondence, side: Side) -> Result<Vec<Root>> {
    let pts: Vec<SpherePoint> = ramification_points(c, side)?
        .into_iter()
        .map(|(z, w)| if side == Side::One { z } else { w })
        .collect();
    Ok(cluster_roots(&pts, DEFAULT_CLUSTER_RADIUS))
}
