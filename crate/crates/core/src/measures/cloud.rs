//! Weighted point clouds and the Dirac pullback constructions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::poly::Root;
use crate::rational::{MobiusMap, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

/// Atoms closer than this are merged.
pub const MERGE_RADIUS: f64 = 1e-9;

/// Default cap on the number of leaves of a pullback tree.
pub const DEFAULT_TREE_BUDGET: u64 = 1 << 20;

const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: SpherePoint,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullTree,
    MonteCarlo,
    /// Built directly from given atoms.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_point: Option<SpherePoint>,
    pub correspondence_id: String,
    pub method: Method,
    pub rng_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud {
    pub atoms: Vec<Atom>,
    pub generation: usize,
    pub provenance: Provenance,
}

impl WeightedCloud {
    /// Validated constructor: positive weights summing to 1.
    pub fn new(atoms: Vec<Atom>, generation: usize, provenance: Provenance) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("cloud has no atoms".into()));
        }
        if atoms.iter().any(|a| !(a.weight > 0.0) || !a.weight.is_finite()) {
            return Err(Error::Invalid("atom weights must be positive".into()));
        }
        let cloud = WeightedCloud {
            atoms,
            generation,
            provenance,
        };
        let m = cloud.total_mass();
        if (m - 1.0).abs() > MASS_TOL * (cloud.atoms.len() as f64).max(1.0).sqrt() {
            return Err(Error::Invalid(format!("cloud mass {m} differs from 1")));
        }
        Ok(cloud)
    }

    pub fn dirac(p: SpherePoint, id: &str) -> Self {
        WeightedCloud {
            atoms: vec![Atom {
                point: p,
                weight: 1.0,
            }],
            generation: 0,
            provenance: Provenance {
                seed_point: Some(p),
                correspondence_id: id.to_string(),
                method: Method::Explicit,
                rng_seed: None,
            },
        }
    }

    /// Equal weights on the given points.
    pub fn uniform(points: &[SpherePoint], id: &str) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::new(
            points.iter().map(|&point| Atom { point, weight: w }).collect(),
            0,
            Provenance {
                seed_point: None,
                correspondence_id: id.to_string(),
                method: Method::Explicit,
                rng_seed: None,
            },
        )
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass of the atoms satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&SpherePoint) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(&a.point)).map(|a| a.weight).sum()
    }
}

/// Sort canonically and merge atoms within `radius`.
pub fn merge_atoms(mut atoms: Vec<Atom>, radius: f64) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.point.canonical_cmp(&b.point));
    let mut out: Vec<(Atom, f64)> = Vec::with_capacity(atoms.len());
    for a in atoms {
        let x = a.point.embed()[0];
        let mut merged = false;
        for (b, bx) in out.iter_mut().rev() {
            if *bx < x - radius {
                break;
            }
            if chordal_distance(&a.point, &b.point) < radius {
                b.weight += a.weight;
                merged = true;
                break;
            }
        }
        if !merged {
            out.push((a, x));
        }
    }
    out.into_iter().map(|(a, _)| a).collect()
}

fn tree_path_error(e: Error, level: usize, index: usize) -> Error {
    match e {
        Error::FiberDegenerate { path } => Error::FiberDegenerate {
            path: [level, index].into_iter().chain(path).collect(),
        },
        other => other,
    }
}

fn check_budget(branching: usize, n: usize, budget: u64) -> Result<()> {
    let needed = (branching as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// `(1/d^n) (C^n)^* delta_{z0}` by full enumeration of the preimage tree.
pub fn pullback_dirac_tree(
    c: &Correspondence,
    z0: SpherePoint,
    n: usize,
    budget: u64,
    id: &str,
) -> Result<WeightedCloud> {
    check_budget(c.d1().max(c.d2()), n, budget)?;
    let d2 = c.d2() as f64;
    let mut atoms = vec![Atom {
        point: z0,
        weight: 1.0,
    }];
    for level in 0..n {
        let children: Vec<Vec<Atom>> = atoms
            .par_iter()
            .enumerate()
            .map(|(i, a)| {
                let f = c.backward(&a.point).map_err(|e| tree_path_error(e, level, i))?;
                Ok(f.points
                    .iter()
                    .map(|p| Atom {
                        point: p.point,
                        weight: a.weight * p.multiplicity as f64 / d2,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        atoms = merge_atoms(children.into_iter().flatten().collect(), MERGE_RADIUS);
    }
    Ok(WeightedCloud {
        atoms,
        generation: n,
        provenance: Provenance {
            seed_point: Some(z0),
            correspondence_id: id.to_string(),
            method: Method::FullTree,
            rng_seed: None,
        },
    })
}

/// Random generator for path `index`, independent of how paths are scheduled.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn pick<'a, T>(items: &'a [(T, usize)], rng: &mut ChaCha8Rng) -> &'a T {
    let total: usize = items.iter().map(|x| x.1).sum();
    let mut k = rng.gen_range(0..total);
    for (item, m) in items {
        if k < *m {
            return item;
        }
        k -= m;
    }
    unreachable!("multiplicities sum to total")
}

/// Merge path endpoints by count, then normalize.
fn count_weighted(ends: Vec<SpherePoint>) -> Vec<Atom> {
    let n = ends.len() as f64;
    let mut atoms = merge_atoms(ends.into_iter().map(|point| Atom { point, weight: 1.0 }).collect(), MERGE_RADIUS);
    for a in &mut atoms {
        a.weight /= n;
    }
    atoms
}

/// Monte-Carlo version of [`pullback_dirac_tree`]: independent backward
/// random walks choosing preimages with multiplicity.
pub fn pullback_dirac_mc(
    c: &Correspondence,
    z0: SpherePoint,
    n: usize,
    n_paths: usize,
    rng_seed: u64,
    id: &str,
) -> Result<WeightedCloud> {
    if n_paths == 0 {
        return Err(Error::Invalid("n_paths must be at least 1".into()));
    }
    let ends: Vec<SpherePoint> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(rng_seed, i);
            let mut x = z0;
            for level in 0..n {
                let f = c.backward(&x).map_err(|e| tree_path_error(e, level, i))?;
                let items: Vec<(SpherePoint, usize)> = f.points.iter().map(|p| (p.point, p.multiplicity)).collect();
                x = *pick(&items, &mut rng);
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let atoms = count_weighted(ends);
    Ok(WeightedCloud {
        atoms,
        generation: n,
        provenance: Provenance {
            seed_point: Some(z0),
            correspondence_id: id.to_string(),
            method: Method::MonteCarlo,
            rng_seed: Some(rng_seed),
        },
    })
}

/// Image of the cloud under a Möbius map; weights unchanged.
pub fn pushforward_mobius(cloud: &WeightedCloud, m: &MobiusMap) -> WeightedCloud {
    WeightedCloud {
        atoms: cloud
            .atoms
            .iter()
            .map(|a| Atom {
                point: m.apply(&a.point),
                weight: a.weight,
            })
            .collect(),
        generation: cloud.generation,
        provenance: Provenance {
            correspondence_id: format!("{}|mobius", cloud.provenance.correspondence_id),
            ..cloud.provenance.clone()
        },
    }
}

/// Backward orbit sizes stay at most 2 for three generations: the seed lies
/// in the exceptional set.
pub fn detect_exceptional(
    z0: SpherePoint,
    step: impl Fn(&SpherePoint) -> Result<Vec<SpherePoint>>,
) -> Result<Option<String>> {
    let mut set = vec![z0];
    for _ in 0..3 {
        let mut next: Vec<SpherePoint> = Vec::new();
        for p in &set {
            for q in step(p)? {
                if !next.iter().any(|x| chordal_distance(x, &q) < 1e-8) {
                    next.push(q);
                }
            }
        }
        if next.len() > 2 {
            return Ok(None);
        }
        set = next;
    }
    let pts: Vec<String> = set
        .iter()
        .map(|p| match p.to_complex() {
            Some(z) => format!("{:.6}{:+.6}i", z.re, z.im),
            None => "inf".into(),
        })
        .collect();
    Ok(Some(format!(
        "backward orbit stays inside the exceptional set {{{}}}",
        pts.join(", ")
    )))
}

fn exceptional_error(z0: &SpherePoint, reason: String) -> Error {
    let z = z0.to_complex().unwrap_or(num_complex::Complex64::new(f64::INFINITY, 0.0));
    Error::ExceptionalStart {
        re: z.re,
        im: z.im,
        reason,
    }
}

/// Reject seeds in the exceptional set of a correspondence.
pub fn check_seed(c: &Correspondence, z0: SpherePoint) -> Result<()> {
    let step = |p: &SpherePoint| Ok(c.backward(p)?.points.iter().map(|x| x.point).collect());
    match detect_exceptional(z0, step)? {
        Some(reason) => Err(exceptional_error(&z0, reason)),
        None => Ok(()),
    }
}

fn roots_to_items(roots: Vec<Root>) -> Vec<(SpherePoint, usize)> {
    roots.into_iter().map(|r| (r.point, r.multiplicity)).collect()
}

/// Backward random iteration of a rational map from `z0`.
pub fn brolin_cloud(
    f: &RationalMap,
    z0: SpherePoint,
    n: usize,
    n_paths: usize,
    rng_seed: u64,
) -> Result<WeightedCloud> {
    if f.degree() < 2 {
        return Err(Error::DegreeTooLow {
            degree: f.degree(),
            required: 2,
        });
    }
    if n_paths == 0 {
        return Err(Error::Invalid("n_paths must be at least 1".into()));
    }
    let step = |p: &SpherePoint| Ok(f.preimages(p)?.into_iter().map(|r| r.point).collect());
    if let Some(reason) = detect_exceptional(z0, step)? {
        return Err(exceptional_error(&z0, reason));
    }
    let ends: Vec<SpherePoint> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(rng_seed, i);
            let mut x = z0;
            for _ in 0..n {
                let items = roots_to_items(f.preimages(&x)?);
                x = *pick(&items, &mut rng);
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    Ok(WeightedCloud {
        atoms: count_weighted(ends),
        generation: n,
        provenance: Provenance {
            seed_point: Some(z0),
            correspondence_id: "brolin".into(),
            method: Method::MonteCarlo,
            rng_seed: Some(rng_seed),
        },
    })
}

/// Equal masses on `n` equally spaced points of the unit circle.
pub fn uniform_circle_cloud(n: usize) -> WeightedCloud {
    let pts: Vec<SpherePoint> = (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            SpherePoint::new(num_complex::Complex64::from_polar(1.0, t))
        })
        .collect();
    WeightedCloud::uniform(&pts, "unit_circle").expect("nonempty")
}
