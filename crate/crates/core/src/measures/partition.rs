//! Ordered grid partitions, partition entropy and the preimage-refinement
//! metric entropy of a correspondence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{WeightedCloud, MERGE_RADIUS};
use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::fit::least_squares_slope;
use crate::sphere::SpherePoint;

/// Default cap on forward-orbit nodes per atom.
pub const DEFAULT_ORBIT_BUDGET: u64 = 1 << 18;

/// Equal-area cells: `n_lat` bands of equal height on the unit sphere, each
/// cut into `n_lon` sectors. Cells are half-open and numbered row-major from
/// the south pole, sectors counted from longitude `-pi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPartition {
    pub n_lat: usize,
    pub n_lon: usize,
}

impl GridPartition {
    pub fn new(n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat == 0 || n_lon == 0 {
            return Err(Error::Invalid("partition needs at least one cell".into()));
        }
        Ok(GridPartition { n_lat, n_lon })
    }

    pub fn k(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn cell_of(&self, p: &SpherePoint) -> usize {
        let e = p.embed();
        let band = (((e[2] + 1.0) * 0.5 * self.n_lat as f64).floor() as usize).min(self.n_lat - 1);
        let phi = e[1].atan2(e[0]);
        let sector = (((phi + PI) / (2.0 * PI) * self.n_lon as f64).floor() as usize).min(self.n_lon - 1);
        band * self.n_lon + sector
    }
}

fn entropy_of_masses<I: IntoIterator<Item = f64>>(masses: I) -> f64 {
    masses.into_iter().filter(|&m| m > 0.0).map(|m| -m * m.ln()).sum()
}

/// `sum -m log m` over the cell masses of the cloud.
pub fn partition_entropy(cloud: &WeightedCloud, part: &GridPartition) -> f64 {
    let mut mass = vec![0.0; part.k()];
    for a in &cloud.atoms {
        mass[part.cell_of(&a.point)] += a.weight;
    }
    entropy_of_masses(mass)
}

/// Distinct points of `F^n(x)` for `n = 0..levels`.
pub fn forward_levels(c: &Correspondence, x: SpherePoint, levels: usize, budget: u64) -> Result<Vec<Vec<SpherePoint>>> {
    let mut out = vec![vec![x]];
    let mut nodes = 1u64;
    for _ in 1..levels {
        let mut next: Vec<SpherePoint> = Vec::new();
        for p in out.last().expect("nonempty") {
            let f = c.forward(p)?;
            next.extend(f.distinct(MERGE_RADIUS).into_iter().map(|(q, _)| q));
        }
        next.sort_by(|a, b| a.canonical_cmp(b));
        next.dedup_by(|a, b| crate::sphere::chordal_distance(a, b) < MERGE_RADIUS);
        nodes += next.len() as u64;
        if nodes > budget {
            return Err(Error::BudgetExceeded { needed: nodes, budget });
        }
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntropyReport {
    /// `H(P'_N)` for `N = 1..=n_max`.
    pub joint_entropy: Vec<f64>,
    /// `H(P'_N) / N`.
    pub per_step: Vec<f64>,
    /// Least-squares slope of `H(P'_N)` against `N`.
    pub slope: f64,
    pub cells: usize,
}

/// Cell of `x` in the ordered preimage partition at depth `n`: the first cell
/// in partition order met by `F^n(x)`.
fn itinerary(c: &Correspondence, x: SpherePoint, part: &GridPartition, n_max: usize, budget: u64) -> Result<Vec<usize>> {
    Ok(forward_levels(c, x, n_max, budget)?
        .iter()
        .map(|lvl| lvl.iter().map(|p| part.cell_of(p)).min().expect("nonempty level"))
        .collect())
}

pub fn metric_entropy_estimate(
    c: &Correspondence,
    cloud: &WeightedCloud,
    part: &GridPartition,
    n_max: usize,
    budget: u64,
) -> Result<MetricEntropyReport> {
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be at least 1".into()));
    }
    let words: Vec<Vec<usize>> = cloud
        .atoms
        .par_iter()
        .map(|a| itinerary(c, a.point, part, n_max, budget))
        .collect::<Result<_>>()?;
    let mut joint_entropy = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut mass: BTreeMap<&[usize], f64> = BTreeMap::new();
        for (w, a) in words.iter().zip(&cloud.atoms) {
            *mass.entry(&w[..n]).or_insert(0.0) += a.weight;
        }
        joint_entropy.push(entropy_of_masses(mass.into_values()));
    }
    let per_step: Vec<f64> = joint_entropy.iter().enumerate().map(|(i, h)| h / (i + 1) as f64).collect();
    let ns: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let slope = least_squares_slope(&ns, &joint_entropy).unwrap_or(joint_entropy[0]);
    Ok(MetricEntropyReport {
        joint_entropy,
        per_step,
        slope,
        cells: part.k(),
    })
}

/// Cloud mass of `F^{-1}(A)`: atoms whose forward fiber meets `A`.
pub fn preimage_mass(c: &Correspondence, cloud: &WeightedCloud, in_a: impl Fn(&SpherePoint) -> bool + Sync) -> Result<f64> {
    let hits: Vec<f64> = cloud
        .atoms
        .par_iter()
        .map(|a| {
            let f = c.forward(&a.point)?;
            Ok(if f.points.iter().any(|p| in_a(&p.point)) { a.weight } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cloud::{brolin_cloud, uniform_circle_cloud};
    use crate::rational::RationalMap;
    use crate::sphere::lat_lon_net;

    #[test]
    fn uniform_splits() {
        for (n_lat, n_lon) in [(1, 2), (2, 8), (4, 4), (3, 5)] {
            let part = GridPartition::new(n_lat, n_lon).unwrap();
            let net = lat_lon_net(n_lat, n_lon);
            let cells: Vec<usize> = net.iter().map(|p| part.cell_of(p)).collect();
            assert_eq!(cells, (0..part.k()).collect::<Vec<_>>());
            let cloud = WeightedCloud::uniform(&net, "net").unwrap();
            let h = partition_entropy(&cloud, &part);
            assert!((h - (part.k() as f64).ln()).abs() < 1e-12);
        }
        let one = WeightedCloud::dirac(SpherePoint::real(0.5), "x");
        assert_eq!(partition_entropy(&one, &GridPartition::new(4, 4).unwrap()), 0.0);
    }

    #[test]
    fn poles_and_seams_have_cells() {
        let part = GridPartition::new(3, 7).unwrap();
        assert_eq!(part.cell_of(&SpherePoint::INFINITY) / 7, 2);
        assert_eq!(part.cell_of(&SpherePoint::ZERO) / 7, 0);
        assert_eq!(part.cell_of(&SpherePoint::real(-1.0)), 13);
    }

    #[test]
    fn identity_has_zero_entropy() {
        let c = Correspondence::identity();
        let cloud = uniform_circle_cloud(100);
        let r = metric_entropy_estimate(&c, &cloud, &GridPartition::new(2, 8).unwrap(), 5, DEFAULT_ORBIT_BUDGET).unwrap();
        assert!(r.slope.abs() < 1e-9);
    }

    #[test]
    fn squaring_map_entropy() {
        let f = RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let cloud = brolin_cloud(&f, SpherePoint::real(1.0), 14, 10_000, 11).unwrap();
        let part = GridPartition::new(1, 16).unwrap();
        let r = metric_entropy_estimate(&Correspondence::of_map(&f), &cloud, &part, 8, DEFAULT_ORBIT_BUDGET).unwrap();
        assert!(r.slope >= 0.45 && r.slope <= 0.80, "{r:?}");
        for h in &r.per_step {
            assert!(*h <= (part.k() as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn preimage_mass_of_map() {
        let f = RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let cloud = uniform_circle_cloud(64);
        let upper = |p: &SpherePoint| p.to_complex().is_some_and(|z| z.im > 0.0);
        let m = preimage_mass(&Correspondence::of_map(&f), &cloud, upper).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }
}
