//! Energy distance between weighted clouds under the chordal metric.

use rayon::prelude::*;

use super::cloud::{Atom, WeightedCloud};

/// Clouds with more atoms are subsampled to this many before pairing.
pub const MAX_ATOMS: usize = 4096;

/// Systematic quantile subsample: sort canonically, walk the cumulative
/// weight and take the atom covering each level `(k + 1/2) / MAX_ATOMS`.
pub fn stratified_subsample(atoms: &[Atom], cap: usize) -> Vec<([f64; 3], f64)> {
    if atoms.len() <= cap {
        return atoms.iter().map(|a| (a.point.embed(), a.weight)).collect();
    }
    let mut sorted: Vec<&Atom> = atoms.iter().collect();
    sorted.sort_by(|a, b| a.point.canonical_cmp(&b.point));
    let total: f64 = sorted.iter().map(|a| a.weight).sum();
    let mut out: Vec<([f64; 3], f64)> = Vec::with_capacity(cap);
    let mut cum = 0.0;
    let mut idx = 0;
    let w = 1.0 / cap as f64;
    for k in 0..cap {
        let level = (k as f64 + 0.5) / cap as f64 * total;
        while idx + 1 < sorted.len() && cum + sorted[idx].weight <= level {
            cum += sorted[idx].weight;
            idx += 1;
        }
        let e = sorted[idx].point.embed();
        match out.last_mut() {
            Some(last) if last.0 == e => last.1 += w,
            _ => out.push((e, w)),
        }
    }
    out
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `E[d(X, Y)]` over independent draws; rows summed in parallel, combined in order.
fn mean_distance(x: &[([f64; 3], f64)], y: &[([f64; 3], f64)]) -> f64 {
    let rows: Vec<f64> = x
        .par_iter()
        .map(|(p, wp)| wp * y.iter().map(|(q, wq)| wq * dist(p, q)).sum::<f64>())
        .collect();
    rows.iter().sum()
}

/// `2 E d(X,Y) - E d(X,X') - E d(Y,Y')`, clamped at zero.
pub fn energy_distance(c1: &WeightedCloud, c2: &WeightedCloud) -> f64 {
    let x = stratified_subsample(&c1.atoms, MAX_ATOMS);
    let y = stratified_subsample(&c2.atoms, MAX_ATOMS);
    let exy = 0.5 * (mean_distance(&x, &y) + mean_distance(&y, &x));
    (2.0 * exy - mean_distance(&x, &x) - mean_distance(&y, &y)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cloud::uniform_circle_cloud;
    use crate::sphere::SpherePoint;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn zero_against_infinity() {
        let a = WeightedCloud::dirac(SpherePoint::ZERO, "a");
        let b = WeightedCloud::dirac(SpherePoint::INFINITY, "b");
        assert!((energy_distance(&a, &b) - 4.0).abs() < 1e-15);
        assert_eq!(energy_distance(&a, &a), 0.0);
    }

    #[test]
    fn two_atom_hand_value() {
        // {0: 1/2, inf: 1/2} against {1: 1}: E_xy = sqrt 2, E_xx = 1, E_yy = 0.
        let a = WeightedCloud::uniform(&[SpherePoint::ZERO, SpherePoint::INFINITY], "a").unwrap();
        let b = WeightedCloud::dirac(SpherePoint::real(1.0), "b");
        let expect = 2.0 * 2f64.sqrt() - 1.0;
        assert!((energy_distance(&a, &b) - expect).abs() < 1e-14);
    }

    #[test]
    fn subsample_preserves_mass_and_spread() {
        let c = uniform_circle_cloud(10_000);
        let s = stratified_subsample(&c.atoms, MAX_ATOMS);
        let m: f64 = s.iter().map(|x| x.1).sum();
        assert!((m - 1.0).abs() < 1e-12);
        assert!(energy_distance(&c, &uniform_circle_cloud(4096)) < 1e-3);
    }

    fn cloud_from(v: &[(f64, f64, f64)]) -> WeightedCloud {
        let total: f64 = v.iter().map(|x| x.2).sum();
        WeightedCloud::new(
            v.iter()
                .map(|&(re, im, w)| Atom {
                    point: SpherePoint::new(Complex64::new(re, im)),
                    weight: w / total,
                })
                .collect(),
            0,
            WeightedCloud::dirac(SpherePoint::ZERO, "p").provenance,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(
            a in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.1..1.0f64), 1..20),
            b in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.1..1.0f64), 1..20),
        ) {
            let (x, y) = (cloud_from(&a), cloud_from(&b));
            let (e1, e2) = (energy_distance(&x, &y), energy_distance(&y, &x));
            prop_assert!(e1 >= 0.0);
            prop_assert!((e1 - e2).abs() < 1e-12);
            prop_assert!(energy_distance(&x, &x) < 1e-12);
        }
    }
}
