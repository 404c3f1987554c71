//! Sylvester resultants and their recovery as polynomials by interpolation on
//! roots of unity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::graph::{powers, GraphPolynomial};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Interpolated coefficients below this fraction of the largest are zeroed.
pub const INTERPOLATION_NOISE: f64 = 1e-12;

/// Largest relative off-grid mismatch tolerated after interpolation.
pub const CONDITION_LIMIT: f64 = 1e-8;

/// Resultant of two polynomials of nominal degrees `f.len() - 1` and
/// `g.len() - 1` (a vanishing top coefficient is a common root at infinity).
pub fn sylvester_resultant(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let m = f.len() - 1;
    let n = g.len() - 1;
    let size = m + n;
    if size == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut s = DMatrix::<Complex64>::zeros(size, size);
    for r in 0..n {
        for k in 0..=m {
            s[(r, r + k)] = f[m - k];
        }
    }
    for r in 0..m {
        for k in 0..=n {
            s[(n + r, r + k)] = g[n - k];
        }
    }
    s.determinant()
}

fn unit_root(n: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

/// Coefficients of the degree `< n` polynomial through `values[a]` at the
/// `n`-th roots of unity.
pub fn interpolate_roots_of_unity(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            let s: Complex64 = values
                .iter()
                .enumerate()
                .map(|(a, v)| v * unit_root(n, (n - (k * a) % n) % n))
                .sum();
            s / n as f64
        })
        .collect()
}

fn clean(coeffs: &mut [Complex64]) {
    let m = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for c in coeffs.iter_mut() {
        if c.norm() <= INTERPOLATION_NOISE * m {
            *c = ZERO;
        }
    }
}

fn single_graph(c: &Correspondence) -> Result<&GraphPolynomial> {
    match c.components() {
        [only] if c.is_direct() && only.multiplicity == 1 => Ok(&only.graph),
        _ => Err(Error::NotDirect),
    }
}

/// Coefficients in `u` of `B(z0, u)` at nominal degree `deg_w`.
fn row_at_z(b: &GraphPolynomial, z: Complex64) -> Vec<Complex64> {
    let zp = powers(z, Complex64::new(1.0, 0.0), b.deg_z());
    (0..=b.deg_w())
        .map(|j| (0..=b.deg_z()).map(|i| b.coeff(i, j) * zp[i]).sum())
        .collect()
}

/// Coefficients in `u` of `B(u, w0)` at nominal degree `deg_z`.
fn column_at_w(b: &GraphPolynomial, w: Complex64) -> Vec<Complex64> {
    let wp = powers(w, Complex64::new(1.0, 0.0), b.deg_w());
    (0..=b.deg_z())
        .map(|i| (0..=b.deg_w()).map(|j| b.coeff(i, j) * wp[j]).sum())
        .collect()
}

/// Graph polynomial of `c1 o c2` as `Res_u(B2(z, u), B1(u, w))`.
pub fn compose_graph_poly(
    c1: &Correspondence,
    c2: &Correspondence,
    degree_bound: usize,
) -> Result<GraphPolynomial> {
    let b1 = single_graph(c1)?.normalized();
    let b2 = single_graph(c2)?.normalized();
    let m2 = b2.deg_w();
    let m1 = b1.deg_z();
    let dz = m1 * b2.deg_z();
    let dw = m2 * b1.deg_w();
    let size = (dz + 1) * (dw + 1);
    if size > degree_bound * degree_bound {
        return Err(Error::DegreeBoundExceeded {
            size,
            bound: degree_bound * degree_bound,
        });
    }
    let (nz, nw) = (dz + 1, dw + 1);
    let res = |z: Complex64, w: Complex64| sylvester_resultant(&row_at_z(&b2, z), &column_at_w(&b1, w));

    let mut grid = vec![ZERO; nz * nw];
    for a in 0..nz {
        for b in 0..nw {
            grid[a * nw + b] = res(unit_root(nz, a), unit_root(nw, b));
        }
    }
    // interpolate along w for each z node, then along z for each w power
    let mut partial = vec![ZERO; nz * nw];
    for a in 0..nz {
        let row = interpolate_roots_of_unity(&grid[a * nw..(a + 1) * nw]);
        partial[a * nw..(a + 1) * nw].copy_from_slice(&row);
    }
    let mut coeffs = vec![ZERO; nz * nw];
    for j in 0..nw {
        let col: Vec<Complex64> = (0..nz).map(|a| partial[a * nw + j]).collect();
        for (i, c) in interpolate_roots_of_unity(&col).into_iter().enumerate() {
            coeffs[i * nw + j] = c;
        }
    }
    clean(&mut coeffs);
    let g = GraphPolynomial::new(dz, dw, coeffs)?;

    let mut estimate: f64 = 0.0;
    for (z, w) in [
        (Complex64::from_polar(0.61, 0.37), Complex64::from_polar(0.83, 2.11)),
        (Complex64::from_polar(0.97, -1.3), Complex64::from_polar(0.45, 0.9)),
    ] {
        let direct = res(z, w);
        let interp = g.eval(z, w);
        let scale: f64 = (0..=g.deg_z())
            .flat_map(|i| (0..=g.deg_w()).map(move |j| (i, j)))
            .map(|(i, j)| g.coeff(i, j).norm() * z.norm().powi(i as i32) * w.norm().powi(j as i32))
            .sum::<f64>()
            .max(direct.norm());
        estimate = estimate.max((direct - interp).norm() / scale);
    }
    if !(estimate <= CONDITION_LIMIT) {
        return Err(Error::InterpolationIllConditioned { estimate });
    }
    Ok(g)
}

/// Projective discriminant of `B(z, .)` in `w`: the resultant of the two
/// partial derivatives of the binary form in `w`, as a polynomial in `z` of
/// nominal degree `deg_z (2 deg_w - 2)`.
pub fn w_discriminant(b: &GraphPolynomial) -> Result<(Vec<Complex64>, usize)> {
    let dw = b.deg_w();
    if dw < 2 {
        return Ok((vec![Complex64::new(1.0, 0.0)], 0));
    }
    let b = b.normalized();
    let nominal = b.deg_z() * (2 * dw - 2);
    let n = nominal + 1;
    let values: Vec<Complex64> = (0..n)
        .map(|a| {
            let row = row_at_z(&b, unit_root(n, a));
            let ds: Vec<Complex64> = (1..=dw).map(|j| row[j] * j as f64).collect();
            let dt: Vec<Complex64> = (0..dw).map(|j| row[j] * (dw - j) as f64).collect();
            sylvester_resultant(&ds, &dt)
        })
        .collect();
    let mut coeffs = interpolate_roots_of_unity(&values);
    let peak = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let typical = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak <= 1e-13 * typical.max(1e-300) || peak == 0.0 {
        return Err(Error::DiscriminantDegenerate);
    }
    clean(&mut coeffs);
    Ok((coeffs, nominal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::compose;
    use crate::graph::{cov_graph, mobius_graph};
    use crate::poly::projective_roots;
    use crate::rational::{MobiusMap, RationalMap};
    use crate::sphere::{chordal_distance, SpherePoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn resultant_of_linear_factors() {
        // Res(u - 2, u - 5) = 2 - 5 up to the Sylvester sign convention
        let r = sylvester_resultant(&[c(-2.0, 0.0), c(1.0, 0.0)], &[c(-5.0, 0.0), c(1.0, 0.0)]);
        assert!((r.norm() - 3.0).abs() < 1e-12);
        let r = sylvester_resultant(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn interpolation_recovers_coefficients() {
        let p = [c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0), c(4.0, -1.0)];
        let vals: Vec<Complex64> = (0..4)
            .map(|a| {
                let z = unit_root(4, a);
                p.iter().rev().fold(ZERO, |acc, k| acc * z + k)
            })
            .collect();
        let back = interpolate_roots_of_unity(&vals);
        for (x, y) in back.iter().zip(&p) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn mobius_graphs_compose_to_product() {
        let m1 = MobiusMap::new(c(1.0, 0.5), c(2.0, 0.0), c(-0.3, 1.0), c(0.7, 0.2)).unwrap();
        let m2 = MobiusMap::new(c(0.2, 0.0), c(-1.0, 1.0), c(1.0, 0.0), c(3.0, -0.5)).unwrap();
        let g = compose_graph_poly(
            &Correspondence::mobius(&m1),
            &Correspondence::mobius(&m2),
            4,
        )
        .unwrap();
        let want = mobius_graph(&m1.compose(&m2));
        assert_eq!((g.deg_z(), g.deg_w()), (1, 1));
        let s = g.coeff(1, 1) / want.coeff(1, 1);
        for i in 0..=1 {
            for j in 0..=1 {
                assert!((g.coeff(i, j) - s * want.coeff(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bound_is_enforced() {
        let q = RationalMap::from_real(&[0.0, -3.0, 0.0, 1.0], &[1.0]).unwrap();
        let cov = Correspondence::cov(&q).unwrap();
        assert!(matches!(
            compose_graph_poly(&cov, &cov, 4),
            Err(Error::DegreeBoundExceeded { size: 25, bound: 16 })
        ));
        let chained = compose(&cov, &cov);
        assert_eq!(compose_graph_poly(&chained, &cov, 10), Err(Error::NotDirect));
    }

    #[test]
    fn composed_graph_vanishes_on_chained_fibers() {
        let q = RationalMap::from_real(&[0.0, -3.0, 0.0, 1.0], &[1.0]).unwrap();
        let cov = Correspondence::cov(&q).unwrap();
        let j = Correspondence::mobius(&MobiusMap::from_real(5.0, -8.0, 2.0, -5.0).unwrap());
        let g = compose_graph_poly(&j, &cov, 8).unwrap();
        assert_eq!((g.deg_z(), g.deg_w()), (2, 2));
        let chained = compose(&j, &cov);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let z = SpherePoint::random(&mut rng);
            for w in chained.forward(&z).unwrap().points {
                assert!(g.residual(&z, &w.point) < 1e-6);
            }
        }
    }

    #[test]
    fn cubic_discriminant() {
        // w^2 + zw + z^2 - 3 has discriminant 12 - 3z^2 and a double root over infinity
        let q = RationalMap::from_real(&[0.0, -3.0, 0.0, 1.0], &[1.0]).unwrap();
        let (d, nominal) = w_discriminant(&cov_graph(&q).unwrap()).unwrap();
        assert_eq!(nominal, 4);
        let roots = projective_roots(&d, nominal, 1e-6).unwrap();
        for (x, m) in [(SpherePoint::real(2.0), 1), (SpherePoint::real(-2.0), 1), (SpherePoint::INFINITY, 2)] {
            assert!(roots.iter().any(|r| r.multiplicity == m && chordal_distance(&r.point, &x) < 1e-9));
        }
    }

    #[test]
    fn random_cubic_compositions_have_bidegree_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut map = || loop {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if let Ok(r) = RationalMap::from_real(&v, &[1.0]) {
                break Correspondence::cov(&r).unwrap();
            }
        };
        let (r, s) = (map(), map());
        let g = compose_graph_poly(&r, &s, 5).unwrap();
        assert_eq!((g.deg_z(), g.deg_w()), (4, 4));
    }
}
