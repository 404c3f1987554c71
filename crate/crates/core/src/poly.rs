//! Dense complex polynomials and simultaneous root extraction.
//!
//! Roots are found with the Aberth-Ehrlich iteration started from the Newton
//! polygon radii. If that fails to reach a small backward error the companion
//! matrix eigenvalues are used instead. Roots of large modulus are iterated in
//! the reciprocal chart so nothing overflows near infinity.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_distance, Chart, SpherePoint};

/// Default radius below which roots are merged into one multiple root.
pub const DEFAULT_CLUSTER_RADIUS: f64 = 1e-6;

/// Coefficients below this fraction of the largest one count as zero when
/// deciding how many roots sit at 0 or at infinity.
pub const VANISHING_COEFF: f64 = 1e-14;

const MAX_ABERTH_ITERATIONS: usize = 600;
const ACCEPTABLE_BACKWARD_ERROR: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Polynomial with ascending coefficients. The highest stored coefficient is
/// nonzero unless the polynomial is zero (empty coefficient list).
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct ComplexPolynomial {
    coeffs: Vec<Complex64>,
}

impl From<Vec<Complex64>> for ComplexPolynomial {
    fn from(coeffs: Vec<Complex64>) -> Self {
        ComplexPolynomial::new(coeffs)
    }
}

impl From<ComplexPolynomial> for Vec<Complex64> {
    fn from(p: ComplexPolynomial) -> Self {
        p.coeffs
    }
}

/// A root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub point: SpherePoint,
    pub multiplicity: usize,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        ComplexPolynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        ComplexPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `z - root`
    pub fn linear_factor(root: Complex64) -> Self {
        Self::new(vec![-root, ONE])
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(ONE), |acc, r| &acc * &Self::linear_factor(*r))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `z^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drop leading coefficients that are negligible relative to the largest.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let scale = self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= rel_tol * scale) {
            coeffs.pop();
        }
        ComplexPolynomial { coeffs }
    }

    /// Roots with multiplicity; `deg(p)` roots in total.
    pub fn roots(&self, cluster_radius: f64) -> Result<Vec<Root>> {
        let degree = self.degree().ok_or(Error::ZeroPolynomial)?;
        projective_roots(&self.coeffs, degree, cluster_radius)
    }
}

impl Add for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn add(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn sub(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn mul(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return ComplexPolynomial::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ComplexPolynomial::new(out)
    }
}

impl Neg for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn neg(self) -> ComplexPolynomial {
        self.scale(-ONE)
    }
}

/// Roots of the binary form `sum c_k x^k y^(nominal-k)` on the sphere.
///
/// Vanishing top coefficients become roots at infinity, so the result always
/// has `nominal` roots counted with multiplicity.
pub fn projective_roots(
    coeffs: &[Complex64],
    nominal: usize,
    cluster_radius: f64,
) -> Result<Vec<Root>> {
    let raw = raw_projective_roots(coeffs, nominal)?;
    Ok(cluster_roots(&raw, cluster_radius))
}

/// Unclustered version of [`projective_roots`].
pub fn raw_projective_roots(coeffs: &[Complex64], nominal: usize) -> Result<Vec<SpherePoint>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroPolynomial);
    }
    let negligible = |c: &Complex64| c.norm() <= VANISHING_COEFF * scale;
    let top = coeffs
        .iter()
        .rposition(|c| !negligible(c))
        .expect("nonzero scale");
    let top = top.min(nominal);
    let low = coeffs.iter().position(|c| !negligible(c)).unwrap_or(0);

    let mut out = Vec::with_capacity(nominal);
    out.extend(std::iter::repeat(SpherePoint::ZERO).take(low));
    if top > low {
        let core: Vec<Complex64> = coeffs[low..=top].iter().map(|c| c / scale).collect();
        for r in finite_roots(&core)? {
            out.push(r);
        }
    }
    out.extend(std::iter::repeat(SpherePoint::INFINITY).take(nominal - top));
    Ok(out)
}

/// Merge roots closer than `radius` (chordal) into multiple roots located at
/// the cluster centroid. Output is sorted canonically.
pub fn cluster_roots(points: &[SpherePoint], radius: f64) -> Vec<Root> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if chordal_distance(&points[i], &points[j]) < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    let mut roots: Vec<Root> = groups
        .into_iter()
        .map(|g| {
            let point = if g.len() == 1 {
                points[g[0]]
            } else {
                centroid(g.iter().map(|&i| points[i]))
            };
            Root {
                point,
                multiplicity: g.len(),
            }
        })
        .collect();
    roots.sort_by(|a, b| a.point.canonical_cmp(&b.point));
    roots
}

/// Centroid of nearby points, averaged in the chart of the first.
pub fn centroid<I: IntoIterator<Item = SpherePoint>>(points: I) -> SpherePoint {
    let mut iter = points.into_iter();
    let first = iter.next().expect("centroid of empty set");
    let chart = first.chart();
    let mut sum = first.value();
    let mut count = 1.0;
    for p in iter {
        sum += p.coordinate_in(chart);
        count += 1.0;
    }
    SpherePoint::from_chart(sum / count, chart)
}

/// Roots of a polynomial whose constant and leading coefficients are nonzero.
fn finite_roots(c: &[Complex64]) -> Result<Vec<SpherePoint>> {
    let n = c.len() - 1;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![SpherePoint::from_ratio(-c[0], c[1])]),
        2 => Ok(quadratic_roots(c[2], c[1], c[0]).to_vec()),
        _ => {
            let roots = aberth(c);
            let worst = roots
                .iter()
                .map(|r| backward_error(c, r))
                .fold(0.0, f64::max);
            if worst.is_finite() && worst < ACCEPTABLE_BACKWARD_ERROR {
                return Ok(roots);
            }
            let fallback = companion_roots(c);
            let worst_fb = fallback
                .iter()
                .map(|r| backward_error(c, r))
                .fold(0.0, f64::max);
            if worst_fb.is_finite() && worst_fb < 1e-8 {
                Ok(fallback)
            } else {
                Err(Error::NonConvergence {
                    residual: worst.min(worst_fb),
                })
            }
        }
    }
}

fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> [SpherePoint; 2] {
    let disc = (b * b - a * c * 4.0).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    if q == ZERO {
        // b = 0 and disc = 0 forces c = 0, excluded by the caller
        return [SpherePoint::ZERO, SpherePoint::ZERO];
    }
    [SpherePoint::from_ratio(q, a), SpherePoint::from_ratio(c, q)]
}

/// Backward error `|p(r)| / sum |c_k||r|^k`, evaluated in the chart of `r`.
pub fn backward_error(c: &[Complex64], r: &SpherePoint) -> f64 {
    let n = c.len() - 1;
    let (x, chart) = (r.value(), r.chart());
    let mut val = ZERO;
    let mut abs = 0.0;
    let ax = x.norm();
    for k in (0..=n).rev() {
        let ck = match chart {
            Chart::Standard => c[k],
            Chart::Reciprocal => c[n - k],
        };
        val = val * x + ck;
        abs = abs * ax + ck.norm();
    }
    if abs == 0.0 {
        0.0
    } else {
        val.norm() / abs
    }
}

/// Newton correction `p(z)/p'(z)`; uses the reversed polynomial for |z| > 1.
fn newton_ratio(c: &[Complex64], z: Complex64) -> Complex64 {
    let n = c.len() - 1;
    if z.norm() <= 1.0 {
        let mut p = c[n];
        let mut dp = ZERO;
        for k in (0..n).rev() {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        if dp == ZERO {
            return if p == ZERO { ZERO } else { Complex64::new(f64::NAN, 0.0) };
        }
        p / dp
    } else {
        let u = z.inv();
        let mut q = c[0];
        let mut dq = ZERO;
        for k in 1..=n {
            dq = dq * u + q;
            q = q * u + c[k];
        }
        if q == ZERO {
            return ZERO;
        }
        z / (Complex64::new(n as f64, 0.0) - u * dq / q)
    }
}

/// Initial guesses spread on circles whose radii come from the upper convex
/// hull of `(k, ln|c_k|)`.
fn newton_polygon_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != ZERO)
        .map(|(k, v)| (k, v.norm().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (p.1 - a.1) - (b.1 - a.1) * (p.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut guesses = Vec::with_capacity(n);
    for (seg, w) in hull.windows(2).enumerate() {
        let (k0, y0) = w[0];
        let (k1, y1) = w[1];
        let count = k1 - k0;
        let radius = ((y0 - y1) / count as f64).exp();
        for t in 0..count {
            let angle = 2.0 * PI * t as f64 / count as f64 + 0.4 + 0.7 * seg as f64 + PI / (2.0 * n as f64);
            guesses.push(Complex64::from_polar(radius, angle));
        }
    }
    guesses
}

fn aberth(c: &[Complex64]) -> Vec<SpherePoint> {
    let n = c.len() - 1;
    let mut z = newton_polygon_guesses(c);
    debug_assert_eq!(z.len(), n);
    let mut done = vec![false; n];
    for _ in 0..MAX_ABERTH_ITERATIONS {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let ratio = newton_ratio(c, z[i]);
            if ratio == ZERO {
                done[i] = true;
                continue;
            }
            let mut sum = ZERO;
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff != ZERO {
                        sum += diff.inv();
                    }
                }
            }
            let delta = ratio / (ONE - ratio * sum);
            if !delta.re.is_finite() || !delta.im.is_finite() {
                continue;
            }
            z[i] -= delta;
            if delta.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
    z.into_iter().map(SpherePoint::new).collect()
}

fn companion_roots(c: &[Complex64]) -> Vec<SpherePoint> {
    let n = c.len() - 1;
    let lead = c[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = ONE;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let eig = m
        .clone()
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect::<Vec<_>>())
        .unwrap_or_default();
    eig.into_iter()
        .map(|mut r| {
            for _ in 0..3 {
                let d = newton_ratio(c, r);
                if d.re.is_finite() && d.im.is_finite() {
                    r -= d;
                }
            }
            SpherePoint::new(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn perfect_square_is_double_root() {
        let p = ComplexPolynomial::from_real(&[1.0, 2.0, 1.0]);
        let roots = p.roots(DEFAULT_CLUSTER_RADIUS).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
        assert!((roots[0].point.to_complex().unwrap() - c(-1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn difference_of_squares() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 1.0]);
        let roots = p.roots(DEFAULT_CLUSTER_RADIUS).unwrap();
        let mut xs: Vec<f64> = roots.iter().map(|r| r.point.to_complex().unwrap().re).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 1e-14 && (xs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cov_fiber_over_two_by_exact_division() {
        // (Q(2) - Q(w)) / (2 - w) for Q = z^3 - 3z, by synthetic division
        let q = ComplexPolynomial::from_real(&[0.0, -3.0, 0.0, 1.0]);
        let numer = &ComplexPolynomial::constant(q.eval(c(2.0, 0.0))) - &q;
        let mut rem = numer.coeffs().to_vec();
        // divide by (w - 2), then negate for (2 - w)
        let mut quot = vec![ZERO; 3];
        for k in (1..4).rev() {
            quot[k - 1] = rem[k];
            let carry = rem[k] * 2.0;
            rem[k - 1] += carry;
        }
        assert!(rem[0].norm() < 1e-12);
        let fiber = ComplexPolynomial::new(quot).scale(c(-1.0, 0.0));
        assert_eq!(fiber, ComplexPolynomial::from_real(&[1.0, 2.0, 1.0]));
        let roots = fiber.roots(DEFAULT_CLUSTER_RADIUS).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert_eq!(ComplexPolynomial::zero().roots(1e-6), Err(Error::ZeroPolynomial));
        assert_eq!(ComplexPolynomial::zero().degree(), None);
    }

    #[test]
    fn degree_drop_puts_roots_at_infinity() {
        let roots = projective_roots(&[c(1.0, 0.0), c(1.0, 0.0), ZERO, ZERO], 3, 1e-6).unwrap();
        let at_inf: usize = roots.iter().filter(|r| r.point.is_infinity()).map(|r| r.multiplicity).sum();
        assert_eq!(at_inf, 2);
        assert_eq!(roots.iter().map(|r| r.multiplicity).sum::<usize>(), 3);
    }

    #[test]
    fn wide_magnitude_roots() {
        let rs = [c(1e-6, 0.0), c(2.0, 1.0), c(-3e5, 2.0), c(0.5, -0.5)];
        let p = ComplexPolynomial::from_roots(&rs);
        let roots = p.roots(1e-12).unwrap();
        assert_eq!(roots.len(), 4);
        for r in rs {
            let sp = SpherePoint::new(r);
            let best = roots
                .iter()
                .map(|x| chordal_distance(&x.point, &sp))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "{r} missed by {best}");
        }
    }

    #[test]
    fn random_separated_roots_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let deg = rng.gen_range(1..=8);
            let mut rs: Vec<Complex64> = Vec::new();
            while rs.len() < deg {
                let r = 5.0 * rng.gen::<f64>().sqrt();
                let t = rng.gen_range(-PI..PI);
                let z = Complex64::from_polar(r, t);
                if rs.iter().all(|w| (w - z).norm() > 1e-3) {
                    rs.push(z);
                }
            }
            let p = ComplexPolynomial::from_roots(&rs);
            let roots = p.roots(1e-12).unwrap();
            assert_eq!(roots.iter().map(|r| r.multiplicity).sum::<usize>(), deg);
            for r in &rs {
                let best = roots
                    .iter()
                    .map(|x| (x.point.to_complex().unwrap() - r).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-7, "root {r} missed by {best}");
            }
            let lead = p.leading().norm();
            for x in &roots {
                if x.multiplicity == 1 {
                    let res = p.eval(x.point.to_complex().unwrap()).norm() / (1.0 + lead);
                    assert!(res < 1e-8 * (1.0 + p.max_abs_coeff()));
                }
            }
        }
    }

    #[test]
    fn companion_fallback_agrees() {
        let rs = [c(1.0, 2.0), c(-0.5, 0.1), c(3.0, -1.0), c(0.2, 0.2)];
        let p = ComplexPolynomial::from_roots(&rs);
        let fb = companion_roots(p.coeffs());
        for r in rs {
            let sp = SpherePoint::new(r);
            assert!(fb.iter().any(|x| chordal_distance(x, &sp) < 1e-9));
        }
    }

    #[test]
    fn arithmetic() {
        let p = ComplexPolynomial::from_real(&[1.0, 1.0]);
        let q = ComplexPolynomial::from_real(&[-1.0, 1.0]);
        assert_eq!(&p * &q, ComplexPolynomial::from_real(&[-1.0, 0.0, 1.0]));
        assert_eq!((&p - &p).degree(), None);
        assert_eq!(p.eval(ZERO), c(1.0, 0.0));
        assert_eq!(
            ComplexPolynomial::from_real(&[0.0, -3.0, 0.0, 1.0]).derivative(),
            ComplexPolynomial::from_real(&[-3.0, 0.0, 3.0])
        );
    }

    #[test]
    fn json_layout() {
        let p = ComplexPolynomial::from_real(&[1.0, -2.0]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[1.0,0.0],[-2.0,0.0]]");
        let back: ComplexPolynomial = serde_json::from_str("[[1,0],[-2,0],[0,0]]").unwrap();
        assert_eq!(back, p);
    }
}
