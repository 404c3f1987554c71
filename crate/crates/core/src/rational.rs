//! Rational maps `p/q` and Möbius transformations acting on the sphere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{projective_roots, ComplexPolynomial, Root, DEFAULT_CLUSTER_RADIUS};
use crate::sphere::{chordal_distance, SpherePoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Roots closer than this (chordal) are treated as a shared factor.
pub const COMMON_ROOT_TOL: f64 = 1e-10;

/// Joint vanishing threshold of numerator and denominator for evaluation.
pub const INDETERMINATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRational", into = "RawRational")]
pub struct RationalMap {
    num: ComplexPolynomial,
    den: ComplexPolynomial,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawRational {
    num: ComplexPolynomial,
    den: ComplexPolynomial,
}

impl TryFrom<RawRational> for RationalMap {
    type Error = Error;
    fn try_from(raw: RawRational) -> Result<Self> {
        RationalMap::new(raw.num, raw.den)
    }
}

impl From<RationalMap> for RawRational {
    fn from(r: RationalMap) -> Self {
        RawRational {
            num: r.num,
            den: r.den,
        }
    }
}

impl RationalMap {
    /// Validated constructor: degree at least 1 and no shared roots.
    pub fn new(num: ComplexPolynomial, den: ComplexPolynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Invalid("denominator is the zero polynomial".into()));
        }
        let r = RationalMap { num, den };
        let d = r.degree();
        if d < 1 {
            return Err(Error::DegreeTooLow {
                degree: d,
                required: 1,
            });
        }
        r.check_coprime()?;
        Ok(r)
    }

    pub fn polynomial(p: ComplexPolynomial) -> Result<Self> {
        Self::new(p, ComplexPolynomial::constant(ONE))
    }

    /// Shorthand for real coefficients, ascending.
    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(ComplexPolynomial::from_real(num), ComplexPolynomial::from_real(den))
    }

    /// Map with numerator and denominator of exact degree `deg` and
    /// coefficients uniform in the square `[-2, 2]^2`, redrawn until coprime.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, deg: usize) -> Self {
        loop {
            let mut draw = || {
                ComplexPolynomial::new(
                    (0..=deg)
                        .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                        .collect(),
                )
            };
            let (num, den) = (draw(), draw());
            if let Ok(r) = RationalMap::new(num, den) {
                if r.degree() == deg {
                    return r;
                }
            }
        }
    }

    pub fn num(&self) -> &ComplexPolynomial {
        &self.num
    }

    pub fn den(&self) -> &ComplexPolynomial {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.num.degree().unwrap_or(0).max(self.den.degree().unwrap_or(0))
    }

    fn check_coprime(&self) -> Result<()> {
        let (Some(dn), Some(dd)) = (self.num.degree(), self.den.degree()) else {
            return Ok(());
        };
        if dn == 0 || dd == 0 {
            return Ok(());
        }
        let rn = self.num.roots(DEFAULT_CLUSTER_RADIUS)?;
        let rd = self.den.roots(DEFAULT_CLUSTER_RADIUS)?;
        for a in &rn {
            for b in &rd {
                if chordal_distance(&a.point, &b.point) < COMMON_ROOT_TOL {
                    return Err(common(a));
                }
            }
            if relative_value(&self.den, &a.point) < COMMON_ROOT_TOL {
                return Err(common(a));
            }
        }
        Ok(())
    }

    /// Homogeneous numerator and denominator values at `p`, both of degree
    /// `deg R`.
    pub fn eval_projective(&self, p: &SpherePoint) -> (Complex64, Complex64) {
        let (x, y) = p.projective();
        let d = self.degree();
        (
            homogeneous(&self.num, d, x, y),
            homogeneous(&self.den, d, x, y),
        )
    }

    pub fn eval(&self, p: &SpherePoint) -> Result<SpherePoint> {
        let (n, m) = self.eval_projective(p);
        let scale = self.num.max_abs_coeff().max(self.den.max_abs_coeff());
        if n.norm() <= INDETERMINATE_TOL * scale && m.norm() <= INDETERMINATE_TOL * scale {
            return Err(Error::Indeterminate);
        }
        Ok(SpherePoint::from_ratio(n, m))
    }

    /// Wronskian `p'q - pq'`.
    pub fn wronskian(&self) -> ComplexPolynomial {
        &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative())
    }

    /// The `2 deg R - 2` critical points with multiplicity.
    pub fn critical_points(&self) -> Result<Vec<Root>> {
        let d = self.degree();
        if d < 2 {
            return Err(Error::DegreeTooLow {
                degree: d,
                required: 2,
            });
        }
        let w = self.wronskian();
        projective_roots(w.coeffs(), 2 * d - 2, DEFAULT_CLUSTER_RADIUS)
    }

    /// Solutions of `R(x) = y` with multiplicity.
    pub fn preimages(&self, y: &SpherePoint) -> Result<Vec<Root>> {
        let (y0, y1) = y.projective();
        let coeffs = self.level_coeffs(y0, y1);
        projective_roots(&coeffs, self.degree(), DEFAULT_CLUSTER_RADIUS)
    }

    /// Coefficients of `y1 p - y0 q` padded to length `deg R + 1`.
    pub fn level_coeffs(&self, y0: Complex64, y1: Complex64) -> Vec<Complex64> {
        (0..=self.degree())
            .map(|k| y1 * self.num.coeff(k) - y0 * self.den.coeff(k))
            .collect()
    }
}

fn common(r: &Root) -> Error {
    let z = r.point.to_complex().unwrap_or(Complex64::new(f64::INFINITY, 0.0));
    Error::CommonFactor { re: z.re, im: z.im }
}

/// `sum c_k x^k y^(d-k)`
pub fn homogeneous(p: &ComplexPolynomial, d: usize, x: Complex64, y: Complex64) -> Complex64 {
    if x.norm() <= y.norm() {
        let t = x / y;
        p.eval(t) * y.powu(d as u32)
    } else {
        let u = y / x;
        let mut acc = ZERO;
        for k in 0..=d {
            acc = acc * u + p.coeff(k);
        }
        // acc = sum c_k u^(d-k)
        acc * x.powu(d as u32)
    }
}

fn relative_value(p: &ComplexPolynomial, at: &SpherePoint) -> f64 {
    let Some(d) = p.degree() else { return 0.0 };
    let (x, y) = at.projective();
    let v = homogeneous(p, d, x, y).norm();
    let abs: f64 = p
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c.norm() * x.norm().powi(k as i32) * y.norm().powi((d - k) as i32))
        .sum();
    if abs == 0.0 {
        0.0
    } else {
        v / abs
    }
}

/// `z -> (az + b)/(cz + d)` normalized to determinant 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMobius", into = "RawMobius")]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct RawMobius {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl TryFrom<RawMobius> for MobiusMap {
    type Error = Error;
    fn try_from(r: RawMobius) -> Result<Self> {
        MobiusMap::new(r.a, r.b, r.c, r.d)
    }
}

impl From<MobiusMap> for RawMobius {
    fn from(m: MobiusMap) -> Self {
        RawMobius {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
        }
    }
}

/// Trace tolerance for the involution test.
pub const INVOLUTION_TOL: f64 = 1e-10;

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        let size = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
        if !(det.norm() > 1e-12 * size) || !det.norm().is_finite() {
            return Err(Error::DegenerateMobius);
        }
        if (det - ONE).norm() <= 1e-12 {
            return Ok(MobiusMap { a, b, c, d });
        }
        let s = det.sqrt().inv();
        Ok(MobiusMap {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let f = |x| Complex64::new(x, 0.0);
        Self::new(f(a), f(b), f(c), f(d))
    }

    pub fn identity() -> Self {
        MobiusMap {
            a: ONE,
            b: ZERO,
            c: ZERO,
            d: ONE,
        }
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn is_involution(&self) -> bool {
        self.trace().norm() < INVOLUTION_TOL
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let (x, y) = p.projective();
        SpherePoint::from_ratio(self.a * x + self.b * y, self.c * x + self.d * y)
    }

    pub fn inverse(&self) -> Self {
        MobiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &MobiusMap) -> Self {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn to_rational(&self) -> RationalMap {
        RationalMap {
            num: ComplexPolynomial::new(vec![self.b, self.a]),
            den: ComplexPolynomial::new(vec![self.d, self.c]),
        }
    }

    /// Largest chordal distance between the actions of two maps on `points`.
    pub fn max_deviation(&self, other: &MobiusMap, points: &[SpherePoint]) -> f64 {
        points
            .iter()
            .map(|p| chordal_distance(&self.apply(p), &other.apply(p)))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn q() -> RationalMap {
        RationalMap::from_real(&[0.0, -3.0, 0.0, 1.0], &[1.0]).unwrap()
    }

    fn ja(a: f64) -> MobiusMap {
        MobiusMap::from_real(a + 1.0, -2.0 * a, 2.0, -(a + 1.0)).unwrap()
    }

    #[test]
    fn eval_examples() {
        let v = q().eval(&SpherePoint::real(2.0)).unwrap();
        assert!((v.to_complex().unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        assert!(q().eval(&SpherePoint::INFINITY).unwrap().is_infinity());
        let r = RationalMap::from_real(&[-4.0, 0.0, 1.0], &[1.0, -2.0, 1.0]).unwrap();
        assert!(r.eval(&SpherePoint::real(1.0)).unwrap().is_infinity());
        let v = r.eval(&SpherePoint::INFINITY).unwrap();
        assert!((v.to_complex().unwrap() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn shared_root_rejected() {
        let e = RationalMap::from_real(&[-1.0, 0.0, 1.0], &[-1.0, 1.0]);
        assert!(matches!(e, Err(Error::CommonFactor { .. })));
        let e = RationalMap::from_real(&[1.0, -2.0, 1.0], &[-1.0, 1.0]);
        assert!(matches!(e, Err(Error::CommonFactor { .. })));
        assert!(matches!(
            RationalMap::from_real(&[3.0], &[1.0]),
            Err(Error::DegreeTooLow { .. })
        ));
    }

    fn has(roots: &[Root], z: SpherePoint, mult: usize) -> bool {
        roots
            .iter()
            .any(|r| r.multiplicity == mult && chordal_distance(&r.point, &z) < 1e-6)
    }

    #[test]
    fn critical_points_examples() {
        let sq = RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let cp = sq.critical_points().unwrap();
        assert!(has(&cp, SpherePoint::ZERO, 1) && has(&cp, SpherePoint::INFINITY, 1));

        let cp = q().critical_points().unwrap();
        assert!(has(&cp, SpherePoint::real(1.0), 1));
        assert!(has(&cp, SpherePoint::real(-1.0), 1));
        assert!(has(&cp, SpherePoint::INFINITY, 2));

        // Wronskian of (z^2 - a)/(z - 1)^2 expands to 2(z - 1)(a - z)
        let a = 4.0;
        let r = RationalMap::from_real(&[-a, 0.0, 1.0], &[1.0, -2.0, 1.0]).unwrap();
        let w = r.wronskian();
        let expect = ComplexPolynomial::from_real(&[-2.0 * a, 2.0 * (a + 1.0), -2.0]);
        assert!((&w - &expect).max_abs_coeff() < 1e-12);
        let cp = r.critical_points().unwrap();
        assert!(has(&cp, SpherePoint::real(1.0), 1) && has(&cp, SpherePoint::real(a), 1));

        assert!(matches!(
            RationalMap::from_real(&[0.0, 1.0], &[1.0]).unwrap().critical_points(),
            Err(Error::DegreeTooLow { .. })
        ));
    }

    #[test]
    fn preimages_of_square() {
        let sq = RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
        let pre = sq.preimages(&SpherePoint::real(4.0)).unwrap();
        assert!(has(&pre, SpherePoint::real(2.0), 1) && has(&pre, SpherePoint::real(-2.0), 1));
        let pre = sq.preimages(&SpherePoint::INFINITY).unwrap();
        assert!(has(&pre, SpherePoint::INFINITY, 2));
    }

    #[test]
    fn mobius_examples() {
        let j = ja(4.0);
        let v = j.apply(&SpherePoint::real(2.0)).to_complex().unwrap();
        assert!((v - c(-2.0, 0.0)).norm() < 1e-14);
        assert!(j.is_involution());
        assert!(!MobiusMap::identity().is_involution());
        let p = SpherePoint::new(c(0.3, -7.0));
        assert_eq!(MobiusMap::identity().apply(&p), p);
        assert_eq!(MobiusMap::from_real(1.0, 2.0, 2.0, 4.0), Err(Error::DegenerateMobius));
        let back: MobiusMap = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn involution_twice_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = MobiusMap::new(c(0.7, 0.2), c(1.5, -0.4), c(-0.3, 2.0), c(-0.7, -0.2)).unwrap();
        assert!(j.is_involution());
        for _ in 0..100 {
            let p = SpherePoint::random(&mut rng);
            assert!(chordal_distance(&j.apply(&j.apply(&p)), &p) < 1e-10);
        }
    }

    #[test]
    fn rational_json_layout() {
        let s = serde_json::to_string(&q()).unwrap();
        assert!(s.starts_with("{\"num\":[[0.0,0.0],[-3.0,0.0]"));
        let back: RationalMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q());
        assert!(serde_json::from_str::<RationalMap>("{\"num\":[[1,0],[1,0]],\"den\":[[1,0],[1,0]]}").is_err());
    }

    fn arb_coeffs(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), len)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn riemann_hurwitz_count(deg in 2usize..6, num in arb_coeffs(6), den in arb_coeffs(6)) {
            let n = ComplexPolynomial::new(num[..=deg].to_vec());
            let d = ComplexPolynomial::new(den[..deg].to_vec());
            if let Ok(r) = RationalMap::new(n, d) {
                let cp = r.critical_points().unwrap();
                let total: usize = cp.iter().map(|x| x.multiplicity).sum();
                prop_assert_eq!(total, 2 * r.degree() - 2);
            }
        }

        #[test]
        fn trace_zero_maps_are_involutions(
            a in (-3.0f64..3.0, -3.0f64..3.0),
            b in (-3.0f64..3.0, -3.0f64..3.0),
            cc in (-3.0f64..3.0, -3.0f64..3.0),
            x in (-20.0f64..20.0, -20.0f64..20.0),
        ) {
            let a = c(a.0, a.1);
            let det = -a * a - c(b.0, b.1) * c(cc.0, cc.1);
            prop_assume!(det.norm() > 0.1);
            if let Ok(m) = MobiusMap::new(a, c(b.0, b.1), c(cc.0, cc.1), -a) {
                prop_assert!(m.is_involution());
                let p = SpherePoint::new(c(x.0, x.1));
                prop_assert!(chordal_distance(&m.apply(&m.apply(&p)), &p) < 1e-10);
            }
        }
    }
}
