//! The concrete families `J_a`, `F_a = J_a o Cov^Q`, `F_{R,S} = Cov^R o Cov^S`,
//! the involution dictionary for quadratic maps, Klein pair sampling and the
//! local branch through the parabolic fixed point.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{compose, Correspondence};
use crate::error::{Error, Result};
use crate::poly::ComplexPolynomial;
use crate::rational::{MobiusMap, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KHint {
    KnownInK,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyParameterA {
    pub a: Complex64,
    pub in_k_hint: KHint,
}

impl FamilyParameterA {
    pub fn new(a: Complex64) -> Result<Self> {
        if (a - ONE).norm() <= 1e-12 {
            return Err(Error::BadParameter);
        }
        let known = a.im == 0.0 && a.re > 1.0 && a.re <= 4.0;
        Ok(FamilyParameterA {
            a,
            in_k_hint: if known { KHint::KnownInK } else { KHint::Unknown },
        })
    }

    pub fn real(a: f64) -> Result<Self> {
        Self::new(Complex64::new(a, 0.0))
    }
}

/// `Q(z) = z^3 - 3z`
pub fn cubic_q() -> RationalMap {
    RationalMap::from_real(&[0.0, -3.0, 0.0, 1.0], &[1.0]).expect("valid cubic")
}

/// `J_a(z) = ((a+1)z - 2a) / (2z - (a+1))`
pub fn make_ja(a: &FamilyParameterA) -> Result<MobiusMap> {
    let a = a.a;
    MobiusMap::new(a + 1.0, -2.0 * a, Complex64::new(2.0, 0.0), -(a + 1.0)).map_err(|_| Error::BadParameter)
}

/// `F_a = J_a o Cov^Q`, evaluated as the chain `[Cov^Q, J_a]`.
pub fn make_fa(a: &FamilyParameterA) -> Result<Correspondence> {
    let j = Correspondence::mobius(&make_ja(a)?);
    let cov = Correspondence::cov(&cubic_q())?;
    Ok(compose(&j, &cov))
}

/// `F_{R,S} = Cov^R o Cov^S`
pub fn make_frs(r: &RationalMap, s: &RationalMap) -> Result<Correspondence> {
    Ok(compose(&Correspondence::cov(r)?, &Correspondence::cov(s)?))
}

/// Second point of `F_a(1)` besides the fixed point: `J_a(-2)`.
pub fn fa_partner_of_one(a: &FamilyParameterA) -> Complex64 {
    (4.0 * a.a + 2.0) / (a.a + 5.0)
}

/// Covering involution of a degree-two map.
pub fn quadratic_to_involution(r: &RationalMap) -> Result<MobiusMap> {
    if r.degree() != 2 {
        return Err(Error::DegreeMismatch {
            expected: 2,
            got: r.degree(),
        });
    }
    let (p, q) = (r.num(), r.den());
    let (a, b, c) = (p.coeff(2), p.coeff(1), p.coeff(0));
    let (d, e, f) = (q.coeff(2), q.coeff(1), q.coeff(0));
    let big_a = c * d - a * f;
    let big_b = c * e - b * f;
    let big_c = a * e - b * d;
    MobiusMap::new(big_a, big_b, big_c, -big_a)
}

/// A degree-two map whose covering involution is `j`.
pub fn involution_to_quadratic(j: &MobiusMap) -> Result<RationalMap> {
    if !j.is_involution() {
        return Err(Error::NotAnInvolution);
    }
    let [big_a, big_b, big_c, _] = j.coefficients();
    let (a, b, c, d, e, f);
    if big_a.norm() > 1e-8 {
        d = ZERO;
        f = ONE;
        a = -big_a;
        e = -big_c / big_a;
        if big_c.norm() > 1e-8 {
            b = ZERO;
            c = -big_b * big_a / big_c;
        } else {
            b = -big_b;
            c = ZERO;
        }
    } else {
        d = ZERO;
        f = ZERO;
        e = ONE;
        a = big_c;
        b = ZERO;
        c = big_b;
    }
    RationalMap::new(
        ComplexPolynomial::new(vec![c, b, a]),
        ComplexPolynomial::new(vec![f, e, d]),
    )
}

/// Result of fitting the branch of `F_a` through `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaFit {
    /// Coefficients of `t^0 .. t^5` in `g_a(1 + t) - 1`.
    pub coeffs: Vec<Complex64>,
    pub c2: Complex64,
    pub c4: Complex64,
    pub fit_residual: f64,
}

/// Follow the single-valued branch of `F_a` through the fixed point 1 on the
/// circle `|z - 1| = fit_radius` and fit a degree-5 polynomial in `t = z - 1`.
pub fn ga_branch_coefficients(a: &FamilyParameterA, fit_radius: f64, n_samples: usize) -> Result<GaFit> {
    if !(fit_radius > 0.0) || n_samples < 12 {
        return Err(Error::Invalid("need fit_radius > 0 and at least 12 samples".into()));
    }
    let fa = make_fa(a)?;
    let mut ts = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    // tangent to the identity at 1, so the first sample is predicted by z itself
    let mut previous = Complex64::new(1.0 + fit_radius, 0.0);
    for k in 0..n_samples {
        let t = Complex64::from_polar(fit_radius, 2.0 * PI * k as f64 / n_samples as f64);
        let z = ONE + t;
        let fiber = fa.forward(&SpherePoint::new(z))?;
        let mut cands: Vec<(f64, Complex64)> = fiber
            .points
            .iter()
            .filter_map(|p| p.point.to_complex())
            .map(|w| ((w - previous).norm(), w))
            .collect();
        cands.sort_by(|x, y| x.0.total_cmp(&y.0));
        let Some(&(best, w)) = cands.first() else {
            return Err(Error::BranchAmbiguity);
        };
        if cands.len() > 1 && cands[1].0 < 4.0 * best.max(1e-15) {
            return Err(Error::BranchAmbiguity);
        }
        if fiber.points.len() < 2 && fiber.total_multiplicity() > 1 {
            return Err(Error::BranchAmbiguity);
        }
        previous = w;
        ts.push(t);
        ys.push(w - ONE);
    }
    // monomials t^0..t^5 are orthogonal on equispaced circle samples
    let n = n_samples as f64;
    let coeffs: Vec<Complex64> = (0..6)
        .map(|j| {
            let s: Complex64 = ts
                .iter()
                .zip(&ys)
                .map(|(t, y)| y * (t.conj() / fit_radius).powu(j as u32))
                .sum();
            s / n / fit_radius.powi(j as i32)
        })
        .collect();
    let fit_residual = (ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let f = coeffs.iter().rev().fold(ZERO, |acc, c| acc * t + c);
            (y - f).norm_sqr()
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GaFit {
        c2: coeffs[2],
        c4: coeffs[4],
        coeffs,
        fit_residual,
    })
}

/// Region of the sphere used in Klein combination pairs. Boundaries are
/// excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Disk { center: Complex64, radius: f64 },
    /// Points `x` with `Re((x - point) conj(normal)) > 0`.
    HalfPlane { point: Complex64, normal: Complex64 },
    Complement { of: Box<RegionSpec> },
    /// Right of the hyperbola branch: `x > a sqrt(1 + y^2 / b^2)`.
    Hyperbola { a: f64, b: f64 },
    Sphere,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Disk { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(Error::Invalid("disk radius must be positive".into()))
            }
            RegionSpec::HalfPlane { normal, .. } if !(normal.norm() > 0.0) => {
                Err(Error::Invalid("half-plane normal must be nonzero".into()))
            }
            RegionSpec::Hyperbola { a, b } if !(*a > 0.0 && *b > 0.0) => {
                Err(Error::Invalid("hyperbola axes must be positive".into()))
            }
            RegionSpec::Complement { of } => of.validate(),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, p: &SpherePoint) -> bool {
        match self {
            RegionSpec::Sphere => true,
            RegionSpec::Complement { of } => !of.contains(p),
            _ => {
                let Some(z) = p.to_complex() else { return false };
                match self {
                    RegionSpec::Disk { center, radius } => (z - center).norm() < *radius,
                    RegionSpec::HalfPlane { point, normal } => ((z - point) * normal.conj()).re > 0.0,
                    RegionSpec::Hyperbola { a, b } => z.re > a * (1.0 + (z.im / b).powi(2)).sqrt(),
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Pair for `F_a`: outside of the circle through 1 and `a` on the real
/// axis, and the Joukowski image of the sector `|arg t| < pi/3`.
pub fn standard_klein_pair(a: f64) -> (RegionSpec, RegionSpec) {
    let center = Complex64::new((1.0 + a) / 2.0, 0.0);
    let radius = (a - 1.0).abs() / 2.0;
    (
        RegionSpec::Complement {
            of: Box::new(RegionSpec::Disk { center, radius }),
        },
        RegionSpec::Hyperbola {
            a: 1.0,
            b: 3f64.sqrt(),
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// 1 or 2 for a region moved onto itself, 0 for a covering gap.
    pub region: u8,
    pub point: SpherePoint,
    pub image: Option<SpherePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KleinReport {
    pub rng_seed: u64,
    pub n_samples: usize,
    pub disjointness_violations: usize,
    pub covering_violations: usize,
    /// Samples of region 1 whose image leaves region 2.
    pub containment_violations: usize,
    /// Samples of region 1 whose image meets the closure of region 2,
    /// approximated by a chordal margin.
    pub closure_meets: usize,
    pub witnesses: Vec<Witness>,
    pub passed: bool,
}

const MAX_WITNESSES: usize = 20;
const REJECTION_TRIES: usize = 100_000;

fn sample_in(region: &RegionSpec, seed: u64, index: usize) -> Option<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..REJECTION_TRIES)
        .map(|_| SpherePoint::random(&mut rng))
        .find(|p| region.contains(p))
}

/// Monte-Carlo check of a Klein combination pair: each correspondence must
/// move its region off itself and the regions must cover the sphere away from
/// the punctures.
pub fn klein_pair_check(
    c1: &Correspondence,
    c2: &Correspondence,
    delta1: &RegionSpec,
    delta2: &RegionSpec,
    n_samples: usize,
    rng_seed: u64,
    punctures: &[SpherePoint],
    puncture_radius: f64,
) -> Result<KleinReport> {
    delta1.validate()?;
    delta2.validate()?;
    let margin = 1e-9;
    let near_closure = |p: &SpherePoint, r: &RegionSpec| {
        r.contains(p) || {
            let z = p.to_complex();
            [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)].iter().any(|(dx, dy)| {
                z.is_some_and(|z| {
                    let s = margin * (1.0 + z.norm_sqr());
                    r.contains(&SpherePoint::new(z + Complex64::new(dx * s, dy * s)))
                })
            })
        }
    };
    let per_region = |c: &Correspondence, region: &RegionSpec, tag: u8, salt: u64| {
        (0..n_samples)
            .into_par_iter()
            .map(|i| -> Result<Vec<(Witness, bool, bool)>> {
                let Some(p) = sample_in(region, rng_seed ^ salt, i) else {
                    return Ok(Vec::new());
                };
                let f = c.forward(&p)?;
                let mut hits = Vec::new();
                for (w, _) in f.distinct(1e-9) {
                    let into_self = region.contains(&w);
                    let (leaves_other, meets_closure) = if tag == 1 {
                        (!delta2.contains(&w), near_closure(&w, delta2))
                    } else {
                        (false, false)
                    };
                    if into_self || leaves_other || meets_closure {
                        hits.push((
                            Witness {
                                region: if into_self { tag } else { tag + 2 },
                                point: p,
                                image: Some(w),
                            },
                            leaves_other,
                            meets_closure,
                        ));
                    }
                }
                Ok(hits)
            })
            .collect::<Result<Vec<_>>>()
    };
    let r1 = per_region(c1, delta1, 1, 0x9e37_79b9)?;
    let r2 = per_region(c2, delta2, 2, 0x7f4a_7c15)?;
    let covering: Vec<Option<SpherePoint>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let p = sample_in(&RegionSpec::Sphere, rng_seed ^ 0x2545_f491, i).expect("sphere sample");
            let punctured = punctures.iter().any(|x| chordal_distance(x, &p) < puncture_radius);
            (!punctured && !delta1.contains(&p) && !delta2.contains(&p)).then_some(p)
        })
        .collect();

    let mut witnesses = Vec::new();
    let (mut disjoint, mut contain, mut closure) = (0, 0, 0);
    for (w, leaves, meets) in r1.into_iter().chain(r2).flatten() {
        if w.region <= 2 {
            disjoint += 1;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(w.clone());
            }
        }
        contain += leaves as usize;
        closure += meets as usize;
    }
    let mut cover = 0;
    for p in covering.into_iter().flatten() {
        cover += 1;
        if witnesses.len() < MAX_WITNESSES {
            witnesses.push(Witness {
                region: 0,
                point: p,
                image: None,
            });
        }
    }
    Ok(KleinReport {
        rng_seed,
        n_samples,
        disjointness_violations: disjoint,
        covering_violations: cover,
        containment_violations: contain,
        closure_meets: closure,
        witnesses,
        passed: disjoint == 0 && cover == 0,
    })
}
