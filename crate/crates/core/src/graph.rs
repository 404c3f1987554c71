//! Bivariate graph polynomials `B(z, w) = sum c_ij z^i w^j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{projective_roots, raw_projective_roots, Root, DEFAULT_CLUSTER_RADIUS};
use crate::rational::{MobiusMap, RationalMap};
use crate::sphere::SpherePoint;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative size below which a whole row or column counts as zero.
pub const TIGHT_DEGREE_TOL: f64 = 1e-14;

/// Relative remainder allowed when dividing by `z - w`.
pub const DIVISION_TOL: f64 = 1e-10;

/// Specialized fibers whose coefficients all fall below this fraction of the
/// graph's largest coefficient are reported as degenerate.
pub const FIBER_DEGENERATE_TOL: f64 = 1e-13;

/// Which variable is fixed when a fiber is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// fix `z`, solve for `w`
    Forward,
    /// fix `w`, solve for `z`
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct GraphPolynomial {
    deg_z: usize,
    deg_w: usize,
    coeffs: Vec<Complex64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawGraph {
    deg_z: usize,
    deg_w: usize,
    coeffs: Vec<Complex64>,
}

impl TryFrom<RawGraph> for GraphPolynomial {
    type Error = Error;
    fn try_from(r: RawGraph) -> Result<Self> {
        if r.coeffs.len() != (r.deg_z + 1) * (r.deg_w + 1) {
            return Err(Error::Invalid(format!(
                "graph polynomial of bidegree ({}, {}) needs {} coefficients, got {}",
                r.deg_z,
                r.deg_w,
                (r.deg_z + 1) * (r.deg_w + 1),
                r.coeffs.len()
            )));
        }
        let g = GraphPolynomial {
            deg_z: r.deg_z,
            deg_w: r.deg_w,
            coeffs: r.coeffs,
        };
        if g.max_abs_coeff() == 0.0 {
            return Err(Error::ZeroPolynomial);
        }
        Ok(g)
    }
}

impl From<GraphPolynomial> for RawGraph {
    fn from(g: GraphPolynomial) -> Self {
        RawGraph {
            deg_z: g.deg_z,
            deg_w: g.deg_w,
            coeffs: g.coeffs,
        }
    }
}

impl GraphPolynomial {
    /// Row-major coefficients (`i` indexes `z`), trimmed to tight degrees.
    pub fn new(deg_z: usize, deg_w: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        assert_eq!(coeffs.len(), (deg_z + 1) * (deg_w + 1));
        let g = GraphPolynomial {
            deg_z,
            deg_w,
            coeffs,
        };
        if g.max_abs_coeff() == 0.0 {
            return Err(Error::ZeroPolynomial);
        }
        Ok(g.tightened(TIGHT_DEGREE_TOL))
    }

    pub fn from_fn(deg_z: usize, deg_w: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let mut coeffs = Vec::with_capacity((deg_z + 1) * (deg_w + 1));
        for i in 0..=deg_z {
            for j in 0..=deg_w {
                coeffs.push(f(i, j));
            }
        }
        Self::new(deg_z, deg_w, coeffs)
    }

    pub fn deg_z(&self) -> usize {
        self.deg_z
    }

    pub fn deg_w(&self) -> usize {
        self.deg_w
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> Complex64 {
        if i > self.deg_z || j > self.deg_w {
            ZERO
        } else {
            self.coeffs[i * (self.deg_w + 1) + j]
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn tightened(self, tol: f64) -> Self {
        let scale = self.max_abs_coeff();
        let small = |c: Complex64| c.norm() <= tol * scale;
        let mut dz = self.deg_z;
        while dz > 0 && (0..=self.deg_w).all(|j| small(self.coeff(dz, j))) {
            dz -= 1;
        }
        let mut dw = self.deg_w;
        while dw > 0 && (0..=dz).all(|i| small(self.coeff(i, dw))) {
            dw -= 1;
        }
        if dz == self.deg_z && dw == self.deg_w {
            return self;
        }
        let mut coeffs = Vec::with_capacity((dz + 1) * (dw + 1));
        for i in 0..=dz {
            for j in 0..=dw {
                coeffs.push(self.coeff(i, j));
            }
        }
        GraphPolynomial {
            deg_z: dz,
            deg_w: dw,
            coeffs,
        }
    }

    /// Swap the roles of `z` and `w`.
    pub fn transpose(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for j in 0..=self.deg_w {
            for i in 0..=self.deg_z {
                coeffs.push(self.coeff(i, j));
            }
        }
        GraphPolynomial {
            deg_z: self.deg_w,
            deg_w: self.deg_z,
            coeffs,
        }
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for i in (0..=self.deg_z).rev() {
            let mut row = ZERO;
            for j in (0..=self.deg_w).rev() {
                row = row * w + self.coeff(i, j);
            }
            acc = acc * z + row;
        }
        acc
    }

    /// Bihomogeneous value at projective coordinates, together with the sum
    /// of absolute term values used to scale residuals.
    pub fn eval_projective(&self, z: &SpherePoint, w: &SpherePoint) -> (Complex64, f64) {
        let (x, y) = z.projective();
        let (s, t) = w.projective();
        let zp = powers(x, y, self.deg_z);
        let wp = powers(s, t, self.deg_w);
        let mut val = ZERO;
        let mut abs = 0.0;
        for i in 0..=self.deg_z {
            for j in 0..=self.deg_w {
                let term = self.coeff(i, j) * zp[i] * wp[j];
                val += term;
                abs += term.norm();
            }
        }
        (val, abs)
    }

    /// Scaled residual `|B| / sum |terms|`; zero when every term vanishes.
    pub fn residual(&self, z: &SpherePoint, w: &SpherePoint) -> f64 {
        let (v, abs) = self.eval_projective(z, w);
        if abs == 0.0 {
            0.0
        } else {
            v.norm() / abs
        }
    }

    /// Coefficients of the one-variable polynomial obtained by fixing the
    /// base point, with the nominal degree of the free variable.
    pub fn fiber_coeffs(&self, base: &SpherePoint, dir: Direction) -> (Vec<Complex64>, usize) {
        let (x, y) = base.projective();
        match dir {
            Direction::Forward => {
                let zp = powers(x, y, self.deg_z);
                let c = (0..=self.deg_w)
                    .map(|j| (0..=self.deg_z).map(|i| self.coeff(i, j) * zp[i]).sum())
                    .collect();
                (c, self.deg_w)
            }
            Direction::Backward => {
                let wp = powers(x, y, self.deg_w);
                let c = (0..=self.deg_z)
                    .map(|i| (0..=self.deg_w).map(|j| self.coeff(i, j) * wp[j]).sum())
                    .collect();
                (c, self.deg_z)
            }
        }
    }

    fn check_fiber(&self, coeffs: &[Complex64]) -> bool {
        let m = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        m > FIBER_DEGENERATE_TOL * self.max_abs_coeff()
    }

    /// Clustered roots of the fiber over `base`.
    pub fn fiber(&self, base: &SpherePoint, dir: Direction) -> Result<Vec<Root>> {
        let (c, nominal) = self.fiber_coeffs(base, dir);
        if !self.check_fiber(&c) {
            return Err(Error::FiberDegenerate { path: Vec::new() });
        }
        if nominal == 0 {
            return Ok(Vec::new());
        }
        projective_roots(&c, nominal, DEFAULT_CLUSTER_RADIUS)
    }

    /// Unclustered fiber roots.
    pub fn raw_fiber(&self, base: &SpherePoint, dir: Direction) -> Result<Vec<SpherePoint>> {
        let (c, nominal) = self.fiber_coeffs(base, dir);
        if !self.check_fiber(&c) {
            return Err(Error::FiberDegenerate { path: Vec::new() });
        }
        if nominal == 0 {
            return Ok(Vec::new());
        }
        raw_projective_roots(&c, nominal)
    }

    pub fn d_dz(&self) -> Option<Self> {
        if self.deg_z == 0 {
            return None;
        }
        Self::from_fn(self.deg_z - 1, self.deg_w, |i, j| self.coeff(i + 1, j) * (i + 1) as f64).ok()
    }

    pub fn d_dw(&self) -> Option<Self> {
        if self.deg_w == 0 {
            return None;
        }
        Self::from_fn(self.deg_z, self.deg_w - 1, |i, j| self.coeff(i, j + 1) * (j + 1) as f64).ok()
    }

    /// True when `B` vanishes along 200 fixed diagonal points, i.e. the
    /// diagonal was not deleted.
    pub fn contains_diagonal(&self) -> bool {
        (0..200).all(|k| {
            let t = k as f64 / 200.0;
            let z = Complex64::from_polar(0.3 + 2.0 * t, 7.0 * t);
            let p = SpherePoint::new(z);
            self.residual(&p, &p) < 1e-10
        })
    }

    /// Scale so the largest coefficient has modulus 1.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs_coeff();
        GraphPolynomial {
            deg_z: self.deg_z,
            deg_w: self.deg_w,
            coeffs: self.coeffs.iter().map(|c| c / m).collect(),
        }
    }
}

/// `[x^k y^(d-k)]` for `k = 0..=d`.
pub fn powers(x: Complex64, y: Complex64, d: usize) -> Vec<Complex64> {
    let mut xs = vec![ONE; d + 1];
    let mut ys = vec![ONE; d + 1];
    for k in 1..=d {
        xs[k] = xs[k - 1] * x;
        ys[k] = ys[k - 1] * y;
    }
    (0..=d).map(|k| xs[k] * ys[d - k]).collect()
}

/// Graph of the deleted covering correspondence:
/// `(p(z)q(w) - p(w)q(z)) / (z - w)`.
pub fn cov_graph(r: &RationalMap) -> Result<GraphPolynomial> {
    let d = r.degree();
    if d < 2 {
        return Err(Error::DegreeTooLow {
            degree: d,
            required: 2,
        });
    }
    let (p, q) = (r.num(), r.den());
    let n = |i: usize, j: usize| p.coeff(i) * q.coeff(j) - p.coeff(j) * q.coeff(i);
    let scale = (0..=d)
        .flat_map(|i| (0..=d).map(move |j| (i, j)))
        .map(|(i, j)| n(i, j).norm())
        .fold(0.0, f64::max);
    // (z - w) B = N gives b[i-1][j] = N[i][j] + b[i][j-1]
    let mut b = vec![vec![ZERO; d + 1]; d + 1];
    for j in 0..=d {
        for i in (1..=d).rev() {
            let prev = if j > 0 { b[i][j - 1] } else { ZERO };
            b[i - 1][j] = n(i, j) + prev;
        }
    }
    let mut remainder: f64 = 0.0;
    for j in 0..=d {
        let prev = if j > 0 { b[0][j - 1] } else { ZERO };
        remainder = remainder.max((n(0, j) + prev).norm());
    }
    for row in b.iter() {
        remainder = remainder.max(row[d].norm());
    }
    let remainder = remainder / scale;
    if !(remainder <= DIVISION_TOL) {
        return Err(Error::InexactDivision { remainder });
    }
    GraphPolynomial::from_fn(d - 1, d - 1, |i, j| b[i][j])
}

/// `w (cz + d) - (az + b)`
pub fn mobius_graph(m: &MobiusMap) -> GraphPolynomial {
    let [a, b, c, d] = m.coefficients();
    GraphPolynomial::new(1, 1, vec![-b, d, -a, c]).expect("nondegenerate Mobius map")
}

/// `w q(z) - p(z)`
pub fn map_graph(r: &RationalMap) -> GraphPolynomial {
    let d = r.degree();
    GraphPolynomial::from_fn(d, 1, |i, j| if j == 0 { -r.num().coeff(i) } else { r.den().coeff(i) })
        .expect("nonzero map")
}

/// `w - z`
pub fn identity_graph() -> GraphPolynomial {
    GraphPolynomial::new(1, 1, vec![ZERO, ONE, -ONE, ZERO]).expect("nonzero")
}
