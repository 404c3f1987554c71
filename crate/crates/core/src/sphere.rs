//! Points of the Riemann sphere in a two-chart representation.
//!
//! A point is stored either as its standard coordinate `z` or as the
//! reciprocal coordinate `u = 1/z`, whichever lies in the closed unit disk.
//! The point at infinity is exactly `(0, Reciprocal)`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Slack allowed on `|value| <= 1` before a point is re-charted.
pub const CHART_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Standard,
    Reciprocal,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Standard => Chart::Reciprocal,
            Chart::Reciprocal => Chart::Standard,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chart::Standard => "standard",
            Chart::Reciprocal => "reciprocal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    value: Complex64,
    chart: Chart,
}

impl SpherePoint {
    pub const INFINITY: SpherePoint = SpherePoint {
        value: Complex64 { re: 0.0, im: 0.0 },
        chart: Chart::Reciprocal,
    };

    pub const ZERO: SpherePoint = SpherePoint {
        value: Complex64 { re: 0.0, im: 0.0 },
        chart: Chart::Standard,
    };

    /// Point with standard coordinate `z`. Non-finite input maps to infinity.
    pub fn new(z: Complex64) -> Self {
        Self::from_chart(z, Chart::Standard)
    }

    pub fn real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0))
    }

    /// Point whose coordinate in `chart` is `value`, re-charted into the unit disk.
    pub fn from_chart(value: Complex64, chart: Chart) -> Self {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Self::from_chart(Complex64::new(0.0, 0.0), chart.other());
        }
        if value.norm() > 1.0 + CHART_SLACK {
            SpherePoint {
                value: value.inv(),
                chart: chart.other(),
            }
        } else if value == Complex64::new(0.0, 0.0) {
            // -0.0 components would break exact comparisons at the poles
            SpherePoint {
                value: Complex64::new(0.0, 0.0),
                chart,
            }
        } else {
            SpherePoint { value, chart }
        }
    }

    /// The projective point `[num : den]`.
    pub fn from_ratio(num: Complex64, den: Complex64) -> Self {
        if num.norm() <= den.norm() {
            Self::from_chart(num / den, Chart::Standard)
        } else {
            Self::from_chart(den / num, Chart::Reciprocal)
        }
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_infinity(&self) -> bool {
        self.chart == Chart::Reciprocal && self.value.re == 0.0 && self.value.im == 0.0
    }

    /// Standard coordinate, `None` at infinity.
    pub fn to_complex(&self) -> Option<Complex64> {
        match self.chart {
            Chart::Standard => Some(self.value),
            Chart::Reciprocal if self.is_infinity() => None,
            Chart::Reciprocal => Some(self.value.inv()),
        }
    }

    /// Coordinate of this point in the requested chart (may be infinite).
    pub fn coordinate_in(&self, chart: Chart) -> Complex64 {
        if chart == self.chart {
            self.value
        } else if self.value.norm() == 0.0 {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            self.value.inv()
        }
    }

    /// Same point stored in the opposite chart, bypassing normalization.
    /// Only meaningful for points near the unit circle.
    pub fn swap_chart(&self) -> SpherePoint {
        let chart = self.chart.other();
        SpherePoint::from_chart(self.coordinate_in(chart), chart)
    }

    /// Projective coordinates `[x : y]` with `z = x / y`, both of modulus <= 1.
    pub fn projective(&self) -> (Complex64, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match self.chart {
            Chart::Standard => (self.value, one),
            Chart::Reciprocal => (one, self.value),
        }
    }

    pub fn recip(&self) -> SpherePoint {
        SpherePoint::from_chart(self.value, self.chart.other())
    }

    pub fn neg(&self) -> SpherePoint {
        SpherePoint {
            value: -self.value,
            chart: self.chart,
        }
    }

    /// Stereographic image on the unit sphere in R^3; infinity is the north pole.
    pub fn embed(&self) -> [f64; 3] {
        let v = self.value;
        let r2 = v.norm_sqr();
        let s = 1.0 + r2;
        match self.chart {
            Chart::Standard => [2.0 * v.re / s, 2.0 * v.im / s, (r2 - 1.0) / s],
            Chart::Reciprocal => [2.0 * v.re / s, -2.0 * v.im / s, (1.0 - r2) / s],
        }
    }

    pub fn from_embedding(x: [f64; 3]) -> SpherePoint {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let (a, b, c) = (x[0] / norm, x[1] / norm, x[2] / norm);
        if c <= 0.0 {
            SpherePoint::from_chart(Complex64::new(a, b) / (1.0 - c), Chart::Standard)
        } else {
            SpherePoint::from_chart(Complex64::new(a, -b) / (1.0 + c), Chart::Reciprocal)
        }
    }

    /// Total order on points that does not depend on the stored chart.
    pub fn canonical_cmp(&self, other: &SpherePoint) -> Ordering {
        let (a, b) = (self.embed(), other.embed());
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    }

    /// Uniform sample on the sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> SpherePoint {
        let h: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(-PI..PI);
        let r = (1.0 - h * h).max(0.0).sqrt();
        SpherePoint::from_embedding([r * phi.cos(), r * phi.sin(), h])
    }

    /// Standard coordinate drawn uniformly from the disk `|z| <= radius`.
    pub fn random_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> SpherePoint {
        let r = radius * rng.gen::<f64>().sqrt();
        let t: f64 = rng.gen_range(-PI..PI);
        SpherePoint::new(Complex64::from_polar(r, t))
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::new(z)
    }
}

impl From<f64> for SpherePoint {
    fn from(x: f64) -> Self {
        SpherePoint::real(x)
    }
}

/// Chordal distance `2|p - q| / sqrt((1+|p|^2)(1+|q|^2))`, at most 2.
pub fn chordal_distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    let (a, b) = (p.embed(), q.embed());
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
    d2.sqrt().min(2.0)
}

/// Equal-area latitude/longitude net: `n_lat` bands of equal height, `n_lon`
/// sectors, one point at each cell center. Ordered south to north, then by angle.
pub fn lat_lon_net(n_lat: usize, n_lon: usize) -> Vec<SpherePoint> {
    let mut out = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        let h = -1.0 + (2.0 * i as f64 + 1.0) / n_lat as f64;
        let r = (1.0 - h * h).sqrt();
        for j in 0..n_lon {
            let phi = -PI + (2.0 * j as f64 + 1.0) * PI / n_lon as f64;
            out.push(SpherePoint::from_embedding([r * phi.cos(), r * phi.sin(), h]));
        }
    }
    out
}

/// Net whose spacing is roughly `resolution` in chordal distance.
pub fn resolution_net(resolution: f64) -> Vec<SpherePoint> {
    let n_lat = ((2.0 / resolution).ceil() as usize).max(1);
    let n_lon = ((2.0 * PI / resolution).ceil() as usize).max(1);
    lat_lon_net(n_lat, n_lon)
}
