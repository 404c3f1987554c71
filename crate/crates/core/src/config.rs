//! Experiment configuration files and command-line overrides.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::correspondence::Correspondence;
use crate::entropy::EntropyProtocol;
use crate::error::{Error, Result};
use crate::family::{cubic_q, make_fa, make_frs, FamilyParameterA, RegionSpec};
use crate::measures::{GridPartition, Method, DEFAULT_ORBIT_BUDGET, DEFAULT_TREE_BUDGET};
use crate::raster::{Viewport, DEFAULT_DEPTH, DEFAULT_POINT_BUDGET};
use crate::rational::{MobiusMap, RationalMap};
use crate::sphere::SpherePoint;

/// A complex number written as a real or as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// A point of the sphere: a complex value or the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointValue {
    Finite(ComplexValue),
    Named(String),
}

impl PointValue {
    pub fn point(&self) -> Result<SpherePoint> {
        match self {
            PointValue::Finite(c) => Ok(SpherePoint::new(c.value())),
            PointValue::Named(s) if s == "inf" || s == "infinity" => Ok(SpherePoint::INFINITY),
            PointValue::Named(s) => Err(Error::Invalid(format!("unknown point {s:?}"))),
        }
    }
}

pub fn points(v: &[PointValue]) -> Result<Vec<SpherePoint>> {
    v.iter().map(PointValue::point).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrespondenceKind {
    /// `J_a o Cov^Q` with `Q = z^3 - 3z`.
    Fa { a: ComplexValue },
    /// `Cov^R o Cov^S`.
    Frs { r: RationalMap, s: RationalMap },
    Cov { map: RationalMap },
    /// Graph `w = f(z)`.
    MapGraph { map: RationalMap },
    Mobius { map: MobiusMap },
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSpec {
    #[serde(flatten)]
    pub kind: CorrespondenceKind,
    /// Use the transposed correspondence.
    #[serde(default)]
    pub inverse: bool,
}

impl CorrespondenceSpec {
    pub fn build(&self) -> Result<Correspondence> {
        let c = match &self.kind {
            CorrespondenceKind::Fa { a } => make_fa(&FamilyParameterA::new(a.value())?)?,
            CorrespondenceKind::Frs { r, s } => make_frs(r, s)?,
            CorrespondenceKind::Cov { map } => Correspondence::cov(map)?,
            CorrespondenceKind::MapGraph { map } => Correspondence::of_map(map),
            CorrespondenceKind::Mobius { map } => Correspondence::mobius(map),
            CorrespondenceKind::Identity => Correspondence::identity(),
        };
        Ok(if self.inverse { c.inverse() } else { c })
    }

    /// The involution `J_a` for the `F_a` family.
    pub fn family_parameter(&self) -> Option<Complex64> {
        match &self.kind {
            CorrespondenceKind::Fa { a } => Some(a.value()),
            _ => None,
        }
    }

    pub fn id(&self) -> String {
        let base = match &self.kind {
            CorrespondenceKind::Fa { a } => {
                let a = a.value();
                format!("F_a(a={}{:+}i)", a.re, a.im)
            }
            CorrespondenceKind::Frs { r, s } => format!("F_RS(deg R={}, deg S={})", r.degree(), s.degree()),
            CorrespondenceKind::Cov { map } => format!("Cov(deg={})", map.degree()),
            CorrespondenceKind::MapGraph { map } => format!("graph(deg={})", map.degree()),
            CorrespondenceKind::Mobius { .. } => "mobius".into(),
            CorrespondenceKind::Identity => "identity".into(),
        };
        if self.inverse {
            format!("{base}^-1")
        } else {
            base
        }
    }
    /// Factors of a Klein combination for the two families: `(J_a, Cov^Q)`
    /// Factors of a Klein combination for the two families: `(Cov^Q, J_a)`
    /// and `(Cov^R, Cov^S)`.
    pub fn klein_factors(&self) -> Result<(Correspondence, Correspondence)> {
        match &self.kind {
            CorrespondenceKind::Fa { a } => {
                let p = FamilyParameterA::new(a.value())?;
                Ok((Correspondence::mobius(&crate::family::make_ja(&p)?), Correspondence::cov(&cubic_q())?))
            }
            CorrespondenceKind::Frs { r, s } => Ok((Correspondence::cov(r)?, Correspondence::cov(s)?)),
            _ => Err(Error::Invalid("Klein pairs are defined for the fa and frs families".into())),
        }
    }
}

fn default_tree_budget() -> u64 {
    DEFAULT_TREE_BUDGET
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_point_budget() -> usize {
    DEFAULT_POINT_BUDGET
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovConfig {
    pub map: RationalMap,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub correspondence: CorrespondenceSpec,
    pub seeds: Vec<PointValue>,
    pub n: usize,
    #[serde(default = "default_tree_budget")]
    pub budget: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KleinConfig {
    pub delta1: RegionSpec,
    pub delta2: RegionSpec,
    pub n_samples: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub punctures: Vec<PointValue>,
    #[serde(default)]
    pub puncture_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub correspondence: CorrespondenceSpec,
    pub protocol: EntropyProtocol,
    #[serde(default)]
    pub klein: Option<KleinConfig>,
    #[serde(default = "default_true")]
    pub check_bidegree: bool,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistConfig {
    pub correspondence: CorrespondenceSpec,
    pub seeds: Vec<PointValue>,
    pub depths: Vec<usize>,
    pub method: Method,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default = "default_tree_budget")]
    pub budget: u64,
    /// Also write the image of each cloud under `J_a`.
    #[serde(default)]
    pub pushforward: bool,
    /// Preimage-refinement entropy of the first seed's deepest cloud.
    #[serde(default)]
    pub metric_entropy: Option<MetricEntropyConfig>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricEntropyConfig {
    pub partition: GridPartition,
    pub n_max: usize,
    #[serde(default = "default_orbit_budget")]
    pub budget: u64,
}

fn default_orbit_budget() -> u64 {
    DEFAULT_ORBIT_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsetConfig {
    pub correspondence: CorrespondenceSpec,
    pub region: RegionSpec,
    pub viewport: Viewport,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_point_budget")]
    pub point_budget: usize,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub rng_seed: u64,
    #[serde(default = "default_cases")]
    pub cases: usize,
    pub out: PathBuf,
}

fn default_cases() -> usize {
    10
}

/// Checks that go beyond the type structure.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

impl Validate for CovConfig {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl Validate for OrbitConfig {
    fn validate(&self) -> Result<()> {
        points(&self.seeds).map(|_| ())
    }
}

impl Validate for EntropyConfig {
    fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if let Some(k) = &self.klein {
            k.delta1.validate()?;
            k.delta2.validate()?;
            points(&k.punctures)?;
        }
        Ok(())
    }
}

impl Validate for EquidistConfig {
    fn validate(&self) -> Result<()> {
        points(&self.seeds)?;
        if self.seeds.is_empty() || self.depths.is_empty() {
            return Err(Error::Invalid("seeds and depths must be nonempty".into()));
        }
        if self.method == Method::MonteCarlo && (self.rng_seed.is_none() || self.n_paths.is_none()) {
            return Err(Error::Invalid("monte_carlo needs rng_seed and n_paths".into()));
        }
        if self.method == Method::Explicit {
            return Err(Error::Invalid("method must be full_tree or monte_carlo".into()));
        }
        if let Some(m) = &self.metric_entropy {
            GridPartition::new(m.partition.n_lat, m.partition.n_lon)?;
            if m.n_max == 0 {
                return Err(Error::Invalid("metric_entropy.n_max must be at least 1".into()));
            }
        }
        if self.pushforward && self.correspondence.family_parameter().is_none() {
            return Err(Error::Invalid("pushforward needs the fa family".into()));
        }
        Ok(())
    }
}

impl Validate for LimitsetConfig {
    fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if self.width == 0 || self.height == 0 || !(self.viewport.half_width > 0.0) {
            return Err(Error::Invalid("raster dimensions must be positive".into()));
        }
        Ok(())
    }
}

impl Validate for VerifyConfig {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// Sets `path` (dot separated) in a JSON document. The value is parsed as
/// JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("override {assignment:?} is not of the form path=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Invalid(format!("empty key in override path {path:?}")));
        }
        let last = i + 1 == keys.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Invalid(format!("{key:?} indexes an array")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Invalid(format!("index {idx} out of range in {path:?}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Invalid(format!("{path:?} descends into a scalar"))),
        };
    }
    Ok(())
}

/// Reads a config file, applies overrides, deserializes and validates.
pub fn load<T: DeserializeOwned + Validate>(path: &Path, overrides: &[String]) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: T = serde_json::from_value(doc).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
