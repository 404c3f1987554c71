//! Command implementations behind the `corrdyn` binary.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{
    points, CovConfig, EntropyConfig, EquidistConfig, LimitsetConfig, OrbitConfig, VerifyConfig,
};
use crate::entropy::{entropy_estimate, enumerate_orbits, gromov_cap, EntropyReport, OrbitTuple};
use crate::error::{Error, Result};
use crate::family::{klein_pair_check, make_ja, FamilyParameterA, KleinReport};
use crate::graph::cov_graph;
use crate::io::{write_cloud, write_json};
use crate::measures::{
    check_seed, energy_distance, metric_entropy_estimate, MetricEntropyReport, pullback_dirac_mc, pullback_dirac_tree, pushforward_mobius, Method, WeightedCloud,
};
use crate::raster::render_limit_set;
use crate::sphere::SpherePoint;
use crate::verify::run_suite;

/// What a command prints and whether it found failures worth a nonzero exit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub warnings: Vec<String>,
    pub failed: bool,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

pub fn run_cov(cfg: &CovConfig) -> Result<Outcome> {
    let g = cov_graph(&cfg.map)?;
    write_json(&cfg.out, &g)?;
    let d = cfg.map.degree() - 1;
    Ok(Outcome {
        summary: format!(
            "wrote {}: graph polynomial of degree ({}, {}) in (z, w); correspondence bidegree ({d}:{d})",
            cfg.out.display(),
            g.deg_z(),
            g.deg_w()
        ),
        ..Default::default()
    })
}

#[derive(Serialize)]
struct OrbitOutput<'a> {
    correspondence: String,
    n: usize,
    orbits: &'a [OrbitTuple],
}

pub fn run_orbit(cfg: &OrbitConfig) -> Result<Outcome> {
    let c = cfg.correspondence.build()?;
    let orbits = enumerate_orbits(&c, &points(&cfg.seeds)?, cfg.n, cfg.budget)?;
    write_json(
        &cfg.out,
        &OrbitOutput {
            correspondence: cfg.correspondence.id(),
            n: cfg.n,
            orbits: &orbits,
        },
    )?;
    Ok(Outcome {
        summary: format!("wrote {} orbits of length {} to {}", orbits.len(), cfg.n + 1, cfg.out.display()),
        ..Default::default()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KleinStatus {
    pub certified: bool,
    pub note: String,
    pub report: Option<KleinReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyOutput {
    pub correspondence: String,
    pub bidegree: [usize; 2],
    pub bidegree_verified: Option<bool>,
    pub gromov_cap: f64,
    pub kt: EntropyReport,
    pub ds: EntropyReport,
    pub klein: KleinStatus,
    pub warnings: Vec<String>,
}

pub fn entropy_output(cfg: &EntropyConfig) -> Result<EntropyOutput> {
    let c = cfg.correspondence.build()?;
    let mut warnings = Vec::new();
    let bidegree_verified = if cfg.check_bidegree {
        let ok = c.verify_bidegree(0);
        if let Err(e) = &ok {
            warnings.push(format!("bidegree check failed: {e}"));
        }
        Some(ok.is_ok())
    } else {
        None
    };
    let est = entropy_estimate(&c, &cfg.protocol)?;
    let klein = match &cfg.klein {
        None => KleinStatus {
            certified: false,
            note: "no Klein pair is certified for this correspondence; the run is a cap and bidegree check".into(),
            report: None,
        },
        Some(k) => {
            let (c1, c2) = cfg.correspondence.klein_factors()?;
            let rep = klein_pair_check(
                &c1,
                &c2,
                &k.delta1,
                &k.delta2,
                k.n_samples,
                k.rng_seed,
                &points(&k.punctures)?,
                k.puncture_radius,
            )?;
            KleinStatus {
                certified: rep.passed,
                note: if rep.passed {
                    "Monte-Carlo sampling found no violation of the Klein pair conditions".into()
                } else {
                    "the supplied regions violate the Klein pair conditions; no Klein pair is certified".into()
                },
                report: Some(rep),
            }
        }
    };
    for r in [&est.kt, &est.ds] {
        for f in &r.flags {
            if f.starts_with("budget_truncated") || f.starts_with("pair_budget_truncated") {
                warnings.push(format!("{}: {f}", if r.variant == crate::entropy::Variant::Kt { "KT" } else { "DS" }));
            }
        }
    }
    Ok(EntropyOutput {
        correspondence: cfg.correspondence.id(),
        bidegree: [c.d1(), c.d2()],
        bidegree_verified,
        gromov_cap: gromov_cap(&c),
        kt: est.kt,
        ds: est.ds,
        klein,
        warnings,
    })
}

pub fn run_entropy(cfg: &EntropyConfig) -> Result<Outcome> {
    let out = entropy_output(cfg)?;
    write_json(&cfg.out, &out)?;
    Ok(Outcome {
        summary: format!(
            "{}: KT estimate {:.4}, DS estimate {:.4}, cap {:.4}; wrote {}",
            out.correspondence,
            out.kt.estimate,
            out.ds.estimate,
            out.gromov_cap,
            cfg.out.display()
        ),
        warnings: out.warnings,
        failed: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRow {
    pub n: usize,
    pub seed_a: usize,
    pub seed_b: usize,
    pub energy_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquidistSummary {
    pub correspondence: String,
    pub method: Method,
    pub seeds: Vec<SpherePoint>,
    pub depths: Vec<usize>,
    pub distances: Vec<DistanceRow>,
    /// Per seed pair, the number of depth steps along which the distance grew.
    pub inversions: Vec<usize>,
    pub metric_entropy: Option<MetricEntropyReport>,
}

fn build_cloud(cfg: &EquidistConfig, c: &crate::correspondence::Correspondence, z0: SpherePoint, n: usize) -> Result<WeightedCloud> {
    let id = cfg.correspondence.id();
    match cfg.method {
        Method::FullTree => pullback_dirac_tree(c, z0, n, cfg.budget, &id),
        Method::MonteCarlo => pullback_dirac_mc(
            c,
            z0,
            n,
            cfg.n_paths.expect("validated"),
            cfg.rng_seed.expect("validated"),
            &id,
        ),
        Method::Explicit => Err(Error::Invalid("method must be full_tree or monte_carlo".into())),
    }
}

pub fn equidist_summary(cfg: &EquidistConfig) -> Result<EquidistSummary> {
    let c = cfg.correspondence.build()?;
    let seeds = points(&cfg.seeds)?;
    for z0 in &seeds {
        check_seed(&c, *z0)?;
    }
    let j = match cfg.correspondence.family_parameter() {
        Some(a) if cfg.pushforward => Some(make_ja(&FamilyParameterA::new(a)?)?),
        _ => None,
    };
    let mut distances = Vec::new();
    let mut metric = None;
    let deepest = cfg.depths.iter().copied().max().expect("validated");
    for &n in &cfg.depths {
        let mut clouds = Vec::with_capacity(seeds.len());
        for (i, z0) in seeds.iter().enumerate() {
            let cloud = build_cloud(cfg, &c, *z0, n)?;
            write_cloud(&cfg.out_dir.join(format!("seed{i}_n{n}.csv")), &cloud)?;
            if let Some(j) = &j {
                write_cloud(&cfg.out_dir.join(format!("seed{i}_n{n}_plus.csv")), &pushforward_mobius(&cloud, j))?;
            }
            if let (0, Some(m)) = (i, &cfg.metric_entropy) {
                if n == deepest && metric.is_none() {
                    metric = Some(metric_entropy_estimate(&c, &cloud, &m.partition, m.n_max, m.budget)?);
                }
            }
            clouds.push(cloud);
        }
        for a in 0..clouds.len() {
            for b in a + 1..clouds.len() {
                distances.push(DistanceRow {
                    n,
                    seed_a: a,
                    seed_b: b,
                    energy_distance: energy_distance(&clouds[a], &clouds[b]),
                });
            }
        }
    }
    let mut inversions = Vec::new();
    for a in 0..seeds.len() {
        for b in a + 1..seeds.len() {
            let series: Vec<f64> = distances
                .iter()
                .filter(|r| r.seed_a == a && r.seed_b == b)
                .map(|r| r.energy_distance)
                .collect();
            inversions.push(series.windows(2).filter(|w| w[1] > w[0]).count());
        }
    }
    Ok(EquidistSummary {
        correspondence: cfg.correspondence.id(),
        method: cfg.method,
        seeds,
        depths: cfg.depths.clone(),
        distances,
        inversions,
        metric_entropy: metric,
    })
}

pub fn run_equidist(cfg: &EquidistConfig) -> Result<Outcome> {
    let s = equidist_summary(cfg)?;
    let mut table = String::from("n,seed_a,seed_b,energy_distance\n");
    for r in &s.distances {
        writeln!(table, "{},{},{},{}", r.n, r.seed_a, r.seed_b, r.energy_distance).expect("string write");
    }
    write_text(&cfg.out_dir.join("distances.csv"), &table)?;
    write_json(&cfg.out_dir.join("summary.json"), &s)?;
    let last = s.distances.last();
    Ok(Outcome {
        summary: format!(
            "{}: {} clouds written to {}{}",
            s.correspondence,
            s.seeds.len() * s.depths.len(),
            cfg.out_dir.display(),
            last.map(|r| format!("; energy distance at n = {} is {:.3e}", r.n, r.energy_distance))
                .unwrap_or_default()
        ),
        ..Default::default()
    })
}

#[derive(Serialize)]
struct RasterSidecar<'a> {
    correspondence: String,
    width: usize,
    height: usize,
    depth: usize,
    viewport: &'a crate::raster::Viewport,
    region: &'a crate::family::RegionSpec,
    marked: usize,
}

pub fn run_limitset(cfg: &LimitsetConfig) -> Result<Outcome> {
    let c = cfg.correspondence.build()?;
    let img = render_limit_set(&c, &cfg.region, cfg.viewport, cfg.width, cfg.height, cfg.depth, cfg.point_budget)?;
    img.write_ppm(&cfg.out)?;
    let marked = (0..cfg.height)
        .flat_map(|r| (0..cfg.width).map(move |c| (c, r)))
        .filter(|&(c, r)| img.is_marked(c, r))
        .count();
    write_json(
        &cfg.out.with_extension("json"),
        &RasterSidecar {
            correspondence: cfg.correspondence.id(),
            width: cfg.width,
            height: cfg.height,
            depth: cfg.depth,
            viewport: &cfg.viewport,
            region: &cfg.region,
            marked,
        },
    )?;
    Ok(Outcome {
        summary: format!(
            "wrote {}x{} raster to {} ({marked} marked pixels)",
            cfg.width,
            cfg.height,
            cfg.out.display()
        ),
        ..Default::default()
    })
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<Outcome> {
    let r = run_suite(cfg.rng_seed, cfg.cases)?;
    write_json(&cfg.out, &r)?;
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    Ok(Outcome {
        summary: format!(
            "{} of {} checks passed; wrote {}{}",
            r.checks.len() - failed.len(),
            r.checks.len(),
            cfg.out.display(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join(", "))
            }
        ),
        warnings: Vec::new(),
        failed: !r.passed,
    })
}
