//! Reduced invariant suite run by the `verify` command.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::correspondence::Correspondence;
use crate::entropy::{forest_counts, OrbitForest, DEFAULT_PAIR_BUDGET};
use crate::error::Result;
use crate::family::{involution_to_quadratic, make_fa, make_ja, quadratic_to_involution, FamilyParameterA};
use crate::measures::{
    energy_distance, partition_entropy, pullback_dirac_tree, pushforward_mobius, GridPartition, WeightedCloud,
    DEFAULT_TREE_BUDGET,
};
use crate::poly::{ComplexPolynomial, DEFAULT_CLUSTER_RADIUS};
use crate::ramification::{ramification_points, Side};
use crate::rational::RationalMap;
use crate::sphere::{chordal_distance, lat_lon_net, SpherePoint};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed deviation, where one applies.
    pub worst: Option<f64>,
    pub tolerance: Option<f64>,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rng_seed: u64,
    pub cases: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn fmt_point(p: &SpherePoint) -> String {
    match p.to_complex() {
        Some(z) => format!("{}{:+}i", z.re, z.im),
        None => "inf".into(),
    }
}

/// Check whose pass condition is `worst <= tol`.
fn bounded(name: &str, worst: f64, tol: f64, witness: Option<String>) -> Check {
    let passed = worst <= tol;
    Check {
        name: name.into(),
        passed,
        worst: Some(worst),
        tolerance: Some(tol),
        witness: if passed { None } else { witness },
    }
}

fn flag(name: &str, passed: bool, witness: String) -> Check {
    Check {
        name: name.into(),
        passed,
        worst: None,
        tolerance: None,
        witness: (!passed).then_some(witness),
    }
}

fn max_with<T>(items: impl IntoIterator<Item = (f64, T)>) -> (f64, Option<T>) {
    let mut best = (0.0, None);
    for (v, w) in items {
        if v > best.0 || v.is_nan() {
            best = (v, Some(w));
        }
    }
    best
}

fn set_gap(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    let one_way = |x: &[SpherePoint], y: &[SpherePoint]| {
        x.iter()
            .map(|p| y.iter().map(|q| chordal_distance(p, q)).fold(2.0, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn roots_check(rng: &mut ChaCha8Rng, cases: usize) -> Result<Check> {
    let mut worst = Vec::new();
    for _ in 0..cases {
        let deg = rng.gen_range(1..=8);
        let roots: Vec<Complex64> = (0..deg)
            .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let found: Vec<SpherePoint> = ComplexPolynomial::from_roots(&roots)
            .roots(DEFAULT_CLUSTER_RADIUS)?
            .iter()
            .flat_map(|r| std::iter::repeat(r.point).take(r.multiplicity))
            .collect();
        let exact: Vec<SpherePoint> = roots.iter().map(|&z| SpherePoint::new(z)).collect();
        worst.push((set_gap(&exact, &found), format!("roots {roots:?}")));
    }
    let (w, wit) = max_with(worst);
    Ok(bounded("polynomial_roots", w, 1e-7, wit))
}

fn cov_check(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<Check>> {
    let mut sym = Vec::new();
    let mut branch = Vec::new();
    let mut counts = true;
    let mut count_wit = String::new();
    for _ in 0..cases {
        let deg = rng.gen_range(2..=5);
        let r = RationalMap::random(rng, deg);
        let c = Correspondence::cov(&r)?;
        let z = SpherePoint::new(Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        let f = c.forward(&z)?;
        if f.total_multiplicity() != deg - 1 {
            counts = false;
            count_wit = format!("deg {deg} map at {}", fmt_point(&z));
        }
        let rz = r.eval(&z)?;
        for p in &f.points {
            sym.push((c.graph_residual(&p.point, &z), fmt_point(&p.point)));
            branch.push((chordal_distance(&r.eval(&p.point)?, &rz), fmt_point(&p.point)));
        }
    }
    let (ws, s) = max_with(sym);
    let (wb, b) = max_with(branch);
    Ok(vec![
        flag("cov_fiber_count", counts, count_wit),
        bounded("cov_symmetry", ws, 1e-8, s),
        bounded("cov_branch_invariant", wb, 1e-7, b),
    ])
}

fn ramification_check(rng: &mut ChaCha8Rng, cases: usize) -> Result<Check> {
    let mut worst = Vec::new();
    for _ in 0..cases {
        let deg = rng.gen_range(3..=5);
        let r = RationalMap::random(rng, deg);
        let crit: Vec<SpherePoint> = r.critical_points()?.into_iter().map(|x| x.point).collect();
        let zs: Vec<SpherePoint> = ramification_points(&Correspondence::cov(&r)?, Side::Two)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        worst.push((set_gap(&crit, &zs), format!("deg {deg}")));
    }
    let (w, wit) = max_with(worst);
    Ok(bounded("ramification_over_critical_points", w, 1e-6, wit))
}

fn dictionary_check(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<Check>> {
    let mut fwd = Vec::new();
    let mut trip = Vec::new();
    let net = lat_lon_net(4, 6);
    for _ in 0..cases {
        let a = loop {
            let a = Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            if a.norm() <= 10.0 && (a - 1.0).norm() > 0.1 {
                break a;
            }
        };
        let r = RationalMap::new(
            ComplexPolynomial::new(vec![-a, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
            ComplexPolynomial::from_real(&[1.0, -2.0, 1.0]),
        )?;
        let j = make_ja(&FamilyParameterA::new(a)?)?;
        let cov = Correspondence::cov(&r)?;
        for p in &net {
            let f = cov.forward(p)?;
            let d = chordal_distance(&f.points[0].point, &j.apply(p));
            fwd.push((d, format!("a = {a}, z = {}", fmt_point(p))));
        }
        let back = quadratic_to_involution(&involution_to_quadratic(&j)?)?;
        trip.push((back.max_deviation(&j, &net), format!("a = {a}")));
    }
    let (wf, f) = max_with(fwd);
    let (wt, t) = max_with(trip);
    Ok(vec![
        bounded("involution_dictionary", wf, 1e-8, f),
        bounded("dictionary_round_trip", wt, 1e-9, t),
    ])
}

fn family_check() -> Result<Check> {
    let mut worst = Vec::new();
    for a in [4.0, 5.0, 10.0] {
        let c = make_fa(&FamilyParameterA::real(a)?)?;
        let pts: Vec<SpherePoint> = c.backward(&SpherePoint::real(1.0))?.points.iter().map(|p| p.point).collect();
        let expect = [SpherePoint::real(1.0), SpherePoint::real(-2.0)];
        worst.push((set_gap(&pts, &expect), format!("a = {a}")));
    }
    let (w, wit) = max_with(worst);
    Ok(bounded("fa_preimages_of_one", w, 1e-9, wit))
}

fn measure_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let a = FamilyParameterA::real(4.0)?;
    let c = make_fa(&a)?;
    let j = make_ja(&a)?;
    let z0 = SpherePoint::new(Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
    let tree = pullback_dirac_tree(&c, z0, 8, DEFAULT_TREE_BUDGET, "F4")?;
    let mass = (tree.total_mass() - 1.0).abs();
    let twice = pushforward_mobius(&pushforward_mobius(&tree, &j), &j);
    let (inv, _) = max_with(
        tree.atoms
            .iter()
            .zip(&twice.atoms)
            .map(|(x, y)| (chordal_distance(&x.point, &y.point), ())),
    );
    let plus = pushforward_mobius(&tree, &j);
    let other = pullback_dirac_tree(&c.inverse(), j.apply(&z0), 8, DEFAULT_TREE_BUDGET, "F4^-1")?;
    let conj = plus
        .atoms
        .iter()
        .map(|x| {
            other
                .atoms
                .iter()
                .map(|y| chordal_distance(&x.point, &y.point))
                .fold(2.0, f64::min)
        })
        .fold(0.0, f64::max);
    let e_self = energy_distance(&tree, &tree);
    let e_sym = (energy_distance(&tree, &other) - energy_distance(&other, &tree)).abs();
    let part = GridPartition::new(4, 4)?;
    let uniform = WeightedCloud::uniform(&lat_lon_net(4, 4), "net")?;
    let h = (partition_entropy(&uniform, &part) - 16f64.ln()).abs();
    let w = Some(format!("seed {}", fmt_point(&z0)));
    Ok(vec![
        bounded("pullback_mass", mass, 1e-12, w.clone()),
        bounded("pushforward_involution", inv, 1e-10, w.clone()),
        bounded("pushforward_conjugacy", conj, 1e-8, w.clone()),
        bounded("energy_self_distance", e_self, 1e-12, w.clone()),
        bounded("energy_symmetry", e_sym, 1e-12, w),
        bounded("partition_entropy_uniform", h, 1e-12, None),
    ])
}

fn entropy_checks(rng: &mut ChaCha8Rng) -> Result<Check> {
    let c = make_fa(&FamilyParameterA::real(4.0)?)?;
    let seeds: Vec<SpherePoint> = (0..8).map(|_| SpherePoint::random_in_disk(rng, 3.0)).collect();
    let forest = OrbitForest::grow(&c, &seeds, 4, u64::MAX)?;
    let counts = forest_counts(&forest, &[0.4, 0.2, 0.1], DEFAULT_PAIR_BUDGET);
    let mut ok = true;
    let mut wit = String::new();
    for n in 0..=forest.depth() {
        for w in counts.windows(2) {
            if w[0].kt[n] > w[1].kt[n] {
                ok = false;
                wit = format!("KT count rises with eps at n = {n}");
            }
        }
        for e in &counts {
            if e.ds[n] < e.kt[n] {
                ok = false;
                wit = format!("DS below KT at n = {n}, eps = {}", e.eps);
            }
        }
    }
    Ok(flag("separated_count_order", ok, wit))
}

/// Runs every check with `cases` random instances where applicable.
pub fn run_suite(rng_seed: u64, cases: usize) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut checks = vec![roots_check(&mut rng, cases)?];
    checks.extend(cov_check(&mut rng, cases)?);
    checks.push(ramification_check(&mut rng, cases)?);
    checks.extend(dictionary_check(&mut rng, cases)?);
    checks.push(family_check()?);
    checks.extend(measure_checks(&mut rng)?);
    checks.push(entropy_checks(&mut rng)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        rng_seed,
        cases,
        checks,
        passed,
    })
}
