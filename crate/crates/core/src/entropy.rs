//! Orbit trees and ε-separated counting in the Kelly–Tennant (KT) and
//! Dinh–Sibony (DS) senses, with slope-fit entropy estimates.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::Correspondence;
use crate::error::{Error, Result};
use crate::fit::least_squares_slope;
use crate::sphere::{chordal_distance, lat_lon_net, SpherePoint};

/// Slack allowed above the Gromov cap before a slope is flagged.
pub const CAP_SLACK: f64 = 0.05;

/// Default cap on the number of close pairs tracked per level.
pub const DEFAULT_PAIR_BUDGET: u64 = 1 << 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTuple {
    pub points: Vec<SpherePoint>,
    pub labels: Option<Vec<usize>>,
}

impl OrbitTuple {
    /// Lexicographic: `x_0`, then `(x_i, j_i)` step by step.
    pub fn canonical_cmp(&self, other: &OrbitTuple) -> Ordering {
        let n = self.points.len().min(other.points.len());
        for i in 0..n {
            let o = self.points[i].canonical_cmp(&other.points[i]);
            if o != Ordering::Equal {
                return o;
            }
            if i > 0 {
                if let (Some(a), Some(b)) = (&self.labels, &other.labels) {
                    let o = a[i - 1].cmp(&b[i - 1]);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
            }
        }
        self.points.len().cmp(&other.points.len())
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    point: SpherePoint,
    e: [f64; 3],
    parent: u32,
    label: u32,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt().min(2.0)
}

fn node_cmp(a: &Node, b: &Node) -> Ordering {
    a.parent
        .cmp(&b.parent)
        .then_with(|| a.point.canonical_cmp(&b.point))
        .then(a.label.cmp(&b.label))
}

/// Forward orbit trees from a list of seeds. Level `n` holds the endpoints of
/// the `n`-orbits in canonical tuple order.
#[derive(Clone, Debug)]
pub struct OrbitForest {
    levels: Vec<Vec<Node>>,
    /// `children[n][p]..children[n][p + 1]` index level `n + 1`.
    children: Vec<Vec<usize>>,
    truncated: bool,
}

impl OrbitForest {
    /// Grows levels up to `n`, stopping early once the total node count would
    /// pass `budget`.
    pub fn grow(c: &Correspondence, seeds: &[SpherePoint], n: usize, budget: u64) -> Result<Self> {
        let mut roots: Vec<Node> = seeds
            .iter()
            .map(|&p| Node {
                point: p,
                e: p.embed(),
                parent: 0,
                label: 0,
            })
            .collect();
        roots.sort_by(node_cmp);
        let mut total = roots.len() as u64;
        let mut forest = OrbitForest {
            levels: vec![roots],
            children: Vec::new(),
            truncated: total > budget,
        };
        if forest.truncated {
            return Err(Error::BudgetExceeded { needed: total, budget });
        }
        for _ in 0..n {
            let last = forest.levels.last().expect("nonempty");
            let kids: Vec<Vec<Node>> = last
                .par_iter()
                .enumerate()
                .map(|(i, node)| {
                    let f = c.forward(&node.point)?;
                    let mut v: Vec<Node> = f
                        .points
                        .iter()
                        .map(|q| Node {
                            point: q.point,
                            e: q.point.embed(),
                            parent: i as u32,
                            label: q.label as u32,
                        })
                        .collect();
                    v.sort_by(node_cmp);
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            let size: u64 = kids.iter().map(|k| k.len() as u64).sum();
            if total + size > budget {
                forest.truncated = true;
                break;
            }
            total += size;
            let mut starts = Vec::with_capacity(kids.len() + 1);
            let mut next = Vec::with_capacity(size as usize);
            for k in kids {
                starts.push(next.len());
                next.extend(k);
            }
            starts.push(next.len());
            forest.children.push(starts);
            forest.levels.push(next);
        }
        Ok(forest)
    }

    /// Deepest complete level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn level_size(&self, n: usize) -> usize {
        self.levels[n].len()
    }

    pub fn node_count(&self) -> u64 {
        self.levels.iter().map(|l| l.len() as u64).sum()
    }

    /// The `n`-orbits as explicit tuples, in canonical order.
    pub fn tuples(&self, n: usize) -> Vec<OrbitTuple> {
        (0..self.levels[n].len())
            .map(|mut i| {
                let mut points = vec![SpherePoint::ZERO; n + 1];
                let mut labels = vec![0usize; n];
                for lvl in (0..=n).rev() {
                    let node = &self.levels[lvl][i];
                    points[lvl] = node.point;
                    if lvl > 0 {
                        labels[lvl - 1] = node.label as usize;
                    }
                    i = node.parent as usize;
                }
                OrbitTuple {
                    points,
                    labels: Some(labels),
                }
            })
            .collect()
    }
}

/// All `n`-orbits from the seeds; labels name the witnessing component.
pub fn enumerate_orbits(c: &Correspondence, seeds: &[SpherePoint], n: usize, budget: u64) -> Result<Vec<OrbitTuple>> {
    let needed = (seeds.len() as u64).saturating_mul((c.d1() as u64).saturating_pow(n as u32));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let forest = OrbitForest::grow(c, seeds, n, u64::MAX)?;
    Ok(forest.tuples(n))
}

fn kt_separated(x: &OrbitTuple, y: &OrbitTuple, eps: f64) -> bool {
    x.points.iter().zip(&y.points).any(|(a, b)| chordal_distance(a, b) >= eps)
}

fn ds_separated(x: &OrbitTuple, y: &OrbitTuple, eps: f64) -> bool {
    kt_separated(x, y, eps) || x.labels != y.labels
}

fn sorted(orbits: &[OrbitTuple]) -> Vec<&OrbitTuple> {
    let mut v: Vec<&OrbitTuple> = orbits.iter().collect();
    v.sort_by(|a, b| a.canonical_cmp(b));
    v
}

fn greedy<'a>(order: &[&'a OrbitTuple], mut accepted: Vec<&'a OrbitTuple>, sep: impl Fn(&OrbitTuple, &OrbitTuple) -> bool) -> Vec<&'a OrbitTuple> {
    for &x in order {
        if accepted.iter().all(|y| std::ptr::eq(*y, x) || sep(x, y)) && !accepted.iter().any(|y| std::ptr::eq(*y, x)) {
            accepted.push(x);
        }
    }
    accepted
}

/// Greedy maximal KT-separated subset in canonical order.
pub fn separated_count_kt(orbits: &[OrbitTuple], eps: f64) -> usize {
    greedy(&sorted(orbits), Vec::new(), |x, y| kt_separated(x, y, eps)).len()
}

/// Greedy maximal DS-separated subset, started from the KT set.
pub fn separated_count_ds(orbits: &[OrbitTuple], eps: f64) -> Result<usize> {
    if orbits.iter().any(|o| o.labels.is_none()) {
        return Err(Error::MissingLabels);
    }
    let order = sorted(orbits);
    let kt = greedy(&order, Vec::new(), |x, y| kt_separated(x, y, eps));
    Ok(greedy(&order, kt, |x, y| ds_separated(x, y, eps)).len())
}

/// Close-pair lists of one level in compressed rows.
struct CloseGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl CloseGraph {
    fn from_rows(rows: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut targets = Vec::new();
        for r in rows {
            offsets.push(targets.len());
            targets.extend(r);
        }
        offsets.push(targets.len());
        CloseGraph { offsets, targets }
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    fn pairs(&self) -> u64 {
        self.targets.len() as u64
    }
}

fn cell_key(e: &[f64; 3], eps: f64) -> (i64, i64, i64) {
    ((e[0] / eps).floor() as i64, (e[1] / eps).floor() as i64, (e[2] / eps).floor() as i64)
}

fn seed_close_graph(level: &[Node], eps: f64) -> CloseGraph {
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, n) in level.iter().enumerate() {
        grid.entry(cell_key(&n.e, eps)).or_default().push(i as u32);
    }
    let rows: Vec<Vec<u32>> = level
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let (a, b, c) = cell_key(&n.e, eps);
            let mut row = Vec::new();
            for da in -1..=1 {
                for db in -1..=1 {
                    for dc in -1..=1 {
                        if let Some(v) = grid.get(&(a + da, b + db, c + dc)) {
                            row.extend(v.iter().copied().filter(|&j| j as usize != i && dist(&n.e, &level[j as usize].e) < eps));
                        }
                    }
                }
            }
            row.sort_unstable();
            row
        })
        .collect();
    CloseGraph::from_rows(rows)
}

/// Close pairs at level `n + 1` from those at level `n`: both prefixes close
/// and endpoints within `eps`, with equal labels when `same_label` is set.
fn next_close_graph(forest: &OrbitForest, n: usize, prev: &CloseGraph, eps: f64, same_label: bool) -> CloseGraph {
    let level = &forest.levels[n + 1];
    let starts = &forest.children[n];
    let rows: Vec<Vec<u32>> = level
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let p = x.parent as usize;
            let mut row = Vec::new();
            let mut scan = |q: usize| {
                for j in starts[q]..starts[q + 1] {
                    let y = &level[j];
                    if j != i && (!same_label || y.label == x.label) && dist(&x.e, &y.e) < eps {
                        row.push(j as u32);
                    }
                }
            };
            scan(p);
            for &q in prev.row(p) {
                scan(q as usize);
            }
            row.sort_unstable();
            row
        })
        .collect();
    CloseGraph::from_rows(rows)
}

fn greedy_graph(g: &CloseGraph, mut accepted: Vec<bool>) -> (usize, Vec<bool>) {
    for i in 0..accepted.len() {
        if !accepted[i] && !g.row(i).iter().any(|&j| accepted[j as usize]) {
            accepted[i] = true;
        }
    }
    (accepted.iter().filter(|&&a| a).count(), accepted)
}

/// KT and DS counts at one `eps` for levels `0..=depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsCounts {
    pub eps: f64,
    pub kt: Vec<usize>,
    pub ds: Vec<usize>,
    /// Counting stopped early because the close-pair budget ran out.
    pub pair_cut: bool,
}

struct EpsState {
    eps: f64,
    kt_graph: CloseGraph,
    ds_graph: CloseGraph,
    out: EpsCounts,
}

/// Counts for every `eps`, largest first. At each level the greedy set of a
/// smaller `eps` starts from the set of the previous one, and the DS set from
/// the larger of the KT set and the previous DS set, so counts are
/// nonincreasing in `eps` and DS dominates KT.
pub fn forest_counts(forest: &OrbitForest, eps_grid: &[f64], pair_budget: u64) -> Vec<EpsCounts> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let mut states: Vec<EpsState> = grid
        .iter()
        .map(|&eps| EpsState {
            eps,
            kt_graph: seed_close_graph(&forest.levels[0], eps),
            ds_graph: seed_close_graph(&forest.levels[0], eps),
            out: EpsCounts {
                eps,
                kt: Vec::new(),
                ds: Vec::new(),
                pair_cut: false,
            },
        })
        .collect();
    for n in 0..=forest.depth() {
        let size = forest.levels[n].len();
        let mut prev: Option<(Vec<bool>, Vec<bool>)> = None;
        for st in states.iter_mut() {
            if st.out.pair_cut {
                prev = None;
                continue;
            }
            if n > 0 {
                st.kt_graph = next_close_graph(forest, n - 1, &st.kt_graph, st.eps, false);
                st.ds_graph = next_close_graph(forest, n - 1, &st.ds_graph, st.eps, true);
            }
            if st.kt_graph.pairs() > pair_budget {
                st.out.pair_cut = true;
                prev = None;
                continue;
            }
            let (kt_seed, ds_seed) = match prev.take() {
                Some((k, d)) => (k, Some(d)),
                None => (vec![false; size], None),
            };
            let (kt, kt_set) = greedy_graph(&st.kt_graph, kt_seed);
            let (mut ds, mut ds_set) = greedy_graph(&st.ds_graph, kt_set.clone());
            if let Some(d) = ds_seed {
                let (alt, alt_set) = greedy_graph(&st.ds_graph, d);
                if alt > ds {
                    ds = alt;
                    ds_set = alt_set;
                }
            }
            st.out.kt.push(kt);
            st.out.ds.push(ds);
            prev = Some((kt_set, ds_set));
        }
    }
    states.into_iter().map(|s| s.out).collect()
}

/// `log max(d1, d2)`.
pub fn gromov_cap(c: &Correspondence) -> f64 {
    (c.d1().max(c.d2()) as f64).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "KT")]
    Kt,
    #[serde(rename = "DS")]
    Ds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedNet {
    pub n_lat: usize,
    pub n_lon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyProtocol {
    pub eps_grid: Vec<f64>,
    pub n_max: usize,
    pub seed_net: SeedNet,
    /// Total orbit-tree nodes.
    pub budget: u64,
    /// Inclusive range of `n` used by the slope fit; defaults to `[1, depth]`.
    #[serde(default)]
    pub fit_window: Option<[usize; 2]>,
    #[serde(default)]
    pub pair_budget: Option<u64>,
}

impl EntropyProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Invalid("eps_grid must be nonempty and positive".into()));
        }
        if self.seed_net.n_lat == 0 || self.seed_net.n_lon == 0 {
            return Err(Error::Invalid("seed net must be nonempty".into()));
        }
        if let Some([lo, hi]) = self.fit_window {
            if lo >= hi {
                return Err(Error::Invalid("fit window needs lo < hi".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub eps: f64,
    pub slope: f64,
    pub window: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub variant: Variant,
    /// `[n, eps, count]`.
    pub counts: Vec<(usize, f64, u64)>,
    pub slopes: Vec<SlopeFit>,
    pub estimate: f64,
    pub cap: f64,
    pub flags: Vec<String>,
    pub method: String,
    pub depth: usize,
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub kt: EntropyReport,
    pub ds: EntropyReport,
}

fn fit(counts: &[usize], window: [usize; 2]) -> Option<f64> {
    let hi = window[1].min(counts.len().saturating_sub(1));
    if hi <= window[0] {
        return None;
    }
    let ns: Vec<f64> = (window[0]..=hi).map(|n| n as f64).collect();
    let ls: Vec<f64> = (window[0]..=hi).map(|n| (counts[n] as f64).ln()).collect();
    least_squares_slope(&ns, &ls)
}

fn report(
    variant: Variant,
    per_eps: &[(f64, &[usize], bool)],
    forest: &OrbitForest,
    window: [usize; 2],
    cap: f64,
) -> EntropyReport {
    let mut counts = Vec::new();
    let mut slopes = Vec::new();
    let mut flags = Vec::new();
    if forest.truncated() {
        flags.push(format!("budget_truncated:depth={}", forest.depth()));
    }
    for (eps, c, pair_cut) in per_eps {
        for (n, &k) in c.iter().enumerate() {
            counts.push((n, *eps, k as u64));
        }
        if *pair_cut {
            flags.push(format!("pair_budget_truncated:eps={eps}:depth={}", c.len().saturating_sub(1)));
        }
        let hi = window[1].min(c.len().saturating_sub(1));
        match fit(c, window) {
            Some(s) => {
                if s > cap + CAP_SLACK {
                    flags.push(format!("cap_exceeded:eps={eps}:slope={s}"));
                }
                if hi >= 1 && c[hi] == c[hi - 1] && forest.level_size(hi) > forest.level_size(hi - 1) {
                    flags.push(format!("saturated:eps={eps}"));
                }
                slopes.push(SlopeFit {
                    eps: *eps,
                    slope: s,
                    window: [window[0], hi],
                });
            }
            None => flags.push(format!("degenerate_fit:eps={eps}")),
        }
    }
    let estimate = slopes.iter().map(|s| s.slope).fold(f64::NEG_INFINITY, f64::max);
    let estimate = if estimate.is_finite() { estimate } else { 0.0 };
    EntropyReport {
        variant,
        counts,
        slopes,
        estimate,
        cap,
        flags,
        method: "greedy maximal separated set in canonical order (lower bound on the maximum)".into(),
        depth: forest.depth(),
        nodes: forest.node_count(),
    }
}

/// Counts over the protocol's seed net and eps grid, slope fits and the
/// max-over-eps estimate for both variants.
pub fn entropy_estimate(c: &Correspondence, protocol: &EntropyProtocol) -> Result<EntropyEstimate> {
    protocol.validate()?;
    let seeds = lat_lon_net(protocol.seed_net.n_lat, protocol.seed_net.n_lon);
    let forest = OrbitForest::grow(c, &seeds, protocol.n_max, protocol.budget)?;
    let pair_budget = protocol.pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET);
    let counts = forest_counts(&forest, &protocol.eps_grid, pair_budget);
    let kt: Vec<(f64, &[usize], bool)> = counts.iter().map(|c| (c.eps, &c.kt[..], c.pair_cut)).collect();
    let ds: Vec<(f64, &[usize], bool)> = counts.iter().map(|c| (c.eps, &c.ds[..], c.pair_cut)).collect();
    let window = protocol.fit_window.unwrap_or([1, forest.depth()]);
    let cap = gromov_cap(c);
    let kt_report = report(Variant::Kt, &kt, &forest, window, cap);
    let mut ds_report = report(Variant::Ds, &ds, &forest, window, cap);
    if kt_report.estimate > ds_report.estimate + 1e-9 {
        ds_report.flags.push("kt_exceeds_ds".into());
    }
    Ok(EntropyEstimate {
        kt: kt_report,
        ds: ds_report,
    })
}
