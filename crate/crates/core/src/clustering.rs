//! k-means with k-means++ seeding, the Davies-Bouldin index, and the sweep
//! over k that picks the partition with the lowest index.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Lloyd iterations stop once no centroid moves farther than this.
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k_min: 2,
            k_max: 15,
            seed: 0,
            max_iterations: 300,
            tolerance: 1e-6,
            restarts: 8,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "need 2 <= k_min <= k_max, got k_min={} k_max={}",
                self.k_min, self.k_max
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::Config(
                "max_iterations and restarts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult<const D: usize> {
    /// Cluster of each point; clusters are numbered by first appearance.
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; D]>,
    pub inertia: f64,
    /// `None` for k = 1.
    pub db_index: Option<f64>,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

impl<const D: usize> ClusterResult<D> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

#[inline]
fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

pub fn distinct_count<const D: usize>(points: &[[f64; D]]) -> usize {
    let mut sorted: Vec<&[f64; D]> = points.iter().collect();
    let cmp = |a: &&[f64; D], b: &&[f64; D]| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    sorted.sort_unstable_by(cmp);
    sorted.dedup_by(|a, b| cmp(a, b).is_eq());
    sorted.len()
}

/// Nearest centroid (lowest index on ties) and squared distance to it.
#[inline]
fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_plus_plus<const D: usize, R: Rng>(
    points: &[[f64; D]],
    k: usize,
    rng: &mut R,
) -> Vec<[f64; D]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        // k <= distinct points guarantees some point is still uncovered
        let c = points[chosen.expect("an uncovered point remains")];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Run<const D: usize> {
    assignment: Vec<usize>,
    centroids: Vec<[f64; D]>,
    inertia: f64,
    trace: Vec<f64>,
}

/// Assigns every point to its nearest centroid; returns the inertia.
fn assign<const D: usize>(
    points: &[[f64; D]],
    centroids: &[[f64; D]],
    assignment: &mut [usize],
    dists: &mut [f64],
) -> f64 {
    points
        .par_iter()
        .zip(assignment.par_iter_mut())
        .zip(dists.par_iter_mut())
        .for_each(|((p, a), d)| {
            let (j, dd) = nearest(p, centroids);
            *a = j;
            *d = dd;
        });
    dists.iter().sum()
}

fn means<const D: usize>(
    points: &[[f64; D]],
    assignment: &[usize],
    k: usize,
) -> (Vec<[f64; D]>, Vec<usize>) {
    let mut sums = vec![[0.0; D]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            for x in s.iter_mut() {
                *x /= n as f64;
            }
        }
    }
    (sums, counts)
}

fn lloyd<const D: usize, R: Rng>(
    points: &[[f64; D]],
    k: usize,
    cfg: &ClusteringConfig,
    rng: &mut R,
) -> Run<D> {
    let n = points.len();
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut assignment = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia = assign(points, &centroids, &mut assignment, &mut dists);
    let mut trace = vec![inertia];

    for _ in 0..cfg.max_iterations {
        let (mut updated, mut counts) = means(points, &assignment, k);
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            // re-seed an empty cluster with the point farthest from its
            // updated centroid, taken from a cluster that can spare it
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .map(|i| (i, dist2(&points[i], &updated[assignment[i]])))
                .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                counts[assignment[i]] -= 1;
                counts[c] = 1;
                assignment[i] = c;
                updated[c] = points[i];
            }
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist2(a, b))
            .fold(0.0f64, f64::max)
            .sqrt();
        centroids = updated;
        let previous = assignment.clone();
        inertia = assign(points, &centroids, &mut assignment, &mut dists);
        trace.push(inertia);
        if shift <= cfg.tolerance || previous == assignment {
            break;
        }
    }

    Run {
        assignment,
        centroids,
        inertia,
        trace,
    }
}

/// Renumbers clusters by first appearance and recomputes centroids and
/// inertia from the final assignment.
fn finish<const D: usize>(points: &[[f64; D]], run: Run<D>) -> ClusterResult<D> {
    let k = run.centroids.len();
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    let assignment: Vec<usize> = run
        .assignment
        .iter()
        .map(|&a| {
            if relabel[a] == usize::MAX {
                relabel[a] = next;
                next += 1;
            }
            relabel[a]
        })
        .collect();
    let (centroids, _) = means(points, &assignment, next);
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum();
    let db_index = if next >= 2 {
        davies_bouldin(points, &assignment).ok()
    } else {
        None
    };
    ClusterResult {
        assignment,
        centroids,
        inertia,
        db_index,
        inertia_trace: run.trace,
    }
}

/// Best of `cfg.restarts` Lloyd runs by inertia (earliest restart on ties).
pub fn kmeans<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    cfg: &ClusteringConfig,
) -> Result<ClusterResult<D>> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::TooFewDistinctPoints { k, distinct });
    }
    kmeans_unchecked(points, k, cfg)
}

fn kmeans_unchecked<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    cfg: &ClusteringConfig,
) -> Result<ClusterResult<D>> {
    let runs: Vec<Run<D>> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream_rng(cfg.seed, rng::kmeans_stream(k, r));
            lloyd(points, k, cfg, &mut rng)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.inertia < best.inertia {
                run
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(finish(points, best))
}

/// Davies-Bouldin index: mean over clusters of the worst
/// `(s_i + s_j) / |c_i - c_j|`, where `s_i` is the mean distance of cluster
/// `i`'s points to its centroid. Lower is better.
pub fn davies_bouldin<const D: usize>(points: &[[f64; D]], assignment: &[usize]) -> Result<f64> {
    if points.len() != assignment.len() {
        return Err(Error::SizeMismatch {
            what: "assignment",
            expected: points.len(),
            found: assignment.len(),
        });
    }
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(Error::InsufficientData(
            "Davies-Bouldin index needs at least 2 clusters".into(),
        ));
    }
    let (centroids, counts) = means(points, assignment, k);
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let mut scatter = vec![0.0; k];
    for (p, &a) in points.iter().zip(assignment) {
        scatter[a] += dist2(p, &centroids[a]).sqrt();
    }
    for (s, &n) in scatter.iter_mut().zip(&counts) {
        *s /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist2(&centroids[i], &centroids[j]).sqrt();
            if sep == 0.0 {
                return Err(Error::CoincidentCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepEntry {
    pub k: usize,
    pub db_index: f64,
    pub inertia: f64,
}

#[derive(Clone, Debug)]
pub struct Selection<const D: usize> {
    pub k: usize,
    pub result: ClusterResult<D>,
    pub sweep: Vec<SweepEntry>,
}

impl<const D: usize> Selection<D> {
    /// `k,db_index,inertia` table.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("k,db_index,inertia\n");
        for e in &self.sweep {
            out.push_str(&format!("{},{},{}\n", e.k, e.db_index, e.inertia));
        }
        out
    }
}

/// Runs k-means for every k in `[k_min, k_max]` and keeps the result with
/// the lowest Davies-Bouldin index, preferring the smaller k on ties.
pub fn select_k<const D: usize>(
    points: &[[f64; D]],
    cfg: &ClusteringConfig,
) -> Result<Selection<D>> {
    cfg.validate()?;
    let distinct = distinct_count(points);
    if cfg.k_max > distinct {
        return Err(Error::TooFewDistinctPoints {
            k: cfg.k_max,
            distinct,
        });
    }
    let results: Vec<ClusterResult<D>> = (cfg.k_min..=cfg.k_max)
        .into_par_iter()
        .map(|k| kmeans_unchecked(points, k, cfg))
        .collect::<Result<_>>()?;

    let mut sweep = Vec::with_capacity(results.len());
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        let db = r.db_index.unwrap_or(f64::INFINITY);
        sweep.push(SweepEntry {
            k: cfg.k_min + i,
            db_index: db,
            inertia: r.inertia,
        });
        if best.is_none_or(|b| db < sweep[b].db_index) {
            best = Some(i);
        }
    }
    let best = best.expect("non-empty sweep");
    let result = results.into_iter().nth(best).expect("index in range");
    Ok(Selection {
        k: sweep[best].k,
        result,
        sweep,
    })
}

/// Global z-score of each dimension (population std; constant dimensions
/// map to 0).
pub fn standardize<const D: usize>(points: &[[f64; D]]) -> Vec<[f64; D]> {
    let n = points.len() as f64;
    let mut mean = [0.0; D];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = [0.0; D];
    for p in points {
        for i in 0..D {
            sd[i] += (p[i] - mean[i]).powi(2);
        }
    }
    sd.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    points
        .iter()
        .map(|p| {
            std::array::from_fn(|i| {
                if sd[i] > 0.0 {
                    (p[i] - mean[i]) / sd[i]
                } else {
                    0.0
                }
            })
        })
        .collect()
}

pub fn write_assignment_csv<W: std::io::Write>(
    mut w: W,
    nodes: &[u64],
    assignment: &[usize],
) -> std::io::Result<()> {
    writeln!(w, "node,cluster")?;
    for (node, c) in nodes.iter().zip(assignment) {
        writeln!(w, "{node},{c}")?;
    }
    w.flush()
}

pub fn read_assignment_csv<R: std::io::BufRead>(reader: R) -> Result<Vec<(u64, usize)>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<assignment>", e))?;
        let line = line.trim();
        if i == 0 {
            if line != "node,cluster" {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header `node,cluster`".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (node, cluster) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected `node,cluster`".into()))?;
        rows.push((
            node.parse()
                .map_err(|e| parse_err(format!("invalid node: {e}")))?,
            cluster
                .parse()
                .map_err(|e| parse_err(format!("invalid cluster: {e}")))?,
        ));
    }
    Ok(rows)
}
