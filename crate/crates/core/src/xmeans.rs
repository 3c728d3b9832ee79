//! Lloyd k-means and BIC-driven X-means model selection over planar points.
//!
//! The BIC scores an identical spherical Gaussian mixture: every cluster
//! shares one maximum-likelihood variance, mixing weights are the cluster
//! shares, and the penalty counts `k·d + k + 1` free parameters.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Point;

const DIM: usize = 2;

/// Lower bound on the pooled variance (m²) so degenerate fits stay finite.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Largest centroid displacement (m) that still counts as converged.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Point>,
    /// Cluster index of every input point, in input order.
    pub assignment: Vec<usize>,
}

impl Clustering {
    /// Within-cluster sum of squared distances.
    pub fn sse(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| p.distance_sq(self.centroids[c]))
            .sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Indices of the points assigned to cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == c)
            .map(|(i, _)| i)
            .collect()
    }
}

fn mean(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

fn nearest(p: Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(*c);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn assign(points: &[Point], centroids: &[Point], assignment: &mut [usize]) {
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest(*p, centroids);
    }
}

fn distinct_count(points: &[Point]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Moves each empty centroid onto the point farthest from its own centroid
/// and hands that point over. Returns whether anything changed.
fn repair_empty(points: &[Point], centroids: &mut [Point], assignment: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut changed = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return changed;
        };
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| sizes[assignment[*i]] >= 2)
            .map(|(i, p)| (i, p.distance_sq(centroids[assignment[i]])))
            .filter(|(_, d)| *d > 0.0)
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((idx, _)) = far else {
            // fewer distinct points than clusters; callers rule this out
            return changed;
        };
        centroids[empty] = points[idx];
        assignment[idx] = empty;
        changed = true;
    }
}

/// Per-iteration trace of one k-means call, for checking SSE monotonicity.
#[derive(Debug, Clone, Default)]
pub struct KMeansTrace {
    /// SSE after each assignment step (including empty-cluster repair).
    pub sse: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd iterations from the given initial centroids.
pub fn kmeans_from(
    points: &[Point],
    initial: &[Point],
    params: KMeansParams,
) -> Result<(Clustering, KMeansTrace)> {
    let k = initial.len();
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            points.len()
        )));
    }
    if params.max_iter == 0 || params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::InvalidArgument(
            "max_iter must be ≥ 1 and tol ≥ 0".into(),
        ));
    }
    if distinct_count(points) < k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of distinct points"
        )));
    }

    let mut centroids = initial.to_vec();
    let mut assignment = vec![0usize; points.len()];
    let mut trace = KMeansTrace::default();
    let sse = |c: &[Point], a: &[usize]| -> f64 {
        points
            .iter()
            .zip(a)
            .map(|(p, &j)| p.distance_sq(c[j]))
            .sum()
    };

    let mut members: Vec<Vec<Point>> = vec![Vec::new(); k];
    let mut update = |centroids: &mut [Point], assignment: &[usize]| -> f64 {
        for m in members.iter_mut() {
            m.clear();
        }
        for (p, &a) in points.iter().zip(assignment) {
            members[a].push(*p);
        }
        let mut shift: f64 = 0.0;
        for (c, m) in centroids.iter_mut().zip(&members) {
            if m.is_empty() {
                continue;
            }
            let next = mean(m);
            shift = shift.max(crate::model::distance(*c, next));
            *c = next;
        }
        shift
    };

    for _ in 0..params.max_iter {
        assign(points, &centroids, &mut assignment);
        repair_empty(points, &mut centroids, &mut assignment);
        trace.sse.push(sse(&centroids, &assignment));
        trace.iterations += 1;
        let shift = update(&mut centroids, &assignment);
        if shift <= params.tol {
            break;
        }
    }

    // Final assignment must be nearest-centroid and leave no cluster empty.
    // Each repair strictly lowers SSE, so this settles.
    loop {
        assign(points, &centroids, &mut assignment);
        if !repair_empty(points, &mut centroids, &mut assignment) {
            break;
        }
        trace.sse.push(sse(&centroids, &assignment));
        update(&mut centroids, &assignment);
        trace.sse.push(sse(&centroids, &assignment));
    }

    Ok((
        Clustering {
            k,
            centroids,
            assignment,
        },
        trace,
    ))
}

/// Lloyd k-means with `k` distinct initial centroids drawn uniformly
/// without replacement from `points`.
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Point],
    k: usize,
    rng: &mut R,
    params: KMeansParams,
) -> Result<Clustering> {
    kmeans_traced(points, k, rng, params).map(|(c, _)| c)
}

pub fn kmeans_traced<R: Rng + ?Sized>(
    points: &[Point],
    k: usize,
    rng: &mut R,
    params: KMeansParams,
) -> Result<(Clustering, KMeansTrace)> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            points.len()
        )));
    }
    let initial: Vec<Point> = index::sample(rng, points.len(), k)
        .into_iter()
        .map(|i| points[i])
        .collect();
    kmeans_from(points, &initial, params)
}

/// Bayesian Information Criterion of `clustering` over `points`. Higher is
/// better.
pub fn bic(points: &[Point], clustering: &Clustering) -> Result<f64> {
    let r = points.len();
    let k = clustering.k;
    if r < k || clustering.assignment.len() != r {
        return Err(Error::InvalidArgument(format!(
            "{r} points cannot support {k} clusters"
        )));
    }
    let rf = r as f64;
    let d = DIM as f64;
    let sse = clustering.sse(points);
    let variance = (sse / (rf * d)).max(VARIANCE_FLOOR);

    let mixing: f64 = clustering
        .sizes()
        .into_iter()
        .filter(|&n| n > 0)
        .map(|n| {
            let n = n as f64;
            n * (n / rf).ln()
        })
        .sum();
    let log_likelihood = mixing
        - rf * d / 2.0 * (2.0 * std::f64::consts::PI * variance).ln()
        - sse / (2.0 * variance);
    let free_params = (k * DIM + k + 1) as f64;
    Ok(log_likelihood - free_params / 2.0 * rf.ln())
}

fn single_cluster(points: &[Point]) -> Clustering {
    Clustering {
        k: 1,
        centroids: vec![mean(points)],
        assignment: vec![0; points.len()],
    }
}

/// X-means: k-means at `k_min`, then repeatedly try splitting every cluster
/// in two, keeping splits whose local BIC beats the unsplit cluster, and
/// refit globally after each accepted batch. Stops when nothing splits or
/// `k_max` is reached, and returns the visited model with the highest
/// global BIC.
pub fn xmeans<R: Rng + ?Sized>(
    points: &[Point],
    k_min: usize,
    k_max: usize,
    rng: &mut R,
    params: KMeansParams,
) -> Result<Clustering> {
    if k_min == 0 || k_min > k_max || k_max > points.len() {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ k_min ({k_min}) ≤ k_max ({k_max}) ≤ points ({})",
            points.len()
        )));
    }
    let mut clustering = kmeans(points, k_min, rng, params)?;
    let mut best_score = bic(points, &clustering)?;
    let mut best = clustering.clone();

    while clustering.k < k_max {
        let mut centers = Vec::with_capacity(clustering.k * 2);
        let mut budget = k_max - clustering.k;
        let mut accepted = 0;
        for c in 0..clustering.k {
            let local: Vec<Point> = clustering.members(c).iter().map(|&i| points[i]).collect();
            if budget == 0 || distinct_count(&local) < 2 {
                centers.push(clustering.centroids[c]);
                continue;
            }
            let parent = single_cluster(&local);
            let children = kmeans(&local, 2, rng, params)?;
            if bic(&local, &children)? > bic(&local, &parent)? {
                centers.extend_from_slice(&children.centroids);
                budget -= 1;
                accepted += 1;
            } else {
                centers.push(clustering.centroids[c]);
            }
        }
        if accepted == 0 {
            break;
        }
        clustering = kmeans_from(points, &centers, params)?.0;
        let score = bic(points, &clustering)?;
        if score > best_score {
            best_score = score;
            best = clustering.clone();
        }
    }
    Ok(best)
}
