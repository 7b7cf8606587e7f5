//! k-means over raw contexts: k-means++ seeding followed by Lloyd
//! iterations, nearest-centroid assignment, and running-mean online updates.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::squared_distance;
use crate::scalar::Scalar;
use crate::seed::rng_from;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    centroids: Vec<Vec<T>>,
    counts: Vec<u64>,
}

/// Objective trace of one fit. `reseeded[i]` marks iterations where an empty
/// cluster was reseeded, which exempts that step from the monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace<T> {
    pub objective: Vec<T>,
    pub reseeded: Vec<bool>,
    pub converged: bool,
}

impl<T: Scalar> FitTrace<T> {
    /// True when the within-cluster sum of squares never increased between
    /// consecutive checked iterations (relative slack for rounding).
    pub fn is_monotone(&self) -> bool {
        self.objective
            .windows(2)
            .enumerate()
            .all(|(i, w)| self.reseeded[i + 1] || w[1] <= w[0] + w[0].abs() * T::of(1e-12))
    }
}

impl<T: Scalar> ClusterModel<T> {
    pub fn from_parts(centroids: Vec<Vec<T>>, counts: Vec<u64>) -> Result<Self> {
        if centroids.is_empty() || centroids.len() != counts.len() {
            return Err(Error::Input(
                "cluster model needs k >= 1 centroids with counts".into(),
            ));
        }
        let d = centroids[0].len();
        if d == 0 || centroids.iter().any(|c| c.len() != d) {
            return Err(Error::Input(
                "centroids must share a positive dimension".into(),
            ));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("centroids must be finite".into()));
        }
        Ok(Self { centroids, counts })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<T>] {
        &self.centroids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Index of the nearest centroid (Euclidean); ties go to the lowest index.
    pub fn assign(&self, x: &[T]) -> Result<usize> {
        check_dim("cluster query", self.dim(), x.len())?;
        Ok(nearest(&self.centroids, x).0)
    }

    /// Running-mean update of centroid `j` only.
    pub fn update_online(&mut self, x: &[T], j: usize) -> Result<()> {
        check_dim("cluster update", self.dim(), x.len())?;
        let k = self.k();
        let centroid = self
            .centroids
            .get_mut(j)
            .ok_or_else(|| Error::Input(format!("cluster {j} out of range (k = {k})")))?;
        self.counts[j] += 1;
        let n = T::of(self.counts[j] as f64);
        for (c, &v) in centroid.iter_mut().zip(x) {
            *c += (v - *c) / n;
        }
        Ok(())
    }

    /// Within-cluster sum of squares of `data` under nearest-centroid assignment.
    pub fn objective(&self, data: &[Vec<T>]) -> T {
        data.iter().map(|x| nearest(&self.centroids, x).1).sum()
    }
}

fn nearest<T: Scalar>(centroids: &[Vec<T>], x: &[T]) -> (usize, T) {
    let mut best = (0, squared_distance(&centroids[0], x));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn validate_data<T: Scalar>(data: &[Vec<T>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::Input(format!(
            "{} points cannot form {k} clusters",
            data.len()
        )));
    }
    let d = data[0].len();
    if d == 0 {
        return Err(Error::Input("points must have positive dimension".into()));
    }
    for x in data {
        check_dim("cluster data", d, x.len())?;
    }
    Ok(d)
}

fn kmeans_pp<T: Scalar>(data: &[Vec<T>], k: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = rng_from(seed);
    let mut centroids = vec![data[rng.random_range(0..data.len())].clone()];
    let mut dist: Vec<f64> = data
        .iter()
        .map(|x| squared_distance(&centroids[0], x).as_f64())
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = data.len() - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All points coincide with chosen centroids.
            rng.random_range(0..data.len())
        };
        let c = data[next].clone();
        for (di, x) in dist.iter_mut().zip(data) {
            *di = di.min(squared_distance(&c, x).as_f64());
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeds, up to [`MAX_ITERATIONS`] or an
/// assignment fixpoint.
pub fn kmeans_fit<T: Scalar>(data: &[Vec<T>], k: usize, seed: u64) -> Result<ClusterModel<T>> {
    kmeans_fit_traced(data, k, seed).map(|(m, _)| m)
}

pub fn kmeans_fit_traced<T: Scalar>(
    data: &[Vec<T>],
    k: usize,
    seed: u64,
) -> Result<(ClusterModel<T>, FitTrace<T>)> {
    let d = validate_data(data, k)?;
    let mut centroids = kmeans_pp(data, k, seed);
    let mut assignment: Vec<usize> = data.iter().map(|x| nearest(&centroids, x).0).collect();
    let mut trace = FitTrace {
        objective: vec![objective_of(data, &centroids, &assignment)],
        reseeded: vec![false],
        converged: false,
    };
    for _ in 0..MAX_ITERATIONS {
        // Update step.
        let mut sums = vec![vec![T::zero(); d]; k];
        let mut counts = vec![0usize; k];
        for (x, &j) in data.iter().zip(&assignment) {
            counts[j] += 1;
            for (s, &v) in sums[j].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut reseeded = false;
        for j in 0..k {
            if counts[j] > 0 {
                let n = T::of(counts[j] as f64);
                centroids[j] = sums[j].iter().map(|&s| s / n).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // Reseed to the point farthest from its own centroid.
                let far = data
                    .iter()
                    .zip(&assignment)
                    .enumerate()
                    .map(|(i, (x, &a))| (i, squared_distance(x, &centroids[a])))
                    .fold((0, T::neg_infinity()), |b, c| if c.1 > b.1 { c } else { b })
                    .0;
                centroids[j] = data[far].clone();
                reseeded = true;
            }
        }
        // Assignment step.
        let next: Vec<usize> = data.iter().map(|x| nearest(&centroids, x).0).collect();
        let changed = next != assignment;
        assignment = next;
        trace
            .objective
            .push(objective_of(data, &centroids, &assignment));
        trace.reseeded.push(reseeded);
        if !changed && !reseeded {
            trace.converged = true;
            break;
        }
    }
    // Final centroids are the means of the final assignment.
    let mut counts = vec![0u64; k];
    let mut sums = vec![vec![T::zero(); d]; k];
    for (x, &j) in data.iter().zip(&assignment) {
        counts[j] += 1;
        for (s, &v) in sums[j].iter_mut().zip(x) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let n = T::of(counts[j] as f64);
            centroids[j] = sums[j].iter().map(|&s| s / n).collect();
        }
    }
    debug_assert!(trace.is_monotone());
    Ok((ClusterModel { centroids, counts }, trace))
}

fn objective_of<T: Scalar>(data: &[Vec<T>], centroids: &[Vec<T>], assignment: &[usize]) -> T {
    data.iter()
        .zip(assignment)
        .map(|(x, &j)| squared_distance(x, &centroids[j]))
        .sum()
}

/// Refits from scratch over every context seen so far.
pub fn recompute_clusters<T: Scalar>(
    history: &[Vec<T>],
    k: usize,
    seed: u64,
) -> Result<ClusterModel<T>> {
    kmeans_fit(history, k, seed)
}
