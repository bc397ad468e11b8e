//! DBSCAN over feature-mix rows with silhouette and SSE scoring.
//!
//! Labels are `Option<usize>`: `None` is noise, `Some(c)` a cluster id in
//! `0..k`. Cluster ids are assigned in order of first row occurrence, so the
//! output is fully determined by the row order of the input.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DprError, Result};

pub type Label = Option<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
    /// Require strictly more than `min_pts` neighbours for a core point.
    #[serde(default)]
    pub core_strict: bool,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let p = DbscanParams {
            eps,
            min_pts,
            core_strict: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(DprError::InvalidArgument(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(DprError::InvalidArgument("min_pts must be >= 1".into()));
        }
        Ok(())
    }

    fn is_core(&self, neighbours: usize) -> bool {
        if self.core_strict {
            neighbours > self.min_pts
        } else {
            neighbours >= self.min_pts
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub params: DbscanParams,
    pub labels: Vec<Label>,
    pub k: usize,
    pub core: Vec<bool>,
    pub sc: Option<f64>,
    pub sse: f64,
}

impl ClusterModel {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for c in self.labels.iter().flatten() {
            sizes[*c] += 1;
        }
        sizes
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn rows(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..points.nrows())
        .map(|i| points.row(i).iter().copied().collect())
        .collect()
}

/// Dense symmetric distance matrix, row-major.
struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn new(points: &DMatrix<f64>) -> Self {
        let r = rows(points);
        let n = r.len();
        let d = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let r = &r;
                (0..n).map(move |j| euclidean(&r[i], &r[j]))
            })
            .collect();
        Distances { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn neighbours(&self, i: usize, eps: f64) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j) <= eps).collect()
    }
}

/// Indices within `eps` of row `i`, including `i`.
pub fn region_query(points: &DMatrix<f64>, i: usize, eps: f64) -> Vec<usize> {
    let xi: Vec<f64> = points.row(i).iter().copied().collect();
    (0..points.nrows())
        .filter(|&j| {
            let xj: Vec<f64> = points.row(j).iter().copied().collect();
            euclidean(&xi, &xj) <= eps
        })
        .collect()
}

/// Renumbers cluster ids in order of first row occurrence.
pub fn canonicalize(labels: &[Label]) -> (Vec<Label>, usize) {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    let out = labels
        .iter()
        .map(|l| {
            l.map(|c| {
                if c >= map.len() {
                    map.resize(c + 1, None);
                }
                *map[c].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
        })
        .collect();
    (out, next)
}

fn dbscan_labels(dist: &Distances, params: &DbscanParams) -> (Vec<Label>, Vec<bool>) {
    let n = dist.n;
    let neighbourhoods: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| dist.neighbours(i, params.eps))
        .collect();
    let core: Vec<bool> = neighbourhoods.iter().map(|nb| params.is_core(nb.len())).collect();

    let mut labels: Vec<Label> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbourhoods[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    // Border points join the cluster of their lowest-index core neighbour.
    for i in 0..n {
        if !core[i] {
            labels[i] = neighbourhoods[i].iter().find(|&&j| core[j]).and_then(|&j| labels[j]);
        }
    }
    (canonicalize(&labels).0, core)
}

fn score(points: &DMatrix<f64>, dist: &Distances, params: DbscanParams, labels: Vec<Label>, core: Vec<bool>) -> ClusterModel {
    let (labels, k) = canonicalize(&labels);
    let mut sizes = vec![0usize; k];
    for c in labels.iter().flatten() {
        sizes[*c] += 1;
    }
    let sc = if k >= 2 && sizes.iter().any(|&s| s >= 2) {
        Some(silhouette_from(dist, &labels, k))
    } else {
        None
    };
    let sse = sse(points, &labels);
    ClusterModel {
        params,
        labels,
        k,
        core,
        sc,
        sse,
    }
}

pub fn dbscan(points: &DMatrix<f64>, params: &DbscanParams) -> Result<ClusterModel> {
    params.validate()?;
    if points.iter().any(|v| !v.is_finite()) {
        return Err(DprError::InvalidArgument("points must be finite".into()));
    }
    let dist = Distances::new(points);
    let (labels, core) = dbscan_labels(&dist, params);
    Ok(score(points, &dist, *params, labels, core))
}

fn silhouette_from(dist: &Distances, labels: &[Label], k: usize) -> f64 {
    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == Some(c)).collect())
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, l) in labels.iter().enumerate() {
        let Some(own) = *l else { continue };
        count += 1;
        if members[own].len() < 2 {
            continue;
        }
        let mean_to = |c: usize| -> f64 {
            let s: f64 = members[c].iter().map(|&j| dist.get(i, j)).sum();
            s / members[c].len() as f64
        };
        let a = members[own].iter().map(|&j| dist.get(i, j)).sum::<f64>() / (members[own].len() - 1) as f64;
        let b = (0..k).filter(|&c| c != own).map(mean_to).fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / count as f64
}

/// Mean silhouette over non-noise points. Points in singleton clusters score
/// 0, as do points whose `max(a, b)` is 0.
pub fn silhouette_sc(points: &DMatrix<f64>, labels: &[Label]) -> Result<f64> {
    if labels.len() != points.nrows() {
        return Err(DprError::DimensionMismatch {
            expected: points.nrows(),
            got: labels.len(),
        });
    }
    let (labels, k) = canonicalize(labels);
    if k < 2 {
        return Err(DprError::InvalidArgument(format!(
            "silhouette needs at least 2 clusters, found {k}"
        )));
    }
    let dist = Distances::new(points);
    Ok(silhouette_from(&dist, &labels, k))
}

/// Within-cluster sum of squared distances to cluster centroids. Noise
/// contributes nothing.
pub fn sse(points: &DMatrix<f64>, labels: &[Label]) -> f64 {
    let (labels, k) = canonicalize(labels);
    let p = points.ncols();
    let mut centroids = vec![vec![0.0; p]; k];
    let mut sizes = vec![0usize; k];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            sizes[c] += 1;
            for j in 0..p {
                centroids[c][j] += points[(i, j)];
            }
        }
    }
    for (c, s) in centroids.iter_mut().zip(&sizes) {
        c.iter_mut().for_each(|v| *v /= *s as f64);
    }
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|c| (i, c)))
        .map(|(i, c)| (0..p).map(|j| (points[(i, j)] - centroids[c][j]).powi(2)).sum::<f64>())
        .sum()
}

/// Distance from each point to its k-th nearest other point, sorted
/// descending.
pub fn k_distance_profile(points: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let n = points.nrows();
    if k < 1 || k >= n {
        return Err(DprError::InvalidArgument(format!("k must satisfy 1 <= k < n ({n}), got {k}")));
    }
    let dist = Distances::new(points);
    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist.get(i, j)).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub eps: f64,
    pub min_pts: usize,
    pub k: usize,
    pub noise: usize,
    pub sc: Option<f64>,
    pub sse: f64,
    /// Number of points scanned.
    pub rows: usize,
}

/// Runs DBSCAN on every (eps, min_pts) pair, eps-major, and scores each.
pub fn scan_params(
    points: &DMatrix<f64>,
    eps_grid: &[f64],
    min_pts_grid: &[usize],
    core_strict: bool,
) -> Result<Vec<ScanRow>> {
    if eps_grid.is_empty() || min_pts_grid.is_empty() {
        return Err(DprError::InvalidArgument("scan grids must be non-empty".into()));
    }
    let cells: Vec<DbscanParams> = eps_grid
        .iter()
        .flat_map(|&eps| {
            min_pts_grid.iter().map(move |&min_pts| DbscanParams {
                eps,
                min_pts,
                core_strict,
            })
        })
        .collect();
    for c in &cells {
        c.validate()?;
    }
    let dist = Distances::new(points);
    Ok(cells
        .par_iter()
        .map(|params| {
            let (labels, core) = dbscan_labels(&dist, params);
            let m = score(points, &dist, *params, labels, core);
            ScanRow {
                eps: params.eps,
                min_pts: params.min_pts,
                k: m.k,
                noise: m.noise_count(),
                sc: m.sc,
                sse: m.sse,
                rows: points.nrows(),
            }
        })
        .collect())
}

/// The row with the best coverage-weighted SC, where noise points count
/// as silhouette 0; the earliest row wins ties. SC alone ignores noise, so
/// a tiny eps that leaves most points unclustered could otherwise win.
pub fn best_scan_row(rows: &[ScanRow]) -> Option<&ScanRow> {
    let weighted = |r: &ScanRow| r.sc.map(|sc| sc * (r.rows - r.noise) as f64 / r.rows as f64);
    rows.iter()
        .filter(|r| r.sc.is_some())
        .fold(None, |best: Option<&ScanRow>, r| match best {
            Some(b) if weighted(b) >= weighted(r) => Some(b),
            _ => Some(r),
        })
}

/// Labels unseen rows with the cluster of the nearest core point of a
/// fitted model, provided it lies within eps; otherwise noise. Distance ties
/// go to the lower-index core.
pub fn assign_nearest_core(train: &DMatrix<f64>, model: &ClusterModel, new_points: &DMatrix<f64>) -> Result<Vec<Label>> {
    if train.ncols() != new_points.ncols() {
        return Err(DprError::DimensionMismatch {
            expected: train.ncols(),
            got: new_points.ncols(),
        });
    }
    let cores = core_points(train, model);
    Ok((0..new_points.nrows())
        .map(|i| {
            let x: Vec<f64> = new_points.row(i).iter().copied().collect();
            nearest_core_label(&cores, model.params.eps, &x)
        })
        .collect())
}

/// Core rows of a fitted model as `(cluster id, coordinates)`, in row order.
pub fn core_points(train: &DMatrix<f64>, model: &ClusterModel) -> Vec<(usize, Vec<f64>)> {
    (0..train.nrows())
        .filter(|&i| model.core[i])
        .filter_map(|i| model.labels[i].map(|c| (c, train.row(i).iter().copied().collect())))
        .collect()
}

/// Cluster of the nearest core within `eps`, earliest core on distance ties.
pub fn nearest_core_label(cores: &[(usize, Vec<f64>)], eps: f64, x: &[f64]) -> Label {
    let mut best: Option<(f64, usize)> = None;
    for (label, c) in cores {
        let d = euclidean(x, c);
        if d <= eps && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, *label));
        }
    }
    best.map(|(_, l)| l)
}
