//! Reference implementations written straight from the definitions. They
//! share no code with the production solvers and favour clarity over speed.

use std::collections::HashMap;
use std::hash::Hash;

use dpr_core::clustering::Label;
use dpr_core::{DprError, Result};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// DBSCAN by transitive closure of direct density-reachability between
/// core points. A point is core when its closed eps-ball holds at least
/// `min_pts` points (more than `min_pts` when `strict`). Border points join
/// the cluster of their lowest-index core neighbour. Clusters are numbered
/// by first row occurrence.
pub fn brute_force_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize, strict: bool) -> Vec<Label> {
    let n = points.len();
    let near: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = (0..n)
        .map(|i| {
            let count = near[i].iter().filter(|&&b| b).count();
            if strict {
                count > min_pts
            } else {
                count >= min_pts
            }
        })
        .collect();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| core[i] && core[j] && (i == j || near[i][j])).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    // Each core point is represented by the smallest core index it reaches.
    let root = |i: usize| (0..n).find(|&j| reach[i][j]).unwrap();
    let raw: Vec<Option<usize>> = (0..n)
        .map(|i| {
            if core[i] {
                Some(root(i))
            } else {
                (0..n).find(|&j| core[j] && near[i][j]).map(root)
            }
        })
        .collect();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    raw.iter()
        .map(|r| {
            r.map(|root| {
                let next = ids.len();
                *ids.entry(root).or_insert(next)
            })
        })
        .collect()
}

/// Maps noise to fresh singleton ids so partitions can be compared.
pub fn noise_as_singletons(labels: &[Label]) -> Vec<usize> {
    let base = labels.iter().flatten().max().map_or(0, |m| m + 1);
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.unwrap_or(base + i))
        .collect()
}

/// True when the two labelings induce the same partition, with noise kept
/// as a distinguished label.
pub fn same_partition(a: &[Label], b: &[Label]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from the pair-counting contingency table.
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len();
    let mut cells: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sa * sb / total;
    let max = (sa + sb) / 2.0;
    if max == expected {
        return if sa == sb && sa == index { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

/// Penalized least-squares objective with an unpenalized intercept:
/// `(1/N) |y - b0 - X b|^2 + lambda (alpha |b|_1 + (1 - alpha) |b|_2^2)`.
pub fn penalized_objective(x: &[Vec<f64>], y: &[f64], b0: f64, b: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = y.len() as f64;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let f = b0 + row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            (yi - f).powi(2)
        })
        .sum();
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let l2: f64 = b.iter().map(|v| v * v).sum();
    rss / n + lambda * (alpha * l1 + (1.0 - alpha) * l2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimizes [`penalized_objective`] by accelerated proximal gradient with
/// adaptive restart. `x` is row-major. Stops when the objective improves by
/// less than `1e-15` relative over 100 iterations.
pub fn reference_objective_min(x: &[Vec<f64>], y: &[f64], lambda: f64, alpha: f64) -> Result<ReferenceFit> {
    let n = y.len();
    let p = x.first().map_or(0, |r| r.len());
    if n == 0 || x.len() != n {
        return Err(DprError::InvalidArgument("empty or ragged problem".into()));
    }
    let nf = n as f64;
    let xmean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ymean = y.iter().sum::<f64>() / nf;
    let xc: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&xmean).map(|(v, m)| v - m).collect())
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ymean).collect();

    // Largest eigenvalue of Xc'Xc by power iteration.
    let mut v = vec![1.0; p];
    let mut eig = 0.0;
    for _ in 0..1000 {
        let xv: Vec<f64> = xc.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let mut w = vec![0.0; p];
        for (r, s) in xc.iter().zip(&xv) {
            for j in 0..p {
                w[j] += r[j] * s;
            }
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        eig = norm / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / norm).collect();
    }
    let l2 = lambda * (1.0 - alpha);
    let lip = 2.0 * eig * 1.0001 / nf + 2.0 * l2 + 1e-12;
    let step = 1.0 / lip;
    let thresh = lambda * alpha * step;

    let obj = |b: &[f64]| {
        let rss: f64 = xc
            .iter()
            .zip(&yc)
            .map(|(r, yi)| (yi - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()).powi(2))
            .sum();
        rss / nf + lambda * alpha * b.iter().map(|t| t.abs()).sum::<f64>() + l2 * b.iter().map(|t| t * t).sum::<f64>()
    };
    let grad = |b: &[f64]| {
        let r: Vec<f64> = xc
            .iter()
            .zip(&yc)
            .map(|(row, yi)| yi - row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let mut g = vec![0.0; p];
        for (row, ri) in xc.iter().zip(&r) {
            for j in 0..p {
                g[j] -= 2.0 * row[j] * ri / nf;
            }
        }
        for j in 0..p {
            g[j] += 2.0 * l2 * b[j];
        }
        g
    };
    let soft = |z: f64| z.signum() * (z.abs() - thresh).max(0.0);

    let max_iter = 2_000_000;
    let mut b = vec![0.0; p];
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut f = obj(&b);
    let mut checkpoint = f;
    for it in 1..=max_iter {
        let g = grad(&z);
        let next: Vec<f64> = (0..p).map(|j| soft(z[j] - step * g[j])).collect();
        let fn_ = obj(&next);
        if fn_ > f {
            // Restart momentum when the objective goes up.
            t = 1.0;
            z = b.clone();
        } else {
            let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            z = (0..p).map(|j| next[j] + (t - 1.0) / tn * (next[j] - b[j])).collect();
            t = tn;
            b = next;
            f = fn_;
        }
        if it % 100 == 0 {
            if checkpoint - f <= 1e-15 * (1.0 + f.abs()) {
                let intercept = ymean - b.iter().zip(&xmean).map(|(c, m)| c * m).sum::<f64>();
                return Ok(ReferenceFit {
                    intercept,
                    objective: penalized_objective(x, y, intercept, &b, lambda, alpha),
                    coefficients: b,
                    iterations: it,
                });
            }
            checkpoint = f;
        }
    }
    Err(DprError::NotConverged {
        iterations: max_iter,
        last_change: checkpoint - f,
    })
}

/// Largest violation of the optimality conditions of
/// [`penalized_objective`] at `(b0, b)`: for each coordinate the gradient
/// of the smooth part must lie in `-lambda * alpha * d|b_j|`. The intercept
/// condition is included as a plain gradient.
pub fn kkt_violation(x: &[Vec<f64>], y: &[f64], b0: f64, b: &[f64], lambda: f64, alpha: f64) -> f64 {
    let nf = y.len() as f64;
    let p = b.len();
    let r: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, yi)| yi - b0 - row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>())
        .collect();
    let mut worst = (2.0 / nf * r.iter().sum::<f64>()).abs();
    for j in 0..p {
        let corr = 2.0 / nf * x.iter().zip(&r).map(|(row, ri)| row[j] * ri).sum::<f64>();
        let smooth = corr - 2.0 * lambda * (1.0 - alpha) * b[j];
        let l1 = lambda * alpha;
        let v = if b[j] == 0.0 {
            (smooth.abs() - l1).max(0.0)
        } else {
            (smooth - l1 * b[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 1, 2, 3], &[0, 0, 0, 0]), 0.0);
        // Contingency of {0,0,1,1,2,2} vs {0,0,0,1,1,1}: index 2, sums 3 and 6, n = 6.
        let ari = adjusted_rand_index(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 1]);
        let expected = (2.0 - 3.0 * 6.0 / 15.0) / (4.5 - 3.0 * 6.0 / 15.0);
        assert!((ari - expected).abs() < 1e-15);
    }

    #[test]
    fn brute_force_basic_shapes() {
        let pts: Vec<Vec<f64>> = [0.0, 0.1, 0.2, 5.0, 5.1, 5.2, 20.0].iter().map(|&v| vec![v]).collect();
        let l = brute_force_dbscan(&pts, 0.15, 2, false);
        assert_eq!(l, vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1), None]);
        assert_eq!(brute_force_dbscan(&pts, 0.15, 5, false), vec![None; 7]);
    }

    #[test]
    fn reference_solves_ols_and_zeroes_out() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let fit = reference_objective_min(&x, &y, 0.0, 1.0).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-6);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-6);
        assert!((fit.intercept - 1.0).abs() < 1e-5);
        let fit = reference_objective_min(&x, &y, 1e6, 1.0).unwrap();
        assert_eq!(fit.coefficients, vec![0.0, 0.0]);
    }

    #[test]
    fn same_partition_ignores_names() {
        assert!(same_partition(&[Some(0), Some(1), None], &[Some(3), Some(2), None]));
        assert!(!same_partition(&[Some(0), Some(0)], &[Some(0), Some(1)]));
        assert!(!same_partition(&[Some(0), None], &[Some(0), Some(1)]));
    }
}
