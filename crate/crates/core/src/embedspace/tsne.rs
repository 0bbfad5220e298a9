//! Exact t-SNE with PCA initialisation.

use std::thread;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_dimensions, rank_order, similarity, EmbedError, EmbeddingVector, Embeddings, Neighbor, ProjectionPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub dims: usize,
    pub seed: u64,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            dims: 2,
            seed: 0,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
        }
    }
}

impl TsneConfig {
    pub fn new(dims: usize, seed: u64) -> Self {
        TsneConfig { dims, seed, ..TsneConfig::default() }
    }

    /// Perplexity actually used for `n` points: at most (n-1)/3.
    pub fn effective_perplexity(&self, n: usize) -> f64 {
        self.perplexity.min((n as f64 - 1.0) / 3.0).max(1.0)
    }
}

const MIN_GAIN: f64 = 0.01;
const INIT_SCALE: f64 = 1e-4;
const JITTER: f64 = 1e-8;

fn workers(n: usize) -> usize {
    let avail = thread::available_parallelism().map_or(1, |p| p.get());
    avail.min(n / 64).max(1)
}

/// Runs `f(row_index, row)` over the `width`-wide rows of `buf` on scoped
/// threads. Each row is written by exactly one thread, so results do not
/// depend on scheduling.
fn par_rows<F>(buf: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let rows = buf.len() / width;
    let threads = workers(rows);
    if threads == 1 {
        for (i, row) in buf.chunks_mut(width).enumerate() {
            f(i, row);
        }
        return;
    }
    let per = rows.div_ceil(threads);
    thread::scope(|s| {
        for (c, chunk) in buf.chunks_mut(per * width).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (r, row) in chunk.chunks_mut(width).enumerate() {
                    f(c * per + r, row);
                }
            });
        }
    });
}

/// Symmetric joint probabilities from squared distances.
fn joint_probabilities(d2: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    par_rows(&mut cond, n, |i, row| {
        let dist = &d2[i * n..(i + 1) * n];
        let dmin = (0..n).filter(|&j| j != i).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0_f64, f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j == i {
                    row[j] = 0.0;
                    continue;
                }
                let shifted = dist[j] - dmin;
                let p = (-shifted * beta).exp();
                row[j] = p;
                sum += p;
                weighted += shifted * p;
            }
            let entropy = sum.ln() + beta * weighted / sum;
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    });
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    joint
}

/// Top principal-component scores, signs fixed so each column's largest
/// magnitude entry is positive.
fn pca_init(x: &[&[f64]], dims: usize) -> Vec<f64> {
    let n = x.len();
    let d = x[0].len();
    let mut centered = DMatrix::<f64>::zeros(n, d);
    for c in 0..d {
        let mean = x.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        for r in 0..n {
            centered[(r, c)] = x[r][c] - mean;
        }
    }
    let scores = if n <= d {
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut s = DMatrix::<f64>::zeros(n, dims);
        for (k, &idx) in order.iter().take(dims).enumerate() {
            let scale = eig.eigenvalues[idx].max(0.0).sqrt();
            for r in 0..n {
                s[(r, k)] = eig.eigenvectors[(r, idx)] * scale;
            }
        }
        s
    } else {
        let cov = centered.transpose() * &centered;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut basis = DMatrix::<f64>::zeros(d, dims);
        for (k, &idx) in order.iter().take(dims).enumerate() {
            basis.set_column(k, &eig.eigenvectors.column(idx));
        }
        &centered * basis
    };
    let mut y = vec![0.0; n * dims];
    for k in 0..dims.min(scores.ncols()) {
        let col = scores.column(k);
        let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            y[r * dims + k] = sign * col[r];
        }
    }
    let first: Vec<f64> = (0..n).map(|r| y[r * dims]).collect();
    let mean = first.iter().sum::<f64>() / n as f64;
    let std = (first.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if std > 0.0 && std.is_finite() {
        for v in y.iter_mut() {
            *v *= INIT_SCALE / std;
        }
    } else {
        y.iter_mut().for_each(|v| *v = 0.0);
    }
    y
}

/// Projects every embedding to `config.dims` dimensions. Points come back in
/// task-id order with empty categories.
pub fn project_tsne(embeddings: &Embeddings, config: &TsneConfig) -> Result<Vec<ProjectionPoint>, EmbedError> {
    let n = embeddings.len();
    let dims = config.dims;
    if dims != 2 && dims != 3 {
        return Err(EmbedError::InvalidDims(dims));
    }
    if n < 5 {
        return Err(EmbedError::TooFewPoints(n));
    }
    check_dimensions(embeddings)?;
    let x: Vec<&[f64]> = embeddings.values().map(|v| v.values()).collect();

    let mut d2 = vec![0.0; n * n];
    par_rows(&mut d2, n, |i, row| {
        for j in 0..n {
            row[j] = x[i].iter().zip(x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    });
    let p = joint_probabilities(&d2, n, config.effective_perplexity(n));
    drop(d2);

    let mut y = pca_init(&x, dims);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter = Normal::new(0.0, JITTER).expect("valid jitter scale");
    for v in y.iter_mut() {
        *v += jitter.sample(&mut rng);
    }

    let mut update = vec![0.0; n * dims];
    let mut gains = vec![1.0_f64; n * dims];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![0.0; n * dims];
    for iter in 0..config.iterations {
        let exaggerating = iter < config.exaggeration_iterations;
        let exaggeration = if exaggerating { config.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating { 0.5 } else { 0.8 };

        let yr = &y;
        par_rows(&mut num, n, |i, row| {
            let yi = &yr[i * dims..(i + 1) * dims];
            for j in 0..n {
                row[j] = if i == j {
                    0.0
                } else {
                    let yj = &yr[j * dims..(j + 1) * dims];
                    let d: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
                    1.0 / (1.0 + d)
                };
            }
        });
        let z: f64 = num.chunks(n).map(|row| row.iter().sum::<f64>()).sum();
        let (numr, pr) = (&num, &p);
        par_rows(&mut grad, dims, |i, g| {
            g.iter_mut().for_each(|v| *v = 0.0);
            let yi = &yr[i * dims..(i + 1) * dims];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = numr[i * n + j];
                let mult = (exaggeration * pr[i * n + j] - w / z) * w;
                let yj = &yr[j * dims..(j + 1) * dims];
                for k in 0..dims {
                    g[k] += 4.0 * mult * (yi[k] - yj[k]);
                }
            }
        });
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(EmbedError::NonFiniteGradient { iteration: iter });
        }
        for idx in 0..n * dims {
            gains[idx] = if grad[idx] * update[idx] < 0.0 {
                gains[idx] + 0.2
            } else {
                (gains[idx] * 0.8_f64).max(MIN_GAIN)
            };
            update[idx] = momentum * update[idx] - config.learning_rate * gains[idx] * grad[idx];
            y[idx] += update[idx];
        }
        for k in 0..dims {
            let mean = (0..n).map(|r| y[r * dims + k]).sum::<f64>() / n as f64;
            for r in 0..n {
                y[r * dims + k] -= mean;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFiniteGradient { iteration: iter });
        }
    }

    Ok(embeddings
        .keys()
        .enumerate()
        .map(|(i, id)| ProjectionPoint {
            task_id: id.clone(),
            coords: y[i * dims..(i + 1) * dims].to_vec(),
            category: String::new(),
        })
        .collect())
}

/// Places a new or re-embedded task without re-running t-SNE: the
/// similarity-weighted mean of its `k` nearest projected neighbours.
pub fn place_incremental(
    points: &[ProjectionPoint],
    embeddings: &Embeddings,
    task_id: &str,
    vector: &EmbeddingVector,
    k: usize,
) -> Result<Vec<f64>, EmbedError> {
    let mut candidates = Vec::new();
    for point in points.iter().filter(|p| p.task_id != task_id) {
        if let Some(v) = embeddings.get(&point.task_id) {
            candidates.push(Neighbor { task_id: point.task_id.clone(), similarity: similarity(vector, v)? });
        }
    }
    if candidates.is_empty() {
        return Err(EmbedError::CorpusTooSmall { size: 0, needed: 1 });
    }
    candidates.sort_by(rank_order);
    candidates.truncate(k.max(1));
    let dims = points[0].coords.len();
    let coords_of = |id: &str| &points.iter().find(|p| p.task_id == id).expect("candidate has a point").coords;
    let total: f64 = candidates.iter().map(|c| c.similarity).sum();
    let mut out = vec![0.0; dims];
    for c in &candidates {
        let w = if total > 0.0 { c.similarity / total } else { 1.0 / candidates.len() as f64 };
        for (o, x) in out.iter_mut().zip(coords_of(&c.task_id)) {
            *o += w * x;
        }
    }
    Ok(out)
}
