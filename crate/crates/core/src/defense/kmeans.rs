use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Row-major `k x dim` centroids with cached squared norms.
#[derive(Clone, Debug)]
pub struct Codebook {
    pub dim: usize,
    pub centroids: Vec<f64>,
    norms: Vec<f64>,
    /// Single-precision copy used only to shortlist candidates.
    coarse: Vec<f32>,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.centroids == other.centroids
    }
}

/// Bound on the single-precision error of a shortlist score, relative to
/// `|r|^2 + max |c|^2`. A length-512 dot product in f32 is off by at most
/// about `512 * 2^-24`, so this leaves a wide margin.
const SHORTLIST_TOL: f64 = 1e-4;

/// Rows scored per matrix product in [`Codebook::assign`].
const ASSIGN_BLOCK: usize = 1024;

impl Codebook {
    pub fn new(dim: usize, centroids: Vec<f64>) -> Self {
        let norms = centroids.chunks_exact(dim).map(|c| c.iter().map(|v| v * v).sum()).collect();
        let coarse = centroids.iter().map(|&v| v as f32).collect();
        Self {
            dim,
            centroids,
            norms,
            coarse,
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Nearest centroid (squared Euclidean, ties to the lowest index) for
    /// every row of `data`.
    ///
    /// Scores `|c|^2 - 2 r.c` come from one single-precision matrix
    /// product; every centroid whose score is within the rounding bound of
    /// the best is then compared by the exact double-precision sum of
    /// squared differences, so the answer equals an exhaustive scan.
    pub fn assign(&self, data: &[f64]) -> Vec<usize> {
        self.assign_with_dist(data).into_iter().map(|(j, _)| j).collect()
    }

    /// [`Codebook::assign`] plus the exact squared distance to the pick.
    pub fn assign_with_dist(&self, data: &[f64]) -> Vec<(usize, f64)> {
        let n = data.len() / self.dim;
        let k = self.len();
        let max_norm = self.norms.iter().copied().fold(0.0, f64::max);
        let mut rows = vec![0.0f32; ASSIGN_BLOCK * self.dim];
        let mut dots = vec![0.0f32; ASSIGN_BLOCK * k];
        let mut scores = vec![0.0; k];
        let mut out = Vec::with_capacity(n);
        for block in data.chunks(ASSIGN_BLOCK * self.dim) {
            let m = block.len() / self.dim;
            let (rows, dots) = (&mut rows[..m * self.dim], &mut dots[..m * k]);
            rows.iter_mut().zip(block).for_each(|(d, &v)| *d = v as f32);
            sgemm(m, self.dim, k, rows, &self.coarse, dots);
            for (r, row) in block.chunks_exact(self.dim).zip(dots.chunks_exact(k)) {
                let mut best = f64::INFINITY;
                for ((s, &d), c) in scores.iter_mut().zip(row).zip(&self.norms) {
                    *s = c - 2.0 * d as f64;
                    best = best.min(*s);
                }
                let r_norm: f64 = r.iter().map(|v| v * v).sum();
                let tol = SHORTLIST_TOL * (r_norm + max_norm) + f64::MIN_POSITIVE;
                let mut pick = 0;
                let mut pick_dist = f64::INFINITY;
                for (j, &s) in scores.iter().enumerate() {
                    if s <= best + tol {
                        let d = sq_dist(r, self.centroid(j));
                        if d < pick_dist {
                            pick = j;
                            pick_dist = d;
                        }
                    }
                }
                out.push((pick, pick_dist));
            }
        }
        out
    }
}

/// `c = a * b^T` for row-major `a: m x k`, `b: n x k`.
fn sgemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts pin every buffer to the extent implied by the
    // dimensions and strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Squared Euclidean distance. Eight independent partial sums let the
/// compiler vectorize the loop.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += (x[l] - y[l]) * (x[l] - y[l]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn sq_dist_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 16];
    let (ca, cb) = (a.chunks_exact(16), b.chunks_exact(16));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..16 {
            acc[l] += (x[l] - y[l]) * (x[l] - y[l]);
        }
    }
    acc.iter().sum::<f32>() + tail
}

pub struct KmeansOptions {
    pub k: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded
/// to the points currently farthest from their centroid.
pub fn kmeans(data: &[f64], dim: usize, opts: &KmeansOptions, rng: &mut ChaCha8Rng) -> Codebook {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut book = Codebook::new(dim, plus_plus(data, dim, opts.k, rng));
    let mut prev = f64::INFINITY;
    for it in 0..opts.max_iters {
        let (assign, dists): (Vec<usize>, Vec<f64>) = book.assign_with_dist(data).into_iter().unzip();
        let inertia: f64 = dists.iter().sum();

        let mut sums = vec![0.0; opts.k * dim];
        let mut counts = vec![0usize; opts.k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        let mut far: Vec<usize> = (0..n).collect();
        far.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        let mut far = far.into_iter();
        for (j, &c) in counts.iter().enumerate() {
            let dst = &mut sums[j * dim..(j + 1) * dim];
            if c == 0 {
                let p = far.next().unwrap_or(0);
                dst.copy_from_slice(row(p));
            } else {
                dst.iter_mut().for_each(|s| *s /= c as f64);
            }
        }
        book = Codebook::new(dim, sums);
        if inertia == 0.0 || (prev - inertia) / prev < opts.rel_tol {
            debug!("k-means stopped after {} iterations", it + 1);
            break;
        }
        prev = inertia;
    }
    book
}

/// k-means++ seeding. Distances for the sampling weights are computed in
/// single precision; only the choice of seeds depends on them.
fn plus_plus(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let coarse: Vec<f32> = data.iter().map(|&v| v as f32).collect();
    let row = |i: usize| &coarse[i * dim..(i + 1) * dim];
    let mut picks = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    picks.push(first);
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist_f32(row(i), row(first)) as f64).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        picks.push(pick);
        let c = row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist_f32(row(i), c) as f64);
        }
    }
    picks.iter().flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied()).collect()
}
