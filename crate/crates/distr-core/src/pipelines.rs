//! Sequential baselines: k-means, spectral clustering, DR→cluster and
//! cluster→DR, plus the spectral initialization of transport plans.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::affinity::{self, SimilarityGraph, SimilarityKind};
use crate::engine::{build_cz, distr_fit, CxKind, DistrConfig};
use crate::error::{Error, Result};
use crate::numkit::{sym_eig, EIG_TOL};
use crate::srgw::{Coupling, SolverKind};

/// Default Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 300;

/// A hard clustering of N points into `k` groups.
#[derive(Debug, Clone)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    fn new(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l < k));
        Self { labels, k }
    }

    /// Membership plan scaled by uniform weights, `T[i, label_i] = 1/N`.
    pub fn to_coupling(&self) -> Coupling {
        let n = self.labels.len();
        let h = Array1::from_elem(n, 1.0 / n as f64);
        let mut t = Array2::<f64>::zeros((n, self.k));
        for (i, &l) in self.labels.iter().enumerate() {
            t[[i, l]] = h[i];
        }
        Coupling::from_matrix_unchecked(t, h)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Ties in the assignment go to the smallest center index; an emptied
/// cluster is re-seeded to the point farthest from its assigned center.
pub fn lloyd_kmeans(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(Partition, Array2<f64>)> {
    let n = x.nrows();
    let p = x.ncols();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "cluster count must satisfy 1 ≤ k ≤ N={n}, got {k}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows: Vec<&[f64]> = (0..n)
        .map(|i| x.row(i).to_slice().expect("row-major input"))
        .collect();

    // k-means++ seeding.
    let mut centers = Array2::<f64>::zeros((k, p));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let mut best_d2: Vec<f64> = rows
        .iter()
        .map(|r| sq_dist(r, centers.row(0).to_slice().unwrap()))
        .collect();
    for c in 1..k {
        let total: f64 = best_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in best_d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // All remaining distances zero (duplicate points).
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&x.row(chosen));
        for (i, r) in rows.iter().enumerate() {
            let d = sq_dist(r, centers.row(c).to_slice().unwrap());
            if d < best_d2[i] {
                best_d2[i] = d;
            }
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..max_iter {
        // Assignment step.
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(r, centers.row(c).to_slice().unwrap());
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }

        // Update step.
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, p));
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..p {
                sums[[l, j]] += x[[i, j]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed to the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(rows[a], centers.row(labels[a]).to_slice().unwrap());
                        let db = sq_dist(rows[b], centers.row(labels[b]).to_slice().unwrap());
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).assign(&x.row(far));
                labels[far] = c;
                changed = true;
            } else {
                for j in 0..p {
                    centers[[c, j]] = sums[[c, j]] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok((Partition::new(labels, k), centers))
}

/// Spectral clustering on the symmetric-normalized Laplacian.
///
/// Takes the bottom-`k` eigenvectors of `L_sym = I − D^{−1/2} C D^{−1/2}`,
/// normalizes the rows to unit length and clusters them with k-means.
pub fn spectral_clustering(c: &SimilarityGraph, k: usize, seed: u64) -> Result<Partition> {
    let n = c.size();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "cluster count must satisfy 1 ≤ k ≤ N={n}, got {k}"
        )));
    }
    if !c.is_nonnegative() {
        return Err(Error::Contract(
            "spectral clustering needs a nonnegative similarity matrix".into(),
        ));
    }
    if k == 1 {
        return Ok(Partition::new(vec![0; n], 1));
    }
    let w = c.matrix();
    let mut inv_sqrt_deg = Array1::<f64>::zeros(n);
    for i in 0..n {
        let d = w.row(i).sum();
        if d <= 0.0 {
            return Err(Error::DegenerateGraph(format!("node {i} has zero degree")));
        }
        inv_sqrt_deg[i] = 1.0 / d.sqrt();
    }
    let mut lap = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let v = -inv_sqrt_deg[i] * w[[i, j]] * inv_sqrt_deg[j];
            lap[[i, j]] = if i == j { 1.0 + v } else { v };
        }
    }
    let eig = sym_eig(lap.view(), EIG_TOL)?;
    // Eigenvalues are sorted descending; the bottom-k live in the last cols.
    let mut embed = Array2::<f64>::zeros((n, k));
    for (dst, src) in (n - k..n).enumerate() {
        embed.column_mut(dst).assign(&eig.eigenvectors.column(src));
    }
    for mut row in embed.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    let (partition, _) = lloyd_kmeans(embed.view(), k, seed, KMEANS_MAX_ITER)?;
    Ok(partition)
}

/// Clamp negative similarities to zero so Gram-style graphs can seed the
/// spectral steps.
fn nonnegative_view(c: &SimilarityGraph) -> Result<SimilarityGraph> {
    if c.is_nonnegative() {
        return Ok(c.clone());
    }
    let clamped = c.matrix().mapv(|v| v.max(0.0));
    SimilarityGraph::new(clamped, c.weights().clone(), None, SimilarityKind::Custom)
}

/// Relabel clusters by their smallest member index, so that the labeling is
/// independent of the k-means seeding order. With one cluster per node this
/// makes the membership plan the identity alignment.
fn canonical_labels(partition: &Partition) -> Vec<usize> {
    let k = partition.k;
    let mut first_member = vec![usize::MAX; k];
    for (i, &l) in partition.labels.iter().enumerate() {
        if first_member[l] == usize::MAX {
            first_member[l] = i;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| first_member[c]);
    let mut relabel = vec![0usize; k];
    for (rank, &c) in order.iter().enumerate() {
        relabel[c] = rank;
    }
    partition.labels.iter().map(|&l| relabel[l]).collect()
}

/// Spectral initialization of a transport plan: cluster the input graph into
/// `n` groups, form the membership plan scaled by `h`, and (for mirror
/// descent) smooth it with the product coupling to keep it strictly
/// positive: `0.95 T + 0.05 h 𝟙ᵀ/n`.
pub(crate) fn spectral_coupling_init(
    cx: &SimilarityGraph,
    n: usize,
    seed: u64,
    solver: SolverKind,
) -> Result<Coupling> {
    let clamped = nonnegative_view(cx)?;
    let partition = spectral_clustering(&clamped, n, seed)?;
    membership_coupling(&partition, cx.weights().clone(), solver)
}

/// Membership plan from k-means on the raw row profiles of the similarity
/// matrix. Exact duplicate rows always share a cluster here, unlike in the
/// spectral embedding, where the antisymmetric eigenvector of a duplicated
/// node pair (eigenvalue 1) can enter the bottom-k set and split them.
pub(crate) fn row_profile_coupling_init(
    cx: &SimilarityGraph,
    n: usize,
    seed: u64,
    solver: SolverKind,
) -> Result<Coupling> {
    let (partition, _) = lloyd_kmeans(cx.matrix(), n, seed, KMEANS_MAX_ITER)?;
    membership_coupling(&partition, cx.weights().clone(), solver)
}

/// Canonically relabeled membership plan scaled by `h`, smoothed with the
/// product coupling for mirror descent.
fn membership_coupling(
    partition: &Partition,
    h: Array1<f64>,
    solver: SolverKind,
) -> Result<Coupling> {
    let labels = canonical_labels(partition);
    let big_n = labels.len();
    let n = partition.k;
    let mut t = Array2::<f64>::zeros((big_n, n));
    for (i, &l) in labels.iter().enumerate() {
        t[[i, l]] = h[i];
    }
    if solver == SolverKind::MirrorDescent {
        let unif = 1.0 / n as f64;
        for i in 0..big_n {
            for j in 0..n {
                t[[i, j]] = 0.95 * t[[i, j]] + 0.05 * h[i] * unif;
            }
        }
    }
    Coupling::new(t, h)
}

/// DR then clustering: embed with `n = N`, spectral-cluster the embedding
/// similarity, and return the per-cluster centroids in embedding space with
/// their masses and the partition.
///
/// The per-sample embedding is the barycentric projection of the fit: the
/// semi-relaxed plan may concentrate mass on fewer than `N` prototypes, in
/// which case each sample sits at its assigned prototype.
pub fn dr_then_cluster(
    x: ArrayView2<'_, f64>,
    config: &DistrConfig,
) -> Result<(Array2<f64>, Array1<f64>, Partition)> {
    let big_n = x.nrows();
    let mut dr_config = config.clone();
    dr_config.n = big_n;
    let fit = distr_fit(x, &dr_config)?;
    let z_tilde = crate::engine::barycentric_projection(&fit.coupling, fit.z.view());

    let c_emb = build_cz(config.cz_kind, z_tilde.view())?;
    let partition = spectral_clustering(&nonnegative_view(&c_emb)?, config.n, config.seed)?;

    let t_tilde = partition.to_coupling();
    let h_tilde = t_tilde.target_masses();
    // diag(h̃)^{-1} T̃ᵀ Z̃: per-cluster means.
    let weighted = t_tilde.matrix().t().dot(&z_tilde);
    let mut prototypes = weighted;
    for (k, mut row) in prototypes.rows_mut().into_iter().enumerate() {
        if h_tilde[k] > 0.0 {
            row.mapv_inplace(|v| v / h_tilde[k]);
        }
    }
    Ok((prototypes, h_tilde, partition))
}

/// Cap the affinity perplexity for a reduced point set.
fn clamp_perplexity(perplexity: f64, points: usize) -> f64 {
    let cap = (points as f64 / 2.0).max(1.5);
    perplexity.min(cap)
}

/// Clustering then DR: spectral-cluster the inputs, average each cluster in
/// input space, and embed the centroids.
///
/// The clustering affinity is the entropic affinity at the run's perplexity
/// regardless of `cx_kind` (Gram matrices are not valid affinities).
pub fn cluster_then_dr(
    x: ArrayView2<'_, f64>,
    config: &DistrConfig,
) -> Result<(Array2<f64>, Array1<f64>, Partition)> {
    let big_n = x.nrows();
    let partition = if config.n == 1 {
        Partition::new(vec![0; big_n], 1)
    } else {
        let perp = clamp_perplexity(config.perplexity, big_n);
        let aff = affinity::entropic_affinity(x, perp, affinity::ENTROPY_TOL)?;
        spectral_clustering(&aff, config.n, config.seed)?
    };

    let t_hat = partition.to_coupling();
    let h_hat = t_hat.target_masses();
    let weighted = t_hat.matrix().t().dot(&x);
    let mut centroids = weighted;
    for (k, mut row) in centroids.rows_mut().into_iter().enumerate() {
        if h_hat[k] > 0.0 {
            row.mapv_inplace(|v| v / h_hat[k]);
        }
    }

    // Plain DR on the centroids: one prototype per centroid, near-identity
    // plan from the spectral initialization.
    let mut dr_config = config.clone();
    dr_config.n = centroids.nrows();
    if config.cx_kind == CxKind::EntropicAffinity {
        dr_config.perplexity = clamp_perplexity(config.perplexity, centroids.nrows());
    }
    let fit = distr_fit(centroids.view(), &dr_config)?;

    // Reorder prototypes into centroid order through the fit coupling when
    // it is an unambiguous assignment.
    let aligned = align_to_rows(&fit.coupling, &fit.z);
    Ok((aligned, h_hat, partition))
}

/// Map each input row to its argmax prototype; when that is a bijection,
/// return the prototypes permuted into row order, otherwise as-is.
fn align_to_rows(coupling: &Coupling, z: &Array2<f64>) -> Array2<f64> {
    let t = coupling.matrix();
    let (rows, cols) = t.dim();
    if rows != cols {
        return z.clone();
    }
    let mut assignment = vec![0usize; rows];
    let mut seen = vec![false; cols];
    for i in 0..rows {
        let mut best = 0usize;
        for k in 1..cols {
            if t[[i, k]] > t[[i, best]] {
                best = k;
            }
        }
        if seen[best] {
            return z.clone();
        }
        seen[best] = true;
        assignment[i] = best;
    }
    let mut out = Array2::<f64>::zeros(z.dim());
    for (i, &k) in assignment.iter().enumerate() {
        out.row_mut(i).assign(&z.row(k));
    }
    out
}
