//! Evaluation: prototype labeling, homogeneity, mass-weighted silhouette,
//! and the combined score.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::srgw::Coupling;

/// Which denominator the weighted silhouette coefficient uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilhouetteDenominator {
    /// `max(ã_i, b̃_i)` with the mass-weighted means (default).
    Weighted,
    /// `max(a_i, b_i)` with unweighted means in the denominator only.
    Unweighted,
}

/// Majority class per prototype column, by received mass.
///
/// Ties go to the smallest class index; columns with zero mass get `-1`.
pub fn prototype_labels(t: &Coupling, y: &[usize]) -> Vec<i64> {
    let tm = t.matrix();
    let (rows, cols) = tm.dim();
    assert_eq!(y.len(), rows, "label vector must have one entry per sample");
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    let mut labels = vec![-1i64; cols];
    for k in 0..cols {
        let mut mass = vec![0.0f64; n_classes];
        let mut total = 0.0;
        for i in 0..rows {
            mass[y[i]] += tm[[i, k]];
            total += tm[[i, k]];
        }
        if total > 0.0 {
            let mut best = 0usize;
            for c in 1..n_classes {
                if mass[c] > mass[best] {
                    best = c;
                }
            }
            labels[k] = best as i64;
        }
    }
    labels
}

/// Homogeneity `1 − H(Y|Ŷ)/H(Y)` of the hard assignment `ŷ_i = argmax_k T_ik`.
///
/// Returns 1 when the class entropy `H(Y)` is zero.
pub fn homogeneity(t: &Coupling, y: &[usize]) -> f64 {
    let tm = t.matrix();
    let (rows, cols) = tm.dim();
    assert_eq!(y.len(), rows, "label vector must have one entry per sample");
    let predicted: Vec<usize> = (0..rows)
        .map(|i| {
            let mut best = 0usize;
            for k in 1..cols {
                if tm[[i, k]] > tm[[i, best]] {
                    best = k;
                }
            }
            best
        })
        .collect();
    conditional_homogeneity(y, &predicted)
}

/// Homogeneity of an explicit hard clustering.
pub(crate) fn conditional_homogeneity(y: &[usize], predicted: &[usize]) -> f64 {
    let n = y.len() as f64;
    let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
    let n_clusters = predicted.iter().copied().max().map_or(0, |m| m + 1);

    let mut class_counts = vec![0.0f64; n_classes];
    for &c in y {
        class_counts[c] += 1.0;
    }
    let h_y: f64 = class_counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum();
    if h_y == 0.0 {
        return 1.0;
    }

    let mut joint = vec![vec![0.0f64; n_classes]; n_clusters];
    let mut cluster_counts = vec![0.0f64; n_clusters];
    for (&c, &k) in y.iter().zip(predicted) {
        joint[k][c] += 1.0;
        cluster_counts[k] += 1.0;
    }
    let mut h_y_given = 0.0;
    for k in 0..n_clusters {
        if cluster_counts[k] == 0.0 {
            continue;
        }
        for &count in &joint[k] {
            if count > 0.0 {
                // −p(y,ŷ) log p(y|ŷ)
                h_y_given -= count / n * (count / cluster_counts[k]).ln();
            }
        }
    }
    1.0 - h_y_given / h_y
}

/// Mass-weighted silhouette score with the default weighted denominator.
pub fn weighted_silhouette(
    z: ArrayView2<'_, f64>,
    labels: &[i64],
    w: ArrayView1<'_, f64>,
) -> Result<f64> {
    weighted_silhouette_with(z, labels, w, SilhouetteDenominator::Weighted)
}

/// Mass-weighted silhouette score.
///
/// Prototypes with zero weight or a negative label are excluded and the
/// weights renormalized. A prototype whose label class is a singleton gets
/// coefficient 0.
pub fn weighted_silhouette_with(
    z: ArrayView2<'_, f64>,
    labels: &[i64],
    w: ArrayView1<'_, f64>,
    denominator: SilhouetteDenominator,
) -> Result<f64> {
    let n = z.nrows();
    if labels.len() != n || w.len() != n {
        return Err(Error::Contract(
            "labels and weights must have one entry per prototype".into(),
        ));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(Error::Contract("weights must be nonnegative".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0 && labels[i] >= 0).collect();
    if active.is_empty() {
        return Err(Error::Contract(
            "no prototype carries mass and a label".into(),
        ));
    }
    let distinct: std::collections::BTreeSet<i64> = active.iter().map(|&i| labels[i]).collect();
    if distinct.len() < 2 {
        return Err(Error::UndefinedNearestCluster);
    }
    let total_w: f64 = active.iter().map(|&i| w[i]).sum();

    let dist = |a: usize, b: usize| -> f64 {
        (0..z.ncols())
            .map(|j| (z[[a, j]] - z[[b, j]]).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut score = 0.0;
    for &i in &active {
        let li = labels[i];
        // Weighted and unweighted intra-cluster means, self excluded.
        let mut intra_wsum = 0.0;
        let mut intra_wd = 0.0;
        let mut intra_count = 0.0;
        let mut intra_d = 0.0;
        // Per-class weighted and unweighted means for the nearest cluster.
        let mut best_b = f64::INFINITY;
        let mut best_b_unweighted = f64::INFINITY;
        for &c in &distinct {
            if c == li {
                continue;
            }
            let mut wsum = 0.0;
            let mut wd = 0.0;
            let mut count = 0.0;
            let mut dsum = 0.0;
            for &j in &active {
                if labels[j] == c {
                    let d = dist(i, j);
                    wsum += w[j];
                    wd += w[j] * d;
                    count += 1.0;
                    dsum += d;
                }
            }
            let b = wd / wsum;
            if b < best_b {
                best_b = b;
                best_b_unweighted = dsum / count;
            }
        }
        for &j in &active {
            if j != i && labels[j] == li {
                let d = dist(i, j);
                intra_wsum += w[j];
                intra_wd += w[j] * d;
                intra_count += 1.0;
                intra_d += d;
            }
        }
        if intra_count == 0.0 {
            // Singleton class: coefficient 0.
            continue;
        }
        let a_tilde = intra_wd / intra_wsum;
        let b_tilde = best_b;
        let denom = match denominator {
            SilhouetteDenominator::Weighted => a_tilde.max(b_tilde),
            SilhouetteDenominator::Unweighted => (intra_d / intra_count).max(best_b_unweighted),
        };
        if denom > 0.0 {
            score += w[i] / total_w * (b_tilde - a_tilde) / denom;
        }
    }
    Ok(score)
}

/// Combined score `½((S+1)/2 + H)`.
pub fn combined_score(silhouette: f64, homogeneity: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&silhouette) {
        return Err(Error::Contract(format!(
            "silhouette must lie in [-1, 1], got {silhouette}"
        )));
    }
    if !(0.0..=1.0).contains(&homogeneity) {
        return Err(Error::Contract(format!(
            "homogeneity must lie in [0, 1], got {homogeneity}"
        )));
    }
    Ok(0.5 * ((silhouette + 1.0) / 2.0 + homogeneity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coupling_from_labels(labels: &[usize], k: usize) -> Coupling {
        let n = labels.len();
        let h = Array1::from_elem(n, 1.0 / n as f64);
        let mut t = Array2::<f64>::zeros((n, k));
        for (i, &l) in labels.iter().enumerate() {
            t[[i, l]] = h[i];
        }
        Coupling::new(t, h).unwrap()
    }

    #[test]
    fn labels_identity_coupling() {
        let y = vec![2usize, 0, 1, 1];
        let t = coupling_from_labels(&[0, 1, 2, 3], 4);
        assert_eq!(prototype_labels(&t, &y), vec![2, 0, 1, 1]);
    }

    #[test]
    fn labels_tie_goes_to_smallest_class() {
        // Equal mass from classes 1 and 3 into column 0.
        let h = Array1::from_elem(2, 0.5);
        let t = Coupling::new(array![[0.5], [0.5]], h).unwrap();
        let y = vec![3usize, 1];
        assert_eq!(prototype_labels(&t, &y), vec![1]);
    }

    #[test]
    fn labels_majority_and_dead_column() {
        let h = Array1::from_elem(10, 0.1);
        let mut t = Array2::<f64>::zeros((10, 2));
        for i in 0..10 {
            t[[i, 0]] = 0.1;
        }
        let t = Coupling::new(t, h).unwrap();
        // 70/30 mix of classes 0 and 1.
        let y = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        assert_eq!(prototype_labels(&t, &y), vec![0, -1]);
    }

    #[test]
    fn homogeneity_pure_clusters() {
        let y = vec![0usize, 0, 1, 1, 2, 2];
        let t = coupling_from_labels(&[0, 0, 1, 1, 2, 2], 3);
        assert_eq!(homogeneity(&t, &y), 1.0);
    }

    #[test]
    fn homogeneity_single_cluster_balanced_classes() {
        let y = vec![0usize, 0, 1, 1];
        let t = coupling_from_labels(&[0, 0, 0, 0], 1);
        assert!(homogeneity(&t, &y).abs() < 1e-15);
    }

    #[test]
    fn homogeneity_hand_entropy_example() {
        let y = vec![0usize, 0, 1, 1];
        let t = coupling_from_labels(&[0, 1, 1, 1], 2);
        // H(Y) = ln 2, H(Y|Ŷ) = (3/4)(ln 3 − (2/3) ln 2).
        let h_cond = 0.75 * (3.0f64.ln() - (2.0 / 3.0) * 2.0f64.ln());
        let expected = 1.0 - h_cond / 2.0f64.ln();
        assert!((homogeneity(&t, &y) - expected).abs() < 1e-12);
        assert!((expected - 0.3113).abs() < 1e-3);
    }

    #[test]
    fn homogeneity_invariant_to_cluster_relabeling() {
        let y = vec![0usize, 1, 0, 2, 1, 2, 0];
        let base = [0usize, 1, 1, 2, 0, 2, 0];
        let relabeled = [2usize, 0, 0, 1, 2, 1, 2];
        let a = conditional_homogeneity(&y, &base);
        let b = conditional_homogeneity(&y, &relabeled);
        assert!((a - b).abs() < 1e-14);
    }

    /// Classical (unweighted) silhouette, written independently.
    fn classical_silhouette(z: &Array2<f64>, labels: &[i64]) -> f64 {
        let n = z.nrows();
        let dist = |a: usize, b: usize| -> f64 {
            (0..z.ncols())
                .map(|j| (z[[a, j]] - z[[b, j]]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mut total = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect();
            if same.is_empty() {
                continue;
            }
            let a: f64 = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
            let mut b = f64::INFINITY;
            let classes: std::collections::BTreeSet<i64> = labels.iter().copied().collect();
            for c in classes {
                if c == labels[i] {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                let m = members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64;
                if m < b {
                    b = m;
                }
            }
            total += (b - a) / a.max(b);
        }
        total / n as f64
    }

    #[test]
    fn silhouette_uniform_weights_reduce_to_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let z = Array2::from_shape_fn((9, 2), |_| rng.random_range(-2.0..2.0));
        let labels: Vec<i64> = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let w = Array1::from_elem(9, 1.0 / 9.0);
        let ours = weighted_silhouette(z.view(), &labels, w.view()).unwrap();
        let classical = classical_silhouette(&z, &labels);
        assert!(
            (ours - classical).abs() < 1e-12,
            "weighted {ours} vs classical {classical}"
        );
    }

    #[test]
    fn silhouette_two_singletons_is_zero() {
        let z = array![[0.0, 0.0], [5.0, 5.0]];
        let labels = vec![0i64, 1];
        let w = Array1::from_elem(2, 0.5);
        let s = weighted_silhouette(z.view(), &labels, w.view()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn silhouette_two_tight_pairs() {
        let z = array![[0.0, 0.0], [0.01, 0.0], [10.0, 0.0], [10.01, 0.0]];
        let labels = vec![0i64, 0, 1, 1];
        let w = Array1::from_elem(4, 0.25);
        let s = weighted_silhouette(z.view(), &labels, w.view()).unwrap();
        assert!(s > 0.95, "score {s}");
    }

    #[test]
    fn silhouette_single_label_errors() {
        let z = array![[0.0], [1.0]];
        let labels = vec![0i64, 0];
        let w = Array1::from_elem(2, 0.5);
        assert!(matches!(
            weighted_silhouette(z.view(), &labels, w.view()),
            Err(Error::UndefinedNearestCluster)
        ));
    }

    #[test]
    fn silhouette_invariant_to_weight_rescaling_and_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let z = Array2::from_shape_fn((8, 2), |_| rng.random_range(-2.0..2.0));
        let labels: Vec<i64> = vec![0, 0, 1, 1, 1, 2, 2, 2];
        let mut w = Array1::from_shape_fn(8, |_| rng.random_range(0.1..1.0));
        let total: f64 = w.sum();
        w.mapv_inplace(|v| v / total);
        let base = weighted_silhouette(z.view(), &labels, w.view()).unwrap();

        let scaled = w.mapv(|v| v * 7.3);
        let s = weighted_silhouette(z.view(), &labels, scaled.view()).unwrap();
        assert!((base - s).abs() < 1e-12);

        // Rotation plus translation.
        let theta: f64 = 0.7;
        let mut moved = Array2::<f64>::zeros((8, 2));
        for i in 0..8 {
            let (x, y) = (z[[i, 0]], z[[i, 1]]);
            moved[[i, 0]] = theta.cos() * x - theta.sin() * y + 3.0;
            moved[[i, 1]] = theta.sin() * x + theta.cos() * y - 1.5;
        }
        let m = weighted_silhouette(moved.view(), &labels, w.view()).unwrap();
        assert!((base - m).abs() < 1e-12);
    }

    #[test]
    fn silhouette_denominator_variants_agree_under_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let z = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<i64> = vec![0, 0, 0, 1, 1, 1];
        let w = Array1::from_elem(6, 1.0 / 6.0);
        let a =
            weighted_silhouette_with(z.view(), &labels, w.view(), SilhouetteDenominator::Weighted)
                .unwrap();
        let b = weighted_silhouette_with(
            z.view(),
            &labels,
            w.view(),
            SilhouetteDenominator::Unweighted,
        )
        .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn combined_score_formula() {
        assert_eq!(combined_score(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(combined_score(-1.0, 0.0).unwrap(), 0.0);
        assert!((combined_score(0.2, 0.8).unwrap() - 0.7).abs() < 1e-15);
        assert!(combined_score(1.5, 0.5).is_err());
        assert!(combined_score(0.5, -0.1).is_err());
    }

    #[test]
    fn combined_score_monotone_in_each_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..200 {
            let s: f64 = rng.random_range(-1.0..0.9);
            let h: f64 = rng.random_range(0.0..0.9);
            let base = combined_score(s, h).unwrap();
            assert!(combined_score(s + 0.1, h).unwrap() > base);
            assert!(combined_score(s, h + 0.1).unwrap() > base);
        }
    }

    #[test]
    fn combined_score_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..1000 {
            let s: f64 = rng.random_range(-1.0..1.0);
            let h: f64 = rng.random_range(0.0..1.0);
            let got = combined_score(s, h).unwrap();
            assert!((got - 0.5 * ((s + 1.0) / 2.0 + h)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&got));
        }
    }
}
