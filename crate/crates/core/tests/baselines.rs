use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyfusion::baselines::{
    gnb_fit, gnb_predict, knn_fit, knn_predict, leaderboard_csv, logreg_fit, logreg_loss_and_grad, logreg_predict,
    LeaderboardRow, LogRegConfig, LogRegModel, LEADERBOARD_HEADER,
};
use skyfusion::train::evaluate_labels;

fn random_rows(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let labels = (0..n).map(|i| i % 3).collect();
    (rows, labels)
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let (rows, labels) = random_rows(20, 4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = LogRegModel::zeros(4, vec![0.8, 2.0, 0.6]).unwrap();
    for v in model.weight.iter_mut().chain(model.bias.iter_mut()) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let (_, gw, gb) = logreg_loss_and_grad(&model, &rows, &labels).unwrap();
    let h = 1e-5;
    let numeric = |m: &LogRegModel, pick: &dyn Fn(&mut LogRegModel) -> &mut f64| {
        let mut plus = m.clone();
        *pick(&mut plus) += h;
        let mut minus = m.clone();
        *pick(&mut minus) -= h;
        let lp = logreg_loss_and_grad(&plus, &rows, &labels).unwrap().0;
        let lm = logreg_loss_and_grad(&minus, &rows, &labels).unwrap().0;
        (lp - lm) / (2.0 * h)
    };
    for (j, &g) in gw.iter().enumerate() {
        let n = numeric(&model, &|m| &mut m.weight[j]);
        assert!((n - g).abs() / n.abs().max(g.abs()).max(1e-6) < 1e-4, "weight {j}: {n} vs {g}");
    }
    for (j, &g) in gb.iter().enumerate() {
        let n = numeric(&model, &|m| &mut m.bias[j]);
        assert!((n - g).abs() / n.abs().max(g.abs()).max(1e-6) < 1e-4, "bias {j}: {n} vs {g}");
    }
}

#[test]
fn logistic_regression_fits_separable_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let centres = [[-3.0, -3.0], [3.0, -3.0], [0.0, 4.0]];
    let labels: Vec<usize> = (0..240).map(|i| i % 3).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| centres[c].iter().map(|m| m + rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let model = logreg_fit(&rows, &labels, &[1.0; 3], &LogRegConfig::default()).unwrap();
    let (pred, probs) = logreg_predict(&model, &rows).unwrap();
    assert!(evaluate_labels(&labels, &pred, 3).unwrap().accuracy >= 0.99);
    assert!(probs.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

#[test]
fn logistic_fit_is_seeded() {
    let (rows, labels) = random_rows(50, 3, 4);
    let cfg = LogRegConfig {
        batch_size: 8,
        epochs: 20,
        ..LogRegConfig::default()
    };
    let a = logreg_fit(&rows, &labels, &[1.0; 3], &cfg).unwrap();
    let b = logreg_fit(&rows, &labels, &[1.0; 3], &cfg).unwrap();
    assert_eq!(a, b);
}

/// Scaling every feature by a positive constant shifts each class log-joint
/// by the same amount, so predictions do not change.
#[test]
fn naive_bayes_is_scale_equivariant() {
    let (rows, labels) = random_rows(90, 5, 6);
    let (queries, _) = random_rows(200, 5, 7);
    let k = 3.5;
    let scale = |v: &[Vec<f64>]| v.iter().map(|r| r.iter().map(|x| x * k).collect()).collect::<Vec<Vec<f64>>>();
    let a = gnb_fit(&rows, &labels, 3).unwrap();
    let b = gnb_fit(&scale(&rows), &labels, 3).unwrap();
    let scaled_queries = scale(&queries);
    assert_eq!(gnb_predict(&a, &queries).unwrap(), gnb_predict(&b, &scaled_queries).unwrap());
    for (q, sq) in queries.iter().zip(&scaled_queries) {
        let la = a.log_joint(q).unwrap();
        let lb = b.log_joint(sq).unwrap();
        let shift = 5.0 * k.ln();
        for (x, y) in la.iter().zip(&lb) {
            assert!((x - (y + shift)).abs() < 1e-9 * x.abs().max(1.0));
        }
    }
}

#[test]
fn naive_bayes_needs_two_rows_per_class() {
    let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
    assert!(gnb_fit(&rows, &[0, 0, 1], 2).is_err());
}

#[test]
fn knn_matches_exhaustive_sort() {
    let (rows, labels) = random_rows(200, 6, 11);
    let (queries, _) = random_rows(50, 6, 12);
    for k in [1, 3, 5, 8] {
        let model = knn_fit(&rows, &labels, k).unwrap();
        let got = knn_predict(&model, &queries).unwrap();
        for (q, &g) in queries.iter().zip(&got) {
            let mut order: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
                .collect();
            order.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut votes = [0usize; 3];
            for &(_, i) in &order[..k] {
                votes[labels[i]] += 1;
            }
            let best = *votes.iter().max().unwrap();
            let want = votes.iter().position(|&v| v == best).unwrap();
            assert_eq!(g, want, "k = {k}");
        }
    }
}

#[test]
fn knn_rejects_bad_k() {
    let (rows, labels) = random_rows(4, 2, 0);
    assert!(knn_fit(&rows, &labels, 0).is_err());
    assert!(knn_fit(&rows, &labels, 5).is_err());
}

#[test]
fn leaderboard_ranks_by_accuracy() {
    let row = |m: &str, a: f64| LeaderboardRow {
        model: m.into(),
        accuracy: a,
        precision_w: a,
        recall_w: a,
        f1_w: a,
    };
    let csv = leaderboard_csv(&[row("knn", 0.8), row("ann", 0.95), row("gaussian_nb", 0.8)]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], LEADERBOARD_HEADER);
    assert!(lines[1].starts_with("ann,0.950000"));
    assert!(lines[2].starts_with("knn,"));
    assert!(lines[3].starts_with("gaussian_nb,"));
}
