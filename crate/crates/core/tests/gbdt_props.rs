mod common;

use common::oracles::brute_force_split;
use ecgboost::gbdt::*;
use ecgboost::rng::rng_from_seed;
use rand::Rng;

fn random_columns(rng: &mut impl Rng, n: usize, f: usize) -> Vec<Vec<f64>> {
    (0..f).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

fn logistic_labels(rng: &mut impl Rng, cols: &[Vec<f64>], noise: f64) -> Vec<u8> {
    (0..cols[0].len())
        .map(|i| {
            let z = 2.0 * cols[0][i] - 1.5 * cols[1][i] + noise * rng.random_range(-1.0..1.0);
            (z > 0.0) as u8
        })
        .collect()
}

fn quick(depth: usize, rounds: usize, rate: f64) -> GbdtParams {
    GbdtParams {
        max_depth: depth,
        learning_rate: 0.3,
        rounds,
        sample_rate: rate,
        ..GbdtParams::default()
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(11);
    let eps = 1e-5;
    for _ in 0..100 {
        let m = rng.random_range(-8.0..8.0);
        let y = rng.random_range(0..2) as f64;
        let (g, h) = logistic_grad_hess(m, y, 1.0);
        let fd_g = (logistic_loss(m + eps, y) - logistic_loss(m - eps, y)) / (2.0 * eps);
        let fd_h = (logistic_grad_hess(m + eps, y, 1.0).0 - logistic_grad_hess(m - eps, y, 1.0).0) / (2.0 * eps);
        assert!((g - fd_g).abs() <= 1e-6, "grad at {m}: {g} vs {fd_g}");
        assert!((h - fd_h).abs() <= 1e-6, "hess at {m}: {h} vs {fd_h}");
        let (gw, hw) = logistic_grad_hess(m, y, 2.5);
        assert!((gw - 2.5 * g).abs() < 1e-12 && (hw - 2.5 * h).abs() < 1e-12);
    }
}

#[test]
fn root_split_matches_exhaustive_enumeration() {
    let p = GbdtParams {
        max_depth: 1,
        min_child_hessian: 0.5,
        ..GbdtParams::default()
    };
    for seed in 0..20 {
        let mut rng = rng_from_seed(100 + seed);
        let n = rng.random_range(8..40);
        let f = rng.random_range(1..5);
        let cols: Vec<Vec<f64>> = (0..f)
            .map(|_| (0..n).map(|_| (rng.random_range(-20..20) as f64) / 4.0).collect())
            .collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.25)).collect();
        let x = Columns::new(cols.clone()).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let tree = fit_tree(&x, &g, &h, &p, &rows).unwrap();
        let got: Vec<(usize, f64, f64)> = tree.splits().collect();
        match brute_force_split(&cols, &g, &h, &p) {
            None => assert!(got.is_empty(), "seed {seed}: unexpected split {got:?}"),
            Some((bf, bt, bg)) => {
                assert_eq!(got.len(), 1, "seed {seed}");
                assert_eq!((got[0].0, got[0].1), (bf, bt), "seed {seed}");
                assert!((got[0].2 - bg).abs() < 1e-9);
            }
        }
    }
}

fn fixtures() -> Vec<(Columns, Vec<u8>, Vec<f64>)> {
    (0..5)
        .map(|s| {
            let mut rng = rng_from_seed(200 + s);
            let n = 150 + 50 * s as usize;
            let cols = random_columns(&mut rng, n, 4);
            let y = logistic_labels(&mut rng, &cols, 1.0 + s as f64);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            (Columns::new(cols).unwrap(), y, w)
        })
        .collect()
}

#[test]
fn training_loss_never_increases_without_sampling() {
    for (i, (x, y, w)) in fixtures().iter().enumerate() {
        for depth in [1, 3, 6] {
            let (_, hist) = fit_boosted_traced(Labeled { x, y, w }, None, &quick(depth, 40, 1.0), 1).unwrap();
            for r in 1..hist.train_loss.len() {
                assert!(
                    hist.train_loss[r] <= hist.train_loss[r - 1] + 1e-12,
                    "fixture {i} depth {depth} round {r}: {} -> {}",
                    hist.train_loss[r - 1],
                    hist.train_loss[r]
                );
            }
        }
    }
}

/// Noisy labels with one weak signal: deep trees start memorizing quickly.
fn overfit_fixture() -> (Columns, Vec<u8>, Columns, Vec<u8>) {
    let mut rng = rng_from_seed(31);
    let make = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
        let cols = random_columns(rng, n, 10);
        let y = (0..n)
            .map(|i| (0.5 * cols[0][i] + rng.random_range(-3.0..3.0) > 0.0) as u8)
            .collect();
        (Columns::new(cols).unwrap(), y)
    };
    let (tx, ty) = make(&mut rng, 300);
    let (vx, vy) = make(&mut rng, 300);
    (tx, ty, vx, vy)
}

#[test]
fn early_stopping_halts_after_patience() {
    let (tx, ty, vx, vy) = overfit_fixture();
    let tw = vec![1.0; ty.len()];
    let vw = vec![1.0; vy.len()];
    let p = GbdtParams {
        max_depth: 6,
        learning_rate: 0.3,
        min_child_hessian: 0.1,
        rounds: 500,
        early_stop_rounds: 20,
        sample_rate: 1.0,
        ..GbdtParams::default()
    };
    let (model, hist) = fit_boosted_traced(
        Labeled { x: &tx, y: &ty, w: &tw },
        Some(Labeled { x: &vx, y: &vy, w: &vw }),
        &p,
        5,
    )
    .unwrap();
    let argmin = (0..hist.valid_loss.len())
        .min_by(|&a, &b| hist.valid_loss[a].total_cmp(&hist.valid_loss[b]))
        .unwrap();
    assert!(hist.valid_loss.len() < p.rounds, "never stopped");
    assert_eq!(model.best_iteration, argmin + 1);
    assert!(hist.valid_loss.len() - (argmin + 1) <= 20);
    assert_eq!(model.trees.len(), hist.valid_loss.len());
}

#[test]
fn same_seed_same_model() {
    let (x, y, w) = &fixtures()[2];
    let p = quick(4, 30, 0.6);
    let a = fit_boosted(Labeled { x, y, w }, None, &p, 9).unwrap();
    let b = fit_boosted(Labeled { x, y, w }, None, &p, 9).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let c = fit_boosted(Labeled { x, y, w }, None, &p, 10).unwrap();
    assert_ne!(a.to_text(), c.to_text());
}

#[test]
fn predictions_invariant_under_increasing_transforms() {
    for (i, (x, y, w)) in fixtures().iter().enumerate() {
        let cols: Vec<Vec<f64>> = (0..x.n_cols()).map(|f| x.column(f).to_vec()).collect();
        let transformed: Vec<Vec<f64>> = cols
            .iter()
            .enumerate()
            .map(|(f, c)| {
                c.iter()
                    .map(|&v| match f % 3 {
                        0 => v.exp(),
                        1 => v * v * v + 5.0 * v,
                        _ => 10.0 * v - 7.0,
                    })
                    .collect()
            })
            .collect();
        let xt = Columns::new(transformed).unwrap();
        // exact greedy: every row seen by every tree
        let p = quick(4, 25, 1.0);
        let a = fit_boosted(Labeled { x, y, w }, None, &p, 3).unwrap();
        let b = fit_boosted(Labeled { x: &xt, y, w }, None, &p, 3).unwrap();
        assert_eq!(predict_columns(&a, x).unwrap(), predict_columns(&b, &xt).unwrap(), "fixture {i}");
    }
}

#[test]
fn sampling_frequencies_follow_gradient_weights() {
    // inclusion of a single draw is proportional to |g| + eps
    let g = [0.1, 0.2, 0.3, 0.4, 1.0];
    let eps = 0.0;
    let total: f64 = g.iter().sum();
    let mut rng = rng_from_seed(77);
    let n_draws = 20000;
    let mut hits = [0usize; 5];
    for _ in 0..n_draws {
        let s = gradient_sample(&g, 0.2, eps, &mut rng);
        assert_eq!(s.rows.len(), 1);
        hits[s.rows[0]] += 1;
        assert!((s.scale * g[s.rows[0]] - total).abs() < 1e-12);
    }
    let chi2: f64 = g
        .iter()
        .zip(hits)
        .map(|(&gi, o)| {
            let e = n_draws as f64 * gi / total;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // 4 degrees of freedom, 0.999 quantile
    assert!(chi2 < 18.47, "chi2 {chi2} hits {hits:?}");
}

#[test]
fn large_regularizer_samples_uniformly() {
    let g = [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    let mut rng = rng_from_seed(78);
    let n_draws = 8000;
    let mut hits = [0usize; 8];
    for _ in 0..n_draws {
        let s = gradient_sample(&g, 0.25, 1e12, &mut rng);
        assert_eq!(s.rows.len(), 2);
        assert!((s.scale - 4.0).abs() < 1e-9);
        for r in s.rows {
            hits[r] += 1;
        }
    }
    let e = 2.0 * n_draws as f64 / 8.0;
    let chi2: f64 = hits.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    // 7 degrees of freedom, 0.99 quantile
    assert!(chi2 < 18.48, "chi2 {chi2} hits {hits:?}");
}

#[test]
fn importance_concentrates_on_informative_features() {
    let mut rng = rng_from_seed(55);
    let n = 400;
    let cols = random_columns(&mut rng, n, 20);
    let y = logistic_labels(&mut rng, &cols, 0.5);
    let w = vec![1.0; n];
    let x = Columns::new(cols).unwrap();
    let model = fit_boosted(Labeled { x: &x, y: &y, w: &w }, None, &quick(3, 40, 0.8), 2).unwrap();
    let imp = importance_gain(&model);
    assert!(imp.iter().all(|&v| v >= 0.0));
    let top: f64 = imp[0] + imp[1];
    let rest: f64 = imp[2..].iter().sum();
    assert!(top > 3.0 * rest, "informative {top} vs noise {rest}");
}

#[test]
fn model_text_round_trip_preserves_predictions() {
    let (x, y, w) = &fixtures()[1];
    let mut model = fit_boosted(Labeled { x, y, w }, None, &quick(5, 20, 0.8), 4).unwrap();
    model.manifest_hash = "abc".into();
    let back = BoostedModel::from_text(&model.to_text(), "abc").unwrap();
    assert_eq!(back, model);
    assert_eq!(predict_columns(&back, x).unwrap(), predict_columns(&model, x).unwrap());
    assert!(BoostedModel::from_text(&model.to_text(), "other").is_err());
}
