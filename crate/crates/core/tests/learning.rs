mod common;

use approx::assert_abs_diff_eq;
use common::*;
use qapool::learning::{
    adversarial_stream, iid_truthful_stream, loss_gradient, offline_best_weights, ogd_run, project_to_simplex,
    regret_bound, total_score, weight_score, LearningConfig, OnlineLearner, Step, WeightVector,
};
use qapool::sampling::{self, sample_rng};
use qapool::{score, Forecast, QaError, RuleSpec};
use rand::Rng;

fn fc(p: &[f64]) -> Forecast {
    Forecast::new(p.to_vec()).unwrap()
}

#[test]
fn weight_score_examples() {
    let q = RuleSpec::quadratic();
    let fs = [fc(&[0.1, 0.9]), fc(&[0.5, 0.5])];
    assert_abs_diff_eq!(weight_score(&q, &fs, &WeightVector::vertex(2, 0), 0).unwrap(), -0.62, epsilon = 1e-12);
    for i in 0..2 {
        for j in 0..2 {
            let ws = weight_score(&q, &fs, &WeightVector::vertex(2, i), j).unwrap();
            assert_abs_diff_eq!(ws, score(&q, &fs[i], j).unwrap(), epsilon = 1e-12);
        }
    }
}

#[test]
fn loss_gradient_examples() {
    let q = RuleSpec::quadratic();
    let fs = [fc(&[1.0, 0.0]), fc(&[0.0, 1.0])];
    let g = loss_gradient(&q, &fs, &WeightVector::uniform(2), 0).unwrap();
    assert_abs_diff_eq!(g[0], -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-12);
    let same = [fc(&[0.3, 0.7]), fc(&[0.3, 0.7]), fc(&[0.3, 0.7])];
    let w = WeightVector::new(vec![0.2, 0.5, 0.3]).unwrap();
    let g = loss_gradient(&RuleSpec::logarithmic(), &same, &w, 1).unwrap();
    assert!(g.iter().all(|x| x.abs() < 1e-12));
}

/// Exact projection onto Δ³ by enumerating faces.
fn face_enumeration(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let shift = (support.iter().map(|&k| y[k]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; m];
        for &k in &support {
            x[k] = y[k] - shift;
        }
        if x.iter().any(|v| *v < 0.0) {
            continue;
        }
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, x);
        }
    }
    best.1
}

#[test]
fn projection_matches_face_enumeration() {
    let p = project_to_simplex(&[1.2, -0.3, 0.1]);
    let oracle = face_enumeration(&[1.2, -0.3, 0.1]);
    assert!(max_abs_diff(p.as_slice(), &oracle) < 1e-15);
    assert!(max_abs_diff(project_to_simplex(&[0.6, 0.6]).as_slice(), &[0.5, 0.5]) < 1e-15);
    assert_eq!(project_to_simplex(&[0.2, 0.3, 0.5]).as_slice(), &[0.2, 0.3, 0.5]);
    let mut rng = sample_rng(31, 0);
    for _ in 0..1000 {
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = project_to_simplex(&y);
        assert!(max_abs_diff(p.as_slice(), &face_enumeration(&y)) < 1e-12, "{y:?}");
        // order preserving
        for a in 0..3 {
            for b in 0..3 {
                if y[a] > y[b] {
                    assert!(p.as_slice()[a] >= p.as_slice()[b]);
                }
            }
        }
    }
}

#[test]
fn single_expert_has_zero_regret() {
    let stream = iid_truthful_stream(3, 1, 200, 4);
    let report = ogd_run(&LearningConfig::new(RuleSpec::quadratic(), 1), &stream).unwrap();
    assert_eq!(report.cumulative_regret, 0.0);
    assert_eq!(report.final_weights.as_slice(), &[1.0]);
}

#[test]
fn truthful_expert_dominates_iid_stream() {
    let stream = iid_truthful_stream(3, 5, 10_000, 7);
    let report = ogd_run(&LearningConfig::new(RuleSpec::quadratic(), 5), &stream).unwrap();
    assert!(report.final_weights.as_slice()[0] >= 0.9, "{:?}", report.final_weights);
    assert!(report.best_weights.as_slice()[0] >= 0.9);
    assert!(report.cumulative_regret <= report.bound);
}

#[test]
fn alternating_stream_stays_within_bound() {
    let q = RuleSpec::quadratic();
    let forecasts = vec![fc(&[0.9, 0.1]), fc(&[0.1, 0.9]), fc(&[0.5, 0.5])];
    let stream: Vec<Step> = (0..4000)
        .map(|t| Step::new(forecasts.clone(), t % 2).unwrap())
        .collect();
    let report = ogd_run(&LearningConfig::new(q, 3), &stream).unwrap();
    assert!(report.bound_is_valid());
    assert!(report.cumulative_regret <= report.bound);
}

#[test]
fn regret_curve_stays_under_bound_column() {
    let q = RuleSpec::quadratic();
    for stream in [
        iid_truthful_stream(3, 4, 2000, 7),
        adversarial_stream(&q, 3, 4, 2000, 2.0 * (2.0f64 / 3.0).sqrt(), 7).unwrap(),
    ] {
        let report = ogd_run(&LearningConfig::new(q, 4), &stream).unwrap();
        let curve = report.curve();
        assert_eq!(curve.len(), 2000);
        assert!(curve.iter().all(|p| p.cumulative_regret <= p.bound));
        assert_abs_diff_eq!(curve.last().unwrap().cumulative_regret, report.cumulative_regret, epsilon = 1e-9);
        assert_abs_diff_eq!(curve.last().unwrap().bound, regret_bound(4, report.exposure_bound, 2000), epsilon = 1e-12);
    }
}

#[test]
fn open_rules_need_an_exposure_bound() {
    let stream = iid_truthful_stream(2, 2, 10, 1);
    let err = ogd_run(&LearningConfig::new(RuleSpec::logarithmic(), 2), &stream).unwrap_err();
    assert!(matches!(err, QaError::Config(_)));
    let mut config = LearningConfig::new(RuleSpec::logarithmic(), 2);
    config.exposure_bound = Some(50.0);
    let report = ogd_run(&config, &stream).unwrap();
    assert_eq!(report.exposure_bound, 50.0);
}

#[test]
fn violations_of_the_exposure_bound_are_counted() {
    let mut learner = OnlineLearner::new(RuleSpec::logarithmic(), 2, 0.1).unwrap();
    learner.observe(&Step::new(vec![fc(&[0.01, 0.99]), fc(&[0.5, 0.5])], 0).unwrap()).unwrap();
    assert_eq!(learner.violations(), 1);
}

fn grid_best_two(rule: &RuleSpec, stream: &[Step], step: f64) -> (f64, f64) {
    let k = (1.0 / step).round() as usize;
    (0..=k)
        .map(|i| {
            let a = i as f64 / k as f64;
            let w = WeightVector::new(vec![a, 1.0 - a]).unwrap();
            (a, total_score(rule, stream, &w).unwrap())
        })
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

#[test]
fn offline_weights_pick_the_always_right_expert() {
    let q = RuleSpec::quadratic();
    let stream: Vec<Step> = (0..20)
        .map(|t| {
            let j = t % 2;
            Step::new(vec![Forecast::vertex(2, j), fc(&[0.6, 0.4])], j).unwrap()
        })
        .collect();
    let (w, total) = offline_best_weights(&q, &stream).unwrap();
    let (a, best) = grid_best_two(&q, &stream, 1e-3);
    assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(w.as_slice()[0], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(total, best, epsilon = 1e-9);
}

#[test]
fn offline_weights_with_identical_experts() {
    let q = RuleSpec::spherical(2.0).unwrap();
    let p = fc(&[0.2, 0.5, 0.3]);
    let stream: Vec<Step> = (0..10).map(|t| Step::new(vec![p.clone(); 3], t % 3).unwrap()).collect();
    let (_, total) = offline_best_weights(&q, &stream).unwrap();
    let single: f64 = stream.iter().map(|s| score(&q, &p, s.outcome).unwrap()).sum();
    assert_abs_diff_eq!(total, single, epsilon = 1e-12);
}

#[test]
fn offline_weights_match_exhaustive_grid() {
    for (k, rule) in [RuleSpec::quadratic(), RuleSpec::logarithmic(), RuleSpec::tsallis(1.5).unwrap()]
        .iter()
        .enumerate()
    {
        for seed in 0..5 {
            let mut rng = sample_rng(32 + k as u64, seed);
            let stream: Vec<Step> = (0..5)
                .map(|_| {
                    let fs = vec![sampling::dirichlet(&mut rng, 3), sampling::dirichlet(&mut rng, 3)];
                    Step::new(fs, sampling::outcome(&mut rng, 3)).unwrap()
                })
                .collect();
            let (w, total) = offline_best_weights(rule, &stream).unwrap();
            let (a, best) = grid_best_two(rule, &stream, 1e-4);
            assert!(total >= best - 1e-9, "{rule}: solver {total} < grid {best}");
            assert!((w.as_slice()[0] - a).abs() <= 1e-3 || (total - best).abs() < 1e-9);
        }
    }
}

/// Mixing over weight vectors never beats playing their mean (concavity in w).
#[test]
fn randomizing_weights_does_not_help() {
    for (k, rule) in convex_rules().iter().enumerate() {
        for i in 0..50 {
            let mut rng = sample_rng(33 + k as u64, i);
            let n = rng.random_range(2..=4);
            let m = rng.random_range(2..=4);
            let fs: Vec<Forecast> = (0..m).map(|_| sampling::dirichlet(&mut rng, n)).collect();
            let j = sampling::outcome(&mut rng, n);
            let support = rng.random_range(2..=5);
            let probs = sampling::weight_vector(&mut rng, support);
            let ws: Vec<Vec<f64>> = (0..support).map(|_| sampling::weight_vector(&mut rng, m)).collect();
            let mean: Vec<f64> = (0..m)
                .map(|e| ws.iter().zip(&probs).map(|(w, q)| q * w[e]).sum())
                .collect();
            let at_mean = weight_score(rule, &fs, &WeightVector::new(mean).unwrap(), j).unwrap();
            let expected: f64 = ws
                .iter()
                .zip(&probs)
                .map(|(w, q)| q * weight_score(rule, &fs, &WeightVector::new(w.clone()).unwrap(), j).unwrap())
                .sum();
            assert!(at_mean >= expected - 1e-9, "{rule}: {at_mean} < {expected}");
        }
    }
}

#[test]
fn weight_vectors_are_validated() {
    assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
    assert!(WeightVector::new(vec![]).is_err());
    assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
    assert!(Step::new(vec![fc(&[0.5, 0.5])], 2).is_err());
    assert!(Step::new(vec![fc(&[0.5, 0.5]), fc(&[0.2, 0.3, 0.5])], 0).is_err());
}
