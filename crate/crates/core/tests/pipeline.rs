mod common;

use std::sync::Arc;

use common::{agreement_and_verdict, distance, exact_share, flip_marked, near_mean_answer};

use fpcode::hard_dist::sample_instance;
use fpcode::harness::{estimate_leakage, AttackConfig, Task};
use fpcode::matrix::Points;
use fpcode::mechanisms::{exact_average, gaussian_average, lloyd_kmeans, power_iteration_top_vector};
use fpcode::pap::{marked_columns, padding_plan, sample_padded, strongly_agrees, PaddingMode};
use fpcode::reductions::{
    averaging_adversary, averaging_alpha, averaging_gamma, clustering_adversary, clustering_alpha,
    clustering_sample_size, sign_signs, svd_adversary, svd_alpha, Clusterer, ClusteringParams, Estimator,
};
use fpcode::rng::{seeded, SimRng};
use rand::Rng;

#[test]
fn agreement_on_padded_inputs_becomes_correlation() {
    let mut rng = seeded(61);
    let cases = 150;
    let (mut agree_sum, mut verdicts) = (0.0, 0usize);
    for _ in 0..cases {
        let n = rng.random_range(1..=6);
        let d0 = rng.random_range(4..=20);
        let plan = padding_plan(rng.random_range(0.1..0.5), PaddingMode::FromOriginal(d0)).unwrap();
        let x = sample_instance(n, d0, &mut rng).unwrap().codebook;
        let (a, v) = agreement_and_verdict(&x, plan.pad_len, 1_000, |y, r| flip_marked(y, 0.05, r), &mut rng);
        agree_sum += a;
        verdicts += usize::from(v);
    }
    let agree = agree_sum / cases as f64;
    let verdict_rate = verdicts as f64 / cases as f64;
    assert!(agree > 0.5 && agree < 1.0, "agreement rate {agree}");
    assert!(verdict_rate >= agree - 3.0 * (agree * (1.0 - agree) / cases as f64).sqrt(), "{verdict_rate} vs {agree}");
}

#[test]
fn exact_share_agreement_spreads_evenly_over_original_columns() {
    let mut rng = seeded(62);
    for _ in 0..20 {
        let d0 = rng.random_range(5..=15);
        let plan = padding_plan(0.1, PaddingMode::FromOriginal(d0)).unwrap();
        let x = sample_instance(3, d0, &mut rng).unwrap().codebook;
        let (a, v) = agreement_and_verdict(&x, plan.pad_len, 4_000, |y, r| exact_share(y, 0.93, r), &mut rng);
        assert_eq!(a, 1.0);
        assert!(v || marked_columns(&x).plus.is_empty() && marked_columns(&x).minus.is_empty());
    }
}

#[test]
fn the_same_share_below_the_threshold_fails_both_predicates() {
    let mut rng = seeded(63);
    let plan = padding_plan(0.1, PaddingMode::FromOriginal(10)).unwrap();
    let x = loop {
        let x = sample_instance(2, 10, &mut rng).unwrap().codebook;
        if !marked_columns(&x).plus.is_empty() {
            break x;
        }
    };
    let (a, v) = agreement_and_verdict(&x, plan.pad_len, 4_000, |y, r| exact_share(y, 0.85, r), &mut rng);
    assert_eq!(a, 0.0);
    assert!(!v);
}

#[test]
fn agreeing_trials_trace_at_least_as_often() {
    let est: Estimator = Arc::new(|_, p: &dyn Points, rng: &mut SimRng| gaussian_average(p, 0.78, rng));
    let mech = averaging_adversary(est, 1.0).unwrap();
    let config = AttackConfig {
        trials: 300,
        seed: 4,
        d0_override: Some(60),
        ..AttackConfig::new(Task::Averaging, 4, 0.1, 1.0 / 41.0)
    };
    let r = estimate_leakage(&[mech], &config, &mut seeded(config.seed)).unwrap();
    assert!(r.rates.agreement > 0.05 && r.rates.agreement < 0.95, "{:?}", r.rates);
    let given = r.success_rate_given_agreement().unwrap();
    assert!(given >= r.rates.trace_success, "{given} < {}", r.rates.trace_success);
}

#[test]
fn svd_pipeline_traces_with_power_iteration() {
    let est: Estimator =
        Arc::new(|_, p: &dyn Points, rng: &mut SimRng| Ok(power_iteration_top_vector(p, 30, rng)?.vector));
    let (m, neg) = svd_adversary(est, 1.0).unwrap();
    let config = AttackConfig {
        trials: 12,
        seed: 8,
        d0_override: Some(30),
        ..AttackConfig::new(Task::Svd, 3, 0.1, svd_alpha(1.0))
    };
    let r = estimate_leakage(&[m, neg], &config, &mut seeded(config.seed)).unwrap();
    assert_eq!(r.rates.agreement, 1.0);
    assert!(r.rates.trace_success >= 0.75, "{:?}", r.rates);
}

#[test]
fn clustering_pipeline_runs_end_to_end() {
    let (k, z, xi) = (2, 2.0, 1.0);
    let m = clustering_sample_size(k, z, xi).unwrap();
    let alpha = clustering_alpha(1.0, z);
    let config = AttackConfig {
        k,
        z,
        xi,
        trials: 20,
        seed: 2,
        d0_override: Some(40),
        ..AttackConfig::new(Task::Clustering, m / k, 0.1, alpha)
    };
    let clusterer: Clusterer =
        Arc::new(move |p: &dyn Points, rng: &mut SimRng| Ok(lloyd_kmeans(p, k + 1, 20, rng)?.centers));
    let d = config.plan().unwrap().total_width;
    let mech = clustering_adversary(clusterer, ClusteringParams { k, z, lambda: 1.0, xi, n: m, d }).unwrap();
    let r = estimate_leakage(&[mech], &config, &mut seeded(config.seed)).unwrap();
    let rates = r.rates;
    assert!((rates.trace_success + rates.false_accusation + rates.no_accusation - 1.0).abs() < 1e-12);
    assert!(rates.trace_success > 0.0, "{rates:?}");
}

#[test]
fn answers_near_the_mean_strongly_agree() {
    let mut rng = seeded(64);
    for case in 0..300 {
        let lambda = 1.0 + 2.0 * rng.random::<f64>();
        let alpha = averaging_alpha(lambda);
        let d = rng.random_range(1_000..4_000);
        let n = rng.random_range(1..=8);
        let x = sample_padded(n, d, alpha, &mut rng).unwrap().padded;
        let mean = exact_average(&x).unwrap();
        let radius = lambda * averaging_gamma(alpha, d);
        let q = near_mean_answer(&x, &mean, radius, &mut rng);
        assert!(distance(&q, &mean) <= radius + 1e-9, "case {case}");
        assert!(strongly_agrees(&sign_signs(&q), &x).unwrap(), "case {case}");
    }
}
