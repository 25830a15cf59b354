use proptest::prelude::*;
use taskgroup::approx::{
    esa_pipeline, hoa_extend, hoa_pipeline, hoa_predict, synthesize_proxy, ApproxError,
};
use taskgroup::model::{CandidateNetwork, PerformanceTable, TaskSet};
use taskgroup::solver::{solve_oracle, solve_optimal, Budget};
use taskgroup::synth::{letter_tasks, template_table};

fn budget(msnt: u64) -> Budget {
    Budget::from_msnt(msnt).unwrap()
}

/// Singles (both sizes) and pairs only.
fn base_of(full: &PerformanceTable) -> PerformanceTable {
    full.filter(|n| n.losses().len() <= 2).unwrap()
}

#[test]
fn five_task_pipeline_searches_36_candidates() {
    let ts = TaskSet::new(["s", "d", "n", "k", "e"]).unwrap();
    let base = base_of(&template_table(&ts, 1000, 500, 3));
    assert_eq!(base.len(), 20);
    let out = hoa_pipeline(&base, budget(3000)).unwrap();
    assert_eq!(out.candidates, 36);
    assert_eq!(out.predicted, 16);
}

#[test]
fn predictions_need_pair_networks() {
    let ts = letter_tasks(4);
    let base = base_of(&template_table(&ts, 1000, 500, 3));
    assert_eq!(hoa_extend(&base).unwrap().predicted.len(), 5);
    let singles = base.filter(|n| n.losses().len() == 1).unwrap();
    assert!(matches!(hoa_pipeline(&singles, budget(2000)), Err(ApproxError::NoPairNetworks)));
}

#[test]
fn weak_pairs_need_no_retraining() {
    // Pairs are poor, so every predicted network is poor too and the cheap
    // singles win.
    let ts = TaskSet::new(["a", "b", "c", "d"]).unwrap();
    let mut nets = vec![];
    for t in ["a", "b", "c", "d"] {
        nets.push(CandidateNetwork::new(format!("{t}@500"), 500, [(t, 0.1)]).unwrap());
    }
    for (x, y) in [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")] {
        nets.push(CandidateNetwork::new(format!("{x}{y}@1000"), 1000, [(x, 0.9), (y, 0.9)]).unwrap());
    }
    let base = PerformanceTable::new(ts, nets).unwrap();
    let out = hoa_pipeline(&base, budget(2000)).unwrap();
    assert!(out.retrain.is_empty());
    assert_eq!(out.solution.network_ids, vec!["a@500", "b@500", "c@500", "d@500"]);
}

#[test]
fn dominant_predicted_triple_is_retrained() {
    // Strong pairs make the predicted triple the best use of 1.5 SNT.
    let ts = TaskSet::new(["a", "b", "c"]).unwrap();
    let mut nets = vec![];
    for t in ["a", "b", "c"] {
        nets.push(CandidateNetwork::new(format!("{t}@1000"), 1000, [(t, 0.9)]).unwrap());
        nets.push(CandidateNetwork::new(format!("{t}@500"), 500, [(t, 0.95)]).unwrap());
    }
    for (x, y) in [("a", "b"), ("b", "c"), ("a", "c")] {
        nets.push(CandidateNetwork::new(format!("{x}{y}@1000"), 1000, [(x, 0.2), (y, 0.2)]).unwrap());
    }
    let base = PerformanceTable::new(ts, nets).unwrap();
    let out = hoa_pipeline(&base, budget(1500)).unwrap();
    assert_eq!(out.retrain, vec!["abc@1000"]);
    assert_eq!(out.solution.network_ids, vec!["abc@1000"]);
    // Certify against the oracle on the combined table.
    let combined = hoa_extend(&base).unwrap().combined().unwrap();
    assert_eq!(solve_oracle(&combined, budget(1500)).unwrap(), out.solution);
}

#[test]
fn true_losses_reproduce_exact_selection() {
    let ts = letter_tasks(4);
    for seed in 0..10 {
        let full = template_table(&ts, 1000, 500, 200 + seed);
        let base = base_of(&full);
        let mut extended = hoa_extend(&base).unwrap();
        extended.predicted = extended
            .predicted
            .iter()
            .map(|p| full.get(p.id()).unwrap().clone())
            .collect();
        let combined = extended.combined().unwrap();
        for b in (1000..=4000).step_by(500) {
            assert_eq!(
                solve_optimal(&combined, budget(b)).unwrap(),
                solve_optimal(&full, budget(b)).unwrap()
            );
        }
    }
}

#[test]
fn predictions_average_g_minus_one_values() {
    let ts = letter_tasks(5);
    let base = base_of(&template_table(&ts, 1000, 500, 9));
    let p = hoa_predict(&base, &["a", "b", "c", "d"], 1000).unwrap();
    for t in ["a", "b", "c", "d"] {
        let pairs: Vec<f64> = ["a", "b", "c", "d"]
            .iter()
            .filter(|&&u| u != t)
            .map(|&u| {
                let mut key = [t, u];
                key.sort_by_key(|x| ts.index_of(x));
                let id = format!("{}{}@1000", key[0], key[1]);
                base.get(&id).unwrap().loss(t).unwrap()
            })
            .collect();
        assert_eq!(pairs.len(), 3);
        let mean = pairs.iter().sum::<f64>() / 3.0;
        assert!((p.loss(t).unwrap() - mean).abs() < 1e-15);
    }
}

#[test]
fn perfect_and_shifted_proxies_are_optimal() {
    let ts = letter_tasks(5);
    let fin = template_table(&ts, 1000, 500, 12);
    let shifted = fin
        .map_losses(|t, l| l + [0.5, 0.25, 1.0, 0.0, 2.0][ts.index_of(t).unwrap()])
        .unwrap();
    for b in (1000..=5000).step_by(500) {
        let same = esa_pipeline(&fin, &fin, budget(b)).unwrap();
        assert_eq!(same.realized.total_loss, same.final_optimal.total_loss);
        assert_eq!(same.gap, 0.0);
        let s = esa_pipeline(&shifted, &fin, budget(b)).unwrap();
        assert!(s.gap.abs() < 1e-12, "budget {b}: gap {}", s.gap);
    }
}

#[test]
fn noisy_proxy_never_beats_the_optimum() {
    let ts = letter_tasks(5);
    let mut gaps = 0.0;
    for seed in 0..20 {
        let fin = template_table(&ts, 1000, 500, 300 + seed);
        let proxy = synthesize_proxy(&fin, 0.1, seed).unwrap();
        for b in [1500, 2500, 3500] {
            let out = esa_pipeline(&proxy, &fin, budget(b)).unwrap();
            let oracle = solve_oracle(&fin, budget(b)).unwrap();
            assert_eq!(out.final_optimal.total_loss, oracle.total_loss);
            assert!(out.realized.total_loss >= oracle.total_loss);
            assert!(out.gap >= 0.0);
            assert!(out.realized.cost_msnt <= b);
            gaps += out.gap;
        }
    }
    assert!(gaps > 0.0, "noise of 0.1 should cost something somewhere");
}

proptest! {
    #[test]
    fn prediction_is_linear_and_order_free(
        seed_a in any::<u64>(), seed_b in any::<u64>(), alpha in 0.0f64..3.0, beta in 0.0f64..3.0
    ) {
        let ts = letter_tasks(4);
        let a = base_of(&template_table(&ts, 1000, 500, seed_a));
        let b = base_of(&template_table(&ts, 1000, 500, seed_b));
        let mut nets = Vec::new();
        for n in a.networks() {
            let (na, nb) = (a.get(n.id()).unwrap(), b.get(n.id()).unwrap());
            let losses: Vec<(String, f64)> = na
                .losses()
                .iter()
                .map(|(t, &l)| (t.clone(), alpha * l + beta * nb.loss(t).unwrap()))
                .collect();
            nets.push(CandidateNetwork::new(n.id(), n.cost_msnt(), losses).unwrap());
        }
        let mix = PerformanceTable::new(ts.clone(), nets).unwrap();
        let group = ["a", "c", "d"];
        let pa = hoa_predict(&a, &group, 1000).unwrap();
        let pb = hoa_predict(&b, &group, 1000).unwrap();
        let pm = hoa_predict(&mix, &group, 1000).unwrap();
        let shuffled = hoa_predict(&a, &["d", "a", "c"], 1000).unwrap();
        prop_assert_eq!(&shuffled, &pa);
        for t in group {
            let expect = alpha * pa.loss(t).unwrap() + beta * pb.loss(t).unwrap();
            prop_assert!((pm.loss(t).unwrap() - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn constant_pairs_predict_the_constant(l in 0.0f64..10.0) {
        let ts = letter_tasks(5);
        let base = base_of(&template_table(&ts, 1000, 500, 1)).map_losses(|_, _| l).unwrap();
        let p = hoa_predict(&base, &["a", "b", "c", "d", "e"], 1000).unwrap();
        for t in ["a", "b", "c", "d", "e"] {
            prop_assert!((p.loss(t).unwrap() - l).abs() <= 1e-12 * (1.0 + l));
        }
    }
}
