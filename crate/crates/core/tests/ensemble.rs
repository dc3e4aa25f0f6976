use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textsr::ensemble::{
    average_outputs, greedy_search, score_combination, Combination, EvalItem, ModelPool, PsnrScorer,
};
use textsr::metrics::Psnr;
use textsr::{init_network, parse_spec, Tensor};

fn eval_items(rng: &mut ChaCha8Rng, n: usize) -> Vec<EvalItem> {
    (0..n)
        .map(|i| {
            let (h, w) = (2 * rng.gen_range(9..16), rng.gen_range(20..40));
            let hr = Tensor::from_fn(1, h, w, |_, _, _| rng.gen_range(0.0..1.0));
            let lr_upscaled = hr.map(|v| (v * 0.8 + 0.1).clamp(0.0, 1.0));
            EvalItem { id: format!("img{i}"), lr_upscaled, hr, text: None }
        })
        .collect()
}

fn random_pool(seed: u64, models: usize) -> ModelPool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = ModelPool::new(eval_items(&mut rng, 3)).unwrap();
    let spec = parse_spec("4(5)-2(3)-1(3)").unwrap();
    for m in 0..models {
        let net = init_network(&spec, 0.2, seed * 100 + m as u64).unwrap();
        pool.add_network(format!("m{m:02}"), &net).unwrap();
    }
    pool
}

#[test]
fn averaging_copies_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 1..=20 {
        let t = Tensor::from_fn(1, 7, 9, |_, _, _| rng.gen_range(0.0..1.0));
        let copies: Vec<&Tensor> = std::iter::repeat_n(&t, k).collect();
        assert_eq!(average_outputs(&copies).unwrap(), t);
    }
}

#[test]
fn greedy_rounds_have_k_members_and_never_lose_to_singles() {
    for seed in 0..6 {
        let pool = random_pool(seed, 5);
        let scorer = PsnrScorer::default();
        let out = greedy_search(&pool, &scorer, 6).unwrap();
        for (k, r) in out.rounds.iter().enumerate() {
            assert_eq!(r.combination.len(), k + 1);
            assert_eq!(r.scorer_name, "psnr");
        }
        let best_single = pool
            .model_ids()
            .iter()
            .map(|id| score_combination(&Combination::single(id.clone()), &pool, &scorer).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.rounds[0].score, best_single);
        assert!(out.best().score >= best_single);
        for w in out.rounds.windows(2) {
            assert_eq!(&w[1].combination.members()[..w[0].combination.len()], w[0].combination.members());
        }
    }
}

#[test]
fn perfect_pool_hits_cap_and_breaks_ties_by_id() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let items = eval_items(&mut rng, 2);
    let mut pool = ModelPool::new(items.clone()).unwrap();
    for id in ["zeta", "alpha", "mid"] {
        pool.add_outputs(id, items.iter().map(|e| e.hr.clone()).collect()).unwrap();
    }
    let out = greedy_search(&pool, &PsnrScorer::default(), 4).unwrap();
    for (k, r) in out.rounds.iter().enumerate() {
        assert_eq!(r.score, Psnr::CAP_DB);
        assert!(r.combination.members().iter().all(|m| m == "alpha"), "round {}", k + 1);
    }
    assert_eq!(out.best_round, 0);
}

#[test]
fn duplicating_the_whole_multiset_keeps_the_score() {
    let pool = random_pool(9, 3);
    let s = PsnrScorer::default();
    let ids: Vec<String> = pool.model_ids().to_vec();
    let once = Combination::new(ids.clone()).unwrap();
    let twice = Combination::new(ids.iter().chain(&ids).cloned().collect()).unwrap();
    let a = score_combination(&once, &pool, &s).unwrap();
    let b = score_combination(&twice, &pool, &s).unwrap();
    assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
}

#[test]
fn pool_rejects_mismatched_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let items = eval_items(&mut rng, 2);
    let mut pool = ModelPool::new(items.clone()).unwrap();
    assert!(pool.add_outputs("short", vec![items[0].hr.clone()]).is_err());
    assert!(pool
        .add_outputs("wrong", vec![Tensor::zeros(1, 2, 2), Tensor::zeros(1, 2, 2)])
        .is_err());
    pool.add_outputs("ok", items.iter().map(|e| e.hr.clone()).collect()).unwrap();
    assert!(pool.add_outputs("ok", items.iter().map(|e| e.hr.clone()).collect()).is_err());
    assert!(ModelPool::new(Vec::new()).is_err());
}
