mod common;

use common::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use vimm_core::eval::{evaluate_targets, ndcg_at_k, rank_items, recall_at_k, top_k};
use vimm_core::recsys::Scorer;
use vimm_core::{InteractionMatrix, MatrixKind};

#[test]
fn hand_values() {
    let ranked: Vec<u32> = (0..20).collect();
    assert_eq!(recall_at_k(&ranked, &[2, 5], 10), 1.0);
    assert_eq!(recall_at_k(&ranked, &[0, 11, 12, 13], 10), 0.25);
    assert!((ndcg_at_k(&ranked, &[1], 10) - 1.0 / 3f64.log2()).abs() < 1e-12);
    assert!((ndcg_at_k(&ranked, &[1], 10) - 0.63093).abs() < 1e-5);
    assert_eq!(ndcg_at_k(&ranked, &[12], 10), 0.0);
    assert_eq!(recall_at_k(&ranked, &[12], 10), 0.0);
    assert_eq!(ndcg_at_k(&ranked, &[0, 1, 2], 10), 1.0);
}

#[test]
fn permutations_below_k_change_nothing() {
    let mut r = rng(8);
    for _ in 0..1000 {
        let n = r.random_range(1..60);
        let k = r.random_range(1..=n);
        let mut ranked: Vec<u32> = (0..n as u32).collect();
        ranked.shuffle(&mut r);
        let rel_count = r.random_range(0..=n);
        let mut relevant: Vec<u32> = (0..n as u32).collect();
        relevant.shuffle(&mut r);
        relevant.truncate(rel_count);
        let (recall, ndcg) = (recall_at_k(&ranked, &relevant, k), ndcg_at_k(&ranked, &relevant, k));
        assert!((0.0..=1.0).contains(&recall) && (0.0..=1.0).contains(&ndcg));

        let mut tail_shuffled = ranked.clone();
        tail_shuffled[k..].shuffle(&mut r);
        assert_eq!(recall_at_k(&tail_shuffled, &relevant, k), recall);
        assert_eq!(ndcg_at_k(&tail_shuffled, &relevant, k), ndcg);

        // Recall also ignores order inside the top K.
        let mut head_shuffled = ranked.clone();
        head_shuffled[..k].shuffle(&mut r);
        assert_eq!(recall_at_k(&head_shuffled, &relevant, k), recall);
    }
}

#[test]
fn top_k_is_a_prefix_of_the_full_ranking() {
    let mut r = rng(9);
    for _ in 0..200 {
        let n = r.random_range(1..80);
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64).collect();
        let mut exclude: Vec<u32> = (0..n as u32).filter(|_| r.random::<f64>() < 0.2).collect();
        exclude.sort_unstable();
        let full = rank_items(&scores, &exclude);
        for k in [1, 3, 10, 100] {
            assert_eq!(top_k(&scores, &exclude, k), full[..k.min(full.len())]);
        }
        for w in full.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            assert!(scores[a] > scores[b] || (scores[a] == scores[b] && a < b));
        }
    }
}

/// Scores item `i` as `-(i + u)` modulo the item count: a fixed, known ranking.
struct Rotation(usize, usize);

impl Scorer for Rotation {
    fn user_count(&self) -> usize {
        self.0
    }

    fn item_count(&self) -> usize {
        self.1
    }

    fn score_user(&self, user: usize, out: &mut [f64]) {
        for (i, s) in out.iter_mut().enumerate() {
            *s = -(((i + self.1 - user % self.1) % self.1) as f64);
        }
    }
}

#[test]
fn evaluation_excludes_training_items_and_averages_users() {
    // User 0 ranks 0,1,2,...; user 1 ranks 1,2,3,...
    let scorer = Rotation(2, 30);
    let train = InteractionMatrix::from_pairs(2, 30, MatrixKind::Real, [(0, 0), (1, 1)]).unwrap();
    let m = evaluate_targets(&scorer, &train, &[(0, 3), (1, 20)], 10);
    assert_eq!(m.users, vec![0, 1]);
    assert_eq!(m.user_recall, vec![1.0, 0.0]);
    // Item 3 is at rank 3 once item 0 is excluded.
    assert!((m.user_ndcg[0] - 1.0 / 4f64.log2()).abs() < 1e-12);
    assert_eq!(m.recall, 0.5);
}
