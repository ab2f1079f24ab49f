mod common;

use std::collections::BTreeSet;

use common::{dense, dense_augment, random_binary, rng};
use rand::Rng;
use vimm_core::augment::{load_augmented, overlay_augment, save_augmented, synergistic_augment};
use vimm_core::InteractionMatrix;

fn max_dense_diff(m: &InteractionMatrix, want: &[Vec<f64>]) -> f64 {
    let got = dense(m);
    got.iter()
        .zip(want)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn augmented_matrix_invariants_and_dense_oracle() {
    let dir = tempfile::tempdir().unwrap();
    for case in 0..100 {
        let mut r = rng(4000 + case);
        let users = r.random_range(1..=30);
        let items = r.random_range(1..=40);
        let real = {
            let d = r.random_range(0.0..0.3);
            random_binary(&mut r, users, items, d)
        };
        let count = r.random_range(1..=3);
        let virtuals: Vec<InteractionMatrix> = (0..count)
            .map(|_| {
                let d = r.random_range(0.0..0.5);
                random_binary(&mut r, users, items, d)
            })
            .collect();
        let weights: Vec<f64> = (0..count).map(|_| r.random_range(0.0..8.0)).collect();
        let pairs: Vec<(&InteractionMatrix, f64)> = virtuals.iter().zip(weights.iter().copied()).collect();
        let lambda = if case % 10 == 0 { 0.0 } else { r.random_range(0.0..0.5) };

        let aug = overlay_augment(&real, &pairs, lambda, true).unwrap();
        assert_eq!(aug.shape(), real.shape(), "case {case}");
        assert!(
            aug.iter().all(|(_, _, w)| (0.0..=1.0).contains(&w)),
            "case {case}: weight outside [0,1]"
        );
        for (u, i) in real.pairs() {
            assert_eq!(aug.get(u as usize, i), 1.0, "case {case}: real entry ({u},{i})");
        }
        let allowed: BTreeSet<(u32, u32)> = real.pairs().chain(virtuals.iter().flat_map(|v| v.pairs())).collect();
        assert!(
            aug.pairs().all(|p| allowed.contains(&p)),
            "case {case}: support escaped"
        );
        assert!(
            max_dense_diff(&aug, &dense_augment(&real, &pairs, lambda, true)) <= 1e-6,
            "case {case}"
        );
        if lambda == 0.0 {
            assert_eq!(dense(&aug), dense(&real), "case {case}: lambda 0 is not the identity");
        }

        let unclamped = overlay_augment(&real, &pairs, lambda, false).unwrap();
        assert!(max_dense_diff(&unclamped, &dense_augment(&real, &pairs, lambda, false)) <= 1e-6);

        let syn = synergistic_augment(&real, &virtuals[0], weights[0], lambda, true).unwrap();
        assert!(max_dense_diff(&syn, &dense_augment(&real, &pairs[..1], lambda, true)) <= 1e-6);

        let path = dir.path().join(format!("{case}.bin"));
        save_augmented(&aug, &path).unwrap();
        let back = load_augmented(&path).unwrap();
        assert!(
            max_dense_diff(&back, &dense(&aug)) <= 1e-6,
            "case {case}: stored weights drifted"
        );
    }
}
