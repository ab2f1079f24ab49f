//! Full-ranking evaluation: Recall@K and NDCG@K over all items a user has not
//! trained on, per-sparsity-group breakdowns and the item cold-start protocol.

mod cold;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use cold::{cold_start_split, ColdStartSplit};

use crate::corpus::SplitBundle;
use crate::error::{invalid, Error, Result};
use crate::matrix::InteractionMatrix;
use crate::recsys::Scorer;

/// Score descending, then item ascending.
fn rank_order(scores: &[f64], a: u32, b: u32) -> Ordering {
    scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
}

/// Every item not in `exclude` (sorted), best first.
pub fn rank_items(scores: &[f64], exclude: &[u32]) -> Vec<u32> {
    let mut items = candidates(scores.len(), exclude);
    items.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    items
}

/// The first `k` entries of [`rank_items`] without sorting the rest.
pub fn top_k(scores: &[f64], exclude: &[u32], k: usize) -> Vec<u32> {
    top_k_of(scores, candidates(scores.len(), exclude), k)
}

fn top_k_of(scores: &[f64], mut items: Vec<u32>, k: usize) -> Vec<u32> {
    if k == 0 {
        return Vec::new();
    }
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        items.truncate(k);
    }
    items.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    items
}

fn candidates(item_count: usize, exclude: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(item_count.saturating_sub(exclude.len()));
    let mut ex = exclude.iter().peekable();
    for i in 0..item_count as u32 {
        while ex.next_if(|&&e| e < i).is_some() {}
        if ex.next_if_eq(&&i).is_none() {
            out.push(i);
        }
    }
    out
}

/// `|top-K ∩ relevant| / |relevant|`; 0 when nothing is relevant.
pub fn recall_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|i| relevant.contains(i)).count();
    hits as f64 / relevant.len() as f64
}

/// Binary-relevance NDCG with the ideal DCG over `min(|relevant|, K)` slots.
pub fn ndcg_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    let ideal_slots = relevant.len().min(k);
    if ideal_slots == 0 {
        return 0.0;
    }
    let gain = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(r, _)| gain(r))
        .sum();
    let idcg: f64 = (0..ideal_slots).map(gain).sum();
    dcg / idcg
}

/// Per-user and mean Recall@K / NDCG@K.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingMetrics {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    /// Evaluated users in ascending order.
    pub users: Vec<u32>,
    pub user_recall: Vec<f64>,
    pub user_ndcg: Vec<f64>,
}

impl RankingMetrics {
    fn from_users(k: usize, rows: Vec<(u32, f64, f64)>) -> Self {
        let n = rows.len().max(1) as f64;
        let mut users = Vec::with_capacity(rows.len());
        let mut user_recall = Vec::with_capacity(rows.len());
        let mut user_ndcg = Vec::with_capacity(rows.len());
        for (u, r, g) in rows {
            users.push(u);
            user_recall.push(r);
            user_ndcg.push(g);
        }
        RankingMetrics {
            k,
            recall: user_recall.iter().sum::<f64>() / n,
            ndcg: user_ndcg.iter().sum::<f64>() / n,
            users,
            user_recall,
            user_ndcg,
        }
    }

    /// Metrics restricted to `keep` users.
    fn subset(&self, keep: impl Fn(u32) -> bool) -> Self {
        let rows = (0..self.users.len())
            .filter(|&n| keep(self.users[n]))
            .map(|n| (self.users[n], self.user_recall[n], self.user_ndcg[n]))
            .collect();
        RankingMetrics::from_users(self.k, rows)
    }
}

/// Groups `(user, item)` targets by user; users come out ascending with sorted
/// item lists.
fn group_targets(targets: &[(u32, u32)]) -> Vec<(u32, Vec<u32>)> {
    let mut sorted = targets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<(u32, Vec<u32>)> = Vec::new();
    for (u, i) in sorted {
        match out.last_mut() {
            Some((last, items)) if *last == u => items.push(i),
            _ => out.push((u, vec![i])),
        }
    }
    out
}

/// Ranks all items not in `exclude` for every user with a target and averages
/// the per-user metrics.
pub fn evaluate_targets(
    scorer: &impl Scorer,
    exclude: &InteractionMatrix,
    targets: &[(u32, u32)],
    k: usize,
) -> RankingMetrics {
    evaluate_within(scorer, exclude, None, targets, k)
}

/// As [`evaluate_targets`], ranking only items in `within` (sorted) when given.
pub fn evaluate_within(
    scorer: &impl Scorer,
    exclude: &InteractionMatrix,
    within: Option<&[u32]>,
    targets: &[(u32, u32)],
    k: usize,
) -> RankingMetrics {
    let grouped = group_targets(targets);
    let rows = grouped
        .par_iter()
        .map_init(
            || vec![0.0; scorer.item_count()],
            |scores, (u, relevant)| {
                scorer.score_user(*u as usize, scores);
                let seen = exclude.row_items(*u as usize);
                let pool = match within {
                    None => candidates(scores.len(), seen),
                    Some(w) => w.iter().copied().filter(|i| seen.binary_search(i).is_err()).collect(),
                };
                let ranked = top_k_of(scores, pool, k);
                (*u, recall_at_k(&ranked, relevant, k), ndcg_at_k(&ranked, relevant, k))
            },
        )
        .collect();
    RankingMetrics::from_users(k, rows)
}

/// Test-set metrics, ranking everything except training positives
/// (validation items stay candidates).
pub fn evaluate(scorer: &impl Scorer, split: &SplitBundle, k: usize) -> RankingMetrics {
    evaluate_targets(scorer, &split.train, &split.test, k)
}

/// Users bucketed by training interaction count, inclusive bounds;
/// `max = None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityGroup {
    pub min: usize,
    pub max: Option<usize>,
}

impl SparsityGroup {
    pub fn contains(&self, count: usize) -> bool {
        count >= self.min && self.max.is_none_or(|m| count <= m)
    }

    pub fn defaults() -> Vec<SparsityGroup> {
        parse_groups("1-5,6-10,11-20,21+").unwrap()
    }
}

impl fmt::Display for SparsityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) => write!(f, "{}-{m}", self.min),
            None => write!(f, "{}+", self.min),
        }
    }
}

impl FromStr for SparsityGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| invalid!("malformed group {s:?}"));
        if let Some(lo) = s.strip_suffix('+') {
            return Ok(SparsityGroup {
                min: num(lo)?,
                max: None,
            });
        }
        let (lo, hi) = s
            .split_once('-')
            .ok_or_else(|| invalid!("malformed group {s:?}, expected a-b or a+"))?;
        let (min, max) = (num(lo)?, num(hi)?);
        if max < min {
            return Err(invalid!("group {s:?} is empty"));
        }
        Ok(SparsityGroup { min, max: Some(max) })
    }
}

/// Parses `1-5,6-10,21+`; groups must be strictly increasing and disjoint.
pub fn parse_groups(s: &str) -> Result<Vec<SparsityGroup>> {
    let groups: Vec<SparsityGroup> = s.split(',').map(str::parse).collect::<Result<_>>()?;
    for pair in groups.windows(2) {
        match pair[0].max {
            Some(m) if m < pair[1].min => {}
            _ => {
                return Err(invalid!(
                    "groups {} and {} overlap or are out of order",
                    pair[0],
                    pair[1]
                ))
            }
        }
    }
    Ok(groups)
}

/// Test metrics per sparsity group. Groups without users are `None`.
pub fn sparsity_group_eval(
    scorer: &impl Scorer,
    split: &SplitBundle,
    groups: &[SparsityGroup],
    k: usize,
) -> Vec<(SparsityGroup, Option<RankingMetrics>)> {
    let all = evaluate(scorer, split, k);
    groups
        .iter()
        .map(|g| {
            let m = all.subset(|u| g.contains(split.train.row_len(u as usize)));
            (*g, (!m.users.is_empty()).then_some(m))
        })
        .collect()
}

/// Cold-start metrics: interactions with held-out items, ranked among the
/// held-out items. Without a holdout this is the ordinary test evaluation.
pub fn cold_start_eval(scorer: &impl Scorer, cold: &ColdStartSplit, k: usize) -> RankingMetrics {
    if cold.held_out.is_empty() {
        return evaluate(scorer, &cold.split, k);
    }
    evaluate_within(scorer, &cold.split.train, Some(&cold.held_out), &cold.targets, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_order_and_ties() {
        assert_eq!(rank_items(&[0.9, 0.1], &[]), vec![0, 1]);
        assert_eq!(rank_items(&[0.5, 0.5, 0.5], &[]), vec![0, 1, 2]);
        assert_eq!(rank_items(&[0.1, 0.9, 0.5, 0.7], &[1]), vec![3, 2, 0]);
        assert_eq!(top_k(&[0.1, 0.9, 0.5, 0.7], &[1], 2), vec![3, 2]);
        assert_eq!(top_k(&[0.3, 0.3, 0.3, 0.3], &[0], 2), vec![1, 2]);
    }

    #[test]
    fn candidates_skip_excluded() {
        assert_eq!(candidates(6, &[0, 2, 5]), vec![1, 3, 4]);
        assert_eq!(candidates(3, &[]), vec![0, 1, 2]);
    }

    #[test]
    fn metric_hand_values() {
        let ranked: Vec<u32> = (0..20).collect();
        assert_eq!(recall_at_k(&ranked, &[3, 7], 10), 1.0);
        assert_eq!(recall_at_k(&ranked, &[15, 16], 10), 0.0);
        assert_eq!(recall_at_k(&ranked, &[1, 12, 13, 14], 10), 0.25);
        assert_eq!(ndcg_at_k(&ranked, &[0], 10), 1.0);
        assert!((ndcg_at_k(&ranked, &[1], 10) - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((ndcg_at_k(&ranked, &[1], 10) - 0.63093).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&ranked, &[19], 10), 0.0);
    }

    #[test]
    fn group_parsing() {
        let g = SparsityGroup::defaults();
        assert_eq!(g.len(), 4);
        assert!(g[0].contains(5) && !g[0].contains(6));
        assert!(g[3].contains(1000));
        assert_eq!(g[3].to_string(), "21+");
        assert!(parse_groups("1-5,5-10").is_err());
        assert!(parse_groups("6-10,1-5").is_err());
        assert!(parse_groups("x").is_err());
    }
}
