//! All-ranking evaluation on like-labeled test data.
//!
//! For each test user the full catalog is ranked minus that user's
//! training clicks; relevant items are the user's liked test clicks.
//! Precision/recall/NDCG at each cutoff are macro-averaged over users
//! with a non-empty test set, in user-index order so the reduction is
//! bitwise reproducible.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{DataSplit, RatioStats};
use crate::error::{Error, Result};

/// Produces a user's full ranked candidate list, already excluding the
/// given items. Implementations must be pure per user.
pub trait Ranker: Sync {
    fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32>;
}

/// Ranking metrics at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// hits = |top-K intersect relevant|; precision = hits/K;
/// recall = hits/|relevant| (0 when relevant is empty).
pub fn precision_recall_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> (f64, f64) {
    assert!(k >= 1, "K must be >= 1");
    let hits = ranked.iter().take(k).filter(|i| relevant.contains(i)).count();
    let precision = hits as f64 / k as f64;
    let recall = if relevant.is_empty() {
        0.0
    } else {
        hits as f64 / relevant.len() as f64
    };
    (precision, recall)
}

/// Binary-relevance NDCG@K with the ideal DCG truncated at
/// min(|relevant|, K). 0 when `relevant` is empty.
pub fn ndcg_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> f64 {
    assert!(k >= 1, "K must be >= 1");
    if relevant.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal_len = relevant.len().min(k);
    let idcg: f64 = (0..ideal_len).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum();
    dcg / idcg
}

/// Evaluates a ranker over the split's test users: per user the catalog
/// is ranked excluding that user's training clicks; relevant items are
/// the user's test likes. Users with an empty test set are skipped.
pub fn evaluate(ranker: &dyn Ranker, split: &DataSplit, ks: &[usize]) -> Result<Vec<MetricsAtK>> {
    if split.test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_users = split.train.n_users();
    let mut relevant: Vec<HashSet<u32>> = vec![HashSet::new(); n_users];
    for it in split.test.interactions() {
        relevant[it.user as usize].insert(it.item);
    }
    let exclusions = split.train.clicked_sets();
    evaluate_lists(ranker, &relevant, &exclusions, ks)
}

/// Shared macro-averaging core for test evaluation and validation
/// recall. `relevant[u]` empty means user u is skipped.
pub(crate) fn evaluate_lists(
    ranker: &dyn Ranker,
    relevant: &[HashSet<u32>],
    exclusions: &[HashSet<u32>],
    ks: &[usize],
) -> Result<Vec<MetricsAtK>> {
    let per_user: Vec<Vec<MetricsAtK>> = (0..relevant.len() as u32)
        .into_par_iter()
        .filter(|&u| !relevant[u as usize].is_empty())
        .map(|u| {
            let rel = &relevant[u as usize];
            let exclude = &exclusions[u as usize];
            let ranked = ranker.rank(u, exclude);
            debug_assert!(ranked.iter().all(|i| !exclude.contains(i)));
            ks.iter()
                .map(|&k| {
                    let (precision, recall) = precision_recall_at_k(&ranked, rel, k);
                    let ndcg = ndcg_at_k(&ranked, rel, k);
                    MetricsAtK {
                        k,
                        precision,
                        recall,
                        ndcg,
                    }
                })
                .collect()
        })
        .collect();
    if per_user.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = per_user.len() as f64;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let mut precision = 0.0;
            let mut recall = 0.0;
            let mut ndcg = 0.0;
            for user_metrics in &per_user {
                precision += user_metrics[ki].precision;
                recall += user_metrics[ki].recall;
                ndcg += user_metrics[ki].ndcg;
            }
            MetricsAtK {
                k,
                precision: precision / n,
                recall: recall / n,
                ndcg: ndcg / n,
            }
        })
        .collect())
}

/// Re-ranks the top `window` items of a base ranking by the sum of base
/// rank and like/click-ratio rank (descending ratio; unclicked items
/// count as ratio 0). Ratio ranks are computed within the window; ties
/// fall back to base rank. Items below the window are untouched.
pub fn rerank_rr(base_ranking: &[u32], ratios: &RatioStats, window: usize) -> Vec<u32> {
    let window = window.min(base_ranking.len());
    let head = &base_ranking[..window];

    // ratio_rank[j]: 1-based rank of head[j] by descending ratio.
    let mut by_ratio: Vec<usize> = (0..window).collect();
    by_ratio.sort_by(|&a, &b| {
        let ra = ratios.ratio(head[a]).unwrap_or(0.0);
        let rb = ratios.ratio(head[b]).unwrap_or(0.0);
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut ratio_rank = vec![0usize; window];
    for (rank0, &j) in by_ratio.iter().enumerate() {
        ratio_rank[j] = rank0 + 1;
    }

    let mut order: Vec<usize> = (0..window).collect();
    order.sort_by_key(|&j| ((j + 1) + ratio_rank[j], j));

    let mut out: Vec<u32> = order.into_iter().map(|j| head[j]).collect();
    out.extend_from_slice(&base_ranking[window..]);
    out
}

/// A [`Ranker`] applying like/click-ratio re-ranking on top of a base
/// ranker (the RR baseline; the window defaults to 20).
pub struct RatioReranker<'a, R: Ranker> {
    pub base: R,
    pub stats: &'a RatioStats,
    pub window: usize,
}

impl<'a, R: Ranker> RatioReranker<'a, R> {
    pub fn new(base: R, stats: &'a RatioStats) -> Self {
        Self {
            base,
            stats,
            window: 20,
        }
    }
}

impl<R: Ranker> Ranker for RatioReranker<'_, R> {
    fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32> {
        rerank_rr(&self.base.rank(user, exclude), self.stats, self.window)
    }
}

/// Metrics per method plus relative improvements against a baseline.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub methods: Vec<MethodMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodMetrics {
    pub name: String,
    pub metrics: Vec<MetricsAtK>,
    /// (method - baseline) / baseline per metric; `None` when the
    /// baseline value is zero.
    pub improvement: Vec<ImprovementAtK>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImprovementAtK {
    pub k: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
}

fn relative(baseline: f64, value: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (value - baseline) / baseline)
}

/// Evaluates every method on the same split and reports improvements
/// relative to `baseline_name`. Method order is preserved.
pub fn compare(
    methods: &[(String, &dyn Ranker)],
    split: &DataSplit,
    ks: &[usize],
    baseline_name: &str,
) -> Result<ComparisonReport> {
    if !methods.iter().any(|(name, _)| name == baseline_name) {
        return Err(Error::UnknownBaseline(baseline_name.to_string()));
    }
    let evaluated: Vec<(String, Vec<MetricsAtK>)> = methods
        .iter()
        .map(|(name, ranker)| Ok((name.clone(), evaluate(*ranker, split, ks)?)))
        .collect::<Result<_>>()?;
    let baseline = evaluated
        .iter()
        .find(|(name, _)| name == baseline_name)
        .map(|(_, m)| m.clone())
        .expect("baseline checked above");
    let methods = evaluated
        .into_iter()
        .map(|(name, metrics)| {
            let improvement = metrics
                .iter()
                .zip(&baseline)
                .map(|(m, b)| ImprovementAtK {
                    k: m.k,
                    precision: relative(b.precision, m.precision),
                    recall: relative(b.recall, m.recall),
                    ndcg: relative(b.ndcg, m.ndcg),
                })
                .collect();
            MethodMetrics {
                name,
                metrics,
                improvement,
            }
        })
        .collect();
    Ok(ComparisonReport {
        baseline: baseline_name.to_string(),
        methods,
    })
}

impl ComparisonReport {
    /// CSV rows: method, k, precision, recall, ndcg, improvements.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,k,precision,recall,ndcg,precision_improvement,recall_improvement,ndcg_improvement\n",
        );
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for method in &self.methods {
            for (m, imp) in method.metrics.iter().zip(&method.improvement) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    method.name,
                    m.k,
                    m.precision,
                    m.recall,
                    m.ndcg,
                    fmt_opt(imp.precision),
                    fmt_opt(imp.recall),
                    fmt_opt(imp.ndcg),
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_dataset, Interaction, InteractionLog, KeyIndex};

    struct FixedRanker {
        scores: Vec<Vec<f64>>,
    }

    impl Ranker for FixedRanker {
        fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32> {
            crate::effects::rank_items(&self.scores[user as usize], exclude)
        }
    }

    fn set(items: &[u32]) -> HashSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn precision_recall_basics() {
        let ranked: Vec<u32> = (0..10).collect();
        let relevant = set(&[0, 3, 7, 15, 16]);
        let (p, r) = precision_recall_at_k(&ranked, &relevant, 10);
        assert_eq!(p, 0.3);
        assert_eq!(r, 0.6);
        let all = set(&(0..10).collect::<Vec<_>>());
        assert_eq!(precision_recall_at_k(&ranked, &all, 10).0, 1.0);
    }

    #[test]
    fn precision_recall_agree_with_intersection_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let ranked: Vec<u32> = crate::effects::rank_items(
                &(0..25).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>(),
                &HashSet::new(),
            );
            let relevant: HashSet<u32> = (0..25u32).filter(|_| rng.random_bool(0.25)).collect();
            let k = rng.random_range(1..25);
            let (p, r) = precision_recall_at_k(&ranked, &relevant, k);
            let top: HashSet<u32> = ranked.iter().take(k).copied().collect();
            let hits = top.intersection(&relevant).count();
            assert_eq!(p, hits as f64 / k as f64);
            if !relevant.is_empty() {
                assert_eq!(r, hits as f64 / relevant.len() as f64);
                // precision*K and recall*|relevant| are the same integer.
                assert_eq!((p * k as f64).round() as usize, hits);
                assert_eq!((r * relevant.len() as f64).round() as usize, hits);
            }
        }
    }

    #[test]
    fn ndcg_single_relevant_positions() {
        let ranked: Vec<u32> = (0..20).collect();
        assert_eq!(ndcg_at_k(&ranked, &set(&[0]), 10), 1.0);
        let at_rank2 = ndcg_at_k(&ranked, &set(&[1]), 10);
        assert!((at_rank2 - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((at_rank2 - 0.63093).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&ranked, &set(&[99]), 10), 0.0);
    }

    #[test]
    fn ndcg_is_one_exactly_when_relevant_fill_top() {
        let ranked: Vec<u32> = vec![5, 3, 8, 0, 1];
        assert_eq!(ndcg_at_k(&ranked, &set(&[5, 3]), 5), 1.0);
        assert!(ndcg_at_k(&ranked, &set(&[5, 8]), 5) < 1.0);
        // More relevant items than K: ideal truncates at K.
        assert_eq!(ndcg_at_k(&ranked, &set(&[5, 3, 8, 0, 1, 9, 10]), 3), 1.0);
    }

    fn toy_split() -> DataSplit {
        let mut users = KeyIndex::new();
        let mut items = KeyIndex::new();
        for u in 0..3 {
            users.insert_or_get(&format!("u{u}"));
        }
        for i in 0..8 {
            items.insert_or_get(&format!("i{i}"));
        }
        let train = vec![
            Interaction { user: 0, item: 0, clicked: true, liked: Some(false) },
            Interaction { user: 1, item: 1, clicked: true, liked: None },
        ];
        let test = vec![
            Interaction { user: 0, item: 2, clicked: true, liked: Some(true) },
            Interaction { user: 1, item: 3, clicked: true, liked: Some(true) },
        ];
        let empty = InteractionLog::new(users.clone(), items.clone(), Vec::new());
        DataSplit {
            train: InteractionLog::new(users.clone(), items.clone(), train),
            validation: empty.clone(),
            test: InteractionLog::new(users, items, test),
            seed: 0,
        }
    }

    #[test]
    fn evaluate_perfect_ranking() {
        let split = toy_split();
        // Give each user their test item the top score.
        let mut scores = vec![vec![0.0; 8]; 3];
        scores[0][2] = 1.0;
        scores[1][3] = 1.0;
        let ranker = FixedRanker { scores };
        let metrics = evaluate(&ranker, &split, &[10]).unwrap();
        assert_eq!(metrics[0].recall, 1.0);
        assert_eq!(metrics[0].ndcg, 1.0);
        // 1 hit in K=10 slots, but only 7 candidates exist; precision uses K.
        assert!((metrics[0].precision - 0.1).abs() < 1e-12);
    }

    #[test]
    fn evaluate_excludes_train_clicks() {
        let split = toy_split();
        // Train item gets the best score but must not appear.
        let mut scores = vec![vec![0.0; 8]; 3];
        scores[0][0] = 5.0;
        scores[0][2] = 1.0;
        scores[1][1] = 5.0;
        scores[1][3] = 1.0;
        let ranker = FixedRanker { scores };
        let metrics = evaluate(&ranker, &split, &[1]).unwrap();
        assert_eq!(metrics[0].recall, 1.0, "excluded item must not displace the hit");
    }

    #[test]
    fn evaluate_empty_test_errors() {
        let mut split = toy_split();
        split.test =
            InteractionLog::new(split.train.users().clone(), split.train.items().clone(), vec![]);
        assert!(matches!(evaluate(&FixedRanker { scores: vec![vec![0.0; 8]; 3] }, &split, &[5]),
            Err(Error::EmptyDataset)));
    }

    #[test]
    fn evaluate_invariant_to_user_permutation() {
        // Shuffle interaction order; macro-average must not change.
        let split = toy_split();
        let mut shuffled = split.clone();
        let mut test = shuffled.test.interactions().to_vec();
        test.reverse();
        shuffled.test = InteractionLog::new(
            shuffled.train.users().clone(),
            shuffled.train.items().clone(),
            test,
        );
        let mut scores = vec![vec![0.0; 8]; 3];
        scores[0][2] = 1.0;
        scores[1][4] = 1.0;
        let ranker = FixedRanker { scores };
        let a = evaluate(&ranker, &split, &[5]).unwrap();
        let b = evaluate(&ranker, &shuffled, &[5]).unwrap();
        assert_eq!(a[0].ndcg, b[0].ndcg);
        assert_eq!(a[0].precision, b[0].precision);
    }

    #[test]
    fn rerank_windows_combine_base_and_ratio_ranks() {
        // 5 items in window; ratios descending for items 4..0.
        let stats = RatioStats {
            like_count: vec![0, 1, 2, 3, 4],
            click_count: vec![4, 4, 4, 4, 4],
        };
        let base = vec![0, 1, 2, 3, 4];
        // Combined keys: item0: 1+5=6, item1: 2+4=6, item2: 3+3=6, item3: 4+2=6, item4: 5+1=6.
        // All tie -> base order preserved.
        assert_eq!(rerank_rr(&base, &stats, 5), vec![0, 1, 2, 3, 4]);
        // Flip: best ratio first in base order -> stays first.
        let base = vec![4, 3, 2, 1, 0];
        assert_eq!(rerank_rr(&base, &stats, 5), vec![4, 3, 2, 1, 0]);
    }

    #[test]
    fn rerank_moves_high_ratio_item_up() {
        let stats = RatioStats {
            like_count: vec![0, 0, 4, 0],
            click_count: vec![4, 4, 4, 4],
        };
        // Item 2 is ranked third by base but has the best ratio:
        // keys: item0: 1+2=3, item1: 2+3=5, item2: 3+1=4, item3: 4+4=8.
        assert_eq!(rerank_rr(&[0, 1, 2, 3], &stats, 4), vec![0, 2, 1, 3]);
    }

    #[test]
    fn rerank_equal_ratios_keep_base_order() {
        let stats = RatioStats {
            like_count: vec![1; 6],
            click_count: vec![2; 6],
        };
        let base = vec![5, 2, 4, 0, 1, 3];
        assert_eq!(rerank_rr(&base, &stats, 6), base);
        assert_eq!(rerank_rr(&base, &stats, 1), base);
    }

    #[test]
    fn rerank_never_crosses_the_window() {
        let stats = RatioStats {
            like_count: vec![0, 0, 0, 9],
            click_count: vec![9, 9, 9, 9],
        };
        // Item 3 has ratio 1.0 but sits below the window.
        let out = rerank_rr(&[0, 1, 2, 3], &stats, 2);
        assert_eq!(&out[2..], &[2, 3]);
        let head: HashSet<u32> = out[..2].iter().copied().collect();
        assert_eq!(head, set(&[0, 1]));
    }

    #[test]
    fn compare_baseline_improvements() {
        let split = toy_split();
        let mut good = vec![vec![0.0; 8]; 3];
        good[0][2] = 1.0;
        good[1][3] = 1.0;
        let mut bad = vec![vec![0.0; 8]; 3];
        bad[0][7] = 1.0;
        bad[1][3] = 1.0;
        let good = FixedRanker { scores: good };
        let bad = FixedRanker { scores: bad };
        let methods: Vec<(String, &dyn Ranker)> =
            vec![("nt".into(), &bad as &dyn Ranker), ("cr".into(), &good as &dyn Ranker)];
        let report = compare(&methods, &split, &[2], "nt").unwrap();
        let nt = &report.methods[0];
        assert!(nt.improvement[0].ndcg.unwrap().abs() < 1e-15, "self-improvement is 0");
        let cr = &report.methods[1];
        assert!(cr.improvement[0].ndcg.unwrap() > 0.0);
        assert!(compare(&methods, &split, &[2], "missing").is_err());
    }

    #[test]
    fn compare_reports_exact_percentage() {
        // baseline 0.10 -> method 0.11 must read +10%.
        assert_eq!(relative(0.10, 0.11).map(|v| (v * 1000.0).round() / 10.0), Some(10.0));
        assert_eq!(relative(0.0, 0.5), None);
    }

    #[test]
    fn small_instance_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n_users = rng.random_range(2..8usize);
            let n_items = rng.random_range(6..20usize);
            let mut users = KeyIndex::new();
            let mut items = KeyIndex::new();
            for u in 0..n_users {
                users.insert_or_get(&format!("u{u}"));
            }
            for i in 0..n_items {
                items.insert_or_get(&format!("i{i}"));
            }
            let mut rows = Vec::new();
            for u in 0..n_users as u32 {
                for i in 0..n_items as u32 {
                    if rng.random_bool(0.4) {
                        rows.push(Interaction {
                            user: u,
                            item: i,
                            clicked: true,
                            liked: Some(rng.random_bool(0.5)),
                        });
                    }
                }
            }
            if rows.iter().all(|r| r.liked != Some(true)) {
                continue;
            }
            let log = InteractionLog::new(users, items, rows);
            let split = split_dataset(&log, 7).unwrap();
            if split.test.is_empty() {
                continue;
            }
            let scores: Vec<Vec<f64>> = (0..n_users)
                .map(|_| (0..n_items).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ranker = FixedRanker { scores: scores.clone() };
            let ks = [1usize, 3, 10];
            let got = evaluate(&ranker, &split, &ks).unwrap();

            // Brute force: naive per-user computation, then mean.
            let mut sums = vec![(0.0, 0.0, 0.0); ks.len()];
            let mut counted = 0usize;
            for u in 0..n_users as u32 {
                let rel: Vec<u32> = split
                    .test
                    .interactions()
                    .iter()
                    .filter(|it| it.user == u)
                    .map(|it| it.item)
                    .collect();
                if rel.is_empty() {
                    continue;
                }
                counted += 1;
                let banned: Vec<u32> = split
                    .train
                    .interactions()
                    .iter()
                    .filter(|it| it.user == u && it.clicked)
                    .map(|it| it.item)
                    .collect();
                let mut order: Vec<u32> = (0..n_items as u32)
                    .filter(|i| !banned.contains(i))
                    .collect();
                order.sort_by(|&a, &b| {
                    scores[u as usize][b as usize]
                        .partial_cmp(&scores[u as usize][a as usize])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                for (ki, &k) in ks.iter().enumerate() {
                    let hits = order.iter().take(k).filter(|i| rel.contains(i)).count();
                    sums[ki].0 += hits as f64 / k as f64;
                    sums[ki].1 += hits as f64 / rel.len() as f64;
                    let mut dcg = 0.0;
                    for (pos, it) in order.iter().take(k).enumerate() {
                        if rel.contains(it) {
                            dcg += 1.0 / ((pos + 2) as f64).log2();
                        }
                    }
                    let mut idcg = 0.0;
                    for pos in 0..rel.len().min(k) {
                        idcg += 1.0 / ((pos + 2) as f64).log2();
                    }
                    sums[ki].2 += dcg / idcg;
                }
            }
            for (ki, &(p, r, n)) in sums.iter().enumerate() {
                assert!((got[ki].precision - p / counted as f64).abs() < 1e-12);
                assert!((got[ki].recall - r / counted as f64).abs() < 1e-12);
                assert!((got[ki].ndcg - n / counted as f64).abs() < 1e-12);
            }
        }
    }
}
