// Scratch diagnostic harness (not part of the deliverable).
use std::collections::HashSet;

use unbait::effects::reference_constants;
use unbait::*;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt()).max(1e-12)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let cb = arg(1, 0.5);
    let alpha = arg(2, 1.0);
    let lr = arg(3, 0.01);
    let epochs = arg(4, 60.0) as usize;
    let noise = arg(5, 0.3);
    let anti = arg(6, 3.0);
    let corr = arg(7, 0.3);
    let l2 = arg(8, 1e-5);
    let dim = arg(9, 64.0) as usize;
    let attract_scale = arg(10, 1.0);
    let world_seed = arg(11, 42.0) as u64;
    let val_likes = arg(12, 0.0) > 0.5;

    let world = WorldConfig {
        n_users: 300,
        n_items: 800,
        interactions_per_user: 200,
        clickbait_fraction: cb,
        feature_noise: noise,
        anti_align: anti,
        attract_quality_corr: corr,
        attract_scale,
        seed: world_seed,
        ..WorldConfig::default()
    };
    let (log, features, truth) = generate_world(&world).unwrap();
    let split = split_dataset(&log, 42).unwrap();
    println!(
        "clicks {} likes {} | train/val/test {}/{}/{}",
        log.clicks().count(),
        log.clicks().filter(|i| i.liked == Some(true)).count(),
        split.train.interactions().len(),
        split.validation.interactions().len(),
        split.test.interactions().len()
    );

    // Probe users for branch-structure measurement.
    let probe_users: Vec<u32> = (0..world.n_users as u32).step_by(7).collect();
    let n_items = world.n_items;

    let measure = |scorer: &TwoBranchScorer, label: &str, strategy: FusionStrategy| {
        // Correlations of branch scores with true attract/quality logits.
        let mut r_ui_a = 0.0;
        let mut r_ui_q = 0.0;
        let mut r_ue_a = 0.0;
        let mut c_sum = 0.0;
        for &u in &probe_users {
            let pref = truth.user_pref(u);
            let a_logit: Vec<f64> = (0..n_items as u32).map(|i| dot(pref, truth.attract(i))).collect();
            let q_logit: Vec<f64> = (0..n_items as u32).map(|i| dot(pref, truth.quality(i))).collect();
            let y_ui = scorer.score_all(&features, u, Branch::Item);
            let y_ue = scorer.score_all(&features, u, Branch::Exposure);
            r_ui_a += pearson(&y_ui, &a_logit);
            r_ui_q += pearson(&y_ui, &q_logit);
            r_ue_a += pearson(&y_ue, &a_logit);
            c_sum += reference_constants(scorer, &features, u).unwrap().c_ui;
        }
        let k = probe_users.len() as f64;

        // Top-10 clickbait contamination + test metrics under FUSED and TIE.
        let exclusions = split.train.clicked_sets();
        let mut cb_share = [0.0f64; 2];
        for (ki, kind) in [EffectKind::Fused, EffectKind::Tie].into_iter().enumerate() {
            let ranker = EffectRanker::new(scorer, &features, strategy, kind);
            let mut cb_hits = 0usize;
            let mut slots = 0usize;
            for &u in &probe_users {
                for item in ranker.rank(u, &exclusions[u as usize]).into_iter().take(10) {
                    cb_hits += truth.clickbait[item as usize] as usize;
                    slots += 1;
                }
            }
            cb_share[ki] = cb_hits as f64 / slots as f64;
        }
        let fused = EffectRanker::new(scorer, &features, strategy, EffectKind::Fused);
        let tie = EffectRanker::new(scorer, &features, strategy, EffectKind::Tie);
        let m_f = evaluate(&fused, &split, &[10]).unwrap();
        let m_t = evaluate(&tie, &split, &[10]).unwrap();
        println!(
            "{label}: r(y_ui,a) {:+.3} r(y_ui,q) {:+.3} r(y_ue,a) {:+.3} c_ui {:+.3} | top10 cb: fused {:.2} tie {:.2} | N@10 fused {:.4} tie {:.4}",
            r_ui_a / k, r_ui_q / k, r_ue_a / k, c_sum / k, cb_share[0], cb_share[1], m_f[0].ndcg, m_t[0].ndcg
        );
    };

    // Oracle contamination for reference: what share of top-10 由 true
    // attract ranking is clickbait?
    {
        let exclusions = split.train.clicked_sets();
        let mut cb_hits = 0usize;
        let mut slots = 0usize;
        let mut relevant_found = 0usize;
        for &u in &probe_users {
            let pref = truth.user_pref(u);
            let scores: Vec<f64> = (0..n_items as u32).map(|i| dot(pref, truth.attract(i))).collect();
            let ranked = rank_items(&scores, &exclusions[u as usize]);
            let rel: HashSet<u32> = split
                .test
                .interactions()
                .iter()
                .filter(|it| it.user == u)
                .map(|it| it.item)
                .collect();
            for item in ranked.into_iter().take(10) {
                cb_hits += truth.clickbait[item as usize] as usize;
                relevant_found += rel.contains(&item) as usize;
                slots += 1;
            }
        }
        println!(
            "attract-oracle: top10 clickbait share {:.2}, hit rate {:.3}",
            cb_hits as f64 / slots as f64,
            relevant_found as f64 / slots as f64
        );
    }

    let stats = like_click_ratio(&log);
    {
        let defined: Vec<f64> = stats.defined_ratios().map(|(_, r)| r).collect();
        let below = defined.iter().filter(|&&r| r < 0.5).count() as f64 / defined.len() as f64;
        let donors: Vec<u32> = stats.defined_ratios().filter(|&(_, r)| r < 0.5).map(|(i, _)| i).collect();
        let donor_cb = donors.iter().filter(|&&i| truth.clickbait[i as usize]).count() as f64
            / donors.len().max(1) as f64;
        println!("ratios: {:.1}% below 0.5; donor pool {} items, {:.0}% clickbait", below * 100.0, donors.len(), donor_cb * 100.0);
    }
    let (triples, extended) = poison_test(&split, &features, &stats, 7).unwrap();
    let fake_map: Vec<u32> = triples.iter().map(|t| t.real_item).collect();
    for (label, mode, a) in [("NT", TrainMode::Nt, 0.0), ("CR", TrainMode::Cr, alpha)] {
        let cfg = TrainConfig {
            mode,
            alpha: a,
            dim,
            optimizer: Optimizer::Adam,
            learning_rate: lr,
            l2,
            batch_size: 256,
            max_epochs: epochs,
            patience: epochs,
            val_likes_only: val_likes,
            seed: 1,
            ..TrainConfig::default()
        };
        let (scorer, report) = train(&split, &features, &cfg).unwrap();
        let best = report.best_epoch;
        println!(
            "--- {label} alpha={a} (best ep {best}, val {:.4}) loss {:.3}->{:.3}",
            report.epochs[best - 1].val_recall10,
            report.epochs[0].loss,
            report.epochs.last().unwrap().loss
        );
        measure(&scorer, label, cfg.strategy);
        let kind = if mode == TrainMode::Cr { EffectKind::Tie } else { EffectKind::Fused };
        let ext = scorer.extend_for_fakes(&fake_map);
        let ranker = EffectRanker::new(&ext, &extended, cfg.strategy, kind);
        let diffs = rank_diff(&ranker, &triples, &split, features.n_items(), extended.n_items());
        let mean = diffs.iter().sum::<i64>() as f64 / diffs.len() as f64;
        println!("    rank_diff mean {mean:.1} over {} triples", diffs.len());
    }
}
