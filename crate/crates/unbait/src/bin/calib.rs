// Scratch calibration harness (not part of the deliverable).
use std::time::Instant;

use unbait::*;
use unbait::effects::rank_items;
use unbait::fusion::sigmoid;
use unbait::effects::reference_constants;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cb: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let opt = if args.get(3).map(|s| s == "adam").unwrap_or(false) {
        Optimizer::Adam
    } else {
        Optimizer::Sgd
    };
    let noise: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let anti: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let corr: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.6);

    let logit_std: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let ipu: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(100);
    let patience: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(10);
    let max_epochs: usize = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(60);
    let attract_scale: f64 = args.get(11).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let world_cfg = WorldConfig {
        clickbait_fraction: cb,
        feature_noise: noise,
        anti_align: anti,
        attract_quality_corr: corr,
        logit_std,
        interactions_per_user: ipu,
        attract_scale,
        ..WorldConfig::default()
    };
    let t0 = Instant::now();
    let (log, features, _truth) = generate_world(&world_cfg).unwrap();
    let stats = like_click_ratio(&log);
    let defined: Vec<f64> = stats.defined_ratios().map(|(_, r)| r).collect();
    let below = defined.iter().filter(|&&r| r < 0.5).count() as f64 / defined.len() as f64;
    println!(
        "world: {} clicks, {} likes, {:.1}% of {} defined ratios < 0.5  [{:?}]",
        log.clicks().count(),
        log.clicks().filter(|i| i.liked == Some(true)).count(),
        below * 100.0,
        defined.len(),
        t0.elapsed()
    );

    let split = split_dataset(&log, world_cfg.seed).unwrap();
    println!(
        "split: train {} / val {} / test {}",
        split.train.interactions().len(),
        split.validation.interactions().len(),
        split.test.interactions().len()
    );

    let base = TrainConfig {
        learning_rate: lr,
        optimizer: opt,
        max_epochs,
        patience,
        batch_size: 256,
        seed: 1,
        ..TrainConfig::default()
    };

    // Oracle ceiling: rank by the true click*like probability.
    {
        use std::collections::HashSet;
        struct OracleRanker<'a> { truth: &'a GroundTruth }
        impl Ranker for OracleRanker<'_> {
            fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32> {
                let pref = self.truth.user_pref(user);
                let n = self.truth.clickbait.len();
                let scores: Vec<f64> = (0..n as u32).map(|i| {
                    let pa = sigmoid(self.truth.attract(i).iter().zip(pref).map(|(x, y)| x * y).sum());
                    let pq = sigmoid(self.truth.quality(i).iter().zip(pref).map(|(x, y)| x * y).sum());
                    pa * pq
                }).collect();
                rank_items(&scores, exclude)
            }
        }
        let oracle = OracleRanker { truth: &_truth };
        let m = evaluate(&oracle, &split, &[10]).unwrap();
        println!("oracle (true affinity): N@10 {:.4}, R@10 {:.4}", m[0].ndcg, m[0].recall);
        struct QualityOracle<'a> { truth: &'a GroundTruth }
        impl Ranker for QualityOracle<'_> {
            fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32> {
                let pref = self.truth.user_pref(user);
                let n = self.truth.clickbait.len();
                let scores: Vec<f64> = (0..n as u32).map(|i| {
                    self.truth.quality(i).iter().zip(pref).map(|(x, y)| x * y).sum()
                }).collect();
                rank_items(&scores, exclude)
            }
        }
        let q = evaluate(&QualityOracle { truth: &_truth }, &split, &[10]).unwrap();
        println!("quality-only oracle:    N@10 {:.4}, R@10 {:.4}", q[0].ndcg, q[0].recall);
    }

    // NT baseline.
    let t = Instant::now();
    let nt_cfg = TrainConfig { mode: TrainMode::Nt, ..base.clone() };
    let (nt, nt_report) = train(&split, &features, &nt_cfg).unwrap();
    let nt_ranker = EffectRanker::new(&nt, &features, nt_cfg.strategy, EffectKind::Fused);
    let nt_metrics = evaluate(&nt_ranker, &split, &[10]).unwrap();
    println!(
        "NT:        val_r10 {:.4} (best ep {} / stop {}), test N@10 {:.4}, P@10 {:.4}, loss {:.4}->{:.4} [{:?}]",
        nt_report.epochs[nt_report.best_epoch - 1].val_recall10,
        nt_report.best_epoch,
        nt_report.stopped_epoch,
        nt_metrics[0].ndcg,
        nt_metrics[0].precision,
        nt_report.epochs[0].loss,
        nt_report.epochs.last().unwrap().loss,
        t.elapsed()
    );

    for r in nt_report.epochs.iter().filter(|r| r.epoch % 10 == 0 || r.epoch <= 3) {
        println!("  NT epoch {:>3}: loss {:.4} val_r10 {:.4}", r.epoch, r.loss, r.val_recall10);
    }
    if std::env::var("NT_ONLY").is_ok() { return; }
    let mut best_val = f64::NEG_INFINITY;
    let mut best_alpha = 0.0;
    let mut best_ndcg = 0.0;
    for &alpha in &ALPHA_GRID {
        let t = Instant::now();
        let cr_cfg = TrainConfig { mode: TrainMode::Cr, alpha, ..base.clone() };
        let (cr, cr_report) = train(&split, &features, &cr_cfg).unwrap();
        let val = cr_report.epochs[cr_report.best_epoch - 1].val_recall10;
        let tie_ranker = EffectRanker::new(&cr, &features, cr_cfg.strategy, EffectKind::Tie);
        let m_tie = evaluate(&tie_ranker, &split, &[10]).unwrap();
        let fused_ranker = EffectRanker::new(&cr, &features, cr_cfg.strategy, EffectKind::Fused);
        let m_fused = evaluate(&fused_ranker, &split, &[10]).unwrap();
        println!(
            "CR a={alpha:<4}: val_r10 {val:.4} (ep {}/{}), TIE N@10 {:.4} ({:+.1}% vs NT), FUSED N@10 {:.4} [{:?}]",
            cr_report.best_epoch,
            cr_report.stopped_epoch,
            m_tie[0].ndcg,
            100.0 * (m_tie[0].ndcg - nt_metrics[0].ndcg) / nt_metrics[0].ndcg,
            m_fused[0].ndcg,
            t.elapsed()
        );
        {
            // Expectation-constant statistics for a few users.
            let mut cs = Vec::new();
            for user in (0..split.train.n_users() as u32).step_by(50) {
                let refs = reference_constants(&cr, &features, user).unwrap();
                cs.push(refs.c_ui);
            }
            let mean_c = cs.iter().sum::<f64>() / cs.len() as f64;
            let mean_bias = cr.item_bias.iter().sum::<f64>() / cr.item_bias.len() as f64;
            println!("          mean c_ui {mean_c:.4}, mean item_bias {mean_bias:.4}");
        }
        if val > best_val {
            best_val = val;
            best_alpha = alpha;
            best_ndcg = m_tie[0].ndcg;
        }
    }
    println!(
        "validation picks alpha = {best_alpha}: CR-TIE N@10 {best_ndcg:.4} vs NT {:.4} -> {:+.2}%",
        nt_metrics[0].ndcg,
        100.0 * (best_ndcg - nt_metrics[0].ndcg) / nt_metrics[0].ndcg
    );

    // rank_diff probe with the validation-selected alpha.
    let cr_cfg = TrainConfig { mode: TrainMode::Cr, alpha: best_alpha, ..base.clone() };
    let (cr, _) = train(&split, &features, &cr_cfg).unwrap();
    let (triples, extended) = poison_test(&split, &features, &stats, 7).unwrap();
    let map: Vec<u32> = triples.iter().map(|t| t.real_item).collect();
    let nt_ext = nt.extend_for_fakes(&map);
    let cr_ext = cr.extend_for_fakes(&map);
    let nt_rd = rank_diff(
        &EffectRanker::new(&nt_ext, &extended, nt_cfg.strategy, EffectKind::Fused),
        &triples, &split, features.n_items(), extended.n_items(),
    );
    let cr_rd = rank_diff(
        &EffectRanker::new(&cr_ext, &extended, cr_cfg.strategy, EffectKind::Tie),
        &triples, &split, features.n_items(), extended.n_items(),
    );
    let mean = |v: &[i64]| v.iter().sum::<i64>() as f64 / v.len() as f64;
    println!(
        "rank_diff over {} triples: NT {:.1}, CR-TIE {:.1}",
        triples.len(),
        mean(&nt_rd),
        mean(&cr_rd)
    );
}
