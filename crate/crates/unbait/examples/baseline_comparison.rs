//! All training regimes side by side on one world.
//!
//! NT, CFT, IPW, CT, NR, the RR re-ranking post-process, and CR with TIE
//! inference, each trained on the same split and compared with relative
//! improvements against NT.
//!
//! Run: `cargo run --release --example baseline_comparison`

use unbait::{
    compare, generate_world, like_click_ratio, split_dataset, train, EffectKind, EffectRanker,
    Optimizer, Ranker, RatioReranker, TrainConfig, TrainMode, WorldConfig,
};

fn main() -> unbait::Result<()> {
    let world = WorldConfig {
        n_users: 150,
        n_items: 400,
        interactions_per_user: 120,
        seed: 29,
        ..WorldConfig::default()
    };
    let (log, features, _) = generate_world(&world)?;
    let split = split_dataset(&log, 29)?;
    let stats = like_click_ratio(&log);

    let base = TrainConfig {
        dim: 32,
        optimizer: Optimizer::Adam,
        learning_rate: 0.01,
        max_epochs: 50,
        patience: 10,
        alpha: 1.0,
        seed: 6,
        ..TrainConfig::default()
    };

    let mut scorers = Vec::new();
    for mode in TrainMode::ALL {
        let config = TrainConfig {
            mode,
            ..base.clone()
        };
        let (scorer, _) = train(&split, &features, &config)?;
        scorers.push((mode, scorer));
    }

    let mut rankers: Vec<(String, Box<dyn Ranker>)> = Vec::new();
    for (mode, scorer) in &scorers {
        let ranker = EffectRanker::new(scorer, &features, base.strategy, mode.inference_kind());
        rankers.push((mode.to_string(), Box::new(ranker)));
    }
    // RR: re-rank NT's top 20 by like/click ratio.
    let nt = &scorers[0].1;
    rankers.push((
        "rr".into(),
        Box::new(RatioReranker::new(
            EffectRanker::new(nt, &features, base.strategy, EffectKind::Fused),
            &stats,
        )),
    ));

    let methods: Vec<(String, &dyn Ranker)> = rankers
        .iter()
        .map(|(name, r)| (name.clone(), r.as_ref()))
        .collect();
    let report = compare(&methods, &split, &[10, 20], "nt")?;

    println!(
        "{:<6} {:>3} {:>10} {:>10} {:>10} {:>9}",
        "method", "k", "precision", "recall", "ndcg", "vs nt"
    );
    for method in &report.methods {
        for (m, imp) in method.metrics.iter().zip(&method.improvement) {
            println!(
                "{:<6} {:>3} {:>10.4} {:>10.4} {:>10.4} {:>8.1}%",
                method.name,
                m.k,
                m.precision,
                m.recall,
                m.ndcg,
                100.0 * imp.ndcg.unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
