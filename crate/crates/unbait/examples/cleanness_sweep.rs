//! Debiasing gain as a function of dataset cleanness.
//!
//! Discarding the top like/click-ratio items leaves a dataset with a
//! higher share of regretted clicks. Training NT and CR on each filtered
//! copy shows the debiased model pulling further ahead as the data gets
//! dirtier.
//!
//! Run: `cargo run --release --example cleanness_sweep`

use unbait::{
    evaluate, filter_by_ratio, generate_world, split_dataset, train, EffectKind, EffectRanker,
    Optimizer, TrainConfig, TrainMode, WorldConfig,
};

fn main() -> unbait::Result<()> {
    let world = WorldConfig {
        n_users: 150,
        n_items: 400,
        interactions_per_user: 120,
        seed: 17,
        ..WorldConfig::default()
    };
    let (log, features, _) = generate_world(&world)?;

    let base = TrainConfig {
        dim: 32,
        optimizer: Optimizer::Adam,
        learning_rate: 0.01,
        max_epochs: 50,
        patience: 10,
        alpha: 1.0,
        seed: 4,
        ..TrainConfig::default()
    };

    println!(
        "{:>10} {:>12} {:>10} {:>10} {:>8}",
        "discarded", "rickrolled", "NT n@10", "CR n@10", "gain"
    );
    for proportion in [0.0, 0.2, 0.4, 0.6] {
        let filtered = filter_by_ratio(&log, proportion)?;
        let observed = filtered.clicks().filter(|it| it.liked.is_some()).count();
        let rickrolled = filtered
            .clicks()
            .filter(|it| it.liked == Some(false))
            .count() as f64
            / observed as f64;
        let split = split_dataset(&filtered, 17)?;

        let (nt, _) = train(&split, &features, &TrainConfig { mode: TrainMode::Nt, ..base.clone() })?;
        let (cr, _) = train(&split, &features, &TrainConfig { mode: TrainMode::Cr, ..base.clone() })?;
        let nt_ndcg = evaluate(
            &EffectRanker::new(&nt, &features, base.strategy, EffectKind::Fused),
            &split,
            &[10],
        )?[0]
            .ndcg;
        let cr_ndcg = evaluate(
            &EffectRanker::new(&cr, &features, base.strategy, EffectKind::Tie),
            &split,
            &[10],
        )?[0]
            .ndcg;
        println!(
            "{:>10} {:>12.3} {:>10.4} {:>10.4} {:>7.1}%",
            proportion,
            rickrolled,
            nt_ndcg,
            cr_ndcg,
            100.0 * (cr_ndcg - nt_ndcg) / nt_ndcg.max(1e-12)
        );
    }
    Ok(())
}
