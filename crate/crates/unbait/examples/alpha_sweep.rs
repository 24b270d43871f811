//! Sweep the exposure-loss weight over its standard grid.
//!
//! Trains one CR model per alpha in {0, 0.25, 0.5, 0.75, 1, 2, 3, 4, 5},
//! reporting validation recall@10 (the model-selection signal) next to
//! the like-based test NDCG@10 under TIE inference.
//!
//! Run: `cargo run --release --example alpha_sweep`

use unbait::{
    evaluate, generate_world, split_dataset, train, EffectKind, EffectRanker, Optimizer,
    TrainConfig, TrainMode, WorldConfig, ALPHA_GRID,
};

fn main() -> unbait::Result<()> {
    let world = WorldConfig {
        n_users: 150,
        n_items: 400,
        interactions_per_user: 120,
        seed: 3,
        ..WorldConfig::default()
    };
    let (log, features, _) = generate_world(&world)?;
    let split = split_dataset(&log, 3)?;

    println!(
        "{:>6} {:>10} {:>12} {:>12}",
        "alpha", "best epoch", "val recall@10", "test ndcg@10"
    );
    let mut best = (f64::NEG_INFINITY, 0.0);
    for alpha in ALPHA_GRID {
        let config = TrainConfig {
            mode: TrainMode::Cr,
            alpha,
            dim: 32,
            optimizer: Optimizer::Adam,
            learning_rate: 0.01,
            max_epochs: 50,
            patience: 10,
            seed: 9,
            ..TrainConfig::default()
        };
        let (scorer, report) = train(&split, &features, &config)?;
        let val = report.epochs[report.best_epoch - 1].val_recall10;
        let ranker = EffectRanker::new(&scorer, &features, config.strategy, EffectKind::Tie);
        let ndcg = evaluate(&ranker, &split, &[10])?[0].ndcg;
        println!(
            "{:>6} {:>10} {:>12.4} {:>12.4}",
            alpha, report.best_epoch, val, ndcg
        );
        if val > best.0 {
            best = (val, alpha);
        }
    }
    println!("\nvalidation would select alpha = {}", best.1);
    Ok(())
}
