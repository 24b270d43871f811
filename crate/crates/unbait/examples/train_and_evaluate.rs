//! Train a debiased model and compare it against normal training.
//!
//! Generates a clickbait world, trains NT (normal training, ranked by the
//! fused prediction) and CR (joint loss, ranked by TIE), and evaluates
//! both on the liked test clicks under the all-ranking protocol.
//!
//! Run: `cargo run --release --example train_and_evaluate`

use unbait::{
    evaluate, generate_world, split_dataset, train, EffectKind, EffectRanker, Optimizer,
    TrainConfig, TrainMode, WorldConfig,
};

fn main() -> unbait::Result<()> {
    let world = WorldConfig {
        n_users: 200,
        n_items: 600,
        interactions_per_user: 150,
        seed: 11,
        ..WorldConfig::default()
    };
    let (log, features, _) = generate_world(&world)?;
    let split = split_dataset(&log, 11)?;
    println!(
        "dataset: {} train / {} validation / {} test interactions",
        split.train.interactions().len(),
        split.validation.interactions().len(),
        split.test.interactions().len()
    );

    let base = TrainConfig {
        dim: 32,
        optimizer: Optimizer::Adam,
        learning_rate: 0.01,
        max_epochs: 60,
        patience: 10,
        seed: 5,
        ..TrainConfig::default()
    };

    for (label, mode, alpha, kind) in [
        ("NT  (fused ranking)", TrainMode::Nt, 0.0, EffectKind::Fused),
        ("CR  (TIE ranking)", TrainMode::Cr, 1.0, EffectKind::Tie),
    ] {
        let config = TrainConfig {
            mode,
            alpha,
            ..base.clone()
        };
        let (scorer, report) = train(&split, &features, &config)?;
        let ranker = EffectRanker::new(&scorer, &features, config.strategy, kind);
        let metrics = evaluate(&ranker, &split, &[10, 20])?;
        println!(
            "\n{label}: stopped at epoch {} (best {})",
            report.stopped_epoch, report.best_epoch
        );
        for m in metrics {
            println!(
                "  @{:<2}  precision {:.4}  recall {:.4}  ndcg {:.4}",
                m.k, m.precision, m.recall, m.ndcg
            );
        }
    }
    Ok(())
}
