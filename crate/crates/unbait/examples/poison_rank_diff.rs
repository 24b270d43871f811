//! The fake-item probe: how far below its original does a forgery rank?
//!
//! For every liked test pair a fake item is forged with the real item's
//! content but exposure features stolen from a low like/click-ratio
//! donor. A recommender that has removed the direct exposure effect
//! ranks the fake far below the real item (large rank_diff); one that
//! chases exposure features ranks them close together.
//!
//! Run: `cargo run --release --example poison_rank_diff`

use unbait::{
    generate_world, like_click_ratio, poison_test, rank_diff, rank_diff_summary, split_dataset,
    train, EffectKind, EffectRanker, Optimizer, TrainConfig, TrainMode, WorldConfig,
};

fn main() -> unbait::Result<()> {
    let world = WorldConfig {
        n_users: 200,
        n_items: 600,
        interactions_per_user: 150,
        seed: 21,
        ..WorldConfig::default()
    };
    let (log, features, _) = generate_world(&world)?;
    let split = split_dataset(&log, 21)?;
    let stats = like_click_ratio(&log);

    let (triples, extended) = poison_test(&split, &features, &stats, 5)?;
    println!(
        "forged {} fakes; catalog grew {} -> {}",
        triples.len(),
        features.n_items(),
        extended.n_items()
    );

    let base = TrainConfig {
        dim: 32,
        optimizer: Optimizer::Adam,
        learning_rate: 0.01,
        max_epochs: 60,
        patience: 10,
        seed: 2,
        ..TrainConfig::default()
    };
    let fake_to_real: Vec<u32> = triples.iter().map(|t| t.real_item).collect();

    for (label, mode, alpha, kind) in [
        ("NT fused", TrainMode::Nt, 0.0, EffectKind::Fused),
        ("CR tie", TrainMode::Cr, 1.0, EffectKind::Tie),
    ] {
        let config = TrainConfig {
            mode,
            alpha,
            ..base.clone()
        };
        let (scorer, _) = train(&split, &features, &config)?;
        // Fakes inherit their original's bias terms; only features differ.
        let scorer = scorer.extend_for_fakes(&fake_to_real);
        let ranker = EffectRanker::new(&scorer, &extended, config.strategy, kind);
        let diffs = rank_diff(&ranker, &triples, &split, features.n_items(), extended.n_items());
        let summary = rank_diff_summary(&diffs, 50)?;
        println!("\n{label}: mean rank_diff {:.1}", summary.mean);
        for (k, count) in summary.buckets.iter().enumerate().filter(|(_, &c)| c > 0) {
            let low = summary.start + k as i64 * summary.bucket_width;
            println!(
                "  [{:>5}, {:>5}] {:>5} {}",
                low,
                low + summary.bucket_width - 1,
                count,
                "#".repeat(count / 4)
            );
        }
    }
    Ok(())
}
