//! Validate analytic gradients against central finite differences.
//!
//! Every parameter block of the two-branch scorer is checked under each
//! fusion strategy, both loss kinds, and a spread of alpha values.
//!
//! Run: `cargo run --example gradient_check`

use unbait::{gradient_check, FusionStrategy, LossKind, TrainConfig};

fn main() {
    println!(
        "{:<12} {:<5} {:>6} {:>14}",
        "strategy", "loss", "alpha", "max rel error"
    );
    let mut worst = 0.0f64;
    for strategy in FusionStrategy::ALL {
        for loss in [LossKind::Bpr, LossKind::Ce] {
            for alpha in [0.0, 1.0, 5.0] {
                let config = TrainConfig {
                    strategy,
                    loss,
                    alpha,
                    ..TrainConfig::default()
                };
                let err = gradient_check(&config, 2024);
                worst = worst.max(err);
                println!(
                    "{:<12} {:<5} {:>6} {:>14.3e}",
                    strategy.to_string(),
                    match loss {
                        LossKind::Bpr => "bpr",
                        LossKind::Ce => "ce",
                    },
                    alpha,
                    err
                );
            }
        }
    }
    println!("\nworst case: {worst:.3e} (tolerance 1e-4)");
    assert!(worst < 1e-4);
}
