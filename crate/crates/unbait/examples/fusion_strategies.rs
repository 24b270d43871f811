//! The five fusion strategies and their counterfactual closed forms.
//!
//! Shows how each strategy combines the item-branch score `y_ui` with
//! the exposure-branch score `y_ue`, that the TIE/NIE closed forms agree
//! with their defining subtractions, and the sign-dependent suppression
//! that demotes attractive-but-below-average items under MUL-sigmoid.
//!
//! Run: `cargo run --example fusion_strategies`

use unbait::FusionStrategy;

fn main() {
    let y_ui = 1.2;
    let y_ue = 0.8;
    let c_ui = 0.4;
    let c_e = -0.1;

    println!("y_ui = {y_ui}, y_ue = {y_ue}, c_ui = {c_ui}, c_e = {c_e}\n");
    println!(
        "{:<12} {:>8} {:>8} {:>8} {:>10} {:>10}",
        "strategy", "fused", "tie", "nie", "tie check", "nie check"
    );
    for strategy in FusionStrategy::ALL {
        let fused = strategy.fuse(y_ui, y_ue);
        let tie = strategy.tie(y_ui, y_ue, c_ui);
        let nie = strategy.nie(y_ui, c_ui, c_e);
        // The defining subtractions the closed forms must reproduce.
        let tie_ref = strategy.fuse(y_ui, y_ue) - strategy.fuse(c_ui, y_ue);
        let nie_ref = strategy.fuse(y_ui, c_e) - strategy.fuse(c_ui, c_e);
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>10.1e} {:>10.1e}",
            strategy.to_string(),
            fused,
            tie,
            nie,
            (tie - tie_ref).abs(),
            (nie - nie_ref).abs()
        );
    }

    // The mechanism that buries clickbait: under MUL-sigmoid, a more
    // attractive exposure raises TIE for above-average items but lowers
    // it further for below-average ones.
    println!("\nMUL-sigmoid TIE as exposure attractiveness grows:");
    println!("{:>8} {:>22} {:>22}", "y_ue", "above average (+0.5)", "below average (-0.5)");
    let strategy = FusionStrategy::MulSigmoid;
    for k in 0..5 {
        let y_ue = k as f64;
        println!(
            "{:>8.1} {:>22.4} {:>22.4}",
            y_ue,
            strategy.tie(0.5, y_ue, 0.0),
            strategy.tie(-0.5, y_ue, 0.0)
        );
    }
    println!("\nFor SUM strategies TIE is y_ui - c_ui regardless of exposure:");
    for strategy in [
        FusionStrategy::SumLinear,
        FusionStrategy::SumSigmoid,
        FusionStrategy::SumTanh,
    ] {
        println!(
            "  {}: tie(1.2, -3.0, 0.4) = {:.4}, tie(1.2, 3.0, 0.4) = {:.4}",
            strategy,
            strategy.tie(1.2, -3.0, 0.4),
            strategy.tie(1.2, 3.0, 0.4)
        );
    }
}
