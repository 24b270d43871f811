//! Causal effect decomposition over a scored catalog.
//!
//! Builds a small random scorer, computes TE / NDE / TIE / NIE / TDE per
//! item for one user, verifies the decomposition TE = NDE + TIE, and
//! shows which ranking equivalences hold exactly.
//!
//! Run: `cargo run --example causal_effects`

use std::collections::HashSet;

use unbait::effects::effect_scores;
use unbait::scorer::ScorerOptions;
use unbait::{rank_items, reference_constants, Branch, EffectKind, FusionStrategy, TwoBranchScorer};

fn main() -> unbait::Result<()> {
    let (dim, d_e, d_t, n_users, n_items) = (8, 4, 4, 5, 12);
    let scorer = TwoBranchScorer::init(dim, d_e, d_t, n_users, n_items, 31, ScorerOptions::default())?;
    // Random features stand in for a real catalog.
    let mut features = unbait::FeatureTable::new(d_e, d_t);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
    for _ in 0..n_items {
        let e: Vec<f64> = (0..d_e).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..d_t).map(|_| rng.random_range(-1.0..1.0)).collect();
        features.push_item(&e, &t);
    }

    let user = 2;
    let strategy = FusionStrategy::MulSigmoid;
    let refs = reference_constants(&scorer, &features, user)?;
    println!("expectation constants for user {user}: c_ui = {:.4}, c_e = {:.4}\n", refs.c_ui, refs.c_e);

    let per_kind: Vec<(EffectKind, Vec<f64>)> = EffectKind::ALL
        .iter()
        .map(|&kind| (kind, effect_scores(&scorer, &features, strategy, kind, user)))
        .collect();

    println!(
        "{:>4} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "item", "fused", "te", "nde", "tie", "nie", "tde"
    );
    for item in 0..n_items {
        print!("{item:>4}");
        for (_, scores) in &per_kind {
            print!(" {:>9.4}", scores[item]);
        }
        println!();
    }

    // TE decomposes into NDE + TIE.
    let te = &per_kind[1].1;
    let nde = &per_kind[2].1;
    let tie = &per_kind[3].1;
    let max_residual = (0..n_items)
        .map(|i| (te[i] - nde[i] - tie[i]).abs())
        .fold(0.0f64, f64::max)
        ;
    println!("\nmax |TE - (NDE + TIE)| = {max_residual:.2e}");

    // Ranking equivalences.
    let none = HashSet::new();
    let y_ui = scorer.score_all(&features, user, Branch::Item);
    let fused_order = rank_items(&per_kind[0].1, &none);
    let te_order = rank_items(te, &none);
    let nie_order = rank_items(&per_kind[4].1, &none);
    let item_order = rank_items(&y_ui, &none);
    println!("argsort(TE) == argsort(FUSED): {}", te_order == fused_order);
    println!("argsort(NIE) == argsort(y_ui): {}", nie_order == item_order);
    for strategy in [FusionStrategy::SumLinear, FusionStrategy::SumTanh] {
        let sum_tie = effect_scores(&scorer, &features, strategy, EffectKind::Tie, user);
        println!(
            "argsort(TIE, {strategy}) == argsort(y_ui): {}",
            rank_items(&sum_tie, &none) == item_order
        );
    }
    println!(
        "argsort(TIE, mul-sigmoid) == argsort(FUSED): {} (TIE reranks)",
        rank_items(tie, &none) == fused_order
    );
    Ok(())
}
