//! Click-debiasing toolkit for implicit-feedback recommenders.
//!
//! Recommenders trained on clicks over-recommend items whose exposure
//! features (title, cover) attract clicks that end in disappointment.
//! This crate trains a two-branch click model — one branch scoring the
//! full item, one scoring exposure features alone — and removes the
//! direct effect of exposure features at inference time by ranking items
//! with counterfactual effect estimates (TIE by default) instead of the
//! raw fused prediction.
//!
//! The pieces:
//!
//! - [`data`]: interaction logs, feature tables, splits, like/click ratios
//! - [`scorer`]: the two-branch factorization model and its checkpoints
//! - [`fusion`]: the five branch-fusion strategies and their TIE/NIE closed forms
//! - [`effects`]: TE/NDE/TIE/NIE/TDE effect scores and debiased ranking
//! - [`train`]: joint-loss training, baselines (NT/CFT/CT/NR/IPW), gradient checks
//! - [`eval`]: all-ranking P/R/NDCG@K evaluation and method comparison
//! - [`synth`]: synthetic clickbait worlds and the fake-item rank_diff probe
//! - [`cli`]: the `unbait` command-line harness with run manifests
//!
//! Every operation is deterministic given its inputs and a seed. See the
//! `examples/` directory for a runnable tour of each capability.

pub mod cli;
pub mod data;
pub mod effects;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod manifest;
pub mod scorer;
pub mod synth;
pub mod train;

pub use data::{
    filter_by_ratio, like_click_ratio, ratio_groups, sample_negatives, split_dataset, DataSplit,
    FeatureTable, Interaction, InteractionLog, RatioHistogram, RatioStats,
};
pub use effects::{
    effect_scores, rank_items, reference_constants, EffectKind, EffectRanker, ReferenceConstants,
    ReferenceScope,
};
pub use error::{Error, Result};
pub use eval::{
    compare, evaluate, ndcg_at_k, precision_recall_at_k, rerank_rr, ComparisonReport, MetricsAtK,
    Ranker, RatioReranker,
};
pub use fusion::{sigmoid, FusionStrategy};
pub use scorer::{Branch, TwoBranchScorer};
pub use synth::{
    generate_world, poison_test, rank_diff, rank_diff_summary, GroundTruth, PoisonedTriple,
    RankDiffSummary, WorldConfig,
};
pub use train::{
    bpr_loss, ce_loss, gradient_check, joint_loss, sample_weight, train, LossKind, Optimizer,
    SampleKind, TrainConfig, TrainMode, TrainReport, ALPHA_GRID,
};
