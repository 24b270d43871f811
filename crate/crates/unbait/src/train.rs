//! Joint-loss training of the two-branch scorer.
//!
//! The loss couples the fused prediction with a direct supervision term
//! on the exposure branch:
//!
//! ```text
//! L = sum over samples  l(f(y_ui, y_ue), label) + alpha * l(y_ue, label)
//! ```
//!
//! Pairwise BPR over (positive, sampled negative) is the default `l`;
//! pointwise cross-entropy is available. The baseline training modes
//! reshape what counts as a positive or negative sample and how samples
//! are weighted, on the same architecture, so that inference-rule
//! comparisons isolate the counterfactual machinery.
//!
//! Gradients are analytic; `gradient_check` validates every parameter
//! block against central finite differences.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, sample_negative_item, DataSplit, FeatureTable};
use crate::effects::{EffectKind, EffectRanker};
use crate::error::{Error, Result};
use crate::eval::evaluate_lists;
use crate::fusion::{sigmoid, FusionStrategy};
use crate::scorer::{ScorerOptions, TwoBranchScorer};

/// The alpha grid swept by `--alpha-sweep` and hyperparameter searches.
pub const ALPHA_GRID: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bpr,
    Ce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Training regimes. All run on the same two-branch architecture.
///
/// - `Nt`: normal training on clicks, alpha forced to 0, FUSED inference
/// - `Cr`: joint loss with the configured alpha, TIE inference
/// - `Cft`: content features only; exposure branch disabled
/// - `Ct`: positives restricted to liked clicks
/// - `Nr`: liked-click positives; click-skip and non-click negatives
///   reweighted by `nr_lambda`
/// - `Ipw`: positives weighted by inverse popularity-based propensity
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Nt,
    Cr,
    Cft,
    Ct,
    Nr,
    Ipw,
}

impl TrainMode {
    pub const ALL: [TrainMode; 6] = [
        TrainMode::Nt,
        TrainMode::Cr,
        TrainMode::Cft,
        TrainMode::Ct,
        TrainMode::Nr,
        TrainMode::Ipw,
    ];

    /// The inference rule this mode applies when validating and as its
    /// default at evaluation time.
    pub fn inference_kind(self) -> EffectKind {
        match self {
            TrainMode::Cr => EffectKind::Tie,
            _ => EffectKind::Fused,
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TrainMode::Nt => "nt",
            TrainMode::Cr => "cr",
            TrainMode::Cft => "cft",
            TrainMode::Ct => "ct",
            TrainMode::Nr => "nr",
            TrainMode::Ipw => "ipw",
        };
        f.write_str(name)
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nt" => Ok(TrainMode::Nt),
            "cr" => Ok(TrainMode::Cr),
            "cft" => Ok(TrainMode::Cft),
            "ct" => Ok(TrainMode::Ct),
            "nr" => Ok(TrainMode::Nr),
            "ipw" => Ok(TrainMode::Ipw),
            other => Err(Error::UnknownName {
                what: "training mode",
                value: other.to_string(),
                expected: "nt, cr, cft, ct, nr, ipw",
            }),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpr" => Ok(LossKind::Bpr),
            "ce" => Ok(LossKind::Ce),
            other => Err(Error::UnknownName {
                what: "loss",
                value: other.to_string(),
                expected: "bpr, ce",
            }),
        }
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::UnknownName {
                what: "optimizer",
                value: other.to_string(),
                expected: "sgd, adam",
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub strategy: FusionStrategy,
    pub loss: LossKind,
    /// Weight of the exposure-branch loss term. Applied only under
    /// `mode = cr`; every other mode trains with alpha = 0.
    pub alpha: f64,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop when validation recall@10 has not improved for this many
    /// successive epochs.
    pub patience: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// NR: weight of click-skip negatives; non-click negatives get 1 - lambda.
    pub nr_lambda: f64,
    /// IPW: propensity exponent over relative item popularity.
    pub ipw_gamma: f64,
    /// IPW: weight clip.
    pub ipw_clip: f64,
    pub share_user_emb: bool,
    pub hidden_tanh: bool,
    /// Train a bare single-branch model instead of the fused architecture
    /// (sanity variant of NT).
    pub plain_nt: bool,
    /// Restrict validation relevance to liked clicks.
    pub val_likes_only: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Cr,
            strategy: FusionStrategy::MulSigmoid,
            loss: LossKind::Bpr,
            alpha: 1.0,
            learning_rate: 0.001,
            l2: 1e-5,
            max_epochs: 200,
            patience: 10,
            dim: 64,
            batch_size: 512,
            optimizer: Optimizer::Sgd,
            nr_lambda: 0.6,
            ipw_gamma: 1.0,
            ipw_clip: 100.0,
            share_user_emb: false,
            hidden_tanh: false,
            plain_nt: false,
            val_likes_only: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::InvalidArgument("alpha must be >= 0".into()));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument("learning_rate must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.nr_lambda) {
            return Err(Error::InvalidArgument("nr_lambda must be in [0, 1]".into()));
        }
        if self.ipw_gamma < 0.0 {
            return Err(Error::InvalidArgument("ipw_gamma must be >= 0".into()));
        }
        for (name, v) in [
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("dim", self.dim),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting from a flat config file.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: &str| Error::InvalidConfigValue {
            key: key.to_string(),
            message: msg.to_string(),
        };
        match key {
            "mode" => self.mode = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "loss" => self.loss = value.parse()?,
            "optimizer" => self.optimizer = value.parse()?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad("expected a number"))?,
            "learning_rate" => {
                self.learning_rate = value.parse().map_err(|_| bad("expected a number"))?
            }
            "l2" => self.l2 = value.parse().map_err(|_| bad("expected a number"))?,
            "max_epochs" => {
                self.max_epochs = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "patience" => self.patience = value.parse().map_err(|_| bad("expected an integer"))?,
            "dim" => self.dim = value.parse().map_err(|_| bad("expected an integer"))?,
            "batch_size" => {
                self.batch_size = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "nr_lambda" => self.nr_lambda = value.parse().map_err(|_| bad("expected a number"))?,
            "ipw_gamma" => self.ipw_gamma = value.parse().map_err(|_| bad("expected a number"))?,
            "ipw_clip" => self.ipw_clip = value.parse().map_err(|_| bad("expected a number"))?,
            "share_user_emb" => {
                self.share_user_emb = value.parse().map_err(|_| bad("expected true/false"))?
            }
            "hidden_tanh" => {
                self.hidden_tanh = value.parse().map_err(|_| bad("expected true/false"))?
            }
            "plain_nt" => self.plain_nt = value.parse().map_err(|_| bad("expected true/false"))?,
            "val_likes_only" => {
                self.val_likes_only = value.parse().map_err(|_| bad("expected true/false"))?
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an integer"))?,
            other => {
                return Err(Error::InvalidConfigKey {
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Alpha actually used in the loss: only CR trains the exposure term.
    pub fn effective_alpha(&self) -> f64 {
        if self.mode == TrainMode::Cr {
            self.alpha
        } else {
            0.0
        }
    }

    fn scorer_options(&self) -> ScorerOptions {
        ScorerOptions {
            share_user_emb: self.share_user_emb,
            hidden_tanh: self.hidden_tanh,
            zero_exposure_input: self.mode == TrainMode::Cft,
        }
    }

    /// Single-branch training (no fusion, no exposure branch).
    fn single_branch(&self) -> bool {
        self.mode == TrainMode::Cft || self.plain_nt
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Pairwise ranking loss `-ln sigmoid(s_pos - s_neg)`, evaluated in
/// softplus form so extreme score gaps neither overflow nor underflow.
pub fn bpr_loss(s_pos: f64, s_neg: f64) -> f64 {
    softplus(-(s_pos - s_neg))
}

/// Binary cross-entropy on a logit, `-[y ln sigmoid(s) + (1-y) ln(1 - sigmoid(s))]`.
pub fn ce_loss(score: f64, label: bool) -> f64 {
    softplus(score) - if label { score } else { 0.0 }
}

/// One pair's joint loss: the fused term plus `alpha` times the
/// exposure-branch term, both under the selected loss kind.
pub fn joint_loss(
    strategy: FusionStrategy,
    y_ui_pos: f64,
    y_ue_pos: f64,
    y_ui_neg: f64,
    y_ue_neg: f64,
    alpha: f64,
    loss: LossKind,
) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be >= 0".into()));
    }
    let fused_pos = strategy.fuse(y_ui_pos, y_ue_pos);
    let fused_neg = strategy.fuse(y_ui_neg, y_ue_neg);
    Ok(match loss {
        LossKind::Bpr => bpr_loss(fused_pos, fused_neg) + alpha * bpr_loss(y_ue_pos, y_ue_neg),
        LossKind::Ce => {
            ce_loss(fused_pos, true)
                + ce_loss(fused_neg, false)
                + alpha * (ce_loss(y_ue_pos, true) + ce_loss(y_ue_neg, false))
        }
    })
}

/// The role a scored sample plays in the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Positive,
    /// Clicked but explicitly not liked.
    ClickSkipNegative,
    /// Never clicked.
    NonClickNegative,
}

/// Per-sample loss weight under each training mode.
pub fn sample_weight(
    mode: TrainMode,
    item_popularity: u32,
    max_popularity: u32,
    kind: SampleKind,
    nr_lambda: f64,
    ipw_gamma: f64,
    ipw_clip: f64,
) -> Result<f64> {
    match mode {
        TrainMode::Nt | TrainMode::Cr | TrainMode::Cft | TrainMode::Ct => Ok(1.0),
        TrainMode::Nr => Ok(match kind {
            SampleKind::Positive => 1.0,
            SampleKind::ClickSkipNegative => nr_lambda,
            SampleKind::NonClickNegative => 1.0 - nr_lambda,
        }),
        TrainMode::Ipw => match kind {
            SampleKind::Positive => {
                if item_popularity == 0 || max_popularity == 0 {
                    return Err(Error::InvalidArgument(
                        "IPW needs popularity >= 1 for clicked items".into(),
                    ));
                }
                let propensity =
                    (f64::from(item_popularity) / f64::from(max_popularity)).powf(ipw_gamma);
                Ok((1.0 / propensity).min(ipw_clip))
            }
            _ => Ok(1.0),
        },
    }
}

/// Dense gradient buffers mirroring the scorer's parameter blocks.
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub user_item_emb: Vec<f64>,
    pub user_exp_emb: Vec<f64>,
    pub item_proj: Vec<f64>,
    pub exp_proj: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub exp_bias: Vec<f64>,
}

impl Gradients {
    fn zeros_like(scorer: &TwoBranchScorer) -> Self {
        Self {
            user_item_emb: vec![0.0; scorer.user_item_emb.len()],
            user_exp_emb: vec![0.0; scorer.user_exp_emb.len()],
            item_proj: vec![0.0; scorer.item_proj.len()],
            exp_proj: vec![0.0; scorer.exp_proj.len()],
            item_bias: vec![0.0; scorer.item_bias.len()],
            exp_bias: vec![0.0; scorer.exp_bias.len()],
        }
    }

    fn zero(&mut self) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn blocks(&self) -> [&Vec<f64>; 6] {
        [
            &self.user_item_emb,
            &self.user_exp_emb,
            &self.item_proj,
            &self.exp_proj,
            &self.item_bias,
            &self.exp_bias,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.user_item_emb,
            &mut self.user_exp_emb,
            &mut self.item_proj,
            &mut self.exp_proj,
            &mut self.item_bias,
            &mut self.exp_bias,
        ]
    }
}

fn scorer_blocks_mut(scorer: &mut TwoBranchScorer) -> [&mut Vec<f64>; 6] {
    [
        &mut scorer.user_item_emb,
        &mut scorer.user_exp_emb,
        &mut scorer.item_proj,
        &mut scorer.exp_proj,
        &mut scorer.item_bias,
        &mut scorer.exp_bias,
    ]
}

fn scorer_params(scorer: &TwoBranchScorer) -> [&Vec<f64>; 6] {
    [
        &scorer.user_item_emb,
        &scorer.user_exp_emb,
        &scorer.item_proj,
        &scorer.exp_proj,
        &scorer.item_bias,
        &scorer.exp_bias,
    ]
}

/// One training pair with its loss weight.
#[derive(Debug, Clone, Copy)]
struct TrainPair {
    user: u32,
    pos: u32,
    neg: u32,
    weight: f64,
}

struct PairScores {
    y_ui_pos: f64,
    y_ue_pos: f64,
    y_ui_neg: f64,
    y_ue_neg: f64,
}

fn pair_scores(scorer: &TwoBranchScorer, features: &FeatureTable, pair: &TrainPair) -> PairScores {
    PairScores {
        y_ui_pos: scorer.score_item_branch(features, pair.user, pair.pos),
        y_ue_pos: scorer.score_exposure_branch(features, pair.user, pair.pos),
        y_ui_neg: scorer.score_item_branch(features, pair.user, pair.neg),
        y_ue_neg: scorer.score_exposure_branch(features, pair.user, pair.neg),
    }
}

/// Forward loss for one pair (weight applied).
fn pair_forward(
    scorer: &TwoBranchScorer,
    features: &FeatureTable,
    pair: &TrainPair,
    cfg: &TrainConfig,
) -> f64 {
    let s = pair_scores(scorer, features, pair);
    let loss = if cfg.single_branch() {
        match cfg.loss {
            LossKind::Bpr => bpr_loss(s.y_ui_pos, s.y_ui_neg),
            LossKind::Ce => ce_loss(s.y_ui_pos, true) + ce_loss(s.y_ui_neg, false),
        }
    } else {
        joint_loss(
            cfg.strategy,
            s.y_ui_pos,
            s.y_ue_pos,
            s.y_ui_neg,
            s.y_ue_neg,
            cfg.effective_alpha(),
            cfg.loss,
        )
        .expect("alpha validated")
    };
    pair.weight * loss
}

/// Forward + backward for one pair; accumulates into `grads` and
/// returns the weighted loss.
fn pair_backward(
    scorer: &TwoBranchScorer,
    features: &FeatureTable,
    pair: &TrainPair,
    cfg: &TrainConfig,
    grads: &mut Gradients,
) -> f64 {
    let s = pair_scores(scorer, features, pair);
    let w = pair.weight;
    let alpha = cfg.effective_alpha();

    // d(loss)/d(branch score) per side.
    let (g_yui_pos, g_yue_pos, g_yui_neg, g_yue_neg, loss);
    if cfg.single_branch() {
        match cfg.loss {
            LossKind::Bpr => {
                let delta = s.y_ui_pos - s.y_ui_neg;
                let slope = sigmoid(-delta);
                loss = bpr_loss(s.y_ui_pos, s.y_ui_neg);
                g_yui_pos = -w * slope;
                g_yui_neg = w * slope;
            }
            LossKind::Ce => {
                loss = ce_loss(s.y_ui_pos, true) + ce_loss(s.y_ui_neg, false);
                g_yui_pos = w * (sigmoid(s.y_ui_pos) - 1.0);
                g_yui_neg = w * sigmoid(s.y_ui_neg);
            }
        }
        g_yue_pos = 0.0;
        g_yue_neg = 0.0;
    } else {
        let fused_pos = cfg.strategy.fuse(s.y_ui_pos, s.y_ue_pos);
        let fused_neg = cfg.strategy.fuse(s.y_ui_neg, s.y_ue_neg);
        let (g_fused_pos, g_fused_neg, g_exp_pos, g_exp_neg);
        match cfg.loss {
            LossKind::Bpr => {
                let slope_f = sigmoid(-(fused_pos - fused_neg));
                let slope_e = sigmoid(-(s.y_ue_pos - s.y_ue_neg));
                loss = bpr_loss(fused_pos, fused_neg) + alpha * bpr_loss(s.y_ue_pos, s.y_ue_neg);
                g_fused_pos = -w * slope_f;
                g_fused_neg = w * slope_f;
                g_exp_pos = -w * alpha * slope_e;
                g_exp_neg = w * alpha * slope_e;
            }
            LossKind::Ce => {
                loss = ce_loss(fused_pos, true)
                    + ce_loss(fused_neg, false)
                    + alpha * (ce_loss(s.y_ue_pos, true) + ce_loss(s.y_ue_neg, false));
                g_fused_pos = w * (sigmoid(fused_pos) - 1.0);
                g_fused_neg = w * sigmoid(fused_neg);
                g_exp_pos = w * alpha * (sigmoid(s.y_ue_pos) - 1.0);
                g_exp_neg = w * alpha * sigmoid(s.y_ue_neg);
            }
        }
        let (fa_pos, fb_pos) = cfg.strategy.fuse_grad(s.y_ui_pos, s.y_ue_pos);
        let (fa_neg, fb_neg) = cfg.strategy.fuse_grad(s.y_ui_neg, s.y_ue_neg);
        g_yui_pos = g_fused_pos * fa_pos;
        g_yui_neg = g_fused_neg * fa_neg;
        g_yue_pos = g_fused_pos * fb_pos + g_exp_pos;
        g_yue_neg = g_fused_neg * fb_neg + g_exp_neg;
    }

    accumulate_branch_grads(scorer, features, pair.user, pair.pos, g_yui_pos, g_yue_pos, grads);
    accumulate_branch_grads(scorer, features, pair.user, pair.neg, g_yui_neg, g_yue_neg, grads);
    w * loss
}

fn accumulate_branch_grads(
    scorer: &TwoBranchScorer,
    features: &FeatureTable,
    user: u32,
    item: u32,
    g_yui: f64,
    g_yue: f64,
    grads: &mut Gradients,
) {
    let dim = scorer.dim;
    let u = user as usize;
    let i = item as usize;
    let e = features.exposure(item);
    let t = features.content(item);
    let cols = scorer.d_e + scorer.d_t;

    if g_yui != 0.0 {
        let z = scorer.aggregate_item(features, item);
        let a_u = scorer.user_item(user);
        grads.item_bias[i] += g_yui;
        for r in 0..dim {
            grads.user_item_emb[u * dim + r] += g_yui * z[r];
            let mut gh = g_yui * a_u[r];
            if scorer.options.hidden_tanh {
                gh *= 1.0 - z[r] * z[r];
            }
            let row = &mut grads.item_proj[r * cols..(r + 1) * cols];
            if !scorer.options.zero_exposure_input {
                for (slot, x) in row[..scorer.d_e].iter_mut().zip(e) {
                    *slot += gh * x;
                }
            }
            for (slot, x) in row[scorer.d_e..].iter_mut().zip(t) {
                *slot += gh * x;
            }
        }
    }

    if g_yue != 0.0 {
        let w_rep = scorer.exposure_rep(features, item);
        let g_u = scorer.user_exp(user);
        grads.exp_bias[i] += g_yue;
        {
            let user_block = if scorer.options.share_user_emb {
                &mut grads.user_item_emb
            } else {
                &mut grads.user_exp_emb
            };
            for r in 0..dim {
                user_block[u * dim + r] += g_yue * w_rep[r];
            }
        }
        for r in 0..dim {
            let gw = g_yue * g_u[r];
            let row = &mut grads.exp_proj[r * scorer.d_e..(r + 1) * scorer.d_e];
            for (slot, x) in row.iter_mut().zip(e) {
                *slot += gw * x;
            }
        }
    }
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

fn apply_update(
    scorer: &mut TwoBranchScorer,
    grads: &Gradients,
    cfg: &TrainConfig,
    adam: &mut Option<AdamState>,
) {
    let lr = cfg.learning_rate;
    let l2 = cfg.l2;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (params, gs) in scorer_blocks_mut(scorer).into_iter().zip(grads.blocks()) {
                for (p, g) in params.iter_mut().zip(gs) {
                    *p -= lr * (g + l2 * *p);
                }
            }
        }
        Optimizer::Adam => {
            let state = adam.as_mut().expect("adam state initialized");
            state.t += 1;
            let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
            let bc1 = 1.0 - b1.powi(state.t as i32);
            let bc2 = 1.0 - b2.powi(state.t as i32);
            let params = scorer_blocks_mut(scorer);
            let ms = state.m.blocks_mut();
            let vs = state.v.blocks_mut();
            for (((params, gs), ms), vs) in params.into_iter().zip(grads.blocks()).zip(ms).zip(vs)
            {
                for (((p, g), m), v) in params.iter_mut().zip(gs).zip(ms).zip(vs) {
                    let g = g + l2 * *p;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_recall10: f64,
}

/// Loss/validation trajectory plus the early-stopping outcome.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the best validation recall@10.
    pub best_epoch: usize,
    /// 1-based epoch at which training stopped.
    pub stopped_epoch: usize,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_recall@10\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.val_recall10));
        }
        out
    }
}

/// Mode-specific sample pools derived from the split.
struct TrainingData {
    positives: Vec<(u32, u32)>,
    clicked: Vec<HashSet<u32>>,
    /// NR only: clicked-without-like items per user.
    skip_items: Vec<Vec<u32>>,
    popularity: Vec<u32>,
    max_popularity: u32,
}

fn prepare_training_data(split: &DataSplit, cfg: &TrainConfig) -> Result<TrainingData> {
    let train = &split.train;
    let positives: Vec<(u32, u32)> = match cfg.mode {
        TrainMode::Ct | TrainMode::Nr => train
            .clicks()
            .filter(|it| it.liked == Some(true))
            .map(|it| (it.user, it.item))
            .collect(),
        _ => train.clicks().map(|it| (it.user, it.item)).collect(),
    };
    if positives.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let clicked = train.clicked_sets();
    let mut skip_items = vec![Vec::new(); train.n_users()];
    if cfg.mode == TrainMode::Nr {
        for it in train.clicks().filter(|it| it.liked == Some(false)) {
            skip_items[it.user as usize].push(it.item);
        }
    }
    let mut popularity = vec![0u32; train.n_items()];
    for it in train.clicks() {
        popularity[it.item as usize] += 1;
    }
    let max_popularity = popularity.iter().copied().max().unwrap_or(0);
    Ok(TrainingData {
        positives,
        clicked,
        skip_items,
        popularity,
        max_popularity,
    })
}

/// Builds this epoch's weighted pairs with fresh negatives.
fn epoch_pairs(
    data: &TrainingData,
    n_items: usize,
    cfg: &TrainConfig,
    epoch: u64,
    users: &crate::data::KeyIndex,
) -> Result<Vec<TrainPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xBE6A ^ epoch.rotate_left(17)));
    let mut pairs = Vec::with_capacity(data.positives.len());
    for &(user, pos) in &data.positives {
        let draw_non_click = |rng: &mut ChaCha8Rng| -> Result<u32> {
            sample_negative_item(&data.clicked[user as usize], n_items, rng).ok_or_else(|| {
                Error::NoNegativeCandidate {
                    user: users.key(user).to_string(),
                }
            })
        };
        match cfg.mode {
            TrainMode::Nr => {
                let skips = &data.skip_items[user as usize];
                if skips.is_empty() {
                    // No click-skip evidence for this user: the non-click
                    // negative carries the whole sample.
                    let neg = draw_non_click(&mut rng)?;
                    pairs.push(TrainPair {
                        user,
                        pos,
                        neg,
                        weight: 1.0,
                    });
                } else {
                    let skip = skips[rng.random_range(0..skips.len())];
                    let w_skip = sample_weight(
                        cfg.mode,
                        0,
                        0,
                        SampleKind::ClickSkipNegative,
                        cfg.nr_lambda,
                        cfg.ipw_gamma,
                        cfg.ipw_clip,
                    )?;
                    pairs.push(TrainPair {
                        user,
                        pos,
                        neg: skip,
                        weight: w_skip,
                    });
                    let neg = draw_non_click(&mut rng)?;
                    let w_non = sample_weight(
                        cfg.mode,
                        0,
                        0,
                        SampleKind::NonClickNegative,
                        cfg.nr_lambda,
                        cfg.ipw_gamma,
                        cfg.ipw_clip,
                    )?;
                    pairs.push(TrainPair {
                        user,
                        pos,
                        neg,
                        weight: w_non,
                    });
                }
            }
            _ => {
                let neg = draw_non_click(&mut rng)?;
                let weight = sample_weight(
                    cfg.mode,
                    data.popularity[pos as usize],
                    data.max_popularity,
                    SampleKind::Positive,
                    cfg.nr_lambda,
                    cfg.ipw_gamma,
                    cfg.ipw_clip,
                )?;
                pairs.push(TrainPair {
                    user,
                    pos,
                    neg,
                    weight,
                });
            }
        }
    }
    let mut order_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x0BDE ^ epoch.rotate_left(31)));
    pairs.shuffle(&mut order_rng);
    Ok(pairs)
}

/// Trains a two-branch scorer per the config's mode, early-stopping on
/// validation recall@10, and returns the best-epoch parameters with the
/// per-epoch report. Bitwise deterministic per (split, features, config).
pub fn train(
    split: &DataSplit,
    features: &FeatureTable,
    cfg: &TrainConfig,
) -> Result<(TwoBranchScorer, TrainReport)> {
    cfg.validate()?;
    let n_users = split.train.n_users();
    let n_items = split.train.n_items();
    if n_items != features.n_items() {
        return Err(Error::InvalidArgument(format!(
            "log has {n_items} items but the feature table has {}",
            features.n_items()
        )));
    }

    let data = prepare_training_data(split, cfg)?;
    let mut scorer = TwoBranchScorer::init(
        cfg.dim,
        features.d_e(),
        features.d_t(),
        n_users,
        n_items,
        derive_seed(cfg.seed, 0x1217),
        cfg.scorer_options(),
    )?;
    if cfg.single_branch() {
        scorer.disable_exposure_branch();
    }

    // Validation relevance and candidate exclusions are fixed for the run.
    let mut val_relevant: Vec<HashSet<u32>> = vec![HashSet::new(); n_users];
    for it in split.validation.clicks() {
        if !cfg.val_likes_only || it.liked == Some(true) {
            val_relevant[it.user as usize].insert(it.item);
        }
    }
    let has_validation = val_relevant.iter().any(|s| !s.is_empty());
    let exclusions = &data.clicked;

    let mut grads = Gradients::zeros_like(&scorer);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(AdamState {
            m: Gradients::zeros_like(&scorer),
            v: Gradients::zeros_like(&scorer),
            t: 0,
        }),
        Optimizer::Sgd => None,
    };

    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };
    let mut best_recall = f64::NEG_INFINITY;
    let mut best_params: Option<TwoBranchScorer> = None;
    let mut stale_epochs = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let pairs = epoch_pairs(&data, n_items, cfg, epoch as u64, split.train.users())?;
        let mut epoch_loss = 0.0;
        for batch in pairs.chunks(cfg.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            for pair in batch {
                batch_loss += pair_backward(&scorer, features, pair, cfg, &mut grads);
            }
            let inv = 1.0 / batch.len() as f64;
            for block in grads.blocks_mut() {
                block.iter_mut().for_each(|g| *g *= inv);
            }
            apply_update(&mut scorer, &grads, cfg, &mut adam);
            epoch_loss += batch_loss;
        }
        epoch_loss /= pairs.len() as f64;
        if !epoch_loss.is_finite() || !scorer.all_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("non-finite loss or parameters (loss = {epoch_loss})"),
            });
        }

        let val_recall10 = if has_validation {
            let ranker =
                EffectRanker::new(&scorer, features, cfg.strategy, cfg.mode.inference_kind());
            evaluate_lists(&ranker, &val_relevant, exclusions, &[10])?[0].recall
        } else {
            0.0
        };
        report.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val_recall10,
        });

        if val_recall10 > best_recall {
            best_recall = val_recall10;
            report.best_epoch = epoch;
            best_params = Some(scorer.clone());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
        }
        report.stopped_epoch = epoch;
        if stale_epochs >= cfg.patience {
            break;
        }
    }

    let best = best_params.unwrap_or(scorer);
    Ok((best, report))
}

/// Maximum relative error between the analytic gradients of the joint
/// loss and central finite differences (h = 1e-5) on a small random
/// instance. Checks every parameter block under the config's mode,
/// strategy, loss kind, and alpha.
pub fn gradient_check(cfg: &TrainConfig, seed: u64) -> f64 {
    gradient_check_scaled(cfg, seed, 1.0)
}

fn gradient_check_scaled(cfg: &TrainConfig, seed: u64, param_scale: f64) -> f64 {
    let (dim, d_e, d_t, n_users, n_items) = (4, 3, 2, 3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6C4D));
    let mut features = FeatureTable::new(d_e, d_t);
    for _ in 0..n_items {
        let e: Vec<f64> = (0..d_e).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..d_t).map(|_| rng.random_range(-1.0..1.0)).collect();
        features.push_item(&e, &t);
    }
    let mut scorer = TwoBranchScorer::init(
        dim,
        d_e,
        d_t,
        n_users,
        n_items,
        derive_seed(seed, 0x6C4E),
        cfg.scorer_options(),
    )
    .expect("valid dims");
    if cfg.single_branch() {
        scorer.disable_exposure_branch();
    }
    for block in scorer_blocks_mut(&mut scorer) {
        block.iter_mut().for_each(|p| *p *= param_scale);
    }

    let pairs: Vec<TrainPair> = (0..6)
        .map(|_| {
            let user = rng.random_range(0..n_users as u32);
            let pos = rng.random_range(0..n_items as u32);
            let mut neg = rng.random_range(0..n_items as u32);
            if neg == pos {
                neg = (neg + 1) % n_items as u32;
            }
            let weight = [1.0, 0.5, 2.0][rng.random_range(0..3)];
            TrainPair {
                user,
                pos,
                neg,
                weight,
            }
        })
        .collect();

    let mut analytic = Gradients::zeros_like(&scorer);
    for pair in &pairs {
        pair_backward(&scorer, &features, pair, cfg, &mut analytic);
    }

    let batch_loss = |scorer: &TwoBranchScorer| -> f64 {
        pairs
            .iter()
            .map(|pair| pair_forward(scorer, &features, pair, cfg))
            .sum()
    };

    let h = 1e-5;
    let mut max_rel = 0.0f64;
    for block_idx in 0..6 {
        let len = scorer_params(&scorer)[block_idx].len();
        for k in 0..len {
            let original = scorer_params(&scorer)[block_idx][k];
            scorer_blocks_mut(&mut scorer)[block_idx][k] = original + h;
            let plus = batch_loss(&scorer);
            scorer_blocks_mut(&mut scorer)[block_idx][k] = original - h;
            let minus = batch_loss(&scorer);
            scorer_blocks_mut(&mut scorer)[block_idx][k] = original;
            let fd = (plus - minus) / (2.0 * h);
            let a = analytic.blocks()[block_idx][k];
            // The denominator floor acts as an absolute-error fallback for
            // near-zero gradients (saturated losses plateau in double
            // precision, making the finite difference exactly 0).
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}
