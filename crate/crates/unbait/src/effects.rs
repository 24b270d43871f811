//! Causal effect scores and debiased ranking.
//!
//! For a user, every item gets two branch scores: `y_ui` (full item) and
//! `y_ue` (exposure only). The reference situation replaces a branch
//! score with its per-user expectation constant — the mean branch score
//! over the whole catalog — and effect scores are differences of fused
//! predictions between factual and reference situations:
//!
//! ```text
//! FUSED = f(y_ui, y_ue)
//! TE    = f(y_ui, y_ue) - f(c_ui, c_e)
//! NDE   = f(c_ui, y_ue) - f(c_ui, c_e)
//! TIE   = TE - NDE      = f(y_ui, y_ue) - f(c_ui, y_ue)
//! NIE   = f(y_ui, c_e)  - f(c_ui, c_e)
//! TDE   = TE - NIE
//! ```
//!
//! TIE is the debiased ranking score: it keeps the indirect (item) path
//! while the direct exposure effect, common to both terms, cancels.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::eval::Ranker;
use crate::fusion::FusionStrategy;
use crate::scorer::{Branch, TwoBranchScorer};

/// Which score ranks items at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Fused,
    Te,
    Nde,
    Tie,
    Nie,
    Tde,
}

impl EffectKind {
    pub const ALL: [EffectKind; 6] = [
        EffectKind::Fused,
        EffectKind::Te,
        EffectKind::Nde,
        EffectKind::Tie,
        EffectKind::Nie,
        EffectKind::Tde,
    ];
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EffectKind::Fused => "fused",
            EffectKind::Te => "te",
            EffectKind::Nde => "nde",
            EffectKind::Tie => "tie",
            EffectKind::Nie => "nie",
            EffectKind::Tde => "tde",
        };
        f.write_str(name)
    }
}

impl FromStr for EffectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(EffectKind::Fused),
            "te" => Ok(EffectKind::Te),
            "nde" => Ok(EffectKind::Nde),
            "tie" => Ok(EffectKind::Tie),
            "nie" => Ok(EffectKind::Nie),
            "tde" => Ok(EffectKind::Tde),
            other => Err(Error::UnknownName {
                what: "inference kind",
                value: other.to_string(),
                expected: "fused, te, nde, tie, nie, tde",
            }),
        }
    }
}

/// Per-user expectation constants: mean branch scores over the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub c_ui: f64,
    pub c_e: f64,
}

/// Which items the expectation constants average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceScope {
    /// The whole catalog (default).
    Catalog,
    /// Only the candidate items (exclusions removed); ablation option.
    Candidates,
}

impl Default for ReferenceScope {
    fn default() -> Self {
        ReferenceScope::Catalog
    }
}

/// Means of both branch scores for one user over the full catalog.
pub fn reference_constants(
    scorer: &TwoBranchScorer,
    features: &FeatureTable,
    user: u32,
) -> Result<ReferenceConstants> {
    let y_ui = scorer.score_all(features, user, Branch::Item);
    let y_ue = scorer.score_all(features, user, Branch::Exposure);
    constants_from_scores(&y_ui, &y_ue, None)
}

fn constants_from_scores(
    y_ui: &[f64],
    y_ue: &[f64],
    keep: Option<&[bool]>,
) -> Result<ReferenceConstants> {
    let mut sum_ui = 0.0;
    let mut sum_ue = 0.0;
    let mut n = 0usize;
    for i in 0..y_ui.len() {
        if keep.is_none_or(|k| k[i]) {
            sum_ui += y_ui[i];
            sum_ue += y_ue[i];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "reference constants need at least one item".into(),
        ));
    }
    Ok(ReferenceConstants {
        c_ui: sum_ui / n as f64,
        c_e: sum_ue / n as f64,
    })
}

/// Effect scores from raw branch scores. The pure core of
/// [`effect_scores`]; useful when score matrices come from elsewhere.
pub fn effect_scores_from(
    y_ui: &[f64],
    y_ue: &[f64],
    refs: ReferenceConstants,
    strategy: FusionStrategy,
    kind: EffectKind,
) -> Vec<f64> {
    assert_eq!(y_ui.len(), y_ue.len());
    let f_ref = strategy.fuse(refs.c_ui, refs.c_e);
    y_ui.iter()
        .zip(y_ue)
        .map(|(&ui, &ue)| match kind {
            EffectKind::Fused => strategy.fuse(ui, ue),
            EffectKind::Te => strategy.fuse(ui, ue) - f_ref,
            EffectKind::Nde => strategy.fuse(refs.c_ui, ue) - f_ref,
            EffectKind::Tie => strategy.tie(ui, ue, refs.c_ui),
            EffectKind::Nie => strategy.nie(ui, refs.c_ui, refs.c_e),
            EffectKind::Tde => {
                let te = strategy.fuse(ui, ue) - f_ref;
                let nie = strategy.nie(ui, refs.c_ui, refs.c_e);
                te - nie
            }
        })
        .collect()
}

/// Effect scores for one user over every item in the catalog.
pub fn effect_scores(
    scorer: &TwoBranchScorer,
    features: &FeatureTable,
    strategy: FusionStrategy,
    kind: EffectKind,
    user: u32,
) -> Vec<f64> {
    let y_ui = scorer.score_all(features, user, Branch::Item);
    let y_ue = scorer.score_all(features, user, Branch::Exposure);
    let refs = constants_from_scores(&y_ui, &y_ue, None).expect("non-empty catalog");
    effect_scores_from(&y_ui, &y_ue, refs, strategy, kind)
}

/// Items not excluded, sorted by effect descending; ties break by
/// ascending item index.
pub fn rank_items(effect: &[f64], exclude: &HashSet<u32>) -> Vec<u32> {
    let mut ranked: Vec<u32> = (0..effect.len() as u32)
        .filter(|i| !exclude.contains(i))
        .collect();
    ranked.sort_by(|&a, &b| {
        effect[b as usize]
            .partial_cmp(&effect[a as usize])
            .expect("finite effect scores")
            .then(a.cmp(&b))
    });
    ranked
}

/// A [`Ranker`] that scores with a trained model, computes one effect
/// kind, and ranks the non-excluded catalog. Item representations are
/// projected once on first use and shared across users; the resulting
/// scores are bit-identical to per-item scoring.
pub struct EffectRanker<'a> {
    pub scorer: &'a TwoBranchScorer,
    pub features: &'a FeatureTable,
    pub strategy: FusionStrategy,
    pub kind: EffectKind,
    pub scope: ReferenceScope,
    reps: std::sync::OnceLock<crate::scorer::ItemReps>,
}

impl<'a> EffectRanker<'a> {
    pub fn new(
        scorer: &'a TwoBranchScorer,
        features: &'a FeatureTable,
        strategy: FusionStrategy,
        kind: EffectKind,
    ) -> Self {
        Self {
            scorer,
            features,
            strategy,
            kind,
            scope: ReferenceScope::Catalog,
            reps: std::sync::OnceLock::new(),
        }
    }

    pub fn with_scope(mut self, scope: ReferenceScope) -> Self {
        self.scope = scope;
        self
    }

    /// Effect scores for `user`, honoring the reference scope.
    pub fn scores(&self, user: u32, exclude: &HashSet<u32>) -> Vec<f64> {
        let reps = self.reps.get_or_init(|| self.scorer.item_reps(self.features));
        let y_ui = self.scorer.score_all_cached(reps, user, Branch::Item);
        let y_ue = self.scorer.score_all_cached(reps, user, Branch::Exposure);
        let refs = match self.scope {
            ReferenceScope::Catalog => constants_from_scores(&y_ui, &y_ue, None),
            ReferenceScope::Candidates => {
                let keep: Vec<bool> = (0..y_ui.len() as u32)
                    .map(|i| !exclude.contains(&i))
                    .collect();
                constants_from_scores(&y_ui, &y_ue, Some(&keep))
            }
        }
        .expect("non-empty candidate set");
        effect_scores_from(&y_ui, &y_ue, refs, self.strategy, self.kind)
    }
}

impl Ranker for EffectRanker<'_> {
    fn rank(&self, user: u32, exclude: &HashSet<u32>) -> Vec<u32> {
        rank_items(&self.scores(user, exclude), exclude)
    }
}
