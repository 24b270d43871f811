//! The two-branch scoring model.
//!
//! One branch scores a user against the full item (exposure and content
//! features aggregated through a linear projection), the other against
//! the exposure features alone. Both are plain factorization scorers:
//!
//! ```text
//! y_ui = user_item_emb[u] . item_proj [e; t] + item_bias[i]
//! y_ue = user_exp_emb[u]  . exp_proj  e      + exp_bias[i]
//! ```
//!
//! Scoring never mutates the model; training owns it exclusively while
//! parameters change.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

/// Which branch of the model a score request targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `y_ui`: user x aggregated item features.
    Item,
    /// `y_ue`: user x exposure features only.
    Exposure,
}

/// Structural options fixed at init time and carried in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerOptions {
    /// Both branches read the same user embedding.
    pub share_user_emb: bool,
    /// Apply tanh after the item-feature projection.
    pub hidden_tanh: bool,
    /// Zero the exposure block of the item-branch input (content-only
    /// training) .
    pub zero_exposure_input: bool,
}

impl Default for ScorerOptions {
    fn default() -> Self {
        Self {
            share_user_emb: false,
            hidden_tanh: false,
            zero_exposure_input: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBranchScorer {
    pub dim: usize,
    pub d_e: usize,
    pub d_t: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub seed: u64,
    pub options: ScorerOptions,
    /// n_users x dim, row-major.
    pub user_item_emb: Vec<f64>,
    /// n_users x dim, row-major. Unused when `share_user_emb`.
    pub user_exp_emb: Vec<f64>,
    /// dim x (d_e + d_t), row-major.
    pub item_proj: Vec<f64>,
    /// dim x d_e, row-major.
    pub exp_proj: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub exp_bias: Vec<f64>,
}

impl TwoBranchScorer {
    /// Initializes embeddings and projections from a zero-mean uniform
    /// distribution scaled by 1/sqrt(fan_in); biases start at zero.
    /// Bitwise deterministic per seed.
    pub fn init(
        dim: usize,
        d_e: usize,
        d_t: usize,
        n_users: usize,
        n_items: usize,
        seed: u64,
        options: ScorerOptions,
    ) -> Result<Self> {
        for (name, v) in [
            ("dim", dim),
            ("d_e", d_e),
            ("d_t", d_t),
            ("n_users", n_users),
            ("n_items", n_items),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let scale = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-scale..scale)).collect()
        };
        Ok(Self {
            dim,
            d_e,
            d_t,
            n_users,
            n_items,
            seed,
            options,
            user_item_emb: uniform(n_users * dim, dim),
            user_exp_emb: uniform(n_users * dim, dim),
            item_proj: uniform(dim * (d_e + d_t), d_e + d_t),
            exp_proj: uniform(dim * d_e, d_e),
            item_bias: vec![0.0; n_items],
            exp_bias: vec![0.0; n_items],
        })
    }

    pub fn user_item(&self, user: u32) -> &[f64] {
        let u = user as usize;
        &self.user_item_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn user_exp(&self, user: u32) -> &[f64] {
        if self.options.share_user_emb {
            return self.user_item(user);
        }
        let u = user as usize;
        &self.user_exp_emb[u * self.dim..(u + 1) * self.dim]
    }

    /// Zeroes every exposure-branch parameter. Used by training modes
    /// that disable the branch so that `y_ue` is exactly 0 everywhere.
    pub fn disable_exposure_branch(&mut self) {
        self.user_exp_emb.iter_mut().for_each(|v| *v = 0.0);
        self.exp_proj.iter_mut().for_each(|v| *v = 0.0);
        self.exp_bias.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Aggregated item representation: `item_proj [e; t]`, optionally
    /// through tanh. The exposure block is zeroed under content-only
    /// options.
    pub fn aggregate_item(&self, features: &FeatureTable, item: u32) -> Vec<f64> {
        let e = features.exposure(item);
        let t = features.content(item);
        let cols = self.d_e + self.d_t;
        let mut out = vec![0.0; self.dim];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.item_proj[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            if !self.options.zero_exposure_input {
                for (w, x) in row[..self.d_e].iter().zip(e) {
                    acc += w * x;
                }
            }
            for (w, x) in row[self.d_e..].iter().zip(t) {
                acc += w * x;
            }
            *slot = if self.options.hidden_tanh { acc.tanh() } else { acc };
        }
        out
    }

    /// Exposure representation: `exp_proj e`.
    pub fn exposure_rep(&self, features: &FeatureTable, item: u32) -> Vec<f64> {
        let e = features.exposure(item);
        let mut out = vec![0.0; self.dim];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.exp_proj[r * self.d_e..(r + 1) * self.d_e];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(e) {
                acc += w * x;
            }
            *slot = acc;
        }
        out
    }

    /// `y_ui` for one (user, item).
    pub fn score_item_branch(&self, features: &FeatureTable, user: u32, item: u32) -> f64 {
        let rep = self.aggregate_item(features, item);
        dot(self.user_item(user), &rep) + self.item_bias[item as usize]
    }

    /// `y_ue` for one (user, item).
    pub fn score_exposure_branch(&self, features: &FeatureTable, user: u32, item: u32) -> f64 {
        let rep = self.exposure_rep(features, item);
        dot(self.user_exp(user), &rep) + self.exp_bias[item as usize]
    }

    /// Scores every item for one user. Element k is bitwise identical to
    /// the corresponding single-item call.
    pub fn score_all(&self, features: &FeatureTable, user: u32, branch: Branch) -> Vec<f64> {
        (0..features.n_items() as u32)
            .map(|item| match branch {
                Branch::Item => self.score_item_branch(features, user, item),
                Branch::Exposure => self.score_exposure_branch(features, user, item),
            })
            .collect()
    }

    /// Precomputed per-item representations for repeated scoring.
    pub fn item_reps(&self, features: &FeatureTable) -> ItemReps {
        let n = features.n_items() as u32;
        let mut agg = Vec::with_capacity(n as usize * self.dim);
        let mut exp = Vec::with_capacity(n as usize * self.dim);
        for item in 0..n {
            agg.extend_from_slice(&self.aggregate_item(features, item));
            exp.extend_from_slice(&self.exposure_rep(features, item));
        }
        ItemReps {
            dim: self.dim,
            agg,
            exp,
        }
    }

    /// Branch scores for one user against cached representations.
    /// Bit-identical to [`TwoBranchScorer::score_all`].
    pub fn score_all_cached(&self, reps: &ItemReps, user: u32, branch: Branch) -> Vec<f64> {
        let n = reps.agg.len() / reps.dim;
        let (user_vec, mat, bias) = match branch {
            Branch::Item => (self.user_item(user), &reps.agg, &self.item_bias),
            Branch::Exposure => (self.user_exp(user), &reps.exp, &self.exp_bias),
        };
        (0..n)
            .map(|i| dot(user_vec, &mat[i * reps.dim..(i + 1) * reps.dim]) + bias[i])
            .collect()
    }

    /// Extends the model over a catalog with appended fake items, each
    /// inheriting the bias terms of the real item it was forged from.
    /// Only the feature vectors distinguish a fake from its original.
    pub fn extend_for_fakes(&self, fake_to_real: &[u32]) -> TwoBranchScorer {
        let mut extended = self.clone();
        for &real in fake_to_real {
            extended.item_bias.push(self.item_bias[real as usize]);
            extended.exp_bias.push(self.exp_bias[real as usize]);
        }
        extended.n_items += fake_to_real.len();
        extended
    }

    pub fn all_finite(&self) -> bool {
        self.user_item_emb
            .iter()
            .chain(&self.user_exp_emb)
            .chain(&self.item_proj)
            .chain(&self.exp_proj)
            .chain(&self.item_bias)
            .chain(&self.exp_bias)
            .all(|v| v.is_finite())
    }

    /// Writes a self-describing JSON checkpoint. Save -> load -> save is
    /// byte-identical.
    pub fn save(&self, path: &Path, train_config: &serde_json::Value) -> Result<()> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            train_config: train_config.clone(),
            scorer: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(TwoBranchScorer, serde_json::Value)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                message: format!("unsupported format `{}`", file.format),
            });
        }
        let s = &file.scorer;
        let expect = [
            ("user_item_emb", s.user_item_emb.len(), s.n_users * s.dim),
            ("user_exp_emb", s.user_exp_emb.len(), s.n_users * s.dim),
            ("item_proj", s.item_proj.len(), s.dim * (s.d_e + s.d_t)),
            ("exp_proj", s.exp_proj.len(), s.dim * s.d_e),
            ("item_bias", s.item_bias.len(), s.n_items),
            ("exp_bias", s.exp_bias.len(), s.n_items),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Checkpoint {
                    path: path.to_path_buf(),
                    message: format!("{name} has {got} values, expected {want}"),
                });
            }
        }
        Ok((file.scorer, file.train_config))
    }
}

const CHECKPOINT_FORMAT: &str = "unbait-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    train_config: serde_json::Value,
    scorer: TwoBranchScorer,
}

/// Cached per-item branch representations (see
/// [`TwoBranchScorer::item_reps`]).
pub struct ItemReps {
    dim: usize,
    agg: Vec<f64>,
    exp: Vec<f64>,
}

impl ItemReps {
    pub fn agg(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.agg[i * self.dim..(i + 1) * self.dim]
    }

    pub fn exp(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.exp[i * self.dim..(i + 1) * self.dim]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureTable;
    use rand::Rng;

    fn random_features(n_items: usize, d_e: usize, d_t: usize, seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = FeatureTable::new(d_e, d_t);
        for _ in 0..n_items {
            let e: Vec<f64> = (0..d_e).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..d_t).map(|_| rng.random_range(-1.0..1.0)).collect();
            table.push_item(&e, &t);
        }
        table
    }

    #[test]
    fn init_is_deterministic() {
        let a = TwoBranchScorer::init(8, 3, 4, 5, 6, 7, ScorerOptions::default()).unwrap();
        let b = TwoBranchScorer::init(8, 3, 4, 5, 6, 7, ScorerOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = TwoBranchScorer::init(8, 3, 4, 5, 6, 8, ScorerOptions::default()).unwrap();
        assert_ne!(a.user_item_emb, c.user_item_emb);
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(TwoBranchScorer::init(0, 3, 4, 5, 6, 7, ScorerOptions::default()).is_err());
        assert!(TwoBranchScorer::init(8, 3, 4, 5, 0, 7, ScorerOptions::default()).is_err());
    }

    #[test]
    fn zero_features_give_bias_only_scores() {
        let mut scorer = TwoBranchScorer::init(4, 2, 3, 2, 2, 1, ScorerOptions::default()).unwrap();
        scorer.item_bias[1] = 0.75;
        scorer.exp_bias[1] = -0.25;
        let mut features = FeatureTable::new(2, 3);
        features.push_item(&[0.0; 2], &[0.0; 3]);
        features.push_item(&[0.0; 2], &[0.0; 3]);
        assert_eq!(scorer.score_item_branch(&features, 0, 1), 0.75);
        assert_eq!(scorer.score_exposure_branch(&features, 0, 1), -0.25);
    }

    #[test]
    fn all_zero_parameters_score_zero() {
        let mut scorer = TwoBranchScorer::init(4, 2, 3, 2, 2, 1, ScorerOptions::default()).unwrap();
        scorer.user_item_emb.iter_mut().for_each(|v| *v = 0.0);
        scorer.user_exp_emb.iter_mut().for_each(|v| *v = 0.0);
        let features = random_features(2, 2, 3, 9);
        assert_eq!(scorer.score_item_branch(&features, 0, 0), 0.0);
        assert_eq!(scorer.score_exposure_branch(&features, 1, 1), 0.0);
    }

    #[test]
    fn identity_projection_copies_matching_column() {
        let mut scorer = TwoBranchScorer::init(5, 2, 3, 1, 1, 1, ScorerOptions::default()).unwrap();
        // item_proj = identity on the 5-dim concatenated input.
        scorer.item_proj.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..5 {
            scorer.item_proj[r * 5 + r] = 1.0;
        }
        let mut features = FeatureTable::new(2, 3);
        features.push_item(&[0.0, 1.0], &[0.0, 0.0, 0.0]);
        let rep = scorer.aggregate_item(&features, 0);
        assert_eq!(rep, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn scores_match_naive_recomputation() {
        let scorer = TwoBranchScorer::init(6, 3, 4, 4, 5, 21, ScorerOptions::default()).unwrap();
        let features = random_features(5, 3, 4, 22);
        for user in 0..4u32 {
            for item in 0..5u32 {
                // Naive oracle: explicit index arithmetic, no shared helpers.
                let mut naive_ui = scorer.item_bias[item as usize];
                for r in 0..6 {
                    let mut rep = 0.0;
                    for c in 0..3 {
                        rep += scorer.item_proj[r * 7 + c] * features.exposure(item)[c];
                    }
                    for c in 0..4 {
                        rep += scorer.item_proj[r * 7 + 3 + c] * features.content(item)[c];
                    }
                    naive_ui += scorer.user_item_emb[user as usize * 6 + r] * rep;
                }
                let mut naive_ue = scorer.exp_bias[item as usize];
                for r in 0..6 {
                    let mut rep = 0.0;
                    for c in 0..3 {
                        rep += scorer.exp_proj[r * 3 + c] * features.exposure(item)[c];
                    }
                    naive_ue += scorer.user_exp_emb[user as usize * 6 + r] * rep;
                }
                assert!((scorer.score_item_branch(&features, user, item) - naive_ui).abs() < 1e-12);
                assert!(
                    (scorer.score_exposure_branch(&features, user, item) - naive_ue).abs() < 1e-12
                );
            }
        }
    }

    #[test]
    fn exposure_branch_ignores_content() {
        let scorer = TwoBranchScorer::init(6, 3, 4, 2, 3, 33, ScorerOptions::default()).unwrap();
        let features = random_features(3, 3, 4, 34);
        let mut perturbed = FeatureTable::new(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for item in 0..3u32 {
            let t: Vec<f64> = (0..4).map(|_| rng.random_range(-9.0..9.0)).collect();
            perturbed.push_item(features.exposure(item), &t);
        }
        for user in 0..2u32 {
            for item in 0..3u32 {
                assert_eq!(
                    scorer.score_exposure_branch(&features, user, item),
                    scorer.score_exposure_branch(&perturbed, user, item)
                );
            }
        }
    }

    #[test]
    fn batch_scoring_is_bitwise_elementwise() {
        let scorer = TwoBranchScorer::init(7, 2, 2, 3, 9, 77, ScorerOptions::default()).unwrap();
        let features = random_features(9, 2, 2, 78);
        let reps = scorer.item_reps(&features);
        for user in 0..3u32 {
            for branch in [Branch::Item, Branch::Exposure] {
                let batch = scorer.score_all(&features, user, branch);
                assert_eq!(batch.len(), 9);
                let cached = scorer.score_all_cached(&reps, user, branch);
                for item in 0..9u32 {
                    let single = match branch {
                        Branch::Item => scorer.score_item_branch(&features, user, item),
                        Branch::Exposure => scorer.score_exposure_branch(&features, user, item),
                    };
                    assert_eq!(batch[item as usize], single);
                    assert_eq!(cached[item as usize], single);
                }
            }
        }
    }

    #[test]
    fn single_item_catalog() {
        let scorer = TwoBranchScorer::init(4, 2, 2, 2, 1, 5, ScorerOptions::default()).unwrap();
        let features = random_features(1, 2, 2, 6);
        assert_eq!(scorer.score_all(&features, 0, Branch::Item).len(), 1);
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let scorer = TwoBranchScorer::init(4, 2, 3, 3, 4, 99, ScorerOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        let cfg = serde_json::json!({"mode": "nt", "alpha": 0.0});
        scorer.save(&p1, &cfg).unwrap();
        let (loaded, cfg_back) = TwoBranchScorer::load(&p1).unwrap();
        assert_eq!(loaded, scorer);
        assert_eq!(cfg_back, cfg);
        loaded.save(&p2, &cfg_back).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn fake_extension_inherits_biases() {
        let mut scorer = TwoBranchScorer::init(4, 2, 2, 2, 3, 1, ScorerOptions::default()).unwrap();
        scorer.item_bias = vec![0.1, 0.2, 0.3];
        scorer.exp_bias = vec![-0.1, -0.2, -0.3];
        let extended = scorer.extend_for_fakes(&[2, 0]);
        assert_eq!(extended.n_items, 5);
        assert_eq!(extended.item_bias, vec![0.1, 0.2, 0.3, 0.3, 0.1]);
        assert_eq!(extended.exp_bias, vec![-0.1, -0.2, -0.3, -0.3, -0.1]);
    }
}
