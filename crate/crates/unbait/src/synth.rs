//! Synthetic clickbait worlds and the fake-item ranking probe.
//!
//! The generator plants a ground truth with three latent vectors per
//! entity: user preference, item attractiveness (drives clicks), and
//! item quality (drives post-click likes). For ordinary items the
//! attract vector is sampled correlated with quality — appealing items
//! tend to satisfy. A configurable fraction of items is clickbait: their
//! attract vector is scaled up and their quality vector is anti-aligned
//! with their own attract direction, so exactly the users drawn in by
//! the exposure are the ones disappointed by the content.
//!
//! Observed features are the noisy latents: exposure = attract + noise,
//! content = quality + noise. Per user, a fixed number of item exposures
//! is sampled uniformly; a click fires with probability
//! `sigmoid(user_pref . item_attract)` and, given a click, a like with
//! probability `sigmoid(user_pref . item_quality)`. Latent components
//! are scaled so these dot products are unit-variance.
//!
//! The poisoning probe forges, for each liked test pair, a fake item
//! with the real item's content but exposure features stolen from a
//! low like/click-ratio donor; `rank_diff` measures how far below its
//! original each fake lands.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    derive_seed, DataSplit, FeatureTable, Interaction, InteractionLog, KeyIndex, RatioStats,
};
use crate::error::{Error, Result};
use crate::eval::Ranker;
use crate::fusion::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,
    /// Fraction of items planted as clickbait.
    pub clickbait_fraction: f64,
    /// Observation noise on features, relative to the latent component scale.
    pub feature_noise: f64,
    /// Item exposures sampled per user (without replacement).
    pub interactions_per_user: usize,
    /// Attract-vector scale factor for clickbait items.
    pub attract_scale: f64,
    /// Strength of the quality component forced against a clickbait
    /// item's own attract direction, in standardized click-logit units.
    pub anti_align: f64,
    /// Correlation between attract and quality for ordinary items.
    pub attract_quality_corr: f64,
    /// Standard deviation of the click/like logits; the latent component
    /// scale is derived from it. Larger values concentrate clicks and
    /// likes on each user's top-affinity items.
    pub logit_std: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            n_items: 2000,
            latent_dim: 16,
            clickbait_fraction: 0.6,
            feature_noise: 0.3,
            interactions_per_user: 300,
            attract_scale: 1.0,
            anti_align: 2.0,
            attract_quality_corr: 0.5,
            logit_std: 2.0,
            seed: 42,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.n_users == 0 || self.n_items == 0 || self.latent_dim == 0 {
            return err("n_users, n_items, and latent_dim must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.clickbait_fraction) {
            return err("clickbait_fraction must be in [0, 1]");
        }
        if self.feature_noise < 0.0 {
            return err("feature_noise must be >= 0");
        }
        if self.interactions_per_user == 0 || self.interactions_per_user > self.n_items {
            return err("interactions_per_user must be in [1, n_items]");
        }
        if self.attract_scale <= 0.0 {
            return err("attract_scale must be > 0");
        }
        if self.anti_align < 0.0 {
            return err("anti_align must be >= 0");
        }
        if !(-1.0..=1.0).contains(&self.attract_quality_corr) {
            return err("attract_quality_corr must be in [-1, 1]");
        }
        if self.logit_std <= 0.0 {
            return err("logit_std must be > 0");
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
            "n_users" => self.n_users = value.parse().map_err(|_| bad("expected an integer"))?,
            "n_items" => self.n_items = value.parse().map_err(|_| bad("expected an integer"))?,
            "latent_dim" => {
                self.latent_dim = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "clickbait_fraction" => {
                self.clickbait_fraction = value.parse().map_err(|_| bad("expected a number"))?
            }
            "feature_noise" => {
                self.feature_noise = value.parse().map_err(|_| bad("expected a number"))?
            }
            "interactions_per_user" => {
                self.interactions_per_user =
                    value.parse().map_err(|_| bad("expected an integer"))?
            }
            "attract_scale" => {
                self.attract_scale = value.parse().map_err(|_| bad("expected a number"))?
            }
            "anti_align" => {
                self.anti_align = value.parse().map_err(|_| bad("expected a number"))?
            }
            "attract_quality_corr" => {
                self.attract_quality_corr = value.parse().map_err(|_| bad("expected a number"))?
            }
            "logit_std" => {
                self.logit_std = value.parse().map_err(|_| bad("expected a number"))?
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
}

/// The latent state behind a generated world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub latent_dim: usize,
    /// n_users x latent_dim, row-major.
    pub user_pref: Vec<f64>,
    /// n_items x latent_dim, row-major.
    pub item_attract: Vec<f64>,
    /// n_items x latent_dim, row-major.
    pub item_quality: Vec<f64>,
    pub clickbait: Vec<bool>,
}

impl GroundTruth {
    pub fn user_pref(&self, user: u32) -> &[f64] {
        let u = user as usize;
        &self.user_pref[u * self.latent_dim..(u + 1) * self.latent_dim]
    }

    pub fn attract(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.item_attract[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn quality(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.item_quality[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generates a clickbait world: ground truth, observed features, and a
/// click log with observed post-click likes. Deterministic per seed.
pub fn generate_world(config: &WorldConfig) -> Result<(InteractionLog, FeatureTable, GroundTruth)> {
    config.validate()?;
    let dim = config.latent_dim;
    // Component scale giving user-item dot products the configured
    // standard deviation.
    let comp_scale = (config.logit_std * config.logit_std / dim as f64).powf(0.25);
    let latent = Normal::new(0.0, comp_scale).expect("valid normal");

    let mut rng_users = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x01));
    let mut rng_items = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x02));
    let mut rng_plant = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x03));
    let mut rng_noise = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x04));
    let mut rng_clicks = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x05));

    let user_pref: Vec<f64> = (0..config.n_users * dim)
        .map(|_| latent.sample(&mut rng_users))
        .collect();

    // Quality first, then attract as a correlated mixture: appealing
    // items tend to satisfy, which is what lets clicks carry any
    // information about likes at all.
    let item_quality: Vec<f64> = (0..config.n_items * dim)
        .map(|_| latent.sample(&mut rng_items))
        .collect();
    let corr = config.attract_quality_corr;
    let resid = (1.0 - corr * corr).sqrt();
    let item_attract: Vec<f64> = item_quality
        .iter()
        .map(|q| corr * q + resid * latent.sample(&mut rng_items))
        .collect();

    let mut item_quality = item_quality;
    let mut item_attract = item_attract;

    // Plant clickbait: boost attractiveness, then force the quality
    // component along the item's own attract direction negative so the
    // users the exposure draws in are the ones the content disappoints.
    let n_clickbait = (config.clickbait_fraction * config.n_items as f64).round() as usize;
    let mut clickbait = vec![false; config.n_items];
    for idx in index_sample(&mut rng_plant, config.n_items, n_clickbait) {
        clickbait[idx] = true;
    }
    for item in 0..config.n_items {
        if !clickbait[item] {
            continue;
        }
        let a = &mut item_attract[item * dim..(item + 1) * dim];
        let norm = dot(a, a).sqrt();
        if norm == 0.0 {
            continue;
        }
        let direction: Vec<f64> = a.iter().map(|v| v / norm).collect();
        a.iter_mut().for_each(|v| *v *= config.attract_scale);
        let q = &mut item_quality[item * dim..(item + 1) * dim];
        let parallel = dot(q, &direction);
        // Planted coefficient in click-logit units: a user with attract
        // response z sees its like logit shifted by -anti_align * z.
        let planted = -config.anti_align / comp_scale;
        for (qv, d) in q.iter_mut().zip(&direction) {
            *qv += (planted - parallel) * d;
        }
    }

    // Observed features: latents plus relative Gaussian noise.
    let noise_std = config.feature_noise * comp_scale;
    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut features = FeatureTable::new(dim, dim);
    for item in 0..config.n_items {
        let mut noisy = |latents: &[f64]| -> Vec<f64> {
            latents
                .iter()
                .map(|v| {
                    if noise_std > 0.0 {
                        v + noise.sample(&mut rng_noise)
                    } else {
                        *v
                    }
                })
                .collect()
        };
        let e = noisy(&item_attract[item * dim..(item + 1) * dim]);
        let t = noisy(&item_quality[item * dim..(item + 1) * dim]);
        features.push_item(&e, &t);
    }

    // Interactions: uniform exposures, click then like.
    let mut users = KeyIndex::new();
    for u in 0..config.n_users {
        users.insert_or_get(&format!("u{u}"));
    }
    let mut items = KeyIndex::new();
    for i in 0..config.n_items {
        items.insert_or_get(&format!("i{i}"));
    }
    let mut interactions = Vec::new();
    for user in 0..config.n_users {
        let pref = &user_pref[user * dim..(user + 1) * dim];
        let exposed = index_sample(&mut rng_clicks, config.n_items, config.interactions_per_user);
        for item in exposed {
            let attract = &item_attract[item * dim..(item + 1) * dim];
            let p_click = sigmoid(dot(pref, attract));
            if rng_clicks.random_bool(p_click) {
                let quality = &item_quality[item * dim..(item + 1) * dim];
                let p_like = sigmoid(dot(pref, quality));
                let liked = rng_clicks.random_bool(p_like);
                interactions.push(Interaction {
                    user: user as u32,
                    item: item as u32,
                    clicked: true,
                    liked: Some(liked),
                });
            }
        }
    }

    let log = InteractionLog::new(users, items, interactions);
    let truth = GroundTruth {
        latent_dim: dim,
        user_pref,
        item_attract,
        item_quality,
        clickbait,
    };
    Ok((log, features, truth))
}

/// A liked test pair with its forged twin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoisonedTriple {
    pub user: u32,
    pub real_item: u32,
    pub fake_item: u32,
}

/// Forges one fake item per liked test pair: the real item's content
/// features with exposure features stolen from a random donor whose
/// like/click ratio is below 0.5 (never the real item itself). Fakes are
/// appended to a copy of the catalog; training data is untouched.
pub fn poison_test(
    split: &DataSplit,
    features: &FeatureTable,
    stats: &RatioStats,
    seed: u64,
) -> Result<(Vec<PoisonedTriple>, FeatureTable)> {
    let donors: Vec<u32> = stats
        .defined_ratios()
        .filter(|&(_, r)| r < 0.5)
        .map(|(i, _)| i)
        .collect();
    if donors.is_empty() {
        return Err(Error::NoDonorItem);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xFA6E));
    let mut extended = features.clone();
    let mut triples = Vec::with_capacity(split.test.interactions().len());
    for it in split.test.interactions() {
        if donors.len() == 1 && donors[0] == it.item {
            return Err(Error::NoDonorItem);
        }
        // Rejection-sample a donor different from the real item.
        let donor = loop {
            let cand = donors[rng.random_range(0..donors.len())];
            if cand != it.item {
                break cand;
            }
        };
        let fake_item = extended.push_item(features.exposure(donor), features.content(it.item));
        triples.push(PoisonedTriple {
            user: it.user,
            real_item: it.item,
            fake_item,
        });
    }
    Ok((triples, extended))
}

/// rank(fake) - rank(real) per triple, in triple order. Each user's
/// candidate list is the real catalog minus that user's training clicks
/// plus that user's own fakes; other users' fakes never compete. Ties
/// resolve by item index, so a score-tied fake (higher index) lands just
/// below its real twin and the difference is at least +1.
pub fn rank_diff(
    ranker: &dyn Ranker,
    triples: &[PoisonedTriple],
    split: &DataSplit,
    n_real_items: usize,
    n_total_items: usize,
) -> Vec<i64> {
    let train_clicked = split.train.clicked_sets();
    let mut by_user: HashMap<u32, Vec<usize>> = HashMap::new();
    for (pos, triple) in triples.iter().enumerate() {
        by_user.entry(triple.user).or_default().push(pos);
    }
    let mut users: Vec<u32> = by_user.keys().copied().collect();
    users.sort_unstable();

    let per_user: Vec<(u32, HashMap<u32, usize>)> = users
        .par_iter()
        .map(|&user| {
            let own_fakes: HashSet<u32> = by_user[&user]
                .iter()
                .map(|&pos| triples[pos].fake_item)
                .collect();
            let mut exclude: HashSet<u32> = train_clicked
                .get(user as usize)
                .cloned()
                .unwrap_or_default();
            for fake in n_real_items as u32..n_total_items as u32 {
                if !own_fakes.contains(&fake) {
                    exclude.insert(fake);
                }
            }
            let ranked = ranker.rank(user, &exclude);
            let positions: HashMap<u32, usize> = ranked
                .iter()
                .enumerate()
                .map(|(rank0, &item)| (item, rank0 + 1))
                .collect();
            (user, positions)
        })
        .collect();
    let positions: HashMap<u32, HashMap<u32, usize>> = per_user.into_iter().collect();

    triples
        .iter()
        .map(|t| {
            let ranks = &positions[&t.user];
            ranks[&t.fake_item] as i64 - ranks[&t.real_item] as i64
        })
        .collect()
}

/// Mean and fixed-width histogram of rank differences.
#[derive(Debug, Clone, Serialize)]
pub struct RankDiffSummary {
    pub mean: f64,
    pub bucket_width: i64,
    /// Lower edge of the first bucket.
    pub start: i64,
    pub buckets: Vec<usize>,
}

pub fn rank_diff_summary(values: &[i64], bucket_width: i64) -> Result<RankDiffSummary> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bucket_width = bucket_width.max(1);
    let mean = values.iter().sum::<i64>() as f64 / values.len() as f64;
    let min = *values.iter().min().expect("non-empty");
    let max = *values.iter().max().expect("non-empty");
    let start = min.div_euclid(bucket_width) * bucket_width;
    let n_buckets = ((max - start) / bucket_width + 1) as usize;
    let mut buckets = vec![0usize; n_buckets];
    for v in values {
        buckets[((v - start) / bucket_width) as usize] += 1;
    }
    Ok(RankDiffSummary {
        mean,
        bucket_width,
        start,
        buckets,
    })
}

impl RankDiffSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket_low,bucket_high,count\n");
        for (k, count) in self.buckets.iter().enumerate() {
            let low = self.start + k as i64 * self.bucket_width;
            out.push_str(&format!("{},{},{}\n", low, low + self.bucket_width - 1, count));
        }
        out
    }
}
