//! Interaction logs, feature tables, dataset splits, and like/click ratios.
//!
//! External keys are arbitrary strings; they map to dense 0-based indices
//! in first-seen order and stay stable across a run. All operations here
//! are pure functions of their inputs (plus a seed where noted), so two
//! runs over the same files always produce identical structures.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derives an independent RNG seed from a base seed and a stream tag
/// (splitmix64). Keeps separate sampling concerns on separate streams
/// without depending on any RNG's stream API.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bidirectional map between string keys and dense indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyIndex {
    keys: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl KeyIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_or_get(&mut self, key: &str) -> u32 {
        if let Some(&idx) = self.lookup.get(key) {
            return idx;
        }
        let idx = self.keys.len() as u32;
        self.keys.push(key.to_string());
        self.lookup.insert(key.to_string(), idx);
        idx
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.lookup.get(key).copied()
    }

    pub fn key(&self, idx: u32) -> &str {
        &self.keys[idx as usize]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// One (user, item) interaction. `liked` is present only when post-click
/// feedback was observed; `liked == Some(true)` implies `clicked`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub clicked: bool,
    pub liked: Option<bool>,
}

/// A deduplicated interaction log with dense user/item index maps.
#[derive(Debug, Clone, Default)]
pub struct InteractionLog {
    users: KeyIndex,
    items: KeyIndex,
    interactions: Vec<Interaction>,
}

impl InteractionLog {
    pub fn new(users: KeyIndex, items: KeyIndex, interactions: Vec<Interaction>) -> Self {
        Self {
            users,
            items,
            interactions,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &KeyIndex {
        &self.users
    }

    pub fn items(&self) -> &KeyIndex {
        &self.items
    }

    pub fn items_mut(&mut self) -> &mut KeyIndex {
        &mut self.items
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn clicks(&self) -> impl Iterator<Item = &Interaction> {
        self.interactions.iter().filter(|it| it.clicked)
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// Items clicked by each user, as index sets.
    pub fn clicked_sets(&self) -> Vec<std::collections::HashSet<u32>> {
        let mut sets = vec![std::collections::HashSet::new(); self.n_users()];
        for it in self.clicks() {
            sets[it.user as usize].insert(it.item);
        }
        sets
    }

    /// Loads the `user,item,click,like` CSV described in the file formats
    /// section of the README. Duplicate (user, item) rows collapse with OR
    /// on both flags.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, &e))?;
        {
            let headers = reader.headers().map_err(|e| csv_error(path, &e))?;
            let expected = ["user", "item", "click", "like"];
            let got: Vec<&str> = headers.iter().collect();
            if got != expected {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header `user,item,click,like`, got `{}`", got.join(",")),
                ));
            }
        }

        let mut users = KeyIndex::new();
        let mut items = KeyIndex::new();
        let mut interactions: Vec<Interaction> = Vec::new();
        let mut seen: HashMap<(u32, u32), usize> = HashMap::new();

        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, &e))?;
            let line = record
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            if record.len() != 4 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected 4 fields, got {}", record.len()),
                ));
            }
            let user = users.insert_or_get(&record[0]);
            let item = items.insert_or_get(&record[1]);
            let clicked = match &record[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("click must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let liked = match &record[3] {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("like must be 0, 1, or empty, got `{other}`"),
                    ))
                }
            };
            if liked.is_some() && !clicked {
                return Err(Error::parse(
                    path,
                    line,
                    "post-click feedback recorded without a click",
                ));
            }
            match seen.entry((user, item)) {
                std::collections::hash_map::Entry::Occupied(slot) => {
                    let existing = &mut interactions[*slot.get()];
                    existing.clicked |= clicked;
                    existing.liked = merge_liked(existing.liked, liked);
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(interactions.len());
                    interactions.push(Interaction {
                        user,
                        item,
                        clicked,
                        liked,
                    });
                }
            }
        }

        Ok(Self {
            users,
            items,
            interactions,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("user,item,click,like\n");
        for it in &self.interactions {
            let like = match it.liked {
                None => "",
                Some(false) => "0",
                Some(true) => "1",
            };
            writeln!(
                out,
                "{},{},{},{}",
                self.users.key(it.user),
                self.items.key(it.item),
                u8::from(it.clicked),
                like
            )
            .expect("string write");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// A copy of this log holding only the given interactions (maps shared).
    fn with_interactions(&self, interactions: Vec<Interaction>) -> Self {
        Self {
            users: self.users.clone(),
            items: self.items.clone(),
            interactions,
        }
    }
}

fn merge_liked(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some(x), Some(y)) => Some(x || y),
    }
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    let line = match e.kind() {
        csv::ErrorKind::Utf8 { pos, .. } | csv::ErrorKind::UnequalLengths { pos, .. } => {
            pos.as_ref().map(|p| p.line()).unwrap_or(0)
        }
        _ => 0,
    };
    Error::parse(path, line, e.to_string())
}

/// Per-item exposure/content feature vectors, dense by item index.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    exposure: Vec<f64>,
    content: Vec<f64>,
    d_e: usize,
    d_t: usize,
    n_items: usize,
}

impl FeatureTable {
    pub fn new(d_e: usize, d_t: usize) -> Self {
        Self {
            exposure: Vec::new(),
            content: Vec::new(),
            d_e,
            d_t,
            n_items: 0,
        }
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn d_t(&self) -> usize {
        self.d_t
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn exposure(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.exposure[i * self.d_e..(i + 1) * self.d_e]
    }

    pub fn content(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.content[i * self.d_t..(i + 1) * self.d_t]
    }

    /// Appends an item and returns its index.
    pub fn push_item(&mut self, exposure: &[f64], content: &[f64]) -> u32 {
        assert_eq!(exposure.len(), self.d_e, "exposure dimension mismatch");
        assert_eq!(content.len(), self.d_t, "content dimension mismatch");
        self.exposure.extend_from_slice(exposure);
        self.content.extend_from_slice(content);
        let idx = self.n_items as u32;
        self.n_items += 1;
        idx
    }

    /// Loads the `item,kind,v0,...` CSV. Items not yet present in `items`
    /// are appended to the map (feature-only items are still ranking
    /// candidates). Every indexed item must end up with both vectors.
    pub fn load_csv(path: &Path, items: &mut KeyIndex) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, &e))?;

        let mut exposure: HashMap<u32, Vec<f64>> = HashMap::new();
        let mut content: HashMap<u32, Vec<f64>> = HashMap::new();
        let mut d_e: Option<usize> = None;
        let mut d_t: Option<usize> = None;

        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, &e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() < 3 {
                return Err(Error::parse(path, line, "expected `item,kind,v0,...`"));
            }
            let item = items.insert_or_get(&record[0]);
            let mut values = Vec::with_capacity(record.len() - 2);
            for field in record.iter().skip(2) {
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::parse(path, line, format!("not a number: `{field}`"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(path, line, "non-finite feature value"));
                }
                values.push(v);
            }
            if values.is_empty() {
                return Err(Error::parse(path, line, "empty feature vector"));
            }
            let (store, dim) = match &record[1] {
                "exposure" => (&mut exposure, &mut d_e),
                "content" => (&mut content, &mut d_t),
                other => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("kind must be `exposure` or `content`, got `{other}`"),
                    ))
                }
            };
            match dim {
                None => *dim = Some(values.len()),
                Some(d) if *d != values.len() => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("dimension mismatch: expected {d}, got {}", values.len()),
                    ))
                }
                Some(_) => {}
            }
            if store.insert(item, values).is_some() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("duplicate {} row for item `{}`", &record[1], &record[0]),
                ));
            }
        }

        let d_e = d_e.ok_or(Error::EmptyDataset)?;
        let d_t = d_t.ok_or(Error::EmptyDataset)?;
        let mut table = FeatureTable::new(d_e, d_t);
        for idx in 0..items.len() as u32 {
            let e = exposure.get(&idx).ok_or_else(|| Error::MissingFeature {
                item: items.key(idx).to_string(),
                kind: "exposure",
            })?;
            let t = content.get(&idx).ok_or_else(|| Error::MissingFeature {
                item: items.key(idx).to_string(),
                kind: "content",
            })?;
            table.push_item(e, t);
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path, items: &KeyIndex) -> Result<()> {
        let max_d = self.d_e.max(self.d_t);
        let mut out = String::from("item,kind");
        for k in 0..max_d {
            write!(out, ",v{k}").expect("string write");
        }
        out.push('\n');
        for idx in 0..self.n_items as u32 {
            for (kind, row) in [("exposure", self.exposure(idx)), ("content", self.content(idx))] {
                write!(out, "{},{}", items.key(idx), kind).expect("string write");
                for v in row {
                    write!(out, ",{v}").expect("string write");
                }
                out.push('\n');
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Loads an interaction log; delegates to [`InteractionLog::load_csv`].
pub fn load_interactions(path: &Path) -> Result<InteractionLog> {
    InteractionLog::load_csv(path)
}

/// Train/validation/test partition of a log. Test holds only liked
/// clicks; the three parts share the parent log's index maps.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: InteractionLog,
    pub validation: InteractionLog,
    pub test: InteractionLog,
    pub seed: u64,
}

/// Splits a log per user: 10% of liked clicks go to test (all of them
/// when the user has fewer than 10), 10% of the remaining clicks go to
/// validation, the rest is training data. Deterministic per seed.
pub fn split_dataset(log: &InteractionLog, seed: u64) -> Result<DataSplit> {
    if log.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5517));

    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); log.n_users()];
    let mut non_clicks: Vec<Interaction> = Vec::new();
    for (pos, it) in log.interactions().iter().enumerate() {
        if it.clicked {
            per_user[it.user as usize].push(pos);
        } else {
            non_clicks.push(*it);
        }
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();

    for positions in &per_user {
        let mut liked: Vec<usize> = positions
            .iter()
            .copied()
            .filter(|&p| log.interactions()[p].liked == Some(true))
            .collect();
        let n_test = if liked.len() < 10 {
            liked.len()
        } else {
            (0.10 * liked.len() as f64).round() as usize
        };
        liked.shuffle(&mut rng);
        let test_set: std::collections::HashSet<usize> = liked[..n_test].iter().copied().collect();
        test.extend(test_set.iter().map(|&p| log.interactions()[p]));

        let mut remaining: Vec<usize> = positions
            .iter()
            .copied()
            .filter(|p| !test_set.contains(p))
            .collect();
        let n_val = (0.10 * remaining.len() as f64).round() as usize;
        remaining.shuffle(&mut rng);
        validation.extend(remaining[..n_val].iter().map(|&p| log.interactions()[p]));
        train.extend(remaining[n_val..].iter().map(|&p| log.interactions()[p]));
    }

    // HashSet iteration above would be nondeterministic; restore log order.
    test.sort_by_key(|it| (it.user, it.item));
    validation.sort_by_key(|it| (it.user, it.item));
    train.extend(non_clicks);
    train.sort_by_key(|it| (it.user, it.item));

    Ok(DataSplit {
        train: log.with_interactions(train),
        validation: log.with_interactions(validation),
        test: log.with_interactions(test),
        seed,
    })
}

/// One BPR training triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeTriple {
    pub user: u32,
    pub positive: u32,
    pub negative: u32,
}

/// Samples one negative item per training click: uniformly among the
/// items the user never clicked anywhere in `log`. Deterministic per
/// (seed, epoch); resampling with a new epoch gives fresh negatives.
pub fn sample_negatives(log: &InteractionLog, seed: u64, epoch: u64) -> Result<Vec<NegativeTriple>> {
    let clicked = log.clicked_sets();
    let positives: Vec<(u32, u32)> = log.clicks().map(|it| (it.user, it.item)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xAE60 ^ epoch.rotate_left(17)));
    let n_items = log.n_items();
    let mut triples = Vec::with_capacity(positives.len());
    for (user, positive) in positives {
        let negative = sample_negative_item(&clicked[user as usize], n_items, &mut rng)
            .ok_or_else(|| Error::NoNegativeCandidate {
                user: log.users().key(user).to_string(),
            })?;
        triples.push(NegativeTriple {
            user,
            positive,
            negative,
        });
    }
    Ok(triples)
}

/// Rejection-samples an item outside `clicked`; falls back to indexing
/// the explicit complement when the interacted set is nearly full.
pub(crate) fn sample_negative_item(
    clicked: &std::collections::HashSet<u32>,
    n_items: usize,
    rng: &mut ChaCha8Rng,
) -> Option<u32> {
    if clicked.len() >= n_items {
        return None;
    }
    for _ in 0..64 {
        let cand = rng.random_range(0..n_items as u32);
        if !clicked.contains(&cand) {
            return Some(cand);
        }
    }
    let complement: Vec<u32> = (0..n_items as u32).filter(|i| !clicked.contains(i)).collect();
    let pick = rng.random_range(0..complement.len());
    Some(complement[pick])
}

/// Per-item like and click counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioStats {
    pub like_count: Vec<u32>,
    pub click_count: Vec<u32>,
}

impl RatioStats {
    pub fn n_items(&self) -> usize {
        self.click_count.len()
    }

    /// like/click ratio; `None` when the item was never clicked.
    pub fn ratio(&self, item: u32) -> Option<f64> {
        let clicks = self.click_count[item as usize];
        if clicks == 0 {
            None
        } else {
            Some(f64::from(self.like_count[item as usize]) / f64::from(clicks))
        }
    }

    pub fn defined_ratios(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        (0..self.n_items() as u32).filter_map(|i| self.ratio(i).map(|r| (i, r)))
    }
}

/// Counts likes and clicks per item over the whole log.
pub fn like_click_ratio(log: &InteractionLog) -> RatioStats {
    let n = log.n_items();
    let mut like_count = vec![0u32; n];
    let mut click_count = vec![0u32; n];
    for it in log.clicks() {
        click_count[it.item as usize] += 1;
        if it.liked == Some(true) {
            like_count[it.item as usize] += 1;
        }
    }
    RatioStats {
        like_count,
        click_count,
    }
}

/// Item counts per equal-width ratio bucket over [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioHistogram {
    pub buckets: Vec<usize>,
    /// Items with no clicks, excluded from the buckets.
    pub undefined: usize,
}

/// Buckets items by like/click ratio into `n_groups` equal-width
/// intervals; the last bucket is closed at 1.0.
pub fn ratio_groups(stats: &RatioStats, n_groups: usize) -> Result<RatioHistogram> {
    if n_groups == 0 {
        return Err(Error::InvalidArgument("n_groups must be >= 1".into()));
    }
    let mut buckets = vec![0usize; n_groups];
    let mut undefined = 0usize;
    for item in 0..stats.n_items() as u32 {
        match stats.ratio(item) {
            None => undefined += 1,
            Some(r) => {
                let idx = ((r * n_groups as f64).floor() as usize).min(n_groups - 1);
                buckets[idx] += 1;
            }
        }
    }
    Ok(RatioHistogram { buckets, undefined })
}

/// Drops the top `proportion` of ratio-defined items (descending ratio,
/// ties by ascending index) together with all their interactions. Index
/// maps and the feature catalog stay untouched, so the removed items
/// simply become interaction-free.
pub fn filter_by_ratio(log: &InteractionLog, proportion: f64) -> Result<InteractionLog> {
    if !(0.0..1.0).contains(&proportion) {
        return Err(Error::InvalidArgument(format!(
            "proportion must be in [0, 1), got {proportion}"
        )));
    }
    let stats = like_click_ratio(log);
    let mut defined: Vec<(u32, f64)> = stats.defined_ratios().collect();
    defined.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let n_remove = (proportion * defined.len() as f64).floor() as usize;
    let removed: std::collections::HashSet<u32> =
        defined[..n_remove].iter().map(|&(i, _)| i).collect();
    let kept: Vec<Interaction> = log
        .interactions()
        .iter()
        .filter(|it| !removed.contains(&it.item))
        .copied()
        .collect();
    Ok(log.with_interactions(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn write_temp(contents: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn toy_log(rows: &[(&str, &str, bool, Option<bool>)]) -> InteractionLog {
        let mut users = KeyIndex::new();
        let mut items = KeyIndex::new();
        let interactions = rows
            .iter()
            .map(|&(u, i, clicked, liked)| Interaction {
                user: users.insert_or_get(u),
                item: items.insert_or_get(i),
                clicked,
                liked,
            })
            .collect();
        InteractionLog::new(users, items, interactions)
    }

    #[test]
    fn load_basic_rows() {
        let f = write_temp("user,item,click,like\nu0,i0,1,1\nu0,i1,1,0\n");
        let log = InteractionLog::load_csv(f.path()).unwrap();
        assert_eq!(log.interactions().len(), 2);
        assert_eq!(log.n_users(), 1);
        assert_eq!(log.n_items(), 2);
        assert_eq!(log.interactions()[0].liked, Some(true));
    }

    #[test]
    fn load_empty_file() {
        let f = write_temp("user,item,click,like\n");
        let log = InteractionLog::load_csv(f.path()).unwrap();
        assert!(log.is_empty());
        assert_eq!(log.n_users(), 0);
        assert_eq!(log.n_items(), 0);
    }

    #[test]
    fn like_without_click_is_rejected() {
        let f = write_temp("user,item,click,like\nu0,i0,0,1\n");
        let err = InteractionLog::load_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicates_collapse_with_or() {
        let f = write_temp("user,item,click,like\nu0,i0,1,\nu0,i0,1,1\nu0,i0,1,0\n");
        let log = InteractionLog::load_csv(f.path()).unwrap();
        assert_eq!(log.interactions().len(), 1);
        assert_eq!(log.interactions()[0].liked, Some(true));
        assert!(log.interactions()[0].clicked);
    }

    #[test]
    fn unobserved_like_stays_none() {
        let f = write_temp("user,item,click,like\nu0,i0,1,\n");
        let log = InteractionLog::load_csv(f.path()).unwrap();
        assert_eq!(log.interactions()[0].liked, None);
    }

    #[test]
    fn csv_round_trip() {
        let log = toy_log(&[
            ("a", "x", true, Some(true)),
            ("a", "y", true, None),
            ("b", "x", true, Some(false)),
        ]);
        let f = NamedTempFile::new().unwrap();
        log.write_csv(f.path()).unwrap();
        let back = InteractionLog::load_csv(f.path()).unwrap();
        assert_eq!(back.interactions(), log.interactions());
    }

    #[test]
    fn split_ten_percent_of_liked() {
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..100)
            .map(|i| (format!("u"), format!("i{i}"), true, Some(true)))
            .collect();
        let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        let log = toy_log(&borrowed);
        let split = split_dataset(&log, 3).unwrap();
        assert_eq!(split.test.interactions().len(), 10);
        assert!(split.test.interactions().iter().all(|it| it.liked == Some(true)));
    }

    #[test]
    fn split_small_user_sends_all_likes_to_test() {
        let log = toy_log(&[
            ("u", "a", true, Some(true)),
            ("u", "b", true, Some(true)),
            ("u", "c", true, Some(true)),
            ("u", "d", true, Some(false)),
        ]);
        let split = split_dataset(&log, 9).unwrap();
        assert_eq!(split.test.interactions().len(), 3);
    }

    #[test]
    fn split_is_deterministic() {
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..40)
            .flat_map(|u| {
                (0..30).map(move |i| {
                    (
                        format!("u{u}"),
                        format!("i{i}"),
                        true,
                        Some((u + i) % 3 == 0),
                    )
                })
            })
            .collect();
        let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        let log = toy_log(&borrowed);
        let a = split_dataset(&log, 42).unwrap();
        let b = split_dataset(&log, 42).unwrap();
        assert_eq!(a.train.interactions(), b.train.interactions());
        assert_eq!(a.validation.interactions(), b.validation.interactions());
        assert_eq!(a.test.interactions(), b.test.interactions());
        let c = split_dataset(&log, 43).unwrap();
        assert_ne!(a.test.interactions(), c.test.interactions());
    }

    #[test]
    fn split_partitions_clicks() {
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..20)
            .flat_map(|u| {
                (0..25).map(move |i| {
                    (
                        format!("u{u}"),
                        format!("i{i}"),
                        true,
                        Some((u * 7 + i) % 2 == 0),
                    )
                })
            })
            .collect();
        let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        let log = toy_log(&borrowed);
        let split = split_dataset(&log, 0).unwrap();
        let total = split.train.interactions().len()
            + split.validation.interactions().len()
            + split.test.interactions().len();
        assert_eq!(total, log.interactions().len());
        let test_pairs: std::collections::HashSet<(u32, u32)> = split
            .test
            .interactions()
            .iter()
            .map(|it| (it.user, it.item))
            .collect();
        assert!(split
            .train
            .interactions()
            .iter()
            .all(|it| !test_pairs.contains(&(it.user, it.item))));
    }

    #[test]
    fn negatives_one_per_click_and_outside_interactions() {
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..10)
            .flat_map(|u| (0..5).map(move |i| (format!("u{u}"), format!("i{}", (u + i) % 20), true, None)))
            .collect();
        let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        let log = toy_log(&borrowed);
        let triples = sample_negatives(&log, 5, 0).unwrap();
        assert_eq!(triples.len(), log.clicks().count());
        let clicked = log.clicked_sets();
        for t in &triples {
            assert!(!clicked[t.user as usize].contains(&t.negative));
        }
    }

    #[test]
    fn negatives_forced_choice() {
        // User clicked every item but one.
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..9)
            .map(|i| ("u".to_string(), format!("i{i}"), true, None))
            .collect();
        let mut borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        borrowed.push(("v", "i9", true, None));
        let log = toy_log(&borrowed);
        for epoch in 0..5 {
            let triples = sample_negatives(&log, 1, epoch).unwrap();
            for t in triples.iter().filter(|t| t.user == 0) {
                assert_eq!(log.items().key(t.negative), "i9");
            }
        }
    }

    #[test]
    fn negatives_error_when_user_exhausts_catalog() {
        let log = toy_log(&[("u", "a", true, None)]);
        let err = sample_negatives(&log, 1, 0).unwrap_err();
        assert!(matches!(err, Error::NoNegativeCandidate { .. }));
    }

    #[test]
    fn negatives_refresh_between_epochs() {
        let rows: Vec<(String, String, bool, Option<bool>)> = (0..50)
            .map(|u| (format!("u{u}"), "i0".to_string(), true, None))
            .collect();
        let mut borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        // Widen the catalog so negatives have room to vary.
        for i in ["i1", "i2", "i3", "i4", "i5", "i6", "i7"] {
            borrowed.push(("extra", i, true, None));
        }
        let log = toy_log(&borrowed);
        let base = sample_negatives(&log, 11, 0).unwrap();
        let mut any_change = false;
        for epoch in 1..10 {
            let fresh = sample_negatives(&log, 11, epoch).unwrap();
            assert_eq!(fresh.len(), base.len());
            assert!(fresh
                .iter()
                .zip(&base)
                .all(|(a, b)| a.user == b.user && a.positive == b.positive));
            if fresh.iter().zip(&base).any(|(a, b)| a.negative != b.negative) {
                any_change = true;
            }
        }
        assert!(any_change, "10 epochs of resampling never changed a negative");
    }

    #[test]
    fn ratio_definitions() {
        let log = toy_log(&[
            ("a", "x", true, Some(true)),
            ("b", "x", true, Some(false)),
            ("c", "x", true, None),
            ("d", "x", true, Some(false)),
            ("a", "y", true, Some(true)),
            ("b", "y", true, Some(true)),
            ("a", "z", false, None),
        ]);
        let stats = like_click_ratio(&log);
        assert_eq!(stats.ratio(log.items().get("x").unwrap()), Some(0.25));
        assert_eq!(stats.ratio(log.items().get("y").unwrap()), Some(1.0));
        assert_eq!(stats.ratio(log.items().get("z").unwrap()), None);
    }

    #[test]
    fn ratio_buckets_partition() {
        let log = toy_log(&[
            // ratio 0.1: 1 like, 10 clicks
            ("u0", "lo", true, Some(true)),
            ("u1", "lo", true, Some(false)),
            ("u2", "lo", true, Some(false)),
            ("u3", "lo", true, Some(false)),
            ("u4", "lo", true, Some(false)),
            ("u5", "lo", true, Some(false)),
            ("u6", "lo", true, Some(false)),
            ("u7", "lo", true, Some(false)),
            ("u8", "lo", true, Some(false)),
            ("u9", "lo", true, Some(false)),
            // ratio 0.9: 9 likes, 10 clicks
            ("u0", "hi", true, Some(true)),
            ("u1", "hi", true, Some(true)),
            ("u2", "hi", true, Some(true)),
            ("u3", "hi", true, Some(true)),
            ("u4", "hi", true, Some(true)),
            ("u5", "hi", true, Some(true)),
            ("u6", "hi", true, Some(true)),
            ("u7", "hi", true, Some(true)),
            ("u8", "hi", true, Some(true)),
            ("u9", "hi", true, Some(false)),
            // never clicked
            ("u0", "cold", false, None),
        ]);
        let stats = like_click_ratio(&log);
        let hist = ratio_groups(&stats, 5).unwrap();
        assert_eq!(hist.buckets, vec![1, 0, 0, 0, 1]);
        assert_eq!(hist.undefined, 1);
        assert_eq!(
            hist.buckets.iter().sum::<usize>() + hist.undefined,
            log.n_items()
        );
        assert!(ratio_groups(&stats, 0).is_err());
    }

    #[test]
    fn ratio_one_lands_in_last_bucket() {
        let log = toy_log(&[("a", "x", true, Some(true)), ("b", "x", true, Some(true))]);
        let hist = ratio_groups(&like_click_ratio(&log), 5).unwrap();
        assert_eq!(hist.buckets, vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn filter_zero_is_identity() {
        let log = toy_log(&[
            ("a", "x", true, Some(true)),
            ("b", "y", true, Some(false)),
        ]);
        let filtered = filter_by_ratio(&log, 0.0).unwrap();
        assert_eq!(filtered.interactions(), log.interactions());
        assert!(filter_by_ratio(&log, 1.0).is_err());
        assert!(filter_by_ratio(&log, -0.1).is_err());
    }

    #[test]
    fn filter_removes_top_ratio_items() {
        // 10 items, descending ratio by construction: i0 has ratio 1.0, i9 has 0.0...
        let mut rows: Vec<(String, String, bool, Option<bool>)> = Vec::new();
        for i in 0..10u32 {
            for c in 0..10u32 {
                rows.push((
                    format!("u{c}"),
                    format!("i{i}"),
                    true,
                    Some(c >= i), // item i gets 10-i likes out of 10 clicks
                ));
            }
        }
        let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
            .iter()
            .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
            .collect();
        let log = toy_log(&borrowed);
        let filtered = filter_by_ratio(&log, 0.2).unwrap();
        let stats = like_click_ratio(&filtered);
        // i0 (ratio 1.0) and i1 (0.9) gone; their click counts drop to zero.
        assert_eq!(stats.click_count[log.items().get("i0").unwrap() as usize], 0);
        assert_eq!(stats.click_count[log.items().get("i1").unwrap() as usize], 0);
        assert_eq!(filtered.interactions().len(), 80);
        // Rickrolled fraction (clicks with liked == false) went up.
        let rick = |l: &InteractionLog| {
            let clicks = l.clicks().count() as f64;
            l.clicks().filter(|it| it.liked == Some(false)).count() as f64 / clicks
        };
        assert!(rick(&filtered) > rick(&log));
    }

    proptest! {
        #[test]
        fn split_invariants(seed in 0u64..500, n_users in 1usize..8, n_items in 2usize..12) {
            let mut rows = Vec::new();
            for u in 0..n_users {
                for i in 0..n_items {
                    if (u * 31 + i * 17 + seed as usize) % 3 != 0 {
                        let liked = (u + i + seed as usize) % 4 == 0;
                        rows.push((format!("u{u}"), format!("i{i}"), true, Some(liked)));
                    }
                }
            }
            prop_assume!(!rows.is_empty());
            let borrowed: Vec<(&str, &str, bool, Option<bool>)> = rows
                .iter()
                .map(|(u, i, c, l)| (u.as_str(), i.as_str(), *c, *l))
                .collect();
            let log = toy_log(&borrowed);
            let split = split_dataset(&log, seed).unwrap();
            // Test responses are all liked clicks.
            prop_assert!(split.test.interactions().iter().all(|it| it.liked == Some(true)));
            // Disjoint at (user, item) granularity and union covers all clicks.
            let pairs = |l: &InteractionLog| -> std::collections::HashSet<(u32, u32)> {
                l.interactions().iter().map(|it| (it.user, it.item)).collect()
            };
            let (tr, va, te) = (pairs(&split.train), pairs(&split.validation), pairs(&split.test));
            prop_assert!(tr.is_disjoint(&te));
            prop_assert!(va.is_disjoint(&te));
            prop_assert!(tr.is_disjoint(&va));
            prop_assert_eq!(tr.len() + va.len() + te.len(), log.interactions().len());
        }
    }
}
