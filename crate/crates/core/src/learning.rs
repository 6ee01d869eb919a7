//! Corpus statistics, maximum-likelihood fitting of the model tables and
//! contrastive-divergence learning of the potential weights.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affordance::{maps_from_records, relative_humans};
use crate::energy::{loss_features, HeatmapCache, LossVector, Weights, F_ENT, SLOTS};
use crate::error::{Error, Result};
use crate::geometry::wrap_yaw;
use crate::grammar::{set_key, Grammar, GroupingRules, Layer, NIL};
use crate::io::CorpusScene;
use crate::model::{category_indices, LearnedModel, ModelSettings, SceneTypeModel, MODEL_VERSION};
use crate::prob::{Categorical, KdeDist, LogNormalDist, VonMisesMixture, SIGMA_MIN};
use crate::sampler::{Chain, SamplerConfig};
use crate::scene::{nearest_wall, ObjectInstance, Room, SceneLayout, SCENE_VERSION};

/// Wall distances are clamped to this before taking logs.
const MIN_WALL_DISTANCE: f64 = 1e-6;

/// Converts a corpus scene into a parse graph: splits furniture from
/// supported objects, turns `supported_by` into support addresses, detects
/// groupings and recovers the parse-tree choices.
///
/// A furniture piece with grouping targets is addressed to the nearest
/// eligible target whose center lies within `radius`; ties go to the lower
/// index.
pub fn corpus_layout(
    scene: &CorpusScene,
    grammar: &Grammar,
    rules: &GroupingRules,
    radius: f64,
) -> Result<SceneLayout> {
    let locus = || format!("scene {}", scene.id);
    scene.check().map_err(|m| Error::format(locus(), m))?;
    let mut layout = SceneLayout::empty(Room::new(&scene.scene_type, scene.room));
    let mut slot = Vec::with_capacity(scene.instances.len());
    for inst in &scene.instances {
        let layer = grammar.layer_of(&inst.category).ok_or_else(|| {
            Error::format(locus(), format!("category `{}` is not in the grammar", inst.category))
        })?;
        let mut obj = ObjectInstance::new(&inst.category, inst.size, inst.position, inst.yaw);
        obj.humans = inst.humans.clone();
        match layer {
            Layer::Furniture => {
                if inst.supported_by.is_some() {
                    return Err(Error::format(
                        locus(),
                        format!("furniture `{}` cannot be supported", inst.category),
                    ));
                }
                slot.push(layout.furniture.len());
                layout.furniture.push(obj);
            }
            Layer::Object => {
                slot.push(layout.supported_objects.len());
                layout.supported_objects.push(obj);
            }
        }
    }
    for (i, inst) in scene.instances.iter().enumerate() {
        if let Some(s) = inst.supported_by {
            if grammar.layer_of(&scene.instances[s].category) != Some(Layer::Furniture) {
                return Err(Error::format(
                    locus(),
                    format!("`{}` is supported by a non-furniture instance", inst.category),
                ));
            }
            layout.supported_objects[slot[i]].address = Some(slot[s]);
        }
    }
    for i in 0..layout.furniture.len() {
        let targets = rules.targets(&layout.furniture[i].category);
        if targets.is_empty() {
            continue;
        }
        let c = layout.furniture[i].center();
        let mut best: Option<(f64, usize)> = None;
        for (j, f) in layout.furniture.iter().enumerate() {
            if j == i || !targets.contains(&f.category) {
                continue;
            }
            let d = f.center().distance(c);
            if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        layout.furniture[i].address = best.map(|(_, j)| j);
    }
    let categories: Vec<String> = scene.instances.iter().map(|i| i.category.clone()).collect();
    layout.tree_choices = grammar
        .parse(&scene.scene_type, &categories)
        .map_err(|e| Error::format(locus(), e.to_string()))?;
    layout.version = SCENE_VERSION;
    Ok(layout)
}

/// Statistics gathered for one scene type. Every sample list is sorted, so
/// the statistics do not depend on corpus order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneTypeStats {
    pub scenes: u64,
    pub room_sizes: Vec<Vec<f64>>,
    /// Scenes containing each category at least once.
    pub occurrences: BTreeMap<String, u64>,
    pub or_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub set_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub sizes: BTreeMap<String, Vec<Vec<f64>>>,
    pub wall_distances: BTreeMap<String, Vec<f64>>,
    pub wall_orientations: BTreeMap<String, Vec<f64>>,
    /// Furniture category → grouped target category (or `nil`) → count.
    pub grouping_counts: BTreeMap<String, BTreeMap<String, u64>>,
    /// Object category → supporting category (or `nil`) → count.
    pub support_counts: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub scene_types: BTreeMap<String, SceneTypeStats>,
    /// Human positions in each category's frame, over all scene types.
    pub human_records: BTreeMap<String, Vec<[f64; 2]>>,
}

fn bump(map: &mut BTreeMap<String, BTreeMap<String, u64>>, key: &str, label: &str) {
    *map.entry(key.to_string())
        .or_default()
        .entry(label.to_string())
        .or_default() += 1;
}

fn sort_lex(v: &mut [Vec<f64>]) {
    v.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Accumulates the statistics of already converted layouts.
pub fn collect_layout_stats(layouts: &[SceneLayout], grammar: &Grammar, settings: &ModelSettings) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    for layout in layouts {
        let st = stats
            .scene_types
            .entry(layout.room.scene_type.clone())
            .or_default();
        st.scenes += 1;
        st.room_sizes.push(layout.room.size.to_vec());
        let mut present: Vec<&str> = layout.instances().map(|o| o.category.as_str()).collect();
        present.sort_unstable();
        present.dedup();
        for c in present {
            *st.occurrences.entry(c.to_string()).or_default() += 1;
        }
        for c in &layout.tree_choices.or {
            bump(&mut st.or_counts, &c.node, &c.child);
        }
        for c in &layout.tree_choices.set {
            bump(&mut st.set_counts, &set_key(&c.node, &c.child), &c.count.to_string());
        }
        for obj in layout.instances() {
            st.sizes.entry(obj.category.clone()).or_default().push(obj.size.to_vec());
        }
        for f in &layout.furniture {
            let rel = nearest_wall(f, &layout.room)
                .map_err(|e| Error::format(format!("{} scene", layout.room.scene_type), e.to_string()))?;
            st.wall_distances
                .entry(f.category.clone())
                .or_default()
                .push(rel.distance.max(MIN_WALL_DISTANCE));
            st.wall_orientations
                .entry(f.category.clone())
                .or_default()
                .push(wrap_yaw(rel.orientation));
            if grammar.address_candidates(&f.category).is_some() {
                let label = f.address.map_or(NIL, |t| layout.furniture[t].category.as_str());
                bump(&mut st.grouping_counts, &f.category, label);
            }
        }
        for o in &layout.supported_objects {
            if grammar.address_candidates(&o.category).is_some() {
                let label = o.address.map_or(NIL, |t| layout.furniture[t].category.as_str());
                bump(&mut st.support_counts, &o.category, label);
            }
        }
        for obj in layout.instances() {
            stats.human_records.entry(obj.category.clone()).or_default();
        }
        for (cat, pts) in relative_humans(layout, settings.affordance.extent) {
            stats.human_records.entry(cat).or_default().extend(pts);
        }
    }
    for st in stats.scene_types.values_mut() {
        sort_lex(&mut st.room_sizes);
        st.sizes.values_mut().for_each(|v| sort_lex(v));
        for v in st.wall_distances.values_mut().chain(st.wall_orientations.values_mut()) {
            v.sort_by(f64::total_cmp);
        }
    }
    for v in stats.human_records.values_mut() {
        v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    }
    Ok(stats)
}

/// Converts and accumulates a corpus.
pub fn collect_stats(
    corpus: &[CorpusScene],
    grammar: &Grammar,
    rules: &GroupingRules,
    settings: &ModelSettings,
) -> Result<CorpusStats> {
    let layouts = corpus_layouts(corpus, grammar, rules, settings)?;
    collect_layout_stats(&layouts, grammar, settings)
}

pub fn corpus_layouts(
    corpus: &[CorpusScene],
    grammar: &Grammar,
    rules: &GroupingRules,
    settings: &ModelSettings,
) -> Result<Vec<SceneLayout>> {
    grammar.validate()?;
    rules.validate(grammar)?;
    corpus
        .iter()
        .map(|s| corpus_layout(s, grammar, rules, settings.grouping_radius))
        .collect()
}

fn table_err(st: &str, table: &str, key: &str, e: Error) -> Error {
    Error::fit(format!("{st}.{table}[{key}]"), e.to_string())
}

fn fit_categoricals(
    st: &str,
    table: &str,
    counts: &BTreeMap<String, BTreeMap<String, u64>>,
) -> Result<BTreeMap<String, Categorical>> {
    counts
        .iter()
        .map(|(k, c)| Ok((k.clone(), Categorical::fit(c).map_err(|e| table_err(st, table, k, e))?)))
        .collect()
}

fn fit_log_normal(samples: &[f64]) -> Result<LogNormalDist> {
    match samples {
        [x] => LogNormalDist::new(x.ln(), SIGMA_MIN),
        _ => LogNormalDist::fit(samples),
    }
}

/// Maximum-likelihood tables for every scene type in `stats`, affordance
/// maps for every observed category and unit weights. Returns the model and
/// any warnings (categories without human positions).
pub fn fit_model(
    stats: &CorpusStats,
    grammar: &Grammar,
    rules: &GroupingRules,
    settings: &ModelSettings,
) -> Result<(LearnedModel, Vec<String>)> {
    grammar.validate()?;
    rules.validate(grammar)?;
    let mut scene_types = BTreeMap::new();
    for (name, s) in &stats.scene_types {
        if !grammar.scene_types.contains(name) {
            return Err(Error::UnknownSceneType(name.clone()));
        }
        let room_size = KdeDist::fit(&s.room_sizes).map_err(|e| table_err(name, "room_size", name, e))?;
        let mut address_counts = s.grouping_counts.clone();
        address_counts.extend(s.support_counts.clone());
        let mut size_kdes = BTreeMap::new();
        for (cat, v) in &s.sizes {
            size_kdes.insert(cat.clone(), KdeDist::fit(v).map_err(|e| table_err(name, "size_kdes", cat, e))?);
        }
        let mut wall_dist = BTreeMap::new();
        for (cat, v) in &s.wall_distances {
            wall_dist.insert(cat.clone(), fit_log_normal(v).map_err(|e| table_err(name, "wall_dist", cat, e))?);
        }
        let mut wall_orient = BTreeMap::new();
        for (cat, v) in &s.wall_orientations {
            let m = VonMisesMixture::fit(v, settings.orientation_components)
                .map_err(|e| table_err(name, "wall_orient", cat, e))?;
            wall_orient.insert(cat.clone(), m);
        }
        scene_types.insert(
            name.clone(),
            SceneTypeModel {
                room_size,
                or_dists: fit_categoricals(name, "or_dists", &s.or_counts)?,
                set_count_dists: fit_categoricals(name, "set_count_dists", &s.set_counts)?,
                address_dists: fit_categoricals(name, "address_dists", &address_counts)?,
                size_kdes,
                wall_dist,
                wall_orient,
            },
        );
    }
    let (affordances, warnings) = maps_from_records(&stats.human_records, &settings.affordance);
    let model = LearnedModel {
        version: MODEL_VERSION,
        grammar: grammar.clone(),
        rules: rules.clone(),
        category_index: category_indices(grammar)?,
        scene_types,
        affordances,
        weights: Weights::from_vector([1.0; SLOTS]),
        settings: settings.clone(),
        fingerprint: LearnedModel::compute_fingerprint(grammar, rules, settings),
    };
    Ok((model, warnings))
}

/// Contrastive-divergence settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Chain steps ñ from each data scene.
    pub steps: usize,
    /// Metropolis proposals per chain step.
    pub proposals_per_step: usize,
    pub temperature: f64,
    pub eta0: f64,
    pub tau: f64,
    /// Slots whose weights are learned; the rest keep their initial value.
    pub active: [bool; SLOTS],
    pub divergence_limit: f64,
    pub seed: u64,
    /// Proposal settings for the chains; its seed and schedule are unused.
    pub sampler: SamplerConfig,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            steps: 1,
            proposals_per_step: 20,
            temperature: 1.0,
            eta0: 0.1,
            tau: 50.0,
            active: [true; SLOTS],
            divergence_limit: 1e4,
            seed: 0,
            sampler: SamplerConfig::default(),
        }
    }
}

impl CdConfig {
    pub fn eta(&self, epoch: usize) -> f64 {
        self.eta0 / (1.0 + epoch as f64 / self.tau)
    }
}

/// Per-epoch record of the learning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdEpoch {
    pub epoch: usize,
    pub eta: f64,
    pub data_loss: LossVector,
    pub sample_loss: LossVector,
    /// Weights after this epoch's update.
    pub weights: Weights,
}

/// `λ + η (mean sample loss − mean data loss)` on the active slots.
pub fn cd_update(
    weights: &Weights,
    data_mean: &LossVector,
    sample_mean: &LossVector,
    eta: f64,
    active: &[bool; SLOTS],
) -> Weights {
    let mut w = weights.to_vector();
    for i in 0..SLOTS {
        if active[i] {
            w[i] += eta * (sample_mean.0[i] - data_mean.0[i]);
        }
    }
    Weights::from_vector(w)
}

fn exact_losses(scene: &SceneLayout, model: &LearnedModel, config: &CdConfig, seed: u64) -> Result<LossVector> {
    let entropy = if config.active[F_ENT] {
        HeatmapCache::new(config.sampler.cache, config.sampler.planner, seed).compute(scene)
    } else {
        0.0
    };
    loss_features(scene, model, entropy)
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Learns the potential weights starting from `model.weights`.
///
/// Each epoch draws a minibatch, runs `steps × proposals_per_step`
/// Metropolis proposals at fixed temperature from every batch scene, and
/// moves the weights by the difference between the mean sample and mean data
/// loss vectors. Only the two expectations are estimated; the term from the
/// data-dependence of the chain's starting point is dropped.
pub fn cd_learn(model: &LearnedModel, data: &[SceneLayout], config: &CdConfig) -> Result<(Weights, Vec<CdEpoch>)> {
    if data.is_empty() {
        return Err(Error::Config("contrastive divergence needs at least one data scene".into()));
    }
    if !(config.temperature > 0.0) || config.batch_size == 0 {
        return Err(Error::Config("CD temperature and batch size must be positive".into()));
    }
    config.sampler.validate()?;
    let data_losses: Vec<LossVector> = data
        .par_iter()
        .enumerate()
        .map(|(i, s)| exact_losses(s, model, config, mix(config.seed, i as u64)))
        .collect::<Result<_>>()?;

    let mut current = model.clone();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 1 << 32 | epoch as u64));
        let batch: Vec<usize> = if data.len() <= config.batch_size {
            (0..data.len()).collect()
        } else {
            let mut b = sample_indices(&mut rng, data.len(), config.batch_size).into_vec();
            b.sort_unstable();
            b
        };
        let moves = config.steps * config.proposals_per_step;
        let samples: Vec<LossVector> = batch
            .par_iter()
            .map(|&i| {
                let seed = mix(mix(config.seed, epoch as u64), i as u64);
                let cfg = SamplerConfig {
                    seed,
                    ..config.sampler.clone()
                };
                if moves == 0 {
                    return Ok(data_losses[i]);
                }
                let mut chain = Chain::new(&current, data[i].clone(), &cfg)?;
                for _ in 0..moves {
                    chain.step_at(config.temperature)?;
                }
                exact_losses(chain.scene(), &current, config, mix(config.seed, i as u64))
            })
            .collect::<Result<_>>()?;
        let data_mean = LossVector::mean(batch.iter().map(|&i| &data_losses[i]));
        let sample_mean = LossVector::mean(&samples);
        let eta = config.eta(epoch);
        let weights = cd_update(&current.weights, &data_mean, &sample_mean, eta, &config.active);
        trace.push(CdEpoch {
            epoch,
            eta,
            data_loss: data_mean,
            sample_loss: sample_mean,
            weights,
        });
        let magnitude = weights.norm();
        if !weights.is_finite() || magnitude > config.divergence_limit {
            return Err(Error::Diverged {
                epoch,
                magnitude,
                trace,
            });
        }
        current.weights = weights;
    }
    Ok((current.weights, trace))
}
