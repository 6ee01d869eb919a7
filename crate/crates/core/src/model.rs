//! The learned parameter set: grammar, fitted distributions, affordance maps
//! and potential weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affordance::{AffordanceMap, AffordanceParams};
use crate::energy::Weights;
use crate::error::{Error, Result};
use crate::grammar::{Grammar, GroupingRules};
use crate::prob::{Categorical, KdeDist, LogNormalDist, VonMisesMixture};

pub const MODEL_VERSION: u32 = 1;

/// How the usability cost turns a human-position density into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanCost {
    /// `-ln(max_i p + ε)`: likely human positions lower the energy.
    #[default]
    NegLog,
    /// `max_i p` used directly as the cost.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub affordance: AffordanceParams,
    pub human_cost: HumanCost,
    /// Components in each wall-orientation mixture.
    pub orientation_components: usize,
    /// Humans sampled per instance during structure sampling.
    pub humans_per_object: usize,
    /// Furthest distance (meters) at which a corpus grouping is recognized.
    pub grouping_radius: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            affordance: AffordanceParams::default(),
            human_cost: HumanCost::NegLog,
            orientation_components: 4,
            humans_per_object: 3,
            grouping_radius: 1.5,
        }
    }
}

/// Distributions fitted for one scene type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTypeModel {
    pub room_size: KdeDist,
    /// Or-node id → distribution over its children.
    pub or_dists: BTreeMap<String, Categorical>,
    /// `set/child` → distribution over branch counts ("0", "1", ...).
    pub set_count_dists: BTreeMap<String, Categorical>,
    /// Category → distribution over target categories and `nil`.
    pub address_dists: BTreeMap<String, Categorical>,
    pub size_kdes: BTreeMap<String, KdeDist>,
    pub wall_dist: BTreeMap<String, LogNormalDist>,
    pub wall_orient: BTreeMap<String, VonMisesMixture>,
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, table: &str, scene_type: &str, key: &str) -> Result<&'a T> {
    map.get(key)
        .ok_or_else(|| Error::MissingTable(format!("{scene_type}.{table}[{key}]")))
}

impl SceneTypeModel {
    pub fn or_dist(&self, st: &str, node: &str) -> Result<&Categorical> {
        lookup(&self.or_dists, "or_dists", st, node)
    }
    pub fn set_count_dist(&self, st: &str, key: &str) -> Result<&Categorical> {
        lookup(&self.set_count_dists, "set_count_dists", st, key)
    }
    pub fn address_dist(&self, st: &str, category: &str) -> Result<&Categorical> {
        lookup(&self.address_dists, "address_dists", st, category)
    }
    pub fn size_kde(&self, st: &str, category: &str) -> Result<&KdeDist> {
        lookup(&self.size_kdes, "size_kdes", st, category)
    }
    pub fn wall_distance(&self, st: &str, category: &str) -> Result<&LogNormalDist> {
        lookup(&self.wall_dist, "wall_dist", st, category)
    }
    pub fn wall_orientation(&self, st: &str, category: &str) -> Result<&VonMisesMixture> {
        lookup(&self.wall_orient, "wall_orient", st, category)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub version: u32,
    pub grammar: Grammar,
    pub rules: GroupingRules,
    /// Segmentation label per category; 0 is the floor.
    pub category_index: BTreeMap<String, u8>,
    pub scene_types: BTreeMap<String, SceneTypeModel>,
    pub affordances: BTreeMap<String, AffordanceMap>,
    pub weights: Weights,
    pub settings: ModelSettings,
    /// SHA-256 of the canonical settings, grammar and rules.
    pub fingerprint: String,
}

impl LearnedModel {
    pub fn scene_type(&self, name: &str) -> Result<&SceneTypeModel> {
        self.scene_types
            .get(name)
            .ok_or_else(|| Error::UnknownSceneType(name.to_string()))
    }

    pub fn affordance(&self, category: &str) -> Result<&AffordanceMap> {
        self.affordances
            .get(category)
            .ok_or_else(|| Error::MissingTable(format!("affordances[{category}]")))
    }

    pub fn compute_fingerprint(grammar: &Grammar, rules: &GroupingRules, settings: &ModelSettings) -> String {
        let mut h = Sha256::new();
        for part in [
            serde_json::to_vec(settings),
            serde_json::to_vec(grammar),
            serde_json::to_vec(rules),
        ] {
            h.update(part.unwrap_or_default());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Segmentation labels: 1, 2, ... in alphabetical category order.
pub fn category_indices(grammar: &Grammar) -> Result<BTreeMap<String, u8>> {
    let cats = grammar.categories();
    if cats.len() > 255 {
        return Err(Error::Grammar(format!("{} categories exceed the 255 raster labels", cats.len())));
    }
    Ok(cats
        .into_keys()
        .enumerate()
        .map(|(i, c)| (c, (i + 1) as u8))
        .collect())
}
