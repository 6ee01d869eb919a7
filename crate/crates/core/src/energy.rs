//! Parse-graph energy: the tree term plus the weighted clique potentials.

use serde::{Deserialize, Serialize};

use crate::affordance::human_prob;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grammar::set_key;
use crate::model::{HumanCost, LearnedModel, SceneTypeModel};
use crate::planner::{activity_heatmap, l_ent, PlannerParams};
use crate::scene::{nearest_wall, overlap_volume, SceneLayout};

pub const SLOTS: usize = 8;

/// Loss slots in their fixed order.
pub const SLOT_NAMES: [&str; SLOTS] = [
    "f_col", "f_ent", "o_hum", "o_add", "g_hum", "g_add", "r_dis", "r_ori",
];

pub const F_COL: usize = 0;
pub const F_ENT: usize = 1;
pub const O_HUM: usize = 2;
pub const O_ADD: usize = 3;
pub const G_HUM: usize = 4;
pub const G_ADD: usize = 5;
pub const R_DIS: usize = 6;
pub const R_ORI: usize = 7;

/// Smallest wall distance fed to the log-normal density.
const MIN_WALL_DISTANCE: f64 = 1e-6;

/// Potential weights, one pair per clique family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Weights {
    pub lambda_f: [f64; 2],
    pub lambda_o: [f64; 2],
    pub lambda_g: [f64; 2],
    pub lambda_r: [f64; 2],
}

impl Weights {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: [f64; SLOTS]) -> Self {
        Self {
            lambda_f: [v[0], v[1]],
            lambda_o: [v[2], v[3]],
            lambda_g: [v[4], v[5]],
            lambda_r: [v[6], v[7]],
        }
    }

    pub fn to_vector(&self) -> [f64; SLOTS] {
        let [a, b] = self.lambda_f;
        let [c, d] = self.lambda_o;
        let [e, f] = self.lambda_g;
        let [g, h] = self.lambda_r;
        [a, b, c, d, e, f, g, h]
    }

    /// Euclidean norm of the stacked vector.
    pub fn norm(&self) -> f64 {
        self.to_vector().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossVector(pub [f64; SLOTS]);

impl LossVector {
    pub fn dot(&self, w: &Weights) -> f64 {
        let w = w.to_vector();
        let mut acc = 0.0;
        for i in 0..SLOTS {
            // a zero weight switches a slot off even when its loss is infinite
            if w[i] != 0.0 {
                acc += w[i] * self.0[i];
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Slot-wise mean; zero for an empty input.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a LossVector>) -> LossVector {
        let mut acc = [0.0; SLOTS];
        let mut n = 0usize;
        for l in items {
            for i in 0..SLOTS {
                acc[i] += l.0[i];
            }
            n += 1;
        }
        if n > 0 {
            for v in &mut acc {
                *v /= n as f64;
            }
        }
        LossVector(acc)
    }
}

/// Support clique: an object resting on a furniture piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportClique {
    pub furniture: usize,
    pub object: usize,
}

/// Group clique: an associated furniture piece addressed to a core piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupClique {
    pub core: usize,
    pub associated: usize,
}

/// The four clique families of a parse graph. Furniture and room cliques hold
/// furniture indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CliqueSet {
    pub furniture: Vec<usize>,
    pub support: Vec<SupportClique>,
    pub group: Vec<GroupClique>,
    pub room: Vec<usize>,
}

pub fn build_cliques(scene: &SceneLayout) -> CliqueSet {
    let n = scene.furniture.len();
    CliqueSet {
        furniture: (0..n).collect(),
        support: scene
            .supported_objects
            .iter()
            .enumerate()
            .filter_map(|(o, obj)| obj.address.map(|f| SupportClique { furniture: f, object: o }))
            .collect(),
        group: scene
            .furniture
            .iter()
            .enumerate()
            .filter_map(|(i, obj)| obj.address.map(|c| GroupClique { core: c, associated: i }))
            .collect(),
        room: (0..n).collect(),
    }
}

/// When the trajectory heatmap is replanned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Replan for every evaluated scene.
    Exact,
    /// Reuse the last value until accumulated furniture motion reaches
    /// `displacement` meters or `accepted_moves` moves were accepted.
    Lazy { displacement: f64, accepted_moves: usize },
}

impl Default for CachePolicy {
    fn default() -> Self {
        CachePolicy::Lazy {
            displacement: 0.25,
            accepted_moves: 10,
        }
    }
}

/// A circulation-cost value and whether it was freshly planned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub fresh: bool,
}

/// Circulation-cost cache owned by a single chain.
#[derive(Debug, Clone)]
pub struct HeatmapCache {
    pub policy: CachePolicy,
    pub planner: PlannerParams,
    pub seed: u64,
    value: Option<f64>,
    drift: f64,
    accepted: usize,
}

impl HeatmapCache {
    pub fn new(policy: CachePolicy, planner: PlannerParams, seed: u64) -> Self {
        Self {
            policy,
            planner,
            seed,
            value: None,
            drift: 0.0,
            accepted: 0,
        }
    }

    /// Plans the heatmap for `scene` and returns its negative entropy.
    pub fn compute(&self, scene: &SceneLayout) -> f64 {
        l_ent(&activity_heatmap(scene, &self.planner, self.seed))
    }

    /// The value for a candidate that moved furniture by `drift` meters
    /// relative to the last committed scene.
    pub fn evaluate(&self, scene: &SceneLayout, drift: f64) -> EntropyValue {
        let stale = match (self.policy, self.value) {
            (_, None) | (CachePolicy::Exact, _) => true,
            (CachePolicy::Lazy { displacement, accepted_moves }, Some(_)) => {
                drift > 0.0 && (self.drift + drift >= displacement || self.accepted + 1 >= accepted_moves)
            }
        };
        match self.value {
            Some(v) if !stale => EntropyValue { value: v, fresh: false },
            _ => EntropyValue {
                value: self.compute(scene),
                fresh: true,
            },
        }
    }

    /// Records an accepted candidate.
    pub fn commit(&mut self, eval: EntropyValue, drift: f64) {
        if eval.fresh {
            self.value = Some(eval.value);
            self.drift = 0.0;
            self.accepted = 0;
        } else if drift > 0.0 {
            self.drift += drift;
            self.accepted += 1;
        }
    }

    /// Replans for `scene` and makes it the committed state.
    pub fn reset(&mut self, scene: &SceneLayout) -> f64 {
        let v = self.compute(scene);
        self.commit(EntropyValue { value: v, fresh: true }, 0.0);
        v
    }

    pub fn current(&self) -> Option<f64> {
        self.value
    }
}

fn missing(what: &str, category: &str) -> Error {
    Error::MissingTable(format!("{what}[{category}]"))
}

/// Usability cost of the humans attached to `user` under the affordance map
/// of `anchor`; zero when `user` carries no humans.
fn human_cost(model: &LearnedModel, anchor: &crate::scene::ObjectInstance, humans: &[[f64; 2]]) -> Result<f64> {
    if humans.is_empty() {
        return Ok(0.0);
    }
    let map = model
        .affordances
        .get(&anchor.category)
        .ok_or_else(|| missing("affordances", &anchor.category))?;
    let floor = model.settings.affordance.floor_density;
    let best = humans
        .iter()
        .map(|h| human_prob(map, Point2::new(h[0], h[1]), anchor, floor))
        .fold(0.0, f64::max);
    Ok(match model.settings.human_cost {
        HumanCost::NegLog => -(best + floor).ln(),
        HumanCost::Literal => best,
    })
}

fn address_cost(st: &SceneTypeModel, scene_type: &str, from: &str, to: &str) -> Result<f64> {
    Ok(-st.address_dist(scene_type, from)?.log_prob(to))
}

/// The loss vector of a scene, given its circulation cost `entropy`.
pub fn loss_features(scene: &SceneLayout, model: &LearnedModel, entropy: f64) -> Result<LossVector> {
    let st_name = &scene.room.scene_type;
    let st = model.scene_type(st_name)?;
    let cliques = build_cliques(scene);
    let mut l = [0.0; SLOTS];

    let f = &scene.furniture;
    for &i in &cliques.furniture {
        for &j in &cliques.furniture {
            if i != j {
                l[F_COL] += overlap_volume(&f[i], &f[j]);
            }
        }
    }
    for obj in scene.instances() {
        l[F_COL] += scene.room.outside_volume(obj);
    }
    l[F_ENT] = entropy;

    for c in &cliques.support {
        let (anchor, obj) = (&f[c.furniture], &scene.supported_objects[c.object]);
        l[O_HUM] += human_cost(model, anchor, &obj.humans)?;
        l[O_ADD] += address_cost(st, st_name, &obj.category, &anchor.category)?;
    }
    for c in &cliques.group {
        let (core, assoc) = (&f[c.core], &f[c.associated]);
        l[G_HUM] += human_cost(model, core, &assoc.humans)?;
        l[G_ADD] += address_cost(st, st_name, &assoc.category, &core.category)?;
    }
    for &i in &cliques.room {
        let rel = nearest_wall(&f[i], &scene.room)?;
        let dist = st.wall_distance(st_name, &f[i].category)?;
        let orient = st.wall_orientation(st_name, &f[i].category)?;
        l[R_DIS] -= dist.logpdf(rel.distance.max(MIN_WALL_DISTANCE));
        l[R_ORI] -= orient.logpdf(rel.orientation);
    }
    Ok(LossVector(l))
}

/// `-log` probability of the parse tree: Or selections, Set branch counts and
/// terminal sizes.
pub fn tree_energy(scene: &SceneLayout, model: &LearnedModel) -> Result<f64> {
    let st_name = &scene.room.scene_type;
    let st = model.scene_type(st_name)?;
    let mut e = 0.0;
    for c in &scene.tree_choices.or {
        e -= st.or_dist(st_name, &c.node)?.log_prob(&c.child);
    }
    for c in &scene.tree_choices.set {
        e -= st
            .set_count_dist(st_name, &set_key(&c.node, &c.child))?
            .log_prob(&c.count.to_string());
    }
    for obj in scene.instances() {
        e -= st.size_kde(st_name, &obj.category)?.logpdf(&obj.size)?;
    }
    Ok(e)
}

/// Tree energy, loss vector and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub tree: f64,
    pub losses: LossVector,
    pub total: f64,
}

/// True when every instance center lies on the room floor. Layouts failing
/// this have infinite energy.
pub fn centers_inside(scene: &SceneLayout) -> bool {
    scene.instances().all(|o| scene.room.contains(o.center()))
}

pub fn evaluate(scene: &SceneLayout, model: &LearnedModel, entropy: f64) -> Result<Energy> {
    let tree = tree_energy(scene, model)?;
    contextual(scene, model, tree, entropy)
}

/// Like [`evaluate`] with a precomputed tree energy.
pub(crate) fn contextual(scene: &SceneLayout, model: &LearnedModel, tree: f64, entropy: f64) -> Result<Energy> {
    if !centers_inside(scene) {
        return Ok(Energy {
            tree,
            losses: LossVector([f64::INFINITY; SLOTS]),
            total: f64::INFINITY,
        });
    }
    let losses = loss_features(scene, model, entropy)?;
    Ok(Energy {
        tree,
        losses,
        total: tree + losses.dot(&model.weights),
    })
}

/// `E(pg) = E(pt) + λ·l`, with the circulation cost planned exactly.
pub fn total_energy(scene: &SceneLayout, model: &LearnedModel, cache: &HeatmapCache) -> Result<f64> {
    let entropy = if model.weights.lambda_f[1] == 0.0 {
        0.0
    } else {
        cache.compute(scene)
    };
    Ok(evaluate(scene, model, entropy)?.total)
}
