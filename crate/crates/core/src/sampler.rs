//! Scene synthesis: direct sampling of the parse-tree structure, then
//! Metropolis-Hastings over placements and addresses with simulated
//! annealing.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::affordance::sample_humans;
use crate::energy::{contextual, tree_energy, CachePolicy, Energy, EntropyValue, HeatmapCache};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::grammar::{set_key, Layer, NodeKind, OrChoice, SetCount, TreeChoices, NIL};
use crate::model::{LearnedModel, SceneTypeModel};
use crate::planner::PlannerParams;
use crate::scene::{InstanceRef, ObjectInstance, Room, SceneLayout, SCENE_VERSION};

/// Smallest sampled object or room dimension (meters).
const MIN_SIZE: f64 = 0.02;
const MIN_ROOM_SIDE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub translate: f64,
    pub rotate: f64,
    pub address: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            translate: 0.45,
            rotate: 0.45,
            address: 0.1,
        }
    }
}

/// Discretizes furniture placements: centers on `origin + spacing·(i, j)`
/// with `i < nx`, `j < ny`, yaws on multiples of `2π / yaw_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSnap {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub yaw_steps: usize,
}

impl GridSnap {
    /// Snaps an instance in place; false when it left the grid.
    fn snap(&self, obj: &mut ObjectInstance) -> bool {
        let i = ((obj.position[0] - self.origin[0]) / self.spacing).round();
        let j = ((obj.position[1] - self.origin[1]) / self.spacing).round();
        let step = TAU / self.yaw_steps as f64;
        let k = (obj.yaw / step).round() as usize % self.yaw_steps;
        obj.yaw = k as f64 * step;
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return false;
        }
        obj.position[0] = self.origin[0] + i * self.spacing;
        obj.position[1] = self.origin[1] + j * self.spacing;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub t0: f64,
    pub moves: MoveProbs,
    /// Translation step σ (meters).
    pub sigma_xy: f64,
    /// Rotation step σ (radians).
    pub sigma_theta: f64,
    pub seed: u64,
    pub annealing: bool,
    pub cache: CachePolicy,
    pub planner: PlannerParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snap: Option<GridSnap>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            t0: 5.0,
            moves: MoveProbs::default(),
            sigma_xy: 0.3,
            sigma_theta: 0.3,
            seed: 0,
            annealing: true,
            cache: CachePolicy::default(),
            planner: PlannerParams::default(),
            snap: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let q = [self.moves.translate, self.moves.rotate, self.moves.address];
        if q.iter().any(|&p| !(p >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "move probabilities {q:?} must be nonnegative and sum to 1"
            )));
        }
        if !(self.sigma_xy > 0.0) || !(self.sigma_theta > 0.0) {
            return Err(Error::Config("proposal scales must be positive".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::Config("t0 must be positive".into()));
        }
        if let CachePolicy::Lazy { displacement, accepted_moves } = self.cache {
            if !(displacement > 0.0) || accepted_moves == 0 {
                return Err(Error::Config("lazy cache thresholds must be positive".into()));
            }
        }
        if let Some(g) = &self.snap {
            if !(g.spacing > 0.0) || g.nx == 0 || g.ny == 0 || g.yaw_steps == 0 {
                return Err(Error::Config("snap grid must be non-empty".into()));
            }
        }
        Ok(())
    }

    /// Temperature at iteration `t ≥ 1`.
    pub fn temperature(&self, t: usize) -> f64 {
        if self.annealing {
            self.t0 / (1.0 + t as f64).ln()
        } else {
            self.t0
        }
    }
}

/// Samples Or selections, Set counts, sizes, initial placements, addresses
/// and attached humans for a new scene of `scene_type`.
pub fn sample_structure<R: Rng + ?Sized>(
    model: &LearnedModel,
    scene_type: &str,
    rng: &mut R,
) -> Result<SceneLayout> {
    let st = model.scene_type(scene_type)?;
    if !model.grammar.scene_types.iter().any(|s| s == scene_type) {
        return Err(Error::UnknownSceneType(scene_type.to_string()));
    }
    let rs = st.room_size.sample(rng);
    let room = Room::new(
        scene_type,
        [
            rs[0].abs().max(MIN_ROOM_SIDE),
            rs[1].abs().max(MIN_ROOM_SIDE),
            rs[2].abs().max(MIN_ROOM_SIDE),
        ],
    );

    let mut choices = TreeChoices::default();
    let mut terminals = Vec::new();
    expand(model, st, scene_type, scene_type, rng, &mut choices, &mut terminals)?;

    let mut scene = SceneLayout {
        version: SCENE_VERSION,
        room,
        furniture: Vec::new(),
        supported_objects: Vec::new(),
        tree_choices: choices,
    };
    let mut objects = Vec::new();
    for (category, layer) in terminals {
        let s = st.size_kde(scene_type, &category)?.sample(rng);
        let size = [s[0].abs().max(MIN_SIZE), s[1].abs().max(MIN_SIZE), s[2].abs().max(MIN_SIZE)];
        match layer {
            Layer::Furniture => {
                let x = rng.random::<f64>() * scene.room.size[0];
                let y = rng.random::<f64>() * scene.room.size[1];
                let yaw = rng.random::<f64>() * TAU;
                scene.furniture.push(ObjectInstance::new(&category, size, [x, y, 0.0], yaw));
            }
            Layer::Object => objects.push(ObjectInstance::new(&category, size, [0.0; 3], 0.0)),
        }
    }

    for i in 0..scene.furniture.len() {
        let cat = scene.furniture[i].category.clone();
        if model.grammar.address_candidates(&cat).is_some() {
            let dist = st.address_dist(scene_type, &cat)?;
            let target = dist.sample(rng).to_string();
            scene.furniture[i].address = pick_instance(&scene.furniture, &target, Some(i), rng);
        }
    }
    for mut obj in objects {
        let supporter = match model.grammar.address_candidates(&obj.category) {
            Some(_) => {
                let target = st.address_dist(scene_type, &obj.category)?.sample(rng).to_string();
                pick_instance(&scene.furniture, &target, None, rng)
            }
            None => None,
        };
        obj.yaw = rng.random::<f64>() * TAU;
        match supporter {
            Some(f) => {
                let base = &scene.furniture[f];
                let u = (rng.random::<f64>() - 0.5) * base.size[0];
                let v = (rng.random::<f64>() - 0.5) * base.size[1];
                let mut p = base.pose().to_world(Point2::new(u, v));
                // an overhanging supporter could leave the object off the floor plan
                if !scene.room.contains(p) {
                    p = base.center();
                }
                obj.position = [p.x, p.y, base.top()];
                obj.address = Some(f);
            }
            None => {
                obj.position = [
                    rng.random::<f64>() * scene.room.size[0],
                    rng.random::<f64>() * scene.room.size[1],
                    0.0,
                ];
            }
        }
        scene.supported_objects.push(obj);
    }

    let n_h = model.settings.humans_per_object;
    for r in scene.instance_refs().collect::<Vec<_>>() {
        let obj = scene.get(r);
        let map = model.affordance(&obj.category)?;
        let humans = sample_humans(map, obj, n_h, rng);
        scene.get_mut(r).humans = humans;
    }
    Ok(scene)
}

fn expand<R: Rng + ?Sized>(
    model: &LearnedModel,
    st: &SceneTypeModel,
    scene_type: &str,
    id: &str,
    rng: &mut R,
    choices: &mut TreeChoices,
    out: &mut Vec<(String, Layer)>,
) -> Result<()> {
    let node = model.grammar.node(id)?;
    match node.kind {
        NodeKind::Address => {}
        NodeKind::Terminal => {
            let cat = node
                .category
                .clone()
                .ok_or_else(|| Error::Grammar(format!("terminal `{id}` has no category")))?;
            out.push((cat, node.layer));
        }
        NodeKind::And => {
            for c in &node.children {
                expand(model, st, scene_type, c, rng, choices, out)?;
            }
        }
        NodeKind::Or => {
            let child = st.or_dist(scene_type, id)?.sample(rng).to_string();
            if !node.children.contains(&child) {
                return Err(Error::Grammar(format!("`{child}` is not a child of Or-node `{id}`")));
            }
            choices.or.push(OrChoice {
                node: id.to_string(),
                child: child.clone(),
            });
            expand(model, st, scene_type, &child, rng, choices, out)?;
        }
        NodeKind::Set => {
            for c in &node.children {
                let label = st.set_count_dist(scene_type, &set_key(id, c))?.sample(rng);
                let count: usize = label
                    .parse()
                    .map_err(|_| Error::Grammar(format!("bad count `{label}` for `{id}/{c}`")))?;
                choices.set.push(SetCount {
                    node: id.to_string(),
                    child: c.clone(),
                    count,
                });
                for _ in 0..count {
                    expand(model, st, scene_type, c, rng, choices, out)?;
                }
            }
        }
    }
    Ok(())
}

/// A uniformly chosen furniture index of `category`, skipping `exclude`.
fn pick_instance<R: Rng + ?Sized>(
    furniture: &[ObjectInstance],
    category: &str,
    exclude: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    if category == NIL {
        return None;
    }
    let matches: Vec<usize> = candidates_of(furniture, category, exclude);
    if matches.is_empty() {
        None
    } else {
        Some(matches[rng.random_range(0..matches.len())])
    }
}

fn candidates_of(furniture: &[ObjectInstance], category: &str, exclude: Option<usize>) -> Vec<usize> {
    furniture
        .iter()
        .enumerate()
        .filter(|(i, f)| Some(*i) != exclude && f.category == category)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Translate,
    Rotate,
    Address,
    /// Nothing could be moved; the scene is unchanged.
    Identity,
}

impl MoveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::Translate => "translate",
            MoveKind::Rotate => "rotate",
            MoveKind::Address => "address",
            MoveKind::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub scene: SceneLayout,
    pub kind: MoveKind,
    /// Largest furniture corner displacement (meters); zero when no
    /// furniture moved.
    pub drift: f64,
    /// `ln q(x | x') − ln q(x' | x)`.
    pub log_q_ratio: f64,
    /// False when the move left the snap grid; such proposals are rejected.
    pub valid: bool,
}

/// Draws a candidate scene. Translations and rotations pick a uniformly
/// random instance; furniture carries its supported objects and humans.
/// Objects on furniture move with a third of the translation scale and stay
/// on the supporter's top surface. Address moves redraw one furniture
/// grouping address from its learned distribution.
pub fn propose<R: Rng + ?Sized>(
    scene: &SceneLayout,
    model: &LearnedModel,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let u: f64 = rng.random();
    let kind = if u < config.moves.translate {
        MoveKind::Translate
    } else if u < config.moves.translate + config.moves.rotate {
        MoveKind::Rotate
    } else {
        MoveKind::Address
    };
    let mut next = scene.clone();
    let identity = |scene: SceneLayout| Proposal {
        scene,
        kind: MoveKind::Identity,
        drift: 0.0,
        log_q_ratio: 0.0,
        valid: true,
    };
    match kind {
        MoveKind::Translate | MoveKind::Rotate => {
            let n = scene.instance_count();
            if n == 0 {
                return Ok(identity(next));
            }
            let k = rng.random_range(0..n);
            let r = if k < scene.furniture.len() {
                InstanceRef::Furniture(k)
            } else {
                InstanceRef::Object(k - scene.furniture.len())
            };
            let drift = if kind == MoveKind::Translate {
                translate(&mut next, r, config, rng)
            } else {
                rotate(&mut next, r, config, rng)
            };
            let mut valid = true;
            if let (Some(g), InstanceRef::Furniture(f)) = (&config.snap, r) {
                let before = next.furniture[f].clone();
                let mut snapped = before.clone();
                valid = g.snap(&mut snapped);
                // carried items follow the snap correction
                next.move_furniture(f, snapped.yaw - before.yaw, snapped.center() - before.center());
                next.furniture[f].yaw = snapped.yaw;
                next.furniture[f].position = snapped.position;
            }
            Ok(Proposal {
                scene: next,
                kind,
                drift,
                log_q_ratio: 0.0,
                valid,
            })
        }
        _ => {
            let st = model.scene_type(&scene.room.scene_type)?;
            let movable: Vec<usize> = scene
                .furniture
                .iter()
                .enumerate()
                .filter(|(_, f)| model.grammar.address_candidates(&f.category).is_some())
                .map(|(i, _)| i)
                .collect();
            if movable.is_empty() {
                return Ok(identity(next));
            }
            let i = movable[rng.random_range(0..movable.len())];
            let cat = scene.furniture[i].category.clone();
            let dist = st.address_dist(&scene.room.scene_type, &cat)?;
            let target = dist.sample(rng).to_string();
            let new = pick_instance(&scene.furniture, &target, Some(i), rng);
            let old = scene.furniture[i].address;
            let log_q = |a: Option<usize>| address_log_q(dist, &scene.furniture, i, a);
            let log_q_ratio = log_q(old) - log_q(new);
            next.furniture[i].address = new;
            Ok(Proposal {
                scene: next,
                kind: MoveKind::Address,
                drift: 0.0,
                log_q_ratio,
                valid: true,
            })
        }
    }
}

/// Log-probability that an address move on furniture `i` proposes `value`.
/// Target categories without an eligible instance fall through to nil.
fn address_log_q(dist: &crate::prob::Categorical, furniture: &[ObjectInstance], i: usize, value: Option<usize>) -> f64 {
    match value {
        Some(t) => {
            let cat = &furniture[t].category;
            let n = candidates_of(furniture, cat, Some(i)).len() as f64;
            (dist.prob(cat) / n).ln()
        }
        None => {
            let mass: f64 = dist
                .outcomes
                .iter()
                .zip(&dist.probs)
                .filter(|(o, _)| *o == NIL || candidates_of(furniture, o, Some(i)).is_empty())
                .map(|(_, p)| p)
                .sum();
            mass.ln()
        }
    }
}

fn half_diagonal(obj: &ObjectInstance) -> f64 {
    0.5 * obj.size[0].hypot(obj.size[1])
}

fn translate<R: Rng + ?Sized>(scene: &mut SceneLayout, r: InstanceRef, config: &SamplerConfig, rng: &mut R) -> f64 {
    match r {
        InstanceRef::Furniture(f) => {
            let n = Normal::new(0.0, config.sigma_xy).expect("positive sigma");
            let d = Point2::new(n.sample(rng), n.sample(rng));
            scene.move_furniture(f, 0.0, d);
            d.norm()
        }
        InstanceRef::Object(o) => {
            let n = Normal::new(0.0, config.sigma_xy / 3.0).expect("positive sigma");
            let d = Point2::new(n.sample(rng), n.sample(rng));
            let obj = &scene.supported_objects[o];
            let target = obj.center() + d;
            let target = match obj.address {
                Some(f) => clamp_to_top(&scene.furniture[f], target),
                None => target,
            };
            let offset = target - obj.center();
            let pivot = obj.center();
            scene.supported_objects[o].transform(pivot, 0.0, offset);
            0.0
        }
    }
}

/// The nearest point of `base`'s top rectangle.
fn clamp_to_top(base: &ObjectInstance, p: Point2) -> Point2 {
    let pose = base.pose();
    let local = pose.to_local(p);
    let (hw, hl) = (0.5 * base.size[0], 0.5 * base.size[1]);
    pose.to_world(Point2::new(local.x.clamp(-hw, hw), local.y.clamp(-hl, hl)))
}

fn rotate<R: Rng + ?Sized>(scene: &mut SceneLayout, r: InstanceRef, config: &SamplerConfig, rng: &mut R) -> f64 {
    let n = Normal::new(0.0, config.sigma_theta).expect("positive sigma");
    let d: f64 = n.sample(rng);
    match r {
        InstanceRef::Furniture(f) => {
            scene.move_furniture(f, d, Point2::default());
            2.0 * half_diagonal(&scene.furniture[f]) * (0.5 * d.abs()).min(std::f64::consts::FRAC_PI_2).sin()
        }
        InstanceRef::Object(o) => {
            let pivot = scene.supported_objects[o].center();
            scene.supported_objects[o].transform(pivot, d, Point2::default());
            0.0
        }
    }
}

/// `min(1, exp((e_old − e_new) / T))`.
pub fn acceptance_probability(e_old: f64, e_new: f64, temperature: f64) -> f64 {
    if e_new <= e_old {
        return 1.0;
    }
    ((e_old - e_new) / temperature).exp().min(1.0)
}

pub fn accept<R: Rng + ?Sized>(e_old: f64, e_new: f64, temperature: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < acceptance_probability(e_old, e_new, temperature)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    #[serde(rename = "move")]
    pub kind: MoveKind,
    pub accepted: bool,
    pub temperature: f64,
    pub energy: f64,
    pub best_energy: f64,
}

#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub records: Vec<TraceRecord>,
    pub best_energy: f64,
    /// Energy of the returned scene with the circulation cost replanned.
    pub best_exact_energy: f64,
    pub final_scene: SceneLayout,
    pub final_energy: f64,
}

/// A single Metropolis-Hastings chain with its own random stream and
/// heatmap cache.
pub struct Chain<'m> {
    model: &'m LearnedModel,
    config: SamplerConfig,
    rng: ChaCha8Rng,
    scene: SceneLayout,
    tree: f64,
    energy: Energy,
    cache: HeatmapCache,
    uses_entropy: bool,
    best: SceneLayout,
    best_energy: f64,
    t: usize,
}

impl<'m> Chain<'m> {
    /// Starts a chain at `scene`, seeded from `config.seed`.
    pub fn new(model: &'m LearnedModel, scene: SceneLayout, config: &SamplerConfig) -> Result<Self> {
        Self::with_rng(model, scene, config, ChaCha8Rng::seed_from_u64(config.seed))
    }

    pub fn with_rng(
        model: &'m LearnedModel,
        scene: SceneLayout,
        config: &SamplerConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        let mut cache = HeatmapCache::new(config.cache, config.planner, config.seed);
        let uses_entropy = model.weights.lambda_f[1] != 0.0;
        let entropy = if uses_entropy { cache.reset(&scene) } else { 0.0 };
        let tree = tree_energy(&scene, model)?;
        let energy = contextual(&scene, model, tree, entropy)?;
        Ok(Self {
            model,
            config: config.clone(),
            rng,
            best: scene.clone(),
            best_energy: energy.total,
            scene,
            tree,
            energy,
            cache,
            uses_entropy,
            t: 0,
        })
    }

    pub fn scene(&self) -> &SceneLayout {
        &self.scene
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn best(&self) -> (&SceneLayout, f64) {
        (&self.best, self.best_energy)
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    /// One proposal at the scheduled temperature.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let temperature = self.config.temperature(self.t + 1);
        self.step_at(temperature)
    }

    /// One proposal at an explicit temperature.
    pub fn step_at(&mut self, temperature: f64) -> Result<TraceRecord> {
        self.t += 1;
        let p = propose(&self.scene, self.model, &self.config, &mut self.rng)?;
        let u: f64 = self.rng.random();
        let mut accepted = p.kind == MoveKind::Identity;
        if p.valid && p.kind != MoveKind::Identity {
            let ent = if self.uses_entropy {
                self.cache.evaluate(&p.scene, p.drift)
            } else {
                EntropyValue { value: 0.0, fresh: false }
            };
            let next = contextual(&p.scene, self.model, self.tree, ent.value)?;
            let log_alpha = if next.total <= self.energy.total && p.log_q_ratio >= 0.0 {
                0.0
            } else {
                (self.energy.total - next.total) / temperature + p.log_q_ratio
            };
            // NaN (both energies infinite) rejects
            if log_alpha >= 0.0 || u < log_alpha.exp() {
                accepted = true;
                self.scene = p.scene;
                self.energy = next;
                if self.uses_entropy {
                    self.cache.commit(ent, p.drift);
                }
            }
        }
        if self.energy.total < self.best_energy {
            self.best_energy = self.energy.total;
            self.best = self.scene.clone();
        }
        Ok(TraceRecord {
            iteration: self.t,
            kind: p.kind,
            accepted,
            temperature,
            energy: self.energy.total,
            best_energy: self.best_energy,
        })
    }

    /// Energy of `scene` with the circulation cost replanned exactly.
    pub fn exact_energy(&self, scene: &SceneLayout) -> Result<f64> {
        let entropy = if self.uses_entropy { self.cache.compute(scene) } else { 0.0 };
        Ok(contextual(scene, self.model, self.tree, entropy)?.total)
    }

    pub fn into_parts(self) -> (SceneLayout, f64, SceneLayout, f64) {
        (self.best, self.best_energy, self.scene, self.energy.total)
    }
}

/// Samples a structure, runs `config.iterations` proposals and returns the
/// lowest-energy scene visited with the trace.
pub fn synthesize(model: &LearnedModel, scene_type: &str, config: &SamplerConfig) -> Result<(SceneLayout, ChainTrace)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scene = sample_structure(model, scene_type, &mut rng)?;
    let mut chain = Chain::with_rng(model, scene, config, rng)?;
    let mut records = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        records.push(chain.step()?);
    }
    let best_exact_energy = chain.exact_energy(&chain.best)?;
    let (best, best_energy, final_scene, final_energy) = chain.into_parts();
    Ok((
        best,
        ChainTrace {
            records,
            best_energy,
            best_exact_energy,
            final_scene,
            final_energy,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tests::toy_model;
    use crate::energy::Weights;
    use crate::prob::Categorical;

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(3.0, 3.0, 2.0), 1.0);
        assert_eq!(acceptance_probability(3.0, 1.0, 2.0), 1.0);
        let t = 1.7;
        let a = acceptance_probability(1.0, 1.0 + t * 2f64.ln(), t);
        assert!((a - 0.5).abs() < 1e-12);
        assert_eq!(acceptance_probability(1.0, f64::INFINITY, 1.0), 0.0);
    }

    #[test]
    fn schedule() {
        let c = SamplerConfig::default();
        assert!((c.temperature(1) - 5.0 / 2f64.ln()).abs() < 1e-12);
        for t in 1..1000 {
            assert!(c.temperature(t + 1) < c.temperature(t));
        }
        let flat = SamplerConfig { annealing: false, ..c };
        assert_eq!(flat.temperature(50), 5.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::default();
        assert!(c.validate().is_ok());
        c.moves.address = 0.2;
        assert!(c.validate().is_err());
        let c = SamplerConfig { sigma_xy: 0.0, ..SamplerConfig::default() };
        assert!(c.validate().is_err());
        let c = SamplerConfig { iterations: 0, ..SamplerConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn forced_structure() {
        let model = toy_model();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = sample_structure(&model, "den", &mut rng).unwrap();
            assert_eq!(s.furniture.len(), 2);
            assert!(s.furniture.iter().all(|f| f.category == "box"));
            assert!(s.supported_objects.is_empty());
            assert!(s.instances().all(|o| o.humans.len() == 3));
        }
        assert!(matches!(
            sample_structure(&model, "kitchen", &mut rng),
            Err(Error::UnknownSceneType(_))
        ));
    }

    #[test]
    fn yaw_wraps_on_rotation() {
        let mut s = SceneLayout::empty(Room::new("den", [10.0, 10.0, 3.0]));
        s.furniture.push(ObjectInstance::new("box", [1.0; 3], [5.0, 5.0, 0.0], TAU - 0.01));
        s.move_furniture(0, 0.02, Point2::default());
        assert!((s.furniture[0].yaw - 0.01).abs() < 1e-12);
    }

    #[test]
    fn tiny_sigma_keeps_positions() {
        let model = toy_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_structure(&model, "den", &mut rng).unwrap();
        let cfg = SamplerConfig { sigma_xy: 1e-12, sigma_theta: 1e-12, ..SamplerConfig::default() };
        for _ in 0..50 {
            let p = propose(&s, &model, &cfg, &mut rng).unwrap();
            for (a, b) in p.scene.furniture.iter().zip(&s.furniture) {
                assert!((a.position[0] - b.position[0]).abs() < 1e-9);
                assert!((a.position[1] - b.position[1]).abs() < 1e-9);
            }
        }
    }

    fn desk_with_cup() -> (LearnedModel, SceneLayout) {
        let mut model = toy_model();
        let st = model.scene_types.get_mut("den").unwrap();
        st.set_count_dists.insert(set_key("items", "cup_unit"), Categorical::certain("1"));
        st.address_dists.insert("cup".into(), Categorical::certain("box"));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sample_structure(&model, "den", &mut rng).unwrap();
        (model, s)
    }

    #[test]
    fn objects_start_on_their_supporter() {
        let (_, s) = desk_with_cup();
        let cup = &s.supported_objects[0];
        let f = cup.address.expect("cup is supported");
        assert_eq!(cup.position[2], s.furniture[f].top());
        assert!(s.furniture[f].rect().inflated(1e-9).contains(cup.center()));
    }

    #[test]
    fn furniture_moves_carry_objects() {
        let (model, s) = desk_with_cup();
        let f = s.supported_objects[0].address.unwrap();
        let cfg = SamplerConfig {
            moves: MoveProbs { translate: 1.0, rotate: 0.0, address: 0.0 },
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = 0;
        for _ in 0..200 {
            let p = propose(&s, &model, &cfg, &mut rng).unwrap();
            let d0 = p.scene.furniture[f].center() - s.furniture[f].center();
            if d0.norm() == 0.0 {
                continue;
            }
            seen += 1;
            let d1 = p.scene.supported_objects[0].center() - s.supported_objects[0].center();
            assert!((d0 - d1).norm() < 1e-12);
            for (h0, h1) in s.supported_objects[0].humans.iter().zip(&p.scene.supported_objects[0].humans) {
                assert!(((h1[0] - h0[0]) - d0.x).abs() < 1e-12);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn object_moves_stay_on_top() {
        let (model, s) = desk_with_cup();
        let cfg = SamplerConfig {
            moves: MoveProbs { translate: 1.0, rotate: 0.0, address: 0.0 },
            sigma_xy: 5.0,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let p = propose(&s, &model, &cfg, &mut rng).unwrap();
            let cup = &p.scene.supported_objects[0];
            let base = &p.scene.furniture[cup.address.unwrap()];
            assert!(base.rect().inflated(1e-9).contains(cup.center()));
        }
    }

    #[test]
    fn address_move_hastings_ratio() {
        let mut model = toy_model();
        let st = model.scene_types.get_mut("den").unwrap();
        st.set_count_dists.insert(set_key("items", "shelf_unit"), Categorical::certain("1"));
        let (model, mut rng) = (model, ChaCha8Rng::seed_from_u64(5));
        let s = sample_structure(&model, "den", &mut rng).unwrap();
        let cfg = SamplerConfig {
            moves: MoveProbs { translate: 0.0, rotate: 0.0, address: 1.0 },
            ..SamplerConfig::default()
        };
        let shelf = s.furniture.iter().position(|f| f.category == "shelf").unwrap();
        // P(box) = 0.25 split over two boxes, P(nil) = 0.75
        let q = |a: Option<usize>| if a.is_some() { (0.125f64).ln() } else { 0.75f64.ln() };
        for _ in 0..100 {
            let p = propose(&s, &model, &cfg, &mut rng).unwrap();
            assert_eq!(p.kind, MoveKind::Address);
            let (old, new) = (s.furniture[shelf].address, p.scene.furniture[shelf].address);
            assert!((p.log_q_ratio - (q(old) - q(new))).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_when_nothing_moves() {
        let mut model = toy_model();
        let st = model.scene_types.get_mut("den").unwrap();
        st.set_count_dists.insert(set_key("items", "box"), Categorical::certain("0"));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_structure(&model, "den", &mut rng).unwrap();
        let p = propose(&s, &model, &SamplerConfig::default(), &mut rng).unwrap();
        assert_eq!(p.kind, MoveKind::Identity);
    }

    #[test]
    fn chain_is_reproducible_and_best_monotone() {
        let mut model = toy_model();
        model.weights = Weights::from_vector([1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let cfg = SamplerConfig { iterations: 300, seed: 11, ..SamplerConfig::default() };
        let (a, ta) = synthesize(&model, "den", &cfg).unwrap();
        let (b, tb) = synthesize(&model, "den", &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.records, tb.records);
        for w in ta.records.windows(2) {
            assert!(w[1].best_energy <= w[0].best_energy);
        }
        assert_eq!(ta.best_energy, ta.records.last().unwrap().best_energy);
    }

    #[test]
    fn single_rejected_step_returns_structure() {
        let model = toy_model();
        // a snap grid far outside the room invalidates every furniture move
        let snap = GridSnap { origin: [-100.0, -100.0], spacing: 1.0, nx: 1, ny: 1, yaw_steps: 4 };
        let cfg = SamplerConfig { iterations: 1, seed: 21, snap: Some(snap), ..SamplerConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let structure = sample_structure(&model, "den", &mut rng).unwrap();
        let (best, trace) = synthesize(&model, "den", &cfg).unwrap();
        assert!(!trace.records[0].accepted);
        assert_eq!(best, structure);
        assert_eq!(trace.final_scene, structure);
    }

    #[test]
    fn snap_keeps_grid() {
        let g = GridSnap { origin: [0.5, 0.5], spacing: 1.0, nx: 8, ny: 8, yaw_steps: 4 };
        let mut o = ObjectInstance::new("box", [1.0; 3], [3.4, 6.6, 0.0], 1.0);
        assert!(g.snap(&mut o));
        assert_eq!((o.position[0], o.position[1]), (3.5, 6.5));
        assert!((o.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let mut o = ObjectInstance::new("box", [1.0; 3], [8.2, 3.0, 0.0], 0.0);
        assert!(!g.snap(&mut o));
    }
}
