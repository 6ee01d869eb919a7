//! Bi-directional RRT between furniture pieces and the trajectory heatmap
//! whose entropy rewards open circulation space.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affordance::smooth;
use crate::error::{Error, Result};
use crate::geometry::{OrientedRect, Point2};
use crate::scene::{ObjectInstance, Room, SceneLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Extension step (meters).
    pub step: f64,
    pub goal_bias: f64,
    pub max_iters: usize,
    /// Obstacles are inflated by this radius (meters).
    pub agent_radius: f64,
    /// Heatmap cell size (meters).
    pub cell: f64,
    /// Heatmap smoothing σ (meters).
    pub smoothing: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            step: 0.2,
            goal_bias: 0.1,
            max_iters: 5000,
            agent_radius: 0.25,
            cell: 0.2,
            smoothing: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanProblem {
    pub room: Room,
    pub obstacles: Vec<OrientedRect>,
    pub start: Point2,
    pub goal: Point2,
}

impl PlanProblem {
    pub fn point_free(&self, p: Point2) -> bool {
        self.room.contains(p) && !self.obstacles.iter().any(|o| o.contains_strict(p))
    }

    /// The room is convex, so a segment with both ends inside it stays inside.
    pub fn segment_free(&self, a: Point2, b: Point2) -> bool {
        self.room.contains(a)
            && self.room.contains(b)
            && !self.obstacles.iter().any(|o| o.segment_intersects(a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub waypoints: Vec<Point2>,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Points along the polyline no more than `spacing` apart, endpoints
    /// included.
    pub fn resample(&self, spacing: f64) -> Vec<Point2> {
        let mut out = Vec::new();
        if let Some(first) = self.waypoints.first() {
            out.push(*first);
        }
        for w in self.waypoints.windows(2) {
            let n = (w[0].distance(w[1]) / spacing).ceil().max(1.0) as usize;
            for k in 1..=n {
                out.push(w[0].lerp(w[1], k as f64 / n as f64));
            }
        }
        out
    }
}

struct Tree {
    nodes: Vec<Point2>,
    parent: Vec<usize>,
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

impl Tree {
    fn new(root: Point2) -> Self {
        Self {
            nodes: vec![root],
            parent: vec![0],
        }
    }

    fn nearest(&self, p: Point2) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (*n - p).dot(*n - p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn extend(&mut self, target: Point2, problem: &PlanProblem, step: f64) -> Extend {
        let near = self.nearest(target);
        let from = self.nodes[near];
        let d = target - from;
        let dist = d.norm();
        let (q, reached) = if dist <= step {
            (target, true)
        } else {
            (from + d * (step / dist), false)
        };
        if !problem.segment_free(from, q) {
            return Extend::Trapped;
        }
        self.nodes.push(q);
        self.parent.push(near);
        let idx = self.nodes.len() - 1;
        if reached {
            Extend::Reached(idx)
        } else {
            Extend::Advanced(idx)
        }
    }

    /// Node sequence from the root to `idx`.
    fn path_to(&self, mut idx: usize) -> Vec<Point2> {
        let mut out = vec![self.nodes[idx]];
        while idx != 0 {
            idx = self.parent[idx];
            out.push(self.nodes[idx]);
        }
        out.reverse();
        out
    }
}

/// Plans from `start` to `goal` with two trees grown alternately, each
/// extension followed by a greedy connect attempt from the other tree.
///
/// Returns `Ok(None)` when no path is found within `max_iters`, and an error
/// when the start or goal itself is blocked.
pub fn birrt<R: Rng + ?Sized>(
    problem: &PlanProblem,
    params: &PlannerParams,
    rng: &mut R,
) -> Result<Option<Trajectory>> {
    for (which, p) in [("start", problem.start), ("goal", problem.goal)] {
        if !problem.point_free(p) {
            return Err(Error::Blocked { which, x: p.x, y: p.y });
        }
    }
    if problem.start.distance(problem.goal) < 1e-12 {
        return Ok(Some(Trajectory {
            waypoints: vec![problem.start],
        }));
    }
    let mut trees = [Tree::new(problem.start), Tree::new(problem.goal)];
    let [w, l, _] = problem.room.size;
    for iter in 0..params.max_iters {
        let (a, b) = if iter % 2 == 0 { (0, 1) } else { (1, 0) };
        let target = if rng.random::<f64>() < params.goal_bias {
            trees[b].nodes[0]
        } else {
            Point2::new(rng.random::<f64>() * w, rng.random::<f64>() * l)
        };
        let new_idx = match trees[a].extend(target, problem, params.step) {
            Extend::Trapped => continue,
            Extend::Reached(i) | Extend::Advanced(i) => i,
        };
        let q_new = trees[a].nodes[new_idx];
        loop {
            match trees[b].extend(q_new, problem, params.step) {
                Extend::Reached(j) => {
                    let mut pa = trees[a].path_to(new_idx);
                    let mut pb = trees[b].path_to(j);
                    pb.pop();
                    pb.reverse();
                    pa.extend(pb);
                    if a == 1 {
                        pa.reverse();
                    }
                    return Ok(Some(Trajectory { waypoints: pa }));
                }
                Extend::Advanced(_) => continue,
                Extend::Trapped => break,
            }
        }
    }
    Ok(None)
}

/// Normalized occupancy of planned trajectories over the room floor. Row 0 is
/// the `y ∈ [0, cell)` strip.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHeatmap {
    pub width: usize,
    pub height: usize,
    pub cell: f64,
    pub grid: Vec<f64>,
    /// True when no trajectory was planned; the grid is then all zero.
    pub empty: bool,
    pub trajectories: usize,
}

impl TrajectoryHeatmap {
    pub fn blank(room: &Room, cell: f64) -> Self {
        let width = (room.size[0] / cell).ceil().max(1.0) as usize;
        let height = (room.size[1] / cell).ceil().max(1.0) as usize;
        Self {
            width,
            height,
            cell,
            grid: vec![0.0; width * height],
            empty: true,
            trajectories: 0,
        }
    }

    pub fn uniform(width: usize, height: usize, cell: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            cell,
            grid: vec![1.0 / n as f64; n],
            empty: false,
            trajectories: 0,
        }
    }

    fn cell_index(&self, p: Point2) -> Option<usize> {
        let cx = (p.x / self.cell).floor();
        let cy = (p.y / self.cell).floor();
        if cx < 0.0 || cy < 0.0 {
            return None;
        }
        let (cx, cy) = ((cx as usize).min(self.width - 1), (cy as usize).min(self.height - 1));
        Some(cy * self.width + cx)
    }
}

fn furniture_key(obj: &ObjectInstance, rank: usize) -> u64 {
    let mut h = DefaultHasher::new();
    obj.category.hash(&mut h);
    rank.hash(&mut h);
    h.finish()
}

fn pair_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut h = DefaultHasher::new();
    (seed, a, b).hash(&mut h);
    h.finish()
}

/// Furniture sorted by (category, x, y, yaw) with each piece's rank among
/// its category, so that results do not depend on list order.
fn canonical_furniture(scene: &SceneLayout) -> Vec<(&ObjectInstance, usize)> {
    let mut items: Vec<&ObjectInstance> = scene.furniture.iter().collect();
    items.sort_by(|a, b| {
        a.category
            .cmp(&b.category)
            .then(a.position[0].total_cmp(&b.position[0]))
            .then(a.position[1].total_cmp(&b.position[1]))
            .then(a.yaw.total_cmp(&b.yaw))
    });
    let mut out = Vec::with_capacity(items.len());
    for (i, obj) in items.iter().enumerate() {
        let rank = if i > 0 && items[i - 1].category == obj.category {
            out.last().map_or(0, |(_, r): &(&ObjectInstance, usize)| r + 1)
        } else {
            0
        };
        out.push((*obj, rank));
    }
    out
}

/// Plans between every ordered pair of furniture pieces, marks the cells each
/// trajectory crosses, then smooths and normalizes the counts.
///
/// Each pair draws from its own random stream keyed by the pieces' category
/// and rank, so the result is a deterministic function of the scene.
pub fn activity_heatmap(scene: &SceneLayout, params: &PlannerParams, seed: u64) -> TrajectoryHeatmap {
    let mut hm = TrajectoryHeatmap::blank(&scene.room, params.cell);
    let pieces = canonical_furniture(scene);
    if pieces.len() < 2 {
        return hm;
    }
    let keys: Vec<u64> = pieces.iter().map(|(o, r)| furniture_key(o, *r)).collect();
    let rects: Vec<OrientedRect> = pieces
        .iter()
        .map(|(o, _)| o.rect().inflated(params.agent_radius))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..pieces.len())
        .flat_map(|i| (0..pieces.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let paths: Vec<Option<Trajectory>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let problem = PlanProblem {
                room: scene.room.clone(),
                obstacles: rects
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, r)| *r)
                    .collect(),
                start: pieces[i].0.center(),
                goal: pieces[j].0.center(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, keys[i], keys[j]));
            birrt(&problem, params, &mut rng).ok().flatten()
        })
        .collect();

    let mut counts = vec![0.0; hm.grid.len()];
    let mut marked = vec![false; hm.grid.len()];
    for path in paths.iter().flatten() {
        marked.iter_mut().for_each(|m| *m = false);
        for p in path.resample(params.cell / 4.0) {
            if let Some(idx) = hm.cell_index(p) {
                if !marked[idx] {
                    marked[idx] = true;
                    counts[idx] += 1.0;
                }
            }
        }
        hm.trajectories += 1;
    }
    if hm.trajectories == 0 {
        return hm;
    }
    let mut grid = smooth(&counts, hm.width, hm.height, params.smoothing / params.cell);
    let total: f64 = grid.iter().sum();
    for v in &mut grid {
        *v /= total;
    }
    hm.grid = grid;
    hm.empty = false;
    hm
}

/// Shannon entropy of the heatmap cells, `0 ln 0 = 0`; zero when empty.
pub fn heatmap_entropy(hm: &TrajectoryHeatmap) -> f64 {
    if hm.empty {
        return 0.0;
    }
    -hm.grid
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// The circulation cost: negative heatmap entropy.
pub fn l_ent(hm: &TrajectoryHeatmap) -> f64 {
    -heatmap_entropy(hm)
}
