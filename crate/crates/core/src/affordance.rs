//! Affordance maps: where humans stand relative to an object.
//!
//! A map is a normalized grid over `[-R, R]²` in the object's frame, with the
//! object at the origin facing +y.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::scene::{ObjectInstance, SceneLayout};

/// Categories whose footprint centers count as visited human positions.
pub const SEATED_CATEGORIES: [&str; 3] = ["bed", "chair", "sofa"];

pub fn is_seated(category: &str) -> bool {
    SEATED_CATEGORIES.iter().any(|s| category.ends_with(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffordanceParams {
    /// Half-width R of the map (meters).
    pub extent: f64,
    pub resolution: f64,
    /// Gaussian smoothing σ (meters).
    pub smoothing: f64,
    /// Density returned outside the map support (per m²).
    pub floor_density: f64,
}

impl Default for AffordanceParams {
    fn default() -> Self {
        Self {
            extent: 3.0,
            resolution: 0.1,
            smoothing: 0.15,
            floor_density: 1e-6,
        }
    }
}

impl AffordanceParams {
    pub fn cells(&self) -> usize {
        (2.0 * self.extent / self.resolution).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceMap {
    pub category: String,
    pub extent: f64,
    pub resolution: f64,
    pub smoothing: f64,
    /// Cells per side.
    pub cells: usize,
    /// Row-major probabilities; row index grows with local y, column with x.
    pub grid: Vec<f64>,
}

impl AffordanceMap {
    pub fn uniform(category: &str, params: &AffordanceParams) -> Self {
        let n = params.cells();
        Self {
            category: category.to_string(),
            extent: params.extent,
            resolution: params.resolution,
            smoothing: params.smoothing,
            cells: n,
            grid: vec![1.0 / (n * n) as f64; n * n],
        }
    }

    /// Builds a map from human positions already expressed in the object
    /// frame: bilinear splatting onto cell centers, Gaussian smoothing, then
    /// normalization. Returns `None` when no position falls on the grid.
    pub fn from_points(category: &str, points: &[[f64; 2]], params: &AffordanceParams) -> Option<Self> {
        let n = params.cells();
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut grid = vec![0.0; n * n];
        for p in &sorted {
            let gx = (p[0] + params.extent) / params.resolution - 0.5;
            let gy = (p[1] + params.extent) / params.resolution - 0.5;
            let (ix, iy) = (gx.floor(), gy.floor());
            let (fx, fy) = (gx - ix, gy - iy);
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                    let cx = ix as i64 + dx;
                    let cy = iy as i64 + dy;
                    if (0..n as i64).contains(&cx) && (0..n as i64).contains(&cy) {
                        grid[cy as usize * n + cx as usize] += wx * wy;
                    }
                }
            }
        }
        let mut grid = smooth(&grid, n, n, params.smoothing / params.resolution);
        let total: f64 = grid.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        for v in &mut grid {
            *v /= total;
        }
        Some(Self {
            category: category.to_string(),
            extent: params.extent,
            resolution: params.resolution,
            smoothing: params.smoothing,
            cells: n,
            grid,
        })
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    /// Center of cell (column, row) in the object frame.
    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            -self.extent + (col as f64 + 0.5) * self.resolution,
            -self.extent + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a local point, if it lies on the grid.
    pub fn cell_of(&self, local: Point2) -> Option<(usize, usize)> {
        let cx = ((local.x + self.extent) / self.resolution).floor();
        let cy = ((local.y + self.extent) / self.resolution).floor();
        let n = self.cells as f64;
        if cx >= 0.0 && cy >= 0.0 && cx < n && cy < n {
            Some((cx as usize, cy as usize))
        } else {
            None
        }
    }

    /// Density (per m²) at a point in the object frame.
    pub fn density_local(&self, local: Point2, floor: f64) -> f64 {
        match self.cell_of(local) {
            Some((c, r)) => self.grid[r * self.cells + c] / self.cell_area(),
            None => floor,
        }
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.grid.iter().enumerate() {
            if *v > self.grid[best] {
                best = i;
            }
        }
        (best % self.cells, best / self.cells)
    }

    pub fn same_geometry(&self, other: &AffordanceMap) -> bool {
        self.cells == other.cells && self.extent == other.extent && self.resolution == other.resolution
    }
}

/// Separable Gaussian blur with a truncated (3σ) normalized kernel and zero
/// padding. `sigma_cells` is σ in cell units.
pub(crate) fn smooth(grid: &[f64], width: usize, height: usize, sigma_cells: f64) -> Vec<f64> {
    if !(sigma_cells > 0.0) {
        return grid.to_vec();
    }
    let radius = (3.0 * sigma_cells).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma_cells).powi(2)).exp())
        .collect();
    let ks: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= ks;
    }
    let mut tmp = vec![0.0; grid.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let cc = c as i64 + ki as i64 - radius;
                if (0..width as i64).contains(&cc) {
                    acc += k * grid[r * width + cc as usize];
                }
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![0.0; grid.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let rr = r as i64 + ki as i64 - radius;
                if (0..height as i64).contains(&rr) {
                    acc += k * tmp[rr as usize * width + c];
                }
            }
            out[r * width + c] = acc;
        }
    }
    out
}

/// Every human position in a scene: attached (annotated or sampled) humans
/// plus the footprint centers of seats and beds.
pub fn scene_humans(scene: &SceneLayout) -> Vec<Point2> {
    let mut out = Vec::new();
    for obj in scene.instances() {
        out.extend(obj.humans.iter().map(|h| Point2::new(h[0], h[1])));
        if is_seated(&obj.category) {
            out.push(obj.center());
        }
    }
    out
}

/// Human positions in each instance's frame, grouped by category, restricted
/// to the map support.
pub fn relative_humans(scene: &SceneLayout, extent: f64) -> BTreeMap<String, Vec<[f64; 2]>> {
    let humans = scene_humans(scene);
    let mut out: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for obj in scene.instances() {
        let pose = obj.pose();
        let entry = out.entry(obj.category.clone()).or_default();
        for h in &humans {
            let p = pose.to_local(*h);
            if p.x.abs() <= extent && p.y.abs() <= extent {
                entry.push([p.x, p.y]);
            }
        }
    }
    out
}

/// Maps built from per-category relative positions. Categories without any
/// human get a uniform map and are listed in the returned warnings.
pub fn maps_from_records(
    records: &BTreeMap<String, Vec<[f64; 2]>>,
    params: &AffordanceParams,
) -> (BTreeMap<String, AffordanceMap>, Vec<String>) {
    let mut maps = BTreeMap::new();
    let mut warnings = Vec::new();
    for (cat, pts) in records {
        let map = AffordanceMap::from_points(cat, pts, params).unwrap_or_else(|| {
            warnings.push(format!("no human positions for `{cat}`; using a uniform map"));
            AffordanceMap::uniform(cat, params)
        });
        maps.insert(cat.clone(), map);
    }
    (maps, warnings)
}

/// Estimates one map per category present in `scenes`.
pub fn estimate_maps(
    scenes: &[SceneLayout],
    params: &AffordanceParams,
) -> (BTreeMap<String, AffordanceMap>, Vec<String>) {
    let mut records: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for scene in scenes {
        for (cat, pts) in relative_humans(scene, params.extent) {
            records.entry(cat).or_default().extend(pts);
        }
    }
    maps_from_records(&records, params)
}

/// Density of a human at a world position under `map` anchored at `obj`.
pub fn human_prob(map: &AffordanceMap, human: Point2, obj: &ObjectInstance, floor: f64) -> f64 {
    map.density_local(obj.pose().to_local(human), floor)
}

/// Draws `n` world positions: a cell from the map, uniform jitter inside it,
/// then the object's pose.
pub fn sample_humans<R: Rng + ?Sized>(
    map: &AffordanceMap,
    obj: &ObjectInstance,
    n: usize,
    rng: &mut R,
) -> Vec<[f64; 2]> {
    let mut cdf = Vec::with_capacity(map.grid.len());
    let mut acc = 0.0;
    for p in &map.grid {
        acc += p;
        cdf.push(acc);
    }
    let pose = obj.pose();
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let (col, row) = (idx % map.cells, idx / map.cells);
            let jx: f64 = rng.random();
            let jy: f64 = rng.random();
            let local = Point2::new(
                -map.extent + (col as f64 + jx) * map.resolution,
                -map.extent + (row as f64 + jy) * map.resolution,
            );
            let w = pose.to_world(local);
            [w.x, w.y]
        })
        .collect()
}
