//! Top-view rasters (segmentation labels, affordance and trajectory
//! heatmaps) and a binary PGM writer.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;
use crate::geometry::Point2;
use crate::io::write_bytes;
use crate::model::LearnedModel;
use crate::planner::TrajectoryHeatmap;
use crate::scene::{ObjectInstance, Room, SceneLayout};

/// An 8-bit image over the room floor. Row 0 is the top (largest y).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn blank(room: &Room, resolution: f64) -> Self {
        let width = (room.size[0] / resolution).ceil().max(1.0) as usize;
        let height = (room.size[1] / resolution).ceil().max(1.0) as usize;
        Self {
            width,
            height,
            resolution,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Floor position of the center of (col, row).
    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        let r = self.resolution;
        Point2::new((col as f64 + 0.5) * r, (self.height - 1 - row) as f64 * r + 0.5 * r)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_pgm())
    }

    /// Quantizes `values` (row-major, same layout as `pixels`) to 0–255 by
    /// their maximum; all-zero input stays zero.
    fn from_values(mut self, values: &[f64]) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            for (p, v) in self.pixels.iter_mut().zip(values) {
                *p = (v / max * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        self
    }
}

/// Labels each cell whose center lies inside a footprint with that
/// category's index. Overlaps go to the higher base, then the lower index.
pub fn rasterize_segmentation(
    scene: &SceneLayout,
    category_index: &BTreeMap<String, u8>,
    resolution: f64,
) -> RasterImage {
    let mut img = RasterImage::blank(&scene.room, resolution);
    let mut order: Vec<(&ObjectInstance, u8)> = scene
        .instances()
        .map(|o| (o, category_index.get(&o.category).copied().unwrap_or(255)))
        .collect();
    // paint lowest priority first
    order.sort_by(|a, b| {
        a.0.position[2]
            .total_cmp(&b.0.position[2])
            .then(b.1.cmp(&a.1))
    });
    for (obj, label) in order {
        let rect = obj.rect();
        for row in 0..img.height {
            for col in 0..img.width {
                if rect.contains(img.cell_center(col, row)) {
                    img.pixels[row * img.width + col] = label;
                }
            }
        }
    }
    img
}

/// Sum of every instance's affordance density placed through its pose,
/// scaled so the maximum is 255.
pub fn rasterize_affordance(scene: &SceneLayout, model: &LearnedModel, resolution: f64) -> Result<RasterImage> {
    let img = RasterImage::blank(&scene.room, resolution);
    let mut values = vec![0.0; img.pixels.len()];
    for obj in scene.instances() {
        let map = model.affordance(&obj.category)?;
        let pose = obj.pose();
        for row in 0..img.height {
            for col in 0..img.width {
                let local = pose.to_local(img.cell_center(col, row));
                values[row * img.width + col] += map.density_local(local, 0.0);
            }
        }
    }
    Ok(img.from_values(&values))
}

/// The trajectory heatmap with its cells flipped so row 0 is the top.
pub fn rasterize_heatmap(hm: &TrajectoryHeatmap) -> RasterImage {
    let img = RasterImage {
        width: hm.width,
        height: hm.height,
        resolution: hm.cell,
        pixels: vec![0; hm.width * hm.height],
    };
    let mut values = vec![0.0; hm.grid.len()];
    for r in 0..hm.height {
        let src = hm.height - 1 - r;
        values[r * hm.width..(r + 1) * hm.width].copy_from_slice(&hm.grid[src * hm.width..(src + 1) * hm.width]);
    }
    img.from_values(&values)
}
