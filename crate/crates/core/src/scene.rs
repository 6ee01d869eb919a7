//! Scene layouts (parse graphs) and the geometric queries on them.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Aabb, OrientedRect, Point2, Pose2};
use crate::grammar::TreeChoices;

pub const SCENE_VERSION: u32 = 1;

/// A furniture piece or supported object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: String,
    /// (w, l, h) in meters; `w` spans the local x axis, `l` the facing axis.
    pub size: [f64; 3],
    pub position: [f64; 3],
    /// Facing direction `(sin yaw, cos yaw)`, kept in `[0, 2π)`.
    pub yaw: f64,
    /// Index into the scene's furniture list, or nil.
    #[serde(default)]
    pub address: Option<usize>,
    #[serde(default)]
    pub humans: Vec<[f64; 2]>,
}

impl ObjectInstance {
    pub fn new(category: &str, size: [f64; 3], position: [f64; 3], yaw: f64) -> Self {
        Self {
            category: category.to_string(),
            size,
            position,
            yaw: geometry::wrap_yaw(yaw),
            address: None,
            humans: Vec::new(),
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.position[0], self.position[1])
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.center(), self.yaw)
    }

    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(self.center(), self.size[0], self.size[1], self.yaw)
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Height of the top surface.
    pub fn top(&self) -> f64 {
        self.position[2] + self.size[2]
    }

    /// Applies a rigid planar motion: rotate by `delta_yaw` about `pivot`,
    /// then translate by `offset`. Sampled humans move along.
    pub fn transform(&mut self, pivot: Point2, delta_yaw: f64, offset: Point2) {
        let c = geometry::rotate_about(self.center(), pivot, delta_yaw) + offset;
        self.position[0] = c.x;
        self.position[1] = c.y;
        self.yaw = geometry::wrap_yaw(self.yaw + delta_yaw);
        for h in &mut self.humans {
            let p = geometry::rotate_about(Point2::new(h[0], h[1]), pivot, delta_yaw) + offset;
            *h = [p.x, p.y];
        }
    }
}

/// Footprint corners in counter-clockwise order.
pub fn footprint(obj: &ObjectInstance) -> [Point2; 4] {
    obj.rect().corners()
}

/// Volume shared by two boxes: footprint intersection area times the overlap
/// of their vertical extents.
pub fn overlap_volume(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let lo = a.position[2].max(b.position[2]);
    let hi = a.top().min(b.top());
    if hi <= lo {
        return 0.0;
    }
    let area = geometry::convex_intersection_area(&footprint(a), &footprint(b));
    area * (hi - lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub scene_type: String,
    /// (w, l, h); the floor spans `[0, w] × [0, l]`.
    pub size: [f64; 3],
}

impl Room {
    pub fn new(scene_type: &str, size: [f64; 3]) -> Self {
        Self {
            scene_type: scene_type.to_string(),
            size,
        }
    }

    pub fn floor(&self) -> Aabb {
        Aabb::new(Point2::default(), Point2::new(self.size[0], self.size[1]))
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.floor().contains(p)
    }

    /// Volume of an object's box lying outside the room's floor rectangle.
    pub fn outside_volume(&self, obj: &ObjectInstance) -> f64 {
        let fp = footprint(obj);
        let inside = geometry::convex_intersection_area(&fp, &self.floor().corners());
        (obj.size[0] * obj.size[1] - inside).max(0.0) * obj.size[2]
    }
}

/// The four walls in tie-break order, with the yaw of their inward normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    MinX,
    MaxX,
    MinY,
    MaxY,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::MinX, Wall::MaxX, Wall::MinY, Wall::MaxY];

    /// Yaw that faces into the room, away from this wall.
    pub fn inward_yaw(self) -> f64 {
        match self {
            Wall::MinX => FRAC_PI_2,
            Wall::MaxX => 3.0 * FRAC_PI_2,
            Wall::MinY => 0.0,
            Wall::MaxY => PI,
        }
    }

    pub fn distance(self, p: Point2, room: &Room) -> f64 {
        match self {
            Wall::MinX => p.x,
            Wall::MaxX => room.size[0] - p.x,
            Wall::MinY => p.y,
            Wall::MaxY => room.size[1] - p.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallRelation {
    pub wall: Wall,
    pub distance: f64,
    /// Object yaw minus the wall's inward-normal yaw, in `(-π, π]`.
    pub orientation: f64,
}

/// Distance from the object's center to the nearest wall and its orientation
/// relative to that wall's inward normal.
pub fn nearest_wall(obj: &ObjectInstance, room: &Room) -> Result<WallRelation> {
    let c = obj.center();
    if !room.contains(c) {
        return Err(Error::InvalidLayout(format!(
            "{} center ({:.3}, {:.3}) lies outside the room",
            obj.category, c.x, c.y
        )));
    }
    let mut best = Wall::MinX;
    let mut best_d = f64::INFINITY;
    for wall in Wall::ALL {
        let d = wall.distance(c, room);
        if d < best_d {
            best = wall;
            best_d = d;
        }
    }
    Ok(WallRelation {
        wall: best,
        distance: best_d,
        orientation: geometry::wrap_signed(obj.yaw - best.inward_yaw()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub version: u32,
    pub room: Room,
    pub furniture: Vec<ObjectInstance>,
    pub supported_objects: Vec<ObjectInstance>,
    pub tree_choices: TreeChoices,
}

/// Which list an instance lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstanceRef {
    Furniture(usize),
    Object(usize),
}

impl SceneLayout {
    pub fn empty(room: Room) -> Self {
        Self {
            version: SCENE_VERSION,
            room,
            furniture: Vec::new(),
            supported_objects: Vec::new(),
            tree_choices: TreeChoices::default(),
        }
    }

    pub fn get(&self, r: InstanceRef) -> &ObjectInstance {
        match r {
            InstanceRef::Furniture(i) => &self.furniture[i],
            InstanceRef::Object(i) => &self.supported_objects[i],
        }
    }

    pub fn get_mut(&mut self, r: InstanceRef) -> &mut ObjectInstance {
        match r {
            InstanceRef::Furniture(i) => &mut self.furniture[i],
            InstanceRef::Object(i) => &mut self.supported_objects[i],
        }
    }

    pub fn instance_refs(&self) -> impl Iterator<Item = InstanceRef> + '_ {
        (0..self.furniture.len())
            .map(InstanceRef::Furniture)
            .chain((0..self.supported_objects.len()).map(InstanceRef::Object))
    }

    pub fn instances(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.furniture.iter().chain(&self.supported_objects)
    }

    pub fn instance_count(&self) -> usize {
        self.furniture.len() + self.supported_objects.len()
    }

    /// Supported objects resting on furniture `f`.
    pub fn carried_by(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.supported_objects
            .iter()
            .enumerate()
            .filter(move |(_, o)| o.address == Some(f))
            .map(|(i, _)| i)
    }

    /// Moves furniture `f` rigidly, carrying its supported objects and every
    /// attached human.
    pub fn move_furniture(&mut self, f: usize, delta_yaw: f64, offset: Point2) {
        let pivot = self.furniture[f].center();
        let carried: Vec<usize> = self.carried_by(f).collect();
        self.furniture[f].transform(pivot, delta_yaw, offset);
        for o in carried {
            self.supported_objects[o].transform(pivot, delta_yaw, offset);
        }
    }

    /// Total pairwise overlap volume between furniture pieces, each unordered
    /// pair counted once.
    pub fn furniture_overlap(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.furniture.len() {
            for j in i + 1..self.furniture.len() {
                total += overlap_volume(&self.furniture[i], &self.furniture[j]);
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveSize { item: String },
    NonFinite { item: String },
    YawOutOfRange { item: String },
    OutOfBounds { item: String },
    DanglingAddress { item: String, target: usize },
    SelfAddress { item: String },
    SupportHeight { item: String, expected: f64, actual: f64 },
    RoomSize,
}

fn label(kind: &str, i: usize, obj: &ObjectInstance) -> String {
    format!("{kind}[{i}] {}", obj.category)
}

/// Lists every violated layout invariant; empty when the scene is valid.
pub fn validate(scene: &SceneLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    if scene.room.size.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        out.push(Violation::RoomSize);
    }
    let lists = [("furniture", &scene.furniture), ("object", &scene.supported_objects)];
    for (kind, list) in lists {
        for (i, obj) in list.iter().enumerate() {
            let item = label(kind, i, obj);
            let finite = obj.size.iter().chain(&obj.position).all(|v| v.is_finite())
                && obj.yaw.is_finite()
                && obj.humans.iter().flatten().all(|v| v.is_finite());
            if !finite {
                out.push(Violation::NonFinite { item });
                continue;
            }
            if obj.size.iter().any(|&s| s <= 0.0) {
                out.push(Violation::NonPositiveSize { item: item.clone() });
            }
            if !(0.0..std::f64::consts::TAU).contains(&obj.yaw) {
                out.push(Violation::YawOutOfRange { item: item.clone() });
            }
            if !scene.room.contains(obj.center()) {
                out.push(Violation::OutOfBounds { item: item.clone() });
            }
            if let Some(target) = obj.address {
                if target >= scene.furniture.len() {
                    out.push(Violation::DanglingAddress { item, target });
                } else if kind == "furniture" && target == i {
                    out.push(Violation::SelfAddress { item });
                } else if kind == "object" {
                    let expected = scene.furniture[target].top();
                    if (obj.position[2] - expected).abs() > 1e-9 {
                        out.push(Violation::SupportHeight {
                            item,
                            expected,
                            actual: obj.position[2],
                        });
                    }
                }
            }
        }
    }
    out
}
