//! Known-parameter fixture: a bedroom/office grammar and a rule-based corpus
//! generator with annotated humans.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegram::geometry::{Point2, Pose2};
use scenegram::grammar::{Grammar, GroupingRules, Layer, NodeSpec, GRAMMAR_VERSION};
use scenegram::io::{CorpusInstance, CorpusScene, CORPUS_VERSION};
use scenegram::scene::{overlap_volume, ObjectInstance, Room, Wall};

pub fn grammar() -> Grammar {
    let nodes = [
        ("root", NodeSpec::or(&["bedroom", "office"])),
        ("bedroom", NodeSpec::and(&["bedroom_items"])),
        (
            "bedroom_items",
            NodeSpec::set(&["bed", "stand_unit", "wardrobe", "desk", "chair_unit", "lamp_unit", "book_unit"]),
        ),
        ("bed", NodeSpec::terminal("bed", Layer::Furniture)),
        ("stand_unit", NodeSpec::and(&["nightstand", "stand_addr"])),
        ("nightstand", NodeSpec::terminal("nightstand", Layer::Furniture)),
        ("stand_addr", NodeSpec::address(&["bed"])),
        ("wardrobe", NodeSpec::terminal("wardrobe", Layer::Furniture)),
        ("desk", NodeSpec::terminal("desk", Layer::Furniture)),
        ("lamp_unit", NodeSpec::and(&["lamp", "lamp_addr"])),
        ("lamp", NodeSpec::terminal("lamp", Layer::Object)),
        ("lamp_addr", NodeSpec::address(&["nightstand", "desk"])),
        ("book_unit", NodeSpec::and(&["book", "book_addr"])),
        ("book", NodeSpec::terminal("book", Layer::Object)),
        ("book_addr", NodeSpec::address(&["desk", "bookshelf"])),
        ("office", NodeSpec::and(&["office_items"])),
        ("office_items", NodeSpec::set(&["desk", "seat", "bookshelf", "book_unit"])),
        ("seat", NodeSpec::or(&["chair_unit", "stool"])),
        ("chair_unit", NodeSpec::and(&["chair", "chair_addr"])),
        ("chair", NodeSpec::terminal("chair", Layer::Furniture)),
        ("chair_addr", NodeSpec::address(&["desk"])),
        ("stool", NodeSpec::terminal("stool", Layer::Furniture)),
        ("bookshelf", NodeSpec::terminal("bookshelf", Layer::Furniture)),
    ];
    Grammar {
        version: GRAMMAR_VERSION,
        root: "root".into(),
        scene_types: vec!["bedroom".into(), "office".into()],
        nodes: nodes.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

pub fn rules() -> GroupingRules {
    GroupingRules {
        version: 1,
        rules: [
            ("nightstand".to_string(), vec!["bed".to_string()]),
            ("chair".to_string(), vec!["desk".to_string()]),
        ]
        .into(),
    }
}

/// Generating probabilities the corpus is drawn from.
pub const P_TWO_NIGHTSTANDS: f64 = 0.6;
pub const P_LAMP: f64 = 0.8;
pub const P_BOOK: f64 = 0.6;
pub const P_CHAIR: f64 = 0.7;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Point at `along` meters from the wall's start and `depth` meters into the
/// room, for walls traversed in the +x / +y direction.
fn wall_point(room: [f64; 3], wall: Wall, along: f64, depth: f64) -> Point2 {
    match wall {
        Wall::MinX => Point2::new(depth, along),
        Wall::MaxX => Point2::new(room[0] - depth, along),
        Wall::MinY => Point2::new(along, depth),
        Wall::MaxY => Point2::new(along, room[1] - depth),
    }
}

fn wall_length(room: [f64; 3], wall: Wall) -> f64 {
    match wall {
        Wall::MinX | Wall::MaxX => room[1],
        Wall::MinY | Wall::MaxY => room[0],
    }
}

/// A piece with its back against `wall`, facing into the room.
fn against(room: [f64; 3], wall: Wall, cat: &str, size: [f64; 3], along: f64, gap: f64) -> ObjectInstance {
    let c = wall_point(room, wall, along, 0.5 * size[1] + gap);
    ObjectInstance::new(cat, size, [c.x, c.y, 0.0], wall.inward_yaw())
}

fn place_along(rng: &mut ChaCha8Rng, room: [f64; 3], wall: Wall, width: f64) -> f64 {
    let len = wall_length(room, wall);
    uniform(rng, 0.5 * width + 0.05, len - 0.5 * width - 0.05)
}

/// Annotated humans per instance, matching the default sampled count.
pub const HUMANS_PER_INSTANCE: usize = 3;

/// Where people stand to use an instance, in its local frame.
fn usage_point(rng: &mut ChaCha8Rng, obj: &ObjectInstance) -> Point2 {
    let front = 0.5 * obj.size[1];
    let (x, y) = match obj.category.as_str() {
        "bed" => {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (side * (0.5 * obj.size[0] + 0.35), uniform(rng, -0.5, 0.5))
        }
        "chair" | "stool" => (0.0, 0.0),
        "wardrobe" => (uniform(rng, -0.3, 0.3), front + 0.5),
        _ => (uniform(rng, -0.15, 0.15), front + 0.45),
    };
    Point2::new(x + uniform(rng, -SPREAD, SPREAD), y + uniform(rng, -SPREAD, SPREAD))
}

/// Humans around `anchor`'s usage point; objects on furniture are used from
/// where their supporter is used.
fn annotate(rng: &mut ChaCha8Rng, anchor: &ObjectInstance) -> Vec<[f64; 2]> {
    (0..HUMANS_PER_INSTANCE)
        .map(|_| {
            let p = anchor.pose().to_world(usage_point(rng, anchor));
            [p.x, p.y]
        })
        .collect()
}

fn corpus_instance(obj: &ObjectInstance, supported_by: Option<usize>) -> CorpusInstance {
    CorpusInstance {
        category: obj.category.clone(),
        size: obj.size,
        position: obj.position,
        yaw: obj.yaw,
        supported_by,
        humans: obj.humans.clone(),
    }
}

fn fits(room: &Room, furniture: &[ObjectInstance]) -> bool {
    for (i, a) in furniture.iter().enumerate() {
        if room.outside_volume(a) > 1e-9 {
            return false;
        }
        for b in &furniture[i + 1..] {
            if overlap_volume(a, b) > 0.0 {
                return false;
            }
        }
    }
    true
}

fn objects_on(
    rng: &mut ChaCha8Rng,
    furniture: &[ObjectInstance],
    cat: &str,
    support: &str,
    p: f64,
    size: [f64; 3],
) -> Vec<(ObjectInstance, usize)> {
    let mut out = Vec::new();
    for (i, f) in furniture.iter().enumerate() {
        if f.category != support || rng.random::<f64>() >= p {
            continue;
        }
        let u = uniform(rng, -0.1, 0.1) * f.size[0];
        let v = uniform(rng, -0.1, 0.1) * f.size[1];
        let c = Pose2::new(f.center(), f.yaw).to_world(Point2::new(u, v));
        let yaw = uniform(rng, 0.0, 2.0 * PI);
        out.push((ObjectInstance::new(cat, size, [c.x, c.y, f.top()], yaw), i));
    }
    out
}

fn bedroom_furniture(rng: &mut ChaCha8Rng, room: [f64; 3]) -> Vec<ObjectInstance> {
    let walls = Wall::ALL;
    let bed_wall = walls[rng.random_range(0..4)];
    let bed_size = [uniform(rng, 1.4, 1.8), uniform(rng, 1.9, 2.1), 0.5];
    let mid = 0.5 * wall_length(room, bed_wall);
    let along = mid + uniform(rng, -0.5, 0.5);
    let bed = against(room, bed_wall, "bed", bed_size, along, uniform(rng, 0.02, 0.2));
    let mut out = vec![bed];

    let two = rng.random::<f64>() < P_TWO_NIGHTSTANDS;
    let sides: Vec<f64> = if two {
        vec![-1.0, 1.0]
    } else if rng.random::<bool>() {
        vec![1.0]
    } else {
        vec![-1.0]
    };
    for s in sides {
        let size = [uniform(rng, 0.4, 0.5), uniform(rng, 0.37, 0.43), 0.55];
        let offset = 0.5 * bed_size[0] + 0.5 * size[0] + 0.05;
        // along-wall direction flips with the facing; use the bed frame
        let c = Pose2::new(out[0].center(), out[0].yaw)
            .to_world(Point2::new(s * offset, -0.5 * bed_size[1] + 0.5 * size[1]));
        let ns = ObjectInstance::new("nightstand", size, [c.x, c.y, 0.0], out[0].yaw);
        out.push(ns);
    }

    let others: Vec<Wall> = walls.iter().copied().filter(|w| *w != bed_wall).collect();
    let ward_wall = others[rng.random_range(0..others.len())];
    let wsize = [uniform(rng, 0.9, 1.2), 0.6, 2.0];
    let along = place_along(rng, room, ward_wall, wsize[0]);
    let ward = against(room, ward_wall, "wardrobe", wsize, along, uniform(rng, 0.02, 0.2));
    out.push(ward);

    let rest: Vec<Wall> = others.iter().copied().filter(|w| *w != ward_wall).collect();
    let desk_wall = rest[rng.random_range(0..rest.len())];
    let dsize = [uniform(rng, 1.0, 1.3), 0.6, 0.75];
    let along = place_along(rng, room, desk_wall, dsize[0]);
    let desk = against(room, desk_wall, "desk", dsize, along, uniform(rng, 0.02, 0.2));
    if rng.random::<f64>() < P_CHAIR {
        out.push(chair_at(rng, &desk, "chair", [0.5, 0.5, 0.9]));
    }
    out.push(desk);
    out
}

/// A seat pulled up to the front of a desk, facing it.
fn chair_at(rng: &mut ChaCha8Rng, desk: &ObjectInstance, cat: &str, size: [f64; 3]) -> ObjectInstance {
    let local = Point2::new(uniform(rng, -0.15, 0.15), 0.5 * desk.size[1] + 0.35);
    let c = desk.pose().to_world(local);
    let yaw = scenegram::geometry::wrap_yaw(desk.yaw + PI + uniform(rng, -0.3, 0.3));
    ObjectInstance::new(cat, size, [c.x, c.y, 0.0], yaw)
}

fn office_furniture(rng: &mut ChaCha8Rng, room: [f64; 3]) -> Vec<ObjectInstance> {
    let desk_wall = Wall::ALL[rng.random_range(0..4)];
    let dsize = [uniform(rng, 1.2, 1.6), 0.7, 0.75];
    let along = place_along(rng, room, desk_wall, dsize[0]);
    let desk = against(room, desk_wall, "desk", dsize, along, uniform(rng, 0.02, 0.2));
    let seat = if rng.random::<f64>() < P_CHAIR {
        chair_at(rng, &desk, "chair", [0.5, 0.5, 0.9])
    } else {
        chair_at(rng, &desk, "stool", [0.4, 0.4, 0.5])
    };
    let mut out = vec![desk, seat];
    let shelf_wall = Wall::ALL
        .into_iter()
        .filter(|w| *w != desk_wall)
        .nth(rng.random_range(0..3))
        .unwrap();
    let ssize = [uniform(rng, 0.8, 1.0), 0.35, 1.8];
    let along = place_along(rng, room, shelf_wall, ssize[0]);
    let shelf = against(room, shelf_wall, "bookshelf", ssize, along, uniform(rng, 0.02, 0.2));
    out.push(shelf);
    out
}

/// One scene of the given type. Rooms are redrawn until nothing overlaps.
pub fn generate_scene(rng: &mut ChaCha8Rng, scene_type: &str, id: &str) -> CorpusScene {
    loop {
        let room = [uniform(rng, ROOM_MIN, ROOM_MAX), uniform(rng, ROOM_MIN, ROOM_MAX), 2.8];
        let furniture = match scene_type {
            "bedroom" => bedroom_furniture(rng, room),
            _ => office_furniture(rng, room),
        };
        if !fits(&Room::new(scene_type, room), &furniture) {
            continue;
        }
        let mut objects = Vec::new();
        if scene_type == "bedroom" {
            objects.extend(objects_on(rng, &furniture, "lamp", "nightstand", P_LAMP, [0.25, 0.25, 0.45]));
            objects.extend(objects_on(rng, &furniture, "book", "desk", P_BOOK, [0.2, 0.3, 0.05]));
        } else {
            objects.extend(objects_on(rng, &furniture, "book", "bookshelf", P_BOOK, [0.2, 0.3, 0.05]));
        }
        let mut furniture = furniture;
        for f in &mut furniture {
            f.humans = annotate(rng, f);
        }
        for (o, s) in &mut objects {
            o.humans = annotate(rng, &furniture[*s]);
        }
        let mut instances: Vec<CorpusInstance> = furniture.iter().map(|f| corpus_instance(f, None)).collect();
        for (o, s) in &objects {
            instances.push(corpus_instance(o, Some(*s)));
        }
        return CorpusScene {
            version: CORPUS_VERSION,
            id: id.to_string(),
            scene_type: scene_type.to_string(),
            room,
            instances,
        };
    }
}

pub fn generate_corpus(n: usize, scene_type: &str, seed: u64) -> Vec<CorpusScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| generate_scene(&mut rng, scene_type, &format!("{scene_type}-{i:05}")))
        .collect()
}

/// Bedrooms and offices interleaved.
pub fn mixed_corpus(n: usize, seed: u64) -> Vec<CorpusScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let st = if i % 2 == 0 { "bedroom" } else { "office" };
            generate_scene(&mut rng, st, &format!("{st}-{i:05}"))
        })
        .collect()
}

pub const ROOM_MIN: f64 = 3.6;
pub const ROOM_MAX: f64 = 5.0;
/// Half-width of the uniform jitter around each usage point (meters).
pub const SPREAD: f64 = 0.5;

/// A one-category model: `count` boxes of a fixed size in a room of fixed
/// size, with the given wall priors. Weights are zero.
pub fn box_model(
    room: [f64; 3],
    count: usize,
    size: [f64; 3],
    wall_dist: scenegram::prob::LogNormalDist,
    wall_orient: scenegram::prob::VonMisesMixture,
) -> scenegram::model::LearnedModel {
    use scenegram::affordance::AffordanceMap;
    use scenegram::energy::Weights;
    use scenegram::model::{category_indices, LearnedModel, ModelSettings, SceneTypeModel, MODEL_VERSION};
    use scenegram::prob::{Categorical, KdeDist};

    let nodes = [
        ("root", NodeSpec::or(&["yard"])),
        ("yard", NodeSpec::and(&["boxes"])),
        ("boxes", NodeSpec::set(&["box"])),
        ("box", NodeSpec::terminal("box", Layer::Furniture)),
    ];
    let grammar = Grammar {
        version: GRAMMAR_VERSION,
        root: "root".into(),
        scene_types: vec!["yard".into()],
        nodes: nodes.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    let tight = |v: [f64; 3]| KdeDist::with_bandwidths(vec![v.to_vec()], vec![1e-3; 3]).unwrap();
    let st = SceneTypeModel {
        room_size: tight(room),
        or_dists: [("root".to_string(), Categorical::certain("yard"))].into(),
        set_count_dists: [("boxes/box".to_string(), Categorical::certain(&count.to_string()))].into(),
        address_dists: Default::default(),
        size_kdes: [("box".to_string(), tight(size))].into(),
        wall_dist: [("box".to_string(), wall_dist)].into(),
        wall_orient: [("box".to_string(), wall_orient)].into(),
    };
    let rules = GroupingRules::default();
    let settings = ModelSettings::default();
    LearnedModel {
        version: MODEL_VERSION,
        category_index: category_indices(&grammar).unwrap(),
        fingerprint: LearnedModel::compute_fingerprint(&grammar, &rules, &settings),
        scene_types: [("yard".to_string(), st)].into(),
        affordances: [("box".to_string(), AffordanceMap::uniform("box", &settings.affordance))].into(),
        weights: Weights::zero(),
        grammar,
        rules,
        settings,
    }
}

/// Corpus layouts and a model fitted to them (unit weights, no CD).
pub fn fitted(corpus: &[CorpusScene]) -> (scenegram::model::LearnedModel, Vec<scenegram::scene::SceneLayout>) {
    use scenegram::learning::{collect_layout_stats, corpus_layouts, fit_model};
    use scenegram::model::ModelSettings;
    let (g, r, settings) = (grammar(), rules(), ModelSettings::default());
    let layouts = corpus_layouts(corpus, &g, &r, &settings).unwrap();
    let stats = collect_layout_stats(&layouts, &g, &settings).unwrap();
    (fit_model(&stats, &g, &r, &settings).unwrap().0, layouts)
}
