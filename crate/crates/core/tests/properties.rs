mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenegram::affordance::{estimate_maps, human_prob};
use scenegram::energy::{evaluate, loss_features, Weights, F_COL, F_ENT, SLOTS};
use scenegram::geometry::{signed_area, Point2};
use scenegram::model::LearnedModel;
use scenegram::planner::{activity_heatmap, heatmap_entropy, PlannerParams};
use scenegram::prob::{Categorical, LogNormalDist, VonMisesMixture};
use scenegram::sampler::{acceptance_probability, sample_structure};
use scenegram::scene::{footprint, nearest_wall, overlap_volume, ObjectInstance, Room, SceneLayout};

fn fixture() -> &'static (LearnedModel, Vec<SceneLayout>) {
    static F: OnceLock<(LearnedModel, Vec<SceneLayout>)> = OnceLock::new();
    F.get_or_init(|| common::fitted(&common::mixed_corpus(60, 17)))
}

fn object() -> impl Strategy<Value = ObjectInstance> {
    (0.1..3.0f64, 0.1..3.0f64, 0.1..2.0f64, -4.0..4.0f64, -4.0..4.0f64, 0.0..0.5f64, 0.0..(2.0 * PI))
        .prop_map(|(w, l, h, x, y, z, yaw)| ObjectInstance::new("box", [w, l, h], [x, y, z], yaw))
}

fn moved(obj: &ObjectInstance, theta: f64, dx: f64, dy: f64) -> ObjectInstance {
    let mut o = obj.clone();
    o.transform(Point2::new(0.0, 0.0), theta, Point2::new(dx, dy));
    o
}

proptest! {
    #[test]
    fn overlap_is_symmetric(a in object(), b in object()) {
        let (ab, ba) = (overlap_volume(&a, &b), overlap_volume(&b, &a));
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
    }

    #[test]
    fn self_overlap_is_volume(a in object()) {
        let v = a.size[0] * a.size[1] * a.size[2];
        prop_assert!((overlap_volume(&a, &a) - v).abs() <= 1e-9 * v);
    }

    #[test]
    fn overlap_is_rigid_invariant(a in object(), b in object(), theta in 0.0..(2.0 * PI), dx in -10.0..10.0f64, dy in -10.0..10.0f64) {
        let before = overlap_volume(&a, &b);
        let after = overlap_volume(&moved(&a, theta, dx, dy), &moved(&b, theta, dx, dy));
        prop_assert!((before - after).abs() <= 1e-6 * (1.0 + before));
    }

    #[test]
    fn footprint_is_counter_clockwise(a in object()) {
        prop_assert!(signed_area(&footprint(&a)) > 0.0);
    }

    #[test]
    fn nearest_wall_within_half_room(w in 1.0..10.0f64, l in 1.0..10.0f64, u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let room = Room::new("r", [w, l, 3.0]);
        let obj = ObjectInstance::new("box", [0.5; 3], [u * w, v * l, 0.0], 0.0);
        let rel = nearest_wall(&obj, &room).unwrap();
        prop_assert!(rel.distance <= 0.5 * w.min(l) + 1e-12);
    }

    #[test]
    fn acceptance_probability_is_a_probability(e0 in -1e3..1e3f64, e1 in -1e3..1e3f64, t in 1e-3..10.0f64) {
        let p = acceptance_probability(e0, e1, t);
        prop_assert!((0.0..=1.0).contains(&p));
        if e1 <= e0 {
            prop_assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn categorical_fit_sums_to_one(counts in prop::collection::vec(0u64..1000, 1..12)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let map = counts.iter().enumerate().map(|(i, &c)| (format!("c{i}"), c)).collect();
        let cat = Categorical::fit(&map).unwrap();
        prop_assert!((cat.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn scene_json_round_trip(objs in prop::collection::vec(object(), 0..6)) {
        let mut scene = SceneLayout::empty(Room::new("r", [5.0, 4.0, 3.0]));
        scene.furniture = objs;
        let text = serde_json::to_string(&scene).unwrap();
        let back: SceneLayout = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, scene);
    }

    #[test]
    fn human_prob_is_rigid_invariant(
        x in 0.5..4.5f64, y in 0.5..4.5f64, yaw in 0.0..(2.0 * PI),
        hx in -2.5..2.5f64, hy in -2.5..2.5f64,
        theta in 0.0..(2.0 * PI), dx in -3.0..3.0f64, dy in -3.0..3.0f64,
    ) {
        let map = fixture().0.affordance("bed").unwrap();
        let obj = ObjectInstance::new("bed", [1.6, 2.0, 0.5], [x, y, 0.0], yaw);
        let human = obj.pose().to_world(Point2::new(hx, hy));
        // skip positions within rounding distance of a cell edge
        let frac = |v: f64| ((v + map.extent) / map.resolution).fract();
        prop_assume!([hx, hy].iter().all(|&v| (frac(v) - 0.5).abs() < 0.499));
        let mut both = obj.clone();
        both.humans = vec![[human.x, human.y]];
        both.transform(Point2::new(0.0, 0.0), theta, Point2::new(dx, dy));
        let h2 = Point2::new(both.humans[0][0], both.humans[0][1]);
        prop_assert_eq!(human_prob(map, human, &obj, 1e-6), human_prob(map, h2, &both, 1e-6));
    }
}

fn sampled_scene(seed: u64, scene_type: &str) -> SceneLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_structure(&fixture().0, scene_type, &mut rng).unwrap()
}

#[test]
fn energy_is_linear_in_weights() {
    let mut model = fixture().0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..4 {
        let scene = sampled_scene(seed, if seed % 2 == 0 { "bedroom" } else { "office" });
        let losses = loss_features(&scene, &model, -2.5).unwrap();
        for _ in 0..10 {
            let w: [f64; SLOTS] = std::array::from_fn(|_| rand::Rng::random_range(&mut rng, -5.0..5.0));
            model.weights = Weights::from_vector(w);
            let e = evaluate(&scene, &model, -2.5).unwrap();
            let expected = e.tree + (0..SLOTS).map(|i| w[i] * losses.0[i]).sum::<f64>();
            assert!((e.total - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{} vs {expected}", e.total);
        }
    }
}

#[test]
fn energy_is_bitwise_repeatable() {
    let model = &fixture().0;
    let scene = sampled_scene(9, "bedroom");
    let a = evaluate(&scene, model, -1.0).unwrap();
    let b = evaluate(&scene, model, -1.0).unwrap();
    assert_eq!(a.total.to_bits(), b.total.to_bits());
}

/// Rotates everything by π about the room center, which maps the room onto
/// itself.
fn half_turn(scene: &SceneLayout) -> SceneLayout {
    let mut out = scene.clone();
    let c = Point2::new(0.5 * scene.room.size[0], 0.5 * scene.room.size[1]);
    for r in out.instance_refs().collect::<Vec<_>>() {
        out.get_mut(r).transform(c, PI, Point2::new(0.0, 0.0));
    }
    out
}

#[test]
fn losses_survive_a_half_turn() {
    let model = &fixture().0;
    for seed in 0..20 {
        let scene = sampled_scene(100 + seed, "bedroom");
        let a = loss_features(&scene, model, 0.0).unwrap();
        let b = loss_features(&half_turn(&scene), model, 0.0).unwrap();
        for i in (0..SLOTS).filter(|&i| i != F_ENT) {
            assert!((a.0[i] - b.0[i]).abs() <= 1e-6 * (1.0 + a.0[i].abs()), "slot {i}: {} vs {}", a.0[i], b.0[i]);
        }
    }
}

#[test]
fn entropy_ignores_furniture_order() {
    let params = PlannerParams::default();
    for seed in 0..3 {
        let scene = sampled_scene(200 + seed, "office");
        let mut reversed = scene.clone();
        reversed.furniture.reverse();
        let a = heatmap_entropy(&activity_heatmap(&scene, &params, 5));
        let b = heatmap_entropy(&activity_heatmap(&reversed, &params, 5));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn removing_an_object_never_adds_collision() {
    let model = common::box_model(
        [4.0, 4.0, 3.0],
        6,
        [0.8, 0.6, 0.7],
        LogNormalDist::new(0.0, 1.0).unwrap(),
        VonMisesMixture::single(0.0, 1.0),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let scene = sample_structure(&model, "yard", &mut rng).unwrap();
        let full = loss_features(&scene, &model, 0.0).unwrap().0[F_COL];
        for k in 0..scene.furniture.len() {
            let mut fewer = scene.clone();
            fewer.furniture.remove(k);
            assert!(loss_features(&fewer, &model, 0.0).unwrap().0[F_COL] <= full + 1e-12);
        }
    }
    let model = &fixture().0;
    for seed in 0..20 {
        let scene = sampled_scene(300 + seed, "bedroom");
        let full = loss_features(&scene, model, 0.0).unwrap().0[F_COL];
        for k in 0..scene.supported_objects.len() {
            let mut fewer = scene.clone();
            fewer.supported_objects.remove(k);
            assert!(loss_features(&fewer, model, 0.0).unwrap().0[F_COL] <= full + 1e-12);
        }
    }
}

#[test]
fn heatmaps_are_normalized_bounded_and_reproducible() {
    let params = PlannerParams::default();
    for seed in 0..4 {
        let scene = sampled_scene(400 + seed, "bedroom");
        let hm = activity_heatmap(&scene, &params, seed);
        let again = activity_heatmap(&scene, &params, seed);
        assert_eq!(hm, again);
        let h = heatmap_entropy(&hm);
        assert!(h >= 0.0 && h <= ((hm.width * hm.height) as f64).ln() + 1e-12);
        if !hm.empty {
            assert!((hm.grid.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn maps_ignore_corpus_order() {
    let (model, layouts) = fixture();
    let mut shuffled = layouts.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let (a, _) = estimate_maps(layouts, &model.settings.affordance);
    let (b, _) = estimate_maps(&shuffled, &model.settings.affordance);
    assert_eq!(a, b);
    for m in a.values() {
        assert!((m.grid.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}
