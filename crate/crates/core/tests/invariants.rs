use std::sync::Arc;

use essg_core::actionspace::{decode, stage_mask, ActionSpec, ActionVariant, Decoded, N_STAGES};
use essg_core::env::{Env, EnvConfig, SceneContext};
use essg_core::reward::{event_reward, RewardConfig, StepEvents};
use essg_core::world::{
    generate_scene, point_box_distance_2d, step_kinematics, SceneGenConfig, SceneSpec, HEADING_STEP,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn clearance(scene: &SceneSpec, x: f64, y: f64) -> f64 {
    let b = &scene.bounds;
    let walls = (x - b.min_x).min(b.max_x - x).min(y - b.min_y).min(b.max_y - y);
    scene
        .objects
        .iter()
        .filter(|o| o.is_obstacle)
        .map(|o| point_box_distance_2d(x, y, &o.footprint()))
        .fold(walls, f64::min)
}

fn variant() -> impl Strategy<Value = ActionVariant> {
    prop_oneof![Just(ActionVariant::Sh16), Just(ActionVariant::Sh504), Just(ActionVariant::Mh)]
}

#[test]
fn action_spaces_have_fixed_sizes_and_stop_is_never_masked() {
    assert_eq!(ActionSpec::new(ActionVariant::Sh16).n_atoms(), 16);
    assert_eq!(ActionSpec::new(ActionVariant::Sh504).n_atoms(), 504);
    assert_eq!(ActionSpec::new(ActionVariant::Mh).head_sizes(), vec![24, 21, 2]);
    for v in [ActionVariant::Sh504, ActionVariant::Mh] {
        let spec = ActionSpec::new(v);
        for s in 1..=N_STAGES {
            let m = stage_mask(s, &spec).unwrap();
            assert!(m.admits(&spec.stop_choice(), &spec), "stop masked in stage {s}");
        }
    }
}

#[test]
fn atoms_decode_consistently() {
    for v in [ActionVariant::Sh16, ActionVariant::Sh504] {
        let spec = ActionSpec::new(v);
        for atom in 0..spec.n_atoms() {
            let c = spec.atom_choice(atom).unwrap();
            assert_eq!(spec.atom_index(c.rotation_index, c.length_index), atom);
            let stop = matches!(decode(&c, &spec).unwrap(), Decoded::Stop);
            assert_eq!(stop, atom == 0);
        }
    }
}

#[test]
fn rotation_only_and_stop_carry_no_motion_terms() {
    let cfg = RewardConfig::default();
    for action_was_stop in [false, true] {
        let ev = StepEvents { action_was_stop, ..Default::default() };
        assert_eq!(event_reward(&ev, &cfg), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kinematics_stay_collision_free(seed in 1u64..40, start in 0usize..1000, rot in 0usize..24, len in 0usize..21) {
        let scene = generate_scene(seed, &SceneGenConfig::default()).unwrap();
        let ctx = SceneContext::new(&scene, &EnvConfig::default()).unwrap();
        let pose = ctx.starts[start % ctx.starts.len()];
        let spec = ActionSpec::new(ActionVariant::Sh504);
        let m = step_kinematics(&scene, &pose, spec.rotations[rot], spec.lengths[len]);
        prop_assert!(m.actual_dist >= 0.0 && m.actual_dist <= m.target_dist + 1e-12);
        prop_assert!(clearance(&scene, m.new_pose.x, m.new_pose.y) >= scene.agent_radius - 1e-9);
        prop_assert_eq!(m.new_pose.heading.degrees() % HEADING_STEP, 0);
        prop_assert!((0..360).contains(&m.new_pose.heading.degrees()));
        prop_assert_eq!(m.move_failed, m.actual_dist < m.target_dist - 0.05);
        prop_assert_eq!(m, step_kinematics(&scene, &pose, spec.rotations[rot], spec.lengths[len]));
    }

    #[test]
    fn episodes_respect_their_invariants(seed in 1u64..30, rng_seed in 0u64..1000, v in variant(), depth in any::<bool>()) {
        let cfg = Arc::new(EnvConfig { variant: v, depth, slots: 16, ..Default::default() });
        let scene = generate_scene(seed, &SceneGenConfig::default()).unwrap();
        let ctx = Arc::new(SceneContext::new(&scene, &cfg).unwrap());
        let spec = cfg.actions();
        let mut env = Env::new(ctx, cfg.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let obs = env.reset(&mut rng);
        prop_assert_eq!(obs.len(), cfg.layout().dim());
        let mut vis = env.graph().unwrap().visibility().to_vec();
        let mut steps = 0;
        loop {
            let c = loop {
                let atom = rand::Rng::gen_range(&mut rng, 0..spec.n_atoms());
                let mut c = spec.atom_choice(atom).unwrap();
                if v == ActionVariant::Mh {
                    c.stop = rand::Rng::gen_bool(&mut rng, 0.02);
                }
                // Keep episodes long enough to reach the budget now and then.
                if !matches!(decode(&c, &spec).unwrap(), Decoded::Stop) || rand::Rng::gen_bool(&mut rng, 0.1) {
                    break c;
                }
            };
            let out = env.step(&c).unwrap();
            steps += 1;
            prop_assert!(out.reward.is_finite());
            if let Some(s) = out.summary {
                prop_assert!(steps <= cfg.max_steps);
                prop_assert!(s.stopped != s.truncated);
                prop_assert_eq!(s.truncated, steps == cfg.max_steps && !s.stopped);
                prop_assert!((0.0..=1.0).contains(&s.node_recall) && (0.0..=1.0).contains(&s.edge_recall));
                break;
            }
            prop_assert!(out.observation.iter().all(|x| x.is_finite() && *x >= 0.0));
            let g = env.graph().unwrap();
            for (a, b) in g.visibility().iter().zip(&vis) {
                prop_assert!(a >= b && (0.0..=1.0).contains(a));
            }
            vis = g.visibility().to_vec();
            for &(s, r, d) in g.edges() {
                prop_assert!(s >= g.n_objects() || g.is_known(s));
                prop_assert!(d >= g.n_objects() || g.is_known(d));
                if let Some(inv) = r.inverse() {
                    prop_assert!(g.edges().contains(&(d, inv, s)), "{s} {r:?} {d} lacks its inverse");
                }
            }
            let m = env.metrics().unwrap();
            for x in [m.r_node, m.p_node, m.r_edge, m.p_edge] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
