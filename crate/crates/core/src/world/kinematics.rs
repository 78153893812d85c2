use super::geometry::swept_disc_box;
use super::{MotionResult, Pose, SceneSpec};

/// A translation counts as failed when it falls short of the commanded
/// length by more than this many metres.
pub const MOVE_FAIL_SLACK: f64 = 0.05;

/// Largest distance in [0, max_len] that the agent disc can travel from
/// (x, y) along the unit direction `d` without overlapping an obstacle or
/// leaving the room.
pub fn free_distance(scene: &SceneSpec, x: f64, y: f64, d: (f64, f64), max_len: f64) -> f64 {
    let r = scene.agent_radius;
    let b = &scene.bounds;
    let mut t = max_len;
    let limits = [(x, d.0, b.min_x + r, b.max_x - r), (y, d.1, b.min_y + r, b.max_y - r)];
    for (pos, dir, lo, hi) in limits {
        if dir > 1e-15 {
            t = t.min(((hi - pos) / dir).max(0.0));
        } else if dir < -1e-15 {
            t = t.min(((lo - pos) / dir).max(0.0));
        }
    }
    for o in scene.objects.iter().filter(|o| o.is_obstacle) {
        if let Some(hit) = swept_disc_box([x, y], [d.0, d.1], r, &o.footprint()) {
            t = t.min(hit);
        }
    }
    t.max(0.0)
}

/// Move-first kinematics: translate along the current heading as far as the
/// path is free (up to `length`), then apply the rotation.
pub fn step_kinematics(scene: &SceneSpec, pose: &Pose, rotation: i32, length: f64) -> MotionResult {
    debug_assert!((0.0..=2.0 + 1e-9).contains(&length));
    let dir = pose.heading.unit();
    let actual = if length > 0.0 { free_distance(scene, pose.x, pose.y, dir, length) } else { 0.0 };
    let heading = pose.heading.rotated(rotation).expect("rotation must be a multiple of the heading step");
    MotionResult {
        new_pose: Pose::new(pose.x + dir.0 * actual, pose.y + dir.1 * actual, heading),
        target_dist: length,
        actual_dist: actual,
        move_failed: actual < length - MOVE_FAIL_SLACK,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{point_box_distance_2d, Heading, ObjectSpec};
    use proptest::prelude::*;

    fn room_with_wall_box() -> SceneSpec {
        // Box face at x = 2.55: the agent at x = 2.2 with radius 0.2 has 0.15 m clearance.
        SceneSpec::empty_room("k", 6.0, 4.0, 0.2).with_object(ObjectSpec::furniture(
            "Shelf_00",
            "Shelf",
            [3.0, 2.0, 1.0],
            [0.9, 2.0, 2.0],
        ))
    }

    #[test]
    fn free_corridor_moves_fully() {
        let scene = SceneSpec::empty_room("k", 6.0, 4.0, 0.2);
        let pose = Pose::new(1.0, 2.0, Heading::new(0).unwrap());
        let m = step_kinematics(&scene, &pose, 0, 0.3);
        assert_eq!(m.actual_dist, 0.3);
        assert!(!m.move_failed);
        assert!((m.new_pose.x - 1.3).abs() < 1e-12);
    }

    #[test]
    fn blocked_move_is_partial_and_failed() {
        let scene = room_with_wall_box();
        let pose = Pose::new(2.2, 2.0, Heading::new(0).unwrap());
        let m = step_kinematics(&scene, &pose, 0, 2.0);
        // Oracle: face at 2.55, stop when centre reaches 2.55 - 0.2.
        assert!((m.actual_dist - 0.15).abs() < 1e-12);
        assert!(m.move_failed);
    }

    #[test]
    fn rotation_only_keeps_position() {
        let scene = room_with_wall_box();
        let pose = Pose::new(1.0, 1.0, Heading::new(0).unwrap());
        let m = step_kinematics(&scene, &pose, 90, 0.0);
        assert_eq!((m.new_pose.x, m.new_pose.y), (1.0, 1.0));
        assert_eq!(m.new_pose.heading.degrees(), 90);
        assert_eq!(m.actual_dist, 0.0);
        assert!(!m.move_failed);
    }

    #[test]
    fn rotation_is_applied_after_translation() {
        let scene = SceneSpec::empty_room("k", 6.0, 4.0, 0.2);
        let pose = Pose::new(1.0, 1.0, Heading::new(0).unwrap());
        let m = step_kinematics(&scene, &pose, 90, 1.0);
        assert!((m.new_pose.x - 2.0).abs() < 1e-12 && (m.new_pose.y - 1.0).abs() < 1e-12);
        assert_eq!(m.new_pose.heading.degrees(), 90);
    }

    proptest! {
        #[test]
        fn motion_never_overlaps_and_never_overshoots(
            x in 0.25f64..5.75, y in 0.25f64..3.75,
            h in 0usize..24, rot in 0usize..24, len in 0usize..=20,
        ) {
            let scene = room_with_wall_box();
            prop_assume!(scene.is_free(x, y));
            let pose = Pose::new(x, y, Heading::new(h as i32 * 15).unwrap());
            let length = len as f64 / 10.0;
            let m = step_kinematics(&scene, &pose, rot as i32 * 15, length);
            prop_assert!(m.actual_dist >= 0.0 && m.actual_dist <= m.target_dist);
            prop_assert_eq!(m.move_failed, m.actual_dist < m.target_dist - MOVE_FAIL_SLACK);
            let p = m.new_pose;
            let r = scene.agent_radius;
            prop_assert!(p.x >= r - 1e-9 && p.x <= 6.0 - r + 1e-9);
            prop_assert!(p.y >= r - 1e-9 && p.y <= 4.0 - r + 1e-9);
            for o in scene.objects.iter().filter(|o| o.is_obstacle) {
                prop_assert!(point_box_distance_2d(p.x, p.y, &o.footprint()) >= r - 1e-9);
            }
        }
    }
}
