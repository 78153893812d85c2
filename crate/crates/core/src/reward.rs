//! Potential-based shaping plus sparse event terms.

use serde::{Deserialize, Serialize};

use crate::ssg::MetricsSnapshot;
use crate::world::MOVE_FAIL_SLACK;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub lambda_node: f64,
    pub lambda_p: f64,
    pub lambda_d: f64,
    pub rho: f64,
    pub collision_penalty: f64,
    pub move_bonus: f64,
    pub exploration_bonus: f64,
    pub stop_bonus: f64,
    pub stop_min_steps: usize,
    pub node_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_node: 0.1,
            lambda_p: 0.5,
            lambda_d: 0.001,
            rho: 0.001,
            collision_penalty: -0.02,
            move_bonus: 0.005,
            exploration_bonus: 0.01,
            stop_bonus: 0.05,
            stop_min_steps: 5,
            node_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub target_dist: f64,
    pub actual_dist: f64,
    pub move_failed: bool,
    /// At least one object was observed for the first time this step.
    pub new_object_discovered: bool,
    pub action_was_stop: bool,
    pub steps_since_exploration: usize,
    pub is_translation: bool,
}

pub fn potential(m: &MetricsSnapshot, t: usize, cfg: &RewardConfig) -> f64 {
    cfg.lambda_node * (m.r_node + cfg.lambda_p * m.p_node)
        + m.r_edge
        + cfg.lambda_p * m.p_edge
        + cfg.lambda_d * m.d as f64
        - cfg.rho * t as f64
}

/// Sum of the event terms alone.
pub fn event_reward(ev: &StepEvents, cfg: &RewardConfig) -> f64 {
    let mut r = 0.0;
    if ev.is_translation && (ev.move_failed || ev.actual_dist < ev.target_dist - MOVE_FAIL_SLACK) {
        r += cfg.collision_penalty;
    }
    if ev.actual_dist > MOVE_FAIL_SLACK {
        r += cfg.move_bonus;
    }
    if ev.new_object_discovered {
        r += cfg.exploration_bonus;
    }
    if ev.action_was_stop && ev.steps_since_exploration >= cfg.stop_min_steps {
        r += cfg.stop_bonus;
    }
    r
}

pub fn step_reward(s_prev: f64, s_now: f64, ev: &StepEvents, cfg: &RewardConfig) -> f64 {
    (s_now - s_prev) + event_reward(ev, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_reference_value() {
        let m = MetricsSnapshot { r_node: 0.5, p_node: 0.6, r_edge: 0.4, p_edge: 1.0, d: 10 };
        let s = potential(&m, 7, &RewardConfig::default());
        let oracle = 0.1 * (0.5 + 0.5 * 0.6) + 0.4 + 0.5 * 1.0 + 0.001 * 10.0 - 0.001 * 7.0;
        assert!((s - oracle).abs() < 1e-15);
        assert!((s - 0.983).abs() < 1e-12);
        assert!((potential(&MetricsSnapshot::empty(), 0, &RewardConfig::default()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn static_snapshot_costs_rho() {
        let cfg = RewardConfig::default();
        let m = MetricsSnapshot { r_node: 0.3, p_node: 0.4, r_edge: 0.1, p_edge: 1.0, d: 3 };
        let r = step_reward(potential(&m, 4, &cfg), potential(&m, 5, &cfg), &StepEvents::default(), &cfg);
        assert!((r + cfg.rho).abs() < 1e-12);
    }

    #[test]
    fn event_examples() {
        let cfg = RewardConfig::default();
        let moved = StepEvents {
            target_dist: 0.3,
            actual_dist: 0.3,
            new_object_discovered: true,
            is_translation: true,
            ..Default::default()
        };
        assert!((step_reward(0.0, 0.007, &moved, &cfg) - 0.022).abs() < 1e-15);

        let stop = StepEvents { action_was_stop: true, steps_since_exploration: 5, ..Default::default() };
        assert!((event_reward(&stop, &cfg) - 0.05).abs() < 1e-15);
        let early = StepEvents { steps_since_exploration: 4, ..stop };
        assert_eq!(event_reward(&early, &cfg), 0.0);

        let blocked = StepEvents { target_dist: 0.3, move_failed: true, is_translation: true, ..Default::default() };
        assert_eq!(event_reward(&blocked, &cfg), -0.02);

        let rotation = StepEvents::default();
        assert_eq!(event_reward(&rotation, &cfg), 0.0);
    }
}
