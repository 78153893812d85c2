use serde::{Deserialize, Serialize};

use crate::actionspace::N_STAGES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub min_stage_blocks: usize,
    pub window: usize,
    pub recent: usize,
    pub plateau_threshold: f64,
    pub backstop: usize,
    pub entropy_boost: f64,
    pub boost_duration: usize,
    pub ema_alpha: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            min_stage_blocks: 50,
            window: 50,
            recent: 10,
            plateau_threshold: 0.02,
            backstop: 250,
            entropy_boost: 2.0,
            boost_duration: 20,
            ema_alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Promotion {
    pub from: usize,
    pub to: usize,
    pub forced: bool,
}

/// Plateau-driven stage controller. Tracks EMA-smoothed (node recall,
/// return, episode length) per block.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    pub stage: usize,
    pub blocks_in_stage: usize,
    pub promotions: usize,
    ema: Option<[f64; 3]>,
    history: Vec<[f64; 3]>,
}

impl Default for CurriculumState {
    fn default() -> Self {
        Self::new()
    }
}

impl CurriculumState {
    pub fn new() -> Self {
        Self { stage: 1, blocks_in_stage: 0, promotions: 0, ema: None, history: Vec::new() }
    }

    pub fn ema(&self) -> Option<[f64; 3]> {
        self.ema
    }

    /// Smoothed values recorded since the last promotion.
    pub fn history(&self) -> &[[f64; 3]] {
        &self.history
    }

    fn plateaued(&self, cfg: &CurriculumConfig) -> bool {
        let h = &self.history;
        if h.len() < cfg.window || cfg.recent == 0 || cfg.recent >= cfg.window {
            return false;
        }
        let recent = &h[h.len() - cfg.recent..];
        let earlier = &h[h.len() - cfg.window..h.len() - cfg.recent];
        (0..3).all(|k| {
            let r = recent.iter().map(|v| v[k]).sum::<f64>() / recent.len() as f64;
            let e = earlier.iter().map(|v| v[k]).sum::<f64>() / earlier.len() as f64;
            (r - e).abs() / e.abs().max(1e-8) < cfg.plateau_threshold
        })
    }

    /// Folds in one block's (node recall, return, episode length). Non-finite
    /// metrics still count the block but leave the traces untouched.
    pub fn update(&mut self, cfg: &CurriculumConfig, metrics: [f64; 3]) -> Option<Promotion> {
        if metrics.iter().all(|v| v.is_finite()) {
            let a = cfg.ema_alpha;
            let next = match self.ema {
                None => metrics,
                Some(prev) => [0, 1, 2].map(|k| a * metrics[k] + (1.0 - a) * prev[k]),
            };
            self.ema = Some(next);
            self.history.push(next);
        }
        self.blocks_in_stage += 1;
        if self.stage >= N_STAGES {
            return None;
        }
        let at_boundary = self.blocks_in_stage >= cfg.min_stage_blocks && self.blocks_in_stage % cfg.window.max(1) == 0;
        let plateau = at_boundary && self.plateaued(cfg);
        let forced = !plateau && self.blocks_in_stage >= cfg.backstop;
        if !(plateau || forced) {
            return None;
        }
        let from = self.stage;
        self.stage += 1;
        self.blocks_in_stage = 0;
        self.promotions += 1;
        self.history.clear();
        Some(Promotion { from, to: self.stage, forced })
    }

    /// Entropy coefficient for the next block: doubled right after a
    /// promotion and annealed linearly back to `base`.
    pub fn entropy_coef(&self, cfg: &CurriculumConfig, base: f64) -> f64 {
        if self.promotions == 0 || self.blocks_in_stage >= cfg.boost_duration {
            return base;
        }
        let frac = self.blocks_in_stage as f64 / cfg.boost_duration as f64;
        base * (cfg.entropy_boost - (cfg.entropy_boost - 1.0) * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn promotion_blocks(trace: impl Fn(usize) -> [f64; 3], blocks: usize) -> Vec<(usize, bool)> {
        let cfg = CurriculumConfig::default();
        let mut st = CurriculumState::new();
        let mut out = Vec::new();
        for b in 1..=blocks {
            let before = st.stage;
            if let Some(p) = st.update(&cfg, trace(b)) {
                assert_eq!(p.from, before);
                out.push((b, p.forced));
            }
            assert!(st.stage >= before);
        }
        out
    }

    #[test]
    fn flat_traces_promote_at_each_window() {
        let got = promotion_blocks(|_| [0.4, 1.2, 40.0], 400);
        assert_eq!(got, vec![(50, false), (100, false), (150, false)]);
    }

    #[test]
    fn improving_recall_only_hits_the_backstop() {
        // +10% per 50-block window.
        let got = promotion_blocks(|b| [0.2 * 1.1f64.powf(b as f64 / 50.0), 1.0, 30.0], 300);
        assert_eq!(got, vec![(250, true)]);
    }

    #[test]
    fn ramp_then_flat_matches_hand_windows() {
        // Recall climbs linearly for 80 blocks, then stays flat.
        let trace = |b: usize| [0.1 + 0.005 * b.min(80) as f64, 2.0, 35.0];
        // Oracle: smooth, then compare window means at every 50-block boundary.
        let mut ema = trace(1)[0];
        let mut smoothed = vec![ema];
        for b in 2..=200 {
            ema = 0.2 * trace(b)[0] + 0.8 * ema;
            smoothed.push(ema);
        }
        let plateau_at = |b: usize| {
            let recent: f64 = smoothed[b - 10..b].iter().sum::<f64>() / 10.0;
            let earlier: f64 = smoothed[b - 50..b - 10].iter().sum::<f64>() / 40.0;
            (recent - earlier).abs() / earlier.abs() < 0.02
        };
        assert!(!plateau_at(50));
        assert!(!plateau_at(100));
        assert!(plateau_at(150));
        assert_eq!(promotion_blocks(trace, 150), vec![(150, false)]);
    }

    #[test]
    fn entropy_boost_anneals_back_exactly() {
        let cfg = CurriculumConfig::default();
        let mut st = CurriculumState::new();
        assert_eq!(st.entropy_coef(&cfg, 0.05), 0.05);
        for _ in 0..50 {
            st.update(&cfg, [0.5, 0.5, 0.5]);
        }
        assert_eq!(st.stage, 2);
        assert_eq!(st.entropy_coef(&cfg, 0.05), 0.1);
        let mut prev = 0.1;
        for k in 1..=25 {
            st.update(&cfg, [0.5, 0.5, 0.5]);
            let c = st.entropy_coef(&cfg, 0.05);
            assert!(c <= prev);
            if k >= 20 {
                assert_eq!(c, 0.05);
            }
            prev = c;
        }
    }

    #[test]
    fn last_stage_is_final() {
        let got = promotion_blocks(|_| [0.4, 1.2, 40.0], 1000);
        assert_eq!(got.len(), N_STAGES - 1);
    }
}
