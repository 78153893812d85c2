use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ssg::{aggregate, position_key, Observer, PositionKey};
use crate::world::Pose;

/// Locally visible objects and their V^L from one viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointEntry {
    pub pose: Pose,
    pub nodes: Vec<(usize, f64)>,
}

pub fn viewpoint_object_map(observer: &Observer, grid: &[Pose]) -> Vec<ViewpointEntry> {
    grid.iter().map(|p| ViewpointEntry { pose: *p, nodes: observer.observe(p).nodes }).collect()
}

/// Greedy coverage: repeatedly adds the viewpoint with the largest summed
/// visibility gain over objects still below `tau`, under the multiplicative
/// update with per-cell redundancy control. Stops once the discovered
/// fraction reaches `target` or no viewpoint gains more than 1e-6. Ties go to
/// the lowest index.
pub fn greedy_select(map: &[ViewpointEntry], n_objects: usize, tau: f64, target: f64) -> Vec<usize> {
    let mut vis = vec![0.0; n_objects];
    let mut seen: std::collections::HashSet<(usize, PositionKey)> = Default::default();
    let mut chosen = Vec::new();
    let covered = |vis: &[f64]| {
        if n_objects == 0 {
            1.0
        } else {
            vis.iter().filter(|&&v| v >= tau).count() as f64 / n_objects as f64
        }
    };
    while covered(&vis) < target {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in map.iter().enumerate() {
            let key = position_key(e.pose.x, e.pose.y);
            let gain: f64 = e
                .nodes
                .iter()
                .filter(|&&(o, _)| vis[o] < tau && !seen.contains(&(o, key)))
                .map(|&(o, v)| aggregate(vis[o], v) - vis[o])
                .sum();
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, g)) if g >= 1e-6 => {
                let e = &map[i];
                let key = position_key(e.pose.x, e.pose.y);
                for &(o, v) in &e.nodes {
                    if seen.insert((o, key)) {
                        vis[o] = aggregate(vis[o], v);
                    }
                }
                chosen.push(i);
            }
            _ => break,
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcoConfig {
    pub ants: usize,
    pub iterations: usize,
    /// Pheromone exponent.
    pub alpha: f64,
    /// Heuristic exponent.
    pub beta: f64,
    pub evaporation: f64,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self { ants: 20, iterations: 100, alpha: 1.0, beta: 2.0, evaporation: 0.5 }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Length of the closed tour visiting `points` in `order`.
pub fn cycle_length(points: &[(f64, f64)], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    (0..order.len()).map(|k| dist(points[order[k]], points[order[(k + 1) % order.len()]])).sum()
}

/// Ant-system search for a short closed tour. Returns the best cycle found.
pub fn aco_cycle(points: &[(f64, f64)], cfg: &AcoConfig, seed: u64) -> Vec<usize> {
    let n = points.len();
    if n <= 3 {
        return (0..n).collect();
    }
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist(points[i], points[j])).collect()).collect();
    let eta: Vec<Vec<f64>> = d.iter().map(|r| r.iter().map(|&x| 1.0 / x.max(1e-6)).collect()).collect();
    let mut tau = vec![vec![1.0f64; n]; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Vec<usize> = (0..n).collect();
    let mut best_len = cycle_length(points, &best);
    let mut weights = vec![0.0; n];
    for _ in 0..cfg.iterations {
        let mut tours = Vec::with_capacity(cfg.ants);
        for _ in 0..cfg.ants {
            let mut visited = vec![false; n];
            let mut cur = rng.gen_range(0..n);
            visited[cur] = true;
            let mut tour = vec![cur];
            while tour.len() < n {
                let mut total = 0.0;
                for j in 0..n {
                    weights[j] =
                        if visited[j] { 0.0 } else { tau[cur][j].powf(cfg.alpha) * eta[cur][j].powf(cfg.beta) };
                    total += weights[j];
                }
                let mut u = rng.gen::<f64>() * total;
                let mut next = usize::MAX;
                for j in 0..n {
                    if visited[j] {
                        continue;
                    }
                    next = j;
                    if u < weights[j] {
                        break;
                    }
                    u -= weights[j];
                }
                visited[next] = true;
                tour.push(next);
                cur = next;
            }
            let len = cycle_length(points, &tour);
            if len < best_len - 1e-12 {
                best_len = len;
                best = tour.clone();
            }
            tours.push((tour, len));
        }
        for row in tau.iter_mut() {
            row.iter_mut().for_each(|t| *t *= 1.0 - cfg.evaporation);
        }
        for (tour, len) in &tours {
            let dep = 1.0 / len.max(1e-9);
            for k in 0..n {
                let (a, b) = (tour[k], tour[(k + 1) % n]);
                tau[a][b] += dep;
                tau[b][a] += dep;
            }
        }
    }
    best
}

/// ACO tour rotated to begin at the point nearest `start`, oriented so the
/// open path from there is the shorter of the two directions.
pub fn aco_tour(points: &[(f64, f64)], start: (f64, f64), cfg: &AcoConfig, seed: u64) -> Vec<usize> {
    let cycle = aco_cycle(points, cfg, seed);
    if cycle.is_empty() {
        return cycle;
    }
    let first = (0..cycle.len())
        .min_by(|&a, &b| dist(points[cycle[a]], start).total_cmp(&dist(points[cycle[b]], start)))
        .unwrap_or(0);
    let n = cycle.len();
    let fwd: Vec<usize> = (0..n).map(|k| cycle[(first + k) % n]).collect();
    let bwd: Vec<usize> = (0..n).map(|k| cycle[(first + n - k) % n]).collect();
    let open = |o: &[usize]| o.windows(2).map(|w| dist(points[w[0]], points[w[1]])).sum::<f64>();
    if open(&bwd) < open(&fwd) - 1e-12 {
        bwd
    } else {
        fwd
    }
}
