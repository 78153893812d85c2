use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::world::SceneSpec;

/// Geodesic distance to a goal over the free space of the agent disc,
/// computed by Dijkstra on an 8-connected grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    x0: f64,
    y0: f64,
    res: f64,
    nx: usize,
    ny: usize,
    d: Vec<f64>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl DistanceField {
    pub fn new(scene: &SceneSpec, gx: f64, gy: f64, res: f64) -> Self {
        let b = &scene.bounds;
        let nx = (b.width() / res).ceil() as usize;
        let ny = (b.height() / res).ceil() as usize;
        let (x0, y0) = (b.min_x + 0.5 * res, b.min_y + 0.5 * res);
        let free: Vec<bool> =
            (0..nx * ny).map(|k| scene.is_free(x0 + (k % nx) as f64 * res, y0 + (k / nx) as f64 * res)).collect();
        let mut f = Self { x0, y0, res, nx, ny, d: vec![f64::INFINITY; nx * ny] };
        let mut heap = BinaryHeap::new();
        for k in f.nearest_free(gx, gy, &free) {
            let (cx, cy) = f.centre(k);
            let d0 = (cx - gx).hypot(cy - gy);
            if d0 < f.d[k] {
                f.d[k] = d0;
                heap.push(Item(d0, k));
            }
        }
        let diag = res * std::f64::consts::SQRT_2;
        while let Some(Item(dk, k)) = heap.pop() {
            if dk > f.d[k] {
                continue;
            }
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let n = b as usize * nx + a as usize;
                if !free[n] {
                    continue;
                }
                // No corner cutting through blocked cells.
                if di != 0 && dj != 0 && (!free[j as usize * nx + a as usize] || !free[b as usize * nx + i as usize]) {
                    continue;
                }
                let nd = dk + if di != 0 && dj != 0 { diag } else { res };
                if nd < f.d[n] {
                    f.d[n] = nd;
                    heap.push(Item(nd, n));
                }
            }
        }
        f
    }

    fn centre(&self, k: usize) -> (f64, f64) {
        (self.x0 + (k % self.nx) as f64 * self.res, self.y0 + (k / self.nx) as f64 * self.res)
    }

    /// Free cells within one cell of the cell containing (x, y).
    fn nearest_free(&self, x: f64, y: f64, free: &[bool]) -> Vec<usize> {
        let i = ((x - self.x0) / self.res).round() as i64;
        let j = ((y - self.y0) / self.res).round() as i64;
        let mut out = Vec::new();
        for r in 0..=2i64 {
            for dj in -r..=r {
                for di in -r..=r {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                        continue;
                    }
                    let k = b as usize * self.nx + a as usize;
                    if free.get(k).copied().unwrap_or(false) && !out.contains(&k) {
                        out.push(k);
                    }
                }
            }
            if !out.is_empty() {
                break;
            }
        }
        out
    }

    /// Distance from (x, y) to the goal; infinite when disconnected.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let i = ((x - self.x0) / self.res).round() as i64;
        let j = ((y - self.y0) / self.res).round() as i64;
        let mut best = f64::INFINITY;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                    continue;
                }
                let k = b as usize * self.nx + a as usize;
                let (cx, cy) = self.centre(k);
                best = best.min(self.d[k] + (cx - x).hypot(cy - y));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ObjectSpec;

    #[test]
    fn open_room_is_close_to_euclidean() {
        let scene = SceneSpec::empty_room("r", 4.0, 4.0, 0.2);
        let f = DistanceField::new(&scene, 1.0, 1.0, 0.1);
        let d = f.distance(3.0, 1.0);
        assert!((d - 2.0).abs() < 0.15, "{d}");
        assert!(f.distance(1.0, 1.0) < 0.15);
    }

    #[test]
    fn wall_forces_a_detour() {
        // A wall across the room with a gap at the top.
        let scene = SceneSpec::empty_room("r", 4.0, 4.0, 0.2).with_object(ObjectSpec::furniture(
            "Shelf_00",
            "Shelf",
            [2.0, 1.5, 1.0],
            [0.2, 3.0, 2.0],
        ));
        let f = DistanceField::new(&scene, 1.0, 1.0, 0.1);
        let d = f.distance(3.0, 1.0);
        assert!(d > 4.0, "{d}");
        assert!(d.is_finite());
    }
}
