use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Aabb2 {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min: [min_x, min_y], max: [max_x, max_y] }
    }

    pub fn overlaps(&self, other: &Aabb2) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }

    /// Euclidean gap between two boxes (0 when they touch or overlap).
    pub fn gap(&self, other: &Aabb2) -> f64 {
        let dx = (other.min[0] - self.max[0]).max(self.min[0] - other.max[0]).max(0.0);
        let dy = (other.min[1] - self.max[1]).max(self.min[1] - other.max[1]).max(0.0);
        dx.hypot(dy)
    }

    pub fn inflate(&self, dx: f64, dy: f64) -> Aabb2 {
        Aabb2::new(self.min[0] - dx, self.min[1] - dy, self.max[0] + dx, self.max[1] + dy)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

pub fn point_box_distance_2d(x: f64, y: f64, b: &Aabb2) -> f64 {
    let cx = x.clamp(b.min[0], b.max[0]);
    let cy = y.clamp(b.min[1], b.max[1]);
    (x - cx).hypot(y - cy)
}

/// Entry distance of the ray `p + t d` (t >= 0) into the box, `None` on miss.
/// A ray starting inside the box reports 0.
pub(crate) fn ray_box_2d(p: [f64; 2], d: [f64; 2], b: &Aabb2) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..2 {
        if d[axis].abs() < 1e-15 {
            if p[axis] < b.min[axis] || p[axis] > b.max[axis] {
                return None;
            }
        } else {
            let inv = 1.0 / d[axis];
            let mut t0 = (b.min[axis] - p[axis]) * inv;
            let mut t1 = (b.max[axis] - p[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
        }
    }
    if t_enter > t_exit || t_exit < 0.0 {
        None
    } else {
        Some(t_enter.max(0.0))
    }
}

/// Smallest non-negative root of |p + t d - c| = r, requiring the ray to be
/// entering the circle.
fn ray_circle(p: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let fx = p[0] - c[0];
    let fy = p[1] - c[1];
    let a = d[0] * d[0] + d[1] * d[1];
    let b = 2.0 * (fx * d[0] + fy * d[1]);
    let cc = fx * fx + fy * fy - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (t >= 0.0).then_some(t)
}

/// Distance a disc of radius `r` can travel from `p` along unit direction `d`
/// before touching box `b`. `None` if it never touches.
///
/// A disc already in contact reports 0 only when the motion points into the
/// box; sliding along or leaving a face is free.
pub(crate) fn swept_disc_box(p: [f64; 2], d: [f64; 2], r: f64, b: &Aabb2) -> Option<f64> {
    let cx = p[0].clamp(b.min[0], b.max[0]);
    let cy = p[1].clamp(b.min[1], b.max[1]);
    let (nx, ny) = (p[0] - cx, p[1] - cy);
    let dist = nx.hypot(ny);
    if dist <= r + 1e-12 {
        if dist < 1e-12 {
            // Centre on or inside the box: any motion is blocked.
            return Some(0.0);
        }
        return if d[0] * nx + d[1] * ny < -1e-12 { Some(0.0) } else { None };
    }
    let mut best: Option<f64> = None;
    let mut take = |t: Option<f64>| {
        if let Some(t) = t {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    };
    take(ray_box_2d(p, d, &b.inflate(r, 0.0)));
    take(ray_box_2d(p, d, &b.inflate(0.0, r)));
    for c in [[b.min[0], b.min[1]], [b.max[0], b.min[1]], [b.min[0], b.max[1]], [b.max[0], b.max[1]]] {
        take(ray_circle(p, d, c, r));
    }
    best
}

/// True when the open 3-D segment from `a` to `b` passes through the box
/// `[lo, hi]`. Endpoints touching the surface do not count.
pub fn segment_hits_box_3d(a: [f64; 3], b: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for axis in 0..3 {
        let d = b[axis] - a[axis];
        if d.abs() < 1e-15 {
            if a[axis] <= lo[axis] || a[axis] >= hi[axis] {
                return false;
            }
        } else {
            let mut ta = (lo[axis] - a[axis]) / d;
            let mut tb = (hi[axis] - a[axis]) / d;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 >= t1 {
                return false;
            }
        }
    }
    t1 - t0 > 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_box_entry_distance() {
        let b = Aabb2::new(2.0, -1.0, 3.0, 1.0);
        assert_eq!(ray_box_2d([0.0, 0.0], [1.0, 0.0], &b), Some(2.0));
        assert_eq!(ray_box_2d([0.0, 0.0], [-1.0, 0.0], &b), None);
        assert_eq!(ray_box_2d([2.5, 0.0], [1.0, 0.0], &b), Some(0.0));
    }

    #[test]
    fn swept_disc_stops_at_face_and_corner() {
        let b = Aabb2::new(2.0, -1.0, 3.0, 1.0);
        let t = swept_disc_box([0.0, 0.0], [1.0, 0.0], 0.2, &b).unwrap();
        assert!((t - 1.8).abs() < 1e-12);
        // Passing just above the top-left corner: hits the rounded corner.
        let t = swept_disc_box([0.0, 1.1], [1.0, 0.0], 0.2, &b).unwrap();
        let expected = 2.0 - (0.2f64 * 0.2 - 0.1 * 0.1).sqrt();
        assert!((t - expected).abs() < 1e-12);
        // Clear of the rounded corner.
        assert!(swept_disc_box([0.0, 1.21], [1.0, 0.0], 0.2, &b).is_none());
    }

    #[test]
    fn touching_disc_may_slide_or_leave() {
        let b = Aabb2::new(2.0, -1.0, 3.0, 1.0);
        let p = [1.8, 0.0];
        assert_eq!(swept_disc_box(p, [1.0, 0.0], 0.2, &b), Some(0.0));
        assert_eq!(swept_disc_box(p, [-1.0, 0.0], 0.2, &b), None);
        assert_eq!(swept_disc_box(p, [0.0, 1.0], 0.2, &b), None);
    }

    #[test]
    fn segment_box_3d() {
        let lo = [1.0, -0.5, 0.0];
        let hi = [2.0, 0.5, 2.0];
        assert!(segment_hits_box_3d([0.0, 0.0, 1.5], [3.0, 0.0, 1.0], lo, hi));
        // Passes above a low box.
        assert!(!segment_hits_box_3d([0.0, 0.0, 1.5], [3.0, 0.0, 2.5], lo, [2.0, 0.5, 1.0]));
        assert!(!segment_hits_box_3d([0.0, 1.0, 1.5], [3.0, 1.0, 1.0], lo, hi));
    }
}
