//! Point-triangle and ray-triangle primitives, and mesh distance queries.

use super::TriangleMesh;
use crate::motion::Vec3;
use crate::{Error, Result};

/// Closest point to `p` on triangle `(a, b, c)`, by Voronoi-region
/// classification.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore. Returns the ray parameter of a hit with `t > 0`.
pub fn ray_triangle_intersection(
    origin: &Vec3,
    dir: &Vec3,
    a: &Vec3,
    b: &Vec3,
    c: &Vec3,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 1e-12).then_some(t)
}

// Three fixed, mutually non-aligned directions for the parity vote.
const RAY_DIRS: [[f64; 3]; 3] = [
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [-0.3162277660168379, 0.9486832980505138, 0.0],
    [0.2672612419124244, -0.5345224838248488, -0.8017837257372732],
];

impl TriangleMesh {
    /// Nearest surface point to `p` and its distance (brute force).
    pub fn closest_point(&self, p: &Vec3) -> (Vec3, f64) {
        let mut best = (Vec3::zeros(), f64::INFINITY);
        for i in 0..self.triangles().len() {
            let [a, b, c] = self.triangle(i);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d = (q - p).norm_squared();
            if d < best.1 {
                best = (q, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn unsigned_distance(&self, p: &Vec3) -> f64 {
        self.closest_point(p).1
    }

    fn crossings(&self, p: &Vec3, dir: &Vec3) -> usize {
        (0..self.triangles().len())
            .filter(|&i| {
                let [a, b, c] = self.triangle(i);
                ray_triangle_intersection(p, dir, &a, &b, &c).is_some()
            })
            .count()
    }

    /// True when `p` lies inside the closed surface (majority vote of three
    /// ray-parity tests).
    pub fn contains(&self, p: &Vec3) -> bool {
        let inside_votes = RAY_DIRS
            .iter()
            .filter(|d| self.crossings(p, &Vec3::new(d[0], d[1], d[2])) % 2 == 1)
            .count();
        inside_votes >= 2
    }

    /// Signed distance: negative inside. Refused for meshes that are not
    /// watertight.
    pub fn signed_distance(&self, p: &Vec3) -> Result<f64> {
        if !self.is_watertight() {
            return Err(Error::NotWatertight(
                "signed distance requires every edge to be shared by exactly two triangles".into(),
            ));
        }
        let d = self.unsigned_distance(p);
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(if self.contains(p) { -d } else { d })
    }
}
