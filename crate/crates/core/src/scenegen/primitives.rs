//! Analytic primitives: ray intersection, surface sampling and distance.
//!
//! Shapes are defined in a local frame centered on the shape. A cylinder's
//! axis is local x.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Box { half: Vector3<f64> },
    Cylinder { radius: f64, half_length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Box,
    Cylinder,
    Sphere,
}

/// Ray hit in the local frame: parameter along the ray and outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub s: f64,
    pub normal: Vector3<f64>,
}

fn nearer(a: Option<Hit>, b: Option<Hit>) -> Option<Hit> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.s < x.s { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::Box { .. } => PrimitiveKind::Box,
            Primitive::Cylinder { .. } => PrimitiveKind::Cylinder,
            Primitive::Sphere { .. } => PrimitiveKind::Sphere,
        }
    }

    /// Half extent along local z when resting on the table.
    pub fn rest_height(&self) -> f64 {
        match *self {
            Primitive::Box { half } => half.z,
            Primitive::Cylinder { radius, .. } => radius,
            Primitive::Sphere { radius } => radius,
        }
    }

    /// Radius of the footprint's bounding circle on the table.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Primitive::Box { half } => half.x.hypot(half.y),
            Primitive::Cylinder {
                radius,
                half_length,
            } => radius.hypot(half_length),
            Primitive::Sphere { radius } => radius,
        }
    }

    /// Nearest intersection with `s > 1e-9` of the ray `o + s·d`.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        match *self {
            Primitive::Box { half } => intersect_box(&half, o, d),
            Primitive::Sphere { radius } => {
                let a = d.dot(d);
                let b = o.dot(d);
                let c = o.dot(o) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                [(-b - sq) / a, (-b + sq) / a]
                    .into_iter()
                    .find(|&s| s > 1e-9)
                    .map(|s| Hit {
                        s,
                        normal: (o + d * s) / radius,
                    })
            }
            Primitive::Cylinder {
                radius,
                half_length,
            } => {
                let mut best = None;
                let a = d.y * d.y + d.z * d.z;
                if a > 0.0 {
                    let b = o.y * d.y + o.z * d.z;
                    let c = o.y * o.y + o.z * o.z - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for s in [(-b - sq) / a, (-b + sq) / a] {
                            let p = o + d * s;
                            if s > 1e-9 && p.x.abs() <= half_length {
                                best = nearer(
                                    best,
                                    Some(Hit {
                                        s,
                                        normal: Vector3::new(0.0, p.y, p.z) / radius,
                                    }),
                                );
                                break;
                            }
                        }
                    }
                }
                if d.x != 0.0 {
                    for sign in [-1.0, 1.0] {
                        let s = (sign * half_length - o.x) / d.x;
                        let p = o + d * s;
                        if s > 1e-9 && p.y * p.y + p.z * p.z <= radius * radius {
                            best = nearer(
                                best,
                                Some(Hit {
                                    s,
                                    normal: Vector3::new(sign, 0.0, 0.0),
                                }),
                            );
                        }
                    }
                }
                best
            }
        }
    }

    /// Unsigned distance from a local point to the surface.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Primitive::Box { half } => {
                let q = p.abs() - half;
                let outside = q.sup(&Vector3::zeros()).norm();
                let inside = q.max().min(0.0);
                (outside + inside).abs()
            }
            Primitive::Sphere { radius } => (p.norm() - radius).abs(),
            Primitive::Cylinder {
                radius,
                half_length,
            } => {
                let dr = p.y.hypot(p.z) - radius;
                let dx = p.x.abs() - half_length;
                let outside = dr.max(0.0).hypot(dx.max(0.0));
                let inside = dr.max(dx).min(0.0);
                (outside + inside).abs()
            }
        }
    }

    /// Points on the surface with outward normals, roughly `step` apart,
    /// kept clear of edges by half a step.
    pub fn sample_surface(&self, step: f64) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let mut out = Vec::new();
        match *self {
            Primitive::Box { half } => {
                for axis in 0..3 {
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    for sign in [-1.0, 1.0] {
                        for a in grid_1d(2.0 * half[u], step) {
                            for b in grid_1d(2.0 * half[v], step) {
                                let mut p = Vector3::zeros();
                                p[axis] = sign * half[axis];
                                p[u] = a;
                                p[v] = b;
                                let mut n = Vector3::zeros();
                                n[axis] = sign;
                                out.push((p, n));
                            }
                        }
                    }
                }
            }
            Primitive::Sphere { radius } => {
                let n = ((4.0 * PI * radius * radius) / (step * step)).ceil().max(8.0) as usize;
                let golden = PI * (3.0 - 5f64.sqrt());
                for i in 0..n {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    let dir = Vector3::new(r * a.cos(), r * a.sin(), z);
                    out.push((dir * radius, dir));
                }
            }
            Primitive::Cylinder {
                radius,
                half_length,
            } => {
                let ring = ((2.0 * PI * radius) / step).ceil().max(8.0) as usize;
                for x in grid_1d(2.0 * half_length, step) {
                    for k in 0..ring {
                        let a = 2.0 * PI * (k as f64 + 0.5) / ring as f64;
                        let n = Vector3::new(0.0, a.cos(), a.sin());
                        out.push((Vector3::new(x, 0.0, 0.0) + n * radius, n));
                    }
                }
                for sign in [-1.0, 1.0] {
                    for y in grid_1d(2.0 * radius, step) {
                        for z in grid_1d(2.0 * radius, step) {
                            if y * y + z * z <= (radius - step / 2.0).max(0.0).powi(2) {
                                out.push((
                                    Vector3::new(sign * half_length, y, z),
                                    Vector3::new(sign, 0.0, 0.0),
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Cell centers of an even split of `[-len/2, len/2]` into pieces at most `step`.
pub(crate) fn grid_1d(len: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = (len / step).ceil().max(1.0) as usize;
    let pitch = len / n as f64;
    (0..n).map(move |i| -len / 2.0 + (i as f64 + 0.5) * pitch)
}

fn intersect_box(half: &Vector3<f64>, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis_near = 0;
    let mut sign_near = 0.0;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let t1 = (-half[a] - o[a]) / d[a];
        let t2 = (half[a] - o[a]) / d[a];
        let (lo, hi, sign) = if t1 < t2 { (t1, t2, -1.0) } else { (t2, t1, 1.0) };
        if lo > t_near {
            t_near = lo;
            axis_near = a;
            sign_near = sign;
        }
        t_far = t_far.min(hi);
    }
    if t_near > t_far || t_near <= 1e-9 {
        return None;
    }
    let mut normal = Vector3::zeros();
    normal[axis_near] = sign_near;
    Some(Hit { s: t_near, normal })
}

/// A primitive placed in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// 1-based; 0 marks the table in ID maps.
    pub id: u16,
    pub shape: Primitive,
    /// World-from-local transform.
    pub pose: Isometry3<f64>,
}

impl SceneObject {
    /// World-frame hit of a world-frame ray.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        let lo = self.pose.inverse_transform_vector(&(o - self.pose.translation.vector));
        let ld = self.pose.inverse_transform_vector(d);
        self.shape.intersect(&lo, &ld).map(|h| Hit {
            s: h.s,
            normal: self.pose.rotation * h.normal,
        })
    }

    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        self.shape.surface_distance(&self.pose.inverse_transform_point(&(*p).into()).coords)
    }

    /// World-frame surface samples with normals.
    pub fn sample_surface(&self, step: f64) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        self.shape
            .sample_surface(step)
            .into_iter()
            .map(|(p, n)| {
                (
                    (self.pose * nalgebra::Point3::from(p)).coords,
                    self.pose.rotation * n,
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_on_axis() {
        let s = Primitive::Sphere { radius: 0.1 };
        let h = s.intersect(&Vector3::new(0.0, 0.0, -1.0), &Vector3::z()).unwrap();
        assert!((h.s - 0.9).abs() < 1e-12);
        assert!((h.normal + Vector3::z()).norm() < 1e-12);
        assert!(s.intersect(&Vector3::new(0.2, 0.0, -1.0), &Vector3::z()).is_none());
    }

    #[test]
    fn box_faces() {
        let b = Primitive::Box {
            half: Vector3::new(0.1, 0.2, 0.3),
        };
        let h = b.intersect(&Vector3::new(0.05, 0.05, 1.0), &-Vector3::z()).unwrap();
        assert!((h.s - 0.7).abs() < 1e-12);
        assert_eq!(h.normal, Vector3::z());
        let h = b.intersect(&Vector3::new(-1.0, 0.0, 0.0), &Vector3::x()).unwrap();
        assert!((h.s - 0.9).abs() < 1e-12);
        assert_eq!(h.normal, -Vector3::x());
        assert!(b.intersect(&Vector3::new(0.5, 0.0, 1.0), &-Vector3::z()).is_none());
    }

    #[test]
    fn cylinder_side_and_cap() {
        let c = Primitive::Cylinder {
            radius: 0.02,
            half_length: 0.05,
        };
        let h = c.intersect(&Vector3::new(0.01, 0.0, 1.0), &-Vector3::z()).unwrap();
        assert!((h.s - 0.98).abs() < 1e-12);
        assert!((h.normal - Vector3::z()).norm() < 1e-12);
        let h = c.intersect(&Vector3::new(1.0, 0.005, 0.0), &-Vector3::x()).unwrap();
        assert!((h.s - 0.95).abs() < 1e-12);
        assert_eq!(h.normal, Vector3::x());
        assert!(c.intersect(&Vector3::new(0.06, 0.0, 1.0), &-Vector3::z()).is_none());
    }

    #[test]
    fn samples_lie_on_surface() {
        for shape in [
            Primitive::Box {
                half: Vector3::new(0.02, 0.03, 0.04),
            },
            Primitive::Cylinder {
                radius: 0.02,
                half_length: 0.05,
            },
            Primitive::Sphere { radius: 0.03 },
        ] {
            let pts = shape.sample_surface(0.003);
            assert!(pts.len() > 100);
            for (p, n) in pts {
                assert!(shape.surface_distance(&p) < 1e-12, "{shape:?} {p:?}");
                assert!((n.norm() - 1.0).abs() < 1e-12);
                // Stepping outward along the normal leaves the surface.
                assert!((shape.surface_distance(&(p + n * 1e-3)) - 1e-3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn distances() {
        let b = Primitive::Box {
            half: Vector3::new(1.0, 1.0, 1.0),
        };
        assert!((b.surface_distance(&Vector3::new(0.5, 0.0, 0.0)) - 0.5).abs() < 1e-15);
        assert!((b.surface_distance(&Vector3::new(2.0, 2.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        let c = Primitive::Cylinder {
            radius: 1.0,
            half_length: 2.0,
        };
        assert!((c.surface_distance(&Vector3::new(0.0, 0.0, 3.0)) - 2.0).abs() < 1e-15);
        assert!((c.surface_distance(&Vector3::new(1.9, 0.0, 0.0)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn grid_is_inset_and_even() {
        let v: Vec<f64> = grid_1d(0.01, 0.003).collect();
        assert_eq!(v.len(), 4);
        assert!((v[0] + 0.00375).abs() < 1e-15);
        assert!((v[3] - 0.00375).abs() < 1e-15);
    }
}
