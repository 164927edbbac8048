//! First-hit ray casting against capped cylinders.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix3;

use crate::geometry::Vec3;

/// What a surface belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceTag {
    Insulator(u32),
    Lattice,
    Conductor,
}

/// A capped cylinder between `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
    pub tag: SurfaceTag,
}

impl Primitive {
    /// Distance from `p` to the surface of the capped cylinder.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        let axis = self.b - self.a;
        let len = axis.norm();
        let u = axis / len;
        let w = p - self.a;
        let s = w.dot(&u);
        let radial = (w - u * s).norm();
        if (0.0..=len).contains(&s) {
            let side = (radial - self.radius).abs();
            let cap = if radial <= self.radius {
                s.min(len - s)
            } else {
                f64::INFINITY
            };
            side.min(cap)
        } else {
            let ds = if s < 0.0 { -s } else { s - len };
            let dr = (radial - self.radius).max(0.0);
            (ds * ds + dr * dr).sqrt()
        }
    }
}

/// Smallest `t >= t_min` with `origin + t * dir` on the capped cylinder.
/// `dir` must be unit length.
pub fn intersect_capped_cylinder(
    origin: &Vec3,
    dir: &Vec3,
    a: &Vec3,
    b: &Vec3,
    radius: f64,
    t_min: f64,
) -> Option<f64> {
    let axis = b - a;
    let len = axis.norm();
    if len <= 0.0 {
        return None;
    }
    let u = axis / len;
    let w = origin - a;
    let du = dir.dot(&u);
    let wu = w.dot(&u);
    let d_perp = dir - u * du;
    let w_perp = w - u * wu;
    let r2 = radius * radius;
    let mut best = f64::INFINITY;

    let qa = d_perp.norm_squared();
    if qa > 1e-18 {
        let qb = 2.0 * w_perp.dot(&d_perp);
        let qc = w_perp.norm_squared() - r2;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if t >= t_min && t < best {
                    let s = wu + t * du;
                    if (0.0..=len).contains(&s) {
                        best = t;
                    }
                }
            }
        }
    }
    if du.abs() > 1e-15 {
        for s_cap in [0.0, len] {
            let t = (s_cap - wu) / du;
            if t >= t_min && t < best {
                let radial = w_perp + d_perp * t;
                if radial.norm_squared() <= r2 {
                    best = t;
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

const CHUNK_LEN: f64 = 2.0;

#[derive(Debug, Clone)]
struct Chunk {
    a: Vec3,
    b: Vec3,
    radius: f64,
    center: Vec3,
    bound: f64,
    primitive: u32,
}

/// Ray-cast acceleration structure. Long members are split into short
/// chunks so that angular culling stays tight.
#[derive(Debug, Clone)]
pub struct RayCaster {
    primitives: Vec<Primitive>,
    chunks: Vec<Chunk>,
}

/// Closest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub primitive: usize,
    pub tag: SurfaceTag,
}

impl RayCaster {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        let mut chunks = Vec::new();
        for (idx, p) in primitives.iter().enumerate() {
            let len = (p.b - p.a).norm();
            if len <= 0.0 {
                continue;
            }
            let pieces = (len / CHUNK_LEN).ceil().max(1.0) as usize;
            for k in 0..pieces {
                let a = p.a + (p.b - p.a) * (k as f64 / pieces as f64);
                let b = p.a + (p.b - p.a) * ((k + 1) as f64 / pieces as f64);
                let half = (b - a).norm() * 0.5;
                chunks.push(Chunk {
                    a,
                    b,
                    radius: p.radius,
                    center: (a + b) * 0.5,
                    bound: (half * half + p.radius * p.radius).sqrt(),
                    primitive: idx as u32,
                });
            }
        }
        Self { primitives, chunks }
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    fn hit_chunk(&self, chunk: &Chunk, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        intersect_capped_cylinder(origin, dir, &chunk.a, &chunk.b, chunk.radius, t_min)
    }

    /// Brute-force first hit over every primitive, with bounding-sphere rejection.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for c in &self.chunks {
            let oc = c.center - origin;
            let along = oc.dot(dir);
            let perp2 = oc.norm_squared() - along * along;
            if perp2 > c.bound * c.bound || along + c.bound < t_min {
                continue;
            }
            if let Some(t) = self.hit_chunk(c, origin, dir, t_min) {
                if t <= t_max && best.is_none_or(|h| t < h.t) {
                    let primitive = c.primitive as usize;
                    best = Some(Hit {
                        t,
                        primitive,
                        tag: self.primitives[primitive].tag,
                    });
                }
            }
        }
        best
    }

    /// Bins chunks by the azimuth/elevation they subtend from `origin`, with
    /// angles measured in the sensor frame given by `world_to_sensor`.
    pub fn angular_index(
        &self,
        origin: &Vec3,
        world_to_sensor: &Matrix3<f64>,
        max_range: f64,
        bin_deg: f64,
    ) -> AngularIndex {
        let bin = bin_deg.to_radians();
        let az_bins = (TAU / bin).ceil() as usize;
        let el_bins = (PI / bin).ceil() as usize;
        let mut cells = vec![Vec::new(); az_bins * el_bins];
        for (ci, c) in self.chunks.iter().enumerate() {
            let rel = world_to_sensor * (c.center - origin);
            let dist = rel.norm();
            if dist - c.bound > max_range {
                continue;
            }
            let (el_lo, el_hi, az_span) = if dist <= c.bound * 1.000_001 {
                (-FRAC_PI_2, FRAC_PI_2, None)
            } else {
                let alpha = (c.bound / dist).asin();
                let el = (rel.z / dist).clamp(-1.0, 1.0).asin();
                let az = rel.y.atan2(rel.x);
                let lo = el - alpha;
                let hi = el + alpha;
                if lo <= -FRAC_PI_2 || hi >= FRAC_PI_2 {
                    (lo.max(-FRAC_PI_2), hi.min(FRAC_PI_2), None)
                } else {
                    let s = alpha.sin() / lo.abs().max(hi.abs()).cos();
                    if s >= 1.0 {
                        (lo, hi, None)
                    } else {
                        let beta = s.asin();
                        (lo, hi, Some((az - beta, az + beta)))
                    }
                }
            };
            let e0 = el_bin(el_lo, bin, el_bins);
            let e1 = el_bin(el_hi, bin, el_bins);
            let az_range: Vec<usize> = match az_span {
                None => (0..az_bins).collect(),
                Some((lo, hi)) => {
                    let k0 = ((lo + PI) / bin).floor() as i64;
                    let k1 = ((hi + PI) / bin).floor() as i64;
                    if (k1 - k0) as usize + 1 >= az_bins {
                        (0..az_bins).collect()
                    } else {
                        (k0..=k1)
                            .map(|k| k.rem_euclid(az_bins as i64) as usize)
                            .collect()
                    }
                }
            };
            for e in e0..=e1 {
                for &a in &az_range {
                    cells[e * az_bins + a].push(ci as u32);
                }
            }
        }
        AngularIndex {
            bin,
            az_bins,
            el_bins,
            cells,
        }
    }

    /// First hit using only the chunks registered in the matching cell.
    pub fn cast_indexed(
        &self,
        index: &AngularIndex,
        az: f64,
        el: f64,
        origin: &Vec3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<Hit> {
        let cell = index.cell(az, el);
        let mut best: Option<Hit> = None;
        for &ci in &index.cells[cell] {
            let c = &self.chunks[ci as usize];
            if let Some(t) = self.hit_chunk(c, origin, dir, t_min) {
                if t <= t_max && best.is_none_or(|h| t < h.t) {
                    let primitive = c.primitive as usize;
                    best = Some(Hit {
                        t,
                        primitive,
                        tag: self.primitives[primitive].tag,
                    });
                }
            }
        }
        best
    }
}

fn el_bin(el: f64, bin: f64, el_bins: usize) -> usize {
    (((el + FRAC_PI_2) / bin).floor().max(0.0) as usize).min(el_bins - 1)
}

/// Per-scan spatial index over viewing angles.
#[derive(Debug, Clone)]
pub struct AngularIndex {
    bin: f64,
    az_bins: usize,
    el_bins: usize,
    cells: Vec<Vec<u32>>,
}

impl AngularIndex {
    fn cell(&self, az: f64, el: f64) -> usize {
        let a = (((az + PI) / self.bin).floor() as i64).rem_euclid(self.az_bins as i64) as usize;
        let e = el_bin(el, self.bin, self.el_bins);
        e * self.az_bins + a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_x_cylinder() -> Primitive {
        Primitive {
            a: Vec3::new(5.0, 0.0, -1.0),
            b: Vec3::new(5.0, 0.0, 1.0),
            radius: 0.5,
            tag: SurfaceTag::Lattice,
        }
    }

    #[test]
    fn ray_hits_side_of_cylinder() {
        let c = unit_x_cylinder();
        let t = intersect_capped_cylinder(&Vec3::zeros(), &Vec3::x(), &c.a, &c.b, c.radius, 0.0).unwrap();
        assert_relative_eq!(t, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn ray_hits_cap() {
        let c = unit_x_cylinder();
        let origin = Vec3::new(5.0, 0.1, 10.0);
        let t = intersect_capped_cylinder(&origin, &-Vec3::z(), &c.a, &c.b, c.radius, 0.0).unwrap();
        assert_relative_eq!(t, 9.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_misses_past_end() {
        let c = unit_x_cylinder();
        let origin = Vec3::new(0.0, 0.0, 1.5);
        assert!(intersect_capped_cylinder(&origin, &Vec3::x(), &c.a, &c.b, c.radius, 0.0).is_none());
    }

    #[test]
    fn surface_distance_is_zero_on_hits() {
        let c = unit_x_cylinder();
        let caster = RayCaster::new(vec![c]);
        for k in 0..50 {
            let ang = -0.3 + 0.6 * k as f64 / 49.0;
            let dir = Vec3::new(ang.cos(), 0.0, ang.sin());
            if let Some(h) = caster.cast(&Vec3::zeros(), &dir, 0.0, 100.0) {
                let p = dir * h.t;
                assert!(c.surface_distance(&p) < 1e-9);
            }
        }
    }

    #[test]
    fn nearer_surface_wins() {
        let far = unit_x_cylinder();
        let near = Primitive {
            a: Vec3::new(2.0, 0.0, -1.0),
            b: Vec3::new(2.0, 0.0, 1.0),
            radius: 0.2,
            tag: SurfaceTag::Conductor,
        };
        let caster = RayCaster::new(vec![far, near]);
        let h = caster.cast(&Vec3::zeros(), &Vec3::x(), 0.0, 100.0).unwrap();
        assert_eq!(h.tag, SurfaceTag::Conductor);
        assert_relative_eq!(h.t, 1.8, epsilon = 1e-12);
    }

    #[test]
    fn indexed_cast_matches_brute_force() {
        let long = Primitive {
            a: Vec3::new(-20.0, 6.0, 2.0),
            b: Vec3::new(20.0, 6.0, 2.0),
            radius: 0.05,
            tag: SurfaceTag::Conductor,
        };
        let caster = RayCaster::new(vec![unit_x_cylinder(), long]);
        let rot = Matrix3::identity();
        let index = caster.angular_index(&Vec3::zeros(), &rot, 50.0, 2.0);
        let mut hits = 0;
        for i in 0..360 {
            for j in 0..60 {
                let az = (i as f64 - 180.0).to_radians();
                let el = (j as f64 * 0.5 - 15.0).to_radians();
                let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let a = caster.cast(&Vec3::zeros(), &dir, 0.0, 50.0);
                let b = caster.cast_indexed(&index, az, el, &Vec3::zeros(), &dir, 0.0, 50.0);
                assert_eq!(a, b);
                hits += a.is_some() as usize;
            }
        }
        assert!(hits > 50);
    }
}
