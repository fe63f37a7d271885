//! Primitive 2D/3D types, frame transforms, polyline resampling and
//! single-line polygon clipping.
//!
//! Conventions: vehicle x forward, y left, z up; map frame z up. The
//! vehicle-leveled frame is the map frame translated to the ego position and
//! rotated by yaw only. Roll and pitch are handled by tilt compensation in
//! [`crate::projection`].

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertices closer than this are considered coincident.
pub const VERTEX_EPS: f64 = 1e-9;

/// Signed distance below which a clipped vertex still counts as kept.
const CLIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular (rotated by +90°).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn with_z(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

macro_rules! impl_vec_ops {
    ($t:ident { $($f:ident),+ }) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t { $t { $($f: self.$f + o.$f),+ } }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t { $t { $($f: self.$f - o.$f),+ } }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t { $t { $($f: self.$f * s),+ } }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t { $t { $($f: -self.$f),+ } }
        }
    };
}

impl_vec_ops!(Point2 { x, y });
impl_vec_ops!(Point3 { x, y, z });

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Ego pose in the map frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point3,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Point3, roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        if !position.is_finite() || !roll.is_finite() || !pitch.is_finite() || !yaw.is_finite() {
            return Err(Error::InvalidGeometry("pose has non-finite components".into()));
        }
        let (roll, pitch, yaw) = (normalize_angle(roll), normalize_angle(pitch), normalize_angle(yaw));
        if roll.abs() >= PI / 2.0 || pitch.abs() >= PI / 2.0 {
            return Err(Error::InvalidGeometry("roll/pitch magnitude must be below π/2".into()));
        }
        Ok(Self { position, roll, pitch, yaw })
    }

    /// Pose with zero roll and pitch.
    pub fn planar(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { position: Point3::new(x, y, z), roll: 0.0, pitch: 0.0, yaw: normalize_angle(yaw) }
    }
}

/// Map frame → vehicle-leveled frame: translate by −position, rotate by −yaw.
pub fn map_to_leveled_vehicle(pose: &Pose, p: Point3) -> Point3 {
    let d = p - pose.position;
    let r = d.xy().rotated(-pose.yaw);
    Point3::new(r.x, r.y, d.z)
}

pub fn leveled_vehicle_to_map(pose: &Pose, p: Point3) -> Point3 {
    let r = p.xy().rotated(pose.yaw);
    Point3::new(r.x, r.y, p.z) + pose.position
}

pub fn map_to_leveled_2d(pose: &Pose, p: Point2) -> Point2 {
    (p - pose.position.xy()).rotated(-pose.yaw)
}

pub fn leveled_to_map_2d(pose: &Pose, p: Point2) -> Point2 {
    p.rotated(pose.yaw) + pose.position.xy()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Map,
    VehicleLeveled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline2 {
    vertices: Vec<Point2>,
    frame: Frame,
}

impl Polyline2 {
    pub fn new(vertices: Vec<Point2>, frame: Frame) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidGeometry("polyline needs at least 2 vertices".into()));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("polyline has non-finite vertex".into()));
        }
        if vertices.windows(2).any(|w| w[0].distance(w[1]) <= VERTEX_EPS) {
            return Err(Error::InvalidGeometry("polyline has repeated consecutive vertices".into()));
        }
        Ok(Self { vertices, frame })
    }

    /// Builds a polyline after dropping consecutive duplicates.
    pub fn new_dedup(mut vertices: Vec<Point2>, frame: Frame) -> Result<Self> {
        vertices.dedup_by(|b, a| a.distance(*b) <= VERTEX_EPS);
        Self::new(vertices, frame)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn first(&self) -> Point2 {
        self.vertices[0]
    }

    pub fn last(&self) -> Point2 {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Cumulative arc length at every vertex.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.vertices.len());
        out.push(0.0);
        for w in self.vertices.windows(2) {
            acc += w[0].distance(w[1]);
            out.push(acc);
        }
        out
    }

    /// Unit tangent at vertex `i`: bisector of the adjacent segment directions,
    /// or the single segment direction at the endpoints.
    pub fn tangent_at(&self, i: usize) -> Point2 {
        let v = &self.vertices;
        let n = v.len();
        let seg = |a: usize| (v[a + 1] - v[a]).normalized().unwrap_or(Point2::new(1.0, 0.0));
        if i == 0 {
            seg(0)
        } else if i + 1 >= n {
            seg(n - 2)
        } else {
            (seg(i - 1) + seg(i)).normalized().unwrap_or_else(|| seg(i))
        }
    }

    /// Prefix of the polyline up to arc length `max_len`.
    pub fn truncated(&self, max_len: f64) -> Polyline2 {
        let mut out = vec![self.vertices[0]];
        let mut acc = 0.0;
        for w in self.vertices.windows(2) {
            let d = w[0].distance(w[1]);
            if acc + d <= max_len {
                out.push(w[1]);
                acc += d;
            } else {
                let t = (max_len - acc) / d;
                if t * d > VERTEX_EPS {
                    out.push(w[0].lerp(w[1], t));
                }
                break;
            }
        }
        if out.len() < 2 {
            out.push(self.vertices[1]);
        }
        Polyline2 { vertices: out, frame: self.frame }
    }

    pub fn map_points(&self, frame: Frame, f: impl Fn(Point2) -> Point2) -> Polyline2 {
        Polyline2 { vertices: self.vertices.iter().map(|&p| f(p)).collect(), frame }
    }
}

/// Resamples a polyline at arc-length multiples of `step`, keeping both
/// original endpoints. Lines shorter than `step` collapse to their endpoints.
pub fn resample_polyline(line: &Polyline2, step: f64) -> Result<Polyline2> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("resample step must be positive, got {step}")));
    }
    let v = line.vertices();
    let total = line.length();
    let mut out = vec![v[0]];
    if total >= step {
        let mut seg = 0usize;
        let mut seg_start = 0.0;
        let mut seg_len = v[0].distance(v[1]);
        let mut k = 1usize;
        loop {
            let s = k as f64 * step;
            if s >= total - VERTEX_EPS {
                break;
            }
            while seg_start + seg_len < s && seg + 2 < v.len() {
                seg_start += seg_len;
                seg += 1;
                seg_len = v[seg].distance(v[seg + 1]);
            }
            let t = ((s - seg_start) / seg_len).clamp(0.0, 1.0);
            out.push(v[seg].lerp(v[seg + 1], t));
            k += 1;
        }
    }
    out.push(line.last());
    Polyline2::new_dedup(out, line.frame())
}

/// Simple polygon, counter-clockwise, implicitly closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<Point2>,
    frame: Frame,
}

impl Polygon2 {
    /// Validates the ring and repairs clockwise orientation.
    pub fn new(vertices: Vec<Point2>, frame: Frame) -> Result<Self> {
        let mut vertices = prune_ring(vertices);
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("polygon needs at least 3 distinct vertices".into()));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("polygon has non-finite vertex".into()));
        }
        let a = signed_area(&vertices);
        if a.abs() <= VERTEX_EPS * VERTEX_EPS {
            return Err(Error::InvalidGeometry("polygon has zero area".into()));
        }
        if a < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices, frame })
    }

    pub fn rect(min: Point2, max: Point2, frame: Frame) -> Result<Self> {
        Self::new(
            vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)],
            frame,
        )
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn centroid(&self) -> Point2 {
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        bounds_of(&self.vertices)
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    pub fn map_points(&self, frame: Frame, f: impl Fn(Point2) -> Point2) -> Result<Polygon2> {
        Polygon2::new(self.vertices.iter().map(|&p| f(p)).collect(), frame)
    }

    /// Inserts vertices so that no edge exceeds `max_edge`.
    pub fn densified(&self, max_edge: f64) -> Polygon2 {
        let mut out = Vec::with_capacity(self.vertices.len());
        for (p, q) in self.edges() {
            out.push(p);
            let pieces = (p.distance(q) / max_edge).ceil() as usize;
            for k in 1..pieces {
                out.push(p.lerp(q, k as f64 / pieces as f64));
            }
        }
        Polygon2 { vertices: out, frame: self.frame }
    }
}

pub(crate) fn bounds_of(pts: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Drops consecutive (and wrap-around) vertices closer than [`VERTEX_EPS`].
fn prune_ring(mut v: Vec<Point2>) -> Vec<Point2> {
    v.dedup_by(|b, a| a.distance(*b) <= VERTEX_EPS);
    while v.len() > 1 && v[0].distance(v[v.len() - 1]) <= VERTEX_EPS {
        v.pop();
    }
    v
}

pub fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Shoelace area of a valid (CCW) polygon.
pub fn polygon_area(poly: &Polygon2) -> f64 {
    signed_area(&poly.vertices)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Point2, a: Point2, b: Point2, eps: f64) -> bool {
    let ab = b - a;
    let len = ab.norm();
    if len <= VERTEX_EPS {
        return p.distance(a) <= eps;
    }
    let dist = ab.cross(p - a).abs() / len;
    let t = ab.dot(p - a) / (len * len);
    dist <= eps && t >= -eps / len && t <= 1.0 + eps / len
}

/// Closed segment intersection test.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d, 0.0))
        || (d2 == 0.0 && on_segment(b, c, d, 0.0))
        || (d3 == 0.0 && on_segment(c, a, b, 0.0))
        || (d4 == 0.0 && on_segment(d, a, b, 0.0))
}

/// Closed membership: boundary points (within 1e-9 m) count as inside.
pub fn point_in_polygon(p: Point2, poly: &Polygon2) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if on_segment(p, a, b, VERTEX_EPS) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Kept side of a clip line: `{p : (p − anchor)·inward_normal ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    anchor: Point2,
    inward_normal: Point2,
}

impl HalfPlane {
    pub fn new(anchor: Point2, normal: Point2) -> Result<Self> {
        let inward_normal = normal
            .normalized()
            .ok_or_else(|| Error::InvalidGeometry("half-plane normal must be non-zero".into()))?;
        if !anchor.is_finite() {
            return Err(Error::InvalidGeometry("half-plane anchor must be finite".into()));
        }
        Ok(Self { anchor, inward_normal })
    }

    pub fn anchor(&self) -> Point2 {
        self.anchor
    }

    pub fn inward_normal(&self) -> Point2 {
        self.inward_normal
    }

    pub fn signed_distance(&self, p: Point2) -> f64 {
        (p - self.anchor).dot(self.inward_normal)
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.signed_distance(p) >= 0.0
    }

    pub fn flipped(&self) -> Self {
        Self { anchor: self.anchor, inward_normal: -self.inward_normal }
    }
}

/// Sutherland–Hodgman against one line. `None` when nothing of positive area
/// survives.
pub fn clip_polygon_halfplane(poly: &Polygon2, hp: &HalfPlane) -> Option<Polygon2> {
    let v = poly.vertices();
    let n = v.len();
    let dist: Vec<f64> = v.iter().map(|&p| hp.signed_distance(p)).collect();
    let keep = |d: f64| d >= -CLIP_EPS;
    if dist.iter().all(|&d| keep(d)) {
        return Some(poly.clone());
    }
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (v[i], v[j]);
        let (dp, dq) = (dist[i], dist[j]);
        if keep(dp) {
            out.push(p);
        }
        if keep(dp) != keep(dq) {
            let t = dp / (dp - dq);
            let mut x = p.lerp(q, t);
            // Snap exactly onto the line so the result satisfies the half-plane.
            let s = hp.signed_distance(x);
            if s < 0.0 {
                x = x - hp.inward_normal * s;
            }
            out.push(x);
        }
    }
    let out = prune_ring(out);
    if out.len() < 3 || signed_area(&out) <= VERTEX_EPS * VERTEX_EPS {
        return None;
    }
    Some(Polygon2 { vertices: out, frame: poly.frame })
}

/// Polygon with per-vertex altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon3 {
    pub vertices: Vec<Point3>,
}

impl Polygon3 {
    pub fn flat(poly: &Polygon2, z: f64) -> Self {
        Self { vertices: poly.vertices().iter().map(|p| p.with_z(z)).collect() }
    }

    pub fn planform(&self) -> Vec<Point2> {
        self.vertices.iter().map(|p| p.xy()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pl(pts: &[(f64, f64)]) -> Polyline2 {
        Polyline2::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(), Frame::Map).unwrap()
    }

    fn pg(pts: &[(f64, f64)]) -> Polygon2 {
        Polygon2::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(), Frame::Map).unwrap()
    }

    fn close(a: Point2, b: Point2, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    #[test]
    fn resample_straight_segment() {
        let r = resample_polyline(&pl(&[(0.0, 0.0), (10.0, 0.0)]), 5.0).unwrap();
        let want = [Point2::new(0.0, 0.0), Point2::new(5.0, 0.0), Point2::new(10.0, 0.0)];
        assert_eq!(r.len(), 3);
        for (a, b) in r.vertices().iter().zip(want) {
            assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn resample_step_longer_than_line_keeps_endpoints() {
        let line = pl(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]);
        let r = resample_polyline(&line, 100.0).unwrap();
        assert_eq!(r.vertices(), &[line.first(), line.last()]);
    }

    #[test]
    fn resample_l_shape() {
        let r = resample_polyline(&pl(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0)]), 2.0).unwrap();
        let want = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (4.0, 2.0), (4.0, 4.0)];
        assert_eq!(r.len(), want.len());
        for (a, &(x, y)) in r.vertices().iter().zip(&want) {
            assert!(close(*a, Point2::new(x, y), 1e-12), "{a:?}");
        }
        let s = r.arc_lengths();
        for (k, s) in s.iter().enumerate() {
            assert!((s - 2.0 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_bad_step() {
        assert!(resample_polyline(&pl(&[(0.0, 0.0), (1.0, 0.0)]), 0.0).is_err());
    }

    #[test]
    fn polyline_rejects_duplicates() {
        assert!(Polyline2::new(vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)], Frame::Map).is_err());
        assert!(Polyline2::new(vec![Point2::new(0.0, 0.0)], Frame::Map).is_err());
    }

    #[test]
    fn clip_rectangle_keep_left_part() {
        let rect = pg(&[(0.0, -2.0), (50.0, -2.0), (50.0, 2.0), (0.0, 2.0)]);
        let hp = HalfPlane::new(Point2::new(20.0, 0.0), Point2::new(-1.0, 0.0)).unwrap();
        let c = clip_polygon_halfplane(&rect, &hp).unwrap();
        assert!((polygon_area(&c) - 80.0).abs() < 1e-9);
        let (lo, hi) = c.bounds();
        assert!(close(lo, Point2::new(0.0, -2.0), 1e-12));
        assert!(close(hi, Point2::new(20.0, 2.0), 1e-12));
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn clip_noop_and_full_rejection() {
        let rect = pg(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let keep_all = HalfPlane::new(Point2::new(-5.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        assert_eq!(clip_polygon_halfplane(&rect, &keep_all).unwrap(), rect);
        assert!(clip_polygon_halfplane(&rect, &keep_all.flipped()).is_none());
        // Touching the line along an edge only is a zero-area result.
        let touch = HalfPlane::new(Point2::new(1.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        assert!(clip_polygon_halfplane(&rect, &touch).is_none());
    }

    #[test]
    fn point_in_polygon_cases() {
        let sq = pg(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        assert!(point_in_polygon(sq.centroid(), &sq));
        assert!(!point_in_polygon(Point2::new(1000.0, 1000.0), &sq));
        assert!(point_in_polygon(Point2::new(2.0, 1.0), &sq));
        assert!(point_in_polygon(Point2::new(0.7, 0.0), &sq));
        assert!(point_in_polygon(Point2::new(2.0, 2.0), &sq));
        assert!(!point_in_polygon(Point2::new(2.0 + 1e-6, 1.0), &sq));
    }

    /// Winding number, independent of the crossing-parity implementation.
    fn winding_number(p: Point2, v: &[Point2]) -> i32 {
        let mut wn = 0;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            if a.y <= p.y {
                if b.y > p.y && orient(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && orient(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    #[test]
    fn on_edge_points_agree_with_winding_oracle_nudged_inward() {
        let poly = pg(&[(0.0, 0.0), (4.0, 0.0), (5.0, 3.0), (1.0, 4.0)]);
        for (a, b) in poly.edges() {
            for k in 1..10 {
                let p = a.lerp(b, k as f64 / 10.0);
                assert!(point_in_polygon(p, &poly));
                let inward = (b - a).perp().normalized().unwrap() * 1e-6;
                assert_eq!(winding_number(p + inward, poly.vertices()), 1);
                assert_eq!(winding_number(p - inward, poly.vertices()), 0);
            }
        }
    }

    #[test]
    fn area_examples() {
        assert_eq!(polygon_area(&pg(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])), 1.0);
        assert_eq!(polygon_area(&pg(&[(0.0, -2.0), (50.0, -2.0), (50.0, 2.0), (0.0, 2.0)])), 200.0);
    }

    /// Star-shaped random polygon (simple by construction).
    fn random_star(rng: &mut ChaCha8Rng, n: usize) -> Polygon2 {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let c = Point2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let pts = angles.iter().map(|&a| c + Point2::from_angle(a) * rng.gen_range(1.0..10.0)).collect();
        Polygon2::new(pts, Frame::Map).unwrap()
    }

    #[test]
    fn area_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let poly = random_star(&mut rng, 12);
            let (lo, hi) = poly.bounds();
            let box_area = (hi.x - lo.x) * (hi.y - lo.y);
            let samples = 1_000_000;
            let hits = (0..samples)
                .filter(|_| {
                    let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                    winding_number(p, poly.vertices()) != 0
                })
                .count();
            let mc = box_area * hits as f64 / samples as f64;
            let a = polygon_area(&poly);
            assert!((mc - a).abs() / a < 0.01, "mc {mc} vs shoelace {a}");
        }
    }

    #[test]
    fn frame_examples() {
        let pose = Pose::planar(10.0, -3.0, 2.0, 0.0);
        assert_eq!(map_to_leveled_vehicle(&pose, pose.position), Point3::default());
        let p = map_to_leveled_vehicle(&pose, pose.position + Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        let pose = Pose::planar(10.0, -3.0, 2.0, PI / 2.0);
        let p = map_to_leveled_vehicle(&pose, pose.position + Point3::new(0.0, 1.0, 0.0));
        assert!((p - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pose_normalizes_and_validates() {
        let p = Pose::new(Point3::default(), 0.0, 0.0, 3.0 * PI).unwrap();
        assert!((p.yaw - PI).abs() < 1e-12);
        assert!(Pose::new(Point3::default(), PI / 2.0, 0.0, 0.0).is_err());
        assert!(normalize_angle(-PI) == PI);
    }

    #[test]
    fn frame_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let pose = Pose::new(
                Point3::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3), rng.gen_range(-50.0..50.0)),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-PI..PI),
            )
            .unwrap();
            let p = Point3::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3), rng.gen_range(-50.0..50.0));
            let back = leveled_vehicle_to_map(&pose, map_to_leveled_vehicle(&pose, p));
            assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn clip_matches_membership_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let poly = random_star(&mut rng, 15);
            let hp = HalfPlane::new(
                Point2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
                Point2::from_angle(rng.gen_range(-PI..PI)),
            )
            .unwrap();
            let clipped = clip_polygon_halfplane(&poly, &hp);
            let (lo, hi) = poly.bounds();
            for _ in 0..10_000 {
                let p = Point2::new(rng.gen_range(lo.x - 1.0..hi.x + 1.0), rng.gen_range(lo.y - 1.0..hi.y + 1.0));
                let near_edge = poly.edges().any(|(a, b)| on_segment(p, a, b, 1e-6))
                    || hp.signed_distance(p).abs() <= 1e-6;
                if near_edge {
                    continue;
                }
                let want = winding_number(p, poly.vertices()) != 0 && hp.contains(p);
                let got = clipped.as_ref().is_some_and(|c| point_in_polygon(p, c));
                assert_eq!(got, want, "{p:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn clip_is_idempotent_and_shrinks(
            seed in 0u64..10_000,
            ax in -5.0f64..5.0, ay in -5.0f64..5.0, ang in -PI..PI,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = random_star(&mut rng, 10);
            let hp = HalfPlane::new(Point2::new(ax, ay), Point2::from_angle(ang)).unwrap();
            if let Some(once) = clip_polygon_halfplane(&poly, &hp) {
                prop_assert!(polygon_area(&once) <= polygon_area(&poly) + 1e-9);
                for p in once.vertices() {
                    prop_assert!(hp.signed_distance(*p) >= -1e-9);
                }
                let twice = clip_polygon_halfplane(&once, &hp).unwrap();
                prop_assert_eq!(twice.len(), once.len());
                for (a, b) in once.vertices().iter().zip(twice.vertices()) {
                    prop_assert!(a.distance(*b) <= 1e-9);
                }
            }
        }
    }
}
