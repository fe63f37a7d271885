//! Corridor cut-off at traffic participants.
//!
//! Relevant objects (footprint touching the corridor) are classified as
//! driving along the corridor (`Ahead`) or crossing it (`Crossing`). Each one
//! contributes a half-plane that keeps the ego side of its cut line; the
//! corridor is clipped by all of them, nearest first.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::corridor::Corridor;
use crate::error::{Error, Result};
use crate::geometry::{
    clip_polygon_halfplane, normalize_angle, point_in_polygon, segments_intersect, HalfPlane, Point2,
    Polygon2, Polyline2,
};

/// Default heading difference separating `Ahead` from `Crossing`.
pub const DEFAULT_AHEAD_THRESHOLD: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Truck,
    Motorcycle,
    Pedestrian,
    Cyclist,
    Cone,
    Bollard,
}

impl ObjectClass {
    /// Classes without a meaningful direction of travel.
    pub fn is_static(self) -> bool {
        matches!(self, ObjectClass::Cone | ObjectClass::Bollard)
    }
}

/// Tracked object in the vehicle-leveled frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub center: Point2,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub speed: f64,
    pub class: ObjectClass,
}

impl TrackedObject {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0 && self.speed >= 0.0)
            || !self.center.is_finite()
            || !self.yaw.is_finite()
        {
            return Err(Error::InvalidGeometry(format!("invalid tracked object {self:?}")));
        }
        Ok(())
    }

    pub fn heading(&self) -> Point2 {
        Point2::from_angle(self.yaw)
    }

    /// Box corners, counter-clockwise starting rear-right.
    pub fn footprint(&self) -> [Point2; 4] {
        let h = self.heading() * (self.length / 2.0);
        let l = self.heading().perp() * (self.width / 2.0);
        let c = self.center;
        [c - h - l, c + h - l, c + h + l, c - h + l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionKind {
    Ahead,
    Crossing,
}

/// Closed intersection between a box footprint and the corridor.
fn touches(corners: &[Point2; 4], corridor: &Polygon2) -> bool {
    if corners.iter().any(|&c| point_in_polygon(c, corridor)) {
        return true;
    }
    let in_box = |p: Point2| {
        (0..4).all(|i| (corners[(i + 1) % 4] - corners[i]).cross(p - corners[i]) >= 0.0)
    };
    if corridor.vertices().iter().any(|&p| in_box(p)) {
        return true;
    }
    (0..4).any(|i| {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        corridor.edges().any(|(c, d)| segments_intersect(a, b, c, d))
    })
}

/// Objects whose footprint intersects or touches the corridor, in input order.
pub fn filter_relevant(objects: &[TrackedObject], corridor: &Polygon2) -> Vec<TrackedObject> {
    objects.iter().filter(|o| touches(&o.footprint(), corridor)).copied().collect()
}

/// Direction of the boundary segment nearest to `p`.
fn nearest_tangent(p: Point2, lines: [&Polyline2; 2]) -> Point2 {
    let mut best = (f64::INFINITY, Point2::new(1.0, 0.0));
    for line in lines {
        for w in line.vertices().windows(2) {
            let d = w[1] - w[0];
            let t = ((p - w[0]).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            let dist = p.distance(w[0] + d * t);
            if dist < best.0 {
                best = (dist, d);
            }
        }
    }
    best.1
}

/// `Ahead` when the object heading is within `threshold` of the local
/// corridor direction (either way along it), `Crossing` otherwise. Static
/// classes are always `Ahead`.
pub fn classify_interaction(obj: &TrackedObject, corridor: &Corridor, threshold: f64) -> InteractionKind {
    if obj.class.is_static() {
        return InteractionKind::Ahead;
    }
    let t = nearest_tangent(obj.center, [&corridor.left, &corridor.right]);
    let mut delta = normalize_angle(obj.yaw - t.y.atan2(t.x)).abs();
    if delta > std::f64::consts::FRAC_PI_2 {
        delta = std::f64::consts::PI - delta;
    }
    if delta <= threshold + 1e-12 {
        InteractionKind::Ahead
    } else {
        InteractionKind::Crossing
    }
}

/// Cut line for one object, keeping the side that contains the ego.
///
/// `Ahead`: through the midpoint of the box edge perpendicular to the heading
/// that faces the ego (the rear for preceding traffic). `Crossing`: through the
/// midpoint of the long side facing the ego, parallel to the heading.
pub fn cutoff_halfplane(
    obj: &TrackedObject,
    kind: InteractionKind,
    ego: Point2,
    corridor: &Polygon2,
) -> HalfPlane {
    let axis = match kind {
        InteractionKind::Ahead => obj.heading(),
        InteractionKind::Crossing => obj.heading().perp(),
    };
    let half = match kind {
        InteractionKind::Ahead => obj.length / 2.0,
        InteractionKind::Crossing => obj.width / 2.0,
    };
    let (a, b) = (obj.center + axis * half, obj.center - axis * half);
    let (anchor, outward) = if a.distance(ego) < b.distance(ego) { (a, axis) } else { (b, -axis) };
    let mut normal = -outward;
    let side = (ego - anchor).dot(normal);
    if side < 0.0 {
        normal = -normal;
    } else if side == 0.0 {
        let nearest = corridor
            .vertices()
            .iter()
            .copied()
            .min_by(|p, q| p.distance(ego).total_cmp(&q.distance(ego)))
            .unwrap_or(ego);
        if (nearest - anchor).dot(normal) < 0.0 {
            normal = -normal;
        }
    }
    HalfPlane::new(anchor, normal).expect("unit axis")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub object: TrackedObject,
    pub kind: InteractionKind,
}

/// Clips by each cutoff in ascending distance from the ego. `None` when the
/// corridor is consumed entirely.
pub fn apply_cutoffs(corridor: &Polygon2, cutoffs: &[Cutoff], ego: Point2) -> Option<Polygon2> {
    let mut order: Vec<&Cutoff> = cutoffs.iter().collect();
    order.sort_by(|a, b| a.object.center.distance(ego).total_cmp(&b.object.center.distance(ego)));
    let mut poly = corridor.clone();
    for c in order {
        let hp = cutoff_halfplane(&c.object, c.kind, ego, corridor);
        poly = clip_polygon_halfplane(&poly, &hp)?;
    }
    Some(poly)
}

/// Filter, classify and cut in one pass.
pub fn cut_corridor(
    corridor: &Corridor,
    objects: &[TrackedObject],
    ego: Point2,
    threshold: f64,
) -> Option<Polygon2> {
    let cutoffs: Vec<Cutoff> = filter_relevant(objects, &corridor.polygon)
        .into_iter()
        .map(|object| Cutoff { object, kind: classify_interaction(&object, corridor, threshold) })
        .collect();
    apply_cutoffs(&corridor.polygon, &cutoffs, ego)
}
