//! Ego-corridor construction from map lane boundaries, with per-boundary
//! lateral shift correction from online lane detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    map_to_leveled_2d, resample_polyline, segments_intersect, Frame, Point2, Polygon2, Polyline2,
    Pose,
};

/// Largest accepted lateral correction, meters.
pub const MAX_SHIFT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LaneBoundaries {
    pub left: Polyline2,
    pub right: Polyline2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftKnot {
    pub arc_length: f64,
    pub shift_left: f64,
    pub shift_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Piecewise-linear lateral offsets along the boundary arc length. Positive
/// values move a boundary toward vehicle-left.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LateralShiftProfile {
    knots: Vec<ShiftKnot>,
}

impl LateralShiftProfile {
    pub fn new(knots: Vec<ShiftKnot>) -> Result<Self> {
        if knots.windows(2).any(|w| !(w[1].arc_length > w[0].arc_length)) {
            return Err(Error::InvalidParameter("shift knots must have strictly increasing arc length".into()));
        }
        for k in &knots {
            if !(k.shift_left.abs() <= MAX_SHIFT && k.shift_right.abs() <= MAX_SHIFT && k.arc_length.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "shift knot at {} exceeds ±{MAX_SHIFT} m",
                    k.arc_length
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn constant(left: f64, right: f64) -> Result<Self> {
        Self::new(vec![ShiftKnot { arc_length: 0.0, shift_left: left, shift_right: right }])
    }

    pub fn knots(&self) -> &[ShiftKnot] {
        &self.knots
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// `(arc_length, shift)` pairs for one boundary.
    pub fn side(&self, side: Side) -> Vec<(f64, f64)> {
        self.knots
            .iter()
            .map(|k| match side {
                Side::Left => (k.arc_length, k.shift_left),
                Side::Right => (k.arc_length, k.shift_right),
            })
            .collect()
    }
}

/// Linear interpolation between knots, constant beyond the ends.
fn interpolate_offset(offsets: &[(f64, f64)], s: f64) -> f64 {
    let (first, last) = (offsets[0], offsets[offsets.len() - 1]);
    if s <= first.0 {
        return first.1;
    }
    if s >= last.0 {
        return last.1;
    }
    let i = offsets.partition_point(|k| k.0 <= s);
    let (a, b) = (offsets[i - 1], offsets[i]);
    a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
}

/// Displaces every vertex along its leftward normal by the offset
/// interpolated at the vertex arc length. Empty offsets leave the line as is.
pub fn apply_lateral_shift(boundary: &Polyline2, offsets: &[(f64, f64)]) -> Result<Polyline2> {
    if offsets.is_empty() {
        return Ok(boundary.clone());
    }
    let s = boundary.arc_lengths();
    let moved = boundary
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, &p)| p + boundary.tangent_at(i).perp() * interpolate_offset(offsets, s[i]))
        .collect();
    Polyline2::new_dedup(moved, boundary.frame())
}

/// Corridor polygon together with the boundary lines it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub polygon: Polygon2,
    pub left: Polyline2,
    pub right: Polyline2,
}

impl Corridor {
    /// Ring = left in order + right reversed; crossing boundaries are
    /// rejected, swapped ones repaired.
    pub fn from_boundaries(mut left: Polyline2, mut right: Polyline2) -> Result<Self> {
        if let Some(arc_length) = first_crossing(&left, &right) {
            return Err(Error::BoundaryCrossing { arc_length });
        }
        if !left_is_left(&left, &right) {
            std::mem::swap(&mut left, &mut right);
        }
        let ring: Vec<Point2> =
            left.vertices().iter().chain(right.vertices().iter().rev()).copied().collect();
        let polygon = Polygon2::new(ring, left.frame())?;
        Ok(Self { polygon, left, right })
    }

    pub fn to_leveled(&self, pose: &Pose) -> Result<Self> {
        let f = |p| map_to_leveled_2d(pose, p);
        Ok(Self {
            polygon: self.polygon.map_points(Frame::VehicleLeveled, f)?,
            left: self.left.map_points(Frame::VehicleLeveled, f),
            right: self.right.map_points(Frame::VehicleLeveled, f),
        })
    }
}

/// Arc length along `left` of the first intersection with `right`.
fn first_crossing(left: &Polyline2, right: &Polyline2) -> Option<f64> {
    let (lv, rv) = (left.vertices(), right.vertices());
    let s = left.arc_lengths();
    for i in 0..lv.len() - 1 {
        let (lo, hi) = (lv[i], lv[i + 1]);
        let min = Point2::new(lo.x.min(hi.x), lo.y.min(hi.y));
        let max = Point2::new(lo.x.max(hi.x), lo.y.max(hi.y));
        for w in rv.windows(2) {
            if w[0].x.max(w[1].x) < min.x
                || w[0].x.min(w[1].x) > max.x
                || w[0].y.max(w[1].y) < min.y
                || w[0].y.min(w[1].y) > max.y
            {
                continue;
            }
            if segments_intersect(lo, hi, w[0], w[1]) {
                return Some(s[i]);
            }
        }
    }
    None
}

/// Majority vote of the signed cross-product test over samples paired by
/// normalized arc length.
fn left_is_left(left: &Polyline2, right: &Polyline2) -> bool {
    let (sl, sr) = (left.arc_lengths(), right.arc_lengths());
    let (ll, lr) = (sl[sl.len() - 1], sr[sr.len() - 1]);
    let mut votes = 0i64;
    for (i, &p) in right.vertices().iter().enumerate() {
        let target = sr[i] / lr * ll;
        let j = sl.partition_point(|&s| s < target).min(sl.len() - 1);
        let c = right.tangent_at(i).cross(left.vertices()[j] - p);
        votes += if c > 0.0 { 1 } else { -1 };
    }
    votes >= 0
}

fn resampled_prefix(line: &Polyline2, step: f64, max_range: f64) -> Result<Polyline2> {
    let length = line.length();
    if length < 2.0 * step {
        return Err(Error::InsufficientBoundary { length, required: 2.0 * step });
    }
    resample_polyline(&line.truncated(max_range), step)
}

fn check_ranges(step: f64, max_range: f64) -> Result<()> {
    if !(step > 0.0 && max_range > step && max_range.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need max_range > step > 0, got step {step}, max_range {max_range}"
        )));
    }
    Ok(())
}

/// Corridor from unshifted boundaries.
pub fn build_corridor(bounds: &LaneBoundaries, step: f64, max_range: f64) -> Result<Corridor> {
    build_shifted_corridor(bounds, None, step, max_range)
}

/// Truncates and resamples both boundaries, applies the lateral shift to each
/// boundary separately, then closes the ring.
pub fn build_shifted_corridor(
    bounds: &LaneBoundaries,
    shift: Option<&LateralShiftProfile>,
    step: f64,
    max_range: f64,
) -> Result<Corridor> {
    check_ranges(step, max_range)?;
    let mut left = resampled_prefix(&bounds.left, step, max_range)?;
    let mut right = resampled_prefix(&bounds.right, step, max_range)?;
    if let Some(profile) = shift.filter(|p| !p.is_empty()) {
        left = apply_lateral_shift(&left, &profile.side(Side::Left))?;
        right = apply_lateral_shift(&right, &profile.side(Side::Right))?;
    }
    Corridor::from_boundaries(left, right)
}
