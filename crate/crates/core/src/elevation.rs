//! Height map stitched from localization altitude samples, with bilinear
//! queries and polygon lifting.

use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3, Polygon2, Polygon3, Pose};

pub const DEFAULT_HEIGHT_RESOLUTION: f64 = 1.0;

/// Longest polygon edge before lifting, meters.
pub const MAX_LIFT_EDGE: f64 = 1.0;

/// Search radius (cells) for the nearest valid cell when the 2×2
/// neighborhood has none.
const NEAREST_RADIUS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightSample {
    pub position: Point2,
    pub altitude: f64,
}

impl HeightSample {
    /// Ground sample below a vehicle reference point mounted `mount_height`
    /// above the road along the body z-axis, using the recorded attitude.
    pub fn from_reference_point(pose: &Pose, mount_height: f64) -> Self {
        let r = Rotation3::from_euler_angles(pose.roll, pose.pitch, pose.yaw);
        let down = r * Vector3::new(0.0, 0.0, mount_height);
        let g = pose.position - Point3::new(down.x, down.y, down.z);
        Self { position: g.xy(), altitude: g.z }
    }
}

/// Grid of mean ground altitudes in the map frame. Cell `(col, row)` has its
/// center at `origin + (col + ½, row + ½) · resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub mean: Vec<f64>,
    pub count: Vec<u32>,
}

/// Averages samples per cell. The origin snaps to a multiple of the
/// resolution, one cell below the lowest sample, so maps built from
/// different runs share cell boundaries.
pub fn build_height_map(samples: &[HeightSample], resolution: f64) -> Result<HeightMap> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!("height resolution must be positive, got {resolution}")));
    }
    for s in samples {
        if !s.position.is_finite() || !s.altitude.is_finite() || s.altitude.abs() >= 10_000.0 {
            return Err(Error::InvalidParameter(format!("invalid height sample {s:?}")));
        }
    }
    let cell = |v: f64| (v / resolution).floor() as i64;
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for s in samples {
        lo_x = lo_x.min(cell(s.position.x));
        lo_y = lo_y.min(cell(s.position.y));
        hi_x = hi_x.max(cell(s.position.x));
        hi_y = hi_y.max(cell(s.position.y));
    }
    let (ox, oy) = (lo_x - 1, lo_y - 1);
    let width = (hi_x - lo_x + 3) as usize;
    let height = (hi_y - lo_y + 3) as usize;
    let mut sum = vec![0.0; width * height];
    let mut count = vec![0u32; width * height];
    for s in samples {
        let i = (cell(s.position.x) - ox) as usize;
        let j = (cell(s.position.y) - oy) as usize;
        sum[j * width + i] += s.altitude;
        count[j * width + i] += 1;
    }
    let mean = sum.iter().zip(&count).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    Ok(HeightMap {
        origin: Point2::new(ox as f64 * resolution, oy as f64 * resolution),
        resolution,
        width,
        height,
        mean,
        count,
    })
}

impl HeightMap {
    pub fn value(&self, col: i64, row: i64) -> Option<f64> {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return None;
        }
        let k = row as usize * self.width + col as usize;
        (self.count[k] > 0).then_some(self.mean[k])
    }

    pub fn cell_center(&self, col: i64, row: i64) -> Point2 {
        self.origin + Point2::new(col as f64 + 0.5, row as f64 + 0.5) * self.resolution
    }

    pub fn valid_cells(&self) -> usize {
        self.count.iter().filter(|&&c| c > 0).count()
    }

    /// Altitude range over valid cells.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        let mut it = self.mean.iter().zip(&self.count).filter(|(_, &c)| c > 0).map(|(&m, _)| m);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map: HeightMap = serde_json::from_slice(&std::fs::read(path)?)?;
        if !(map.resolution > 0.0)
            || map.mean.len() != map.width * map.height
            || map.count.len() != map.mean.len()
        {
            return Err(Error::Schema(format!("malformed height map {}", path.display())));
        }
        Ok(map)
    }
}

/// Bilinear interpolation over the four surrounding cell centers, with
/// weights renormalized over valid cells; otherwise the nearest valid cell
/// within three cells; otherwise `fallback`.
pub fn query_height(map: &HeightMap, p: Point2, fallback: f64) -> f64 {
    let u = (p.x - map.origin.x) / map.resolution - 0.5;
    let v = (p.y - map.origin.y) / map.resolution - 0.5;
    let (i0, j0) = (u.floor(), v.floor());
    let (fx, fy) = (u - i0, v - j0);
    let (i0, j0) = (i0 as i64, j0 as i64);
    let corners = [
        (i0, j0, (1.0 - fx) * (1.0 - fy)),
        (i0 + 1, j0, fx * (1.0 - fy)),
        (i0, j0 + 1, (1.0 - fx) * fy),
        (i0 + 1, j0 + 1, fx * fy),
    ];
    // Accumulate offsets from the first valid corner so a uniform
    // neighbourhood returns its value bit-exactly.
    let (mut base, mut acc, mut wsum) = (None, 0.0, 0.0);
    for (i, j, w) in corners {
        if let Some(z) = map.value(i, j) {
            let b = *base.get_or_insert(z);
            acc += w * (z - b);
            wsum += w;
        }
    }
    if let Some(b) = base.filter(|_| wsum > 0.0) {
        return b + acc / wsum;
    }
    let mut best: Option<(f64, f64)> = None;
    for j in (j0 - NEAREST_RADIUS + 1)..=(j0 + NEAREST_RADIUS) {
        for i in (i0 - NEAREST_RADIUS + 1)..=(i0 + NEAREST_RADIUS) {
            if let Some(z) = map.value(i, j) {
                let d = map.cell_center(i, j).distance(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, z));
                }
            }
        }
    }
    best.map_or(fallback, |(_, z)| z)
}

/// Gives every vertex the map altitude below it. Edges should already be
/// densified to [`MAX_LIFT_EDGE`] so long edges follow the terrain.
pub fn lift_polygon(poly: &Polygon2, map: &HeightMap, fallback: f64) -> Polygon3 {
    Polygon3 {
        vertices: poly.vertices().iter().map(|&p| p.with_z(query_height(map, p, fallback))).collect(),
    }
}
