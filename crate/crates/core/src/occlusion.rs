//! Occupancy grid visibility and occluded-area polygons.
//!
//! A cell is occluded when the segment from the sensor to its center passes
//! through any obstacle cell other than itself. Traversal is supercover with
//! closed cells: a segment grazing a cell corner visits both side cells, so no
//! shadow leaks diagonally between touching obstacles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, Point2, Polygon2};

/// Ties between x and y crossings closer than this (in segment parameter)
/// count as passing through a corner.
const CORNER_EPS: f64 = 1e-9;

/// Binary obstacle map in the vehicle-leveled frame. Cell `(col, row)` covers
/// `origin + [col, col+1) × [row, row+1) · resolution`; storage is row-major
/// from the bottom row.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: Point2, resolution: f64, width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidParameter("grid needs finite origin and positive resolution".into()));
        }
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "grid {width}x{height} does not match {} cells",
                cells.len()
            )));
        }
        Ok(Self { origin, resolution, width, height, cells })
    }

    pub fn empty(origin: Point2, resolution: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(origin, resolution, width, height, vec![false; width * height])
    }

    /// Square grid of side `extent` meters centered on the vehicle origin.
    pub fn ego_centered(extent: f64, resolution: f64) -> Result<Self> {
        let n = (extent / resolution).round().max(1.0) as usize;
        let half = n as f64 * resolution / 2.0;
        Self::empty(Point2::new(-half, -half), resolution, n, n)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn is_obstacle(&self, col: usize, row: usize) -> bool {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, obstacle: bool) {
        let i = self.index(col, row);
        self.cells[i] = obstacle;
    }

    /// Continuous cell coordinates of a world point.
    pub fn to_cell_coords(&self, p: Point2) -> Point2 {
        (p - self.origin) * (1.0 / self.resolution)
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let c = self.to_cell_coords(p);
        let (i, j) = (c.x.floor(), c.y.floor());
        (i >= 0.0 && j >= 0.0 && i < self.width as f64 && j < self.height as f64).then_some((i as usize, j as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        self.origin + Point2::new(col as f64 + 0.5, row as f64 + 0.5) * self.resolution
    }

    pub fn cell_polygon(&self, col: usize, row: usize) -> Polygon2 {
        self.run_polygon(row, col, col + 1)
    }

    /// Footprint of cells `[col_start, col_end)` in one row.
    fn run_polygon(&self, row: usize, col_start: usize, col_end: usize) -> Polygon2 {
        let r = self.resolution;
        let lo = self.origin + Point2::new(col_start as f64, row as f64) * r;
        let hi = self.origin + Point2::new(col_end as f64, row as f64 + 1.0) * r;
        Polygon2::rect(lo, hi, Frame::VehicleLeveled).expect("positive cell size")
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    fn check_sensor(&self, sensor: Point2) -> Result<()> {
        match self.cell_of(sensor) {
            None => Err(Error::SensorOutOfGrid { x: sensor.x, y: sensor.y }),
            Some((i, j)) if self.is_obstacle(i, j) => Err(Error::SensorInsideObstacle { x: sensor.x, y: sensor.y }),
            Some(_) => Ok(()),
        }
    }

    /// Whether the sensor-to-center segment of cell `(col, row)` crosses an
    /// obstacle other than the cell itself.
    fn shadowed(&self, sensor_cells: Point2, col: usize, row: usize) -> bool {
        let target = Point2::new(col as f64 + 0.5, row as f64 + 0.5);
        let mut blocked = false;
        traverse_cells(sensor_cells, target, |i, j| {
            if (i, j) == (col as i64, row as i64) {
                return true;
            }
            if i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height && self.is_obstacle(i as usize, j as usize) {
                blocked = true;
                return false;
            }
            true
        });
        blocked
    }
}

/// Visits every cell whose closed square the segment `a → b` touches, in
/// order, in continuous cell coordinates. The callback returns `false` to stop.
pub(crate) fn traverse_cells(a: Point2, b: Point2, mut visit: impl FnMut(i64, i64) -> bool) {
    let (mut i, mut j) = (a.x.floor() as i64, a.y.floor() as i64);
    if !visit(i, j) {
        return;
    }
    let d = b - a;
    let step_x = if d.x > 0.0 { 1 } else { -1 };
    let step_y = if d.y > 0.0 { 1 } else { -1 };
    let first = |p: f64, c: i64, dv: f64| {
        if dv > 0.0 {
            ((c + 1) as f64 - p) / dv
        } else if dv < 0.0 {
            (p - c as f64) / -dv
        } else {
            f64::INFINITY
        }
    };
    let mut t_max_x = first(a.x, i, d.x);
    let mut t_max_y = first(a.y, j, d.y);
    let t_delta_x = if d.x != 0.0 { 1.0 / d.x.abs() } else { f64::INFINITY };
    let t_delta_y = if d.y != 0.0 { 1.0 / d.y.abs() } else { f64::INFINITY };
    while t_max_x.min(t_max_y) <= 1.0 {
        if t_max_x < t_max_y - CORNER_EPS {
            i += step_x;
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x - CORNER_EPS {
            j += step_y;
            t_max_y += t_delta_y;
        } else {
            if !visit(i + step_x, j) || !visit(i, j + step_y) {
                return;
            }
            i += step_x;
            j += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        if !visit(i, j) {
            return;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Visible,
    Occluded,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<CellState>,
}

impl VisibilityGrid {
    pub fn state(&self, col: usize, row: usize) -> CellState {
        self.cells[row * self.width + col]
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }
}

/// Classifies every cell as seen from `sensor` (vehicle-leveled frame).
pub fn visibility_from(grid: &OccupancyGrid, sensor: Point2) -> Result<VisibilityGrid> {
    grid.check_sensor(sensor)?;
    let s = grid.to_cell_coords(sensor);
    let any_obstacle = grid.cells.iter().any(|&c| c);
    let cells = (0..grid.height)
        .flat_map(|row| (0..grid.width).map(move |col| (col, row)))
        .map(|(col, row)| {
            if grid.is_obstacle(col, row) {
                CellState::Obstacle
            } else if any_obstacle && grid.shadowed(s, col, row) {
                CellState::Occluded
            } else {
                CellState::Visible
            }
        })
        .collect();
    Ok(VisibilityGrid {
        origin: grid.origin,
        resolution: grid.resolution,
        width: grid.width,
        height: grid.height,
        cells,
    })
}

/// Footprints of all Occluded and Obstacle cells, with horizontal runs merged
/// into one rectangle each.
pub fn occluded_polygons(vis: &VisibilityGrid) -> Vec<Polygon2> {
    let geometry = OccupancyGrid {
        origin: vis.origin,
        resolution: vis.resolution,
        width: vis.width,
        height: vis.height,
        cells: Vec::new(),
    };
    let hidden: Vec<bool> = vis.cells.iter().map(|&c| c != CellState::Visible).collect();
    merged_runs(&geometry, &hidden)
}

fn merged_runs(grid: &OccupancyGrid, hidden: &[bool]) -> Vec<Polygon2> {
    let mut out = Vec::new();
    for row in 0..grid.height {
        let line = &hidden[row * grid.width..(row + 1) * grid.width];
        let mut col = 0;
        while col < grid.width {
            if !line[col] {
                col += 1;
                continue;
            }
            let start = col;
            while col < grid.width && line[col] {
                col += 1;
            }
            out.push(grid.run_polygon(row, start, col));
        }
    }
    out
}

/// Cells whose closed footprint intersects `poly`: boundary cells by segment
/// traversal, interior cells by center-in-polygon scanlines.
pub fn cells_touching_polygon(grid: &OccupancyGrid, poly: &Polygon2) -> Vec<bool> {
    let mut hit = vec![false; grid.width * grid.height];
    let (w, h) = (grid.width as i64, grid.height as i64);
    let pts: Vec<Point2> = poly.vertices().iter().map(|&p| grid.to_cell_coords(p)).collect();
    let n = pts.len();
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        let Some((a, b)) = clip_segment_to_box(a, b, grid.width as f64, grid.height as f64) else {
            continue;
        };
        traverse_cells(a, b, |i, j| {
            if i >= 0 && j >= 0 && i < w && j < h {
                hit[(j * w + i) as usize] = true;
            }
            true
        });
    }
    let mut xs = Vec::new();
    for row in 0..grid.height {
        let y = row as f64 + 0.5;
        xs.clear();
        for k in 0..n {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // Centers strictly inside [x0, x1].
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = (pair[1] - 0.5).floor().min(grid.width as f64 - 1.0);
            let mut c = c0;
            while c <= c1 {
                hit[row * grid.width + c as usize] = true;
                c += 1.0;
            }
        }
    }
    hit
}

/// Liang–Barsky clip against `[0, w] × [0, h]`.
fn clip_segment_to_box(a: Point2, b: Point2, w: f64, h: f64) -> Option<(Point2, Point2)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x), (d.x, w - a.x), (-d.y, a.y), (d.y, h - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| (a + d * t0, a + d * t1))
}

/// Occluded and obstacle cells restricted to those touching `region`, merged
/// into row runs. Matches filtering [`occluded_polygons`] of the full
/// [`visibility_from`] result down to the region, at a fraction of the cost.
pub fn occluded_polygons_within(grid: &OccupancyGrid, sensor: Point2, region: &Polygon2) -> Result<Vec<Polygon2>> {
    grid.check_sensor(sensor)?;
    if grid.cells.iter().all(|&c| !c) {
        return Ok(Vec::new());
    }
    let s = grid.to_cell_coords(sensor);
    let mut hidden = cells_touching_polygon(grid, region);
    for row in 0..grid.height {
        for col in 0..grid.width {
            let k = row * grid.width + col;
            if hidden[k] {
                hidden[k] = grid.cells[k] || grid.shadowed(s, col, row);
            }
        }
    }
    Ok(merged_runs(grid, &hidden))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{point_in_polygon, polygon_area};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::empty(Point2::new(0.0, 0.0), 1.0, w, h).unwrap()
    }

    /// Analytic closed segment/square test (slab method).
    fn segment_hits_square(a: Point2, b: Point2, lo: Point2, hi: Point2) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (ad, dd, l, h) in [(a.x, d.x, lo.x, hi.x), (a.y, d.y, lo.y, hi.y)] {
            if dd == 0.0 {
                if ad < l || ad > h {
                    return false;
                }
            } else {
                let (u, v) = ((l - ad) / dd, (h - ad) / dd);
                t0 = t0.max(u.min(v));
                t1 = t1.min(u.max(v));
            }
        }
        t0 <= t1
    }

    fn brute_force(g: &OccupancyGrid, sensor: Point2) -> Vec<CellState> {
        let obstacles: Vec<(usize, usize)> = (0..g.height)
            .flat_map(|r| (0..g.width).map(move |c| (c, r)))
            .filter(|&(c, r)| g.is_obstacle(c, r))
            .collect();
        (0..g.height)
            .flat_map(|r| (0..g.width).map(move |c| (c, r)))
            .map(|(c, r)| {
                if g.is_obstacle(c, r) {
                    return CellState::Obstacle;
                }
                let target = g.cell_center(c, r);
                let blocked = obstacles.iter().any(|&(oc, or)| {
                    let lo = g.origin + Point2::new(oc as f64, or as f64) * g.resolution;
                    let hi = lo + Point2::new(g.resolution, g.resolution);
                    segment_hits_square(sensor, target, lo, hi)
                });
                if blocked { CellState::Occluded } else { CellState::Visible }
            })
            .collect()
    }

    #[test]
    fn empty_grid_all_visible() {
        let v = visibility_from(&grid(20, 10), Point2::new(3.3, 4.1)).unwrap();
        assert_eq!(v.count(CellState::Visible), 200);
        assert!(occluded_polygons(&v).is_empty());
    }

    #[test]
    fn on_axis_shadow() {
        let mut g = grid(12, 3);
        g.set(5, 0, true);
        let v = visibility_from(&g, g.cell_center(0, 0)).unwrap();
        for col in 0..12 {
            let want = match col {
                0..=4 => CellState::Visible,
                5 => CellState::Obstacle,
                _ => CellState::Occluded,
            };
            assert_eq!(v.state(col, 0), want, "col {col}");
        }
    }

    #[test]
    fn adjacent_obstacle_shadows_collinear_cells() {
        let mut g = grid(15, 15);
        g.set(8, 7, true);
        let sensor = g.cell_center(7, 7);
        let v = visibility_from(&g, sensor).unwrap();
        assert_eq!(v.state(7, 7), CellState::Visible);
        for col in 9..15 {
            assert_eq!(v.state(col, 7), CellState::Occluded);
        }
        assert_eq!(v.cells, brute_force(&g, sensor));
    }

    #[test]
    fn diagonal_corner_graze_is_blocked() {
        // Two obstacles touching at a corner; the diagonal ray between them
        // must not see through.
        let mut g = grid(6, 6);
        g.set(2, 1, true);
        g.set(1, 2, true);
        let v = visibility_from(&g, g.cell_center(1, 1)).unwrap();
        assert_eq!(v.state(3, 3), CellState::Occluded);
        assert_eq!(v.state(4, 4), CellState::Occluded);
    }

    #[test]
    fn sensor_errors() {
        let mut g = grid(4, 4);
        assert!(matches!(visibility_from(&g, Point2::new(-1.0, 1.0)), Err(Error::SensorOutOfGrid { .. })));
        g.set(1, 1, true);
        assert!(matches!(visibility_from(&g, Point2::new(1.5, 1.5)), Err(Error::SensorInsideObstacle { .. })));
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let mut g = OccupancyGrid::empty(Point2::new(-3.2, -3.2), 0.2, 32, 32).unwrap();
            for _ in 0..rng.gen_range(1..=10) {
                g.set(rng.gen_range(0..32), rng.gen_range(0..32), true);
            }
            let sensor = loop {
                let p = Point2::new(rng.gen_range(-3.1..3.1), rng.gen_range(-3.1..3.1));
                let (c, r) = g.cell_of(p).unwrap();
                if !g.is_obstacle(c, r) {
                    break p;
                }
            };
            let v = visibility_from(&g, sensor).unwrap();
            assert_eq!(v.cells, brute_force(&g, sensor));
            assert_eq!(v.count(CellState::Obstacle), g.obstacle_count());
        }
    }

    #[test]
    fn adding_obstacles_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let mut g = grid(40, 40);
            let sensor = Point2::new(20.3, 20.7);
            for _ in 0..8 {
                g.set(rng.gen_range(0..40), rng.gen_range(0..18), true);
            }
            let before = visibility_from(&g, sensor).unwrap();
            g.set(rng.gen_range(0..40), rng.gen_range(22..40), true);
            let after = visibility_from(&g, sensor).unwrap();
            for (b, a) in before.cells.iter().zip(&after.cells) {
                if *b == CellState::Occluded {
                    assert_ne!(*a, CellState::Visible);
                }
            }
        }
    }

    #[test]
    fn single_cell_polygon() {
        let g = OccupancyGrid::empty(Point2::new(-1.0, 2.0), 0.5, 4, 4).unwrap();
        let mut cells = vec![CellState::Visible; 16];
        cells[2 * 4 + 1] = CellState::Occluded;
        let v = VisibilityGrid { origin: g.origin, resolution: 0.5, width: 4, height: 4, cells };
        let polys = occluded_polygons(&v);
        assert_eq!(polys.len(), 1);
        let (lo, hi) = polys[0].bounds();
        assert_eq!((lo, hi), (Point2::new(-0.5, 3.0), Point2::new(0.0, 3.5)));
    }

    #[test]
    fn runs_merge_with_equal_area() {
        let mut cells = vec![CellState::Visible; 16];
        cells[5] = CellState::Occluded;
        cells[6] = CellState::Obstacle;
        let v = VisibilityGrid { origin: Point2::default(), resolution: 0.5, width: 4, height: 4, cells };
        let polys = occluded_polygons(&v);
        assert_eq!(polys.len(), 1);
        let total: f64 = polys.iter().map(polygon_area).sum();
        assert!((total - 2.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn touching_cells_cover_polygon() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = OccupancyGrid::empty(Point2::new(-10.0, -10.0), 0.5, 40, 40).unwrap();
        for _ in 0..20 {
            let c = Point2::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
            let pts: Vec<Point2> = (0..5)
                .map(|k| c + Point2::from_angle(k as f64 * 1.2566 + rng.gen_range(0.0..0.3)) * rng.gen_range(0.3..6.0))
                .collect();
            let poly = Polygon2::new(pts, Frame::VehicleLeveled).unwrap();
            let hit = cells_touching_polygon(&g, &poly);
            for _ in 0..5000 {
                let p = Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
                if point_in_polygon(p, &poly) {
                    let (i, j) = g.cell_of(p).unwrap();
                    assert!(hit[j * 40 + i], "{p:?} inside but cell not marked");
                }
            }
        }
    }

    #[test]
    fn region_restricted_matches_full_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let mut g = OccupancyGrid::ego_centered(20.0, 0.5).unwrap();
            for _ in 0..30 {
                g.set(rng.gen_range(0..40), rng.gen_range(0..40), true);
            }
            let sensor = Point2::new(0.13, 0.07);
            if g.cell_of(sensor).is_some_and(|(c, r)| g.is_obstacle(c, r)) {
                continue;
            }
            let region = Polygon2::new(
                vec![Point2::new(-2.0, -1.5), Point2::new(9.5, -3.0), Point2::new(12.0, 4.0), Point2::new(0.0, 2.0)],
                Frame::VehicleLeveled,
            )
            .unwrap();
            let full = visibility_from(&g, sensor).unwrap();
            let touching = cells_touching_polygon(&g, &region);
            let want: Vec<bool> = full
                .cells
                .iter()
                .zip(&touching)
                .map(|(&s, &t)| t && s != CellState::Visible)
                .collect();
            let want_area = want.iter().filter(|&&b| b).count() as f64 * 0.25;
            let got = occluded_polygons_within(&g, sensor, &region).unwrap();
            let got_area: f64 = got.iter().map(polygon_area).sum();
            assert!((want_area - got_area).abs() < 1e-9);
            for p in &got {
                let c = p.centroid();
                let (i, j) = g.cell_of(c).unwrap();
                assert!(want[j * 40 + i]);
            }
        }
    }
}
