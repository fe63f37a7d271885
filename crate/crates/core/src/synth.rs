//! Seeded synthetic scenes for testing and benchmarking.
//!
//! A lane is laid out ahead of the ego in the vehicle-leveled frame from a
//! curvature profile, decorated according to the scenario kind, and then
//! placed at a random map pose. Ramp terrain is a gentle plane plus a shallow
//! bowl centered on the ego, so the ground never hides itself from the camera.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2};
use crate::objects::ObjectClass;
use crate::scene::{
    encode_cells, BoundariesSpec, CameraSpec, EgoSpec, ExtrinsicSpec, GridSpec, HeightSpec, ObjectSpec, SceneFile,
    ShiftSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Highway,
    SharpCurve,
    NoMarkings,
    ParkingCars,
    Others,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] =
        [Self::Highway, Self::SharpCurve, Self::NoMarkings, Self::ParkingCars, Self::Others];

    pub fn name(self) -> &'static str {
        match self {
            Self::Highway => "highway",
            Self::SharpCurve => "sharp_curve",
            Self::NoMarkings => "no_markings",
            Self::ParkingCars => "parking_cars",
            Self::Others => "others",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownScenarioKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Terrain {
    #[default]
    Flat,
    Ramp,
}

impl FromStr for Terrain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "ramp" => Ok(Self::Ramp),
            _ => Err(Error::InvalidParameter(format!("unknown terrain `{s}` (flat, ramp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub terrain: Terrain,
    /// Static obstacles beside and on the road in the occupancy grid.
    pub obstacles: bool,
    /// Largest extra body roll/pitch on top of the terrain slope, radians.
    pub tilt_noise: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { terrain: Terrain::Flat, obstacles: true, tilt_noise: 0.01 }
    }
}

const ROAD_START: f64 = -5.0;
const ROAD_LENGTH: f64 = 110.0;
const ROAD_STEP: f64 = 0.5;
const GRID_EXTENT: f64 = 60.0;
const GRID_RES: f64 = 0.2;
const HEIGHT_RES: f64 = 1.0;

/// Lane centerline in the leveled frame with heading per vertex.
struct Lane {
    center: Vec<Point2>,
    heading: Vec<f64>,
    half_width: f64,
}

impl Lane {
    fn at(&self, s: f64) -> (Point2, f64) {
        let i = (((s - ROAD_START) / ROAD_STEP).round() as usize).min(self.center.len() - 1);
        (self.center[i], self.heading[i])
    }

    fn offset(&self, s: f64, lateral: f64) -> Point2 {
        let (p, h) = self.at(s);
        p + Point2::from_angle(h).perp() * lateral
    }
}

fn lane(kind: ScenarioKind, rng: &mut ChaCha8Rng) -> Lane {
    let n = (ROAD_LENGTH / ROAD_STEP) as usize + 1;
    let curvature: Box<dyn Fn(f64) -> f64> = match kind {
        ScenarioKind::SharpCurve => {
            let k: f64 = rng.gen_range(0.06..0.08) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let start = rng.gen_range(8.0..25.0);
            // Keep the total turn near 80° so the road does not fold back.
            let len = 1.4 / k.abs();
            Box::new(move |s| if s >= start && s < start + len { k } else { 0.0 })
        }
        ScenarioKind::Highway => {
            let k = rng.gen_range(-0.002..0.002);
            Box::new(move |_| k)
        }
        _ => {
            let (k1, k2) = (rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
            Box::new(move |s| if s < 40.0 { k1 } else { k2 })
        }
    };
    let half_width = match kind {
        ScenarioKind::Highway => rng.gen_range(1.75..1.9),
        _ => rng.gen_range(1.5..1.8),
    };
    // Ego sits slightly off center and slightly misaligned.
    let lat0 = rng.gen_range(-0.3..0.3);
    let mut h = rng.gen_range(-0.03..0.03);
    let mut p = Point2::new(0.0, lat0) - Point2::from_angle(h) * -ROAD_START;
    let (mut center, mut heading) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        center.push(p);
        heading.push(h);
        let s = ROAD_START + i as f64 * ROAD_STEP;
        let k = curvature(s);
        let mid = h + 0.5 * k * ROAD_STEP;
        p = p + Point2::from_angle(mid) * ROAD_STEP;
        h += k * ROAD_STEP;
    }
    Lane { center, heading, half_width }
}

fn car(center: Point2, yaw: f64, speed: f64) -> (Point2, f64, f64, f64, f64, ObjectClass) {
    (center, yaw, 4.5, 1.9, speed, ObjectClass::Car)
}

type Obj = (Point2, f64, f64, f64, f64, ObjectClass);

fn objects(kind: ScenarioKind, lane: &Lane, rng: &mut ChaCha8Rng) -> Vec<Obj> {
    let mut out = Vec::new();
    let w = lane.half_width;
    let along = |s: f64| lane.at(s).1;
    match kind {
        ScenarioKind::Highway => {
            if rng.gen_bool(0.7) {
                let s = rng.gen_range(20.0..60.0);
                out.push(car(lane.offset(s, rng.gen_range(-0.3..0.3)), along(s) + rng.gen_range(-0.05..0.05), 25.0));
            }
            let s = rng.gen_range(10.0..50.0);
            out.push(car(lane.offset(s, 2.0 * w + 1.2), along(s), 27.0));
        }
        ScenarioKind::SharpCurve | ScenarioKind::NoMarkings => {
            if rng.gen_bool(0.5) {
                let s = rng.gen_range(25.0..55.0);
                out.push(car(lane.offset(s, 0.0), along(s), 8.0));
            }
        }
        ScenarioKind::ParkingCars => {
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut s = rng.gen_range(12.0..20.0);
            for _ in 0..rng.gen_range(2..=4) {
                // Overlaps the lane edge by a few decimeters.
                let lat = side * (w + 0.95 - rng.gen_range(0.1..0.35));
                out.push(car(lane.offset(s, lat), along(s) + rng.gen_range(-0.05..0.05), 0.0));
                s += rng.gen_range(6.0..9.0);
            }
        }
        ScenarioKind::Others => {
            let s = rng.gen_range(15.0..40.0);
            let yaw = along(s) + FRAC_PI_2 + rng.gen_range(-0.3..0.3);
            out.push(car(lane.offset(s, rng.gen_range(-1.0..1.0)), yaw, 6.0));
            if rng.gen_bool(0.5) {
                let s = rng.gen_range(10.0..s);
                out.push((lane.offset(s, rng.gen_range(-2.0..2.0)), along(s) - FRAC_PI_2, 0.6, 0.6, 1.4, ObjectClass::Pedestrian));
            }
        }
    }
    out
}

fn footprint_contains(o: &Obj, p: Point2) -> bool {
    let d = (p - o.0).rotated(-o.1);
    d.x.abs() <= o.2 / 2.0 && d.y.abs() <= o.3 / 2.0
}

/// Ego-centered grid holding object footprints and a few static blocks.
fn grid(lane: &Lane, objs: &[Obj], obstacles: bool, rng: &mut ChaCha8Rng) -> GridSpec {
    let cells_per_side = (GRID_EXTENT / GRID_RES).round() as usize;
    let origin = Point2::new(-GRID_EXTENT / 2.0, -GRID_EXTENT / 2.0);
    let mut blocks: Vec<Obj> = objs.to_vec();
    if obstacles {
        for _ in 0..rng.gen_range(2..=4) {
            let s = rng.gen_range(8.0..28.0);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lat = side * rng.gen_range(lane.half_width - 0.6..lane.half_width + 3.0);
            let size = rng.gen_range(0.4..1.6);
            blocks.push((lane.offset(s, lat), rng.gen_range(-PI..PI), size, size, 0.0, ObjectClass::Bollard));
        }
    }
    let mut cells = vec![false; cells_per_side * cells_per_side];
    for row in 0..cells_per_side {
        for col in 0..cells_per_side {
            let c = origin + Point2::new(col as f64 + 0.5, row as f64 + 0.5) * GRID_RES;
            // Keep the ego's own surroundings free so the camera never sits in an obstacle.
            if c.norm() > 4.0 && blocks.iter().any(|b| footprint_contains(b, c)) {
                cells[row * cells_per_side + col] = true;
            }
        }
    }
    GridSpec {
        origin: [origin.x, origin.y],
        resolution: GRID_RES,
        width: cells_per_side,
        height: cells_per_side,
        cells: encode_cells(&cells),
    }
}

/// Ramp terrain in map coordinates: plane plus a shallow bowl.
#[derive(Debug, Clone, Copy)]
struct Ramp {
    a: f64,
    b: f64,
    c: f64,
    k: f64,
    at: Point2,
}

impl Ramp {
    fn z(&self, p: Point2) -> f64 {
        let d = p - self.at;
        self.a * d.x + self.b * d.y + self.c + self.k * d.dot(d)
    }

    fn gradient(&self, p: Point2) -> Point2 {
        let d = p - self.at;
        Point2::new(self.a + 2.0 * self.k * d.x, self.b + 2.0 * self.k * d.y)
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// One scene; `index` only names the frame.
fn scene(kind: ScenarioKind, index: usize, seed: u64, opts: &SynthOptions, rng: &mut ChaCha8Rng) -> SceneFile {
    let lane = lane(kind, rng);
    let objs = objects(kind, &lane, rng);
    let grid = grid(&lane, &objs, opts.obstacles, rng);

    let ego_xy = Point2::new(rng.gen_range(-1000.0..1000.0), rng.gen_range(-1000.0..1000.0));
    let yaw = rng.gen_range(-PI..PI);
    let to_map = |p: Point2| p.rotated(yaw) + ego_xy;

    let ramp = (opts.terrain == Terrain::Ramp).then(|| {
        let dir = rng.gen_range(-PI..PI);
        let slope = rng.gen_range(0.01..0.05);
        Ramp { a: slope * dir.cos(), b: slope * dir.sin(), c: rng.gen_range(-50.0..300.0), k: rng.gen_range(0.0..2.0e-4), at: ego_xy }
    });
    let ego_z = ramp.map_or(0.0, |r| r.z(ego_xy));
    let (mut roll, mut pitch) = (0.0, 0.0);
    if let Some(r) = &ramp {
        let g = r.gradient(ego_xy);
        let forward = Point2::from_angle(yaw);
        pitch = -g.dot(forward).atan();
        roll = g.dot(forward.perp()).atan();
    }
    roll += rng.gen_range(-opts.tilt_noise..=opts.tilt_noise);
    pitch += rng.gen_range(-opts.tilt_noise..=opts.tilt_noise);

    let bound = |side: f64| -> Vec<[f64; 2]> {
        (0..lane.center.len())
            .map(|i| {
                let p = to_map(lane.center[i] + Point2::from_angle(lane.heading[i]).perp() * (side * lane.half_width));
                [p.x, p.y]
            })
            .collect()
    };
    let boundaries = BoundariesSpec { left: bound(1.0), right: bound(-1.0) };

    let shift = match kind {
        ScenarioKind::NoMarkings => {
            let knots = [0.0, 35.0, 70.0, 110.0]
                .iter()
                .map(|&s| [s, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
                .collect();
            Some(ShiftSpec { knots })
        }
        ScenarioKind::SharpCurve => Some(ShiftSpec { knots: vec![[0.0, 0.0, 0.0], [110.0, rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)]] }),
        _ => None,
    };

    let objects = objs
        .iter()
        .map(|o| {
            let c = to_map(o.0);
            ObjectSpec { center: [c.x, c.y], yaw: normalize_angle(o.1 + yaw), length: o.2, width: o.3, speed: o.4, class: o.5 }
        })
        .collect();

    let height = ramp.map(|r| {
        let pts: Vec<Point2> = boundaries.left.iter().chain(&boundaries.right).map(|p| Point2::new(p[0], p[1])).collect();
        let (mut lo, mut hi) = (ego_xy, ego_xy);
        for p in &pts {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let margin = 6.0;
        let (i0, i1) = (((lo.x - margin) / HEIGHT_RES).floor() as i64, ((hi.x + margin) / HEIGHT_RES).ceil() as i64);
        let (j0, j1) = (((lo.y - margin) / HEIGHT_RES).floor() as i64, ((hi.y + margin) / HEIGHT_RES).ceil() as i64);
        let mut samples = Vec::new();
        for j in j0..j1 {
            for i in i0..i1 {
                let p = Point2::new((i as f64 + 0.5) * HEIGHT_RES, (j as f64 + 0.5) * HEIGHT_RES);
                samples.push([p.x, p.y, r.z(p)]);
            }
        }
        HeightSpec { samples: Some(samples), map_file: None }
    });

    SceneFile {
        frame_id: format!("{}_{seed}_{index:04}", kind.name()),
        camera: CameraSpec {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            extrinsic: ExtrinsicSpec {
                t: [round6(rng.gen_range(1.3..1.8)), round6(rng.gen_range(-0.1..0.1)), round6(rng.gen_range(1.3..1.6))],
                rpy: [round6(rng.gen_range(-0.01..0.01)), round6(rng.gen_range(0.02..0.08)), round6(rng.gen_range(-0.02..0.02))],
            },
        },
        ego: EgoSpec { position: [ego_xy.x, ego_xy.y, ego_z], rpy: [roll, pitch, yaw] },
        boundaries,
        shift,
        objects,
        grid: Some(grid),
        height,
    }
}

fn kind_seed(kind: ScenarioKind, seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (kind as u64 + 1)
}

pub fn synth_scenes(kind: ScenarioKind, count: usize, seed: u64, opts: &SynthOptions) -> Vec<SceneFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(kind_seed(kind, seed));
    (0..count).map(|i| scene(kind, i, seed, opts, &mut rng)).collect()
}

/// Writes `<frame_id>.json` files and merges their kinds into `manifest.json`.
pub fn synth(kind: ScenarioKind, count: usize, seed: u64, out_dir: &Path, opts: &SynthOptions) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest: BTreeMap<String, String> = if manifest_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?
    } else {
        BTreeMap::new()
    };
    let mut paths = Vec::with_capacity(count);
    for s in synth_scenes(kind, count, seed, opts) {
        let p = out_dir.join(format!("{}.json", s.frame_id));
        std::fs::write(&p, s.to_json())?;
        manifest.insert(s.frame_id.clone(), kind.name().to_owned());
        paths.push(p);
    }
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(paths)
}
