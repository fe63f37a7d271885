//! JSON scene files (one per frame) and their validated in-memory form.
//!
//! Everything is in the map frame except the occupancy grid, which is
//! ego-centric in the vehicle-leveled frame. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::corridor::{LaneBoundaries, LateralShiftProfile, ShiftKnot};
use crate::elevation::HeightSample;
use crate::error::{Error, Result};
use crate::geometry::{map_to_leveled_2d, normalize_angle, Frame, Point2, Point3, Polyline2, Pose};
use crate::objects::{ObjectClass, TrackedObject};
use crate::occlusion::OccupancyGrid;
use crate::projection::{Camera, CameraExtrinsics, CameraIntrinsics, TiltState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicSpec {
    pub t: [f64; 3],
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub extrinsic: ExtrinsicSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub position: [f64; 3],
    /// Roll and pitch double as the measured body tilt.
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundariesSpec {
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    /// `[arc_length, shift_left, shift_right]`
    pub knots: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub center: [f64; 2],
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub speed: f64,
    pub class: ObjectClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Base64 bitset: bit `row·width + col` lives in byte `k / 8`, LSB first.
    pub cells: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 3]>>,
    /// Height map JSON, relative to the scene file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<String>,
}

/// On-disk scene layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub frame_id: String,
    pub camera: CameraSpec,
    pub ego: EgoSpec,
    pub boundaries: BoundariesSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<HeightSpec>,
}

/// Where ground altitude comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightSource {
    Flat,
    Samples(Vec<HeightSample>),
    MapFile(PathBuf),
}

/// One validated frame. Objects are already in the vehicle-leveled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrame {
    pub frame_id: String,
    pub bounds: LaneBoundaries,
    pub shift: LateralShiftProfile,
    pub objects: Vec<TrackedObject>,
    /// `None` means no obstacle information.
    pub grid: Option<OccupancyGrid>,
    pub height: HeightSource,
    pub ego: Pose,
    pub tilt: TiltState,
    pub camera: Camera,
}

pub fn encode_cells(cells: &[bool]) -> String {
    let mut bytes = vec![0u8; cells.len().div_ceil(8)];
    for (k, _) in cells.iter().enumerate().filter(|(_, &c)| c) {
        bytes[k / 8] |= 1 << (k % 8);
    }
    B64.encode(bytes)
}

pub fn decode_cells(text: &str, n: usize) -> Result<Vec<bool>> {
    let bytes = B64.decode(text).map_err(|e| Error::Schema(format!("grid cells: {e}")))?;
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::Schema(format!("grid cells: {} bytes for {n} cells", bytes.len())));
    }
    Ok((0..n).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect())
}

fn schema<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema(m) => Error::Schema(m),
        other => Error::Schema(format!("{what}: {other}")),
    })
}

fn polyline(pts: &[[f64; 2]]) -> Result<Polyline2> {
    Polyline2::new(pts.iter().map(|p| Point2::new(p[0], p[1])).collect(), Frame::Map)
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Validates and converts. `base_dir` resolves a relative `map_file`.
    pub fn to_frame(&self, base_dir: &Path) -> Result<SceneFrame> {
        if self.frame_id.is_empty() || self.frame_id.contains(['/', '\\']) {
            return Err(Error::Schema(format!("frame_id `{}` is not a plain file stem", self.frame_id)));
        }
        let c = &self.camera;
        let intrinsics = schema("camera", CameraIntrinsics::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height))?;
        let extrinsics = CameraExtrinsics::from_mount(c.extrinsic.t, c.extrinsic.rpy);
        let [x, y, z] = self.ego.position;
        let [roll, pitch, yaw] = self.ego.rpy;
        let ego = schema("ego", Pose::new(Point3::new(x, y, z), roll, pitch, yaw))?;
        let tilt = schema("ego", TiltState::new(roll, pitch))?;
        let bounds = LaneBoundaries {
            left: schema("boundaries.left", polyline(&self.boundaries.left))?,
            right: schema("boundaries.right", polyline(&self.boundaries.right))?,
        };
        let knots = self
            .shift
            .as_ref()
            .map(|s| {
                s.knots.iter().map(|k| ShiftKnot { arc_length: k[0], shift_left: k[1], shift_right: k[2] }).collect()
            })
            .unwrap_or_default();
        let shift = schema("shift", LateralShiftProfile::new(knots))?;
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let obj = TrackedObject {
                    center: map_to_leveled_2d(&ego, Point2::new(o.center[0], o.center[1])),
                    yaw: normalize_angle(o.yaw - ego.yaw),
                    length: o.length,
                    width: o.width,
                    speed: o.speed,
                    class: o.class,
                };
                schema("objects", obj.validate().map(|_| obj))
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = match &self.grid {
            None => None,
            Some(g) => {
                let cells = decode_cells(&g.cells, g.width * g.height)?;
                let origin = Point2::new(g.origin[0], g.origin[1]);
                Some(schema("grid", OccupancyGrid::new(origin, g.resolution, g.width, g.height, cells))?)
            }
        };
        let height = match &self.height {
            None => HeightSource::Flat,
            Some(HeightSpec { samples: Some(s), map_file: None }) => HeightSource::Samples(
                s.iter().map(|p| HeightSample { position: Point2::new(p[0], p[1]), altitude: p[2] }).collect(),
            ),
            Some(HeightSpec { samples: None, map_file: Some(f) }) => HeightSource::MapFile(base_dir.join(f)),
            Some(_) => return Err(Error::Schema("height needs exactly one of samples, map_file".into())),
        };
        Ok(SceneFrame {
            frame_id: self.frame_id.clone(),
            bounds,
            shift,
            objects,
            grid,
            height,
            ego,
            tilt,
            camera: Camera { intrinsics, extrinsics },
        })
    }
}

impl SceneFrame {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        SceneFile::from_json(&text)
            .and_then(|f| f.to_frame(base))
            .map_err(|e| match e {
                Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
                other => other,
            })
    }
}

/// Scene files (`*.json`, excluding `manifest.json`) in name order.
pub fn list_scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> SceneFile {
        SceneFile {
            frame_id: "f0".into(),
            camera: CameraSpec {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
                width: 640,
                height: 480,
                extrinsic: ExtrinsicSpec { t: [1.5, 0.0, 1.4], rpy: [0.0, 0.0, 0.0] },
            },
            ego: EgoSpec { position: [10.0, 5.0, 0.0], rpy: [0.0, 0.0, 0.5] },
            boundaries: BoundariesSpec { left: vec![[0.0, 2.0], [50.0, 2.0]], right: vec![[0.0, -2.0], [50.0, -2.0]] },
            shift: None,
            objects: vec![ObjectSpec { center: [30.0, 5.0], yaw: 0.5, length: 4.0, width: 2.0, speed: 3.0, class: ObjectClass::Car }],
            grid: None,
            height: None,
        }
    }

    #[test]
    fn round_trip_and_conversion() {
        let f = minimal();
        let back = SceneFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let frame = back.to_frame(Path::new(".")).unwrap();
        assert_eq!(frame.height, HeightSource::Flat);
        assert!(frame.objects[0].yaw.abs() < 1e-15);
        let c = frame.objects[0].center;
        assert!((c.x - (20.0 * 0.5f64.cos())).abs() < 1e-12 && (c.y + 20.0 * 0.5f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_are_named() {
        let mut v: serde_json::Value = serde_json::from_str(&minimal().to_json()).unwrap();
        v["camera"]["skew"] = 0.0.into();
        let err = SceneFile::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("skew")), "{err}");
    }

    #[test]
    fn invalid_values_are_schema_errors() {
        let mut f = minimal();
        f.camera.fx = -1.0;
        assert!(matches!(f.to_frame(Path::new(".")), Err(Error::Schema(_))));
        let mut f = minimal();
        f.height = Some(HeightSpec { samples: Some(vec![]), map_file: Some("m.json".into()) });
        assert!(matches!(f.to_frame(Path::new(".")), Err(Error::Schema(_))));
        let mut f = minimal();
        f.boundaries.left = vec![[0.0, 0.0]];
        assert!(matches!(f.to_frame(Path::new(".")), Err(Error::Schema(_))));
    }

    #[test]
    fn bitset_layout() {
        let mut cells = vec![false; 10];
        cells[0] = true;
        cells[9] = true;
        let text = encode_cells(&cells);
        assert_eq!(B64.decode(&text).unwrap(), vec![0b0000_0001, 0b0000_0010]);
        assert_eq!(decode_cells(&text, 10).unwrap(), cells);
        assert!(decode_cells(&text, 20).is_err());
        assert!(decode_cells("!!", 4).is_err());
    }
}
