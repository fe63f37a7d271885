//! Brute-force per-pixel reference renderer.
//!
//! Every pixel casts a ray into the scene and tests the ground point it hits
//! directly: corridor membership by winding number, cut-off half-planes by
//! sign, occlusion by exact segment/square tests against every obstacle cell.
//! Corridor construction, object handling, height interpolation and camera
//! math are re-derived here from the raw scene fields on purpose; nothing from
//! the polygon renderer is called.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::elevation::HeightMap;
use crate::mask::Mask;
use crate::objects::TrackedObject;
use crate::scene::SceneFrame;

/// Ray-march step along the ray, meters.
pub const MARCH_STEP: f64 = 0.05;

/// Stage switches and corridor parameters for the reference renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSettings {
    pub step: f64,
    pub max_range: f64,
    pub ahead_threshold: f64,
    pub z_near: f64,
    pub shift: bool,
    pub objects: bool,
    pub occlusion: bool,
    pub elevation: bool,
    pub tilt: bool,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_range: 100.0,
            ahead_threshold: std::f64::consts::FRAC_PI_4,
            z_near: 0.1,
            shift: true,
            objects: true,
            occlusion: true,
            elevation: true,
            tilt: true,
        }
    }
}

type P = (f64, f64);

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn cross(a: P, b: P) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dist(a: P, b: P) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn arc_prefix(pts: &[P], max_len: f64) -> Vec<P> {
    let mut out = vec![pts[0]];
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let d = dist(w[0], w[1]);
        if acc + d <= max_len {
            out.push(w[1]);
            acc += d;
        } else {
            let t = (max_len - acc) / d;
            if t * d > 1e-9 {
                out.push((w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1)));
            }
            break;
        }
    }
    out
}

/// Points at every multiple of `step` along the line, plus the end point.
fn even_spacing(pts: &[P], step: f64) -> Vec<P> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum[cum.len() - 1] + dist(w[0], w[1]));
    }
    let total = cum[cum.len() - 1];
    let mut out = vec![pts[0]];
    let mut k = 1;
    while (k as f64) * step < total - 1e-9 {
        let s = k as f64 * step;
        let i = cum.partition_point(|&c| c < s).clamp(1, pts.len() - 1);
        let t = ((s - cum[i - 1]) / (cum[i] - cum[i - 1])).clamp(0.0, 1.0);
        out.push((pts[i - 1].0 + t * (pts[i].0 - pts[i - 1].0), pts[i - 1].1 + t * (pts[i].1 - pts[i - 1].1)));
        k += 1;
    }
    let end = pts[pts.len() - 1];
    if dist(out[out.len() - 1], end) > 1e-9 {
        out.push(end);
    }
    out
}

/// Moves each vertex along its left normal (bisector of adjacent segment
/// directions) by the piecewise-linear offset at its arc length.
fn offset_line(pts: &[P], knots: &[(f64, f64)]) -> Vec<P> {
    if knots.is_empty() {
        return pts.to_vec();
    }
    let unit = |a: P, b: P| {
        let l = dist(a, b);
        ((b.0 - a.0) / l, (b.1 - a.1) / l)
    };
    let n = pts.len();
    let mut s = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            s += dist(pts[i - 1], pts[i]);
        }
        let dir = if i == 0 {
            unit(pts[0], pts[1])
        } else if i == n - 1 {
            unit(pts[n - 2], pts[n - 1])
        } else {
            let (a, b) = (unit(pts[i - 1], pts[i]), unit(pts[i], pts[i + 1]));
            let m = (a.0 + b.0, a.1 + b.1);
            let l = m.0.hypot(m.1);
            if l > 1e-12 { (m.0 / l, m.1 / l) } else { b }
        };
        let off = if s <= knots[0].0 {
            knots[0].1
        } else if s >= knots[knots.len() - 1].0 {
            knots[knots.len() - 1].1
        } else {
            let j = knots.iter().position(|k| k.0 > s).unwrap();
            let (a, b) = (knots[j - 1], knots[j]);
            a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
        };
        out.push((pts[i].0 - dir.1 * off, pts[i].1 + dir.0 * off));
    }
    out
}

/// Non-zero winding number, with points within 1e-9 of an edge counted inside.
fn inside_ring(p: P, ring: &[P]) -> bool {
    let n = ring.len();
    let mut wn = 0i32;
    for k in 0..n {
        let (a, b) = (ring[k], ring[(k + 1) % n]);
        let ab = sub(b, a);
        let ap = sub(p, a);
        let len2 = ab.0 * ab.0 + ab.1 * ab.1;
        let t = ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0);
        if dist(p, (a.0 + t * ab.0, a.1 + t * ab.1)) <= 1e-9 {
            return true;
        }
        let c = cross(ab, ap);
        if a.1 <= p.1 {
            if b.1 > p.1 && c > 0.0 {
                wn += 1;
            }
        } else if b.1 <= p.1 && c < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

fn seg_cross(a: P, b: P, c: P, d: P) -> bool {
    let o = |p: P, q: P, r: P| {
        let v = cross(sub(q, p), sub(r, p));
        if v.abs() <= 1e-12 { 0 } else { v.signum() as i32 }
    };
    let on = |p: P, q: P, r: P| {
        r.0 >= p.0.min(q.0) - 1e-12 && r.0 <= p.0.max(q.0) + 1e-12 && r.1 >= p.1.min(q.1) - 1e-12 && r.1 <= p.1.max(q.1) + 1e-12
    };
    let (o1, o2, o3, o4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    if o1 != o2 && o3 != o4 {
        return true;
    }
    (o1 == 0 && on(a, b, c)) || (o2 == 0 && on(a, b, d)) || (o3 == 0 && on(c, d, a)) || (o4 == 0 && on(c, d, b))
}

/// A half-plane `n · (p − a) ≥ 0`.
#[derive(Clone, Copy)]
struct Cut {
    a: P,
    n: P,
}

fn object_cut(o: &TrackedObject, left: &[P], right: &[P], ring: &[P], threshold: f64) -> Option<Cut> {
    let (c, s) = (o.yaw.cos(), o.yaw.sin());
    let ctr = (o.center.x, o.center.y);
    let (hl, hw) = (o.length / 2.0, o.width / 2.0);
    let corners: Vec<P> = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
        .iter()
        .map(|&(u, v)| (ctr.0 + u * c - v * s, ctr.1 + u * s + v * c))
        .collect();
    let inside_box = |p: P| {
        let d = sub(p, ctr);
        (d.0 * c + d.1 * s).abs() <= hl + 1e-12 && (-d.0 * s + d.1 * c).abs() <= hw + 1e-12
    };
    let touches = corners.iter().any(|&q| inside_ring(q, ring))
        || ring.iter().any(|&q| inside_box(q))
        || (0..4).any(|i| {
            let (a, b) = (corners[i], corners[(i + 1) % 4]);
            (0..ring.len()).any(|k| seg_cross(a, b, ring[k], ring[(k + 1) % ring.len()]))
        });
    if !touches {
        return None;
    }
    let along = if o.class.is_static() {
        true
    } else {
        let mut best = (f64::INFINITY, (1.0, 0.0));
        for line in [left, right] {
            for w in line.windows(2) {
                let d = sub(w[1], w[0]);
                let t = ((ctr.0 - w[0].0) * d.0 + (ctr.1 - w[0].1) * d.1) / (d.0 * d.0 + d.1 * d.1);
                let t = t.clamp(0.0, 1.0);
                let e = dist(ctr, (w[0].0 + t * d.0, w[0].1 + t * d.1));
                if e < best.0 {
                    best = (e, d);
                }
            }
        }
        let lane = best.1 .1.atan2(best.1 .0);
        let mut diff = (o.yaw - lane).rem_euclid(std::f64::consts::PI);
        if diff > std::f64::consts::FRAC_PI_2 {
            diff = std::f64::consts::PI - diff;
        }
        diff <= threshold + 1e-12
    };
    // Unit axis across the cut line, and half the box extent along it.
    let (axis, half) = if along { ((c, s), hl) } else { ((-s, c), hw) };
    let front = (ctr.0 + axis.0 * half, ctr.1 + axis.1 * half);
    let back = (ctr.0 - axis.0 * half, ctr.1 - axis.1 * half);
    let ego = (0.0, 0.0);
    let a = if dist(front, ego) < dist(back, ego) { front } else { back };
    let mut n = (ctr.0 - a.0, ctr.1 - a.1);
    let l = n.0.hypot(n.1);
    n = (-n.0 / l, -n.1 / l);
    let side = n.0 * (ego.0 - a.0) + n.1 * (ego.1 - a.1);
    if side < 0.0 {
        n = (-n.0, -n.1);
    } else if side == 0.0 {
        let near = ring.iter().copied().min_by(|p, q| dist(*p, ego).total_cmp(&dist(*q, ego))).unwrap();
        if n.0 * (near.0 - a.0) + n.1 * (near.1 - a.1) < 0.0 {
            n = (-n.0, -n.1);
        }
    }
    Some(Cut { a, n })
}

/// Terrain height in the leveled frame; bilinear over cell centers with
/// weights renormalized over populated cells, else the nearest populated cell
/// within three cells, else the ego's own height.
struct Terrain<'a> {
    map: &'a HeightMap,
    ego: (f64, f64, f64),
    cos: f64,
    sin: f64,
}

impl Terrain<'_> {
    fn cell(&self, i: i64, j: i64) -> Option<f64> {
        let m = self.map;
        if i < 0 || j < 0 || i >= m.width as i64 || j >= m.height as i64 {
            return None;
        }
        let k = j as usize * m.width + i as usize;
        (m.count[k] > 0).then(|| m.mean[k])
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        let mx = self.ego.0 + self.cos * x - self.sin * y;
        let my = self.ego.1 + self.sin * x + self.cos * y;
        let m = self.map;
        let u = (mx - m.origin.x) / m.resolution - 0.5;
        let v = (my - m.origin.y) / m.resolution - 0.5;
        let (fu, fv) = (u.floor(), v.floor());
        let (du, dv) = (u - fu, v - fv);
        let (i, j) = (fu as i64, fv as i64);
        let mut ref_z = None;
        let mut num = 0.0;
        let mut den = 0.0;
        for (di, dj, w) in [(0, 0, (1.0 - du) * (1.0 - dv)), (1, 0, du * (1.0 - dv)), (0, 1, (1.0 - du) * dv), (1, 1, du * dv)] {
            if let Some(z) = self.cell(i + di, j + dj) {
                let r = *ref_z.get_or_insert(z);
                num += w * (z - r);
                den += w;
            }
        }
        if let Some(r) = ref_z {
            if den > 0.0 {
                return r + num / den - self.ego.2;
            }
        }
        let mut best = (f64::INFINITY, self.ego.2);
        for jj in j - 2..=j + 3 {
            for ii in i - 2..=i + 3 {
                if let Some(z) = self.cell(ii, jj) {
                    let cx = m.origin.x + (ii as f64 + 0.5) * m.resolution;
                    let cy = m.origin.y + (jj as f64 + 0.5) * m.resolution;
                    let d = (cx - mx).hypot(cy - my);
                    if d < best.0 {
                        best = (d, z);
                    }
                }
            }
        }
        best.1 - self.ego.2
    }
}

struct Shadow<'a> {
    origin: P,
    res: f64,
    width: usize,
    height: usize,
    cells: &'a [bool],
    obstacles: Vec<(usize, usize)>,
    sensor: P,
}

impl Shadow<'_> {
    /// `Some(true)` when the cell holding `p` is an obstacle or hidden behind
    /// one, `None` when `p` lies outside the grid.
    fn cell_of(&self, p: P) -> Option<(usize, usize)> {
        let i = ((p.0 - self.origin.0) / self.res).floor();
        let j = ((p.1 - self.origin.1) / self.res).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.width && (j as usize) < self.height).then_some((i as usize, j as usize))
    }

    fn hidden(&self, (i, j): (usize, usize)) -> bool {
        if self.cells[j * self.width + i] {
            return true;
        }
        let a = self.sensor;
        let b = (self.origin.0 + (i as f64 + 0.5) * self.res, self.origin.1 + (j as f64 + 0.5) * self.res);
        let d = sub(b, a);
        self.obstacles.iter().any(|&(oi, oj)| {
            if (oi, oj) == (i, j) {
                return false;
            }
            let lo = (self.origin.0 + oi as f64 * self.res, self.origin.1 + oj as f64 * self.res);
            let hi = (lo.0 + self.res, lo.1 + self.res);
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            for (s, dd, l, h) in [(a.0, d.0, lo.0, hi.0), (a.1, d.1, lo.1, hi.1)] {
                if dd == 0.0 {
                    if s < l || s > h {
                        return false;
                    }
                } else {
                    let (u, v) = ((l - s) / dd, (h - s) / dd);
                    t0 = t0.max(u.min(v));
                    t1 = t1.min(u.max(v));
                }
            }
            t0 <= t1
        })
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Renders the reference mask. `terrain` is the stitched height map for the
/// frame; `None` (or `elevation` off) means the flat plane `z = 0`.
pub fn render_reference(scene: &SceneFrame, terrain: Option<&HeightMap>, cfg: &ReferenceSettings) -> Mask {
    let intr = scene.camera.intrinsics;
    let mut mask = Mask::new(intr.width, intr.height);

    // Corridor in the map frame, then moved into the leveled frame.
    let raw = |line: &crate::geometry::Polyline2| -> Vec<P> { line.vertices().iter().map(|p| (p.x, p.y)).collect() };
    let knots = |left: bool| -> Vec<(f64, f64)> {
        if !cfg.shift {
            return Vec::new();
        }
        scene.shift.knots().iter().map(|k| (k.arc_length, if left { k.shift_left } else { k.shift_right })).collect()
    };
    let build = |pts: Vec<P>, k: Vec<(f64, f64)>| offset_line(&even_spacing(&arc_prefix(&pts, cfg.max_range), cfg.step), &k);
    let (cy, sy) = (scene.ego.yaw.cos(), scene.ego.yaw.sin());
    let e = scene.ego.position;
    let to_leveled = |p: P| {
        let (dx, dy) = (p.0 - e.x, p.1 - e.y);
        (cy * dx + sy * dy, -sy * dx + cy * dy)
    };
    let left: Vec<P> = build(raw(&scene.bounds.left), knots(true)).into_iter().map(to_leveled).collect();
    let right: Vec<P> = build(raw(&scene.bounds.right), knots(false)).into_iter().map(to_leveled).collect();
    let ring: Vec<P> = left.iter().chain(right.iter().rev()).copied().collect();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in &ring {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }

    let cuts: Vec<Cut> = if cfg.objects {
        scene.objects.iter().filter_map(|o| object_cut(o, &left, &right, &ring, cfg.ahead_threshold)).collect()
    } else {
        Vec::new()
    };

    // Camera pose in the leveled frame.
    let body = if cfg.tilt { rot_x(scene.tilt.roll) * rot_y(scene.tilt.pitch) } else { Matrix3::identity() };
    let r = body * scene.camera.extrinsics.rotation.matrix();
    let o: Vector3<f64> = body * scene.camera.extrinsics.translation;

    let shadow = match (&scene.grid, cfg.occlusion) {
        (Some(g), true) => Some(Shadow {
            origin: (g.origin.x, g.origin.y),
            res: g.resolution,
            width: g.width,
            height: g.height,
            cells: &g.cells,
            obstacles: (0..g.height)
                .flat_map(|j| (0..g.width).map(move |i| (i, j)))
                .filter(|&(i, j)| g.cells[j * g.width + i])
                .collect(),
            sensor: (o.x, o.y),
        }),
        _ => None,
    };
    let memo: Vec<std::sync::OnceLock<bool>> = match &shadow {
        Some(s) => (0..s.width * s.height).map(|_| std::sync::OnceLock::new()).collect(),
        None => Vec::new(),
    };

    let ground = terrain.filter(|_| cfg.elevation).map(|map| Terrain {
        map,
        ego: (e.x, e.y, e.z),
        cos: cy,
        sin: sy,
    });
    let z_top = ground.as_ref().map(|t| {
        let top = t.map.mean.iter().zip(&t.map.count).filter(|(_, &c)| c > 0).map(|(&m, _)| m).fold(t.ego.2, f64::max);
        top - t.ego.2
    });
    // Bound on |∇height| so the march can skip ahead while far above ground.
    let slope = terrain.map_or(0.0, |m| {
        let mut worst = 0.0f64;
        for j in 0..m.height {
            for i in 0..m.width {
                let k = j * m.width + i;
                if m.count[k] == 0 {
                    continue;
                }
                for n in [(i + 1 < m.width).then(|| k + 1), (j + 1 < m.height).then(|| k + m.width)].into_iter().flatten() {
                    if m.count[n] > 0 {
                        worst = worst.max((m.mean[n] - m.mean[k]).abs() / m.resolution);
                    }
                }
            }
        }
        worst * std::f64::consts::SQRT_2
    });

    let hit = |u: usize, v: usize| -> Option<P> {
        let d_opt = Vector3::new((u as f64 + 0.5 - intr.cx) / intr.fx, (v as f64 + 0.5 - intr.cy) / intr.fy, 1.0);
        // Parameterized by optical depth t: point = o + t·d.
        let d = r * d_opt;
        match (&ground, z_top) {
            (Some(g), Some(top)) => {
                // Depth interval over which the ray's footprint crosses the corridor box.
                let (mut t_in, mut t_max) = (0.0f64, f64::INFINITY);
                for (oc, dc, l, h) in [(o.x, d.x, lo.0, hi.0), (o.y, d.y, lo.1, hi.1)] {
                    if dc == 0.0 {
                        if oc < l || oc > h {
                            return None;
                        }
                    } else {
                        let (a, b) = ((l - oc) / dc, (h - oc) / dc);
                        t_in = t_in.max(a.min(b));
                        t_max = t_max.min(a.max(b));
                    }
                }
                if t_in > t_max {
                    return None;
                }
                let lipschitz = d.z.abs() + slope * d.x.hypot(d.y);
                let mut t = cfg.z_near;
                if o.z + t * d.z > top {
                    if d.z >= 0.0 {
                        return None;
                    }
                    t = (top - o.z) / d.z;
                }
                let f = |t: f64| o.z + t * d.z - g.height(o.x + t * d.x, o.y + t * d.y);
                let dt = MARCH_STEP / d.norm();
                let mut prev = (t, f(t));
                if prev.1 <= 0.0 {
                    return Some((o.x + t * d.x, o.y + t * d.y));
                }
                while prev.0 < t_max {
                    // No crossing can occur within f / lipschitz of the current depth.
                    let t1 = prev.0 + dt.max(0.99 * prev.1 / lipschitz);
                    let f1 = f(t1);
                    if f1 <= 0.0 {
                        // One bisection, then a secant step inside the remaining bracket.
                        let tm = 0.5 * (prev.0 + t1);
                        let fm = f(tm);
                        let ((ta, fa), (tb, fb)) = if fm <= 0.0 { (prev, (tm, fm)) } else { ((tm, fm), (t1, f1)) };
                        let th = ta + (tb - ta) * fa / (fa - fb);
                        return Some((o.x + th * d.x, o.y + th * d.y));
                    }
                    prev = (t1, f1);
                }
                None
            }
            _ => {
                if d.z >= 0.0 {
                    return None;
                }
                let t = -o.z / d.z;
                (t >= cfg.z_near).then(|| (o.x + t * d.x, o.y + t * d.y))
            }
        }
    };

    let set = |u: usize, v: usize| -> bool {
        let Some(p) = hit(u, v) else { return false };
        if p.0 < lo.0 || p.0 > hi.0 || p.1 < lo.1 || p.1 > hi.1 || !inside_ring(p, &ring) {
            return false;
        }
        if cuts.iter().any(|c| c.n.0 * (p.0 - c.a.0) + c.n.1 * (p.1 - c.a.1) < -1e-12) {
            return false;
        }
        match &shadow {
            Some(s) => match s.cell_of(p) {
                Some(cell) => !*memo[cell.1 * s.width + cell.0].get_or_init(|| s.hidden(cell)),
                None => true,
            },
            None => true,
        }
    };

    let rows: Vec<Vec<bool>> = (0..intr.height).into_par_iter().map(|v| (0..intr.width).map(|u| set(u, v)).collect()).collect();
    for (v, row) in rows.into_iter().enumerate() {
        mask.bits[v * intr.width..(v + 1) * intr.width].copy_from_slice(&row);
    }
    mask
}
