//! Polygonal scenes: loading, validation, and ray queries.
//!
//! Every polygon is one surface patch. The vertex loop is wound so that the
//! right-hand normal points into the enclosed air volume; a ray can only be
//! reflected by a polygon it approaches from that side.

use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bvh::Bvh;
use crate::error::{Error, Result};
use crate::sampling::{self, RayRng};

pub type Vec3 = Vector3<f64>;

/// Distance tolerance used by every intersection query, in meters.
pub const HIT_EPS: f64 = 1e-9;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Rays cast from every probe point by the watertightness check in [`Scene::from_description`].
const WATERTIGHT_RAYS: usize = 256;
const WATERTIGHT_SEED: u64 = 0x5eed_0fc1_05ed;

/// On-disk scene description, mirrored one-to-one by the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub vertices: Vec<[f64; 3]>,
    pub polygons: Vec<PolygonDescription>,
    pub materials: Vec<MaterialDescription>,
    #[serde(default)]
    pub sources: Vec<[f64; 3]>,
    #[serde(default)]
    pub listeners: Vec<[f64; 3]>,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonDescription {
    pub vertex_indices: Vec<usize>,
    pub material_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDescription {
    pub alpha: f64,
}

/// A validated planar convex polygon with cached geometry.
#[derive(Debug, Clone)]
pub struct Patch {
    pub vertices: Vec<Vec3>,
    pub normal: Vec3,
    pub centroid: Vec3,
    pub area: f64,
    pub alpha: f64,
    /// Plane offset: `normal · x == offset` on the polygon.
    offset: f64,
    /// Cumulative fan-triangle areas, normalised to end at 1.
    fan_cdf: Vec<f64>,
}

impl Patch {
    fn new(vertices: Vec<Vec3>, alpha: f64) -> Option<Self> {
        let n = vertices.len();
        let mut normal = Vec3::zeros();
        for i in 0..n {
            // Newell's method tolerates slightly non-planar input.
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            normal.x += (a.y - b.y) * (a.z + b.z);
            normal.y += (a.z - b.z) * (a.x + b.x);
            normal.z += (a.x - b.x) * (a.y + b.y);
        }
        let twice_area = normal.norm();
        if twice_area <= 0.0 || !twice_area.is_finite() {
            return None;
        }
        let normal = normal / twice_area;
        let mut fan = Vec::with_capacity(n - 2);
        let mut acc = 0.0;
        let mut weighted = Vec3::zeros();
        for i in 1..n - 1 {
            let tri = (vertices[i] - vertices[0])
                .cross(&(vertices[i + 1] - vertices[0]))
                .dot(&normal)
                * 0.5;
            acc += tri;
            weighted += tri * (vertices[0] + vertices[i] + vertices[i + 1]) / 3.0;
            fan.push(acc);
        }
        if acc <= 0.0 {
            return None;
        }
        for f in &mut fan {
            *f /= acc;
        }
        let centroid = weighted / acc;
        Some(Patch {
            offset: normal.dot(&centroid),
            vertices,
            normal,
            centroid,
            area: acc,
            alpha,
            fan_cdf: fan,
        })
    }

    /// Signed distance of `p` from the patch plane (positive on the room side).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(&(c - b)).dot(&self.normal) >= -1e-12 * (b - a).norm() * (c - b).norm()
        })
    }

    /// Point-in-polygon for a point already on the plane.
    fn contains(&self, p: &Vec3) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            (b - a).cross(&(p - a)).dot(&self.normal) >= -HIT_EPS * (b - a).norm()
        })
    }

    /// Ray parameter at which the ray meets this polygon, if it does.
    /// `front_only` rejects rays arriving from behind the patch.
    pub fn intersect(&self, ray: &Ray, front_only: bool) -> Option<f64> {
        let denom = self.normal.dot(&ray.direction);
        if denom.abs() < 1e-15 || (front_only && denom >= 0.0) {
            return None;
        }
        let t = (self.offset - self.normal.dot(&ray.origin)) / denom;
        if t <= HIT_EPS {
            return None;
        }
        let p = ray.at(t);
        self.contains(&p).then_some(t)
    }

    /// Maps a point of the unit square onto the patch with uniform area density.
    pub fn sample(&self, u: f64, v: f64) -> Vec3 {
        let k = self
            .fan_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.fan_cdf.len() - 1);
        let lo = if k == 0 { 0.0 } else { self.fan_cdf[k - 1] };
        let hi = self.fan_cdf[k];
        let u = if hi > lo { ((u - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        let su = u.sqrt();
        let (a, b, c) = (self.vertices[0], self.vertices[k + 1], self.vertices[k + 2]);
        a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v)
    }

    /// Orthonormal tangent frame `(t1, t2)` completing the normal.
    pub fn tangent_frame(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let t1 = n.cross(&helper).normalize();
        let t2 = n.cross(&t1);
        (t1, t2)
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalising the direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub polygon_index: usize,
    pub distance: f64,
    pub point: Vec3,
}

/// A validated, immutable scene.
#[derive(Debug, Clone)]
pub struct Scene {
    description: SceneDescription,
    patches: Vec<Patch>,
    bvh: Bvh,
    diagonal: f64,
    hash: String,
}

impl Scene {
    /// Reads and validates a scene file.
    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            message: format!("cannot read scene file: {e}"),
        })?;
        Scene::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Scene> {
        let description: SceneDescription =
            serde_json::from_str(text).map_err(|e| Error::Parse {
                source_name: source_name.to_string(),
                message: e.to_string(),
            })?;
        Scene::from_description(description)
    }

    pub fn from_description(description: SceneDescription) -> Result<Scene> {
        let d = &description;
        if d.polygons.is_empty() {
            return Err(Error::Validation("scene has no polygons".into()));
        }
        if !(d.speed_of_sound > 0.0 && d.speed_of_sound.is_finite()) {
            return Err(Error::Validation(format!(
                "speed_of_sound {} must be positive",
                d.speed_of_sound
            )));
        }
        for (i, m) in d.materials.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.alpha) {
                return Err(Error::Validation(format!(
                    "material {i}: alpha {} outside [0, 1]",
                    m.alpha
                )));
            }
        }
        for (i, v) in d.vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!("vertex {i} is not finite")));
            }
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &d.vertices {
            let v = Vec3::from(*v);
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        }
        let diagonal = (hi - lo).norm();
        let planar_tol = 1e-6 * diagonal;

        let mut patches = Vec::with_capacity(d.polygons.len());
        for (i, poly) in d.polygons.iter().enumerate() {
            if poly.vertex_indices.len() < 3 {
                return Err(Error::Validation(format!(
                    "polygon {i}: needs at least 3 vertices"
                )));
            }
            let mut verts = Vec::with_capacity(poly.vertex_indices.len());
            for &vi in &poly.vertex_indices {
                let v = d.vertices.get(vi).ok_or_else(|| {
                    Error::Validation(format!("polygon {i}: vertex index {vi} out of range"))
                })?;
                verts.push(Vec3::from(*v));
            }
            let alpha = d
                .materials
                .get(poly.material_id)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "polygon {i}: material id {} out of range",
                        poly.material_id
                    ))
                })?
                .alpha;
            let patch = Patch::new(verts, alpha)
                .ok_or_else(|| Error::Validation(format!("polygon {i}: degenerate (zero area)")))?;
            if let Some(dev) = patch
                .vertices
                .iter()
                .map(|v| patch.signed_distance(v).abs())
                .find(|&dev| dev > planar_tol)
            {
                return Err(Error::Validation(format!(
                    "polygon {i}: not planar (deviation {dev:e} m)"
                )));
            }
            if !patch.is_convex() {
                return Err(Error::Validation(format!("polygon {i}: not convex")));
            }
            patches.push(patch);
        }

        let bvh = Bvh::build(&patches);
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&description).expect("scene serialises"));
        let hash = hex::encode(&hasher.finalize()[..16]);
        let scene = Scene {
            description,
            patches,
            bvh,
            diagonal,
            hash,
        };
        scene.check_watertight()?;
        for (kind, points) in [
            ("source", &scene.description.sources),
            ("listener", &scene.description.listeners),
        ] {
            for (i, p) in points.iter().enumerate() {
                if !scene.contains_point(&Vec3::from(*p)) {
                    return Err(Error::Validation(format!(
                        "{kind} {i} at {p:?} is not inside the enclosure"
                    )));
                }
            }
        }
        Ok(scene)
    }

    /// Casts rays from a point just inside every patch; all must hit a front face.
    fn check_watertight(&self) -> Result<()> {
        let inset = 1e-4 * self.diagonal;
        for (i, p) in self.patches.iter().enumerate() {
            let origin = p.centroid + p.normal * inset;
            let mut rng = RayRng::new(WATERTIGHT_SEED, i as u64);
            for r in 0..WATERTIGHT_RAYS {
                rng.seek(r as u64);
                let dir = sampling::uniform_sphere(rng.gen(), rng.gen());
                let ray = Ray::new(origin, dir);
                if self.intersect(&ray).is_none() {
                    return Err(Error::Validation(format!(
                        "enclosure is not watertight: ray from patch {i} along {:?} escapes",
                        dir.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn description(&self) -> &SceneDescription {
        &self.description
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn sources(&self) -> Vec<Vec3> {
        self.description.sources.iter().map(|p| Vec3::from(*p)).collect()
    }

    pub fn listeners(&self) -> Vec<Vec3> {
        self.description.listeners.iter().map(|p| Vec3::from(*p)).collect()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.description.speed_of_sound
    }

    pub fn bounding_diagonal(&self) -> f64 {
        self.diagonal
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.bvh.bounds()
    }

    /// Content hash of the scene description (hex, 128 bits).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Nearest front-facing polygon along the ray.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.bvh
            .nearest(&self.patches, ray, true, f64::INFINITY)
            .map(|(polygon_index, distance)| Hit {
                polygon_index,
                distance,
                point: ray.at(distance),
            })
    }

    /// Nearest polygon along the ray regardless of facing.
    pub fn intersect_any(&self, ray: &Ray) -> Option<Hit> {
        self.bvh
            .nearest(&self.patches, ray, false, f64::INFINITY)
            .map(|(polygon_index, distance)| Hit {
                polygon_index,
                distance,
                point: ray.at(distance),
            })
    }

    /// True iff the open segment `a -> b` crosses no polygon.
    pub fn line_of_sight(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * HIT_EPS {
            return true;
        }
        let ray = Ray {
            origin: *a,
            direction: d / len,
        };
        self.bvh
            .nearest(&self.patches, &ray, false, len - HIT_EPS)
            .is_none()
    }

    /// Point-in-enclosure: along several fixed directions the first surface met
    /// must be seen from its front side.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        const DIRS: [[f64; 3]; 3] = [
            [0.5773, 0.5774, 0.5775],
            [-0.6123, 0.3536, -0.7072],
            [0.2182, -0.8729, 0.4364],
        ];
        DIRS.iter().all(|d| {
            let ray = Ray::new(*p, Vec3::from(*d));
            match (self.intersect(&ray), self.intersect_any(&ray)) {
                (Some(front), Some(any)) => any.distance > front.distance - HIT_EPS,
                _ => false,
            }
        })
    }
}
