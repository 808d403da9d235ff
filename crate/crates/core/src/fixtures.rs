//! Programmatic scene fixtures: shoeboxes and the three-room coupled scene.
//!
//! All rooms are built from axis-aligned rectangles whose vertex loops wind
//! so that the normal points into the air volume.

use crate::error::Result;
use crate::scene::{MaterialDescription, PolygonDescription, Scene, SceneDescription, Vec3};

/// Source position used throughout the three-room tests.
pub const THREE_ROOM_SOURCE: [f64; 3] = [2.0, 2.0, 1.5];
/// Listener positions L1 (left room), L2 (middle room), L3 (right room).
pub const THREE_ROOM_LISTENERS: [[f64; 3]; 3] = [[2.0, 6.8, 1.5], [8.8, 3.5, 1.5], [9.3, 10.2, 1.5]];
/// Absorption of the left, middle and right rooms.
pub const THREE_ROOM_ALPHA: [f64; 3] = [0.2, 0.01, 0.1];

/// Accumulates rectangles into a scene description.
#[derive(Debug, Clone, Default)]
pub struct SceneBuilder {
    desc: SceneDescription,
}

impl Default for SceneDescription {
    fn default() -> Self {
        SceneDescription {
            vertices: Vec::new(),
            polygons: Vec::new(),
            materials: Vec::new(),
            sources: Vec::new(),
            listeners: Vec::new(),
            speed_of_sound: crate::scene::DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl SceneBuilder {
    pub fn new() -> Self {
        SceneBuilder::default()
    }

    pub fn material(&mut self, alpha: f64) -> usize {
        self.desc.materials.push(MaterialDescription { alpha });
        self.desc.materials.len() - 1
    }

    /// Adds the rectangle `origin + s·u + t·v`, `s, t ∈ [0, 1]`, split into an
    /// `nu × nv` grid. The normal is `u × v`.
    pub fn rect(&mut self, origin: Vec3, u: Vec3, v: Vec3, nu: usize, nv: usize, material: usize) -> &mut Self {
        for i in 0..nu {
            for j in 0..nv {
                let o = origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64);
                let (du, dv) = (u / nu as f64, v / nv as f64);
                let base = self.desc.vertices.len();
                for p in [o, o + du, o + du + dv, o + dv] {
                    self.desc.vertices.push([p.x, p.y, p.z]);
                }
                self.desc.polygons.push(PolygonDescription {
                    vertex_indices: (base..base + 4).collect(),
                    material_id: material,
                });
            }
        }
        self
    }

    /// Rectangle split into cells no longer than `cell` along either edge.
    pub fn rect_cells(&mut self, origin: Vec3, u: Vec3, v: Vec3, cell: f64, material: usize) -> &mut Self {
        let nu = (u.norm() / cell - 1e-9).ceil().max(1.0) as usize;
        let nv = (v.norm() / cell - 1e-9).ceil().max(1.0) as usize;
        self.rect(origin, u, v, nu, nv, material)
    }

    pub fn source(&mut self, p: [f64; 3]) -> &mut Self {
        self.desc.sources.push(p);
        self
    }

    pub fn listener(&mut self, p: [f64; 3]) -> &mut Self {
        self.desc.listeners.push(p);
        self
    }

    pub fn finish(&self) -> SceneDescription {
        self.desc.clone()
    }
}

/// Six inward-facing faces of the box `[0, dx] × [0, dy] × [0, dz]`, each
/// split into the given `(nu, nv)` grid. Face order: floor, ceiling, x=0,
/// x=dx, y=0, y=dy.
pub fn box_faces(b: &mut SceneBuilder, dims: [f64; 3], grids: [(usize, usize); 6], material: usize) {
    let [dx, dy, dz] = dims;
    let (x, y, z) = (Vec3::x() * dx, Vec3::y() * dy, Vec3::z() * dz);
    let o = Vec3::zeros();
    b.rect(o, x, y, grids[0].0, grids[0].1, material);
    b.rect(z, y, x, grids[1].0, grids[1].1, material);
    b.rect(o, y, z, grids[2].0, grids[2].1, material);
    b.rect(x, z, y, grids[3].0, grids[3].1, material);
    b.rect(o, z, x, grids[4].0, grids[4].1, material);
    b.rect(y, x, z, grids[5].0, grids[5].1, material);
}

/// Single-patch-per-face shoebox with one material.
pub fn shoebox_description(dims: [f64; 3], alpha: f64) -> SceneDescription {
    let mut b = SceneBuilder::new();
    let m = b.material(alpha);
    box_faces(&mut b, dims, [(1, 1); 6], m);
    b.finish()
}

pub fn shoebox(dims: [f64; 3], alpha: f64) -> Result<Scene> {
    Scene::from_description(shoebox_description(dims, alpha))
}

/// The unit cube with α = 0.5, one source and one listener.
pub fn unit_shoebox_description() -> SceneDescription {
    let mut d = shoebox_description([1.0, 1.0, 1.0], 0.5);
    d.sources.push([0.5, 0.5, 0.5]);
    d.listeners.push([0.3, 0.6, 0.4]);
    d
}

/// 32-patch shoebox (8.9 × 6.3 × 3.6 m, α = 0.1): floor and ceiling 3×2,
/// long walls 3×2, short walls 2×2, giving 848 paths.
pub fn shoebox32_description() -> SceneDescription {
    let mut b = SceneBuilder::new();
    let m = b.material(0.1);
    // Face grids follow each face's (u, v) edge order in `box_faces`.
    box_faces(
        &mut b,
        [8.9, 6.3, 3.6],
        [(3, 2), (2, 3), (2, 2), (2, 2), (2, 3), (3, 2)],
        m,
    );
    b.source([2.0, 2.5, 1.5]).listener([6.5, 4.0, 1.6]);
    b.finish()
}

pub fn shoebox32() -> Result<Scene> {
    Scene::from_description(shoebox32_description())
}

/// Patch sizing of the three-room scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeRoomCells {
    /// Horizontal cell length on walls, meters.
    pub wall: f64,
    /// Number of rows each wall is split into vertically.
    pub wall_rows: usize,
    /// Cell edge on floors and ceilings, meters.
    pub floor: f64,
}

/// Sizing that yields 140 patches.
pub const THREE_ROOM_CELLS: ThreeRoomCells = ThreeRoomCells {
    wall: 2.5,
    wall_rows: 3,
    floor: 2.0,
};

/// Visibility quorum used with the three-room scene: a single unoccluded
/// point pair connects two patches, which keeps the aperture-crossing paths.
pub const THREE_ROOM_VISIBILITY_QUORUM: usize = 1;

fn cells(len: f64, cell: f64) -> usize {
    (len / cell - 1e-9).ceil().max(1.0) as usize
}

/// Adds the rectangle spanned by `e1`, `e2` at `origin`, cut into `n1 × n2`
/// cells and wound so that its normal points along `inward`.
#[allow(clippy::too_many_arguments)]
fn face(b: &mut SceneBuilder, origin: Vec3, e1: Vec3, e2: Vec3, inward: Vec3, n1: usize, n2: usize, m: usize) {
    if e1.cross(&e2).dot(&inward) > 0.0 {
        b.rect(origin, e1, e2, n1, n2, m);
    } else {
        b.rect(origin, e2, e1, n2, n1, m);
    }
}

/// Three rooms in sequence joined by full-height apertures.
///
/// Left room `[0,4]×[0,8]`, middle room `[4,10]×[2,5]`, right room
/// `[6,10]×[5,13]`, all 3 m high. The left/middle aperture spans
/// `y ∈ [2.75, 4.25]` at `x = 4`; the middle/right aperture spans
/// `x ∈ [8.5, 10]` at `y = 5`. Internal walls are zero-thickness pairs of
/// back-to-back polygons.
pub fn three_room_description_with(c: ThreeRoomCells) -> SceneDescription {
    let mut b = SceneBuilder::new();
    let [a_left, a_mid, a_right] = THREE_ROOM_ALPHA;
    let (ml, mm, mr) = (b.material(a_left), b.material(a_mid), b.material(a_right));
    let up = Vec3::z() * 3.0;
    let p = |x: f64, y: f64| Vec3::new(x, y, 0.0);

    // (min corner, extent) of each room's footprint.
    let rooms = [
        (p(0.0, 0.0), p(4.0, 8.0), ml),
        (p(4.0, 2.0), p(6.0, 3.0), mm),
        (p(6.0, 5.0), p(4.0, 8.0), mr),
    ];
    for &(o, ext, m) in &rooms {
        let (ex, ey) = (Vec3::x() * ext.x, Vec3::y() * ext.y);
        let (nx, ny) = (cells(ext.x, c.floor), cells(ext.y, c.floor));
        face(&mut b, o, ex, ey, Vec3::z(), nx, ny, m);
        face(&mut b, o + up, ex, ey, -Vec3::z(), nx, ny, m);
    }

    // Wall segments: start point, horizontal extent, inward normal, material.
    let walls = [
        // Left room.
        (p(0.0, 0.0), Vec3::y() * 8.0, Vec3::x(), ml),
        (p(0.0, 0.0), Vec3::x() * 4.0, Vec3::y(), ml),
        (p(0.0, 8.0), Vec3::x() * 4.0, -Vec3::y(), ml),
        (p(4.0, 0.0), Vec3::y() * 2.75, -Vec3::x(), ml),
        (p(4.0, 4.25), Vec3::y() * 3.75, -Vec3::x(), ml),
        // Middle room.
        (p(4.0, 2.0), Vec3::x() * 6.0, Vec3::y(), mm),
        (p(10.0, 2.0), Vec3::y() * 3.0, -Vec3::x(), mm),
        (p(4.0, 5.0), Vec3::x() * 4.5, -Vec3::y(), mm),
        (p(4.0, 2.0), Vec3::y() * 0.75, Vec3::x(), mm),
        (p(4.0, 4.25), Vec3::y() * 0.75, Vec3::x(), mm),
        // Right room.
        (p(6.0, 5.0), Vec3::y() * 8.0, Vec3::x(), mr),
        (p(10.0, 5.0), Vec3::y() * 8.0, -Vec3::x(), mr),
        (p(6.0, 13.0), Vec3::x() * 4.0, -Vec3::y(), mr),
        (p(6.0, 5.0), Vec3::x() * 2.5, Vec3::y(), mr),
    ];
    for &(o, h, n, m) in &walls {
        face(&mut b, o, h, up, n, cells(h.norm(), c.wall), c.wall_rows, m);
    }

    b.source(THREE_ROOM_SOURCE);
    for l in THREE_ROOM_LISTENERS {
        b.listener(l);
    }
    b.finish()
}

pub fn three_room_description() -> SceneDescription {
    three_room_description_with(THREE_ROOM_CELLS)
}

pub fn three_room() -> Result<Scene> {
    Scene::from_description(three_room_description())
}

/// Which room of the three-room scene contains `(x, y)`, if any.
pub fn three_room_region(x: f64, y: f64) -> Option<usize> {
    if (0.0..=4.0).contains(&x) && (0.0..=8.0).contains(&y) {
        Some(0)
    } else if (4.0..=10.0).contains(&x) && (2.0..=5.0).contains(&y) {
        Some(1)
    } else if (6.0..=10.0).contains(&x) && (5.0..=13.0).contains(&y) {
        Some(2)
    } else {
        None
    }
}
