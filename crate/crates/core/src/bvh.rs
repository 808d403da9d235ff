//! Bounding-volume hierarchy over scene patches (median split).

use crate::scene::{Patch, Ray, Vec3, HIT_EPS};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `[start, end)` into `order`. Inner: children indices.
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(patches: &[Patch]) -> Bvh {
        let boxes: Vec<(Vec3, Vec3)> = patches.iter().map(Patch::aabb).collect();
        let centers: Vec<Vec3> = boxes.iter().map(|(lo, hi)| (lo + hi) * 0.5).collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: (0..patches.len()).collect(),
        };
        bvh.split(&boxes, &centers, 0, patches.len());
        bvh
    }

    fn split(&mut self, boxes: &[(Vec3, Vec3)], centers: &[Vec3], start: usize, end: usize) -> usize {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&boxes[i].0);
            hi = hi.sup(&boxes[i].1);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let extent = hi - lo;
        let axis = extent.imax();
        let mid = (start + end) / 2;
        self.order[start..end].sort_by(|&a, &b| {
            centers[a][axis]
                .total_cmp(&centers[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.split(boxes, centers, start, mid);
        let right = self.split(boxes, centers, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.nodes
            .first()
            .map(|n| (n.lo, n.hi))
            .unwrap_or((Vec3::zeros(), Vec3::zeros()))
    }

    /// Nearest patch hit with distance below `t_max`. Hits closer than
    /// [`HIT_EPS`] to each other are tied and resolved by lowest index.
    pub fn nearest(&self, patches: &[Patch], ray: &Ray, front_only: bool, t_max: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let limit = best.map_or(t_max, |(_, t)| t + HIT_EPS);
            if !slab(&node.lo, &node.hi, ray, &inv, limit) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let Some(t) = patches[i].intersect(ray, front_only) else {
                            continue;
                        };
                        if t >= t_max {
                            continue;
                        }
                        best = match best {
                            None => Some((i, t)),
                            Some((j, tb)) => {
                                if t < tb - HIT_EPS || ((t - tb).abs() <= HIT_EPS && i < j) {
                                    Some((i, t))
                                } else {
                                    Some((j, tb))
                                }
                            }
                        };
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

fn slab(lo: &Vec3, hi: &Vec3, ray: &Ray, inv: &Vec3, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for a in 0..3 {
        let pad = HIT_EPS * 10.0;
        let (l, h) = (lo[a] - pad, hi[a] + pad);
        if !inv[a].is_finite() {
            if ray.origin[a] < l || ray.origin[a] > h {
                return false;
            }
            continue;
        }
        let mut ta = (l - ray.origin[a]) * inv[a];
        let mut tb = (h - ray.origin[a]) * inv[a];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}
