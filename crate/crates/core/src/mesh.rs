//! Indexed triangle meshes and point clouds.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::geometry::Aabb;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks index ranges and vertex finiteness.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(format!("triangle {t:?} references a vertex >= {n}"));
        }
        if self
            .vertices
            .iter()
            .any(|v| !v.coords.iter().all(|c| c.is_finite()))
        {
            return Err("non-finite vertex".into());
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.vertices.len() {
                return Err("normal count differs from vertex count".into());
            }
        }
        Ok(())
    }

    #[inline]
    pub fn corners(&self, tri: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal `(b - a) x (c - a)`; its norm is twice the area.
    #[inline]
    pub fn face_cross(&self, tri: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self, tri: usize) -> f64 {
        0.5 * self.face_cross(tri).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let first = self.vertices.first()?;
        let mut min = first.coords;
        let mut max = first.coords;
        for v in &self.vertices {
            min = min.inf(&v.coords);
            max = max.sup(&v.coords);
        }
        Some(Aabb::new(min.into(), max.into()))
    }

    /// Area-weighted vertex normals, pointing along the triangle winding.
    pub fn compute_normals(&mut self) {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for t in 0..self.triangles.len() {
            let n = self.face_cross(t);
            for &i in &self.triangles[t] {
                acc[i as usize] += n;
            }
        }
        for n in &mut acc {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.normals = Some(acc);
    }

    /// Number of undirected edges not shared by exactly two triangles.
    /// Zero means the mesh is closed (watertight).
    pub fn boundary_edge_count(&self) -> usize {
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }

    /// True when every directed edge appears once and its reverse once,
    /// i.e. the surface is closed and consistently oriented.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.boundary_edge_count() == 0
    }

    /// Drops vertices not referenced by any triangle, keeping the order of
    /// the remaining ones.
    pub fn remove_unreferenced_vertices(&mut self) {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut next = 0u32;
        for (r, &u) in remap.iter_mut().zip(&used) {
            if u {
                *r = next;
                next += 1;
            }
        }
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                *i = remap[*i as usize];
            }
        }
        let mut k = 0;
        self.vertices.retain(|_| {
            k += 1;
            used[k - 1]
        });
        if let Some(normals) = &mut self.normals {
            let mut k = 0;
            normals.retain(|_| {
                k += 1;
                used[k - 1]
            });
        }
    }

    /// Appends `other`, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + off, t[1] + off, t[2] + off]),
        );
        self.normals = None;
    }
}

/// Ray/triangle hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit {
    pub t: f64,
    pub triangle: usize,
}

/// Moller-Trumbore intersection, two-sided. Returns the ray parameter.
#[inline]
pub fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, [a, b, c]: [Point3<f64>; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

#[derive(Debug, Clone)]
enum BvhNode {
    Leaf { bounds: Aabb, start: u32, end: u32 },
    Inner { bounds: Aabb, left: u32, right: u32 },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split bounding volume hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    mesh: TriangleMesh,
    order: Vec<u32>,
    nodes: Vec<BvhNode>,
}

const LEAF_SIZE: usize = 4;

impl MeshBvh {
    pub fn build(mesh: TriangleMesh) -> Self {
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let centroids: Vec<Point3<f64>> = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            Self::build_node(&mesh, &centroids, &mut order, 0, n, &mut nodes);
        }
        Self { mesh, order, nodes }
    }

    fn tri_bounds(mesh: &TriangleMesh, ids: &[u32]) -> Aabb {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for &t in ids {
            for p in mesh.corners(t as usize) {
                min = min.inf(&p.coords);
                max = max.sup(&p.coords);
            }
        }
        Aabb::new(min.into(), max.into())
    }

    fn build_node(
        mesh: &TriangleMesh,
        centroids: &[Point3<f64>],
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<BvhNode>,
    ) -> u32 {
        let bounds = Self::tri_bounds(mesh, &order[start..end]);
        let id = nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            nodes.push(BvhNode::Leaf {
                bounds,
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let ext = bounds.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
        });
        nodes.push(BvhNode::Leaf {
            bounds,
            start: 0,
            end: 0,
        });
        let left = Self::build_node(mesh, centroids, order, start, mid, nodes);
        let right = Self::build_node(mesh, centroids, order, mid, end, nodes);
        nodes[id as usize] = BvhNode::Inner { bounds, left, right };
        id
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| *n.bounds())
    }

    /// Nearest hit with `t > 0`.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<MeshHit> {
        let mut best: Option<MeshHit> = None;
        if self.nodes.is_empty() {
            return None;
        }
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            let Some((t0, _)) = node.bounds().intersect_ray(origin, dir) else {
                continue;
            };
            if best.is_some_and(|b| t0 > b.t) {
                continue;
            }
            match node {
                BvhNode::Leaf { start, end, .. } => {
                    for &tri in &self.order[*start as usize..*end as usize] {
                        if let Some(t) = ray_triangle(origin, dir, self.mesh.corners(tri as usize)) {
                            if best.is_none_or(|b| t < b.t) {
                                best = Some(MeshHit {
                                    t,
                                    triangle: tri as usize,
                                });
                            }
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        best
    }

    /// Number of crossings of the ray with the surface (for inside tests).
    pub fn count_crossings(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> usize {
        (0..self.mesh.triangles.len())
            .filter(|&t| ray_triangle(origin, dir, self.mesh.corners(t)).is_some())
            .count()
    }
}

/// Axis-aligned box as a closed triangle mesh with outward winding.
pub fn box_mesh(center: [f64; 3], half: [f64; 3]) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(8);
    for k in 0..8 {
        let s = |bit: usize| if (k >> bit) & 1 == 1 { 1.0 } else { -1.0 };
        vertices.push(Point3::new(
            center[0] + s(0) * half[0],
            center[1] + s(1) * half[1],
            center[2] + s(2) * half[2],
        ));
    }
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(vertices, triangles)
}

/// UV sphere with outward winding.
pub fn uv_sphere(center: [f64; 3], radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let c = Point3::from(center);
    let mut vertices = vec![c + Vector3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            vertices.push(
                c + radius * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
            );
        }
    }
    vertices.push(c - Vector3::new(0.0, 0.0, radius));
    let south = (vertices.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut triangles = Vec::new();
    for j in 0..slices {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
        triangles.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, cc, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, cc, d]);
            triangles.push([a, d, b]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Finite 3D point set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Source face of each point, when sampled from a mesh.
    pub faces: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points, faces: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.coords.iter().all(|c| c.is_finite()))
    }
}
