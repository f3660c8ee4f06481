//! Silhouette-based mesh cleaning.

use rayon::prelude::*;

use crate::geometry::{CameraView, MultiViewRig};
use crate::mesh::TriangleMesh;

/// What [`clean_mesh`] removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub removed_vertices: usize,
    pub degenerate_triangles: usize,
    pub small_component_triangles: usize,
}

/// Removes vertices that every camera seeing them places outside its
/// silhouette, then degenerate triangles, components with fewer than
/// `min_component_fraction` of the triangles, and unreferenced vertices.
///
/// A camera sees a vertex when it projects in front of the camera and inside
/// the image. Silhouette tests accept the nearest pixel or any of its eight
/// neighbours, so surface points on the rim survive.
pub fn clean_mesh(
    mesh: &TriangleMesh,
    rig: &MultiViewRig,
    min_component_fraction: f64,
) -> (TriangleMesh, CleanReport) {
    let mut report = CleanReport::default();
    let keep: Vec<bool> = mesh
        .vertices
        .par_iter()
        .map(|v| {
            let mut seen = false;
            for view in &rig.views {
                match silhouette_test(view, v) {
                    Some(true) => return true,
                    Some(false) => seen = true,
                    None => {}
                }
            }
            !seen
        })
        .collect();
    report.removed_vertices = keep.iter().filter(|&&k| !k).count();

    let mut triangles: Vec<[u32; 3]> = mesh
        .triangles
        .iter()
        .copied()
        .filter(|t| t.iter().all(|&i| keep[i as usize]))
        .collect();
    let before = triangles.len();
    triangles.retain(|t| {
        t[0] != t[1] && t[1] != t[2] && t[0] != t[2] && {
            let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
            (b - a).cross(&(c - a)).norm_squared() > 0.0
        }
    });
    report.degenerate_triangles = before - triangles.len();

    let before = triangles.len();
    triangles = drop_small_components(triangles, mesh.vertices.len(), min_component_fraction);
    report.small_component_triangles = before - triangles.len();

    let mut out = TriangleMesh::new(mesh.vertices.clone(), triangles);
    out.normals = mesh.normals.clone();
    out.remove_unreferenced_vertices();
    (out, report)
}

/// `Some(inside)` when `view` sees `point`, `None` otherwise.
fn silhouette_test(view: &CameraView, point: &nalgebra::Point3<f64>) -> Option<bool> {
    let p = view.project(point).ok()?;
    let (w, h) = (view.width() as f64, view.height() as f64);
    if !(p.u > -0.5 && p.v > -0.5 && p.u < w - 0.5 && p.v < h - 0.5) {
        return None;
    }
    let (x, y) = (p.u.round() as i64, p.v.round() as i64);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (xx, yy) = (x + dx, y + dy);
            if xx >= 0
                && yy >= 0
                && (xx as f64) < w
                && (yy as f64) < h
                && *view.mask.get(xx as usize, yy as usize)
            {
                return Some(true);
            }
        }
    }
    Some(false)
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[parent[x as usize] as usize];
        parent[x as usize] = p;
        x = p;
    }
    x
}

fn drop_small_components(triangles: Vec<[u32; 3]>, vertices: usize, fraction: f64) -> Vec<[u32; 3]> {
    if triangles.is_empty() {
        return triangles;
    }
    let mut parent: Vec<u32> = (0..vertices as u32).collect();
    for t in &triangles {
        let a = find(&mut parent, t[0]);
        for &v in &t[1..] {
            let b = find(&mut parent, v);
            if a != b {
                parent[b as usize] = a;
            }
        }
    }
    let mut sizes = vec![0usize; vertices];
    let roots: Vec<u32> = triangles.iter().map(|t| find(&mut parent, t[0])).collect();
    for &r in &roots {
        sizes[r as usize] += 1;
    }
    let min = fraction * triangles.len() as f64;
    triangles
        .into_iter()
        .zip(roots)
        .filter(|(_, r)| sizes[*r as usize] as f64 >= min)
        .map(|(t, _)| t)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, DepthMap, Grid, Intrinsics, Mask, PinholeCamera};
    use nalgebra::{Point3, Vector3};

    /// Two cameras on the x and y axes whose masks cover a disc of radius
    /// `r` around the origin.
    fn rig(r: f64) -> MultiViewRig {
        let (w, h) = (64, 64);
        let intr = Intrinsics {
            fx: 64.0,
            fy: 64.0,
            cx: 31.5,
            cy: 31.5,
        };
        let views = [Point3::new(4.0, 0.0, 0.0), Point3::new(0.0, 4.0, 0.0)]
            .into_iter()
            .map(|eye| {
                let cam = PinholeCamera::look_at(intr, eye, Point3::origin(), Vector3::z(), w, h).unwrap();
                let mut mask = Mask::filled(w, h, false);
                for y in 0..h {
                    for x in 0..w {
                        let dir = cam.ray_direction(x as f64, y as f64);
                        let t = -(eye.coords.dot(&dir));
                        let closest = eye + dir * t;
                        mask.set(x, y, closest.coords.norm() < r);
                    }
                }
                let mut depth = DepthMap::empty(w, h);
                for i in mask.foreground_indices() {
                    depth.set(i, 4.0);
                }
                CameraView {
                    camera: cam,
                    image: Grid::filled(w, h, [0.5; 3]),
                    mask,
                    depth,
                }
            })
            .collect();
        MultiViewRig::new(views, Aabb::new([-1.0; 3], [1.0; 3])).unwrap()
    }

    /// Octahedron of radius `r` centred at `c`.
    fn octahedron(c: Vector3<f64>, r: f64) -> TriangleMesh {
        let v = [
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ]
        .map(|d| Point3::from(c + d * r))
        .to_vec();
        let t = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        TriangleMesh::new(v, t)
    }

    #[test]
    fn mesh_inside_all_silhouettes_is_unchanged() {
        let mesh = octahedron(Vector3::zeros(), 0.3);
        let (out, report) = clean_mesh(&mesh, &rig(0.6), 0.001);
        assert_eq!(out, mesh);
        assert_eq!(report, CleanReport::default());
    }

    #[test]
    fn floating_blob_outside_the_masks_is_removed() {
        let mut mesh = octahedron(Vector3::zeros(), 0.3);
        mesh.append(&octahedron(Vector3::new(0.0, 0.0, 0.8), 0.1));
        let (out, report) = clean_mesh(&mesh, &rig(0.6), 0.001);
        assert_eq!(out, octahedron(Vector3::zeros(), 0.3));
        assert_eq!(report.removed_vertices, 6);
    }

    /// `n x n` quads on the plane x = 0 spanning `[-0.2, 0.2]` in y and z.
    fn patch(n: usize) -> TriangleMesh {
        let mut mesh = TriangleMesh::default();
        for j in 0..=n {
            for i in 0..=n {
                let s = |k: usize| -0.2 + 0.4 * k as f64 / n as f64;
                mesh.vertices.push(Point3::new(0.0, s(i), s(j)));
            }
        }
        let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                mesh.triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                mesh.triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        mesh
    }

    #[test]
    fn tiny_component_is_dropped() {
        let mut mesh = patch(80);
        let n = mesh.triangles.len();
        let c = Point3::new(0.1, 0.1, 0.1);
        let mut speck = TriangleMesh::new(vec![c], Vec::new());
        for k in 0..6 {
            let a = k as f64;
            speck
                .vertices
                .push(c + Vector3::new(0.0, a.cos(), a.sin()) * 0.01);
        }
        for k in 1..6u32 {
            speck.triangles.push([0, k, k + 1]);
        }
        mesh.append(&speck);
        let (out, report) = clean_mesh(&mesh, &rig(0.6), 0.001);
        assert_eq!(report.small_component_triangles, 5);
        assert_eq!(out.triangles.len(), n);
        assert_eq!(out.vertices.len(), 81 * 81);
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let mut mesh = octahedron(Vector3::zeros(), 0.3);
        mesh.vertices.push(mesh.vertices[0]);
        mesh.triangles.push([0, 6, 2]);
        let (out, report) = clean_mesh(&mesh, &rig(0.6), 0.001);
        assert_eq!(report.degenerate_triangles, 1);
        assert_eq!(out.triangles.len(), 8);
        assert_eq!(out.vertices.len(), 6);
    }
}
