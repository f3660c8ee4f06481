//! Iso-surface extraction from a [`TsdfVolume`].
//!
//! The 256-case triangle table is derived at first use rather than typed in.
//! Every cube face is walked counter-clockwise as seen from outside the cube;
//! each inside run of corners along that walk is cut off by one segment
//! between its entering and leaving edge crossings. Faces with two diagonal
//! inside corners therefore always separate them, so neighbouring cells agree
//! on the shared face and the extracted surface is closed. Segments chain
//! across faces into loops. A loop is triangulated without chords between
//! two crossings on the same cube face: such a chord would lie in the face
//! and could coincide with one from the neighbouring cell.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::TsdfVolume;
use crate::mesh::TriangleMesh;

/// Cube corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as `(lower corner, axis)`; the other end is
/// `lower | 1 << axis`.
fn cube_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                edges.push((c, axis));
            }
        }
    }
    edges
}

fn edge_between(edges: &[(usize, usize)], a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    edges
        .iter()
        .position(|&e| e == (lo, axis))
        .expect("corners share an edge")
}

/// Corners of each face in counter-clockwise order seen from outside.
fn faces_ccw() -> Vec<[usize; 4]> {
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for side in 0..2 {
            let sign = if side == 1 { 1.0 } else { -1.0 };
            let (mut a, mut b) = ((axis + 1) % 3, (axis + 2) % 3);
            if sign < 0.0 {
                std::mem::swap(&mut a, &mut b);
            }
            let mut corners: Vec<usize> = (0..8).filter(|&c| corner_offset(c)[axis] == side).collect();
            let angle = |c: usize| {
                let o = corner_offset(c);
                (o[b] as f64 - 0.5).atan2(o[a] as f64 - 0.5)
            };
            corners.sort_by(|&x, &y| angle(x).total_cmp(&angle(y)));
            faces.push([corners[0], corners[1], corners[2], corners[3]]);
        }
    }
    faces
}

/// Triangles (as cube edge ids) for one inside-corner configuration, with
/// the winding returned by the face walk.
fn case_triangles(config: usize, edges: &[(usize, usize)], faces: &[[usize; 4]]) -> Vec<[u8; 3]> {
    let inside = |c: usize| config & (1 << c) != 0;
    let mut next = [usize::MAX; 12];
    for face in faces {
        // (edge id, entering the inside region) in walk order.
        let mut crossings = Vec::with_capacity(4);
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            if inside(a) != inside(b) {
                crossings.push((edge_between(edges, a, b), inside(b)));
            }
        }
        let n = crossings.len();
        for p in 0..n {
            let (enter, entering) = crossings[p];
            if entering {
                let (leave, _) = crossings[(p + 1) % n];
                next[leave] = enter;
            }
        }
    }
    let mut used = [false; 12];
    let mut tris = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !used[e] {
            used[e] = true;
            ring.push(e as u8);
            e = next[e];
        }
        triangulate_loop(&ring, edges, &mut tris);
    }
    tris
}

/// Faces (axis, side) containing cube edge `e`.
fn edge_faces(edges: &[(usize, usize)], e: u8) -> [(usize, usize); 2] {
    let (c, axis) = edges[e as usize];
    let o = corner_offset(c);
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    [(a, o[a]), (b, o[b])]
}

/// Triangulates `ring`, preserving its orientation, using only chords whose
/// ends share no cube face. The choice is the lexicographically first valid
/// one, found by interval dynamic programming.
fn triangulate_loop(ring: &[u8], edges: &[(usize, usize)], tris: &mut Vec<[u8; 3]>) {
    let n = ring.len();
    let chord_ok = |i: usize, j: usize| {
        let (fi, fj) = (edge_faces(edges, ring[i]), edge_faces(edges, ring[j]));
        j == i + 1 || (i == 0 && j == n - 1) || !fi.iter().any(|f| fj.contains(f))
    };
    // split[i][j]: apex k such that (i, k, j) starts a valid triangulation of
    // ring[i..=j] closed by the chord (i, j).
    let mut split = vec![vec![None; n]; n];
    for len in 2..n {
        for i in 0..n - len {
            let j = i + len;
            if !chord_ok(i, j) {
                continue;
            }
            split[i][j] = (i + 1..j)
                .find(|&k| (k == i + 1 || split[i][k].is_some()) && (k + 1 == j || split[k][j].is_some()));
        }
    }
    if split[0][n - 1].is_none() {
        log::warn!("no face-free triangulation for a {n}-loop, using a fan");
        for k in 1..n - 1 {
            tris.push([ring[0], ring[k], ring[k + 1]]);
        }
        return;
    }
    let mut stack = vec![(0, n - 1)];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let k = split[i][j].expect("checked above");
        tris.push([ring[i], ring[k], ring[j]]);
        stack.push((k, j));
        stack.push((i, k));
    }
}

struct CaseTable {
    edges: Vec<(usize, usize)>,
    cases: Vec<Vec<[u8; 3]>>,
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let edges = cube_edges();
        let faces = faces_ccw();
        let mut cases: Vec<Vec<[u8; 3]>> = (0..256).map(|c| case_triangles(c, &edges, &faces)).collect();

        // Fix the global winding so normals point away from inside corners,
        // judged on the single-corner case.
        let mid = |e: u8| {
            let (c, axis) = edges[e as usize];
            let mut p = corner_offset(c).map(|v| v as f64);
            p[axis] += 0.5;
            Vector3::from(p)
        };
        let t = cases[1][0];
        let (a, b, c) = (mid(t[0]), mid(t[1]), mid(t[2]));
        let normal = (b - a).cross(&(c - a));
        if normal.dot(&((a + b + c) / 3.0)) < 0.0 {
            for tris in &mut cases {
                for t in tris.iter_mut() {
                    t.swap(1, 2);
                }
            }
        }
        CaseTable { edges, cases }
    })
}

/// Number of triangles the table emits for each of the 256 configurations.
pub fn case_triangle_counts() -> Vec<usize> {
    case_table().cases.iter().map(Vec::len).collect()
}

/// Extracts the zero level set. Only cells whose eight corners are all
/// observed contribute. Vertices are shared between cells and triangles are
/// ordered by cell index; normals point toward positive values (free space).
/// Returns an empty mesh when no observed cell straddles zero.
pub fn marching_cubes(volume: &TsdfVolume) -> TriangleMesh {
    let table = case_table();
    let [nx, ny, nz] = volume.dims();
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::default();
    }
    let key = |i: usize, j: usize, k: usize, axis: usize| (volume.index(i, j, k) * 3 + axis) as u64;

    // Per z-layer of cells: triangles as global edge keys, in cell order.
    let layers: Vec<Vec<[u64; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            let mut values = [0.0; 8];
            for j in 0..ny - 1 {
                'cell: for i in 0..nx - 1 {
                    let mut config = 0;
                    for (c, value) in values.iter_mut().enumerate() {
                        let o = corner_offset(c);
                        match volume.tsdf(volume.index(i + o[0], j + o[1], k + o[2])) {
                            Some(v) => *value = v,
                            None => continue 'cell,
                        }
                        if *value < 0.0 {
                            config |= 1 << c;
                        }
                    }
                    for t in &table.cases[config] {
                        out.push(t.map(|e| {
                            let (c, axis) = table.edges[e as usize];
                            let o = corner_offset(c);
                            key(i + o[0], j + o[1], k + o[2], axis)
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    let [sx, sy] = [nx, nx * ny];
    for tri in layers.into_iter().flatten() {
        let t = tri.map(|k| {
            *ids.entry(k).or_insert_with(|| {
                let (idx, axis) = ((k / 3) as usize, (k % 3) as usize);
                let (i, j, kk) = (idx % sx, (idx % sy) / sx, idx / sy);
                let mut o = [i, j, kk];
                let a = volume.center(i, j, kk);
                o[axis] += 1;
                let b = volume.center(o[0], o[1], o[2]);
                let va = volume.tsdf(idx).expect("observed corner");
                let vb = volume
                    .tsdf(volume.index(o[0], o[1], o[2]))
                    .expect("observed corner");
                mesh.vertices.push(interpolate(a, b, va, vb));
                (mesh.vertices.len() - 1) as u32
            })
        });
        mesh.triangles.push(t);
    }
    if mesh.triangles.is_empty() {
        log::warn!("marching cubes: no observed sign change, mesh is empty");
    }
    mesh
}

fn interpolate(a: Point3<f64>, b: Point3<f64>, va: f64, vb: f64) -> Point3<f64> {
    let t = if va == vb {
        0.5
    } else {
        (va / (va - vb)).clamp(0.0, 1.0)
    };
    a + (b - a) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_volume(radius: f64, res: usize) -> TsdfVolume {
        let voxel = 2.4 * radius / res as f64;
        let origin = Point3::new(-1.2 * radius + 0.013, -1.2 * radius, -1.2 * radius - 0.007);
        TsdfVolume::from_fn(origin, voxel, [res; 3], 3.0 * voxel, |p| p.coords.norm() - radius)
    }

    #[test]
    fn table_is_complementary_and_bounded() {
        let counts = case_triangle_counts();
        assert_eq!(counts[0], 0);
        assert_eq!(counts[255], 0);
        assert_eq!(counts[1], 1);
        assert!(counts.iter().all(|&c| c <= 12));
        for (c, &n) in counts.iter().enumerate() {
            assert!(n > 0 || c == 0 || c == 255);
        }
    }

    #[test]
    fn sphere_vertices_lie_on_the_sphere() {
        let radius = 0.5;
        let vol = sphere_volume(radius, 48);
        let mesh = marching_cubes(&vol);
        assert!(!mesh.is_empty());
        let worst = mesh
            .vertices
            .iter()
            .map(|v| (v.coords.norm() - radius).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.5 * vol.voxel_size(), "worst radial error {worst}");
    }

    #[test]
    fn sphere_mesh_is_closed_and_outward() {
        let mesh = marching_cubes(&sphere_volume(0.5, 40));
        assert!(mesh.is_watertight());
        assert!(mesh.is_consistently_oriented());
        let volume: f64 = mesh
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| mesh.vertices[i as usize].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        let expected = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!((volume - expected).abs() < 0.02 * expected, "volume {volume}");
    }

    #[test]
    fn every_single_cell_case_closes_inside_a_padded_block() {
        // A 4x4x4 grid whose middle 2x2x2 block takes every sign pattern,
        // surrounded by positive values, must give a closed surface.
        for config in 1..255usize {
            let vol = TsdfVolume::from_fn(Point3::origin(), 1.0, [4, 4, 4], 3.0, |p| {
                let idx = [p.x, p.y, p.z].map(|v| (v - 0.5) as usize);
                if idx.iter().all(|&v| v == 1 || v == 2) {
                    let c = (idx[0] - 1) | (idx[1] - 1) << 1 | (idx[2] - 1) << 2;
                    if config & (1 << c) != 0 {
                        return -1.0 - 0.1 * c as f64;
                    }
                }
                1.0 + 0.05 * (idx[0] + 2 * idx[1] + 3 * idx[2]) as f64
            });
            let mesh = marching_cubes(&vol);
            assert!(mesh.is_watertight(), "config {config}");
            assert!(mesh.is_consistently_oriented(), "config {config}");
        }
    }

    proptest::proptest! {
        #[test]
        fn random_fields_give_closed_oriented_surfaces(
            inner in proptest::collection::vec(-1.0f64..1.0, 5 * 5 * 5),
        ) {
            let vol = TsdfVolume::from_fn(Point3::origin(), 1.0, [7, 7, 7], 3.0, |p| {
                let idx = [p.x, p.y, p.z].map(|v| (v - 0.5) as usize);
                if idx.iter().all(|&v| (1..=5).contains(&v)) {
                    let v = inner[(idx[0] - 1) + 5 * (idx[1] - 1) + 25 * (idx[2] - 1)];
                    if v != 0.0 { v } else { 0.5 }
                } else {
                    1.0
                }
            });
            let mesh = marching_cubes(&vol);
            proptest::prop_assert!(mesh.is_empty() || mesh.is_watertight());
            proptest::prop_assert!(mesh.is_consistently_oriented());
        }
    }

    #[test]
    fn all_positive_field_gives_an_empty_mesh() {
        let vol = TsdfVolume::from_fn(Point3::origin(), 0.1, [5, 5, 5], 0.3, |_| 0.2);
        assert!(marching_cubes(&vol).is_empty());
    }

    #[test]
    fn unobserved_cells_are_skipped() {
        let vol = TsdfVolume::new(Point3::origin(), 0.1, [5, 5, 5], 0.3);
        assert!(marching_cubes(&vol).is_empty());
    }

    #[test]
    fn output_is_deterministic() {
        let vol = sphere_volume(0.4, 32);
        assert_eq!(marching_cubes(&vol), marching_cubes(&vol));
    }
}
