//! Area-weighted surface sampling.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;
use crate::mesh::{PointCloud, TriangleMesh};

/// `count` points distributed uniformly over the surface of `mesh` (each
/// triangle is chosen with probability proportional to its area). The same
/// seed always yields the same cloud. Point `k` records its source triangle.
pub fn sample_mesh(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<PointCloud, MetricsError> {
    if mesh.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    if count == 0 {
        return Err(MetricsError::InvalidParams("sample count must be >= 1".into()));
    }
    mesh.validate().map_err(MetricsError::InvalidMesh)?;
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MetricsError::InvalidMesh("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let su = u.sqrt();
        let (wa, wb, wc) = (1.0 - su, su * (1.0 - v), su * v);
        let [a, b, c] = mesh.corners(t);
        points.push(Point3::from(a.coords * wa + b.coords * wb + c.coords * wc));
        faces.push(t as u32);
    }
    Ok(PointCloud {
        points,
        faces: Some(faces),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> TriangleMesh {
        // One half of the square, the other half split into two quarters.
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.5, 0.5, 0.0),
            ],
            vec![[0, 1, 2], [2, 3, 4], [3, 0, 4]],
        )
    }

    #[test]
    fn density_follows_area() {
        let mesh = unit_square();
        let n = 100_000;
        let cloud = sample_mesh(&mesh, n, 11).unwrap();
        let mut counts = [0usize; 3];
        for &f in cloud.faces.as_ref().unwrap() {
            counts[f as usize] += 1;
        }
        let areas = [0.5, 0.25, 0.25];
        for (c, a) in counts.iter().zip(areas) {
            let expected = a * n as f64;
            assert!((*c as f64 - expected).abs() < 0.02 * expected, "{counts:?}");
        }
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_stay_inside_a_single_triangle() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(2.0, 0.0, 1.0),
                Point3::new(0.0, 3.0, 1.0),
            ],
            vec![[0, 1, 2]],
        );
        for p in sample_mesh(&mesh, 2000, 5).unwrap().points {
            assert!((p.z - 1.0).abs() < 1e-15);
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x / 2.0 + p.y / 3.0 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let mesh = unit_square();
        assert_eq!(
            sample_mesh(&mesh, 500, 9).unwrap(),
            sample_mesh(&mesh, 500, 9).unwrap()
        );
        assert_ne!(
            sample_mesh(&mesh, 500, 9).unwrap(),
            sample_mesh(&mesh, 500, 10).unwrap()
        );
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(matches!(
            sample_mesh(&TriangleMesh::default(), 10, 0),
            Err(MetricsError::EmptyMesh)
        ));
    }
}
