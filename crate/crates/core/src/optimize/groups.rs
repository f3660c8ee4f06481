//! Partition of the rig into groups of nearby cameras.

use nalgebra::Point3;

use super::OptimizeError;
use crate::geometry::MultiViewRig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraGroup {
    pub id: usize,
    /// Rig indices, in ascending order.
    pub cameras: Vec<usize>,
}

impl CameraGroup {
    pub fn new(id: usize, mut cameras: Vec<usize>) -> Self {
        cameras.sort_unstable();
        Self { id, cameras }
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Position of rig camera `camera` within the group.
    pub fn slot(&self, camera: usize) -> Option<usize> {
        self.cameras.binary_search(&camera).ok()
    }
}

/// Greedy grouping by camera-center distance; see [`group_centers`].
pub fn make_groups(rig: &MultiViewRig, group_size: usize) -> Result<Vec<CameraGroup>, OptimizeError> {
    let centers: Vec<Point3<f64>> = rig.views.iter().map(|v| v.camera.center()).collect();
    group_centers(&centers, group_size)
}

/// Seeds each group with the unassigned camera farthest from every assigned
/// one (the first seed is the camera farthest from the centroid), then adds
/// its `group_size - 1` nearest unassigned cameras. Ties go to the lower
/// index. The last group may be smaller.
pub fn group_centers(centers: &[Point3<f64>], group_size: usize) -> Result<Vec<CameraGroup>, OptimizeError> {
    let n = centers.len();
    if group_size < 2 || group_size > n {
        return Err(OptimizeError::InvalidGroupSize {
            group_size,
            cameras: n,
        });
    }
    let centroid = centers
        .iter()
        .fold(nalgebra::Vector3::zeros(), |acc, c| acc + c.coords)
        / n as f64;
    // distance from each camera to the nearest assigned one
    let mut reach: Vec<f64> = centers.iter().map(|c| (c.coords - centroid).norm()).collect();
    let mut assigned = vec![false; n];
    let mut groups = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let seed = argmax((0..n).filter(|&i| !assigned[i]).map(|i| (i, reach[i])));
        let mut by_distance: Vec<(usize, f64)> = (0..n)
            .filter(|&i| !assigned[i] && i != seed)
            .map(|i| (i, (centers[i] - centers[seed]).norm()))
            .collect();
        by_distance.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut members = vec![seed];
        members.extend(by_distance.iter().take(group_size - 1).map(|&(i, _)| i));
        for &m in &members {
            assigned[m] = true;
            remaining -= 1;
        }
        if groups.is_empty() {
            reach.iter_mut().for_each(|r| *r = f64::INFINITY);
        }
        for i in 0..n {
            for &m in &members {
                reach[i] = reach[i].min((centers[i] - centers[m]).norm());
            }
        }
        if members.len() < group_size {
            log::info!(
                "camera group {} has {} cameras (group size {group_size})",
                groups.len(),
                members.len()
            );
        }
        groups.push(CameraGroup::new(groups.len(), members));
    }
    Ok(groups)
}

fn argmax(items: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (i, v) in items {
        if v > best.1 || best.0 == usize::MAX {
            best = (i, v);
        }
    }
    best.0
}
