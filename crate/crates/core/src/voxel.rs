//! Discretized workspace: voxel indexing, occupancy, circumscribing spheres.
//!
//! Voxel ids use a linear x-fastest layout, `id = ix + nx * (iy + ny * iz)`.
//! The layout is part of the roadmap file format because ids appear in the
//! voxel collision map.

use fixedbitset::FixedBitSet;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VoxelId = u32;

/// Axis-aligned grid of cubic voxels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub min_corner: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(min_corner: [f64; 3], voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        let grid = Self {
            min_corner,
            voxel_size,
            dims,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid covering `extent` meters from `min_corner`; partial voxels at the
    /// upper end are rounded up to a whole voxel.
    pub fn covering(min_corner: [f64; 3], extent: [f64; 3], voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || extent.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Input(format!(
                "voxel size {voxel_size} and workspace extent {extent:?} must be positive"
            )));
        }
        // Shave a rounding hair so that 2.1 / 0.06 gives 35 rather than 36.
        let count = |e: f64| ((e / voxel_size) - 1e-9).ceil().max(1.0) as usize;
        Self::new(
            min_corner,
            voxel_size,
            [count(extent[0]), count(extent[1]), count(extent[2])],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return Err(Error::Input(format!(
                "voxel size must be positive, got {}",
                self.voxel_size
            )));
        }
        if self.dims.iter().any(|d| *d == 0) {
            return Err(Error::Input(format!(
                "grid dims must be >= 1, got {:?}",
                self.dims
            )));
        }
        if self.min_corner.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("grid min corner must be finite".into()));
        }
        let total = self.dims.iter().try_fold(1u64, |acc, d| acc.checked_mul(*d as u64));
        match total {
            Some(t) if t <= VoxelId::MAX as u64 => Ok(()),
            _ => Err(Error::Input(format!(
                "grid {:?} has more voxels than the id type can address",
                self.dims
            ))),
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn max_corner(&self) -> [f64; 3] {
        let mut max = self.min_corner;
        for (axis, m) in max.iter_mut().enumerate() {
            *m += self.dims[axis] as f64 * self.voxel_size;
        }
        max
    }

    /// Radius of the sphere circumscribing one voxel cube.
    pub fn circumscribing_radius(&self) -> f64 {
        self.voxel_size * 3f64.sqrt() / 2.0
    }

    pub fn cell_of(&self, point: &Point3<f64>) -> Option<[usize; 3]> {
        let mut cell = [0usize; 3];
        for axis in 0..3 {
            let f = ((point[axis] - self.min_corner[axis]) / self.voxel_size).floor();
            if !(f >= 0.0) || f >= self.dims[axis] as f64 {
                return None;
            }
            cell[axis] = f as usize;
        }
        Some(cell)
    }

    pub fn id_of_cell(&self, cell: [usize; 3]) -> VoxelId {
        (cell[0] + self.dims[0] * (cell[1] + self.dims[1] * cell[2])) as VoxelId
    }

    pub fn cell_of_id(&self, id: VoxelId) -> [usize; 3] {
        let id = id as usize;
        let (nx, ny) = (self.dims[0], self.dims[1]);
        [id % nx, (id / nx) % ny, id / (nx * ny)]
    }

    /// Voxel containing `point`, or `None` when it lies outside the grid.
    /// Points on the upper boundary are outside.
    pub fn voxel_of(&self, point: &Point3<f64>) -> Option<VoxelId> {
        self.cell_of(point).map(|c| self.id_of_cell(c))
    }

    pub fn voxel_center(&self, id: VoxelId) -> Point3<f64> {
        let cell = self.cell_of_id(id);
        Point3::new(
            self.min_corner[0] + (cell[0] as f64 + 0.5) * self.voxel_size,
            self.min_corner[1] + (cell[1] as f64 + 0.5) * self.voxel_size,
            self.min_corner[2] + (cell[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    pub fn circumscribing_sphere(&self, id: VoxelId) -> Result<(Point3<f64>, f64)> {
        if id as usize >= self.voxel_count() {
            return Err(Error::Input(format!(
                "voxel id {id} out of range for {} voxels",
                self.voxel_count()
            )));
        }
        Ok((self.voxel_center(id), self.circumscribing_radius()))
    }

    /// Calls `visit` for every voxel whose circumscribing sphere intersects
    /// the sphere at `center` with radius `radius` (strict overlap). Stops
    /// early when `visit` returns `true`; the return value reports that.
    pub fn visit_overlapping(
        &self,
        center: &Point3<f64>,
        radius: f64,
        mut visit: impl FnMut(VoxelId) -> bool,
    ) -> bool {
        let reach = radius + self.circumscribing_radius();
        let reach_sq = reach * reach;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for axis in 0..3 {
            let a = ((center[axis] - reach - self.min_corner[axis]) / self.voxel_size).floor();
            let b = ((center[axis] + reach - self.min_corner[axis]) / self.voxel_size).floor();
            let n = self.dims[axis] as f64;
            if b < 0.0 || a >= n {
                return false;
            }
            lo[axis] = a.max(0.0) as usize;
            hi[axis] = b.min(n - 1.0) as usize;
        }
        let s = self.voxel_size;
        for iz in lo[2]..=hi[2] {
            let dz = self.min_corner[2] + (iz as f64 + 0.5) * s - center[2];
            for iy in lo[1]..=hi[1] {
                let dy = self.min_corner[1] + (iy as f64 + 0.5) * s - center[1];
                let row = self.dims[0] * (iy + self.dims[1] * iz);
                for ix in lo[0]..=hi[0] {
                    let dx = self.min_corner[0] + (ix as f64 + 0.5) * s - center[0];
                    if dx * dx + dy * dy + dz * dz < reach_sq && visit((ix + row) as VoxelId) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Little-endian encoding of the grid parameters, fed into compatibility hashes.
    pub(crate) fn fingerprint_bytes(&self, out: &mut Vec<u8>) {
        for c in self.min_corner {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&self.voxel_size.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
}

/// Set of active voxel ids, stored as a bit array over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySet {
    grid: VoxelGrid,
    bits: FixedBitSet,
    dropped: usize,
}

impl OccupancySet {
    pub fn empty(grid: &VoxelGrid) -> Self {
        Self {
            grid: *grid,
            bits: FixedBitSet::with_capacity(grid.voxel_count()),
            dropped: 0,
        }
    }

    pub fn full(grid: &VoxelGrid) -> Self {
        let mut set = Self::empty(grid);
        set.bits.insert_range(..);
        set
    }

    /// Marks every voxel containing a point; points outside the grid are
    /// dropped and counted.
    pub fn from_points<'a>(grid: &VoxelGrid, points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut set = Self::empty(grid);
        for p in points {
            match grid.voxel_of(p) {
                Some(id) => set.bits.insert(id as usize),
                None => set.dropped += 1,
            }
        }
        set
    }

    pub fn from_ids(grid: &VoxelGrid, ids: impl IntoIterator<Item = VoxelId>) -> Result<Self> {
        let mut set = Self::empty(grid);
        for id in ids {
            set.insert(id)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: VoxelId) -> Result<()> {
        if id as usize >= self.bits.len() {
            return Err(Error::Input(format!(
                "voxel id {id} out of range for {} voxels",
                self.bits.len()
            )));
        }
        self.bits.insert(id as usize);
        Ok(())
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn contains(&self, id: VoxelId) -> bool {
        self.bits.contains(id as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    /// Points that fell outside the grid when built with [`from_points`](Self::from_points).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn ids(&self) -> impl Iterator<Item = VoxelId> + '_ {
        self.bits.ones().map(|i| i as VoxelId)
    }
}

pub(crate) fn point(v: [f64; 3]) -> Point3<f64> {
    Point3::from(Vector3::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_grid() -> VoxelGrid {
        VoxelGrid::covering([-1.05, -1.05, 0.0], [2.1, 2.1, 1.9], 0.06).unwrap()
    }

    #[test]
    fn workspace_dims() {
        assert_eq!(desk_grid().dims, [35, 35, 32]);
    }

    #[test]
    fn voxel_of_min_corner_is_zero() {
        let g = desk_grid();
        assert_eq!(g.voxel_of(&point(g.min_corner)), Some(0));
    }

    #[test]
    fn voxel_of_worked_example() {
        let g = desk_grid();
        // floor(1.05 / 0.06) = 17 in x and y, floor(0.03 / 0.06) = 0 in z.
        let expected = 17 + 35 * (17 + 35 * 0);
        assert_eq!(expected, 612);
        assert_eq!(g.voxel_of(&Point3::new(0.0, 0.0, 0.03)), Some(612));
    }

    #[test]
    fn upper_boundary_is_out_of_bounds() {
        let g = desk_grid();
        let max = g.max_corner();
        assert_eq!(g.voxel_of(&point(max)), None);
        assert_eq!(
            g.voxel_of(&Point3::new(max[0] + 1e-6, 0.0, 0.5)),
            None
        );
        assert_eq!(
            g.voxel_of(&Point3::new(0.0, 0.0, -1e-6)),
            None
        );
    }

    #[test]
    fn circumscribing_sphere_of_first_and_last() {
        let g = desk_grid();
        let (c, r) = g.circumscribing_sphere(0).unwrap();
        assert!((c - Point3::new(-1.02, -1.02, 0.03)).norm() < 1e-12);
        assert!((r - 0.06 * 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((r - 0.05196).abs() < 1e-5);

        let last = (g.voxel_count() - 1) as VoxelId;
        let (c, r2) = g.circumscribing_sphere(last).unwrap();
        let max = g.max_corner();
        for axis in 0..3 {
            assert!((c[axis] - (max[axis] - 0.03)).abs() < 1e-12);
        }
        assert_eq!(r, r2);
        assert!(g.circumscribing_sphere(last + 1).is_err());
    }

    #[test]
    fn center_round_trip_every_id() {
        let g = desk_grid();
        for id in 0..g.voxel_count() as VoxelId {
            assert_eq!(g.voxel_of(&g.voxel_center(id)), Some(id));
        }
    }

    #[test]
    fn occupancy_dedups_and_drops() {
        let g = desk_grid();
        let pts = [
            Point3::new(0.0, 0.0, 0.03),
            Point3::new(0.01, 0.01, 0.04),
            Point3::new(5.0, 0.0, 0.0),
        ];
        let occ = OccupancySet::from_points(&g, pts.iter());
        assert_eq!(occ.len(), 1);
        assert!(occ.contains(612));
        assert_eq!(occ.dropped(), 1);
        assert!(OccupancySet::from_points(&g, [].iter()).is_empty());
    }

    #[test]
    fn insert_rejects_out_of_range() {
        let g = VoxelGrid::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
        let mut occ = OccupancySet::empty(&g);
        assert!(occ.insert(7).is_ok());
        assert!(occ.insert(8).is_err());
        assert_eq!(OccupancySet::full(&g).len(), 8);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(VoxelGrid::new([0.0; 3], 0.0, [1, 1, 1]).is_err());
        assert!(VoxelGrid::new([0.0; 3], 0.1, [0, 1, 1]).is_err());
        assert!(VoxelGrid::new([0.0; 3], 0.1, [1 << 12, 1 << 12, 1 << 12]).is_err());
    }
}
