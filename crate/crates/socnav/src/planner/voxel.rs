//! 2D pillar binning of range-scan points in the robot frame.

use crate::sim::{LIDAR_BEAMS, LIDAR_MAX_RANGE};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct VoxelConfig {
    /// Cell edge length in meters.
    pub resolution: f64,
    /// Full grid width in meters, centered on the robot.
    pub extent: f64,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            extent: 2.0 * LIDAR_MAX_RANGE,
        }
    }
}

impl VoxelConfig {
    pub fn side(&self) -> usize {
        (self.extent / self.resolution).round() as usize
    }
}

/// Aggregate features of one occupied pillar. Offsets are relative to the
/// cell center; the height proxy is the largest point range seen in the
/// cell (planar scans carry no true elevation).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VoxelCell {
    pub count: f64,
    pub mean_dx: f64,
    pub mean_dy: f64,
    pub height_proxy: f64,
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub cfg: VoxelConfig,
    pub side: usize,
    cells: Vec<VoxelCell>,
}

impl VoxelGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &VoxelCell {
        &self.cells[iy * self.side + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            -self.cfg.extent / 2.0 + (ix as f64 + 0.5) * self.cfg.resolution,
            -self.cfg.extent / 2.0 + (iy as f64 + 0.5) * self.cfg.resolution,
        )
    }

    /// Occupied cells sorted nearest-first by cell-center distance to the
    /// robot, with stable index tie-breaking.
    pub fn occupied(&self) -> Vec<(usize, usize, VoxelCell)> {
        let mut cells: Vec<(usize, usize, VoxelCell)> = Vec::new();
        for iy in 0..self.side {
            for ix in 0..self.side {
                let c = self.cell(ix, iy);
                if c.count > 0.0 {
                    cells.push((ix, iy, *c));
                }
            }
        }
        cells.sort_by(|a, b| {
            let da = {
                let (x, y) = self.cell_center(a.0, a.1);
                x * x + y * y
            };
            let db = {
                let (x, y) = self.cell_center(b.0, b.1);
                x * x + y * y
            };
            da.total_cmp(&db)
                .then_with(|| (a.1 * self.side + a.0).cmp(&(b.1 * self.side + b.0)))
        });
        cells
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.count > 0.0).count()
    }

    pub fn is_all_zero(&self) -> bool {
        self.cells.iter().all(|c| c.count == 0.0)
    }
}

/// Bin robot-frame points into pillars. Points outside the extent are
/// dropped; empty cells keep all-zero features.
pub fn voxelize(points: &[(f64, f64)], cfg: VoxelConfig) -> VoxelGrid {
    let side = cfg.side();
    let half = cfg.extent / 2.0;
    let mut sums = vec![(0usize, 0.0f64, 0.0f64, 0.0f64); side * side];
    for &(x, y) in points {
        let ix = ((x + half) / cfg.resolution).floor();
        let iy = ((y + half) / cfg.resolution).floor();
        if ix < 0.0 || iy < 0.0 || ix >= side as f64 || iy >= side as f64 {
            continue;
        }
        let idx = iy as usize * side + ix as usize;
        let range = x.hypot(y);
        let e = &mut sums[idx];
        e.0 += 1;
        e.1 += x;
        e.2 += y;
        e.3 = e.3.max(range);
    }
    let mut grid = VoxelGrid {
        cfg,
        side,
        cells: vec![VoxelCell::default(); side * side],
    };
    for iy in 0..side {
        for ix in 0..side {
            let (n, sx, sy, maxr) = sums[iy * side + ix];
            if n == 0 {
                continue;
            }
            let (cx, cy) = grid.cell_center(ix, iy);
            grid.cells[iy * side + ix] = VoxelCell {
                count: n as f64,
                mean_dx: sx / n as f64 - cx,
                mean_dy: sy / n as f64 - cy,
                height_proxy: maxr,
            };
        }
    }
    grid
}

/// Convert a range scan to robot-frame hit points, dropping max-range
/// beams (no return).
pub fn scan_to_points(scan: &[f64], max_range: f64) -> Vec<(f64, f64)> {
    let n = scan.len().max(1);
    scan.iter()
        .enumerate()
        .filter(|(_, &r)| r < max_range - 1e-9)
        .map(|(k, &r)| {
            let angle = 2.0 * PI * k as f64 / n as f64;
            (r * angle.cos(), r * angle.sin())
        })
        .collect()
}

/// Default beam count sanity alias so callers don't hard-code it.
pub const DEFAULT_BEAMS: usize = LIDAR_BEAMS;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_scan_all_zero_grid() {
        let grid = voxelize(&[], VoxelConfig::default());
        assert!(grid.is_all_zero());
        assert_eq!(grid.occupied().len(), 0);
    }

    #[test]
    fn single_point_occupies_one_cell() {
        let cfg = VoxelConfig {
            resolution: 0.5,
            extent: 16.0,
        };
        let grid = voxelize(&[(1.0, 0.0)], cfg);
        assert_eq!(grid.occupied_count(), 1);
        let occ = grid.occupied();
        let (ix, iy, cell) = occ[0];
        assert_eq!(cell.count, 1.0);
        let (cx, cy) = grid.cell_center(ix, iy);
        assert!((cx + cell.mean_dx - 1.0).abs() < 1e-12);
        assert!((cy + cell.mean_dy - 0.0).abs() < 1e-12);
        assert!((cell.height_proxy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_match_brute_force_binning() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = VoxelConfig {
            resolution: 0.5,
            extent: 16.0,
        };
        let side = cfg.side();
        let points: Vec<(f64, f64)> = (0..10_000)
            .map(|_| (rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)))
            .collect();
        let grid = voxelize(&points, cfg);

        // Independent per-cell count over all points.
        let mut brute = vec![0usize; side * side];
        for &(x, y) in &points {
            let ix = ((x + 8.0) / 0.5).floor();
            let iy = ((y + 8.0) / 0.5).floor();
            if ix < 0.0 || iy < 0.0 || ix >= side as f64 || iy >= side as f64 {
                continue;
            }
            brute[iy as usize * side + ix as usize] += 1;
        }
        for iy in 0..side {
            for ix in 0..side {
                assert_eq!(
                    grid.cell(ix, iy).count as usize,
                    brute[iy * side + ix],
                    "cell ({ix},{iy})"
                );
            }
        }
    }

    #[test]
    fn occupied_sorted_nearest_first() {
        let cfg = VoxelConfig::default();
        let grid = voxelize(&[(5.0, 0.0), (1.0, 0.0), (-3.0, 2.0)], cfg);
        let occ = grid.occupied();
        let dists: Vec<f64> = occ
            .iter()
            .map(|&(ix, iy, _)| {
                let (x, y) = grid.cell_center(ix, iy);
                x.hypot(y)
            })
            .collect();
        for w in dists.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn scan_conversion_drops_max_range() {
        let mut scan = vec![8.0; 180];
        scan[0] = 3.0;
        scan[45] = 2.0; // quarter turn: +y direction
        let pts = scan_to_points(&scan, 8.0);
        assert_eq!(pts.len(), 2);
        assert!((pts[0].0 - 3.0).abs() < 1e-12 && pts[0].1.abs() < 1e-12);
        assert!(pts[1].0.abs() < 1e-9 && (pts[1].1 - 2.0).abs() < 1e-12);
    }
}
