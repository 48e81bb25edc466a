//! Access-point lattice and the region lattice that surrounds it.
//!
//! APs sit on an `ap_rows x ap_cols` lattice. Regions are the cells of the
//! `(ap_rows + 1) x (ap_cols + 1)` lattice whose corners are the APs, so an
//! interior region touches four APs, an edge region two and a corner region
//! one. Both id spaces are row-major.
//!
//! Geometry uses region widths as the unit: region `(i, j)` covers
//! `[j, j + 1) x [i, i + 1)` and AP `(r, c)` sits at `(c + 1, r + 1)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub u16);

impl ApId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions {rows}x{cols} are invalid")]
    InvalidDimensions { rows: usize, cols: usize },
    #[error("AP {0} is outside the grid")]
    ApOutOfBounds(ApId),
    #[error("region {0} is outside the grid")]
    RegionOutOfBounds(RegionId),
    #[error("no region has exactly the APs {0:?}")]
    UnknownRegion(Vec<ApId>),
}

/// AP lattice plus its surrounding region lattice. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridTopology {
    ap_rows: usize,
    ap_cols: usize,
}

impl Default for GridTopology {
    fn default() -> Self {
        Self { ap_rows: 5, ap_cols: 5 }
    }
}

impl GridTopology {
    /// Largest supported side; keeps every id inside a `u16` and a wire byte.
    pub const MAX_SIDE: usize = 15;

    pub fn new(ap_rows: usize, ap_cols: usize) -> Result<Self, GridError> {
        if ap_rows == 0 || ap_cols == 0 || ap_rows > Self::MAX_SIDE || ap_cols > Self::MAX_SIDE {
            return Err(GridError::InvalidDimensions { rows: ap_rows, cols: ap_cols });
        }
        Ok(Self { ap_rows, ap_cols })
    }

    pub fn ap_rows(&self) -> usize {
        self.ap_rows
    }

    pub fn ap_cols(&self) -> usize {
        self.ap_cols
    }

    pub fn region_rows(&self) -> usize {
        self.ap_rows + 1
    }

    pub fn region_cols(&self) -> usize {
        self.ap_cols + 1
    }

    pub fn ap_count(&self) -> usize {
        self.ap_rows * self.ap_cols
    }

    pub fn region_count(&self) -> usize {
        self.region_rows() * self.region_cols()
    }

    /// Width and height of the simulation area in region widths.
    pub fn area_size(&self) -> (f64, f64) {
        (self.region_cols() as f64, self.region_rows() as f64)
    }

    pub fn aps(&self) -> impl Iterator<Item = ApId> {
        (0..self.ap_count() as u16).map(ApId)
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> {
        (0..self.region_count() as u16).map(RegionId)
    }

    pub fn check_ap(&self, ap: ApId) -> Result<(), GridError> {
        if ap.index() < self.ap_count() {
            Ok(())
        } else {
            Err(GridError::ApOutOfBounds(ap))
        }
    }

    pub fn check_region(&self, region: RegionId) -> Result<(), GridError> {
        if region.index() < self.region_count() {
            Ok(())
        } else {
            Err(GridError::RegionOutOfBounds(region))
        }
    }

    /// `(row, col)` of an AP on the AP lattice.
    pub fn ap_cell(&self, ap: ApId) -> Result<(usize, usize), GridError> {
        self.check_ap(ap)?;
        Ok((ap.index() / self.ap_cols, ap.index() % self.ap_cols))
    }

    /// `(row, col)` of a region on the region lattice.
    pub fn region_cell(&self, region: RegionId) -> Result<(usize, usize), GridError> {
        self.check_region(region)?;
        let cols = self.region_cols();
        Ok((region.index() / cols, region.index() % cols))
    }

    pub fn ap_at(&self, row: isize, col: isize) -> Option<ApId> {
        if row < 0 || col < 0 || row as usize >= self.ap_rows || col as usize >= self.ap_cols {
            return None;
        }
        Some(ApId((row as usize * self.ap_cols + col as usize) as u16))
    }

    pub fn region_at(&self, row: isize, col: isize) -> Option<RegionId> {
        if row < 0 || col < 0 || row as usize >= self.region_rows() || col as usize >= self.region_cols() {
            return None;
        }
        Some(RegionId((row as usize * self.region_cols() + col as usize) as u16))
    }

    /// Moore (8-connected) neighbours of `ap`, ascending.
    pub fn ap_neighbors(&self, ap: ApId) -> Result<Vec<ApId>, GridError> {
        let (r, c) = self.ap_cell(ap)?;
        let mut out = Vec::with_capacity(8);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                if dr == 0 && dc == 0 {
                    continue;
                }
                if let Some(n) = self.ap_at(r as isize + dr, c as isize + dc) {
                    out.push(n);
                }
            }
        }
        Ok(out)
    }

    pub fn aps_adjacent(&self, a: ApId, b: ApId) -> Result<bool, GridError> {
        let (ra, ca) = self.ap_cell(a)?;
        let (rb, cb) = self.ap_cell(b)?;
        Ok(a != b && ra.abs_diff(rb) <= 1 && ca.abs_diff(cb) <= 1)
    }

    /// APs on the corners of `region`, ascending.
    pub fn region_aps(&self, region: RegionId) -> Result<Vec<ApId>, GridError> {
        let (i, j) = self.region_cell(region)?;
        let (i, j) = (i as isize, j as isize);
        let mut out = Vec::with_capacity(4);
        for r in [i - 1, i] {
            for c in [j - 1, j] {
                if let Some(ap) = self.ap_at(r, c) {
                    out.push(ap);
                }
            }
        }
        Ok(out)
    }

    pub fn region_contains(&self, region: RegionId, ap: ApId) -> Result<bool, GridError> {
        self.check_ap(ap)?;
        Ok(self.region_aps(region)?.contains(&ap))
    }

    /// Regions that have `ap` as a corner, ascending.
    pub fn regions_of_ap(&self, ap: ApId) -> Result<Vec<RegionId>, GridError> {
        let (r, c) = self.ap_cell(ap)?;
        let (r, c) = (r as isize, c as isize);
        let mut out = Vec::with_capacity(4);
        for i in [r, r + 1] {
            for j in [c, c + 1] {
                if let Some(region) = self.region_at(i, j) {
                    out.push(region);
                }
            }
        }
        Ok(out)
    }

    /// The region whose corner set is exactly `aps` (order-insensitive).
    /// Unique when both lattice dimensions are at least 2; a one-wide
    /// lattice has edge regions sharing a corner set and the lowest id wins.
    pub fn region_of(&self, aps: &[ApId]) -> Result<RegionId, GridError> {
        let mut wanted = aps.to_vec();
        wanted.sort_unstable();
        wanted.dedup();
        let unknown = || GridError::UnknownRegion(wanted.clone());
        let first = *wanted.first().ok_or_else(unknown)?;
        for ap in &wanted {
            self.check_ap(*ap)?;
        }
        // Any matching region has the smallest AP among its corners.
        for region in self.regions_of_ap(first)? {
            if self.region_aps(region)? == wanted {
                return Ok(region);
            }
        }
        Err(unknown())
    }

    /// Moore neighbours of `region` on the region lattice, ascending.
    pub fn region_neighbors(&self, region: RegionId) -> Result<Vec<RegionId>, GridError> {
        let (i, j) = self.region_cell(region)?;
        let mut out = Vec::with_capacity(8);
        for di in -1..=1isize {
            for dj in -1..=1isize {
                if di == 0 && dj == 0 {
                    continue;
                }
                if let Some(n) = self.region_at(i as isize + di, j as isize + dj) {
                    out.push(n);
                }
            }
        }
        Ok(out)
    }

    pub fn regions_adjacent(&self, a: RegionId, b: RegionId) -> Result<bool, GridError> {
        let (ia, ja) = self.region_cell(a)?;
        let (ib, jb) = self.region_cell(b)?;
        Ok(a != b && ia.abs_diff(ib) <= 1 && ja.abs_diff(jb) <= 1)
    }

    /// Probable next APs when an MN attached to `current` enters
    /// `next_region`: the current AP's neighbours that are corners of the
    /// next region. Empty when the region is out of reach.
    pub fn candidate_next_aps(&self, current: ApId, next_region: RegionId) -> Result<Vec<ApId>, GridError> {
        let corners = self.region_aps(next_region)?;
        let mut out = self.ap_neighbors(current)?;
        out.retain(|ap| corners.contains(ap));
        Ok(out)
    }

    /// Position of an AP in area coordinates.
    pub fn ap_position(&self, ap: ApId) -> Result<(f64, f64), GridError> {
        let (r, c) = self.ap_cell(ap)?;
        Ok((c as f64 + 1.0, r as f64 + 1.0))
    }

    /// Centre of a region in area coordinates.
    pub fn region_center(&self, region: RegionId) -> Result<(f64, f64), GridError> {
        let (i, j) = self.region_cell(region)?;
        Ok((j as f64 + 0.5, i as f64 + 0.5))
    }

    /// Region enclosing a point, `None` outside `[0, W) x [0, H)`.
    pub fn region_at_point(&self, x: f64, y: f64) -> Option<RegionId> {
        let (w, h) = self.area_size();
        if !(0.0..w).contains(&x) || !(0.0..h).contains(&y) {
            return None;
        }
        self.region_at(y.floor() as isize, x.floor() as isize)
    }
}
