//! Axis-aligned grids over a truncation box `B` containing the inner region
//! `Omega`, with node/cell indexing and multilinear shape functions.
//!
//! The nonlocal quadrature works on `B x B`; fields live on the grid nodes
//! and vanish identically outside `Omega`. `Omega` is stored as a set of
//! grid cells, so boxes must align with grid lines.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// A point in the plane; 1-d problems use only the first coordinate.
pub type Point = [f64; 2];

/// Maximum nodes per cell (bilinear quad); 1-d cells use the first two slots.
pub const MAX_CELL_NODES: usize = 4;

/// Geometry of the inner region, kept for reporting and serialization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum RegionShape {
    /// Axis-aligned box, aligned with grid lines.
    Box { min: Point, max: Point },
    /// Arbitrary union of grid cells.
    CellUnion,
}

/// Uniform grid on a truncation box `B` with a marked inner region `Omega`.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    dim: usize,
    b_min: Point,
    b_max: Point,
    cells: [usize; 2],
    h: [f64; 2],
    /// Per-cell flag: cell belongs to the inner region.
    omega_mask: Vec<bool>,
    shape: RegionShape,
    /// Node ids whose full neighborhood of cells lies in the inner region.
    free_nodes: Vec<u32>,
    /// Inverse map node id -> free index.
    node_to_free: Vec<Option<u32>>,
}

const ALIGN_TOL: f64 = 1e-9;

impl DomainSpec {
    /// 1-d domain: inner interval `[omega_min, omega_max]` split into
    /// `omega_cells` cells, truncation box obtained by dilating the interval
    /// about its center by `dilation`.
    pub fn line(
        omega_min: f64,
        omega_max: f64,
        omega_cells: usize,
        dilation: f64,
    ) -> Result<Self, DomainError> {
        Self::dilated(1, [omega_min, 0.0], [omega_max, 0.0], [omega_cells, 1], dilation)
    }

    /// 2-d domain: inner box with `omega_cells` cells per axis, dilated by
    /// `dilation` about its center.
    pub fn rect(
        omega_min: Point,
        omega_max: Point,
        omega_cells: [usize; 2],
        dilation: f64,
    ) -> Result<Self, DomainError> {
        Self::dilated(2, omega_min, omega_max, omega_cells, dilation)
    }

    fn dilated(
        dim: usize,
        omega_min: Point,
        omega_max: Point,
        omega_cells: [usize; 2],
        dilation: f64,
    ) -> Result<Self, DomainError> {
        if dim != 1 && dim != 2 {
            return Err(DomainError::BadDimension(dim));
        }
        if dilation < 1.0 {
            return Err(DomainError::BoxTooSmall { axis: 0 });
        }
        let mut b_min = [0.0; 2];
        let mut b_max = [0.0; 2];
        let mut cells = [1usize; 2];
        let mut margin = [0usize; 2];
        for axis in 0..dim {
            let len = omega_max[axis] - omega_min[axis];
            if len <= 0.0 {
                return Err(DomainError::EmptyRegion { axis });
            }
            if omega_cells[axis] == 0 {
                return Err(DomainError::NoCells { axis });
            }
            let h = len / omega_cells[axis] as f64;
            let margin_len = 0.5 * (dilation - 1.0) * len;
            let m = (margin_len / h).round() as usize;
            if (m as f64 * h - margin_len).abs() > ALIGN_TOL * h {
                return Err(DomainError::Misaligned {
                    axis,
                    offset: margin_len,
                    h,
                });
            }
            if dilation > 1.0 && m == 0 {
                return Err(DomainError::BoxTooSmall { axis });
            }
            margin[axis] = m;
            cells[axis] = omega_cells[axis] + 2 * m;
            b_min[axis] = omega_min[axis] - m as f64 * h;
            b_max[axis] = omega_max[axis] + m as f64 * h;
        }
        let total = cells[0] * cells[1];
        let mut mask = vec![false; total];
        let c1_range = if dim == 2 { cells[1] } else { 1 };
        for c1 in 0..c1_range {
            for c0 in 0..cells[0] {
                let in0 = c0 >= margin[0] && c0 < margin[0] + omega_cells[0];
                let in1 = dim == 1 || (c1 >= margin[1] && c1 < margin[1] + omega_cells[1]);
                if in0 && in1 {
                    mask[c0 + c1 * cells[0]] = true;
                }
            }
        }
        let shape = RegionShape::Box {
            min: omega_min,
            max: omega_max,
        };
        Self::from_parts(dim, b_min, b_max, cells, mask, shape)
    }

    /// General constructor from an explicit truncation box and cell mask.
    pub fn from_parts(
        dim: usize,
        b_min: Point,
        b_max: Point,
        cells: [usize; 2],
        omega_mask: Vec<bool>,
        shape: RegionShape,
    ) -> Result<Self, DomainError> {
        if dim != 1 && dim != 2 {
            return Err(DomainError::BadDimension(dim));
        }
        let mut h = [0.0; 2];
        let mut cs = cells;
        if dim == 1 {
            cs[1] = 1;
        }
        for axis in 0..dim {
            if cs[axis] == 0 {
                return Err(DomainError::NoCells { axis });
            }
            let len = b_max[axis] - b_min[axis];
            if len <= 0.0 {
                return Err(DomainError::EmptyRegion { axis });
            }
            h[axis] = len / cs[axis] as f64;
            if !(h[axis] > 0.0) {
                return Err(DomainError::BadSpacing(h[axis]));
            }
        }
        let total = cs[0] * if dim == 2 { cs[1] } else { 1 };
        if omega_mask.len() != total {
            return Err(DomainError::EmptyMask);
        }
        if !omega_mask.iter().any(|&b| b) {
            return Err(DomainError::EmptyMask);
        }
        // Omega must not touch the boundary of B: every inner cell needs a
        // non-inner neighbor layer for the extension by zero to make sense.
        let mut dom = DomainSpec {
            dim,
            b_min,
            b_max,
            cells: cs,
            h,
            omega_mask,
            shape,
            free_nodes: Vec::new(),
            node_to_free: Vec::new(),
        };
        for c in 0..total {
            if dom.omega_mask[c] && dom.cell_touches_b_boundary(c) {
                return Err(DomainError::BoxTooSmall { axis: 0 });
            }
        }
        dom.classify_nodes();
        Ok(dom)
    }

    fn cell_touches_b_boundary(&self, cell: usize) -> bool {
        let (c0, c1) = self.cell_multi(cell);
        if c0 == 0 || c0 + 1 == self.cells[0] {
            return true;
        }
        if self.dim == 2 && (c1 == 0 || c1 + 1 == self.cells[1]) {
            return true;
        }
        false
    }

    fn classify_nodes(&mut self) {
        let n = self.num_nodes();
        let mut node_to_free = vec![None; n];
        let mut free = Vec::new();
        for node in 0..n {
            if self.node_is_interior(node) {
                node_to_free[node] = Some(free.len() as u32);
                free.push(node as u32);
            }
        }
        self.free_nodes = free;
        self.node_to_free = node_to_free;
    }

    fn node_is_interior(&self, node: usize) -> bool {
        let (i0, i1) = self.node_multi(node);
        let range0 = [i0 as isize - 1, i0 as isize];
        let range1: &[isize] = if self.dim == 2 {
            &[i1 as isize - 1, i1 as isize]
        } else {
            &[0]
        };
        for &c1 in range1 {
            for &c0 in range0.iter() {
                if c0 < 0 || c0 >= self.cells[0] as isize {
                    return false;
                }
                if self.dim == 2 && (c1 < 0 || c1 >= self.cells[1] as isize) {
                    return false;
                }
                let cell = c0 as usize + c1 as usize * self.cells[0];
                if !self.omega_mask[cell] {
                    return false;
                }
            }
        }
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b_min(&self) -> Point {
        self.b_min
    }

    pub fn b_max(&self) -> Point {
        self.b_max
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.h
    }

    pub fn max_spacing(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    pub fn cells_per_axis(&self) -> [usize; 2] {
        self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells[0] * if self.dim == 2 { self.cells[1] } else { 1 }
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        [
            self.cells[0] + 1,
            if self.dim == 2 { self.cells[1] + 1 } else { 1 },
        ]
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1]
    }

    pub fn shape(&self) -> &RegionShape {
        &self.shape
    }

    pub fn omega_mask(&self) -> &[bool] {
        &self.omega_mask
    }

    pub fn cell_in_omega(&self, cell: usize) -> bool {
        self.omega_mask[cell]
    }

    /// Cell volume (length in 1-d, area in 2-d).
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    /// Measure of the inner region.
    pub fn omega_measure(&self) -> f64 {
        self.omega_mask.iter().filter(|&&b| b).count() as f64 * self.cell_volume()
    }

    /// Node ids of the interior (free) nodes, ascending.
    pub fn free_nodes(&self) -> &[u32] {
        &self.free_nodes
    }

    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn free_index_of(&self, node: usize) -> Option<u32> {
        self.node_to_free[node]
    }

    pub fn cell_multi(&self, cell: usize) -> (usize, usize) {
        (cell % self.cells[0], cell / self.cells[0])
    }

    pub fn cell_index(&self, c0: usize, c1: usize) -> usize {
        c0 + c1 * self.cells[0]
    }

    pub fn node_multi(&self, node: usize) -> (usize, usize) {
        let n0 = self.cells[0] + 1;
        (node % n0, node / n0)
    }

    pub fn node_index(&self, i0: usize, i1: usize) -> usize {
        i0 + i1 * (self.cells[0] + 1)
    }

    pub fn node_coords(&self, node: usize) -> Point {
        let (i0, i1) = self.node_multi(node);
        let mut p = [0.0; 2];
        p[0] = self.b_min[0] + i0 as f64 * self.h[0];
        if self.dim == 2 {
            p[1] = self.b_min[1] + i1 as f64 * self.h[1];
        }
        p
    }

    /// Lower corner of a cell.
    pub fn cell_corner(&self, cell: usize) -> Point {
        let (c0, c1) = self.cell_multi(cell);
        let mut p = [0.0; 2];
        p[0] = self.b_min[0] + c0 as f64 * self.h[0];
        if self.dim == 2 {
            p[1] = self.b_min[1] + c1 as f64 * self.h[1];
        }
        p
    }

    /// Node ids of a cell's corners; 1-d cells repeat the two ids so the
    /// array shape is uniform (paired with zero shape weights).
    pub fn cell_nodes(&self, cell: usize) -> [u32; MAX_CELL_NODES] {
        let (c0, c1) = self.cell_multi(cell);
        if self.dim == 1 {
            let a = self.node_index(c0, 0) as u32;
            let b = self.node_index(c0 + 1, 0) as u32;
            [a, b, a, b]
        } else {
            [
                self.node_index(c0, c1) as u32,
                self.node_index(c0 + 1, c1) as u32,
                self.node_index(c0, c1 + 1) as u32,
                self.node_index(c0 + 1, c1 + 1) as u32,
            ]
        }
    }

    /// Multilinear shape values of a cell's corner nodes at `x` (local to
    /// the cell; callers must pass points inside it).
    pub fn shape_values(&self, cell: usize, x: Point) -> [f64; MAX_CELL_NODES] {
        let corner = self.cell_corner(cell);
        let xi0 = (x[0] - corner[0]) / self.h[0];
        if self.dim == 1 {
            [1.0 - xi0, xi0, 0.0, 0.0]
        } else {
            let xi1 = (x[1] - corner[1]) / self.h[1];
            [
                (1.0 - xi0) * (1.0 - xi1),
                xi0 * (1.0 - xi1),
                (1.0 - xi0) * xi1,
                xi0 * xi1,
            ]
        }
    }

    /// Cell containing `x`, or `None` outside the truncation box.
    pub fn locate_cell(&self, x: Point) -> Option<usize> {
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            if x[axis] < self.b_min[axis] - ALIGN_TOL || x[axis] > self.b_max[axis] + ALIGN_TOL {
                return None;
            }
            let t = ((x[axis] - self.b_min[axis]) / self.h[axis]).floor() as isize;
            idx[axis] = t.clamp(0, self.cells[axis] as isize - 1) as usize;
        }
        Some(self.cell_index(idx[0], idx[1]))
    }

    /// True if `x` lies in the closed inner region.
    pub fn point_in_omega_closure(&self, x: Point) -> bool {
        // A point on a cell boundary belongs to the closure if any adjacent
        // cell is an inner cell.
        let eps = 1e-12;
        for d1 in [-1.0, 1.0] {
            for d0 in [-1.0, 1.0] {
                let mut probe = x;
                probe[0] += d0 * eps * self.h[0];
                if self.dim == 2 {
                    probe[1] += d1 * eps * self.h[1];
                }
                if let Some(cell) = self.locate_cell(probe) {
                    if self.omega_mask[cell] && self.cell_contains(cell, probe) {
                        return true;
                    }
                }
            }
            if self.dim == 1 {
                break;
            }
        }
        false
    }

    fn cell_contains(&self, cell: usize, x: Point) -> bool {
        let c = self.cell_corner(cell);
        for axis in 0..self.dim {
            if x[axis] < c[axis] - ALIGN_TOL || x[axis] > c[axis] + self.h[axis] + ALIGN_TOL {
                return false;
            }
        }
        true
    }

    /// Distance from `x` to the boundary of the truncation box.
    pub fn distance_to_b_boundary(&self, x: Point) -> f64 {
        let mut d = f64::INFINITY;
        for axis in 0..self.dim {
            d = d.min(x[axis] - self.b_min[axis]);
            d = d.min(self.b_max[axis] - x[axis]);
        }
        d
    }

    /// Euclidean distance between two points of this domain's dimension.
    pub fn distance(&self, x: Point, y: Point) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim {
            let d = x[axis] - y[axis];
            s += d * d;
        }
        s.sqrt()
    }
}
