//! Quadrature rules: Gauss-Legendre, graded radial rules for power-type
//! singularities, single integrals over the inner region, and the cell-pair
//! rule for the nonlocal double integral.

mod cells;
mod pairs;

pub use cells::{CellPoint, CellQuadrature};
pub use pairs::{FracQuadrature, PairPoint};

/// Quadrature configuration. The defaults are sized for desk-scale grids;
/// all counts can be raised for convergence studies.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Tensor Gauss points per axis on well-separated cell pairs.
    pub sep_gauss: usize,
    /// Gauss points per axis for the overlap integral of touching pairs.
    pub overlap_gauss: usize,
    /// Gauss points per graded radial piece.
    pub radial_gauss: usize,
    /// Gauss points for the Duffy cross direction (2-d only).
    pub cross_gauss: usize,
    /// Number of geometric levels graded toward the singularity.
    pub graded_levels: usize,
    /// Grading ratio between consecutive levels.
    pub grading: f64,
    /// Gauss points per axis for single integrals over the inner region.
    pub cell_gauss: usize,
    /// Relative accuracy target; reports warn above it.
    pub target_rel_tol: f64,
}

impl QuadConfig {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            QuadConfig {
                sep_gauss: 4,
                overlap_gauss: 4,
                radial_gauss: 4,
                cross_gauss: 4,
                graded_levels: 4,
                grading: 0.5,
                cell_gauss: 4,
                target_rel_tol: 1e-3,
            }
        } else {
            QuadConfig {
                sep_gauss: 3,
                overlap_gauss: 2,
                radial_gauss: 3,
                cross_gauss: 3,
                graded_levels: 3,
                grading: 0.5,
                cell_gauss: 3,
                target_rel_tol: 1e-2,
            }
        }
    }

    /// A deliberately coarser variant used for quadrature error estimates.
    pub fn coarsened(&self) -> Self {
        QuadConfig {
            sep_gauss: (self.sep_gauss - 1).max(1),
            overlap_gauss: (self.overlap_gauss - 1).max(1),
            radial_gauss: (self.radial_gauss - 1).max(1),
            cross_gauss: (self.cross_gauss - 1).max(1),
            graded_levels: (self.graded_levels - 1).max(1),
            grading: self.grading,
            cell_gauss: (self.cell_gauss - 1).max(1),
            target_rel_tol: self.target_rel_tol,
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1 && n <= 64, "unsupported Gauss order {n}");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights on (0, `range`] for integrands behaving like
/// `t^beta * smooth` at zero: `levels` geometric pieces carry plain Gauss
/// rules, the innermost core carries the one-point rule of the weight
/// `t^beta` (node at the weight centroid, exact for linear smooth parts).
pub fn graded_radial(
    range: f64,
    levels: usize,
    gauss_n: usize,
    beta: f64,
    grading: f64,
) -> Vec<(f64, f64)> {
    assert!(range > 0.0 && grading > 0.0 && grading < 1.0);
    let beta = beta.clamp(-0.999, 64.0);
    let gauss = gauss_legendre_01(gauss_n);
    let mut out = Vec::with_capacity(levels * gauss_n + 1);
    let mut hi = range;
    for _ in 0..levels {
        let lo = hi * grading;
        for &(g, w) in &gauss {
            out.push((lo + (hi - lo) * g, w * (hi - lo)));
        }
        hi = lo;
    }
    // core [0, hi]: weighted one-point rule, written as a plain node/weight
    let eps = hi;
    let node = eps * (beta + 1.0) / (beta + 2.0);
    let weight = eps.powf(beta + 1.0) / (beta + 1.0) * node.powf(-beta);
    out.push((node, weight));
    out
}
