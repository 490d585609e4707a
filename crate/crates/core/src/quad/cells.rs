//! Tensor Gauss quadrature over the cells of the inner region, with cached
//! shape values for fast interpolation of nodal fields.

use crate::detsum;
use crate::domain::{DomainSpec, Point, MAX_CELL_NODES};

use super::gauss_legendre_01;

/// One quadrature point of a single integral over the inner region.
#[derive(Debug, Clone)]
pub struct CellPoint {
    pub x: Point,
    pub w: f64,
    pub nodes: [u32; MAX_CELL_NODES],
    pub shape: [f64; MAX_CELL_NODES],
}

impl CellPoint {
    /// Interpolate a nodal vector at this point.
    #[inline]
    pub fn interp(&self, nodal: &[f64]) -> f64 {
        let mut v = 0.0;
        for j in 0..MAX_CELL_NODES {
            v += self.shape[j] * nodal[self.nodes[j] as usize];
        }
        v
    }
}

/// Fixed quadrature rule for integrals over the inner region.
#[derive(Debug, Clone)]
pub struct CellQuadrature {
    points: Vec<CellPoint>,
}

impl CellQuadrature {
    /// Tensor Gauss rule with `n` points per axis on every inner cell.
    pub fn over_omega(dom: &DomainSpec, n: usize) -> Self {
        let gauss = gauss_legendre_01(n);
        let vol = dom.cell_volume();
        let mut points = Vec::new();
        for cell in 0..dom.num_cells() {
            if !dom.cell_in_omega(cell) {
                continue;
            }
            let corner = dom.cell_corner(cell);
            let nodes = dom.cell_nodes(cell);
            let h = dom.spacing();
            if dom.dim() == 1 {
                for &(g0, w0) in &gauss {
                    let x = [corner[0] + g0 * h[0], 0.0];
                    points.push(CellPoint {
                        x,
                        w: w0 * vol,
                        nodes,
                        shape: dom.shape_values(cell, x),
                    });
                }
            } else {
                for &(g1, w1) in &gauss {
                    for &(g0, w0) in &gauss {
                        let x = [corner[0] + g0 * h[0], corner[1] + g1 * h[1]];
                        points.push(CellPoint {
                            x,
                            w: w0 * w1 * vol,
                            nodes,
                            shape: dom.shape_values(cell, x),
                        });
                    }
                }
            }
        }
        CellQuadrature { points }
    }

    pub fn points(&self) -> &[CellPoint] {
        &self.points
    }

    /// Deterministic sum of `f` over all quadrature points (weights are the
    /// caller's responsibility via `pt.w`).
    pub fn integrate(&self, f: impl Fn(&CellPoint) -> f64 + Sync) -> f64 {
        detsum::map_sum(&self.points, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures_omega_exactly() {
        let dom = DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap();
        let quad = CellQuadrature::over_omega(&dom, 3);
        let measure = quad.integrate(|pt| pt.w);
        assert!((measure - 1.0).abs() < 1e-13);
    }

    #[test]
    fn integrates_smooth_functions() {
        let dom = DomainSpec::rect([0.0, 0.0], [1.0, 1.0], [4, 4], 2.0).unwrap();
        let quad = CellQuadrature::over_omega(&dom, 3);
        let v = quad.integrate(|pt| pt.w * (pt.x[0] * pt.x[1]).exp());
        // int over unit square of e^{xy} = sum 1/(n! (n+1)^2)... use reference
        let mut exact = 0.0;
        let mut fact = 1.0;
        for n in 0..25 {
            if n > 0 {
                fact *= n as f64;
            }
            exact += 1.0 / (fact * ((n + 1) * (n + 1)) as f64);
        }
        assert!((v - exact).abs() < 1e-8, "v={v} exact={exact}");
    }
}
