//! Nodal fields on the grid, extended by zero outside the inner region.

use std::sync::Arc;

use rand::Rng;

use crate::domain::{DomainSpec, Point};
use crate::error::FieldError;

/// Continuous piecewise-multilinear nodal field vanishing outside the inner
/// region (membership in the zero-trace space is enforced structurally:
/// only interior nodes may carry nonzero values).
#[derive(Debug, Clone)]
pub struct DiscreteField {
    dom: Arc<DomainSpec>,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn zero(dom: Arc<DomainSpec>) -> Self {
        let n = dom.num_nodes();
        DiscreteField {
            dom,
            values: vec![0.0; n],
        }
    }

    /// Build from a full nodal vector; values at non-interior nodes must be
    /// exactly zero.
    pub fn from_values(dom: Arc<DomainSpec>, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != dom.num_nodes() {
            return Err(FieldError::WrongLength {
                got: values.len(),
                expected: dom.num_nodes(),
            });
        }
        for (node, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FieldError::NonFinite { node, value: v });
            }
            if dom.free_index_of(node).is_none() && v != 0.0 {
                return Err(FieldError::NonzeroOutside { node, value: v });
            }
        }
        Ok(DiscreteField { dom, values })
    }

    /// Build from coefficients over the interior nodes only.
    pub fn from_free(dom: Arc<DomainSpec>, free: &[f64]) -> Result<Self, FieldError> {
        if free.len() != dom.num_free() {
            return Err(FieldError::WrongFreeLength {
                got: free.len(),
                expected: dom.num_free(),
            });
        }
        let mut values = vec![0.0; dom.num_nodes()];
        for (k, &node) in dom.free_nodes().iter().enumerate() {
            if !free[k].is_finite() {
                return Err(FieldError::NonFinite {
                    node: node as usize,
                    value: free[k],
                });
            }
            values[node as usize] = free[k];
        }
        Ok(DiscreteField { dom, values })
    }

    /// Interpolate a function at the interior nodes (zero elsewhere).
    pub fn from_fn(dom: Arc<DomainSpec>, f: impl Fn(Point) -> f64) -> Result<Self, FieldError> {
        let mut values = vec![0.0; dom.num_nodes()];
        for &node in dom.free_nodes() {
            let v = f(dom.node_coords(node as usize));
            if !v.is_finite() {
                return Err(FieldError::NonFinite {
                    node: node as usize,
                    value: v,
                });
            }
            values[node as usize] = v;
        }
        Ok(DiscreteField { dom, values })
    }

    /// Uniformly random interior nodal values in `[-scale, scale]`.
    pub fn random(dom: Arc<DomainSpec>, rng: &mut impl Rng, scale: f64) -> Self {
        let mut values = vec![0.0; dom.num_nodes()];
        for &node in dom.free_nodes() {
            values[node as usize] = rng.gen_range(-scale..=scale);
        }
        DiscreteField { dom, values }
    }

    /// Hat profile: 1 at the region's center node, decaying linearly to 0
    /// over `halfwidth`, interpolated on the grid.
    pub fn hat(dom: Arc<DomainSpec>, center: Point, halfwidth: f64, height: f64) -> Self {
        let dim = dom.dim();
        let mut values = vec![0.0; dom.num_nodes()];
        for &node in dom.free_nodes() {
            let x = dom.node_coords(node as usize);
            let mut r: f64 = 0.0;
            for axis in 0..dim {
                r = r.max((x[axis] - center[axis]).abs());
            }
            values[node as usize] = height * (1.0 - r / halfwidth).max(0.0);
        }
        DiscreteField { dom, values }
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.dom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coefficients over interior nodes.
    pub fn free_values(&self) -> Vec<f64> {
        self.dom
            .free_nodes()
            .iter()
            .map(|&n| self.values[n as usize])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Pointwise evaluation of the multilinear interpolant; zero outside
    /// the truncation box (extension by zero).
    pub fn eval(&self, x: Point) -> f64 {
        match self.dom.locate_cell(x) {
            None => 0.0,
            Some(cell) => {
                let nodes = self.dom.cell_nodes(cell);
                let shp = self.dom.shape_values(cell, x);
                let mut v = 0.0;
                for j in 0..4 {
                    v += shp[j] * self.values[nodes[j] as usize];
                }
                v
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        DiscreteField {
            dom: self.dom.clone(),
            values: self.values.iter().map(|&v| c * v).collect(),
        }
    }

    /// `self + c * other` (same grid assumed).
    pub fn axpy(&self, c: f64, other: &DiscreteField) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        DiscreteField {
            dom: self.dom.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| a + c * b)
                .collect(),
        }
    }

    /// Unit hat basis field at interior node `free_index`.
    pub fn basis(dom: Arc<DomainSpec>, free_index: usize) -> Self {
        let node = dom.free_nodes()[free_index] as usize;
        let mut values = vec![0.0; dom.num_nodes()];
        values[node] = 1.0;
        DiscreteField { dom, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> Arc<DomainSpec> {
        Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap())
    }

    #[test]
    fn rejects_nonzero_outside() {
        let d = dom();
        let mut values = vec![0.0; d.num_nodes()];
        values[0] = 1.0; // boundary of B, never interior
        assert!(matches!(
            DiscreteField::from_values(d, values),
            Err(FieldError::NonzeroOutside { .. })
        ));
    }

    #[test]
    fn rejects_nan() {
        let d = dom();
        let free = vec![f64::NAN; d.num_free()];
        assert!(matches!(
            DiscreteField::from_free(d, &free),
            Err(FieldError::NonFinite { .. })
        ));
    }

    #[test]
    fn interpolation_is_exact_for_interior_hats() {
        let d = dom();
        let u = DiscreteField::hat(d.clone(), [0.5, 0.0], 0.25, 1.0);
        assert!((u.eval([0.5, 0.0]) - 1.0).abs() < 1e-14);
        assert!((u.eval([0.375, 0.0]) - 0.5).abs() < 1e-14);
        assert_eq!(u.eval([2.5, 0.0]), 0.0); // outside B
        assert_eq!(u.eval([-0.25, 0.0]), 0.0); // in B, outside the region
    }

    #[test]
    fn from_fn_zeroes_boundary() {
        let d = dom();
        let u = DiscreteField::from_fn(d.clone(), |_| 1.0).unwrap();
        // nodes at 0 and 1 are not interior
        let n0 = d
            .free_nodes()
            .iter()
            .map(|&n| d.node_coords(n as usize)[0])
            .fold(f64::INFINITY, f64::min);
        assert!(n0 > 0.0);
        assert_eq!(u.eval([-0.3, 0.0]), 0.0);
        assert!((u.eval([0.5, 0.0]) - 1.0).abs() < 1e-14);
    }
}
