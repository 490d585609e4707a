//! The variable-order fractional p(.)-Laplacian: weak-form pairings,
//! assembly against the interior nodal basis, and a pointwise
//! principal-value evaluation for diagnostics.

use crate::detsum;
use crate::domain::{Point, MAX_CELL_NODES};
use crate::energy::PreparedProblem;
use crate::error::{EnergyError, OperatorError};
use crate::field::DiscreteField;
use crate::quad::gauss_legendre_01;
use crate::spaces::FunctionSpace;

/// Weak pairing `iint |u(x)-u(y)|^{p-2} (u(x)-u(y)) (phi(x)-phi(y)) K dxdy`
/// on the same rule as the fractional modular, so the identity
/// `pairing(u, u) = modular(u)` holds by construction.
pub fn weak_pairing(space: &FunctionSpace, u: &DiscreteField, phi: &DiscreteField) -> f64 {
    let uv = u.values();
    let pv = phi.values();
    detsum::map_sum(space.frac_rule().pairs(), |pt| {
        let du = pt.diff(uv);
        if du == 0.0 {
            return 0.0;
        }
        let dphi = pt.diff(pv);
        pt.kw * du.abs().powf(pt.p - 1.0) * du.signum() * dphi
    })
}

/// Pairings of `u` against every interior basis hat, assembled in one pass
/// over the quadrature pairs.
pub fn assemble(space: &FunctionSpace, u: &DiscreteField) -> Vec<f64> {
    let dom = space.domain();
    let uv = u.values();
    let full = detsum::map_accumulate(
        space.frac_rule().pairs(),
        dom.num_nodes(),
        |pt, acc| {
            let du = pt.diff(uv);
            if du == 0.0 {
                return;
            }
            let t = pt.kw * du.abs().powf(pt.p - 1.0) * du.signum();
            for j in 0..MAX_CELL_NODES {
                acc[pt.nodes_x[j] as usize] += t * pt.shape_x[j];
                acc[pt.nodes_y[j] as usize] -= t * pt.shape_y[j];
            }
        },
    );
    dom.free_nodes()
        .iter()
        .map(|&n| full[n as usize])
        .collect()
}

/// Assembly with quadrature metadata.
#[derive(Debug, Clone)]
pub struct WeakFormAssembly {
    pub entries: Vec<f64>,
    pub quad_pairs: usize,
    pub grid_h: f64,
}

pub fn assemble_weak_form(space: &FunctionSpace, u: &DiscreteField) -> WeakFormAssembly {
    WeakFormAssembly {
        entries: assemble(space, u),
        quad_pairs: space.frac_rule().pairs().len(),
        grid_h: space.domain().max_spacing(),
    }
}

/// Weak residual of the coupled system at `(u, v)`:
/// `r_u[i] = M1(delta(u)) <A(u), phi_i> - int (f(u,v) + a) phi_i`, and the
/// analogous `r_v`. This is the same vector as the energy gradient; both
/// share one code path.
pub fn assemble_weak_residual(
    problem: &PreparedProblem,
    u: &DiscreteField,
    v: &DiscreteField,
) -> Result<(Vec<f64>, Vec<f64>), EnergyError> {
    problem.gradient(u, v)
}

/// Pointwise principal-value evaluation of the operator at a grid node:
/// the ball of radius `pv_radius` is excluded and the remaining integral
/// is taken in symmetric pairs `(y, 2x - y)` so odd local contributions
/// cancel exactly. Beyond the farthest corner of the truncation box the
/// field vanishes and the tail is added analytically with the exponents
/// frozen at the diagonal. Diagnostic only; the solver works with weak
/// forms.
pub fn apply_pointwise(
    space: &FunctionSpace,
    u: &DiscreteField,
    x: Point,
    pv_radius: f64,
) -> Result<f64, OperatorError> {
    let dom = space.domain();
    let h = dom.max_spacing();
    if pv_radius < h {
        return Err(OperatorError::RadiusTooSmall {
            radius: pv_radius,
            h,
        });
    }
    // x must be an interior grid node
    let node = nearest_node(space, x).ok_or(OperatorError::NotAnInteriorNode { x })?;
    let x = dom.node_coords(node);

    let exps = space.exponents();
    let dim = dom.dim();
    let ux = u.values()[node];

    // farthest distance at which the field can still be nonzero
    let bmin = dom.b_min();
    let bmax = dom.b_max();
    let mut r_max: f64 = 0.0;
    for c0 in [bmin[0], bmax[0]] {
        if dim == 1 {
            r_max = r_max.max((x[0] - c0).abs());
        } else {
            for c1 in [bmin[1], bmax[1]] {
                let corner = [c0, c1];
                r_max = r_max.max(dom.distance(x, corner));
            }
        }
    }

    let kernel = |y: Point| -> f64 {
        let du = ux - u.eval(y);
        if du == 0.0 {
            return 0.0;
        }
        let p = exps.p(&x, &y);
        let s = exps.s(&x, &y);
        let d = dom.distance(x, y);
        du.abs().powf(p - 1.0) * du.signum() / d.powf(dim as f64 + p * s)
    };

    // radial pieces doubling outward from the excluded ball
    let gauss = gauss_legendre_01(8);
    let mut pieces = Vec::new();
    let mut lo = pv_radius;
    while lo < r_max {
        let hi = (2.0 * lo).min(r_max);
        pieces.push((lo, hi));
        lo = hi;
    }

    let mut numeric = 0.0;
    if dim == 1 {
        for &(lo, hi) in &pieces {
            for &(g, w) in &gauss {
                let t = lo + (hi - lo) * g;
                let sum = kernel([x[0] + t, 0.0]) + kernel([x[0] - t, 0.0]);
                numeric += w * (hi - lo) * sum;
            }
        }
    } else {
        let n_ang = 16;
        let dtheta = 2.0 * std::f64::consts::PI / n_ang as f64;
        for &(lo, hi) in &pieces {
            for &(g, w) in &gauss {
                let t = lo + (hi - lo) * g;
                let mut ring = 0.0;
                for j in 0..n_ang / 2 {
                    let theta = (j as f64 + 0.5) * dtheta;
                    let e = [theta.cos(), theta.sin()];
                    ring += kernel([x[0] + t * e[0], x[1] + t * e[1]])
                        + kernel([x[0] - t * e[0], x[1] - t * e[1]]);
                }
                numeric += w * (hi - lo) * t * ring * dtheta;
            }
        }
    }

    // analytic far field: u vanishes beyond r_max, exponents frozen at the
    // diagonal values
    let tail = if ux == 0.0 {
        0.0
    } else {
        let pb = exps.p(&x, &x);
        let sb = exps.s(&x, &x);
        let surface = if dim == 1 {
            2.0
        } else {
            2.0 * std::f64::consts::PI
        };
        ux.abs().powf(pb - 1.0) * ux.signum() * surface * r_max.powf(-pb * sb) / (pb * sb)
    };

    Ok(numeric + tail)
}

fn nearest_node(space: &FunctionSpace, x: Point) -> Option<usize> {
    let dom = space.domain();
    let bmin = dom.b_min();
    let h = dom.spacing();
    let nodes = dom.nodes_per_axis();
    let mut idx = [0usize; 2];
    for axis in 0..dom.dim() {
        let t = (x[axis] - bmin[axis]) / h[axis];
        let i = t.round();
        if (t - i).abs() > 1e-9 || i < 0.0 || i as usize >= nodes[axis] {
            return None;
        }
        idx[axis] = i as usize;
    }
    let node = dom.node_index(idx[0], idx[1]);
    dom.free_index_of(node).map(|_| node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::exponents::ExponentField;
    use crate::quad::QuadConfig;
    use std::sync::Arc;

    fn space_1d(cells: usize, p0: f64, s0: f64) -> FunctionSpace {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, cells, 2.0).unwrap());
        let exps = ExponentField::constant(p0, s0, &dom).unwrap();
        FunctionSpace::new(dom, exps, QuadConfig::for_dim(1)).unwrap()
    }

    #[test]
    fn pairing_with_itself_is_the_modular() {
        let sp = space_1d(8, 2.6, 0.45);
        let u = DiscreteField::hat(sp.domain().clone(), [0.5, 0.0], 0.375, 1.0);
        let lhs = weak_pairing(&sp, &u, &u);
        let rhs = sp.fractional_modular(&u);
        assert!(((lhs - rhs) / rhs).abs() < 1e-12, "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn pairing_vanishes_for_zero_field() {
        let sp = space_1d(8, 2.0, 0.5);
        let zero = DiscreteField::zero(sp.domain().clone());
        let phi = DiscreteField::basis(sp.domain().clone(), 2);
        assert_eq!(weak_pairing(&sp, &zero, &phi), 0.0);
        let a = assemble(&sp, &zero);
        assert!(a.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn assembly_matches_per_basis_pairings() {
        let sp = space_1d(8, 2.3, 0.4);
        let u = DiscreteField::hat(sp.domain().clone(), [0.5, 0.0], 0.375, 0.8);
        let assembled = assemble(&sp, &u);
        for i in 0..sp.domain().num_free() {
            let phi = DiscreteField::basis(sp.domain().clone(), i);
            let direct = weak_pairing(&sp, &u, &phi);
            assert!(
                (assembled[i] - direct).abs() < 1e-12 * direct.abs().max(1.0),
                "i={i}: {} vs {direct}",
                assembled[i]
            );
        }
    }

    #[test]
    fn inner_product_identity_and_oddness() {
        let sp = space_1d(8, 2.4, 0.35);
        let u = DiscreteField::hat(sp.domain().clone(), [0.5, 0.0], 0.25, 1.1);
        let a = assemble(&sp, &u);
        let dot: f64 = a
            .iter()
            .zip(u.free_values().iter())
            .map(|(ai, ui)| ai * ui)
            .sum();
        let modular = sp.fractional_modular(&u);
        assert!(((dot - modular) / modular).abs() < 1e-12);

        let a_neg = assemble(&sp, &u.scaled(-1.0));
        for (x, y) in a.iter().zip(a_neg.iter()) {
            assert!((x + y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn pairing_symmetric_at_p_two() {
        let sp = space_1d(8, 2.0, 0.5);
        let u = DiscreteField::hat(sp.domain().clone(), [0.375, 0.0], 0.25, 1.0);
        let w = DiscreteField::hat(sp.domain().clone(), [0.625, 0.0], 0.25, 0.7);
        let a = weak_pairing(&sp, &u, &w);
        let b = weak_pairing(&sp, &w, &u);
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn pointwise_zero_field_and_radius_guard() {
        let sp = space_1d(16, 2.0, 0.5);
        let zero = DiscreteField::zero(sp.domain().clone());
        let v = apply_pointwise(&sp, &zero, [0.5, 0.0], 0.25).unwrap();
        assert_eq!(v, 0.0);
        assert!(matches!(
            apply_pointwise(&sp, &zero, [0.5, 0.0], 1e-4),
            Err(OperatorError::RadiusTooSmall { .. })
        ));
        assert!(matches!(
            apply_pointwise(&sp, &zero, [0.51, 0.0], 0.25),
            Err(OperatorError::NotAnInteriorNode { .. })
        ));
    }

    #[test]
    fn pointwise_odd_field_cancels_exactly() {
        let sp = space_1d(16, 2.0, 0.4);
        // odd about 0.5: u(0.5 + t) = -u(0.5 - t), zero at the center
        let dom = sp.domain().clone();
        let u = DiscreteField::from_fn(dom, |x| {
            let t = x[0] - 0.5;
            if t.abs() > 0.25 {
                0.0
            } else {
                t * (1.0 - (t / 0.25).abs())
            }
        })
        .unwrap();
        let v = apply_pointwise(&sp, &u, [0.5, 0.0], 0.125).unwrap();
        // paired quadrature points cancel up to interpolation round-off
        assert!(v.abs() < 1e-9, "pointwise value {v}");
    }

    /// Frozen oracle: tent of halfwidth w and height 1 at its peak has
    /// principal value (2/w)(1 + ln(w/r)) at p=2, s=1/2 once the ball of
    /// radius r is excluded (closed form by direct integration).
    #[test]
    fn pointwise_tent_peak_oracle() {
        let sp = space_1d(16, 2.0, 0.5);
        let u = DiscreteField::hat(sp.domain().clone(), [0.5, 0.0], 0.25, 1.0);
        let r = 0.125;
        let oracle = (2.0 / 0.25) * (1.0 + (0.25_f64 / r).ln());
        let got = apply_pointwise(&sp, &u, [0.5, 0.0], r).unwrap();
        assert!(
            ((got - oracle) / oracle).abs() < 0.05,
            "got {got}, oracle {oracle}"
        );
    }
}
