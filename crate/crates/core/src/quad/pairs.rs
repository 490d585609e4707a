//! Cell-pair quadrature for the nonlocal double integral over `B x B`.
//!
//! The rule is a fixed list of point pairs `(x, y)` with weights that
//! already absorb the kernel denominator `|x-y|^{N + p(x,y) s(x,y)}`.
//! Every modular, pairing and gradient is then a plain weighted sum over
//! the list, so energies and their assembled derivatives are consistent by
//! construction.
//!
//! Pair handling:
//! - well-separated cell pairs: tensor Gauss on each cell;
//! - touching or identical pairs: difference coordinates `z = y - x`. For
//!   fixed `z` the kernel is constant in `x` and the overlap integral is
//!   smooth, so the singularity lives in the `z` integral alone. The `z`
//!   box is split at the singular point, Duffy-mapped (2-d), and graded
//!   geometrically toward zero with a weighted one-point core.
//!
//! Unordered distinct pairs are emitted once with doubled weights; all
//! integrands of interest are symmetric under `(x, y)` swap because the
//! exponents are symmetric (enforced by validation).

use crate::domain::{DomainSpec, Point, MAX_CELL_NODES};
use crate::error::ExponentError;

use super::{gauss_legendre_01, graded_radial, QuadConfig};

/// One point pair of the double-integral rule.
#[derive(Debug, Clone)]
pub struct PairPoint {
    pub x: Point,
    pub y: Point,
    /// Exponent p(x, y).
    pub p: f64,
    /// Weight divided by the kernel denominator.
    pub kw: f64,
    pub nodes_x: [u32; MAX_CELL_NODES],
    pub shape_x: [f64; MAX_CELL_NODES],
    pub nodes_y: [u32; MAX_CELL_NODES],
    pub shape_y: [f64; MAX_CELL_NODES],
}

impl PairPoint {
    /// Difference `u(x) - u(y)` of the interpolated field.
    #[inline]
    pub fn diff(&self, nodal: &[f64]) -> f64 {
        let mut ux = 0.0;
        let mut uy = 0.0;
        for j in 0..MAX_CELL_NODES {
            ux += self.shape_x[j] * nodal[self.nodes_x[j] as usize];
            uy += self.shape_y[j] * nodal[self.nodes_y[j] as usize];
        }
        ux - uy
    }
}

/// Fixed rule for the fractional modular and its weak forms.
#[derive(Debug, Clone)]
pub struct FracQuadrature {
    pairs: Vec<PairPoint>,
    p_min: f64,
    p_max: f64,
    s_min: f64,
    s_max: f64,
}

impl FracQuadrature {
    /// Build the rule for a grid and a pair of exponent evaluators.
    pub fn build(
        dom: &DomainSpec,
        p_fn: &(dyn Fn(&Point, &Point) -> f64 + Sync),
        s_fn: &(dyn Fn(&Point, &Point) -> f64 + Sync),
        cfg: &QuadConfig,
    ) -> Result<Self, ExponentError> {
        let mut builder = Builder {
            dom,
            p_fn,
            s_fn,
            cfg,
            pairs: Vec::new(),
            p_min: f64::INFINITY,
            p_max: f64::NEG_INFINITY,
            s_min: f64::INFINITY,
            s_max: f64::NEG_INFINITY,
        };
        let ncells = dom.num_cells();
        for ca in 0..ncells {
            for cb in ca..ncells {
                if !builder.pair_is_active(ca, cb) {
                    continue;
                }
                let mult = if ca == cb { 1.0 } else { 2.0 };
                if builder.pair_is_touching(ca, cb) {
                    builder.singular_pair(ca, cb, mult)?;
                } else {
                    builder.separated_pair(ca, cb, mult)?;
                }
            }
        }
        Ok(FracQuadrature {
            pairs: builder.pairs,
            p_min: builder.p_min,
            p_max: builder.p_max,
            s_min: builder.s_min,
            s_max: builder.s_max,
        })
    }

    pub fn pairs(&self) -> &[PairPoint] {
        &self.pairs
    }

    /// Exponent bounds attained on the rule's own points.
    pub fn exponent_bounds(&self) -> (f64, f64, f64, f64) {
        (self.p_min, self.p_max, self.s_min, self.s_max)
    }
}

struct Builder<'a> {
    dom: &'a DomainSpec,
    p_fn: &'a (dyn Fn(&Point, &Point) -> f64 + Sync),
    s_fn: &'a (dyn Fn(&Point, &Point) -> f64 + Sync),
    cfg: &'a QuadConfig,
    pairs: Vec<PairPoint>,
    p_min: f64,
    p_max: f64,
    s_min: f64,
    s_max: f64,
}

impl<'a> Builder<'a> {
    /// Pairs where both cells lie outside the inner region contribute
    /// nothing: the field vanishes on them identically.
    fn pair_is_active(&self, ca: usize, cb: usize) -> bool {
        self.dom.cell_in_omega(ca) || self.dom.cell_in_omega(cb)
    }

    fn pair_is_touching(&self, ca: usize, cb: usize) -> bool {
        let (a0, a1) = self.dom.cell_multi(ca);
        let (b0, b1) = self.dom.cell_multi(cb);
        let d0 = (a0 as isize - b0 as isize).abs();
        let d1 = (a1 as isize - b1 as isize).abs();
        d0 <= 1 && d1 <= 1
    }

    fn emit(&mut self, ca: usize, cb: usize, x: Point, y: Point, w: f64) -> Result<(), ExponentError> {
        let p = (self.p_fn)(&x, &y);
        let s = (self.s_fn)(&x, &y);
        if !p.is_finite() {
            return Err(ExponentError::NonFinite { x, y, value: p });
        }
        if !s.is_finite() {
            return Err(ExponentError::NonFinite { x, y, value: s });
        }
        self.p_min = self.p_min.min(p);
        self.p_max = self.p_max.max(p);
        self.s_min = self.s_min.min(s);
        self.s_max = self.s_max.max(s);
        let d = self.dom.distance(x, y);
        debug_assert!(d > 0.0);
        let kw = w / d.powf(self.dom.dim() as f64 + p * s);
        self.pairs.push(PairPoint {
            x,
            y,
            p,
            kw,
            nodes_x: self.dom.cell_nodes(ca),
            shape_x: self.dom.shape_values(ca, x),
            nodes_y: self.dom.cell_nodes(cb),
            shape_y: self.dom.shape_values(cb, y),
        });
        Ok(())
    }

    fn separated_pair(&mut self, ca: usize, cb: usize, mult: f64) -> Result<(), ExponentError> {
        let gauss = gauss_legendre_01(self.cfg.sep_gauss);
        let dim = self.dom.dim();
        let h = self.dom.spacing();
        let corner_a = self.dom.cell_corner(ca);
        let corner_b = self.dom.cell_corner(cb);
        let vol = self.dom.cell_volume();
        let pts_a = tensor_points(dim, corner_a, h, &gauss);
        let pts_b = tensor_points(dim, corner_b, h, &gauss);
        for &(x, wx) in &pts_a {
            for &(y, wy) in &pts_b {
                self.emit(ca, cb, x, y, mult * wx * wy * vol * vol)?;
            }
        }
        Ok(())
    }

    /// Touching or identical pair via difference coordinates.
    fn singular_pair(&mut self, ca: usize, cb: usize, mult: f64) -> Result<(), ExponentError> {
        let dim = self.dom.dim();
        let h = self.dom.spacing();
        let corner_a = self.dom.cell_corner(ca);
        let corner_b = self.dom.cell_corner(cb);
        let mut offset = [0.0; 2];
        for axis in 0..dim {
            offset[axis] = corner_b[axis] - corner_a[axis];
        }
        // local power of the radial integrand, frozen at the cell centers
        let mut xc = corner_a;
        let mut yc = corner_b;
        for axis in 0..dim {
            xc[axis] += 0.5 * h[axis];
            yc[axis] += 0.5 * h[axis];
        }
        let p0 = (self.p_fn)(&xc, &yc);
        let s0 = (self.s_fn)(&xc, &yc);
        if !p0.is_finite() || !s0.is_finite() {
            return Err(ExponentError::NonFinite {
                x: xc,
                y: yc,
                value: if p0.is_finite() { s0 } else { p0 },
            });
        }
        let alpha = p0 * (1.0 - s0);
        let edge_axes = (0..dim).filter(|&a| offset[a].abs() > 0.5 * h[a]).count();

        // Quadrant decomposition of the difference box, split per axis at
        // the cell width so each sub-box either touches the singular point
        // or is uniformly separated from it.
        let signs: &[[f64; 2]] = if dim == 1 {
            &[[1.0, 0.0], [-1.0, 0.0]]
        } else {
            &[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
        };
        for sg in signs {
            let mut widths = [0.0; 2];
            let mut empty = false;
            for axis in 0..dim {
                // z range on this side of zero: [0, c+h] or [0, h-c]
                let w = if sg[axis] > 0.0 {
                    offset[axis] + h[axis]
                } else {
                    h[axis] - offset[axis]
                };
                if w <= 0.5 * h[axis] {
                    empty = true;
                }
                widths[axis] = w;
            }
            if empty {
                continue;
            }
            // per-axis sub-ranges: [0,h] (and [h,2h] when the width is 2h)
            let mut subs: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
            for axis in 0..dim {
                subs[axis].push((0.0, h[axis]));
                if widths[axis] > 1.5 * h[axis] {
                    subs[axis].push((h[axis], 2.0 * h[axis]));
                }
            }
            let sub1: &[(f64, f64)] = if dim == 2 { &subs[1] } else { &[(0.0, 0.0)] };
            for &r1 in sub1 {
                for &r0 in subs[0].iter() {
                    let touches = r0.0 == 0.0 && (dim == 1 || r1.0 == 0.0);
                    if touches {
                        self.duffy_core(ca, cb, *sg, offset, alpha, edge_axes, mult)?;
                    } else {
                        self.plain_z_box(ca, cb, *sg, offset, [r0, r1], mult)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Smooth z sub-box of a touching pair: tensor Gauss in z.
    fn plain_z_box(
        &mut self,
        ca: usize,
        cb: usize,
        sg: [f64; 2],
        offset: [f64; 2],
        ranges: [(f64, f64); 2],
        mult: f64,
    ) -> Result<(), ExponentError> {
        let dim = self.dom.dim();
        let gauss = gauss_legendre_01(self.cfg.sep_gauss);
        let mut znodes: Vec<(Point, f64)> = vec![([0.0; 2], 1.0)];
        for axis in 0..dim {
            let (lo, hi) = ranges[axis];
            let mut next = Vec::with_capacity(znodes.len() * gauss.len());
            for &(z, wz) in &znodes {
                for &(g, w) in &gauss {
                    let mut z2 = z;
                    z2[axis] = sg[axis] * (lo + (hi - lo) * g);
                    next.push((z2, wz * w * (hi - lo)));
                }
            }
            znodes = next;
        }
        for &(z, wz) in &znodes {
            self.overlap_points(ca, cb, offset, z, wz * mult)?;
        }
        Ok(())
    }

    /// Singular z sub-box `[0,h0] x [0,h1]` (signed): graded radial rule
    /// with Duffy triangles in 2-d.
    fn duffy_core(
        &mut self,
        ca: usize,
        cb: usize,
        sg: [f64; 2],
        offset: [f64; 2],
        alpha: f64,
        edge_axes: usize,
        mult: f64,
    ) -> Result<(), ExponentError> {
        let dim = self.dom.dim();
        let h = self.dom.spacing();
        let beta = alpha - 1.0 + edge_axes as f64;
        if dim == 1 {
            let radial = graded_radial(
                h[0],
                self.cfg.graded_levels,
                self.cfg.radial_gauss,
                beta,
                self.cfg.grading,
            );
            for &(t, wt) in &radial {
                let z = [sg[0] * t, 0.0];
                self.overlap_points(ca, cb, offset, z, wt * mult)?;
            }
        } else {
            let radial = graded_radial(
                1.0,
                self.cfg.graded_levels,
                self.cfg.radial_gauss,
                beta,
                self.cfg.grading,
            );
            let cross = gauss_legendre_01(self.cfg.cross_gauss);
            // triangle 0: z0 = h0*rho, z1 = h1*rho*tau; triangle 1 swaps axes
            for tri in 0..2 {
                for &(rho, wr) in &radial {
                    for &(tau, wtau) in &cross {
                        let (z0, z1) = if tri == 0 {
                            (h[0] * rho, h[1] * rho * tau)
                        } else {
                            (h[0] * rho * tau, h[1] * rho)
                        };
                        let z = [sg[0] * z0, sg[1] * z1];
                        let jac = h[0] * h[1] * rho;
                        self.overlap_points(ca, cb, offset, z, wr * wtau * jac * mult)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// For a fixed difference `z`, integrate over the overlap
    /// `K_a ∩ (K_b - z)` with tensor Gauss and emit the pairs `(x, x+z)`.
    fn overlap_points(
        &mut self,
        ca: usize,
        cb: usize,
        offset: [f64; 2],
        z: Point,
        wz: f64,
    ) -> Result<(), ExponentError> {
        let dim = self.dom.dim();
        let h = self.dom.spacing();
        let corner_a = self.dom.cell_corner(ca);
        let gauss = gauss_legendre_01(self.cfg.overlap_gauss);
        let mut lo = [0.0; 2];
        let mut len = [0.0; 2];
        for axis in 0..dim {
            let l = h[axis] - (z[axis] - offset[axis]).abs();
            if l <= 0.0 {
                return Ok(()); // zero-measure overlap at the box boundary
            }
            lo[axis] = (corner_a[axis]).max(corner_a[axis] + offset[axis] - z[axis]);
            len[axis] = l;
        }
        if dim == 1 {
            for &(g0, w0) in &gauss {
                let x = [lo[0] + g0 * len[0], 0.0];
                let y = [x[0] + z[0], 0.0];
                self.emit(ca, cb, x, y, wz * w0 * len[0])?;
            }
        } else {
            for &(g1, w1) in &gauss {
                for &(g0, w0) in &gauss {
                    let x = [lo[0] + g0 * len[0], lo[1] + g1 * len[1]];
                    let y = [x[0] + z[0], x[1] + z[1]];
                    self.emit(ca, cb, x, y, wz * w0 * w1 * len[0] * len[1])?;
                }
            }
        }
        Ok(())
    }
}

fn tensor_points(dim: usize, corner: Point, h: [f64; 2], gauss: &[(f64, f64)]) -> Vec<(Point, f64)> {
    let mut out = Vec::new();
    if dim == 1 {
        for &(g0, w0) in gauss {
            out.push(([corner[0] + g0 * h[0], 0.0], w0));
        }
    } else {
        for &(g1, w1) in gauss {
            for &(g0, w0) in gauss {
                out.push(([corner[0] + g0 * h[0], corner[1] + g1 * h[1]], w0 * w1));
            }
        }
    }
    out
}
