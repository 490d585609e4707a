//! Variable-exponent Lebesgue modulars, Luxemburg norms, the fractional
//! modular and Gagliardo-type norm of the zero-trace space, and the
//! empirical embedding ratio.

use std::sync::Arc;

use serde::Serialize;

use crate::detsum;
use crate::domain::{DomainSpec, Point};
use crate::error::NormError;
use crate::exponents::{ExponentBounds, ExponentField, PointMap};
use crate::field::DiscreteField;
use crate::quad::{CellQuadrature, FracQuadrature, QuadConfig};

/// Position of a quantity relative to the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Below,
    Unit,
    Above,
}

const UNIT_TOL: f64 = 1e-9;

pub fn regime_of(value: f64) -> Regime {
    if value < 1.0 - UNIT_TOL {
        Regime::Below
    } else if value > 1.0 + UNIT_TOL {
        Regime::Above
    } else {
        Regime::Unit
    }
}

/// Modular and norm of a field with quadrature diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ModularReport {
    pub modular: f64,
    pub norm: f64,
    pub regime_modular: Regime,
    pub regime_norm: Regime,
    /// Difference between the fine and coarsened rules.
    pub quad_error_estimate: f64,
    pub accuracy_warning: bool,
    /// Analytic bound on the part of the double integral outside the
    /// truncation box.
    pub truncation_tail_bound: f64,
    pub grid_h: f64,
}

/// Two sides of the Holder inequality, plus the sharper constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderPairing {
    /// `|int u v|`
    pub lhs: f64,
    /// `2 ||u||_p ||v||_q`
    pub rhs: f64,
    /// `(1/p- + 1/q-) ||u||_p ||v||_q`
    pub sharp_rhs: f64,
}

/// Workspace bundling the grid, the exponent field and the fixed
/// quadrature rules. All operations are pure; the struct is immutable and
/// cheap to share.
pub struct FunctionSpace {
    dom: Arc<DomainSpec>,
    exps: ExponentField,
    cfg: QuadConfig,
    frac: FracQuadrature,
    frac_coarse: FracQuadrature,
    cells: CellQuadrature,
    bounds: ExponentBounds,
}

impl FunctionSpace {
    pub fn new(
        dom: Arc<DomainSpec>,
        exps: ExponentField,
        cfg: QuadConfig,
    ) -> Result<Self, NormError> {
        let p = exps.p_fn();
        let s = exps.s_fn();
        let frac = FracQuadrature::build(&dom, &*p, &*s, &cfg)?;
        let frac_coarse = FracQuadrature::build(&dom, &*p, &*s, &cfg.coarsened())?;
        let cells = CellQuadrature::over_omega(&dom, cfg.cell_gauss);
        // effective bounds: lattice samples joined with the rule's points,
        // so the discrete sandwich inequalities hold exactly
        let lat = exps.bounds();
        let (pmin, pmax, smin, smax) = frac.exponent_bounds();
        let bounds = ExponentBounds {
            p_min: lat.p_min.min(pmin),
            p_max: lat.p_max.max(pmax),
            s_min: lat.s_min.min(smin),
            s_max: lat.s_max.max(smax),
        };
        Ok(FunctionSpace {
            dom,
            exps,
            cfg,
            frac,
            frac_coarse,
            cells,
            bounds,
        })
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.dom
    }

    pub fn exponents(&self) -> &ExponentField {
        &self.exps
    }

    pub fn config(&self) -> &QuadConfig {
        &self.cfg
    }

    pub fn frac_rule(&self) -> &FracQuadrature {
        &self.frac
    }

    pub fn cell_rule(&self) -> &CellQuadrature {
        &self.cells
    }

    /// Exponent bounds joined over the sample lattice and the quadrature
    /// points of the pair rule.
    pub fn exponent_bounds(&self) -> ExponentBounds {
        self.bounds
    }

    // ----- Lebesgue side -------------------------------------------------

    /// `int_Omega |u|^{p(x)} dx` for a nodal field.
    pub fn lebesgue_modular(&self, u: &DiscreteField, p: &PointMap) -> f64 {
        if u.is_zero() {
            return 0.0;
        }
        let vals = u.values();
        self.cells.integrate(|pt| {
            let v = pt.interp(vals).abs();
            if v == 0.0 {
                0.0
            } else {
                pt.w * v.powf(p(&pt.x))
            }
        })
    }

    /// Same modular for an arbitrary evaluator (used for source terms).
    pub fn lebesgue_modular_fn(&self, f: &(dyn Fn(&Point) -> f64 + Sync), p: &PointMap) -> f64 {
        self.cells.integrate(|pt| {
            let v = f(&pt.x).abs();
            if v == 0.0 {
                0.0
            } else {
                pt.w * v.powf(p(&pt.x))
            }
        })
    }

    /// Luxemburg norm `inf { lambda > 0 : modular(u / lambda) <= 1 }`.
    pub fn luxemburg_norm(&self, u: &DiscreteField, p: &PointMap) -> Result<f64, NormError> {
        if u.is_zero() {
            return Ok(0.0);
        }
        let vals = u.values();
        let terms: Vec<(f64, f64, f64)> = self
            .cells
            .points()
            .iter()
            .filter_map(|pt| {
                let v = pt.interp(vals).abs();
                if v == 0.0 {
                    None
                } else {
                    Some((pt.w, p(&pt.x), v))
                }
            })
            .collect();
        luxemburg_root(|lambda| {
            detsum::map_sum(&terms, |&(w, pe, v)| w * (v / lambda).powf(pe))
        })
    }

    /// Luxemburg norm of an arbitrary evaluator.
    pub fn luxemburg_norm_fn(
        &self,
        f: &(dyn Fn(&Point) -> f64 + Sync),
        p: &PointMap,
    ) -> Result<f64, NormError> {
        let terms: Vec<(f64, f64, f64)> = self
            .cells
            .points()
            .iter()
            .filter_map(|pt| {
                let v = f(&pt.x).abs();
                if v == 0.0 {
                    None
                } else {
                    Some((pt.w, p(&pt.x), v))
                }
            })
            .collect();
        if terms.is_empty() {
            return Ok(0.0);
        }
        luxemburg_root(|lambda| {
            detsum::map_sum(&terms, |&(w, pe, v)| w * (v / lambda).powf(pe))
        })
    }

    /// Both sides of the Holder inequality for a conjugate pair `(p, q)`.
    pub fn holder_pairing(
        &self,
        u: &DiscreteField,
        v: &DiscreteField,
        p: &PointMap,
        q: &PointMap,
    ) -> Result<HolderPairing, NormError> {
        // conjugacy on the quadrature measure
        let mut p_min = f64::INFINITY;
        let mut q_min = f64::INFINITY;
        for pt in self.cells.points() {
            let pv = p(&pt.x);
            let qv = q(&pt.x);
            let defect = (1.0 / pv + 1.0 / qv - 1.0).abs();
            if defect > 1e-9 {
                return Err(NormError::NotConjugate { x: pt.x, defect });
            }
            p_min = p_min.min(pv);
            q_min = q_min.min(qv);
        }
        let uv = u.values();
        let vv = v.values();
        let lhs = self
            .cells
            .integrate(|pt| pt.w * pt.interp(uv) * pt.interp(vv))
            .abs();
        let nu = self.luxemburg_norm(u, p)?;
        let nv = self.luxemburg_norm(v, q)?;
        Ok(HolderPairing {
            lhs,
            rhs: 2.0 * nu * nv,
            sharp_rhs: (1.0 / p_min + 1.0 / q_min) * nu * nv,
        })
    }

    // ----- Gagliardo side ------------------------------------------------

    /// Fractional modular: double integral of
    /// `|u(x)-u(y)|^{p(x,y)} / |x-y|^{N + p s}` over the truncated pair
    /// domain.
    pub fn fractional_modular(&self, u: &DiscreteField) -> f64 {
        if u.is_zero() {
            return 0.0;
        }
        let vals = u.values();
        detsum::map_sum(self.frac.pairs(), |pt| {
            let du = pt.diff(vals).abs();
            if du == 0.0 {
                0.0
            } else {
                pt.kw * du.powf(pt.p)
            }
        })
    }

    /// Fractional modular with the `1 / p(x,y)` weight.
    pub fn weighted_modular(&self, u: &DiscreteField) -> f64 {
        if u.is_zero() {
            return 0.0;
        }
        let vals = u.values();
        detsum::map_sum(self.frac.pairs(), |pt| {
            let du = pt.diff(vals).abs();
            if du == 0.0 {
                0.0
            } else {
                pt.kw / pt.p * du.powf(pt.p)
            }
        })
    }

    /// Luxemburg-type norm of the zero-trace space: scale at which the
    /// fractional modular reaches one.
    pub fn gagliardo_norm(&self, u: &DiscreteField) -> Result<f64, NormError> {
        if u.is_zero() {
            return Ok(0.0);
        }
        let vals = u.values();
        let terms: Vec<(f64, f64, f64)> = self
            .frac
            .pairs()
            .iter()
            .filter_map(|pt| {
                let du = pt.diff(vals).abs();
                if du == 0.0 {
                    None
                } else {
                    Some((pt.kw, pt.p, du))
                }
            })
            .collect();
        if terms.is_empty() {
            return Ok(0.0);
        }
        luxemburg_root(|lambda| {
            detsum::map_sum(&terms, |&(kw, pe, du)| kw * (du / lambda).powf(pe))
        })
    }

    /// Modular, norm, regimes and quadrature diagnostics in one record.
    pub fn modular_report(&self, u: &DiscreteField) -> Result<ModularReport, NormError> {
        let modular = self.fractional_modular(u);
        let norm = self.gagliardo_norm(u)?;
        let coarse = if u.is_zero() {
            0.0
        } else {
            let vals = u.values();
            detsum::map_sum(self.frac_coarse.pairs(), |pt| {
                let du = pt.diff(vals).abs();
                if du == 0.0 {
                    0.0
                } else {
                    pt.kw * du.powf(pt.p)
                }
            })
        };
        let est = (modular - coarse).abs();
        Ok(ModularReport {
            modular,
            norm,
            regime_modular: regime_of(modular),
            regime_norm: regime_of(norm),
            quad_error_estimate: est,
            accuracy_warning: est > self.cfg.target_rel_tol * modular.abs().max(1e-300),
            truncation_tail_bound: self.truncation_tail_bound(u),
            grid_h: self.dom.max_spacing(),
        })
    }

    /// Ratio `||u||_{q} / ||u||` probing the compact-embedding constant;
    /// requires `q` subcritical on the inner region and a nonzero field.
    /// Where `N <= s(x,x) p(x,x)` the critical exponent is unbounded and
    /// every finite `q` is subcritical.
    pub fn embedding_ratio(&self, u: &DiscreteField, q: &PointMap) -> Result<f64, NormError> {
        let n = self.dom.dim() as f64;
        for pt in self.cells.points() {
            let pb = self.exps.p(&pt.x, &pt.x);
            let sb = self.exps.s(&pt.x, &pt.x);
            let denominator = n - sb * pb;
            if denominator <= 0.0 {
                continue;
            }
            let crit = n * pb / denominator;
            let qv = q(&pt.x);
            if qv >= crit {
                return Err(NormError::Supercritical {
                    x: pt.x,
                    q: qv,
                    critical: crit,
                });
            }
        }
        let denom = self.gagliardo_norm(u)?;
        if denom == 0.0 {
            return Err(NormError::ZeroField);
        }
        Ok(self.luxemburg_norm(u, q)? / denom)
    }

    /// Analytic bound for the part of the fractional modular lost to the
    /// truncation box: for `x` inside the region and `y` beyond the box
    /// the integrand is `|u(x)|^{p} |x-y|^{-N-ps}`, bounded using the
    /// extreme exponents and the distance to the box boundary.
    pub fn truncation_tail_bound(&self, u: &DiscreteField) -> f64 {
        if u.is_zero() {
            return 0.0;
        }
        let b = self.bounds;
        let a_lo = b.p_min * b.s_min;
        let a_hi = b.p_max * b.s_max;
        let surface = if self.dom.dim() == 1 {
            2.0
        } else {
            2.0 * std::f64::consts::PI
        };
        let vals = u.values();
        let integral = self.cells.integrate(|pt| {
            let v = pt.interp(vals).abs();
            if v == 0.0 {
                return 0.0;
            }
            let d = self.dom.distance_to_b_boundary(pt.x);
            let radial = if d >= 1.0 {
                d.powf(-a_lo) / a_lo
            } else {
                (d.powf(-a_hi) - 1.0) / a_hi + 1.0 / a_lo
            };
            pt.w * v.powf(b.p_min).max(v.powf(b.p_max)) * radial
        });
        2.0 * surface * integral
    }
}

/// Bracket the unit-modular scale by doubling/halving from one, then
/// bisect. `modular_at` must be strictly decreasing in the scale.
pub fn luxemburg_root(modular_at: impl Fn(f64) -> f64) -> Result<f64, NormError> {
    let m1 = modular_at(1.0);
    if !m1.is_finite() && m1 != f64::INFINITY {
        return Err(NormError::BracketFailure {
            lambda: 1.0,
            modular: m1,
        });
    }
    let (mut lo, mut hi);
    if m1 > 1.0 {
        lo = 1.0;
        hi = 2.0;
        let mut tries = 0;
        while modular_at(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(NormError::BracketFailure {
                    lambda: hi,
                    modular: modular_at(hi),
                });
            }
        }
    } else if m1 < 1.0 {
        hi = 1.0;
        lo = 0.5;
        let mut tries = 0;
        loop {
            let m = modular_at(lo);
            if m > 1.0 {
                break;
            }
            if m == 0.0 || !m.is_finite() {
                return Err(NormError::BracketFailure {
                    lambda: lo,
                    modular: m,
                });
            }
            hi = lo;
            lo *= 0.5;
            tries += 1;
            if tries > 200 {
                return Err(NormError::BracketFailure {
                    lambda: lo,
                    modular: modular_at(lo),
                });
            }
        }
    } else {
        return Ok(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if modular_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
