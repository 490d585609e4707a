//! Variable exponent `p(x,y)` and variable order `s(x,y)`: construction,
//! sampled bounds, admissibility validation, conjugate and critical
//! exponents.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{DomainSpec, Point};
use crate::error::ExponentError;

/// Symmetric pair evaluator, e.g. `p(x, y)`.
pub type PairFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;

/// Pointwise evaluator, e.g. a Lebesgue exponent `q(x)`.
pub type PointMap = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Sampled extrema of the exponent and order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentBounds {
    pub p_min: f64,
    pub p_max: f64,
    pub s_min: f64,
    pub s_max: f64,
}

/// Variable exponent and variable order with bounds sampled on a lattice
/// over the truncation box. Evaluators are pure and shared; the field is
/// immutable after construction.
#[derive(Clone)]
pub struct ExponentField {
    dim: usize,
    p: PairFn,
    s: PairFn,
    /// Bounds over a lattice on `B x B`.
    bounds: ExponentBounds,
    /// Bounds over lattice pairs restricted to the closed inner region.
    omega_bounds: ExponentBounds,
}

impl std::fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExponentField")
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .finish()
    }
}

fn lattice_points(dom: &DomainSpec, per_axis: usize) -> Vec<Point> {
    let n = per_axis.max(2);
    let dim = dom.dim();
    let bmin = dom.b_min();
    let bmax = dom.b_max();
    let coord = |axis: usize, i: usize| {
        bmin[axis] + (bmax[axis] - bmin[axis]) * i as f64 / (n - 1) as f64
    };
    let mut pts = Vec::new();
    if dim == 1 {
        for i in 0..n {
            pts.push([coord(0, i), 0.0]);
        }
    } else {
        for j in 0..n {
            for i in 0..n {
                pts.push([coord(0, i), coord(1, j)]);
            }
        }
    }
    pts
}

impl ExponentField {
    /// Sample bounds on a `samples`-per-axis lattice and build the field.
    /// Fails on non-finite values; admissibility is checked separately by
    /// [`validate_exponents`].
    pub fn sampled(
        p: PairFn,
        s: PairFn,
        dom: &DomainSpec,
        samples: usize,
    ) -> Result<Self, ExponentError> {
        let lattice = lattice_points(dom, samples);
        let omega_lattice: Vec<Point> = lattice
            .iter()
            .cloned()
            .filter(|&x| dom.point_in_omega_closure(x))
            .collect();
        let mut bounds = ExponentBounds {
            p_min: f64::INFINITY,
            p_max: f64::NEG_INFINITY,
            s_min: f64::INFINITY,
            s_max: f64::NEG_INFINITY,
        };
        let mut omega_bounds = bounds;
        for x in &lattice {
            for y in &lattice {
                let pv = p(x, y);
                let sv = s(x, y);
                if !pv.is_finite() {
                    return Err(ExponentError::NonFinite {
                        x: *x,
                        y: *y,
                        value: pv,
                    });
                }
                if !sv.is_finite() {
                    return Err(ExponentError::NonFinite {
                        x: *x,
                        y: *y,
                        value: sv,
                    });
                }
                bounds.p_min = bounds.p_min.min(pv);
                bounds.p_max = bounds.p_max.max(pv);
                bounds.s_min = bounds.s_min.min(sv);
                bounds.s_max = bounds.s_max.max(sv);
            }
        }
        for x in &omega_lattice {
            for y in &omega_lattice {
                let pv = p(x, y);
                let sv = s(x, y);
                omega_bounds.p_min = omega_bounds.p_min.min(pv);
                omega_bounds.p_max = omega_bounds.p_max.max(pv);
                omega_bounds.s_min = omega_bounds.s_min.min(sv);
                omega_bounds.s_max = omega_bounds.s_max.max(sv);
            }
        }
        Ok(ExponentField {
            dim: dom.dim(),
            p,
            s,
            bounds,
            omega_bounds,
        })
    }

    /// Constant exponents.
    pub fn constant(p0: f64, s0: f64, dom: &DomainSpec) -> Result<Self, ExponentError> {
        Self::sampled(
            Arc::new(move |_x, _y| p0),
            Arc::new(move |_x, _y| s0),
            dom,
            3,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self, x: &Point, y: &Point) -> f64 {
        (self.p)(x, y)
    }

    pub fn s(&self, x: &Point, y: &Point) -> f64 {
        (self.s)(x, y)
    }

    pub fn p_fn(&self) -> PairFn {
        self.p.clone()
    }

    pub fn s_fn(&self) -> PairFn {
        self.s.clone()
    }

    /// Diagonal trace `p(x, x)`, the Lebesgue exponent.
    pub fn p_bar(&self) -> PointMap {
        let p = self.p.clone();
        Arc::new(move |x: &Point| p(x, x))
    }

    pub fn s_bar(&self) -> PointMap {
        let s = self.s.clone();
        Arc::new(move |x: &Point| s(x, x))
    }

    /// Bounds sampled over the truncation box.
    pub fn bounds(&self) -> ExponentBounds {
        self.bounds
    }

    /// Bounds sampled over the closed inner region.
    pub fn omega_bounds(&self) -> ExponentBounds {
        self.omega_bounds
    }

    /// Critical Sobolev exponent `N p(x,x) / (N - s(x,x) p(x,x))`.
    pub fn critical_exponent(&self, x: Point) -> Result<f64, ExponentError> {
        let n = self.dim as f64;
        let pb = (self.p)(&x, &x);
        let sb = (self.s)(&x, &x);
        let denominator = n - sb * pb;
        if denominator <= 0.0 {
            return Err(ExponentError::Supercritical { x, denominator });
        }
        Ok(n * pb / denominator)
    }
}

/// Named exponent presets for configuration files.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum ExponentPreset {
    Constant {
        p0: f64,
        s0: f64,
    },
    /// `p0 + p_amp sin(freq * sum_i (x_i + y_i))`, similarly for `s`;
    /// symmetric by construction.
    Sinusoidal {
        p0: f64,
        p_amp: f64,
        s0: f64,
        s_amp: f64,
        freq: f64,
    },
    /// `p0 + p_slope * mean_i (x_i + y_i) / 2`, symmetric by construction.
    Affine {
        p0: f64,
        p_slope: f64,
        s0: f64,
        s_slope: f64,
    },
}

impl ExponentPreset {
    pub fn build(&self, dom: &DomainSpec, samples: usize) -> Result<ExponentField, ExponentError> {
        let dim = dom.dim();
        let (p, s): (PairFn, PairFn) = match *self {
            ExponentPreset::Constant { p0, s0 } => (
                Arc::new(move |_: &Point, _: &Point| p0),
                Arc::new(move |_: &Point, _: &Point| s0),
            ),
            ExponentPreset::Sinusoidal {
                p0,
                p_amp,
                s0,
                s_amp,
                freq,
            } => {
                let sum = move |x: &Point, y: &Point| -> f64 {
                    (0..dim).map(|a| x[a] + y[a]).sum()
                };
                (
                    Arc::new(move |x: &Point, y: &Point| p0 + p_amp * (freq * sum(x, y)).sin()),
                    Arc::new(move |x: &Point, y: &Point| s0 + s_amp * (freq * sum(x, y)).sin()),
                )
            }
            ExponentPreset::Affine {
                p0,
                p_slope,
                s0,
                s_slope,
            } => {
                let mid = move |x: &Point, y: &Point| -> f64 {
                    (0..dim).map(|a| 0.5 * (x[a] + y[a])).sum::<f64>() / dim as f64
                };
                (
                    Arc::new(move |x: &Point, y: &Point| p0 + p_slope * mid(x, y)),
                    Arc::new(move |x: &Point, y: &Point| s0 + s_slope * mid(x, y)),
                )
            }
        };
        ExponentField::sampled(p, s, dom, samples)
    }
}

/// Outcome of one validation check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    /// Signed margin; positive means the check holds with room to spare.
    pub margin: f64,
    /// Sample attaining the worst margin, when applicable.
    pub worst_sample: Option<(Point, Point)>,
    pub note: String,
}

/// Admissibility report for an exponent field on a domain.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
    pub bounds_box: ExponentBounds,
    pub bounds_omega: ExponentBounds,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

const SYMMETRY_TOL: f64 = 1e-9;

/// Check symmetry, the admissible ranges `0 < s- <= s+ < 1 < p- <= p+`,
/// and `N > p s` on the closed inner region, on a `samples`-per-axis
/// lattice. Bounds over the truncation box and over the inner region are
/// both reported; formulas elsewhere use the box bounds.
pub fn validate_exponents(
    fields: &ExponentField,
    dom: &DomainSpec,
    samples: usize,
) -> Result<ValidationReport, ExponentError> {
    assert!(samples >= 1, "samples must be positive");
    let lattice = lattice_points(dom, samples.max(2));
    let omega_lattice: Vec<Point> = lattice
        .iter()
        .cloned()
        .filter(|&x| dom.point_in_omega_closure(x))
        .collect();

    let mut entries = Vec::new();

    // symmetry of p and s
    for (name, f) in [("p symmetry", &fields.p), ("s symmetry", &fields.s)] {
        let mut worst = 0.0_f64;
        let mut worst_pair = None;
        for x in &lattice {
            for y in &lattice {
                let a = f(x, y);
                let b = f(y, x);
                if !a.is_finite() || !b.is_finite() {
                    return Err(ExponentError::NonFinite {
                        x: *x,
                        y: *y,
                        value: if a.is_finite() { b } else { a },
                    });
                }
                let defect = (a - b).abs() / a.abs().max(1.0);
                if defect > worst {
                    worst = defect;
                    worst_pair = Some((*x, *y));
                }
            }
        }
        entries.push(CheckEntry {
            name: name.to_string(),
            passed: worst <= SYMMETRY_TOL,
            margin: SYMMETRY_TOL - worst,
            worst_sample: worst_pair,
            note: format!("max relative asymmetry {worst:.3e}"),
        });
    }

    let b = fields.bounds();
    entries.push(CheckEntry {
        name: "p > 1".to_string(),
        passed: b.p_min > 1.0,
        margin: b.p_min - 1.0,
        worst_sample: None,
        note: format!("p in [{:.6}, {:.6}] over the truncation box", b.p_min, b.p_max),
    });
    entries.push(CheckEntry {
        name: "p finite".to_string(),
        passed: b.p_max.is_finite(),
        margin: 0.0,
        worst_sample: None,
        note: String::new(),
    });
    entries.push(CheckEntry {
        name: "0 < s".to_string(),
        passed: b.s_min > 0.0,
        margin: b.s_min,
        worst_sample: None,
        note: format!("s in [{:.6}, {:.6}] over the truncation box", b.s_min, b.s_max),
    });
    entries.push(CheckEntry {
        name: "s < 1".to_string(),
        passed: b.s_max < 1.0,
        margin: 1.0 - b.s_max,
        worst_sample: None,
        note: String::new(),
    });

    // N > p s on the closed inner region
    let n = dom.dim() as f64;
    let mut worst = f64::INFINITY;
    let mut worst_pair = None;
    for x in &omega_lattice {
        for y in &omega_lattice {
            let m = n - fields.p(x, y) * fields.s(x, y);
            if m < worst {
                worst = m;
                worst_pair = Some((*x, *y));
            }
        }
    }
    entries.push(CheckEntry {
        name: "N > p s on the inner region".to_string(),
        passed: worst > 0.0,
        margin: worst,
        worst_sample: worst_pair,
        note: format!("min(N - p s) = {worst:.6}"),
    });

    Ok(ValidationReport {
        entries,
        bounds_box: fields.bounds(),
        bounds_omega: fields.omega_bounds(),
    })
}

/// Conjugate exponent `q` with `1/p(x) + 1/q(x) = 1`, validated on a
/// lattice over the truncation box.
pub fn conjugate_exponent(
    p: &PointMap,
    dom: &DomainSpec,
    samples: usize,
) -> Result<PointMap, ExponentError> {
    for x in lattice_points(dom, samples.max(2)) {
        let v = p(&x);
        if !v.is_finite() {
            return Err(ExponentError::NonFinite { x, y: x, value: v });
        }
        if v <= 1.0 {
            return Err(ExponentError::NotGreaterThanOne { x, value: v });
        }
    }
    let p = p.clone();
    Ok(Arc::new(move |x: &Point| {
        let v = p(x);
        v / (v - 1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom_1d() -> DomainSpec {
        DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap()
    }

    #[test]
    fn constant_preset_passes() {
        let dom = DomainSpec::rect([0.0, 0.0], [1.0, 1.0], [4, 4], 2.0).unwrap();
        let f = ExponentField::constant(2.0, 0.5, &dom).unwrap();
        let report = validate_exponents(&f, &dom, 9).unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn sinusoidal_passes_when_product_subcritical() {
        let dom = dom_1d();
        let f = ExponentPreset::Sinusoidal {
            p0: 1.5,
            p_amp: 0.1,
            s0: 0.4,
            s_amp: 0.0,
            freq: 1.0,
        }
        .build(&dom, 33)
        .unwrap();
        // independent brute-force max of p*s over a dense grid
        let mut max_ps = f64::NEG_INFINITY;
        let m = 301;
        for i in 0..m {
            for j in 0..m {
                let x = [i as f64 / (m - 1) as f64, 0.0];
                let y = [j as f64 / (m - 1) as f64, 0.0];
                max_ps = max_ps.max(f.p(&x, &y) * f.s(&x, &y));
            }
        }
        assert!(max_ps < 1.0, "max ps = {max_ps}");
        let report = validate_exponents(&f, &dom, 33).unwrap();
        assert!(report.all_passed());
    }

    #[test]
    fn asymmetric_exponent_fails_symmetry() {
        let dom = dom_1d();
        let p: PairFn = Arc::new(|x, y| x[0] - y[0] + 2.0);
        let s: PairFn = Arc::new(|_, _| 0.4);
        let f = ExponentField::sampled(p, s, &dom, 17).unwrap();
        let report = validate_exponents(&f, &dom, 17).unwrap();
        assert!(!report.all_passed());
        let sym = report.entries.iter().find(|e| e.name == "p symmetry").unwrap();
        assert!(!sym.passed);
        assert!(sym.worst_sample.is_some());
    }

    #[test]
    fn nonfinite_exponent_is_an_error() {
        let dom = dom_1d();
        let p: PairFn = Arc::new(|x, _| if x[0] > 0.9 { f64::INFINITY } else { 2.0 });
        let s: PairFn = Arc::new(|_, _| 0.4);
        assert!(matches!(
            ExponentField::sampled(p, s, &dom, 17),
            Err(ExponentError::NonFinite { .. })
        ));
    }

    #[test]
    fn conjugate_examples() {
        let dom = dom_1d();
        let p2: PointMap = Arc::new(|_| 2.0);
        let q = conjugate_exponent(&p2, &dom, 9).unwrap();
        assert!((q(&[0.3, 0.0]) - 2.0).abs() < 1e-15);

        let p3: PointMap = Arc::new(|_| 3.0);
        let q = conjugate_exponent(&p3, &dom, 9).unwrap();
        assert!((q(&[0.3, 0.0]) - 1.5).abs() < 1e-15);

        // variable case against the symbolic solution q = (2+x)/(1+x)
        let pv: PointMap = Arc::new(|x| 2.0 + x[0]);
        let q = conjugate_exponent(&pv, &dom, 17).unwrap();
        for i in 0..=10 {
            let x = [i as f64 / 10.0, 0.0];
            let expect = (2.0 + x[0]) / (1.0 + x[0]);
            assert!((q(&x) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugate_rejects_p_at_most_one() {
        let dom = dom_1d();
        let p: PointMap = Arc::new(|x| 0.9 + x[0]); // dips below 1 on B
        assert!(matches!(
            conjugate_exponent(&p, &dom, 17),
            Err(ExponentError::NotGreaterThanOne { .. })
        ));
    }

    #[test]
    fn conjugate_is_an_involution() {
        let dom = dom_1d();
        let p: PointMap = Arc::new(|x| 2.0 + (x[0] * 3.0).sin().abs());
        let q = conjugate_exponent(&p, &dom, 17).unwrap();
        let back = conjugate_exponent(&q, &dom, 17).unwrap();
        for i in 0..=20 {
            let x = [-0.5 + 2.0 * i as f64 / 20.0, 0.0];
            let rel = (back(&x) - p(&x)).abs() / p(&x);
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn critical_exponent_examples() {
        let dom2 = DomainSpec::rect([0.0, 0.0], [1.0, 1.0], [4, 4], 2.0).unwrap();
        let f = ExponentField::constant(2.0, 0.5, &dom2).unwrap();
        assert!((f.critical_exponent([0.5, 0.5]).unwrap() - 4.0).abs() < 1e-14);

        let dom1 = dom_1d();
        let f = ExponentField::constant(1.5, 0.4, &dom1).unwrap();
        assert!((f.critical_exponent([0.5, 0.0]).unwrap() - 3.75).abs() < 1e-12);

        let f = ExponentField::constant(3.0, 0.7, &dom2).unwrap();
        assert!(matches!(
            f.critical_exponent([0.5, 0.5]),
            Err(ExponentError::Supercritical { .. })
        ));
    }

    #[test]
    fn critical_exceeds_diagonal_exponent_where_defined() {
        let dom = dom_1d();
        let f = ExponentPreset::Affine {
            p0: 1.8,
            p_slope: 0.2,
            s0: 0.3,
            s_slope: 0.05,
        }
        .build(&dom, 17)
        .unwrap();
        for i in 0..=20 {
            let x = [i as f64 / 20.0, 0.0];
            let pb = f.p(&x, &x);
            let crit = f.critical_exponent(x).unwrap();
            assert!(crit > pb);
        }
    }
}
