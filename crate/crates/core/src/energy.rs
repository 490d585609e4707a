//! Kirchhoff coefficients, the coupled potential, source terms, the energy
//! functional and its Gateaux derivative, and the coercivity lower bound.

use std::sync::Arc;

use serde::Serialize;

use crate::detsum;
use crate::domain::{DomainSpec, Point, MAX_CELL_NODES};
use crate::error::{EnergyError, NormError};
use crate::exponents::{conjugate_exponent, ExponentField, PointMap};
use crate::field::DiscreteField;
use crate::operator;
use crate::quad::QuadConfig;
use crate::spaces::FunctionSpace;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type BivariateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A Kirchhoff coefficient `M: (0, inf) -> (0, inf)` with an optional
/// closed-form antiderivative. `M` may blow up at zero; the flag records
/// it so gradient evaluation can refuse the origin.
#[derive(Clone)]
pub struct KirchhoffFn {
    f: ScalarFn,
    antiderivative: Option<ScalarFn>,
    singular_at_zero: bool,
}

impl std::fmt::Debug for KirchhoffFn {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("KirchhoffFn")
            .field("singular_at_zero", &self.singular_at_zero)
            .field("closed_form", &self.antiderivative.is_some())
            .finish()
    }
}

impl KirchhoffFn {
    pub fn constant(c: f64) -> Self {
        KirchhoffFn {
            f: Arc::new(move |_| c),
            antiderivative: Some(Arc::new(move |t| c * t)),
            singular_at_zero: false,
        }
    }

    /// `c0 + c1 t`.
    pub fn affine(c0: f64, c1: f64) -> Self {
        KirchhoffFn {
            f: Arc::new(move |t| c0 + c1 * t),
            antiderivative: Some(Arc::new(move |t| c0 * t + 0.5 * c1 * t * t)),
            singular_at_zero: false,
        }
    }

    /// `coef t^{gamma - 1}`; singular at zero when `gamma < 1`.
    pub fn power(coef: f64, gamma: f64) -> Self {
        KirchhoffFn {
            f: Arc::new(move |t| coef * t.powf(gamma - 1.0)),
            antiderivative: Some(Arc::new(move |t| {
                if t == 0.0 {
                    0.0
                } else {
                    coef / gamma * t.powf(gamma)
                }
            })),
            singular_at_zero: gamma < 1.0,
        }
    }

    /// `c0 + coef t^{gamma - 1}`.
    pub fn power_shifted(c0: f64, coef: f64, gamma: f64) -> Self {
        KirchhoffFn {
            f: Arc::new(move |t| c0 + coef * t.powf(gamma - 1.0)),
            antiderivative: Some(Arc::new(move |t| {
                if t == 0.0 {
                    0.0
                } else {
                    c0 * t + coef / gamma * t.powf(gamma)
                }
            })),
            singular_at_zero: gamma < 1.0,
        }
    }

    /// Arbitrary coefficient; without a closed-form antiderivative the
    /// integral is computed by graded quadrature toward zero.
    pub fn custom(f: ScalarFn, antiderivative: Option<ScalarFn>, singular_at_zero: bool) -> Self {
        KirchhoffFn {
            f,
            antiderivative,
            singular_at_zero,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn singular_at_zero(&self) -> bool {
        self.singular_at_zero
    }

    /// `int_0^t M`, via the closed form when available, otherwise by
    /// geometric subdivision toward zero with a ratio-extrapolated tail.
    pub fn antiderivative(&self, t: f64) -> Result<f64, EnergyError> {
        if t < 0.0 {
            return Err(EnergyError::NegativeArgument(t));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some(anti) = &self.antiderivative {
            return Ok(anti(t));
        }
        antiderivative_quadrature(&*self.f, t)
    }
}

fn antiderivative_quadrature(f: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> Result<f64, EnergyError> {
    let gauss = crate::quad::gauss_legendre_01(8);
    let mut total = 0.0;
    let mut hi = t;
    let mut prev_piece = f64::INFINITY;
    let mut growth_streak = 0;
    let mut last_ratio = 0.0;
    for level in 0..200 {
        let lo = 0.5 * hi;
        let mut piece = 0.0;
        for &(g, w) in &gauss {
            piece += w * (hi - lo) * f(lo + (hi - lo) * g);
        }
        if !piece.is_finite() {
            return Err(EnergyError::DivergentAntiderivative);
        }
        total += piece;
        if level > 0 && prev_piece > 0.0 {
            let ratio = piece / prev_piece;
            last_ratio = ratio;
            if ratio >= 1.0 {
                growth_streak += 1;
                if growth_streak >= 12 {
                    return Err(EnergyError::DivergentAntiderivative);
                }
            } else {
                growth_streak = 0;
            }
        }
        prev_piece = piece;
        if piece.abs() <= 1e-16 * total.abs() {
            return Ok(total);
        }
        hi = lo;
    }
    // geometric tail for slowly decaying power behavior
    if last_ratio >= 1.0 {
        return Err(EnergyError::DivergentAntiderivative);
    }
    Ok(total + prev_piece * last_ratio / (1.0 - last_ratio))
}

/// The pair `(M1, M2)` with the certified growth parameters: both
/// coefficients must dominate `lower_coef * t^{gamma - 1}` strictly.
#[derive(Debug, Clone)]
pub struct KirchhoffSpec {
    pub m1: KirchhoffFn,
    pub m2: KirchhoffFn,
    /// The constant `m` of the growth condition.
    pub lower_coef: f64,
    /// The exponent `gamma`; must exceed `1 / p^-` for coercivity.
    pub gamma: f64,
}

/// Report of the growth condition `M_i(t) > m t^{gamma-1}` on a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthConditionReport {
    pub passed: bool,
    /// Minimum of `M_i(t) - m t^{gamma-1}` over samples and both
    /// coefficients.
    pub min_margin: f64,
    pub argmin_t: f64,
    pub argmin_which: u8,
}

impl KirchhoffSpec {
    pub fn check_growth_condition(&self, t_samples: &[f64]) -> GrowthConditionReport {
        let mut min_margin = f64::INFINITY;
        let mut argmin_t = f64::NAN;
        let mut argmin_which = 1;
        for &t in t_samples {
            if t <= 0.0 {
                continue;
            }
            let floor = self.lower_coef * t.powf(self.gamma - 1.0);
            for (which, m) in [(1u8, &self.m1), (2u8, &self.m2)] {
                let margin = m.eval(t) - floor;
                if margin < min_margin {
                    min_margin = margin;
                    argmin_t = t;
                    argmin_which = which;
                }
            }
        }
        GrowthConditionReport {
            passed: min_margin > 0.0,
            min_margin,
            argmin_t,
            argmin_which,
        }
    }
}

/// Coupled potential `H` with partial derivatives `f = dH/du`,
/// `g = dH/dv`, periodic along the diagonal with period `K`.
#[derive(Clone)]
pub struct PotentialSpec {
    h: BivariateFn,
    f: BivariateFn,
    g: BivariateFn,
    period: f64,
}

impl std::fmt::Debug for PotentialSpec {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("PotentialSpec")
            .field("period", &self.period)
            .finish()
    }
}

/// Finite-difference and periodicity diagnostics for a potential.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub gradient_consistent: bool,
    pub max_gradient_defect: f64,
    pub periodic: bool,
    pub max_periodicity_defect: f64,
    pub sup_bound: f64,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            h: Arc::new(|_, _| 0.0),
            f: Arc::new(|_, _| 0.0),
            g: Arc::new(|_, _| 0.0),
            period: 1.0,
        }
    }

    /// Constant potential (trivially periodic); shifts the energy only.
    pub fn constant(c: f64) -> Self {
        PotentialSpec {
            h: Arc::new(move |_, _| c),
            f: Arc::new(|_, _| 0.0),
            g: Arc::new(|_, _| 0.0),
            period: 1.0,
        }
    }

    /// `alpha sin(2 pi u / K) cos(2 pi v / K)` with analytic derivatives.
    pub fn sin_cos(alpha: f64, period: f64) -> Self {
        let k = period;
        let om = 2.0 * std::f64::consts::PI / k;
        PotentialSpec {
            h: Arc::new(move |u, v| alpha * (om * u).sin() * (om * v).cos()),
            f: Arc::new(move |u, v| alpha * om * (om * u).cos() * (om * v).cos()),
            g: Arc::new(move |u, v| -alpha * om * (om * u).sin() * (om * v).sin()),
            period,
        }
    }

    pub fn custom(h: BivariateFn, f: BivariateFn, g: BivariateFn, period: f64) -> Self {
        PotentialSpec { h, f, g, period }
    }

    pub fn h(&self, u: f64, v: f64) -> f64 {
        (self.h)(u, v)
    }

    pub fn f(&self, u: f64, v: f64) -> f64 {
        (self.f)(u, v)
    }

    pub fn g(&self, u: f64, v: f64) -> f64 {
        (self.g)(u, v)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Upper bound for `sup |H|`: grid search over one period cell with a
    /// local coordinate refinement, padded slightly upward so the bound
    /// stays valid for off-grid arguments.
    pub fn sup_bound(&self) -> f64 {
        let k = self.period;
        let n = 128;
        let mut best = 0.0_f64;
        let mut arg = (0.0, 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let u = k * i as f64 / n as f64;
                let v = k * j as f64 / n as f64;
                let val = self.h(u, v).abs();
                if val > best {
                    best = val;
                    arg = (u, v);
                }
            }
        }
        // coordinate-wise ternary refinement around the best cell
        let cell = k / n as f64;
        let (mut u, mut v) = arg;
        for _ in 0..40 {
            let mut lo = u - cell;
            let mut hi = u + cell;
            for _ in 0..60 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if self.h(m1, v).abs() < self.h(m2, v).abs() {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            u = 0.5 * (lo + hi);
            let mut lo = v - cell;
            let mut hi = v + cell;
            for _ in 0..60 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if self.h(u, m1).abs() < self.h(u, m2).abs() {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            v = 0.5 * (lo + hi);
            best = best.max(self.h(u, v).abs());
        }
        best * (1.0 + 1e-12) + 1e-9
    }

    /// Check the derivative identities by central differences and the
    /// diagonal periodicity on random samples.
    pub fn validate(&self, rng: &mut impl rand::Rng, trials: usize) -> PotentialReport {
        let k = self.period;
        let mut max_grad = 0.0_f64;
        let mut max_per = 0.0_f64;
        let eps = 1e-5 * k.max(1.0);
        for _ in 0..trials {
            let u = rng.gen_range(-k..2.0 * k);
            let v = rng.gen_range(-k..2.0 * k);
            let fd_u = (self.h(u + eps, v) - self.h(u - eps, v)) / (2.0 * eps);
            let fd_v = (self.h(u, v + eps) - self.h(u, v - eps)) / (2.0 * eps);
            let scale_u = self.f(u, v).abs().max(1.0);
            let scale_v = self.g(u, v).abs().max(1.0);
            max_grad = max_grad.max((fd_u - self.f(u, v)).abs() / scale_u);
            max_grad = max_grad.max((fd_v - self.g(u, v)).abs() / scale_v);
            let per = (self.h(u, v) - self.h(u + k, v + k)).abs();
            max_per = max_per.max(per / self.h(u, v).abs().max(1.0));
        }
        PotentialReport {
            gradient_consistent: max_grad <= 1e-6,
            max_gradient_defect: max_grad,
            periodic: max_per <= 1e-10,
            max_periodicity_defect: max_per,
            sup_bound: self.sup_bound(),
        }
    }
}

/// Source terms of the two equations.
#[derive(Clone)]
pub struct SourceSpec {
    pub a: PointMap,
    pub b: PointMap,
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.write_str("SourceSpec")
    }
}

impl SourceSpec {
    pub fn zero() -> Self {
        SourceSpec {
            a: Arc::new(|_| 0.0),
            b: Arc::new(|_| 0.0),
        }
    }

    pub fn constants(a: f64, b: f64) -> Self {
        SourceSpec {
            a: Arc::new(move |_| a),
            b: Arc::new(move |_| b),
        }
    }

    /// Smooth bump `amplitude * max(0, 1 - |x - center|_inf / halfwidth)`.
    pub fn bump(center: Point, halfwidth: f64, amplitude: f64, dim: usize) -> PointMap {
        Arc::new(move |x: &Point| {
            let mut r: f64 = 0.0;
            for axis in 0..dim {
                r = r.max((x[axis] - center[axis]).abs());
            }
            amplitude * (1.0 - r / halfwidth).max(0.0)
        })
    }
}

/// Full definition of the variational problem.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    pub domain: Arc<DomainSpec>,
    pub exponents: ExponentField,
    pub kirchhoff: KirchhoffSpec,
    pub potential: PotentialSpec,
    pub sources: SourceSpec,
    pub quad: QuadConfig,
}

impl EnergyProblem {
    /// Build the quadrature rules, load vectors and coercivity constants.
    pub fn prepare(self) -> Result<PreparedProblem, EnergyError> {
        let EnergyProblem {
            domain,
            exponents,
            kirchhoff,
            potential,
            sources,
            quad,
        } = self;
        let space = FunctionSpace::new(domain, exponents, quad)?;
        let bounds = space.exponent_bounds();
        if kirchhoff.gamma <= 1.0 / bounds.p_min {
            return Err(EnergyError::GammaTooSmall {
                gamma: kirchhoff.gamma,
                inv_p_minus: 1.0 / bounds.p_min,
            });
        }
        let dom = space.domain().clone();
        let load_u = assemble_load(&space, &sources.a);
        let load_v = assemble_load(&space, &sources.b);
        let c1 = potential.sup_bound();
        let p_bar = space.exponents().p_bar();
        let q = conjugate_exponent(&p_bar, &dom, 17).map_err(NormError::from)?;
        let norm_a = space.luxemburg_norm_fn(&*sources.a, &q)?;
        let norm_b = space.luxemburg_norm_fn(&*sources.b, &q)?;
        Ok(PreparedProblem {
            space,
            kirchhoff,
            potential,
            sources,
            load_u,
            load_v,
            c1,
            q,
            norm_a,
            norm_b,
        })
    }
}

fn assemble_load(space: &FunctionSpace, source: &PointMap) -> Vec<f64> {
    let dom = space.domain();
    let full = detsum::map_accumulate(
        space.cell_rule().points(),
        dom.num_nodes(),
        |pt, acc| {
            let sv = source(&pt.x);
            if sv == 0.0 {
                return;
            }
            for j in 0..MAX_CELL_NODES {
                acc[pt.nodes[j] as usize] += pt.w * sv * pt.shape[j];
            }
        },
    );
    dom.free_nodes()
        .iter()
        .map(|&n| full[n as usize])
        .collect()
}

/// Problem with precomputed rules; all evaluations are pure.
pub struct PreparedProblem {
    space: FunctionSpace,
    pub kirchhoff: KirchhoffSpec,
    pub potential: PotentialSpec,
    pub sources: SourceSpec,
    load_u: Vec<f64>,
    load_v: Vec<f64>,
    /// Upper bound for `sup |H|` over the period cell.
    c1: f64,
    /// Conjugate of the diagonal exponent (the source-space exponent).
    q: PointMap,
    norm_a: f64,
    norm_b: f64,
}

impl PreparedProblem {
    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        self.space.domain()
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn source_exponent(&self) -> PointMap {
        self.q.clone()
    }

    pub fn source_norms(&self) -> (f64, f64) {
        (self.norm_a, self.norm_b)
    }

    pub fn load_vectors(&self) -> (&[f64], &[f64]) {
        (&self.load_u, &self.load_v)
    }

    /// Integral of `H(u, v)` over the inner region.
    pub fn potential_integral(&self, u: &DiscreteField, v: &DiscreteField) -> f64 {
        let uv = u.values();
        let vv = v.values();
        let pot = &self.potential;
        self.space
            .cell_rule()
            .integrate(|pt| pt.w * pot.h(pt.interp(uv), pt.interp(vv)))
    }

    /// The energy functional: both Kirchhoff antiderivative terms enter
    /// with positive sign, consistent with the derivative below and with
    /// the coercivity bound.
    pub fn energy(&self, u: &DiscreteField, v: &DiscreteField) -> Result<f64, EnergyError> {
        let du = self.space.weighted_modular(u);
        let dv = self.space.weighted_modular(v);
        let kirch = self.kirchhoff.m1.antiderivative(du)? + self.kirchhoff.m2.antiderivative(dv)?;
        let pot = self.potential_integral(u, v);
        let uf = u.free_values();
        let vf = v.free_values();
        let src: f64 = self
            .load_u
            .iter()
            .zip(uf.iter())
            .map(|(l, c)| l * c)
            .sum::<f64>()
            + self
                .load_v
                .iter()
                .zip(vf.iter())
                .map(|(l, c)| l * c)
                .sum::<f64>();
        Ok(kirch - pot - src)
    }

    /// Gateaux derivative against every interior basis function:
    /// `g_u[i] = M1(delta(u)) <A(u), phi_i> - int (f(u,v) + a) phi_i`,
    /// and the analogous `g_v`. Identical to the weak residual.
    pub fn gradient(
        &self,
        u: &DiscreteField,
        v: &DiscreteField,
    ) -> Result<(Vec<f64>, Vec<f64>), EnergyError> {
        let du = self.space.weighted_modular(u);
        let dv = self.space.weighted_modular(v);
        if du == 0.0 && self.kirchhoff.m1.singular_at_zero() {
            return Err(EnergyError::GradientAtOrigin);
        }
        if dv == 0.0 && self.kirchhoff.m2.singular_at_zero() {
            return Err(EnergyError::GradientAtOrigin);
        }
        let m1 = self.kirchhoff.m1.eval(du);
        let m2 = self.kirchhoff.m2.eval(dv);
        let a_u = operator::assemble(&self.space, u);
        let a_v = operator::assemble(&self.space, v);
        let (fl, gl) = self.coupling_loads(u, v);
        let g_u: Vec<f64> = a_u
            .iter()
            .zip(fl.iter())
            .zip(self.load_u.iter())
            .map(|((a, f), l)| m1 * a - f - l)
            .collect();
        let g_v: Vec<f64> = a_v
            .iter()
            .zip(gl.iter())
            .zip(self.load_v.iter())
            .map(|((a, g), l)| m2 * a - g - l)
            .collect();
        Ok((g_u, g_v))
    }

    /// Load vectors of the coupling terms `f(u,v)` and `g(u,v)`.
    fn coupling_loads(&self, u: &DiscreteField, v: &DiscreteField) -> (Vec<f64>, Vec<f64>) {
        let dom = self.space.domain();
        let uv = u.values();
        let vv = v.values();
        let pot = &self.potential;
        let full = detsum::map_accumulate(
            self.space.cell_rule().points(),
            2 * dom.num_nodes(),
            |pt, acc| {
                let uq = pt.interp(uv);
                let vq = pt.interp(vv);
                let fv = pot.f(uq, vq);
                let gv = pot.g(uq, vq);
                if fv == 0.0 && gv == 0.0 {
                    return;
                }
                let n = acc.len() / 2;
                for j in 0..MAX_CELL_NODES {
                    let idx = pt.nodes[j] as usize;
                    acc[idx] += pt.w * fv * pt.shape[j];
                    acc[n + idx] += pt.w * gv * pt.shape[j];
                }
            },
        );
        let n = dom.num_nodes();
        let f_load = dom
            .free_nodes()
            .iter()
            .map(|&k| full[k as usize])
            .collect();
        let g_load = dom
            .free_nodes()
            .iter()
            .map(|&k| full[n + k as usize])
            .collect();
        (f_load, g_load)
    }

    /// Coercivity constants `kappa`, `c2`, `c3`, `c4` of the lower-bound
    /// chain, given the empirical embedding constant.
    pub fn coercivity_constants(&self, c_hat: f64, c1: f64) -> CoercivityConstants {
        let b = self.space.exponent_bounds();
        let gamma = self.kirchhoff.gamma;
        CoercivityConstants {
            kappa: self.kirchhoff.lower_coef / (gamma * b.p_max.powf(gamma)),
            gamma_p_minus: gamma * b.p_min,
            gamma_p_plus: gamma * b.p_max,
            c2: c1 * self.space.domain().omega_measure(),
            c3: 2.0 * c_hat * self.norm_a,
            c4: 2.0 * c_hat * self.norm_b,
        }
    }

    /// Energy and the coercivity lower bound at `(u, v)`; the contract is
    /// `energy >= bound` whenever `c_hat` dominates the embedding ratios
    /// of `u` and `v` and `c1 >= sup |H|`.
    pub fn coercivity_lower_bound(
        &self,
        u: &DiscreteField,
        v: &DiscreteField,
        c_hat: f64,
        c1: f64,
    ) -> Result<(f64, f64), EnergyError> {
        let energy = self.energy(u, v)?;
        let nu = self.space.gagliardo_norm(u)?;
        let nv = self.space.gagliardo_norm(v)?;
        let c = self.coercivity_constants(c_hat, c1);
        Ok((energy, c.bound(nu, nv)))
    }

    /// Empirical embedding constant for the Lebesgue exponent `p(x,x)`:
    /// maximum of `||u||_{p_bar} / ||u||` over seeded random fields.
    pub fn embedding_constant_estimate(
        &self,
        seed: u64,
        trials: usize,
    ) -> Result<f64, NormError> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p_bar = self.space.exponents().p_bar();
        let mut best = 0.0_f64;
        for _ in 0..trials {
            let u = DiscreteField::random(self.space.domain().clone(), &mut rng, 1.0);
            if u.is_zero() {
                continue;
            }
            best = best.max(self.space.embedding_ratio(&u, &p_bar)?);
        }
        Ok(best)
    }
}

/// Constants of the coercivity chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoercivityConstants {
    pub kappa: f64,
    pub gamma_p_minus: f64,
    pub gamma_p_plus: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl CoercivityConstants {
    /// Lower bound as a function of the two Gagliardo norms.
    pub fn bound(&self, norm_u: f64, norm_v: f64) -> f64 {
        self.kappa
            * (norm_u.powf(self.gamma_p_minus).min(norm_u.powf(self.gamma_p_plus))
                + norm_v.powf(self.gamma_p_minus).min(norm_v.powf(self.gamma_p_plus)))
            - self.c3 * norm_u
            - self.c4 * norm_v
            - self.c2
    }

    /// Global minimum of the bound over all norm pairs; a rigorous lower
    /// estimate for the infimum of the energy at the discrete level.
    pub fn global_lower_bound(&self) -> f64 {
        self.min_single(self.c3) + self.min_single(self.c4) - self.c2
    }

    fn min_single(&self, c: f64) -> f64 {
        let term = |r: f64| {
            self.kappa * r.powf(self.gamma_p_minus).min(r.powf(self.gamma_p_plus)) - c * r
        };
        // coercive scalar function with value 0 at r = 0; the minimum may
        // sit on either side of the kink at r = 1, so scan densely and
        // refine by golden section around the best point
        let mut best = 0.0_f64;
        let mut best_r = 0.0;
        let mut r = 1e-6;
        while r <= 1e6 {
            let v = term(r);
            if v < best {
                best = v;
                best_r = r;
            }
            r *= 1.02;
        }
        if best_r == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (best_r / 1.03, best_r * 1.03);
        let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if term(m1) < term(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best.min(term(0.5 * (lo + hi)))
    }

    /// Largest norm radius at which the single-field bound stays at or
    /// below `level`; trace norms beyond it would contradict monotone
    /// descent from that energy level.
    pub fn bounding_radius(&self, level: f64, c: f64) -> f64 {
        let term = |r: f64| {
            self.kappa * r.powf(self.gamma_p_minus).min(r.powf(self.gamma_p_plus)) - c * r
        };
        let other_min = self.min_single(if c == self.c3 { self.c4 } else { self.c3 });
        let mut r = 1e-3;
        while r < 1e9 {
            if term(r) + other_min - self.c2 > level {
                return r;
            }
            r *= 1.05;
        }
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::exponents::ExponentField;
    use rand::SeedableRng;

    fn problem_1d(
        cells: usize,
        p0: f64,
        s0: f64,
        kirchhoff: KirchhoffSpec,
        potential: PotentialSpec,
        sources: SourceSpec,
    ) -> PreparedProblem {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, cells, 2.0).unwrap());
        let exponents = ExponentField::constant(p0, s0, &dom).unwrap();
        EnergyProblem {
            domain: dom,
            exponents,
            kirchhoff,
            potential,
            sources,
            quad: QuadConfig::for_dim(1),
        }
        .prepare()
        .unwrap()
    }

    fn unit_kirchhoff() -> KirchhoffSpec {
        KirchhoffSpec {
            m1: KirchhoffFn::constant(1.0),
            m2: KirchhoffFn::constant(1.0),
            lower_coef: 0.5,
            gamma: 1.0,
        }
    }

    #[test]
    fn antiderivative_closed_forms() {
        let m = KirchhoffFn::power(0.7, 1.5);
        assert!((m.antiderivative(2.0).unwrap() - 0.7 / 1.5 * 2.0_f64.powf(1.5)).abs() < 1e-14);
        assert_eq!(m.antiderivative(0.0).unwrap(), 0.0);
        let m = KirchhoffFn::constant(1.0);
        assert!((m.antiderivative(3.0).unwrap() - 3.0).abs() < 1e-14);
        assert!(matches!(
            m.antiderivative(-1.0),
            Err(EnergyError::NegativeArgument(_))
        ));
    }

    #[test]
    fn antiderivative_quadrature_matches_closed_form() {
        // 1 + t without a closed form goes through the graded quadrature
        let m = KirchhoffFn::custom(Arc::new(|t| 1.0 + t), None, false);
        for t in [0.3, 1.0, 4.7] {
            let got = m.antiderivative(t).unwrap();
            let exact = t + 0.5 * t * t;
            assert!(
                ((got - exact) / exact).abs() < 1e-10,
                "t={t}: {got} vs {exact}"
            );
        }
        // singular power through quadrature
        let m = KirchhoffFn::custom(Arc::new(|t: f64| t.powf(-0.4)), None, true);
        let got = m.antiderivative(1.0).unwrap();
        let exact = 1.0 / 0.6;
        assert!(((got - exact) / exact).abs() < 1e-8, "{got} vs {exact}");
    }

    #[test]
    fn antiderivative_divergence_detected() {
        let m = KirchhoffFn::custom(Arc::new(|t: f64| t.powf(-1.2)), None, true);
        assert!(matches!(
            m.antiderivative(1.0),
            Err(EnergyError::DivergentAntiderivative)
        ));
    }

    #[test]
    fn antiderivative_monotone() {
        let m = KirchhoffFn::custom(Arc::new(|t: f64| 1.0 + (t * 3.0).sin().abs()), None, false);
        let mut prev = 0.0;
        for k in 1..=20 {
            let t = k as f64 * 0.25;
            let v = m.antiderivative(t).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn growth_condition_examples() {
        let spec = KirchhoffSpec {
            m1: KirchhoffFn::power(2.0, 1.5),
            m2: KirchhoffFn::power(2.0, 1.5),
            lower_coef: 1.0,
            gamma: 1.5,
        };
        let samples: Vec<f64> = (1..=200).map(|k| k as f64 * 0.05).collect();
        let rep = spec.check_growth_condition(&samples);
        assert!(rep.passed);

        // equality fails the strict inequality
        let spec = KirchhoffSpec {
            m1: KirchhoffFn::power(1.0, 1.5),
            m2: KirchhoffFn::power(1.0, 1.5),
            lower_coef: 1.0,
            gamma: 1.5,
        };
        let rep = spec.check_growth_condition(&samples);
        assert!(!rep.passed);

        // m t^{gamma-1} + e^{-t} stays strictly above
        let spec = KirchhoffSpec {
            m1: KirchhoffFn::custom(
                Arc::new(|t: f64| t.sqrt() + (-t).exp()),
                None,
                false,
            ),
            m2: KirchhoffFn::constant(10.0),
            lower_coef: 1.0,
            gamma: 1.5,
        };
        let rep = spec.check_growth_condition(&samples);
        assert!(rep.passed, "min margin {}", rep.min_margin);
    }

    #[test]
    fn potential_presets_validate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pot = PotentialSpec::sin_cos(0.3, 2.0);
        let rep = pot.validate(&mut rng, 200);
        assert!(rep.gradient_consistent, "defect {}", rep.max_gradient_defect);
        assert!(rep.periodic, "defect {}", rep.max_periodicity_defect);
        assert!(rep.sup_bound >= 0.3 && rep.sup_bound < 0.3 + 1e-6);
    }

    #[test]
    fn energy_trivial_cases() {
        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::zero(),
            SourceSpec::zero(),
        );
        let zero = DiscreteField::zero(prob.domain().clone());
        assert_eq!(prob.energy(&zero, &zero).unwrap(), 0.0);

        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::constant(0.7),
            SourceSpec::zero(),
        );
        let e = prob.energy(&zero, &zero).unwrap();
        assert!((e + 0.7).abs() < 1e-12, "expected -c|Omega| = -0.7, got {e}");
    }

    #[test]
    fn energy_reduces_to_weighted_modular() {
        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::zero(),
            SourceSpec::zero(),
        );
        let u = DiscreteField::hat(prob.domain().clone(), [0.5, 0.0], 0.25, 0.9);
        let zero = DiscreteField::zero(prob.domain().clone());
        let e = prob.energy(&u, &zero).unwrap();
        let delta = prob.space().weighted_modular(&u);
        let modular = prob.space().fractional_modular(&u);
        assert!(((e - delta) / e).abs() < 1e-12);
        assert!(((e - 0.5 * modular) / e).abs() < 1e-10);
    }

    #[test]
    fn gradient_zero_at_origin_for_regular_kirchhoff() {
        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::zero(),
            SourceSpec::zero(),
        );
        let zero = DiscreteField::zero(prob.domain().clone());
        let (gu, gv) = prob.gradient(&zero, &zero).unwrap();
        assert!(gu.iter().chain(gv.iter()).all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_refuses_singular_origin() {
        let kirch = KirchhoffSpec {
            m1: KirchhoffFn::power(1.0, 0.8),
            m2: KirchhoffFn::constant(1.0),
            lower_coef: 0.5,
            gamma: 0.8,
        };
        let prob = problem_1d(8, 2.0, 0.5, kirch, PotentialSpec::zero(), SourceSpec::zero());
        let zero = DiscreteField::zero(prob.domain().clone());
        assert!(matches!(
            prob.gradient(&zero, &zero),
            Err(EnergyError::GradientAtOrigin)
        ));
    }

    #[test]
    fn gradient_linear_in_convex_quadratic_case() {
        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::zero(),
            SourceSpec::zero(),
        );
        let u = DiscreteField::hat(prob.domain().clone(), [0.5, 0.0], 0.375, 0.6);
        let zero = DiscreteField::zero(prob.domain().clone());
        let (g1, _) = prob.gradient(&u, &zero).unwrap();
        let (g2, _) = prob.gradient(&u.scaled(2.0), &zero).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let kirch = KirchhoffSpec {
            m1: KirchhoffFn::affine(1.0, 0.5),
            m2: KirchhoffFn::affine(1.0, 0.25),
            lower_coef: 0.5,
            gamma: 1.2,
        };
        let prob = problem_1d(
            8,
            2.3,
            0.4,
            kirch,
            PotentialSpec::sin_cos(0.2, 1.0),
            SourceSpec::constants(0.3, -0.2),
        );
        let dom = prob.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = DiscreteField::random(dom.clone(), &mut rng, 1.0);
        let v = DiscreteField::random(dom.clone(), &mut rng, 1.0);
        let (gu, gv) = prob.gradient(&u, &v).unwrap();
        let eps = 1e-5;
        for i in 0..dom.num_free() {
            let phi = DiscreteField::basis(dom.clone(), i);
            let ep = prob.energy(&u.axpy(eps, &phi), &v).unwrap();
            let em = prob.energy(&u.axpy(-eps, &phi), &v).unwrap();
            let fd = (ep - em) / (2.0 * eps);
            assert!(
                (fd - gu[i]).abs() < 1e-6 * gu[i].abs().max(1.0),
                "u component {i}: fd={fd} grad={}",
                gu[i]
            );
            let ep = prob.energy(&u, &v.axpy(eps, &phi)).unwrap();
            let em = prob.energy(&u, &v.axpy(-eps, &phi)).unwrap();
            let fd = (ep - em) / (2.0 * eps);
            assert!(
                (fd - gv[i]).abs() < 1e-6 * gv[i].abs().max(1.0),
                "v component {i}: fd={fd} grad={}",
                gv[i]
            );
        }
    }

    #[test]
    fn coercivity_bound_at_origin() {
        let prob = problem_1d(
            8,
            2.0,
            0.5,
            unit_kirchhoff(),
            PotentialSpec::sin_cos(0.4, 1.0),
            SourceSpec::zero(),
        );
        let zero = DiscreteField::zero(prob.domain().clone());
        let c1 = prob.c1();
        let (energy, bound) = prob.coercivity_lower_bound(&zero, &zero, 0.0, c1).unwrap();
        assert!(energy >= bound);
        // at the origin the chain collapses to -c1 |Omega|
        assert!((bound + c1 * prob.domain().omega_measure()).abs() < 1e-12);
    }

    #[test]
    fn coercivity_bound_grows_along_rays() {
        let kirch = KirchhoffSpec {
            m1: KirchhoffFn::affine(0.6, 0.5),
            m2: KirchhoffFn::affine(0.6, 0.5),
            lower_coef: 0.5,
            gamma: 1.2,
        };
        let prob = problem_1d(8, 2.0, 0.5, kirch, PotentialSpec::zero(), SourceSpec::zero());
        let u = DiscreteField::hat(prob.domain().clone(), [0.5, 0.0], 0.25, 1.0);
        let zero = DiscreteField::zero(prob.domain().clone());
        let mut first_bound = f64::NAN;
        let mut prev_bound = f64::NEG_INFINITY;
        for t in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let (energy, bound) = prob
                .coercivity_lower_bound(&u.scaled(t), &zero, 0.0, prob.c1())
                .unwrap();
            assert!(energy >= bound, "t={t}: energy={energy} bound={bound}");
            if t == 1.0 {
                first_bound = bound;
            }
            if t >= 4.0 {
                assert!(bound > prev_bound);
            }
            prev_bound = bound;
        }
        assert!(first_bound > 0.0);
        assert!(prev_bound > 10.0 * first_bound);
    }

    #[test]
    fn gamma_below_threshold_rejected() {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let exponents = ExponentField::constant(2.0, 0.5, &dom).unwrap();
        let res = EnergyProblem {
            domain: dom,
            exponents,
            kirchhoff: KirchhoffSpec {
                m1: KirchhoffFn::constant(1.0),
                m2: KirchhoffFn::constant(1.0),
                lower_coef: 0.5,
                gamma: 0.4, // 1/p^- = 0.5
            },
            potential: PotentialSpec::zero(),
            sources: SourceSpec::zero(),
            quad: QuadConfig::for_dim(1),
        }
        .prepare();
        assert!(matches!(res, Err(EnergyError::GammaTooSmall { .. })));
    }
}
