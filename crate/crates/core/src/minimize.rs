//! Steepest descent with Armijo backtracking over the coupled nodal
//! coefficients, with an Ekeland-style termination certificate: the
//! returned point has a small gradient and an explicit bound on its
//! distance to the infimum via the coercivity lower bound.

use rand::SeedableRng;

use crate::energy::{CoercivityConstants, PreparedProblem};
use crate::error::{EnergyError, SolveError};
use crate::field::DiscreteField;

/// Descent parameters.
#[derive(Debug, Clone, Copy)]
pub struct MinimizerConfig {
    pub max_iters: usize,
    /// Terminate when the gradient sup-norm drops below this.
    pub grad_tol: f64,
    /// Terminate when an accepted step decreases the energy by less than
    /// this relative amount.
    pub energy_stall_tol: f64,
    pub init_step: f64,
    /// Backtracking factor in (0, 1).
    pub backtrack: f64,
    /// Armijo constant in (0, 1).
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Magnitude of the random perturbation used to leave the origin when
    /// a Kirchhoff coefficient is singular there.
    pub origin_perturbation: f64,
    pub perturb_seed: u64,
    /// Barzilai-Borwein initial step length (backtracked to satisfy
    /// Armijo, so descent stays monotone).
    pub bb_init: bool,
    /// Record Gagliardo norms along the trace (adds one root-find per
    /// field per iteration).
    pub track_norms: bool,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig {
            max_iters: 500,
            grad_tol: 1e-4,
            energy_stall_tol: 1e-15,
            init_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            max_backtracks: 60,
            origin_perturbation: 1e-2,
            perturb_seed: 7,
            bb_init: true,
            track_norms: false,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> bool {
        self.grad_tol > 0.0
            && self.energy_stall_tol > 0.0
            && self.init_step > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.origin_perturbation > 0.0
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// Step length that produced this iterate (zero for the initial one).
    pub step: f64,
    pub certificate: f64,
    pub norm_u: Option<f64>,
    pub norm_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    EnergyStall,
}

/// Finite-difference probe of differentiability at the returned point.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FdConsistency {
    pub max_rel_error: f64,
    pub epsilon: f64,
    pub consistent: bool,
}

/// Result of a descent run.
#[derive(Debug)]
pub struct MinimizerResult {
    pub u: DiscreteField,
    pub v: DiscreteField,
    pub energy: f64,
    pub grad_norm: f64,
    /// `max(energy - lower bound, gradient sup-norm)`; the pair
    /// `(energy gap, derivative size)` of an approximate minimizer.
    pub certificate: f64,
    /// Sup-norm of the assembled weak residual at the returned pair
    /// (identical to the gradient by construction).
    pub residual_sup: f64,
    pub trace: Vec<IterRecord>,
    pub termination: Termination,
    pub fd_check: FdConsistency,
    /// Global coercivity lower bound used by the certificate.
    pub lower_bound: f64,
    /// Empirical embedding constant behind the lower bound.
    pub embedding_constant: f64,
}

/// Ekeland-style certificate at a state: the worse of the optimality gap
/// estimate and the gradient sup-norm.
pub fn ekeland_certificate(energy: f64, grad_sup: f64, lower_bound: f64) -> f64 {
    (energy - lower_bound).max(grad_sup)
}

fn sup_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Minimize the energy from `init` by monotone steepest descent.
pub fn minimize(
    problem: &PreparedProblem,
    init: (DiscreteField, DiscreteField),
    cfg: &MinimizerConfig,
) -> Result<MinimizerResult, SolveError> {
    assert!(cfg.validate(), "invalid minimizer configuration");
    let dom = problem.domain().clone();
    let nf = dom.num_free();

    let (mut u, mut v) = init;
    // a singular Kirchhoff coefficient is not differentiable at the
    // origin; leave it with a seeded random perturbation
    let singular = problem.kirchhoff.m1.singular_at_zero() || problem.kirchhoff.m2.singular_at_zero();
    if singular {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.perturb_seed);
        if u.is_zero() {
            u = DiscreteField::random(dom.clone(), &mut rng, cfg.origin_perturbation);
        }
        if v.is_zero() {
            v = DiscreteField::random(dom.clone(), &mut rng, cfg.origin_perturbation);
        }
    }

    // coercivity lower bound for the certificate; the embedding constant
    // only matters when sources are present
    let (na, nb) = problem.source_norms();
    let embedding_constant = if na == 0.0 && nb == 0.0 {
        0.0
    } else {
        problem
            .embedding_constant_estimate(cfg.perturb_seed.wrapping_add(1), 32)
            .map_err(EnergyError::from)?
    };
    let constants = problem.coercivity_constants(embedding_constant, problem.c1());
    let lower_bound = constants.global_lower_bound();

    let mut x: Vec<f64> = u
        .free_values()
        .into_iter()
        .chain(v.free_values())
        .collect();
    let fields = |x: &[f64]| -> Result<(DiscreteField, DiscreteField), SolveError> {
        let uu = DiscreteField::from_free(dom.clone(), &x[..nf])
            .expect("descent produced a non-finite iterate");
        let vv = DiscreteField::from_free(dom.clone(), &x[nf..])
            .expect("descent produced a non-finite iterate");
        Ok((uu, vv))
    };
    let eval_energy = |x: &[f64]| -> Result<f64, SolveError> {
        let (uu, vv) = fields(x)?;
        Ok(problem.energy(&uu, &vv)?)
    };

    let (mut uu, mut vv) = fields(&x)?;
    let mut energy = problem.energy(&uu, &vv)?;
    let (gu, gv) = problem.gradient(&uu, &vv)?;
    let mut grad: Vec<f64> = gu.into_iter().chain(gv).collect();

    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let push_record = |trace: &mut Vec<IterRecord>,
                           iter: usize,
                           energy: f64,
                           grad_norm: f64,
                           step: f64,
                           uu: &DiscreteField,
                           vv: &DiscreteField|
     -> Result<(), SolveError> {
        let (norm_u, norm_v) = if cfg.track_norms {
            (
                Some(problem.space().gagliardo_norm(uu).map_err(EnergyError::from)?),
                Some(problem.space().gagliardo_norm(vv).map_err(EnergyError::from)?),
            )
        } else {
            (None, None)
        };
        trace.push(IterRecord {
            iter,
            energy,
            grad_norm,
            step,
            certificate: ekeland_certificate(energy, grad_norm, lower_bound),
            norm_u,
            norm_v,
        });
        Ok(())
    };

    let mut gn = sup_norm(&grad);
    push_record(&mut trace, 0, energy, gn, 0.0, &uu, &vv)?;

    let mut termination = Termination::MaxIterations;
    let mut step = cfg.init_step;
    let mut prev_x: Option<Vec<f64>> = None;
    let mut prev_grad: Option<Vec<f64>> = None;

    let mut iter = 0;
    while iter < cfg.max_iters {
        if gn <= cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let g2 = dot(&grad, &grad);

        // initial trial step
        let mut t = if cfg.bb_init {
            match (&prev_x, &prev_grad) {
                (Some(px), Some(pg)) => {
                    let sy: f64 = x
                        .iter()
                        .zip(px.iter())
                        .zip(grad.iter().zip(pg.iter()))
                        .map(|((xi, pxi), (gi, pgi))| (xi - pxi) * (gi - pgi))
                        .sum();
                    let ss: f64 = x
                        .iter()
                        .zip(px.iter())
                        .map(|(xi, pxi)| (xi - pxi) * (xi - pxi))
                        .sum();
                    if sy > 0.0 {
                        (ss / sy).clamp(1e-12, 1e8)
                    } else {
                        (step * 2.0).clamp(1e-12, 1e8)
                    }
                }
                _ => cfg.init_step,
            }
        } else {
            (step * 2.0).clamp(1e-12, 1e8)
        };

        // Armijo backtracking
        let mut accepted = None;
        for bt in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(grad.iter()).map(|(xi, gi)| xi - t * gi).collect();
            let e_trial = eval_energy(&trial)?;
            if e_trial <= energy - cfg.armijo * t * g2 {
                accepted = Some((trial, e_trial, t, bt));
                break;
            }
            t *= cfg.backtrack;
        }
        let (new_x, new_e, t_used, _bt) = accepted.ok_or(SolveError::Stall {
            iteration: iter,
            backtracks: cfg.max_backtracks,
            energy,
            grad_norm: gn,
            step: t,
        })?;

        let decrease = energy - new_e;
        prev_x = Some(std::mem::replace(&mut x, new_x));
        prev_grad = Some(grad.clone());
        step = t_used;
        energy = new_e;
        let (nu2, nv2) = fields(&x)?;
        uu = nu2;
        vv = nv2;
        let (gu, gv) = problem.gradient(&uu, &vv)?;
        grad = gu.into_iter().chain(gv).collect();
        gn = sup_norm(&grad);
        iter += 1;
        push_record(&mut trace, iter, energy, gn, t_used, &uu, &vv)?;

        if gn <= cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        if decrease <= cfg.energy_stall_tol * (1.0 + energy.abs()) {
            termination = Termination::EnergyStall;
            break;
        }
    }

    let fd_check = fd_consistency(problem, &uu, &vv, &grad, nf)?;
    let (ru, rv) = crate::operator::assemble_weak_residual(problem, &uu, &vv)?;
    let residual_sup = sup_norm(&ru).max(sup_norm(&rv));

    Ok(MinimizerResult {
        u: uu,
        v: vv,
        energy,
        grad_norm: gn,
        certificate: ekeland_certificate(energy, gn, lower_bound),
        residual_sup,
        trace,
        termination,
        fd_check,
        lower_bound,
        embedding_constant,
    })
}

/// Central differences along a few hat directions at the returned point;
/// the spread against the assembled gradient probes differentiability.
fn fd_consistency(
    problem: &PreparedProblem,
    u: &DiscreteField,
    v: &DiscreteField,
    grad: &[f64],
    nf: usize,
) -> Result<FdConsistency, SolveError> {
    let dom = problem.domain().clone();
    let eps = 1e-6;
    let mut dirs: Vec<usize> = Vec::new();
    if nf > 0 {
        dirs.push(0);
        if nf > 2 {
            dirs.push(nf / 2);
        }
        if nf > 1 {
            dirs.push(nf - 1);
        }
    }
    let mut worst = 0.0_f64;
    let scale = sup_norm(grad).max(1.0);
    for &i in &dirs {
        let phi = DiscreteField::basis(dom.clone(), i);
        let ep = problem.energy(&u.axpy(eps, &phi), v)?;
        let em = problem.energy(&u.axpy(-eps, &phi), v)?;
        let fd = (ep - em) / (2.0 * eps);
        worst = worst.max((fd - grad[i]).abs() / scale);
        let ep = problem.energy(u, &v.axpy(eps, &phi))?;
        let em = problem.energy(u, &v.axpy(-eps, &phi))?;
        let fd = (ep - em) / (2.0 * eps);
        worst = worst.max((fd - grad[nf + i]).abs() / scale);
    }
    Ok(FdConsistency {
        max_rel_error: worst,
        epsilon: eps,
        consistent: worst < 1e-3,
    })
}

/// One row of a coercivity ray scan.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RayScanRow {
    pub scale: f64,
    pub energy: f64,
    pub lower_bound: f64,
    pub norm_u: f64,
    pub norm_v: f64,
}

/// Energies and coercivity bounds along the ray `t -> (t u, t v)`.
pub fn coercivity_ray_scan(
    problem: &PreparedProblem,
    direction: (&DiscreteField, &DiscreteField),
    scales: &[f64],
    c_hat: f64,
    c1: f64,
) -> Result<Vec<RayScanRow>, EnergyError> {
    let (du, dv) = direction;
    if du.is_zero() && dv.is_zero() {
        return Err(EnergyError::Norm(crate::error::NormError::ZeroField));
    }
    let constants: CoercivityConstants = problem.coercivity_constants(c_hat, c1);
    let mut rows = Vec::with_capacity(scales.len());
    for &t in scales {
        let ut = du.scaled(t);
        let vt = dv.scaled(t);
        let energy = problem.energy(&ut, &vt)?;
        let nu = problem.space().gagliardo_norm(&ut)?;
        let nv = problem.space().gagliardo_norm(&vt)?;
        rows.push(RayScanRow {
            scale: t,
            energy,
            lower_bound: constants.bound(nu, nv),
            norm_u: nu,
            norm_v: nv,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::energy::{EnergyProblem, KirchhoffFn, KirchhoffSpec, PotentialSpec, SourceSpec};
    use crate::exponents::ExponentField;
    use crate::quad::QuadConfig;
    use std::sync::Arc;

    fn convex_problem(cells: usize) -> PreparedProblem {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, cells, 2.0).unwrap());
        let exponents = ExponentField::constant(2.0, 0.5, &dom).unwrap();
        EnergyProblem {
            domain: dom,
            exponents,
            kirchhoff: KirchhoffSpec {
                m1: KirchhoffFn::constant(1.0),
                m2: KirchhoffFn::constant(1.0),
                lower_coef: 0.5,
                gamma: 1.0,
            },
            potential: PotentialSpec::zero(),
            sources: SourceSpec::zero(),
            quad: QuadConfig::for_dim(1),
        }
        .prepare()
        .unwrap()
    }

    #[test]
    fn convex_preset_converges_to_zero() {
        let prob = convex_problem(16);
        let dom = prob.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u0 = DiscreteField::random(dom.clone(), &mut rng, 0.1);
        let v0 = DiscreteField::random(dom.clone(), &mut rng, 0.1);
        let cfg = MinimizerConfig {
            grad_tol: 1e-6,
            ..MinimizerConfig::default()
        };
        let res = minimize(&prob, (u0, v0), &cfg).unwrap();
        assert_eq!(res.termination, Termination::GradientTolerance);
        assert!(res.energy <= 1e-8, "energy {}", res.energy);
        assert!(res.u.sup_norm() <= 1e-4 && res.v.sup_norm() <= 1e-4);
        // trace is nonincreasing and the certificate dominates the norm
        for w in res.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        assert!(res.certificate >= res.grad_norm);
        // lower bound is zero here, so the certificate tends to zero
        assert!(res.certificate <= 1e-5, "certificate {}", res.certificate);
        assert!(res.fd_check.consistent);
        assert_eq!(res.residual_sup, res.grad_norm);
    }

    #[test]
    fn armijo_decrease_holds_per_iteration() {
        let prob = convex_problem(8);
        let dom = prob.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let u0 = DiscreteField::random(dom.clone(), &mut rng, 0.5);
        let v0 = DiscreteField::random(dom.clone(), &mut rng, 0.5);
        let cfg = MinimizerConfig {
            max_iters: 40,
            grad_tol: 1e-12,
            bb_init: false,
            ..MinimizerConfig::default()
        };
        let res = minimize(&prob, (u0, v0), &cfg).unwrap();
        for w in res.trace.windows(2) {
            // sigma * t * |g|^2 <= E_k - E_{k+1}; |g|_2^2 >= |g|_inf^2
            let decrease = w[0].energy - w[1].energy;
            let floor = 1e-4 * w[1].step * w[0].grad_norm.powi(2);
            assert!(decrease >= floor * 0.999, "decrease {decrease} floor {floor}");
        }
    }

    #[test]
    fn stall_reported_with_diagnostics() {
        let prob = convex_problem(8);
        let dom = prob.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u0 = DiscreteField::random(dom.clone(), &mut rng, 0.1);
        let v0 = DiscreteField::zero(dom.clone());
        // an enormous fixed trial step with no backtracks allowed cannot
        // satisfy the Armijo test on a convex landscape
        let cfg = MinimizerConfig {
            init_step: 1e12,
            max_backtracks: 0,
            bb_init: false,
            ..MinimizerConfig::default()
        };
        match minimize(&prob, (u0, v0), &cfg) {
            Err(SolveError::Stall {
                iteration,
                energy,
                grad_norm,
                ..
            }) => {
                assert_eq!(iteration, 0);
                assert!(energy.is_finite() && grad_norm.is_finite());
            }
            Ok(res) => panic!("expected stall, got termination {:?}", res.termination),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn quadratic_ray_scaling_is_exact() {
        let prob = convex_problem(8);
        let u = DiscreteField::hat(prob.domain().clone(), [0.5, 0.0], 0.25, 1.0);
        let zero = DiscreteField::zero(prob.domain().clone());
        let rows =
            coercivity_ray_scan(&prob, (&u, &zero), &[1.0, 2.0, 4.0], 0.0, prob.c1()).unwrap();
        let e1 = rows[0].energy;
        for row in &rows {
            let expected = row.scale * row.scale * e1;
            assert!(((row.energy - expected) / expected).abs() < 1e-12);
            assert!(row.energy >= row.lower_bound);
        }
        assert!(matches!(
            coercivity_ray_scan(&prob, (&zero, &zero), &[1.0], 0.0, 0.0),
            Err(EnergyError::Norm(crate::error::NormError::ZeroField))
        ));
    }

    #[test]
    fn certificate_examples() {
        // zero gap, zero gradient
        assert_eq!(ekeland_certificate(0.0, 0.0, 0.0), 0.0);
        // first iterate of a run dominates the final one in the convex case
        let prob = convex_problem(8);
        let dom = prob.domain().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let u0 = DiscreteField::random(dom.clone(), &mut rng, 0.3);
        let v0 = DiscreteField::random(dom.clone(), &mut rng, 0.3);
        let res = minimize(&prob, (u0, v0), &MinimizerConfig::default()).unwrap();
        let first = res.trace.first().unwrap().certificate;
        let last = res.trace.last().unwrap().certificate;
        assert!(first.is_finite() && first >= last);
    }

    #[test]
    fn singular_kirchhoff_perturbs_and_descends() {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let exponents = ExponentField::constant(2.2, 0.4, &dom).unwrap();
        let prob = EnergyProblem {
            domain: dom.clone(),
            exponents,
            kirchhoff: KirchhoffSpec {
                m1: KirchhoffFn::power(1.0, 0.8),
                m2: KirchhoffFn::power(1.0, 0.8),
                lower_coef: 0.5,
                gamma: 0.8,
            },
            potential: PotentialSpec::zero(),
            sources: SourceSpec::constants(0.4, 0.0),
            quad: QuadConfig::for_dim(1),
        }
        .prepare()
        .unwrap();
        let zero = DiscreteField::zero(dom.clone());
        let cfg = MinimizerConfig {
            max_iters: 400,
            grad_tol: 1e-5,
            ..MinimizerConfig::default()
        };
        let res = minimize(&prob, (zero.clone(), zero), &cfg).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        assert!(res.grad_norm <= 1e-5 || res.termination != Termination::GradientTolerance);
    }
}
