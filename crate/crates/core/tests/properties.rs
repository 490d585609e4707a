//! Property suites for the norm/modular laws, the Holder inequality, the
//! coercivity chain, and serialization invariants, on 1-d and 2-d grids.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fracvar::energy::{EnergyProblem, KirchhoffFn, KirchhoffSpec, PotentialSpec, SourceSpec};
use fracvar::properties::run_property_suite;
use fracvar::{
    conjugate_exponent, DiscreteField, DomainSpec, ExponentField, ExponentPreset, FunctionSpace,
    PointMap, PreparedProblem, QuadConfig,
};

fn space_1d(p0: f64, s0: f64) -> FunctionSpace {
    let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
    let exps = ExponentField::constant(p0, s0, &dom).unwrap();
    FunctionSpace::new(dom, exps, QuadConfig::for_dim(1)).unwrap()
}

fn variable_problem_1d(cells: usize) -> PreparedProblem {
    let dom = Arc::new(DomainSpec::line(0.0, 1.0, cells, 2.0).unwrap());
    let exps = ExponentPreset::Sinusoidal {
        p0: 2.3,
        p_amp: 0.25,
        s0: 0.35,
        s_amp: 0.05,
        freq: 2.0,
    }
    .build(&dom, 17)
    .unwrap();
    EnergyProblem {
        domain: dom,
        exponents: exps,
        kirchhoff: KirchhoffSpec {
            m1: KirchhoffFn::affine(0.8, 0.4),
            m2: KirchhoffFn::affine(0.8, 0.4),
            lower_coef: 0.4,
            gamma: 1.15,
        },
        potential: PotentialSpec::sin_cos(0.15, 1.0),
        sources: SourceSpec::zero(),
        quad: QuadConfig::for_dim(1),
    }
    .prepare()
    .unwrap()
}

fn problem_2d() -> PreparedProblem {
    let dom = Arc::new(DomainSpec::rect([0.0, 0.0], [1.0, 1.0], [3, 3], 3.0).unwrap());
    let exps = ExponentPreset::Affine {
        p0: 2.0,
        p_slope: 0.2,
        s0: 0.45,
        s_slope: 0.0,
    }
    .build(&dom, 9)
    .unwrap();
    EnergyProblem {
        domain: dom,
        exponents: exps,
        kirchhoff: KirchhoffSpec {
            m1: KirchhoffFn::affine(1.0, 0.2),
            m2: KirchhoffFn::constant(1.2),
            lower_coef: 0.5,
            gamma: 1.0,
        },
        potential: PotentialSpec::sin_cos(0.1, 2.0),
        sources: SourceSpec::zero(),
        quad: QuadConfig::for_dim(2),
    }
    .prepare()
    .unwrap()
}

#[test]
fn invariant_suite_clean_in_1d() {
    let prob = variable_problem_1d(16);
    let out = run_property_suite(&prob, 1234, 40).unwrap();
    for p in &out.report.properties {
        assert_eq!(p.failures, 0, "property {} failed: {:?}", p.name, p);
    }
}

#[test]
fn invariant_suite_clean_in_2d() {
    let prob = problem_2d();
    let out = run_property_suite(&prob, 99, 12).unwrap();
    for p in &out.report.properties {
        assert_eq!(p.failures, 0, "property {} failed: {:?}", p.name, p);
    }
}

/// Constant-exponent reduction: at p == p0, s == s0 every quantity
/// collapses to the standard fractional p0-Laplacian formulas.
#[test]
fn constant_exponent_reduction() {
    let sp = space_1d(2.5, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let u = DiscreteField::random(sp.domain().clone(), &mut rng, 1.0);
        if u.is_zero() {
            continue;
        }
        let m = sp.fractional_modular(&u);
        let norm = sp.gagliardo_norm(&u).unwrap();
        let delta = sp.weighted_modular(&u);
        assert!(((norm - m.powf(1.0 / 2.5)) / norm).abs() < 1e-8);
        assert!(((delta - m / 2.5) / delta).abs() < 1e-12);
        let pairing = fracvar::operator::weak_pairing(&sp, &u, &u);
        assert!(((pairing - m) / m).abs() < 1e-12);
    }
}

/// The coercivity chain holds pointwise on random pairs when the
/// embedding constant dominates the fields' own ratios.
#[test]
fn coercivity_chain_on_random_pairs() {
    let prob = variable_problem_1d(8);
    let space = prob.space();
    let p_bar = space.exponents().p_bar();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..20 {
        let u = DiscreteField::random(space.domain().clone(), &mut rng, 1.5);
        let v = DiscreteField::random(space.domain().clone(), &mut rng, 1.5);
        if u.is_zero() || v.is_zero() {
            continue;
        }
        let c_hat = space
            .embedding_ratio(&u, &p_bar)
            .unwrap()
            .max(space.embedding_ratio(&v, &p_bar).unwrap());
        let (energy, bound) = prob
            .coercivity_lower_bound(&u, &v, c_hat, prob.c1())
            .unwrap();
        assert!(
            energy >= bound - 1e-9 * energy.abs().max(1.0),
            "trial {trial}: energy {energy} < bound {bound}"
        );
    }
}

/// Weak residual entries vanish where nothing couples: zero fields, zero
/// sources, and a potential with vanishing derivatives leave every basis
/// row at zero, including rows far from any support.
#[test]
fn residual_vanishes_without_excitation() {
    let dom = Arc::new(DomainSpec::line(0.0, 1.0, 16, 2.0).unwrap());
    let exps = ExponentField::constant(2.0, 0.4, &dom).unwrap();
    let prob = EnergyProblem {
        domain: dom.clone(),
        exponents: exps,
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
    .unwrap();
    let zero = DiscreteField::zero(dom);
    let (ru, rv) = fracvar::operator::assemble_weak_residual(&prob, &zero, &zero).unwrap();
    assert!(ru.iter().all(|&r| r == 0.0));
    assert!(rv.iter().all(|&r| r == 0.0));
}

/// At constant exponents and a monotone Kirchhoff coefficient, the pairing
/// of the scaled residual row against the field grows with the scale.
#[test]
fn residual_ray_pairing_is_monotone() {
    let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
    let exps = ExponentField::constant(2.4, 0.4, &dom).unwrap();
    let prob = EnergyProblem {
        domain: dom.clone(),
        exponents: exps,
        kirchhoff: KirchhoffSpec {
            m1: KirchhoffFn::affine(1.0, 0.5),
            m2: KirchhoffFn::constant(1.0),
            lower_coef: 0.5,
            gamma: 1.2,
        },
        potential: PotentialSpec::zero(),
        sources: SourceSpec::zero(),
        quad: QuadConfig::for_dim(1),
    }
    .prepare()
    .unwrap();
    let u = DiscreteField::hat(dom.clone(), [0.5, 0.0], 0.25, 1.0);
    let zero = DiscreteField::zero(dom);
    let mut prev = 0.0;
    for c in [0.5, 1.0, 2.0, 4.0] {
        let uc = u.scaled(c);
        let (ru, _) = fracvar::operator::assemble_weak_residual(&prob, &uc, &zero).unwrap();
        let pairing: f64 = ru
            .iter()
            .zip(uc.free_values().iter())
            .map(|(r, w)| r * w)
            .sum();
        assert!(pairing > prev, "c={c}: {pairing} <= {prev}");
        prev = pairing;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Homogeneity of the fractional modular at constant exponent.
    #[test]
    fn modular_homogeneity(c in 0.05_f64..20.0, seed in 0u64..1000) {
        let sp = space_1d(2.0, 0.45);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DiscreteField::random(sp.domain().clone(), &mut rng, 1.0);
        prop_assume!(!u.is_zero());
        let m1 = sp.fractional_modular(&u);
        let mc = sp.fractional_modular(&u.scaled(c));
        let expected = c.powi(2) * m1;
        prop_assert!(((mc - expected) / expected).abs() < 1e-10);
    }

    /// Luxemburg norms are absolutely one-homogeneous for any exponent.
    #[test]
    fn luxemburg_homogeneity(c in 0.05_f64..20.0, seed in 0u64..1000) {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let exps = ExponentPreset::Affine { p0: 2.0, p_slope: 0.7, s0: 0.4, s_slope: 0.0 }
            .build(&dom, 17).unwrap();
        let sp = FunctionSpace::new(dom, exps, QuadConfig::for_dim(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DiscreteField::random(sp.domain().clone(), &mut rng, 1.0);
        prop_assume!(!u.is_zero());
        let n1 = sp.gagliardo_norm(&u).unwrap();
        let nc = sp.gagliardo_norm(&u.scaled(c)).unwrap();
        prop_assert!(((nc - c * n1) / (c * n1)).abs() < 1e-8);
    }

    /// Conjugation is an involution for any admissible exponent profile.
    #[test]
    fn conjugate_involution(base in 1.1_f64..6.0, slope in 0.0_f64..0.8) {
        let dom = DomainSpec::line(0.0, 1.0, 4, 2.0).unwrap();
        let p: PointMap = Arc::new(move |x: &fracvar::Point| base + slope * (x[0] + 0.5));
        let q = conjugate_exponent(&p, &dom, 9).unwrap();
        let back = conjugate_exponent(&q, &dom, 9).unwrap();
        for i in 0..=8 {
            let x = [-0.5 + 2.0 * i as f64 / 8.0, 0.0];
            prop_assert!(((back(&x) - p(&x)) / p(&x)).abs() < 1e-12);
        }
    }

    /// Validation always passes for admissible constant exponents,
    /// regardless of sample count.
    #[test]
    fn constant_exponents_always_validate(
        p0 in 1.05_f64..4.0,
        s0 in 0.05_f64..0.95,
        samples in 1usize..20,
    ) {
        prop_assume!(p0 * s0 < 1.0); // subcritical in 1-d
        let dom = DomainSpec::line(0.0, 1.0, 4, 2.0).unwrap();
        let f = ExponentField::constant(p0, s0, &dom).unwrap();
        let report = fracvar::validate_exponents(&f, &dom, samples).unwrap();
        prop_assert!(report.all_passed());
    }

    /// Field CSV serialization round-trips bit-exactly.
    #[test]
    fn field_csv_roundtrip(seed in 0u64..10000) {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DiscreteField::random(dom, &mut rng, 3.0);
        let mut buf = Vec::new();
        fracvar::io::write_field_csv(&mut buf, &u).unwrap();
        let back = fracvar::io::read_field_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), u.values());
    }
}
