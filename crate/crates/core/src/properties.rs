//! The invariant suite: norm/modular laws of the zero-trace space, the
//! Holder inequality, boundedness of the potential, growth and
//! monotonicity of the Kirchhoff terms, and the empirical embedding
//! constant, all evaluated on seeded random fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::PreparedProblem;
use crate::error::NormError;
use crate::exponents::conjugate_exponent;
use crate::field::DiscreteField;
use crate::operator;
use crate::report::{PropertyReport, PropertyResult};
use crate::spaces::regime_of;

/// Quadrature slack allowed on inequalities that are exact in exact
/// arithmetic.
const SANDWICH_SLACK: f64 = 1e-6;

/// Result of the suite plus the first field that broke a property, kept
/// for serialization and replay.
pub struct PropertySuiteOutcome {
    pub report: PropertyReport,
    pub failing_field: Option<(String, DiscreteField)>,
}

struct Tracker {
    name: &'static str,
    trials: usize,
    failures: usize,
    worst: f64,
    note: String,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker {
            name,
            trials: 0,
            failures: 0,
            worst: f64::INFINITY,
            note: String::new(),
        }
    }

    fn record(&mut self, margin: f64, ok: bool) -> bool {
        self.trials += 1;
        if margin < self.worst {
            self.worst = margin;
        }
        if !ok {
            self.failures += 1;
        }
        ok
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name.to_string(),
            trials: self.trials,
            failures: self.failures,
            worst_margin: if self.worst.is_finite() { self.worst } else { 0.0 },
            note: self.note,
        }
    }
}

/// Per-field margins, used both inside the suite and for replaying a
/// serialized field.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FieldMargins {
    pub modular: f64,
    pub norm: f64,
    pub weighted: f64,
    pub regimes_agree: bool,
    pub sandwich_margin: f64,
    pub weight_sandwich_margin: f64,
    pub pairing_identity_defect: f64,
}

pub fn field_margins(
    problem: &PreparedProblem,
    u: &DiscreteField,
) -> Result<FieldMargins, NormError> {
    let space = problem.space();
    let b = space.exponent_bounds();
    let modular = space.fractional_modular(u);
    let norm = space.gagliardo_norm(u)?;
    let weighted = space.weighted_modular(u);
    let sandwich_margin = if norm < 1.0 {
        (modular - norm.powf(b.p_max)).min(norm.powf(b.p_min) - modular)
    } else {
        (modular - norm.powf(b.p_min)).min(norm.powf(b.p_max) - modular)
    };
    let weight_sandwich_margin =
        (modular - b.p_min * weighted).min(b.p_max * weighted - modular);
    let pairing = operator::weak_pairing(space, u, u);
    let pairing_identity_defect = (pairing - modular).abs() / modular.abs().max(1e-300);
    Ok(FieldMargins {
        modular,
        norm,
        weighted,
        regimes_agree: regime_of(modular) == regime_of(norm),
        sandwich_margin,
        weight_sandwich_margin,
        pairing_identity_defect,
    })
}

/// Run the full suite with `trials` random fields. Requires `trials >= 1`.
pub fn run_property_suite(
    problem: &PreparedProblem,
    seed: u64,
    trials: usize,
) -> Result<PropertySuiteOutcome, NormError> {
    assert!(trials >= 1, "property suite needs at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = problem.space();
    let dom = space.domain().clone();

    let mut regimes = Tracker::new("modular_norm_regime_agreement");
    let mut sandwich = Tracker::new("norm_modular_sandwich");
    let mut weight_sandwich = Tracker::new("weighted_modular_sandwich");
    let mut vanishing = Tracker::new("vanishing_sequence_equivalence");
    let mut holder = Tracker::new("holder_inequality");
    let mut pairing_identity = Tracker::new("pairing_modular_identity");
    let mut assembly_odd = Tracker::new("assembly_odd_symmetry");
    let mut potential_bound = Tracker::new("potential_bounded_by_c1");
    let mut antiderivative_monotone = Tracker::new("kirchhoff_antiderivative_monotone");
    let mut growth = Tracker::new("kirchhoff_growth_condition");
    let mut embedding = Tracker::new("embedding_ratio_holdout");
    let mut failing: Option<(String, DiscreteField)> = None;
    let note_failure =
        |failing: &mut Option<(String, DiscreteField)>, name: &str, u: &DiscreteField| {
            if failing.is_none() {
                *failing = Some((name.to_string(), u.clone()));
            }
        };

    let scale_targets = [0.25, 0.9, 1.1, 4.0];
    let p_bar = space.exponents().p_bar();
    let q = conjugate_exponent(&p_bar, &dom, 17)?;

    for trial in 0..trials {
        let raw = DiscreteField::random(dom.clone(), &mut rng, 1.0);
        if raw.is_zero() {
            continue;
        }
        let norm0 = space.gagliardo_norm(&raw)?;
        let target = scale_targets[trial % scale_targets.len()];
        let u = raw.scaled(target / norm0);
        let m = field_margins(problem, &u)?;

        if !regimes.record(
            (m.modular - 1.0).abs().min((m.norm - 1.0).abs()),
            m.regimes_agree,
        ) {
            note_failure(&mut failing, "modular_norm_regime_agreement", &u);
        }
        if !sandwich.record(m.sandwich_margin, m.sandwich_margin >= -SANDWICH_SLACK) {
            note_failure(&mut failing, "norm_modular_sandwich", &u);
        }
        if !weight_sandwich.record(
            m.weight_sandwich_margin,
            m.weight_sandwich_margin >= -SANDWICH_SLACK,
        ) {
            note_failure(&mut failing, "weighted_modular_sandwich", &u);
        }
        if !pairing_identity.record(
            1e-12 - m.pairing_identity_defect,
            m.pairing_identity_defect <= 1e-12,
        ) {
            note_failure(&mut failing, "pairing_modular_identity", &u);
        }

        // vanishing sequence u / j
        let mut prev_m = m.modular;
        let mut prev_n = m.norm;
        let mut monotone = true;
        for j in 2..=20 {
            let uj = u.scaled(1.0 / j as f64);
            let mj = space.fractional_modular(&uj);
            let nj = space.gagliardo_norm(&uj)?;
            if mj >= prev_m || nj >= prev_n {
                monotone = false;
            }
            prev_m = mj;
            prev_n = nj;
        }
        let shrink = (m.modular - prev_m) / m.modular.max(1e-300);
        if !vanishing.record(shrink, monotone && prev_m < m.modular && prev_n < m.norm) {
            note_failure(&mut failing, "vanishing_sequence_equivalence", &u);
        }

        // Holder on an independent partner field
        let v = DiscreteField::random(dom.clone(), &mut rng, 1.0);
        let h = space.holder_pairing(&u, &v, &p_bar, &q)?;
        let margin = h.rhs - h.lhs;
        if !holder.record(margin, margin >= -1e-12 * h.rhs.abs().max(1.0)) {
            note_failure(&mut failing, "holder_inequality", &u);
        }

        // oddness of the assembled operator
        if trial % 8 == 0 {
            let a_pos = operator::assemble(space, &u);
            let a_neg = operator::assemble(space, &u.scaled(-1.0));
            let scale = a_pos.iter().fold(0.0_f64, |s, &t| s.max(t.abs())).max(1e-300);
            let defect = a_pos
                .iter()
                .zip(a_neg.iter())
                .fold(0.0_f64, |d, (x, y)| d.max((x + y).abs()))
                / scale;
            if !assembly_odd.record(1e-12 - defect, defect <= 1e-12) {
                note_failure(&mut failing, "assembly_odd_symmetry", &u);
            }
        }

        // potential bounded by c1 on random arguments
        let c1 = problem.c1();
        let period = problem.potential.period();
        for _ in 0..8 {
            let a: f64 = rand::Rng::gen_range(&mut rng, -2.0 * period..2.0 * period);
            let b: f64 = rand::Rng::gen_range(&mut rng, -2.0 * period..2.0 * period);
            let hv = problem.potential.h(a, b).abs();
            if !potential_bound.record(c1 - hv, hv <= c1 + 1e-9) {
                note_failure(&mut failing, "potential_bounded_by_c1", &u);
            }
        }

        // Kirchhoff antiderivative monotone on random pairs
        let t1: f64 = rand::Rng::gen_range(&mut rng, 0.0..5.0);
        let t2: f64 = rand::Rng::gen_range(&mut rng, 0.0..5.0);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        for m_fn in [&problem.kirchhoff.m1, &problem.kirchhoff.m2] {
            let a = m_fn.antiderivative(lo).unwrap_or(f64::NAN);
            let b = m_fn.antiderivative(hi).unwrap_or(f64::NAN);
            let ok = a.is_finite() && b.is_finite() && a <= b + 1e-12 * b.abs().max(1.0);
            if !antiderivative_monotone.record(b - a, ok) {
                note_failure(&mut failing, "kirchhoff_antiderivative_monotone", &u);
            }
        }
    }

    // growth condition on a log-spaced sample set
    let t_samples: Vec<f64> = (0..200).map(|k| 1e-3 * (10.0_f64).powf(k as f64 / 50.0)).collect();
    let g = problem.kirchhoff.check_growth_condition(&t_samples);
    growth.record(g.min_margin, g.passed);
    growth.note = format!("worst at t = {:.4}, coefficient {}", g.argmin_t, g.argmin_which);

    // embedding: ensemble constant, then a held-out batch
    {
        let ens_trials = trials.clamp(16, 500);
        let mut best = 0.0_f64;
        for _ in 0..ens_trials {
            let w = DiscreteField::random(dom.clone(), &mut rng, 1.0);
            if w.is_zero() {
                continue;
            }
            best = best.max(space.embedding_ratio(&w, &p_bar)?);
        }
        let mut worst_margin = f64::INFINITY;
        let mut ok_all = true;
        for _ in 0..(ens_trials / 4).max(8) {
            let w = DiscreteField::random(dom.clone(), &mut rng, 1.0);
            if w.is_zero() {
                continue;
            }
            let r = space.embedding_ratio(&w, &p_bar)?;
            worst_margin = worst_margin.min(1.05 * best - r);
            if r > 1.05 * best {
                ok_all = false;
            }
        }
        embedding.record(worst_margin, ok_all);
        embedding.note = format!("ensemble constant {best:.6}");
    }

    let report = PropertyReport {
        seed,
        trials,
        properties: vec![
            regimes.finish(),
            sandwich.finish(),
            weight_sandwich.finish(),
            vanishing.finish(),
            holder.finish(),
            pairing_identity.finish(),
            assembly_odd.finish(),
            potential_bound.finish(),
            antiderivative_monotone.finish(),
            growth.finish(),
            embedding.finish(),
        ],
    };
    Ok(PropertySuiteOutcome {
        report,
        failing_field: failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::energy::{EnergyProblem, KirchhoffFn, KirchhoffSpec, PotentialSpec, SourceSpec};
    use crate::exponents::ExponentField;
    use crate::quad::QuadConfig;
    use std::sync::Arc;

    #[test]
    fn suite_runs_clean_on_a_variable_exponent_problem() {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let exps = crate::exponents::ExponentPreset::Sinusoidal {
            p0: 2.2,
            p_amp: 0.2,
            s0: 0.4,
            s_amp: 0.05,
            freq: 1.0,
        }
        .build(&dom, 17)
        .unwrap();
        let prob = EnergyProblem {
            domain: dom,
            exponents: exps,
            kirchhoff: KirchhoffSpec {
                m1: KirchhoffFn::affine(1.0, 0.3),
                m2: KirchhoffFn::affine(1.0, 0.3),
                lower_coef: 0.5,
                gamma: 1.1,
            },
            potential: PotentialSpec::sin_cos(0.2, 1.0),
            sources: SourceSpec::zero(),
            quad: QuadConfig::for_dim(1),
        }
        .prepare()
        .unwrap();
        let out = run_property_suite(&prob, 42, 24).unwrap();
        assert_eq!(out.report.failures(), 0, "{:?}", out.report);
        assert!(out.failing_field.is_none());
    }

    #[test]
    fn replayed_field_reproduces_margins() {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
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
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = DiscreteField::random(dom, &mut rng, 1.0);
        let m1 = field_margins(&prob, &u).unwrap();
        let m2 = field_margins(&prob, &u).unwrap();
        assert_eq!(m1.modular.to_bits(), m2.modular.to_bits());
        assert_eq!(m1.norm.to_bits(), m2.norm.to_bits());
        assert_eq!(
            m1.sandwich_margin.to_bits(),
            m2.sandwich_margin.to_bits()
        );
    }
}
