//! Task implementations: each returns artifacts plus task-specific results
//! for the run summary.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use serde::Serialize;
use serde_json::json;

use fracvar::energy::PreparedProblem;
use fracvar::properties::{field_margins, run_property_suite};
use fracvar::report::NormRecord;
use fracvar::{minimize, validate_exponents, DiscreteField, SolveError};

use crate::config::{BuildError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    /// Bad configuration or preconditions: exit code 2.
    #[error("{0}")]
    Config(String),
    /// A validation or property check failed: exit code 3.
    #[error("{0}")]
    ValidationFailed(String),
    /// The descent solver stalled: exit code 4.
    #[error("{0}")]
    Stall(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<BuildError> for TaskError {
    fn from(e: BuildError) -> Self {
        TaskError::Config(e.to_string())
    }
}

pub struct TaskOutput {
    pub artifacts: Vec<String>,
    pub results: serde_json::Value,
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), TaskError> {
    let mut f = File::create(dir.join(name))?;
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn run_validate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TaskOutput, TaskError> {
    let dom = cfg.build_domain()?;
    let exps = cfg.build_exponents(&dom)?;
    let report = validate_exponents(&exps, &dom, cfg.validation.samples)
        .map_err(|e| TaskError::Config(e.to_string()))?;

    let kirch = cfg.build_kirchhoff()?;
    let t_samples: Vec<f64> = (0..200)
        .map(|k| 1e-3 * (10.0_f64).powf(k as f64 / 50.0))
        .collect();
    let growth = kirch.check_growth_condition(&t_samples);

    let potential = cfg.build_potential()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pot_report = potential.validate(&mut rng, cfg.validation.potential_trials);

    // source admissibility: the conjugate of the diagonal exponent must be
    // subcritical wherever the critical exponent is finite
    let mut source_ok = true;
    let mut source_note = String::from("conjugate exponent subcritical");
    if report.all_passed() {
        let problem = cfg.build_problem()?;
        let q = problem.source_exponent();
        let space = problem.space();
        let n = dom.dim() as f64;
        for pt in space.cell_rule().points() {
            let pb = space.exponents().p(&pt.x, &pt.x);
            let sb = space.exponents().s(&pt.x, &pt.x);
            let denom = n - sb * pb;
            let qv = q(&pt.x);
            if qv <= 1.0 {
                source_ok = false;
                source_note = format!("q({:?}) = {qv} <= 1", pt.x);
                break;
            }
            if denom > 0.0 && qv >= n * pb / denom {
                source_ok = false;
                source_note = format!(
                    "q({:?}) = {qv} exceeds the critical exponent {}",
                    pt.x,
                    n * pb / denom
                );
                break;
            }
        }
    }

    let all = report.all_passed()
        && growth.passed
        && pot_report.gradient_consistent
        && pot_report.periodic
        && source_ok;
    let full = json!({
        "exponents": report,
        "kirchhoff_growth": growth,
        "potential": pot_report,
        "sources": { "passed": source_ok, "note": source_note },
        "all_passed": all,
    });
    write_json(out, "validation.json", &full)?;
    if !all {
        return Err(TaskError::ValidationFailed(format!(
            "validation failed; see {}",
            out.join("validation.json").display()
        )));
    }
    Ok(TaskOutput {
        artifacts: vec!["validation.json".into()],
        results: json!({ "all_passed": true }),
    })
}

pub fn run_norms(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TaskOutput, TaskError> {
    let problem = cfg.build_problem()?;
    let space = problem.space();
    let u = cfg.build_field(problem.domain(), seed)?;
    let p_bar = space.exponents().p_bar();
    let h = problem.domain().max_spacing();

    let rep = space
        .modular_report(&u)
        .map_err(|e| TaskError::Config(e.to_string()))?;
    let records = vec![
        NormRecord {
            quantity: "lebesgue_modular".into(),
            value: space.lebesgue_modular(&u, &p_bar),
            grid_h: h,
            quad_error_estimate: 0.0,
        },
        NormRecord {
            quantity: "luxemburg_norm".into(),
            value: space
                .luxemburg_norm(&u, &p_bar)
                .map_err(|e| TaskError::Config(e.to_string()))?,
            grid_h: h,
            quad_error_estimate: 0.0,
        },
        NormRecord {
            quantity: "fractional_modular".into(),
            value: rep.modular,
            grid_h: h,
            quad_error_estimate: rep.quad_error_estimate,
        },
        NormRecord {
            quantity: "weighted_modular".into(),
            value: space.weighted_modular(&u),
            grid_h: h,
            quad_error_estimate: rep.quad_error_estimate,
        },
        NormRecord {
            quantity: "gagliardo_norm".into(),
            value: rep.norm,
            grid_h: h,
            quad_error_estimate: rep.quad_error_estimate,
        },
    ];
    let full = json!({
        "records": records,
        "regime_modular": rep.regime_modular,
        "regime_norm": rep.regime_norm,
        "accuracy_warning": rep.accuracy_warning,
        "truncation_tail_bound": rep.truncation_tail_bound,
    });
    write_json(out, "norms.json", &full)?;
    Ok(TaskOutput {
        artifacts: vec!["norms.json".into()],
        results: json!({
            "fractional_modular": rep.modular,
            "gagliardo_norm": rep.norm,
        }),
    })
}

pub fn run_properties(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TaskOutput, TaskError> {
    if cfg.properties.trials == 0 {
        return Err(TaskError::Config(
            "properties.trials must be at least 1".into(),
        ));
    }
    let problem = cfg.build_problem()?;

    // replay mode: recompute margins for a serialized field
    if !cfg.properties.replay_field.is_empty() {
        let text = std::fs::read_to_string(&cfg.properties.replay_field)
            .map_err(|e| TaskError::Config(format!("replay field: {e}")))?;
        let u = fracvar::io::read_field_csv(text.as_bytes())
            .map_err(|e| TaskError::Config(format!("replay field: {e}")))?;
        let margins = field_margins(&problem, &u)
            .map_err(|e| TaskError::Config(e.to_string()))?;
        let full = json!({ "replay": margins });
        write_json(out, "properties.json", &full)?;
        return Ok(TaskOutput {
            artifacts: vec!["properties.json".into()],
            results: json!({ "replay": true }),
        });
    }

    let outcome = run_property_suite(&problem, seed, cfg.properties.trials)
        .map_err(|e| TaskError::Config(e.to_string()))?;
    write_json(out, "properties.json", &outcome.report)?;
    let mut artifacts = vec!["properties.json".into()];
    let failures = outcome.report.failures();
    if let Some((name, field)) = &outcome.failing_field {
        let mut f = File::create(out.join("failing_field.csv"))?;
        fracvar::io::write_field_csv(&mut f, field)?;
        artifacts.push("failing_field.csv".into());
        return Err(TaskError::ValidationFailed(format!(
            "{failures} property failures (first: {name}); field serialized for replay"
        )));
    }
    Ok(TaskOutput {
        artifacts,
        results: json!({ "failures": failures, "trials": cfg.properties.trials }),
    })
}

pub fn run_solve(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TaskOutput, TaskError> {
    let problem = cfg.build_problem()?;
    let dom = problem.domain().clone();
    let (u0, v0) = match cfg.solver.init.as_str() {
        "zero" => (DiscreteField::zero(dom.clone()), DiscreteField::zero(dom.clone())),
        "random" => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (
                DiscreteField::random(dom.clone(), &mut rng, cfg.solver.init_scale),
                DiscreteField::random(dom.clone(), &mut rng, cfg.solver.init_scale),
            )
        }
        other => {
            return Err(TaskError::Config(format!("unknown solver init '{other}'")));
        }
    };
    let mcfg = cfg.solver_config(seed);
    let res = match minimize(&problem, (u0, v0), &mcfg) {
        Ok(res) => res,
        Err(SolveError::Stall {
            iteration,
            backtracks,
            energy,
            grad_norm,
            step,
        }) => {
            let diag = json!({
                "iteration": iteration,
                "backtracks": backtracks,
                "energy": energy,
                "grad_norm": grad_norm,
                "step": step,
            });
            write_json(out, "stall.json", &diag)?;
            return Err(TaskError::Stall(format!(
                "line search stalled at iteration {iteration} (energy {energy:.6e}, grad {grad_norm:.3e})"
            )));
        }
        Err(e) => return Err(TaskError::Config(e.to_string())),
    };

    let mut f = File::create(out.join("trace.csv"))?;
    fracvar::io::write_trace_csv(&mut f, &res.trace)?;
    let mut f = File::create(out.join("plotdata.dat"))?;
    fracvar::io::write_plotdata(&mut f, &res.trace)?;
    let mut f = File::create(out.join("fields_u.csv"))?;
    fracvar::io::write_field_csv(&mut f, &res.u)?;
    let mut f = File::create(out.join("fields_v.csv"))?;
    fracvar::io::write_field_csv(&mut f, &res.v)?;
    let (ru, rv) = fracvar::operator::assemble_weak_residual(&problem, &res.u, &res.v)
        .map_err(|e| TaskError::Config(e.to_string()))?;
    let mut f = File::create(out.join("residual.csv"))?;
    fracvar::io::write_residual_csv(&mut f, &ru, &rv)?;

    Ok(TaskOutput {
        artifacts: vec![
            "trace.csv".into(),
            "plotdata.dat".into(),
            "fields_u.csv".into(),
            "fields_v.csv".into(),
            "residual.csv".into(),
        ],
        results: json!({
            "final_energy": res.energy,
            "grad_norm": res.grad_norm,
            "certificate": res.certificate,
            "residual_sup": res.residual_sup,
            "lower_bound": res.lower_bound,
            "iterations": res.trace.len() - 1,
            "termination": res.termination,
            "fd_check": res.fd_check,
        }),
    })
}

pub fn run_coercivity_scan(
    cfg: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<TaskOutput, TaskError> {
    let problem: PreparedProblem = cfg.build_problem()?;
    let dom = problem.domain().clone();
    let u_dir = cfg.build_field(&dom, seed)?;
    let v_dir = u_dir.scaled(cfg.coercivity.v_scale);
    if u_dir.is_zero() && v_dir.is_zero() {
        return Err(TaskError::Config("ray direction must be nonzero".into()));
    }
    let space = problem.space();
    let p_bar = space.exponents().p_bar();
    let mut c_hat = problem
        .embedding_constant_estimate(seed, cfg.coercivity.embedding_trials)
        .map_err(|e| TaskError::Config(e.to_string()))?;
    for dir in [&u_dir, &v_dir] {
        if !dir.is_zero() {
            c_hat = c_hat.max(
                space
                    .embedding_ratio(dir, &p_bar)
                    .map_err(|e| TaskError::Config(e.to_string()))?,
            );
        }
    }
    let rows = fracvar::coercivity_ray_scan(
        &problem,
        (&u_dir, &v_dir),
        &cfg.coercivity.scales,
        c_hat,
        problem.c1(),
    )
    .map_err(|e| TaskError::Config(e.to_string()))?;

    let mut f = File::create(out.join("coercivity.csv"))?;
    writeln!(f, "scale,energy,lower_bound,norm_u,norm_v")?;
    for r in &rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.scale, r.energy, r.lower_bound, r.norm_u, r.norm_v
        )?;
    }
    let bounded = rows.iter().all(|r| r.energy >= r.lower_bound);
    let full = json!({
        "rows": rows,
        "embedding_constant": c_hat,
        "bounded_below": bounded,
    });
    write_json(out, "coercivity.json", &full)?;
    if !bounded {
        return Err(TaskError::ValidationFailed(
            "energy dropped below the coercivity bound".into(),
        ));
    }
    Ok(TaskOutput {
        artifacts: vec!["coercivity.csv".into(), "coercivity.json".into()],
        results: json!({
            "bounded_below": bounded,
            "first_bound": rows.first().map(|r| r.lower_bound),
            "last_bound": rows.last().map(|r| r.lower_bound),
        }),
    })
}
