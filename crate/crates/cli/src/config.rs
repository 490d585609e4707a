//! TOML run configuration and its translation into an energy problem.

use std::sync::Arc;

use serde::Deserialize;

use fracvar::energy::{EnergyProblem, KirchhoffFn, KirchhoffSpec, PotentialSpec, SourceSpec};
use fracvar::{DiscreteField, DomainSpec, ExponentField, ExponentPreset, PointMap, QuadConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub exponents: ExponentSection,
    #[serde(default)]
    pub kirchhoff: KirchhoffSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub sources: SourcesSection,
    #[serde(default)]
    pub quadrature: Option<QuadSection>,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub properties: PropertiesSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub coercivity: CoercivitySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    pub omega_min: Vec<f64>,
    pub omega_max: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default = "default_dilation")]
    pub dilation: f64,
}

fn default_dilation() -> f64 {
    2.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub preset: String,
    pub p0: f64,
    pub s0: f64,
    #[serde(default)]
    pub p_amp: f64,
    #[serde(default)]
    pub s_amp: f64,
    #[serde(default = "default_freq")]
    pub freq: f64,
    #[serde(default)]
    pub p_slope: f64,
    #[serde(default)]
    pub s_slope: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_freq() -> f64 {
    1.0
}

fn default_samples() -> usize {
    17
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KirchhoffSection {
    #[serde(default = "default_mfn")]
    pub m1: MFnSection,
    #[serde(default = "default_mfn")]
    pub m2: MFnSection,
    #[serde(default = "default_lower_coef")]
    pub lower_coef: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for KirchhoffSection {
    fn default() -> Self {
        KirchhoffSection {
            m1: default_mfn(),
            m2: default_mfn(),
            lower_coef: default_lower_coef(),
            gamma: default_gamma(),
        }
    }
}

fn default_mfn() -> MFnSection {
    MFnSection {
        preset: "constant".to_string(),
        c: 1.0,
        c0: 1.0,
        c1: 0.0,
        coef: 1.0,
        gamma: 1.0,
    }
}

fn default_lower_coef() -> f64 {
    0.5
}

fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MFnSection {
    pub preset: String,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default = "one")]
    pub coef: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "one")]
    pub period: f64,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SourcesSection {
    #[serde(default)]
    pub a: Option<SourceSection>,
    #[serde(default)]
    pub b: Option<SourceSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub preset: String,
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub halfwidth: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub path: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub sep_gauss: Option<usize>,
    pub overlap_gauss: Option<usize>,
    pub radial_gauss: Option<usize>,
    pub cross_gauss: Option<usize>,
    pub graded_levels: Option<usize>,
    pub grading: Option<f64>,
    pub cell_gauss: Option<usize>,
    pub target_rel_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default = "default_field_preset")]
    pub preset: String,
    #[serde(default = "one")]
    pub height: f64,
    #[serde(default = "default_halfwidth")]
    pub halfwidth: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub path: String,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            preset: default_field_preset(),
            height: 1.0,
            halfwidth: default_halfwidth(),
            scale: 1.0,
            path: String::new(),
        }
    }
}

fn default_field_preset() -> String {
    "hat".to_string()
}

fn default_halfwidth() -> f64 {
    0.25
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_stall_tol")]
    pub energy_stall_tol: f64,
    #[serde(default = "one")]
    pub init_step: f64,
    #[serde(default = "default_backtrack")]
    pub backtrack: f64,
    #[serde(default = "default_armijo")]
    pub armijo: f64,
    #[serde(default = "default_max_backtracks")]
    pub max_backtracks: usize,
    #[serde(default = "default_perturbation")]
    pub origin_perturbation: f64,
    #[serde(default = "default_true")]
    pub bb_init: bool,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            energy_stall_tol: default_stall_tol(),
            init_step: 1.0,
            backtrack: default_backtrack(),
            armijo: default_armijo(),
            max_backtracks: default_max_backtracks(),
            origin_perturbation: default_perturbation(),
            bb_init: true,
            init: default_init(),
            init_scale: default_init_scale(),
        }
    }
}

fn default_max_iters() -> usize {
    500
}

fn default_grad_tol() -> f64 {
    1e-4
}

fn default_stall_tol() -> f64 {
    1e-15
}

fn default_backtrack() -> f64 {
    0.5
}

fn default_armijo() -> f64 {
    1e-4
}

fn default_max_backtracks() -> usize {
    60
}

fn default_perturbation() -> f64 {
    1e-2
}

fn default_true() -> bool {
    true
}

fn default_init() -> String {
    "random".to_string()
}

fn default_init_scale() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub replay_field: String,
}

impl Default for PropertiesSection {
    fn default() -> Self {
        PropertiesSection {
            trials: default_trials(),
            replay_field: String::new(),
        }
    }
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fd_trials")]
    pub potential_trials: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            samples: default_samples(),
            potential_trials: default_fd_trials(),
        }
    }
}

fn default_fd_trials() -> usize {
    200
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoercivitySection {
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "default_embedding_trials")]
    pub embedding_trials: usize,
    #[serde(default = "default_v_scale")]
    pub v_scale: f64,
}

impl Default for CoercivitySection {
    fn default() -> Self {
        CoercivitySection {
            scales: default_scales(),
            embedding_trials: default_embedding_trials(),
            v_scale: default_v_scale(),
        }
    }
}

fn default_scales() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

fn default_embedding_trials() -> usize {
    64
}

fn default_v_scale() -> f64 {
    0.8
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] fracvar::DomainError),
    #[error(transparent)]
    Exponent(#[from] fracvar::ExponentError),
    #[error(transparent)]
    Energy(#[from] fracvar::EnergyError),
    #[error(transparent)]
    Field(#[from] fracvar::FieldError),
    #[error("field file: {0}")]
    FieldFile(String),
}

fn point(v: &[f64]) -> [f64; 2] {
    [
        v.first().copied().unwrap_or(0.0),
        v.get(1).copied().unwrap_or(0.0),
    ]
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, BuildError> {
        toml::from_str(text).map_err(|e| BuildError::Config(e.to_string()))
    }

    pub fn build_domain(&self) -> Result<Arc<DomainSpec>, BuildError> {
        let d = &self.domain;
        if d.dim == 0 || d.dim > 2 {
            return Err(BuildError::Config(format!("dim must be 1 or 2, got {}", d.dim)));
        }
        if d.omega_min.len() < d.dim || d.omega_max.len() < d.dim || d.cells.len() < d.dim {
            return Err(BuildError::Config(
                "omega_min/omega_max/cells must have one entry per dimension".into(),
            ));
        }
        let dom = if d.dim == 1 {
            DomainSpec::line(d.omega_min[0], d.omega_max[0], d.cells[0], d.dilation)?
        } else {
            DomainSpec::rect(
                point(&d.omega_min),
                point(&d.omega_max),
                [d.cells[0], d.cells[1]],
                d.dilation,
            )?
        };
        Ok(Arc::new(dom))
    }

    pub fn build_exponents(&self, dom: &DomainSpec) -> Result<ExponentField, BuildError> {
        let e = &self.exponents;
        let preset = match e.preset.as_str() {
            "constant" => ExponentPreset::Constant { p0: e.p0, s0: e.s0 },
            "sinusoidal" => ExponentPreset::Sinusoidal {
                p0: e.p0,
                p_amp: e.p_amp,
                s0: e.s0,
                s_amp: e.s_amp,
                freq: e.freq,
            },
            "affine" => ExponentPreset::Affine {
                p0: e.p0,
                p_slope: e.p_slope,
                s0: e.s0,
                s_slope: e.s_slope,
            },
            other => {
                return Err(BuildError::Config(format!("unknown exponent preset '{other}'")))
            }
        };
        Ok(preset.build(dom, e.samples)?)
    }

    fn build_mfn(section: &MFnSection) -> Result<KirchhoffFn, BuildError> {
        Ok(match section.preset.as_str() {
            "constant" => KirchhoffFn::constant(section.c),
            "affine" => KirchhoffFn::affine(section.c0, section.c1),
            "power" => KirchhoffFn::power(section.coef, section.gamma),
            "power_shifted" => KirchhoffFn::power_shifted(section.c0, section.coef, section.gamma),
            other => {
                return Err(BuildError::Config(format!(
                    "unknown Kirchhoff preset '{other}'"
                )))
            }
        })
    }

    pub fn build_kirchhoff(&self) -> Result<KirchhoffSpec, BuildError> {
        Ok(KirchhoffSpec {
            m1: Self::build_mfn(&self.kirchhoff.m1)?,
            m2: Self::build_mfn(&self.kirchhoff.m2)?,
            lower_coef: self.kirchhoff.lower_coef,
            gamma: self.kirchhoff.gamma,
        })
    }

    pub fn build_potential(&self) -> Result<PotentialSpec, BuildError> {
        let p = &self.potential;
        Ok(match p.preset.as_deref().unwrap_or("zero") {
            "zero" => PotentialSpec::zero(),
            "constant" => PotentialSpec::constant(p.c),
            "sincos" => PotentialSpec::sin_cos(p.alpha, p.period),
            other => {
                return Err(BuildError::Config(format!(
                    "unknown potential preset '{other}'"
                )))
            }
        })
    }

    fn build_source(section: Option<&SourceSection>, dim: usize) -> Result<PointMap, BuildError> {
        let Some(s) = section else {
            return Ok(Arc::new(|_: &fracvar::Point| 0.0));
        };
        Ok(match s.preset.as_str() {
            "zero" => Arc::new(|_: &fracvar::Point| 0.0),
            "constant" => {
                let v = s.value;
                Arc::new(move |_: &fracvar::Point| v)
            }
            "bump" => SourceSpec::bump(point(&s.center), s.halfwidth, s.amplitude, dim),
            "csv" => {
                let text = std::fs::read_to_string(&s.path)
                    .map_err(|e| BuildError::FieldFile(format!("{}: {e}", s.path)))?;
                let field = fracvar::io::read_field_csv(text.as_bytes())
                    .map_err(|e| BuildError::FieldFile(e.to_string()))?;
                Arc::new(move |x: &fracvar::Point| field.eval(*x))
            }
            other => {
                return Err(BuildError::Config(format!("unknown source preset '{other}'")))
            }
        })
    }

    pub fn build_problem(&self) -> Result<fracvar::PreparedProblem, BuildError> {
        let dom = self.build_domain()?;
        let exponents = self.build_exponents(&dom)?;
        let kirchhoff = self.build_kirchhoff()?;
        let potential = self.build_potential()?;
        let a = Self::build_source(self.sources.a.as_ref(), dom.dim())?;
        let b = Self::build_source(self.sources.b.as_ref(), dom.dim())?;
        let quad = self.build_quad(dom.dim());
        Ok(EnergyProblem {
            domain: dom,
            exponents,
            kirchhoff,
            potential,
            sources: SourceSpec { a, b },
            quad,
        }
        .prepare()?)
    }

    pub fn build_quad(&self, dim: usize) -> QuadConfig {
        let mut q = QuadConfig::for_dim(dim);
        if let Some(sec) = &self.quadrature {
            if let Some(v) = sec.sep_gauss {
                q.sep_gauss = v;
            }
            if let Some(v) = sec.overlap_gauss {
                q.overlap_gauss = v;
            }
            if let Some(v) = sec.radial_gauss {
                q.radial_gauss = v;
            }
            if let Some(v) = sec.cross_gauss {
                q.cross_gauss = v;
            }
            if let Some(v) = sec.graded_levels {
                q.graded_levels = v;
            }
            if let Some(v) = sec.grading {
                q.grading = v;
            }
            if let Some(v) = sec.cell_gauss {
                q.cell_gauss = v;
            }
            if let Some(v) = sec.target_rel_tol {
                q.target_rel_tol = v;
            }
        }
        q
    }

    /// Field for the norms task and for ray-scan directions.
    pub fn build_field(
        &self,
        dom: &Arc<DomainSpec>,
        seed: u64,
    ) -> Result<DiscreteField, BuildError> {
        let f = &self.field;
        Ok(match f.preset.as_str() {
            "hat" => {
                let bmin = dom.b_min();
                let bmax = dom.b_max();
                let omega_center = match dom.shape() {
                    fracvar::RegionShape::Box { min, max } => {
                        [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0]
                    }
                    _ => [(bmin[0] + bmax[0]) / 2.0, (bmin[1] + bmax[1]) / 2.0],
                };
                DiscreteField::hat(dom.clone(), omega_center, f.halfwidth, f.height)
            }
            "random" => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                DiscreteField::random(dom.clone(), &mut rng, f.scale)
            }
            "csv" => {
                let text = std::fs::read_to_string(&f.path)
                    .map_err(|e| BuildError::FieldFile(format!("{}: {e}", f.path)))?;
                fracvar::io::read_field_csv(text.as_bytes())
                    .map_err(|e| BuildError::FieldFile(e.to_string()))?
            }
            other => return Err(BuildError::Config(format!("unknown field preset '{other}'"))),
        })
    }

    pub fn solver_config(&self, seed: u64) -> fracvar::MinimizerConfig {
        let s = &self.solver;
        fracvar::MinimizerConfig {
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            energy_stall_tol: s.energy_stall_tol,
            init_step: s.init_step,
            backtrack: s.backtrack,
            armijo: s.armijo,
            max_backtracks: s.max_backtracks,
            origin_perturbation: s.origin_perturbation,
            perturb_seed: seed,
            bb_init: s.bb_init,
            track_norms: false,
        }
    }
}
