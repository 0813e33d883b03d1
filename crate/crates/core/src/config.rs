//! TOML run configurations and the problems they describe.
//!
//! ```toml
//! [model]
//! kind = "double_lambda"
//!
//! [grid]
//! total_time_ps = 5.4
//! dt = 4.0
//!
//! [propagator]
//! order = 2
//! direction = "backward"
//!
//! [field]
//! kind = "pi_sequence"
//!
//! [source]
//! kind = "adjoint"
//!
//! [target]
//! kind = "time_dependent"
//! k = 1e4
//! lambda_b = 4.5e-6
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::hilbert::{DenseHamiltonian, Hamiltonian, HamiltonianOp, StateVector};
use crate::inhom::{propagate, Direction, InhomogeneousTerm, PhiMode, Propagation, PropagatorConfig, Scheme};
use crate::oct::models::{build_double_lambda_with_dipole, build_surrogate_rb2, DoubleLambda, SurrogateRb2};
use crate::oct::pulses::{double_lambda_pi_sequence, GaussianPulse, GuessPulse};
use crate::oct::{
    backward_inhomogeneous, build_time_dependent_target, forward_propagate, ControlField, KrotovConfig, Projector,
    TargetSpec,
};
use crate::scan::{CellSpec, ScanGrid, ScanSpec};
use crate::timegrid::{make_chebyshev_grid, TimeGrid};
use crate::units::{cm_to_hartree, ps_to_au};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub propagator: PropagatorSection,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub source: SourceConfig,
    pub target: Option<TargetConfig>,
    pub oct: Option<OctConfig>,
    pub scan: Option<ScanSection>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `H = diag(energies) + ε·coupling·σ_x`.
    TwoLevel {
        #[serde(default = "default_two_level")]
        energies: [f64; 2],
        #[serde(default = "one")]
        coupling: f64,
    },
    DoubleLambda {
        #[serde(default = "one")]
        dipole: f64,
    },
    SurrogateRb2 {
        #[serde(default = "default_points")]
        n_points: usize,
        #[serde(default = "default_levels")]
        n_levels: usize,
    },
    /// Real symmetric `H0` and optional coupling `H1`.
    Dense { h0: Vec<Vec<f64>>, h1: Option<Vec<Vec<f64>>> },
}

fn default_two_level() -> [f64; 2] {
    [0.0, 1.0]
}
fn one() -> f64 {
    1.0
}
fn default_points() -> usize {
    128
}
fn default_levels() -> usize {
    4
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Basis level, or vibrational level of the ground surface for the
    /// surrogate model.
    Level { level: usize },
    /// Normalized random state from the run seed.
    Random,
    Amplitudes { re: Vec<f64>, im: Option<Vec<f64>> },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Level { level: 0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKindConfig {
    #[default]
    Equidistant,
    Lobatto,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub kind: GridKindConfig,
    pub total_time: Option<f64>,
    pub total_time_ps: Option<f64>,
    pub n_steps: Option<usize>,
    pub dt: Option<f64>,
    /// Holds the field constant over consecutive blocks of this length, each
    /// at its value at the block midpoint, so that grids of different step
    /// size see the same Hamiltonian.
    pub field_hold: Option<f64>,
}

impl GridConfig {
    pub fn total(&self) -> Result<f64> {
        match (self.total_time, self.total_time_ps) {
            (Some(t), None) => Ok(t),
            (None, Some(ps)) => Ok(ps_to_au(ps)),
            _ => Err(Error::Config("[grid] needs exactly one of total_time, total_time_ps".into())),
        }
    }

    pub fn build(&self) -> Result<TimeGrid> {
        let total = self.total()?;
        match (self.kind, self.n_steps, self.dt) {
            (GridKindConfig::Equidistant, Some(n), None) => TimeGrid::equidistant(total, n),
            (GridKindConfig::Equidistant, None, Some(dt)) => {
                let n = (total / dt).round();
                if n < 1.0 || ((n * dt - total) / total).abs() > 1e-9 {
                    return Err(Error::Config(format!("[grid] dt = {dt} does not divide total time {total}")));
                }
                TimeGrid::equidistant(total, n as usize)
            }
            (GridKindConfig::Lobatto, Some(n), None) => make_chebyshev_grid(total, n + 1),
            (GridKindConfig::Lobatto, _, Some(_)) => Err(Error::Config("[grid] Lobatto grids take n_steps, not dt".into())),
            _ => Err(Error::Config("[grid] needs exactly one of n_steps, dt".into())),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub phi_mode: Option<PhiMode>,
    pub tolerance: Option<f64>,
    pub eps_switch: Option<f64>,
    pub n_cheb_sample: Option<usize>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
}

fn default_order() -> usize {
    1
}
fn default_scheme() -> Scheme {
    Scheme::Full
}
fn default_direction() -> Direction {
    Direction::Forward
}

impl Default for PropagatorSection {
    fn default() -> Self {
        Self {
            order: 1,
            scheme: Scheme::Full,
            phi_mode: None,
            tolerance: None,
            eps_switch: None,
            n_cheb_sample: None,
            direction: Direction::Forward,
        }
    }
}

impl PropagatorSection {
    pub fn build(&self, order: usize, grid: TimeGrid) -> PropagatorConfig {
        let mut cfg = PropagatorConfig::new(order, grid).with_scheme(self.scheme).with_direction(self.direction);
        if let Some(mode) = self.phi_mode {
            cfg = cfg.with_phi_mode(mode);
        }
        if let Some(tol) = self.tolerance {
            cfg = cfg.with_tolerance(tol);
        }
        if let Some(e) = self.eps_switch {
            cfg.eps_switch = e;
        }
        cfg.n_cheb_sample = self.n_cheb_sample.unwrap_or(order);
        cfg
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    /// Peak amplitude; a π-pulse amplitude for unit dipole when absent.
    pub amplitude: Option<f64>,
    /// Centre in a.u.; `T/2` when absent.
    pub center: Option<f64>,
    /// Width in a.u.; `T/8` when absent.
    pub sigma: Option<f64>,
    pub omega: Option<f64>,
    pub omega_cm: Option<f64>,
}

impl GaussianSection {
    fn build(&self, total: f64, dipole: f64) -> Result<GaussianPulse> {
        let omega = match (self.omega, self.omega_cm) {
            (Some(w), None) => w,
            (None, Some(cm)) => cm_to_hartree(cm),
            (None, None) => 0.0,
            _ => return Err(Error::Config("[field] give omega or omega_cm, not both".into())),
        };
        let center = self.center.unwrap_or(0.5 * total);
        let sigma = self.sigma.unwrap_or(total / 8.0);
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("[field] sigma must be positive, got {sigma}")));
        }
        Ok(match self.amplitude {
            Some(a) => GaussianPulse { amplitude: a, center, sigma, omega },
            None => GaussianPulse::pi_pulse(dipole, center, sigma, omega),
        })
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Gaussian(GaussianSection),
    /// Four resonant π-pulses; double-Λ model only.
    PiSequence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Zero,
    /// `λ_b G(t) φ(t)` from a forward run under the same field.
    Adjoint,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub kind: SourceKind,
}

fn default_lambda_0() -> f64 {
    1.0
}
fn default_lambda_b() -> f64 {
    1e-3
}
fn default_lambda_a() -> f64 {
    1e3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    FinalTime {
        final_level: usize,
        #[serde(default = "default_lambda_0")]
        lambda_0: f64,
    },
    /// `allowed` lists levels, or electronic channels for the surrogate.
    StateConstraint {
        final_level: usize,
        allowed: Vec<usize>,
        #[serde(default = "default_lambda_0")]
        lambda_0: f64,
        #[serde(default = "default_lambda_b")]
        lambda_b: f64,
    },
    /// Four-window ladder schedule of the double-Λ model.
    TimeDependent {
        k: f64,
        #[serde(default = "default_lambda_b")]
        lambda_b: f64,
        #[serde(default)]
        lambda_0: f64,
    },
}

impl TargetConfig {
    pub fn lambdas(&self) -> (f64, f64) {
        match *self {
            TargetConfig::FinalTime { lambda_0, .. } => (lambda_0, 0.0),
            TargetConfig::StateConstraint { lambda_0, lambda_b, .. } => (lambda_0, lambda_b),
            TargetConfig::TimeDependent { lambda_0, lambda_b, .. } => (lambda_0, lambda_b),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    #[default]
    Constant,
    Sin2,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OctConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_lambda_a")]
    pub lambda_a: f64,
    #[serde(default)]
    pub shape: ShapeKind,
    #[serde(default = "default_monotonic_tolerance")]
    pub monotonic_tolerance: f64,
}

fn default_iterations() -> usize {
    100
}
fn default_monotonic_tolerance() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub orders: Vec<usize>,
    #[serde(default)]
    pub steps: Vec<f64>,
    #[serde(default)]
    pub n_steps: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub reference_order: Option<usize>,
    pub reference_dt: Option<f64>,
    pub reference_n_steps: Option<usize>,
}

fn default_threshold() -> f64 {
    1e-6
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl RunConfig {
    /// Parses TOML text; errors carry `origin:line:column`.
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (l, c) = line_col(src, span.start);
                    Error::Config(format!("{origin}:{l}:{c}: {msg}"))
                }
                None => Error::Config(format!("{origin}: {msg}")),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn scan_spec(&self) -> Result<ScanSpec> {
        let s = self.scan.as_ref().ok_or_else(|| Error::Config("missing [scan] section".into()))?;
        let grid = match self.grid.kind {
            GridKindConfig::Equidistant => ScanGrid::Equidistant,
            GridKindConfig::Lobatto => ScanGrid::Lobatto,
        };
        let reference = match (s.reference_order, s.reference_dt, s.reference_n_steps) {
            (None, None, None) => None,
            (order, dt, n_steps) => Some(CellSpec {
                m: order.unwrap_or_else(|| s.orders.iter().copied().max().unwrap_or(1)),
                dt,
                n_steps,
            }),
        };
        let spec = ScanSpec {
            orders: s.orders.clone(),
            steps: s.steps.clone(),
            n_steps: s.n_steps.clone(),
            grid,
            scheme: self.propagator.scheme,
            phi_mode: self.propagator.phi_mode,
            total_time: self.grid.total()?,
            threshold: s.threshold,
            tolerance: self.propagator.tolerance,
            reference,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The concrete model behind a configuration.
#[derive(Clone, Debug)]
pub enum Model {
    Levels { hamiltonian: DenseHamiltonian, labels: Vec<String>, dipole: f64 },
    DoubleLambda(DoubleLambda),
    Surrogate(SurrogateRb2),
}

impl Model {
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        Ok(match cfg {
            ModelConfig::TwoLevel { energies, coupling } => {
                let h = DenseHamiltonian::from_real(
                    &[&[energies[0], 0.0], &[0.0, energies[1]]],
                    Some(&[&[0.0, *coupling], &[*coupling, 0.0]]),
                )?;
                Model::Levels { hamiltonian: h, labels: vec!["0".into(), "1".into()], dipole: *coupling }
            }
            ModelConfig::DoubleLambda { dipole } => Model::DoubleLambda(build_double_lambda_with_dipole(*dipole)),
            ModelConfig::SurrogateRb2 { n_points, n_levels } => {
                Model::Surrogate(build_surrogate_rb2(*n_points, (*n_levels).max(1))?)
            }
            ModelConfig::Dense { h0, h1 } => {
                let n = h0.len();
                let to_matrix = |rows: &Vec<Vec<f64>>, name: &str| -> Result<DMatrix<C64>> {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Config(format!("[model] {name} must be a square {n}x{n} matrix")));
                    }
                    Ok(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
                };
                let h = DenseHamiltonian::new(to_matrix(h0, "h0")?, h1.as_ref().map(|m| to_matrix(m, "h1")).transpose()?)?;
                Model::Levels { hamiltonian: h, labels: (0..n).map(|i| i.to_string()).collect(), dipole: 1.0 }
            }
        })
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        match self {
            Model::Levels { hamiltonian, .. } => hamiltonian.clone().into(),
            Model::DoubleLambda(m) => m.hamiltonian.clone().into(),
            Model::Surrogate(s) => s.hamiltonian.clone().into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Levels { hamiltonian, .. } => hamiltonian.dim(),
            Model::DoubleLambda(_) => 5,
            Model::Surrogate(s) => 3 * s.n_points(),
        }
    }

    fn dipole(&self) -> f64 {
        match self {
            Model::Levels { dipole, .. } => *dipole,
            Model::DoubleLambda(m) => m.dipole,
            Model::Surrogate(_) => 1.0,
        }
    }

    /// Column names of [`Model::populations`].
    pub fn population_labels(&self) -> Vec<String> {
        match self {
            Model::Levels { labels, .. } => labels.iter().map(|l| format!("pop_{l}")).collect(),
            Model::DoubleLambda(m) => m.labels().iter().map(|l| format!("pop_{l}")).collect(),
            Model::Surrogate(_) => (0..3).map(|c| format!("pop_channel{c}")).collect(),
        }
    }

    /// Level populations, or electronic-channel populations for the
    /// surrogate model.
    pub fn populations(&self, psi: &StateVector) -> Vec<f64> {
        match self {
            Model::Surrogate(s) => {
                let n = s.n_points();
                (0..3).map(|c| psi.as_slice()[c * n..(c + 1) * n].iter().map(|a| a.norm_sqr()).sum()).collect()
            }
            _ => psi.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    fn level_state(&self, level: usize) -> Result<StateVector> {
        match self {
            Model::Surrogate(s) => s
                .ground_levels
                .get(level)
                .cloned()
                .ok_or_else(|| Error::Config(format!("level {level} beyond the {} computed levels", s.ground_levels.len()))),
            _ if level < self.dim() => Ok(StateVector::basis(self.dim(), level)),
            _ => Err(Error::Config(format!("level {level} out of range for dimension {}", self.dim()))),
        }
    }

    fn level_projector(&self, level: usize) -> Result<Projector> {
        match self {
            Model::Surrogate(s) if level < s.ground_levels.len() => Ok(s.ground_level_projector(level)),
            Model::Surrogate(_) => Err(Error::Config(format!("final_level {level} beyond the computed levels"))),
            _ if level < self.dim() => Ok(Projector::levels(self.dim(), &[level])),
            _ => Err(Error::Config(format!("final_level {level} out of range for dimension {}", self.dim()))),
        }
    }

    fn allowed_projector(&self, allowed: &[usize]) -> Result<Projector> {
        match self {
            Model::Surrogate(s) => {
                if let Some(c) = allowed.iter().find(|&&c| c >= 3) {
                    return Err(Error::Config(format!("allowed channel {c} out of range (0..3)")));
                }
                Ok(s.channel_projector(allowed))
            }
            _ => {
                if let Some(l) = allowed.iter().find(|&&l| l >= self.dim()) {
                    return Err(Error::Config(format!("allowed level {l} out of range for dimension {}", self.dim())));
                }
                Ok(Projector::levels(self.dim(), allowed))
            }
        }
    }
}

/// Everything needed to run a configuration.
pub struct Problem {
    pub config: RunConfig,
    pub model: Model,
    pub hamiltonian: Hamiltonian,
    pub psi0: StateVector,
    pub grid: TimeGrid,
    pub propagator: PropagatorConfig,
    pub guess: Option<GuessPulse>,
    pub target: Option<TargetSpec>,
    pub warnings: Vec<String>,
}

impl Problem {
    /// `seed` overrides the seed in the file.
    pub fn build(config: RunConfig, seed: Option<u64>) -> Result<Self> {
        let model = Model::build(&config.model)?;
        let hamiltonian = model.hamiltonian();
        let grid = config.grid.build()?;
        let total = grid.total_time();
        let propagator = config.propagator.build(config.propagator.order, grid.clone());
        propagator.validate()?;
        let seed = seed.or(config.seed).unwrap_or(0);
        let dim = model.dim();
        let psi0 = match &config.initial {
            InitialConfig::Level { level } => model.level_state(*level)?,
            InitialConfig::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                StateVector::from_vec((0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                    .normalized()
            }
            InitialConfig::Amplitudes { re, im } => {
                let im = im.clone().unwrap_or_else(|| vec![0.0; re.len()]);
                if re.len() != dim || im.len() != dim {
                    return Err(Error::Config(format!("[initial] amplitudes need {dim} entries")));
                }
                StateVector::from_vec(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect())
            }
        };
        let guess = match &config.field {
            FieldConfig::Zero | FieldConfig::Constant { .. } => None,
            FieldConfig::Gaussian(g) => Some(GuessPulse::Gaussian(g.build(total, model.dipole())?)),
            FieldConfig::PiSequence => match &model {
                Model::DoubleLambda(m) => Some(double_lambda_pi_sequence(m, total)),
                _ => return Err(Error::Config("[field] pi_sequence needs the double_lambda model".into())),
            },
        };
        let target = match &config.target {
            None => None,
            Some(TargetConfig::FinalTime { final_level, .. }) => {
                Some(TargetSpec::FinalTime { d: model.level_projector(*final_level)? })
            }
            Some(TargetConfig::StateConstraint { final_level, allowed, .. }) => Some(TargetSpec::StateConstraint {
                d: model.level_projector(*final_level)?,
                p_allow: model.allowed_projector(allowed)?,
            }),
            Some(TargetConfig::TimeDependent { k, .. }) => match &model {
                Model::DoubleLambda(_) => Some(build_time_dependent_target(total, *k)?),
                _ => return Err(Error::Config("[target] time_dependent needs the double_lambda model".into())),
            },
        };
        if config.source.kind == SourceKind::Adjoint && target.is_none() {
            return Err(Error::Config("[source] adjoint needs a [target] section".into()));
        }
        if let Some(h) = config.grid.field_hold {
            if !(h > 0.0) {
                return Err(Error::Config(format!("[grid] field_hold must be positive, got {h}")));
            }
        }
        let mut warnings = Vec::new();
        if let Some(g) = &guess {
            warnings.extend(g.sample(&grid).1);
        }
        Ok(Self { config, model, hamiltonian, psi0, grid, propagator, guess, target, warnings })
    }

    /// Field samples, one per step of `grid`.
    pub fn field_on(&self, grid: &TimeGrid) -> Vec<f64> {
        let mids = grid.midpoints();
        let at = |t: f64| match self.config.grid.field_hold {
            Some(h) => ((t / h).floor() + 0.5) * h,
            None => t,
        };
        match (&self.config.field, &self.guess) {
            (FieldConfig::Constant { value }, _) => vec![*value; grid.n_steps()],
            (_, Some(g)) => mids.into_iter().map(|t| g.eval(at(t))).collect(),
            _ => Vec::new(),
        }
    }

    /// Control field with the configured weights on `grid`.
    pub fn control_on(&self, grid: &TimeGrid) -> ControlField {
        let (lambda_0, lambda_b) = self.config.target.as_ref().map_or((0.0, 0.0), |t| t.lambdas());
        let oct = self.config.oct.as_ref();
        let lambda_a = oct.map_or(default_lambda_a(), |o| o.lambda_a);
        let mut samples = self.field_on(grid);
        if samples.is_empty() {
            samples = vec![0.0; grid.n_steps()];
        }
        let field = ControlField::new(samples, lambda_a, lambda_b, lambda_0);
        match oct.map(|o| o.shape) {
            Some(ShapeKind::Sin2) => field.with_sin2_shape(grid),
            _ => field,
        }
    }

    pub fn krotov_config(&self) -> Result<KrotovConfig> {
        let oct = self.config.oct.as_ref().ok_or_else(|| Error::Config("missing [oct] section".into()))?;
        let mut k = KrotovConfig::new(self.propagator.clone().with_direction(Direction::Forward), oct.iterations);
        k.monotonic_tolerance = oct.monotonic_tolerance;
        Ok(k)
    }

    /// One propagation as configured, on the grid of `cfg`. Backward runs
    /// with the adjoint source first propagate `psi0` forward under the same
    /// field; otherwise `psi0` is the state at the starting end.
    pub fn run(&self, cfg: &PropagatorConfig) -> Result<Propagation> {
        let h: &dyn HamiltonianOp = &self.hamiltonian;
        match self.config.source.kind {
            SourceKind::Zero => propagate(&self.psi0, &InhomogeneousTerm::Zero, h, &self.field_on(&cfg.grid), cfg),
            SourceKind::Adjoint => {
                let target = self.target.as_ref().expect("checked at build");
                let field = self.control_on(&cfg.grid);
                let phi = forward_propagate(&self.psi0, &field.samples, h, cfg)?;
                backward_inhomogeneous(&phi, &field, target, h, cfg)
            }
        }
    }
}
