//! The experiment suite.
//!
//! A [`ProblemDef`] describes one experiment (geometry, network, physical
//! scalars, training defaults). [`ProblemDef::assemble`] turns it into a
//! graph plus a [`CompositeLoss`]; [`solve`] trains it and scores the result
//! against the closed-form solution.

mod data;
pub mod physics;
mod report;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AdError, Expr, Graph, Program, LANES};
use crate::losses::{CompositeLoss, LossError, LossTerm};
use crate::network::{
    build_dense, build_fourier, build_polynomial, fourier_layout, initialize, polynomial_layout, Activation,
    NetworkError, NetworkSpec, ParamStore,
};
use crate::optimizer::{train, AdamConfig, TrainConfig, TrainError, TrainReport};
use crate::sampling::{boundary_subset, uniform_grid, Axis, CollocationSet, Edges, Role, SamplingError, SpaceTimeSets};

pub use data::{gen_regression_data, noisy_samples, DataSet, RegressionKind};
pub use physics::{Scalars, Values};
pub use report::{
    error_metrics, inversion_history_csv, parse_inversion_history, parse_results_csv, results_csv, ErrorMetrics,
    InversionHistory, MetricsSummary, ResultRow, SummaryError,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("problem `{0}` has no analytic solution")]
    OracleMissing(String),
    #[error("invalid setting: {0}")]
    BadSetting(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    LinearRegression,
    QuadraticRegression,
    FourierSmoothing,
    SpringMass,
    Membrane,
    Plate,
    Laplace,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 7] = [
        ProblemKind::LinearRegression,
        ProblemKind::QuadraticRegression,
        ProblemKind::FourierSmoothing,
        ProblemKind::SpringMass,
        ProblemKind::Membrane,
        ProblemKind::Plate,
        ProblemKind::Laplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::LinearRegression => "linear-regression",
            ProblemKind::QuadraticRegression => "quadratic-regression",
            ProblemKind::FourierSmoothing => "fourier-smoothing",
            ProblemKind::SpringMass => "spring-mass",
            ProblemKind::Membrane => "membrane",
            ProblemKind::Plate => "plate",
            ProblemKind::Laplace => "laplace",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(
            self,
            ProblemKind::LinearRegression | ProblemKind::QuadraticRegression | ProblemKind::FourierSmoothing
        )
    }

    /// Coordinate names in point order.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            ProblemKind::LinearRegression | ProblemKind::QuadraticRegression => &["x"],
            ProblemKind::FourierSmoothing | ProblemKind::SpringMass => &["t"],
            ProblemKind::Membrane | ProblemKind::Plate => &["x", "y", "t"],
            ProblemKind::Laplace => &["x", "y"],
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown problem `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Forward,
    Inverse,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Inverse => "inverse",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Mode::Forward),
            "inverse" => Ok(Mode::Inverse),
            _ => Err(format!("unknown mode `{s}` (expected forward or inverse)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// `b + sum_k W_k x^k`.
    Polynomial {
        order: usize,
    },
    /// Single hidden layer of `units` sine neurons.
    Fourier {
        units: usize,
    },
    Dense {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalSpec {
    pub name: String,
    pub truth: f64,
    pub trainable: bool,
    pub init: f64,
}

impl PhysicalSpec {
    fn fixed(name: &str, truth: f64) -> Self {
        Self {
            name: name.into(),
            truth,
            trainable: false,
            init: truth,
        }
    }

    /// Trainable in inverse mode, starting from twice the truth.
    fn unknown(name: &str, truth: f64, mode: Mode) -> Self {
        let inverse = mode == Mode::Inverse;
        Self {
            name: name.into(),
            truth,
            trainable: inverse,
            init: if inverse { 2.0 * truth } else { truth },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemDef {
    pub kind: ProblemKind,
    pub mode: Mode,
    /// Training grid, one axis per coordinate.
    pub axes: Vec<Axis>,
    pub model: Model,
    /// Extra factor on first-layer weights of sine networks.
    pub first_layer_scale: f64,
    pub physical: Vec<PhysicalSpec>,
    /// Number of measurements for one-dimensional data sets.
    pub data_count: usize,
    pub noise_sigma: f64,
    /// Initial-displacement amplitude of the plate.
    pub ic_amplitude: f64,
    /// Time of the evaluation slice for space-time problems.
    pub eval_time: Option<f64>,
    /// Initial loss weights by term name; unlisted terms start at 1.
    pub term_weights: Vec<(String, f64)>,
    pub train: TrainConfig,
}

fn config(epochs: usize, batch_size: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size,
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn dense(depth: usize, width: usize, activation: Activation) -> Model {
    Model::Dense {
        hidden: vec![width; depth],
        activation,
    }
}

/// Regression fits (forward only): noisy samples, data term only.
pub fn regression_problem(kind: RegressionKind) -> ProblemDef {
    let (lo, hi) = kind.interval();
    let (model, data_count, sigma, train) = match kind {
        RegressionKind::Linear => (Model::Polynomial { order: 1 }, 100, 0.2, config(3000, 0, 1e-2)),
        RegressionKind::Quadratic => (Model::Polynomial { order: 2 }, 100, 0.2, config(5000, 0, 1e-2)),
        RegressionKind::Fourier => (Model::Fourier { units: 20 }, 300, 0.1, config(10000, 0, 1e-2)),
    };
    ProblemDef {
        kind: kind.problem(),
        mode: Mode::Forward,
        axes: vec![Axis::new(lo, hi, data_count)],
        model,
        first_layer_scale: 1.0,
        physical: Vec::new(),
        data_count,
        noise_sigma: sigma,
        ic_amplitude: 1.0,
        eval_time: None,
        term_weights: Vec::new(),
        train,
    }
}

/// Forced undamped oscillator `u'' + omega^2 u = F0 sin(omega_bar t)` on
/// `t` in `[0, 4 pi]` with `u(0) = u'(0) = 0`.
pub fn spring_mass_problem(mode: Mode) -> ProblemDef {
    ProblemDef {
        kind: ProblemKind::SpringMass,
        mode,
        axes: vec![Axis::new(0.0, 4.0 * PI, 400)],
        model: dense(4, 20, Activation::Sin),
        // Forcing frequency per unit of rescaled time is 4.5 * 4 pi ~ 56.5;
        // Glorot bounds first-layer weights by ~0.53.
        first_layer_scale: match mode {
            Mode::Forward => 100.0,
            Mode::Inverse => 10.0,
        },
        physical: vec![
            PhysicalSpec::unknown("omega", 3.0, mode),
            PhysicalSpec::fixed("omega_bar", 4.5),
            PhysicalSpec::fixed("F0", 1.0),
        ],
        data_count: 200,
        noise_sigma: 0.0,
        ic_amplitude: 1.0,
        eval_time: None,
        term_weights: match mode {
            Mode::Forward => Vec::new(),
            Mode::Inverse => vec![("data".to_string(), 100.0)],
        },
        train: config(20000, 0, 1e-3),
    }
}

/// Wave equation `c (u_xx + u_yy) = u_tt` on the unit square with fixed
/// edges, released from `sin(pi x) sin(pi y)` at rest.
pub fn membrane_problem(mode: Mode) -> ProblemDef {
    let (t_end, nt) = match mode {
        Mode::Forward => (1.0 / (2.0 * 2f64.sqrt()), 20),
        Mode::Inverse => (1.0, 40),
    };
    ProblemDef {
        kind: ProblemKind::Membrane,
        mode,
        axes: vec![
            Axis::new(0.0, 1.0, 40),
            Axis::new(0.0, 1.0, 40),
            Axis::new(0.0, t_end, nt),
        ],
        model: dense(4, 20, Activation::Sin),
        first_layer_scale: 1.0,
        physical: vec![PhysicalSpec::unknown("c", 1.0, mode)],
        data_count: 0,
        noise_sigma: 0.0,
        ic_amplitude: 1.0,
        eval_time: Some(match mode {
            Mode::Forward => t_end / 2.0,
            Mode::Inverse => 0.5,
        }),
        term_weights: Vec::new(),
        train: match mode {
            Mode::Forward => config(20000, 0, 1e-3),
            Mode::Inverse => config(4000, 512, 1e-3),
        },
    }
}

/// Simply supported Kirchhoff plate
/// `D/rho (u_xxxx + 2 u_xxyy + u_yyyy) + u_tt = 0`.
pub fn plate_problem(mode: Mode) -> ProblemDef {
    let (axes, t_end) = match mode {
        Mode::Forward => (
            vec![
                Axis::new(0.0, 1.0, 20),
                Axis::new(0.0, 1.0, 20),
                Axis::new(0.0, 0.1, 40),
            ],
            0.1,
        ),
        Mode::Inverse => (
            vec![
                Axis::new(0.0, 1.0, 40),
                Axis::new(0.0, 1.0, 40),
                Axis::new(0.0, 1.0, 40),
            ],
            1.0,
        ),
    };
    ProblemDef {
        kind: ProblemKind::Plate,
        mode,
        axes,
        model: dense(4, 40, Activation::Sin),
        first_layer_scale: match mode {
            Mode::Forward => 1.0,
            // About 1.2 periods of the 7.6 rad/s mode over t in [0, 1].
            Mode::Inverse => 5.0,
        },
        physical: vec![PhysicalSpec::unknown(
            "D_hat",
            physics::plate_normalized_stiffness(),
            mode,
        )],
        data_count: 0,
        noise_sigma: 0.0,
        ic_amplitude: 1.0,
        eval_time: Some(t_end / 2.0),
        term_weights: match mode {
            Mode::Forward => ["ic_u", "ic_ut", "bc_u"].map(|t| (t.to_string(), 300.0)).to_vec(),
            Mode::Inverse => vec![("data".to_string(), 100.0)],
        },
        train: config(1000, 512, 1e-3),
    }
}

/// `kappa (f_xx + f_yy) = 0` on the unit square with the manufactured
/// solution `x^2 - y^2`: prescribed values on `x = 0, 1` and prescribed flux
/// on `y = 0, 1`.
pub fn laplace_demo_problem(mode: Mode) -> ProblemDef {
    ProblemDef {
        kind: ProblemKind::Laplace,
        mode,
        axes: vec![Axis::new(0.0, 1.0, 21), Axis::new(0.0, 1.0, 21)],
        model: dense(3, 20, Activation::Tanh),
        first_layer_scale: 1.0,
        physical: vec![PhysicalSpec::unknown("kappa", 1.0, mode)],
        data_count: 0,
        noise_sigma: 0.0,
        ic_amplitude: 1.0,
        eval_time: None,
        term_weights: Vec::new(),
        train: config(5000, 0, 1e-3),
    }
}

/// Graph, objective and initial parameters of one problem.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub graph: Graph,
    /// Network output.
    pub output: Expr,
    pub loss: CompositeLoss,
    /// Initial network parameters and trainable physical scalars.
    pub store: ParamStore,
    pub trainable_physical: Vec<String>,
    pub data: Option<DataSet>,
}

impl ProblemDef {
    /// Default settings for `kind` in `mode`.
    pub fn new(kind: ProblemKind, mode: Mode) -> Result<Self, ProblemError> {
        let def = match kind {
            ProblemKind::LinearRegression => regression_problem(RegressionKind::Linear),
            ProblemKind::QuadraticRegression => regression_problem(RegressionKind::Quadratic),
            ProblemKind::FourierSmoothing => regression_problem(RegressionKind::Fourier),
            ProblemKind::SpringMass => spring_mass_problem(mode),
            ProblemKind::Membrane => membrane_problem(mode),
            ProblemKind::Plate => plate_problem(mode),
            ProblemKind::Laplace => laplace_demo_problem(mode),
        };
        if def.mode != mode {
            return Err(ProblemError::BadSetting(format!("{kind} has no {mode} mode")));
        }
        Ok(def)
    }

    pub fn input_names(&self) -> Vec<String> {
        self.kind.inputs().iter().map(|s| s.to_string()).collect()
    }

    /// Physical scalars at their true values, plus the plate amplitude.
    pub fn truth(&self) -> Values {
        let mut v: Vec<(String, f64)> = self.physical.iter().map(|p| (p.name.clone(), p.truth)).collect();
        v.push(("amplitude".into(), self.ic_amplitude));
        Values(v)
    }

    /// Multipliers applied to coordinates before they enter the network:
    /// time axes of differential problems longer than 1 are mapped onto
    /// `[0, 1]`.
    pub fn input_scales(&self) -> Vec<f64> {
        if self.kind.is_regression() {
            return vec![1.0; self.axes.len()];
        }
        self.kind
            .inputs()
            .iter()
            .zip(&self.axes)
            .map(|(&name, axis)| {
                if name == "t" && axis.hi > 1.0 {
                    1.0 / axis.hi
                } else {
                    1.0
                }
            })
            .collect()
    }

    pub fn oracle(&self, point: &[f64]) -> f64 {
        physics::oracle(self.kind, point, &self.truth())
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: String| Err(ProblemError::BadSetting(m));
        if self.axes.len() != self.kind.inputs().len() {
            return bad(format!("{} needs {} axes", self.kind, self.kind.inputs().len()));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        let needs_data =
            self.kind.is_regression() || (self.kind == ProblemKind::SpringMass && self.mode == Mode::Inverse);
        if needs_data && self.data_count < 2 {
            return bad("need at least 2 measurements".into());
        }
        match (&self.model, self.kind) {
            (Model::Polynomial { order }, ProblemKind::LinearRegression | ProblemKind::QuadraticRegression)
                if *order >= 1 => {}
            (Model::Fourier { units }, ProblemKind::FourierSmoothing) if *units >= 1 => {}
            (Model::Dense { hidden, .. }, k) if !k.is_regression() && hidden.iter().all(|&w| w > 0) => {}
            (m, k) => return bad(format!("model {m:?} does not fit {k}")),
        }
        if !(self.first_layer_scale.is_finite() && self.first_layer_scale > 0.0) {
            return bad("first layer scale must be positive".into());
        }
        let names = self.term_names();
        for (name, w) in &self.term_weights {
            if !names.contains(&name.as_str()) {
                return bad(format!("{} {} has no loss term `{name}`", self.kind, self.mode));
            }
            if !(w.is_finite() && *w > 0.0) {
                return bad(format!("weight of `{name}` must be positive"));
            }
        }
        Ok(())
    }

    /// Loss term names in the order [`ProblemDef::assemble`] creates them.
    pub fn term_names(&self) -> Vec<&'static str> {
        use ProblemKind::*;
        match (self.kind, self.mode) {
            (k, _) if k.is_regression() => vec!["data"],
            (SpringMass, Mode::Forward) => vec!["ode", "ic_u", "ic_ut"],
            (SpringMass, Mode::Inverse) => vec!["ode", "data"],
            (Membrane, Mode::Forward) => vec!["pde", "bc_u", "ic_u", "ic_ut"],
            (Plate, Mode::Forward) => vec!["pde", "bc_u", "bc_uxx", "bc_uyy", "ic_u", "ic_ut"],
            (Membrane | Plate, Mode::Inverse) => vec!["pde", "data"],
            (Laplace, Mode::Forward) => vec!["pde", "dirichlet", "neumann"],
            (Laplace, Mode::Inverse) => vec!["pde", "dirichlet", "neumann", "data"],
            _ => unreachable!(),
        }
    }

    /// Builds the graph, the loss terms and initial parameters. `seed` drives
    /// network initialization and measurement noise.
    pub fn assemble(&self, seed: u64) -> Result<Assembly, ProblemError> {
        self.validate()?;
        let mut g = Graph::new();
        let names = self.kind.inputs();
        let vars: Vec<Expr> = names.iter().map(|n| g.input(n)).collect();
        let net_in: Vec<Expr> = vars
            .iter()
            .zip(self.input_scales())
            .map(|(&v, s)| {
                if s == 1.0 {
                    v
                } else {
                    let k = g.constant(s);
                    g.mul(k, v)
                }
            })
            .collect();

        let (mut store, u) = match &self.model {
            Model::Polynomial { order } => {
                let store = ParamStore::zeros(polynomial_layout(*order));
                let u = build_polynomial(&mut g, *order, &store.layout, net_in[0])?;
                (store, u)
            }
            Model::Fourier { units } => {
                let store = initialize_fourier(*units, seed);
                let u = build_fourier(&mut g, *units, &store.layout, net_in[0])?;
                (store, u)
            }
            Model::Dense { hidden, activation } => {
                let spec = NetworkSpec::new(names, hidden, *activation);
                let store = initialize(&spec, seed, self.first_layer_scale);
                let u = build_dense(&mut g, &spec, &store.layout, &net_in)?[0];
                (store, u)
            }
        };

        let mut scalars = Vec::new();
        let mut trainable_physical = Vec::new();
        for p in &self.physical {
            let e = if p.trainable {
                let idx = store.add_physical(&p.name, p.init)?;
                trainable_physical.push(p.name.clone());
                g.param(idx)
            } else {
                g.constant(p.truth)
            };
            scalars.push((p.name.clone(), e));
        }
        let scalars = Scalars(scalars);
        let truth = self.truth();
        let oracle = |p: &[f64]| physics::oracle(self.kind, p, &truth);
        let pde = physics::governing_residual(self.kind, &mut g, u, &vars, &scalars)?;

        let mut terms = Vec::new();
        let mut data = None;
        let targets = |set: &CollocationSet| set.iter().map(oracle).collect::<Vec<f64>>();
        match (self.kind, self.mode) {
            (k, _) if k.is_regression() => {
                let kind = match k {
                    ProblemKind::LinearRegression => RegressionKind::Linear,
                    ProblemKind::QuadraticRegression => RegressionKind::Quadratic,
                    _ => RegressionKind::Fourier,
                };
                let ds = gen_regression_data(kind, self.data_count, self.noise_sigma, seed);
                terms.push(LossTerm::new("data", u, ds.points.clone()).with_targets(ds.values.clone()));
                data = Some(ds);
            }
            (ProblemKind::SpringMass, mode) => {
                let t_axis = self.axes[0];
                let grid = CollocationSet::new(1, t_axis.nodes(), Role::Interior);
                terms.push(LossTerm::new("ode", pde.expect("oscillator residual"), grid));
                match mode {
                    Mode::Forward => {
                        let t0 = CollocationSet::new(1, vec![t_axis.lo], Role::Initial);
                        let u_t = g.differentiate(u, vars[0])?;
                        terms.push(LossTerm::new("ic_u", u, t0.clone()));
                        terms.push(LossTerm::new("ic_ut", u_t, t0));
                    }
                    Mode::Inverse => {
                        let points = Axis::new(t_axis.lo, t_axis.hi, self.data_count).nodes();
                        let ds = noisy_samples(
                            CollocationSet::new(1, points, Role::Data),
                            oracle,
                            self.noise_sigma,
                            seed,
                        );
                        terms.push(LossTerm::new("data", u, ds.points.clone()).with_targets(ds.values.clone()));
                        data = Some(ds);
                    }
                }
            }
            (ProblemKind::Membrane | ProblemKind::Plate, Mode::Forward) => {
                let (x, y, t) = (&self.axes[0], &self.axes[1], &self.axes[2]);
                let sets = SpaceTimeSets::build(x, y, t)?;
                let u_t = g.differentiate(u, vars[2])?;
                terms.push(LossTerm::new("pde", pde.expect("field residual"), sets.interior));
                terms.push(LossTerm::new("bc_u", u, sets.boundary));
                if self.kind == ProblemKind::Plate {
                    let later = &t.nodes()[1..];
                    let xs = boundary_subset(x, y, Some(later), Edges::X_SIDES, Role::DirichletBoundary)?;
                    let ys = boundary_subset(x, y, Some(later), Edges::Y_SIDES, Role::DirichletBoundary)?;
                    let u_xx = g.differentiate_n(u, vars[0], 2)?;
                    let u_yy = g.differentiate_n(u, vars[1], 2)?;
                    terms.push(LossTerm::new("bc_uxx", u_xx, xs));
                    terms.push(LossTerm::new("bc_uyy", u_yy, ys));
                }
                let ic = targets(&sets.initial);
                terms.push(LossTerm::new("ic_u", u, sets.initial.clone()).with_targets(ic));
                terms.push(LossTerm::new("ic_ut", u_t, sets.initial));
            }
            (ProblemKind::Membrane | ProblemKind::Plate, Mode::Inverse) => {
                let grid = uniform_grid(&self.axes)?;
                let ds = noisy_samples(grid.clone(), oracle, self.noise_sigma, seed);
                terms.push(LossTerm::new("pde", pde.expect("field residual"), grid));
                terms.push(LossTerm::new("data", u, ds.points.clone()).with_targets(ds.values.clone()));
                data = Some(ds);
            }
            (ProblemKind::Laplace, mode) => {
                let (x, y) = (&self.axes[0], &self.axes[1]);
                let interior =
                    uniform_grid(&self.axes)?.filter(|p| p[0] != x.lo && p[0] != x.hi && p[1] != y.lo && p[1] != y.hi);
                let dirichlet = boundary_subset(x, y, None, Edges::X_SIDES, Role::DirichletBoundary)?;
                let neumann = boundary_subset(x, y, None, Edges::Y_SIDES, Role::NeumannBoundary)?;
                let kappa_true = truth.get("kappa");
                let flux = neumann_flux(&mut g, u, &vars, scalars.get("kappa"))?;
                let (neumann_points, flux_targets) = with_normal_coordinates(&neumann, |p, n| {
                    let gr = physics::laplace_gradient(p);
                    kappa_true * (n[0] * gr[0] + n[1] * gr[1])
                });
                let f_bar = targets(&dirichlet);
                terms.push(LossTerm::new("pde", pde.expect("Laplace residual"), interior.clone()));
                terms.push(LossTerm::new("dirichlet", u, dirichlet).with_targets(f_bar));
                terms.push(LossTerm::new("neumann", flux, neumann_points).with_targets(flux_targets));
                if mode == Mode::Inverse {
                    let ds = noisy_samples(interior, oracle, self.noise_sigma, seed);
                    terms.push(LossTerm::new("data", u, ds.points.clone()).with_targets(ds.values.clone()));
                    data = Some(ds);
                }
            }
            (k, m) => return Err(ProblemError::BadSetting(format!("{k} has no {m} mode"))),
        }

        for (name, w) in &self.term_weights {
            if let Some(term) = terms.iter_mut().find(|t| &t.name == name) {
                term.weight = *w;
            }
        }
        let loss = CompositeLoss::new(&g, terms, store.trainables().len())?;
        Ok(Assembly {
            graph: g,
            output: u,
            loss,
            store,
            trainable_physical,
            data,
        })
    }

    /// Named evaluation point sets. The first entry is the primary region.
    pub fn eval_regions(&self) -> Result<Vec<(String, CollocationSet)>, ProblemError> {
        let a = &self.axes;
        let grid = |axes: &[Axis]| uniform_grid(axes).map(|s| s.with_role(Role::Data));
        let regions = match self.kind {
            k if k.is_regression() => vec![("window".to_string(), grid(&[Axis::new(a[0].lo, a[0].hi, 201)])?)],
            ProblemKind::SpringMass => {
                let span = a[0].hi - a[0].lo;
                let beyond = Axis::new(a[0].hi, a[0].hi + span, 1001).nodes()[1..].to_vec();
                vec![
                    ("window".to_string(), grid(&[Axis::new(a[0].lo, a[0].hi, 1001)])?),
                    ("extrapolation".to_string(), CollocationSet::new(1, beyond, Role::Data)),
                ]
            }
            ProblemKind::Membrane | ProblemKind::Plate => {
                let t_slice = self.eval_time.unwrap_or(a[2].hi);
                let mut slice = CollocationSet::new(3, Vec::new(), Role::Data);
                for p in uniform_grid(&[Axis::new(a[0].lo, a[0].hi, 41), Axis::new(a[1].lo, a[1].hi, 41)])?.iter() {
                    slice.points.extend_from_slice(&[p[0], p[1], t_slice]);
                }
                let window = grid(&[
                    Axis::new(a[0].lo, a[0].hi, 21),
                    Axis::new(a[1].lo, a[1].hi, 21),
                    Axis::new(a[2].lo, a[2].hi, 11),
                ])?;
                let mut r = vec![("window".to_string(), window), ("slice".to_string(), slice)];
                if self.kind == ProblemKind::Membrane && self.mode == Mode::Forward {
                    r.swap(0, 1);
                }
                r
            }
            _ => vec![(
                "window".to_string(),
                grid(&[Axis::new(a[0].lo, a[0].hi, 41), Axis::new(a[1].lo, a[1].hi, 41)])?,
            )],
        };
        Ok(regions)
    }

    /// Compares the trained network with the closed-form solution on
    /// `points`.
    pub fn evaluate_error(
        &self,
        asm: &Assembly,
        params: &[f64],
        points: &CollocationSet,
    ) -> Result<(ErrorMetrics, Vec<ResultRow>), ProblemError> {
        let pred = predict(asm, params, points)?;
        let truth = self.truth();
        let exact: Vec<f64> = points.iter().map(|p| physics::oracle(self.kind, p, &truth)).collect();
        let metrics = error_metrics(&pred, &exact);
        let rows = points
            .iter()
            .zip(pred.iter().zip(&exact))
            .map(|(p, (&predicted, &exact))| ResultRow {
                coords: p.to_vec(),
                predicted,
                exact,
            })
            .collect();
        Ok((metrics, rows))
    }
}

/// Evaluates the network output at every point.
pub fn predict(asm: &Assembly, params: &[f64], points: &CollocationSet) -> Result<Vec<f64>, ProblemError> {
    let program = Program::compile(&asm.graph, asm.output);
    let mut ws = program.workspace();
    program.load_params(&mut ws, params)?;
    let dim = points.dim;
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.points.chunks(LANES * dim) {
        let v = program.forward(&mut ws, chunk, dim)?;
        out.extend_from_slice(&v[..chunk.len() / dim]);
    }
    Ok(out)
}

/// `kappa (nx f_x + ny f_y)` with the normal read from inputs `nx`, `ny`.
fn neumann_flux(g: &mut Graph, u: Expr, vars: &[Expr], kappa: Expr) -> Result<Expr, AdError> {
    let nx = g.input("nx");
    let ny = g.input("ny");
    let f_x = g.differentiate(u, vars[0])?;
    let f_y = g.differentiate(u, vars[1])?;
    let a = g.mul(nx, f_x);
    let b = g.mul(ny, f_y);
    let dn = g.add(a, b);
    Ok(g.mul(kappa, dn))
}

/// Appends each point's outward normal as two extra coordinates and
/// computes per-point targets from `(point, normal)`.
fn with_normal_coordinates(
    set: &CollocationSet,
    target: impl Fn(&[f64], [f64; 2]) -> f64,
) -> (CollocationSet, Vec<f64>) {
    let normals = set.normals.as_ref().expect("Neumann sets carry normals");
    let mut out = CollocationSet::new(set.dim + 2, Vec::with_capacity(set.points.len() * 2), set.role);
    let mut targets = Vec::with_capacity(set.len());
    for (p, n) in set.iter().zip(normals) {
        out.points.extend_from_slice(p);
        out.points.extend_from_slice(n);
        targets.push(target(p, *n));
    }
    (out, targets)
}

/// Frequencies uniform in `[0, 6)`, phases uniform in `[-pi, pi)` and
/// Glorot-uniform amplitudes.
pub fn initialize_fourier(units: usize, seed: u64) -> ParamStore {
    let layout = fourier_layout(units);
    let mut store = ParamStore::zeros(layout.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hidden, out) = (layout.layers()[0], layout.layers()[1]);
    let limit = (6.0 / (units + 1) as f64).sqrt();
    for o in 0..units {
        store.theta[hidden.weight(o, 0)] = rng.random_range(0.0..6.0);
        store.theta[hidden.bias(o)] = rng.random_range(-PI..PI);
        store.theta[out.weight(0, o)] = rng.random_range(-limit..limit);
    }
    store
}

/// A trained problem with its scores.
#[derive(Clone, Debug)]
pub struct Solution {
    pub assembly: Assembly,
    pub report: TrainReport,
    /// Final network parameters and physical scalars.
    pub store: ParamStore,
    pub regions: Vec<(String, ErrorMetrics, Vec<ResultRow>)>,
    pub summary: MetricsSummary,
}

/// Assembles, trains and scores `def`. `def.train.seed` seeds everything.
pub fn solve(def: &ProblemDef) -> Result<Solution, ProblemError> {
    let seed = def.train.seed;
    let mut asm = def.assemble(seed)?;
    let report = train(
        &mut asm.loss,
        &asm.store.trainables(),
        &asm.trainable_physical,
        &def.train,
    )?;
    let mut store = asm.store.clone();
    store.set_trainables(&report.trainables);

    let mut regions = Vec::new();
    for (name, points) in def.eval_regions()? {
        let (m, rows) = def.evaluate_error(&asm, &report.trainables, &points)?;
        regions.push((name, m, rows));
    }
    let mut physical: Vec<(String, f64)> = def
        .physical
        .iter()
        .map(|p| (p.name.clone(), store.physical_value(&p.name).unwrap_or(p.truth)))
        .collect();
    if def.kind == ProblemKind::Plate {
        physical.push(("amplitude".into(), def.ic_amplitude));
    }
    let coefficients = match def.model {
        Model::Polynomial { order } => {
            let mut c: Vec<(String, f64)> = (0..order).map(|k| (format!("W{}", k + 1), store.theta[k])).collect();
            c.push(("b".into(), store.theta[order]));
            c
        }
        _ => Vec::new(),
    };
    let summary = MetricsSummary {
        problem: def.kind.name().into(),
        mode: def.mode.name().into(),
        seed,
        status: report.status.as_str().into(),
        epochs_run: report.epochs_run,
        final_loss: report.final_loss().unwrap_or(f64::NAN),
        regions: regions.iter().map(|(n, m, _)| (n.clone(), *m)).collect(),
        physical,
        coefficients,
    };
    Ok(Solution {
        assembly: asm,
        report,
        store,
        regions,
        summary,
    })
}

#[cfg(test)]
mod tests;
