//! Named experiment presets.

use pinn_core::network::Activation;
use pinn_core::problems::{Mode, Model, ProblemDef, ProblemKind};

use crate::config::{OutputConfig, RunConfig};

pub const PRESET_NAMES: [&str; 10] = [
    "linear-regression",
    "quadratic-regression",
    "fourier-smoothing",
    "spring-forward",
    "spring-inverse",
    "membrane-forward",
    "membrane-inverse",
    "plate-forward",
    "plate-inverse",
    "laplace-demo",
];

/// One or more runs, each in its own subdirectory, plus an optional pair of
/// run indices to compare afterwards.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub runs: Vec<(String, RunConfig)>,
    pub compare: Option<(usize, usize)>,
}

fn run(kind: ProblemKind, mode: Mode) -> RunConfig {
    RunConfig {
        problem: ProblemDef::new(kind, mode).expect("preset modes exist"),
        output: OutputConfig::default(),
    }
}

fn with_activation(mut c: RunConfig, act: Activation) -> RunConfig {
    if let Model::Dense { activation, .. } = &mut c.problem.model {
        *activation = act;
    }
    c
}

pub fn preset(name: &str) -> Option<Preset> {
    let name = PRESET_NAMES.into_iter().find(|&n| n == name)?;
    let single = |c: RunConfig| vec![(String::new(), c)];
    let (runs, compare) = match name {
        "linear-regression" => (single(run(ProblemKind::LinearRegression, Mode::Forward)), None),
        "quadratic-regression" => (single(run(ProblemKind::QuadraticRegression, Mode::Forward)), None),
        "fourier-smoothing" => (single(run(ProblemKind::FourierSmoothing, Mode::Forward)), None),
        "spring-forward" => {
            let base = run(ProblemKind::SpringMass, Mode::Forward);
            (
                vec![
                    ("tanh".to_string(), with_activation(base.clone(), Activation::Tanh)),
                    ("sin".to_string(), with_activation(base, Activation::Sin)),
                ],
                Some((0, 1)),
            )
        }
        "spring-inverse" => (single(run(ProblemKind::SpringMass, Mode::Inverse)), None),
        "membrane-forward" => (single(run(ProblemKind::Membrane, Mode::Forward)), None),
        "membrane-inverse" => (single(run(ProblemKind::Membrane, Mode::Inverse)), None),
        "plate-forward" => (single(run(ProblemKind::Plate, Mode::Forward)), None),
        "plate-inverse" => (single(run(ProblemKind::Plate, Mode::Inverse)), None),
        _ => (
            vec![
                ("forward".to_string(), run(ProblemKind::Laplace, Mode::Forward)),
                ("inverse".to_string(), run(ProblemKind::Laplace, Mode::Inverse)),
            ],
            None,
        ),
    };
    Some(Preset { name, runs, compare })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(!p.runs.is_empty());
            for (_, c) in &p.runs {
                c.problem.validate().unwrap();
            }
        }
        assert!(preset("rigid-block").is_none());
    }

    #[test]
    fn spring_forward_compares_tanh_with_sin() {
        let p = preset("spring-forward").unwrap();
        assert_eq!(p.compare, Some((0, 1)));
        let acts: Vec<Activation> = p
            .runs
            .iter()
            .map(|(_, c)| match &c.problem.model {
                Model::Dense { activation, .. } => *activation,
                m => panic!("{m:?}"),
            })
            .collect();
        assert_eq!(acts, [Activation::Tanh, Activation::Sin]);
    }
}
