//! Run configuration files.
//!
//! The format is line-oriented `key=value` pairs grouped under `[problem]`,
//! `[network]`, `[training]` and `[output]` headers. Several pairs may share a
//! line, `#` starts a comment, and pairs before the first header are looked up
//! in every section. Anything not given falls back to the problem's defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use pinn_core::network::Activation;
use pinn_core::optimizer::LambdaMode;
use pinn_core::parallel::Parallelism;
use pinn_core::problems::{Mode, Model, ProblemDef, ProblemKind};
use pinn_core::sampling::Axis;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue { key: String, line: usize, reason: String },
    #[error("no `problem=` given")]
    MissingProblem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotFormat {
    /// PNG files drawn by the built-in rasterizer.
    Png,
    /// A Python/matplotlib script next to the CSV data.
    Script,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Run directory; derived from the output root when absent.
    pub dir: Option<PathBuf>,
    pub plots: bool,
    pub plot_format: PlotFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            plots: true,
            plot_format: PlotFormat::Png,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemDef,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Problem,
    Network,
    Training,
    Output,
}

const PROBLEM_KEYS: &[&str] = &[
    "problem",
    "mode",
    "grid",
    "bounds",
    "data_count",
    "noise_sigma",
    "ic_amplitude",
    "eval_time",
];
const NETWORK_KEYS: &[&str] = &["hidden", "activation", "first_layer_scale", "order", "units"];
const TRAINING_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "seed",
    "lambda",
    "alpha",
    "period",
    "stop_tolerance",
    "parallel",
];
const OUTPUT_KEYS: &[&str] = &["dir", "plots", "plot_format"];

fn section_of(key: &str) -> Option<Section> {
    if PROBLEM_KEYS.contains(&key) || key.starts_with("init.") {
        Some(Section::Problem)
    } else if NETWORK_KEYS.contains(&key) {
        Some(Section::Network)
    } else if TRAINING_KEYS.contains(&key) || key.starts_with("weight.") {
        Some(Section::Training)
    } else if OUTPUT_KEYS.contains(&key) {
        Some(Section::Output)
    } else {
        None
    }
}

struct Pair {
    key: String,
    value: String,
    line: usize,
}

impl Pair {
    fn bad(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: self.key.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse::<T>()
            .map_err(|e| self.bad(format!("`{}`: {e}", self.value)))
    }

    fn positive_f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse()?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(format!("must be a positive number, got {}", self.value)))
        }
    }

    fn non_negative_f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse()?;
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(format!("must be a non-negative number, got {}", self.value)))
        }
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(self.bad(format!("expected true or false, got `{v}`"))),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Pair>, ConfigError> {
    let mut pairs = Vec::new();
    let mut section: Option<Section> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = Some(match name.trim() {
                "problem" => Section::Problem,
                "network" => Section::Network,
                "training" => Section::Training,
                "output" => Section::Output,
                other => {
                    return Err(ConfigError::UnknownKey {
                        key: format!("[{other}]"),
                        line,
                    })
                }
            });
            continue;
        }
        for token in content.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| ConfigError::BadValue {
                key: token.to_string(),
                line,
                reason: "expected key=value".into(),
            })?;
            let home = section_of(key).ok_or_else(|| ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            })?;
            if section.is_some_and(|s| s != home) {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                });
            }
            pairs.push(Pair {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
    }
    Ok(pairs)
}

fn parse_list<T: std::str::FromStr>(p: &Pair, sep: char) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    p.value
        .split(sep)
        .map(|s| s.trim().parse::<T>().map_err(|e| p.bad(format!("`{s}`: {e}"))))
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let pairs = tokenize(text)?;
    let find = |key: &str| pairs.iter().rev().find(|p| p.key == key);
    let problem_pair = find("problem").ok_or(ConfigError::MissingProblem)?;
    let kind: ProblemKind = problem_pair.value.parse().map_err(|e: String| problem_pair.bad(e))?;
    let mode = match find("mode") {
        Some(p) => p.value.parse::<Mode>().map_err(|e| p.bad(e))?,
        None => Mode::Forward,
    };
    let mut def = ProblemDef::new(kind, mode).map_err(|e| {
        let p = find("mode").unwrap_or(problem_pair);
        p.bad(e.to_string())
    })?;
    let mut output = OutputConfig::default();
    let mut alpha = 0.1;
    let mut period = 100;
    let mut rebalance = matches!(def.train.lambda_mode, LambdaMode::Rebalance { .. });

    for p in &pairs {
        match p.key.as_str() {
            "problem" | "mode" => {}
            "grid" => {
                let counts: Vec<usize> = parse_list(p, 'x')?;
                if counts.len() != def.axes.len() || counts.iter().any(|&c| c < 2) {
                    return Err(p.bad(format!("need {} counts of at least 2", def.axes.len())));
                }
                for (a, c) in def.axes.iter_mut().zip(counts) {
                    a.count = c;
                }
            }
            "bounds" => {
                let ranges: Vec<&str> = p.value.split(',').collect();
                if ranges.len() != def.axes.len() {
                    return Err(p.bad(format!("need {} lo:hi ranges", def.axes.len())));
                }
                for (a, r) in def.axes.iter_mut().zip(ranges) {
                    let (lo, hi) = r.split_once(':').ok_or_else(|| p.bad(format!("`{r}` is not lo:hi")))?;
                    let lo: f64 = lo.parse().map_err(|e| p.bad(format!("`{lo}`: {e}")))?;
                    let hi: f64 = hi.parse().map_err(|e| p.bad(format!("`{hi}`: {e}")))?;
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(p.bad(format!("need finite lo < hi in `{r}`")));
                    }
                    *a = Axis::new(lo, hi, a.count);
                }
            }
            "data_count" => def.data_count = p.parse()?,
            "noise_sigma" => def.noise_sigma = p.non_negative_f64()?,
            "ic_amplitude" => def.ic_amplitude = p.positive_f64()?,
            "eval_time" => def.eval_time = Some(p.non_negative_f64()?),
            key if key.starts_with("init.") => {
                let name = &key["init.".len()..];
                let spec = def
                    .physical
                    .iter_mut()
                    .find(|s| s.name == name && s.trainable)
                    .ok_or_else(|| ConfigError::UnknownKey {
                        key: key.to_string(),
                        line: p.line,
                    })?;
                spec.init = p.parse()?;
                if !spec.init.is_finite() {
                    return Err(p.bad("must be finite"));
                }
            }
            "hidden" | "activation" => match &mut def.model {
                Model::Dense { hidden, activation } => {
                    if p.key == "hidden" {
                        let widths: Vec<usize> = parse_list(p, ',')?;
                        if widths.is_empty() || widths.contains(&0) {
                            return Err(p.bad("widths must be positive"));
                        }
                        *hidden = widths;
                    } else {
                        *activation = p.parse::<Activation>()?;
                    }
                }
                _ => return Err(p.bad(format!("{kind} does not use a dense network"))),
            },
            "first_layer_scale" => def.first_layer_scale = p.positive_f64()?,
            "order" => match &mut def.model {
                Model::Polynomial { order } => {
                    *order = p.parse()?;
                    if *order == 0 {
                        return Err(p.bad("order must be >= 1"));
                    }
                }
                _ => return Err(p.bad(format!("{kind} does not use a polynomial model"))),
            },
            "units" => match &mut def.model {
                Model::Fourier { units } => {
                    *units = p.parse()?;
                    if *units == 0 {
                        return Err(p.bad("units must be >= 1"));
                    }
                }
                _ => return Err(p.bad(format!("{kind} does not use a Fourier model"))),
            },
            "epochs" => {
                def.train.epochs = p.parse()?;
                if def.train.epochs == 0 {
                    return Err(p.bad("epochs must be >= 1"));
                }
            }
            "batch_size" => def.train.batch_size = p.parse()?,
            "lr" => def.train.adam.lr = p.positive_f64()?,
            "beta1" | "beta2" => {
                let v: f64 = p.parse()?;
                if !(0.0..1.0).contains(&v) {
                    return Err(p.bad("must lie in [0, 1)"));
                }
                if p.key == "beta1" {
                    def.train.adam.beta1 = v;
                } else {
                    def.train.adam.beta2 = v;
                }
            }
            "eps" => def.train.adam.eps = p.positive_f64()?,
            "seed" => def.train.seed = p.parse()?,
            key if key.starts_with("weight.") => {
                let name = key["weight.".len()..].to_string();
                let w = p.positive_f64()?;
                match def.term_weights.iter_mut().find(|(n, _)| *n == name) {
                    Some(slot) => slot.1 = w,
                    None => def.term_weights.push((name, w)),
                }
            }
            "lambda" => {
                rebalance = match p.value.as_str() {
                    "static" => false,
                    "rebalance" => true,
                    v => return Err(p.bad(format!("expected static or rebalance, got `{v}`"))),
                }
            }
            "alpha" => {
                alpha = p.parse()?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(p.bad("must lie in [0, 1]"));
                }
            }
            "period" => {
                period = p.parse()?;
                if period == 0 {
                    return Err(p.bad("must be >= 1"));
                }
            }
            "stop_tolerance" => {
                def.train.stop_tolerance = match p.value.as_str() {
                    "none" => None,
                    _ => Some(p.positive_f64()?),
                }
            }
            "parallel" => {
                def.train.parallelism = if p.bool()? {
                    Parallelism::Parallel
                } else {
                    Parallelism::Sequential
                }
            }
            "dir" => output.dir = Some(PathBuf::from(&p.value)),
            "plots" => output.plots = p.bool()?,
            "plot_format" => {
                output.plot_format = match p.value.as_str() {
                    "png" => PlotFormat::Png,
                    "script" => PlotFormat::Script,
                    v => return Err(p.bad(format!("expected png or script, got `{v}`"))),
                }
            }
            key => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line: p.line,
                })
            }
        }
    }
    def.train.lambda_mode = if rebalance {
        LambdaMode::Rebalance { alpha, period }
    } else {
        LambdaMode::Static
    };
    def.validate().map_err(|e| problem_pair.bad(e.to_string()))?;
    Ok(RunConfig { problem: def, output })
}

/// Writes every setting so that [`parse_config`] reproduces `config`.
pub fn serialize_config(config: &RunConfig) -> String {
    let def = &config.problem;
    let mut s = String::from("[problem]\n");
    let _ = writeln!(s, "problem={}", def.kind);
    let _ = writeln!(s, "mode={}", def.mode);
    let counts: Vec<String> = def.axes.iter().map(|a| a.count.to_string()).collect();
    let _ = writeln!(s, "grid={}", counts.join("x"));
    let bounds: Vec<String> = def.axes.iter().map(|a| format!("{:?}:{:?}", a.lo, a.hi)).collect();
    let _ = writeln!(s, "bounds={}", bounds.join(","));
    let _ = writeln!(s, "data_count={}", def.data_count);
    let _ = writeln!(s, "noise_sigma={:?}", def.noise_sigma);
    let _ = writeln!(s, "ic_amplitude={:?}", def.ic_amplitude);
    if let Some(t) = def.eval_time {
        let _ = writeln!(s, "eval_time={t:?}");
    }
    for p in def.physical.iter().filter(|p| p.trainable) {
        let _ = writeln!(s, "init.{}={:?}", p.name, p.init);
    }

    s.push_str("\n[network]\n");
    match &def.model {
        Model::Polynomial { order } => {
            let _ = writeln!(s, "order={order}");
        }
        Model::Fourier { units } => {
            let _ = writeln!(s, "units={units}");
        }
        Model::Dense { hidden, activation } => {
            let widths: Vec<String> = hidden.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "hidden={}", widths.join(","));
            let _ = writeln!(s, "activation={activation}");
        }
    }
    let _ = writeln!(s, "first_layer_scale={:?}", def.first_layer_scale);

    let t = &def.train;
    s.push_str("\n[training]\n");
    let _ = writeln!(s, "epochs={}", t.epochs);
    let _ = writeln!(s, "batch_size={}", t.batch_size);
    let _ = writeln!(s, "lr={:?}", t.adam.lr);
    let _ = writeln!(s, "beta1={:?}", t.adam.beta1);
    let _ = writeln!(s, "beta2={:?}", t.adam.beta2);
    let _ = writeln!(s, "eps={:?}", t.adam.eps);
    let _ = writeln!(s, "seed={}", t.seed);
    for (name, w) in &def.term_weights {
        let _ = writeln!(s, "weight.{name}={w:?}");
    }
    match t.lambda_mode {
        LambdaMode::Static => s.push_str("lambda=static\n"),
        LambdaMode::Rebalance { alpha, period } => {
            let _ = writeln!(s, "lambda=rebalance alpha={alpha:?} period={period}");
        }
    }
    match t.stop_tolerance {
        Some(v) => {
            let _ = writeln!(s, "stop_tolerance={v:?}");
        }
        None => s.push_str("stop_tolerance=none\n"),
    }
    let _ = writeln!(s, "parallel={}", t.parallelism == Parallelism::Parallel);

    let o = &config.output;
    s.push_str("\n[output]\n");
    if let Some(dir) = &o.dir {
        let _ = writeln!(s, "dir={}", dir.display());
    }
    let _ = writeln!(s, "plots={}", o.plots);
    let format = match o.plot_format {
        PlotFormat::Png => "png",
        PlotFormat::Script => "script",
    };
    let _ = writeln!(s, "plot_format={format}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_membrane_gets_defaults() {
        let c = parse_config("problem=membrane mode=forward").unwrap();
        assert_eq!(
            c.problem,
            ProblemDef::new(ProblemKind::Membrane, Mode::Forward).unwrap()
        );
        assert_eq!(c.problem.train.epochs, 20000);
        assert_eq!(
            c.problem.model,
            Model::Dense {
                hidden: vec![20; 4],
                activation: Activation::Sin
            }
        );
        let counts: Vec<usize> = c.problem.axes.iter().map(|a| a.count).collect();
        assert_eq!(counts, [40, 40, 20]);
    }

    #[test]
    fn negative_epochs_name_the_line() {
        let text = "[problem]\nproblem=plate\n[training]\nepochs=-5\n";
        match parse_config(text) {
            Err(ConfigError::BadValue { key, line, .. }) => {
                assert_eq!(key, "epochs");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_has_no_problem() {
        assert_eq!(parse_config(""), Err(ConfigError::MissingProblem));
        assert_eq!(parse_config("# nothing\n\n"), Err(ConfigError::MissingProblem));
    }

    #[test]
    fn unknown_and_misplaced_keys() {
        assert!(matches!(
            parse_config("problem=plate\nwidth=3"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("[network]\nproblem=plate"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("problem=plate\n[plots]"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("problem=membrane mode=forward init.c=3"),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn overrides_apply() {
        let text = "problem=spring-mass mode=inverse\n[network]\nhidden=8,8 activation=tanh\n\
                    [training]\nepochs=10 lr=0.01 seed=9 lambda=rebalance period=5\n[problem]\ninit.omega=5.5";
        let c = parse_config(text).unwrap();
        let d = &c.problem;
        assert_eq!(d.train.epochs, 10);
        assert_eq!(d.train.seed, 9);
        assert_eq!(d.train.lambda_mode, LambdaMode::Rebalance { alpha: 0.1, period: 5 });
        assert_eq!(d.physical[0].init, 5.5);
        assert_eq!(
            d.model,
            Model::Dense {
                hidden: vec![8, 8],
                activation: Activation::Tanh
            }
        );
    }

    #[test]
    fn term_weights_override_and_reject_unknown_terms() {
        let c = parse_config("problem=plate mode=forward\n[training]\nweight.ic_u=5 weight.pde=2").unwrap();
        let w = &c.problem.term_weights;
        assert!(w.contains(&("ic_u".to_string(), 5.0)) && w.contains(&("pde".to_string(), 2.0)));
        assert!(w.contains(&("bc_u".to_string(), 300.0)));
        assert!(matches!(
            parse_config("problem=plate mode=forward\nweight.data=5"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            parse_config("problem=laplace\nweight.pde=-1"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn round_trip_every_problem() {
        for kind in ProblemKind::ALL {
            for mode in [Mode::Forward, Mode::Inverse] {
                let Ok(problem) = ProblemDef::new(kind, mode) else {
                    continue;
                };
                let c = RunConfig {
                    problem,
                    output: OutputConfig {
                        dir: Some("out/run".into()),
                        plots: false,
                        plot_format: PlotFormat::Script,
                    },
                };
                let text = serialize_config(&c);
                assert_eq!(parse_config(&text).unwrap(), c, "{text}");
            }
        }
    }
}
