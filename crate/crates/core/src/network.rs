//! Network builders: dense feed-forward nets, polynomial regression models
//! and single-layer Fourier networks, all emitted as expression graphs over
//! parameter variables.
//!
//! Parameter variable `i` of a built graph refers to `theta[i]` of the
//! [`ParamStore`]; trainable physical scalars follow at indices `D..D+k`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{Expr, Graph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("parameter layout does not match the network: {0}")]
    LayoutMismatch(String),
    #[error("malformed parameter file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate physical parameter `{0}`")]
    DuplicatePhysical(String),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sin,
    Linear,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, z: Expr) -> Expr {
        match self {
            Activation::Tanh => g.tanh(z),
            Activation::Sin => g.sin(z),
            Activation::Linear => z,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sin" => Ok(Activation::Sin),
            "linear" => Ok(Activation::Linear),
            other => Err(NetworkError::UnknownActivation(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub inputs: Vec<String>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub outputs: usize,
}

impl NetworkSpec {
    pub fn new(inputs: &[&str], hidden: &[usize], activation: Activation) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            hidden: hidden.to_vec(),
            activation,
            outputs: 1,
        }
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.inputs.len()];
        widths.extend(&self.hidden);
        widths.push(self.outputs);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| (i + 1) * o).sum()
    }
}

/// Location of one affine layer inside `theta`: a row-major
/// `fan_out x fan_in` weight block followed by `fan_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerLayout {
    pub fn weight(&self, out: usize, input: usize) -> usize {
        self.offset + out * self.fan_in + input
    }

    pub fn bias(&self, out: usize) -> usize {
        self.offset + self.fan_in * self.fan_out + out
    }

    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.fan_out == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Layout {
    layers: Vec<LayerLayout>,
}

impl Layout {
    pub fn from_dims(dims: &[(usize, usize)]) -> Self {
        let mut offset = 0;
        let layers = dims
            .iter()
            .map(|&(fan_in, fan_out)| {
                let l = LayerLayout {
                    fan_in,
                    fan_out,
                    offset,
                };
                offset += l.len();
                l
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerLayout] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.fan_in, l.fan_out)).collect()
    }

    /// Total parameter count `D`.
    pub fn len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.offset + l.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn expect_dims(&self, dims: &[(usize, usize)]) -> Result<(), NetworkError> {
        if self.dims() == dims {
            Ok(())
        } else {
            Err(NetworkError::LayoutMismatch(format!(
                "expected layers {dims:?}, found {:?}",
                self.dims()
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParam {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    pub theta: Vec<f64>,
    pub layout: Layout,
    pub physical: Vec<PhysicalParam>,
}

impl ParamStore {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            theta: vec![0.0; layout.len()],
            layout,
            physical: Vec::new(),
        }
    }

    /// Registers a trainable physical scalar and returns its parameter index.
    pub fn add_physical(&mut self, name: &str, value: f64) -> Result<usize, NetworkError> {
        if self.physical.iter().any(|p| p.name == name) {
            return Err(NetworkError::DuplicatePhysical(name.to_string()));
        }
        self.physical.push(PhysicalParam {
            name: name.to_string(),
            value,
        });
        Ok(self.theta.len() + self.physical.len() - 1)
    }

    pub fn physical_index(&self, name: &str) -> Option<usize> {
        self.physical
            .iter()
            .position(|p| p.name == name)
            .map(|k| self.theta.len() + k)
    }

    pub fn physical_value(&self, name: &str) -> Option<f64> {
        self.physical.iter().find(|p| p.name == name).map(|p| p.value)
    }

    /// `theta` followed by the physical values, in parameter-index order.
    pub fn trainables(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.extend(self.physical.iter().map(|p| p.value));
        v
    }

    pub fn set_trainables(&mut self, values: &[f64]) {
        let d = self.theta.len();
        assert_eq!(values.len(), d + self.physical.len());
        self.theta.copy_from_slice(&values[..d]);
        for (p, &v) in self.physical.iter_mut().zip(&values[d..]) {
            p.value = v;
        }
    }

    /// Text form: a `layout` header (`fan_inxfan_out` per layer), a
    /// `physical` header listing physical names, then one value per line
    /// (theta first, then physical values).
    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.layout.dims().iter().map(|(i, o)| format!("{i}x{o}")).collect();
        let names: Vec<&str> = self.physical.iter().map(|p| p.name.as_str()).collect();
        let mut out = format!("layout {}\nphysical {}\n", dims.join(" "), names.join(" "));
        for v in self.trainables() {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NetworkError> {
        let bad = |line: usize, reason: &str| NetworkError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        let layout_line = lines.next().ok_or_else(|| bad(1, "missing layout header"))?;
        let dims = layout_line
            .strip_prefix("layout")
            .ok_or_else(|| bad(1, "expected `layout`"))?
            .split_whitespace()
            .map(|tok| {
                let (i, o) = tok.split_once('x').ok_or_else(|| bad(1, "layer must be NxM"))?;
                let i = i.parse().map_err(|_| bad(1, "bad fan-in"))?;
                let o = o.parse().map_err(|_| bad(1, "bad fan-out"))?;
                Ok((i, o))
            })
            .collect::<Result<Vec<(usize, usize)>, NetworkError>>()?;
        let phys_line = lines.next().ok_or_else(|| bad(2, "missing physical header"))?;
        let names: Vec<&str> = phys_line
            .strip_prefix("physical")
            .ok_or_else(|| bad(2, "expected `physical`"))?
            .split_whitespace()
            .collect();
        let values = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| l.trim().parse::<f64>().map_err(|_| bad(k + 3, "not a number")))
            .collect::<Result<Vec<f64>, NetworkError>>()?;
        let layout = Layout::from_dims(&dims);
        if values.len() != layout.len() + names.len() {
            return Err(NetworkError::LayoutMismatch(format!(
                "header implies {} values, file has {}",
                layout.len() + names.len(),
                values.len()
            )));
        }
        let mut store = ParamStore::zeros(layout);
        for name in names {
            store.add_physical(name, 0.0)?;
        }
        store.set_trainables(&values);
        Ok(store)
    }
}

/// Glorot-uniform weights, zero biases. For sin activations the first-layer
/// weights are multiplied by `first_layer_scale`.
pub fn initialize(spec: &NetworkSpec, seed: u64, first_layer_scale: f64) -> ParamStore {
    let layout = Layout::from_dims(&spec.layer_dims());
    let mut store = ParamStore::zeros(layout.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, layer) in layout.layers().iter().enumerate() {
        let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        let scale = if k == 0 && spec.activation == Activation::Sin {
            first_layer_scale
        } else {
            1.0
        };
        for o in 0..layer.fan_out {
            for i in 0..layer.fan_in {
                store.theta[layer.weight(o, i)] = scale * rng.random_range(-limit..limit);
            }
        }
    }
    store
}

fn affine(g: &mut Graph, layer: &LayerLayout, inputs: &[Expr]) -> Vec<Expr> {
    (0..layer.fan_out)
        .map(|o| {
            let mut terms: Vec<Expr> = inputs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let w = g.param(layer.weight(o, i));
                    g.mul(w, x)
                })
                .collect();
            terms.push(g.param(layer.bias(o)));
            g.sum(&terms)
        })
        .collect()
}

/// Dense network: hidden affine layers followed by the activation, then an
/// affine output layer with no activation. `inputs` are the graph nodes fed
/// to the first layer, in `spec.inputs` order.
pub fn build_dense(
    g: &mut Graph,
    spec: &NetworkSpec,
    layout: &Layout,
    inputs: &[Expr],
) -> Result<Vec<Expr>, NetworkError> {
    layout.expect_dims(&spec.layer_dims())?;
    if inputs.len() != spec.inputs.len() {
        return Err(NetworkError::LayoutMismatch(format!(
            "network has {} inputs, {} supplied",
            spec.inputs.len(),
            inputs.len()
        )));
    }
    let layers = layout.layers();
    let mut h = inputs.to_vec();
    for layer in &layers[..layers.len() - 1] {
        h = affine(g, layer, &h)
            .into_iter()
            .map(|z| spec.activation.apply(g, z))
            .collect();
    }
    Ok(affine(g, &layers[layers.len() - 1], &h))
}

pub fn polynomial_layout(order: usize) -> Layout {
    Layout::from_dims(&[(order, 1)])
}

/// `b + sum_k W_k x^k` for `k = 1..=order`.
pub fn build_polynomial(g: &mut Graph, order: usize, layout: &Layout, x: Expr) -> Result<Expr, NetworkError> {
    if order == 0 {
        return Err(NetworkError::LayoutMismatch("polynomial order must be >= 1".into()));
    }
    layout.expect_dims(&[(order, 1)])?;
    let features: Vec<Expr> = (1..=order as i32).map(|k| g.powi(x, k)).collect();
    Ok(affine(g, &layout.layers()[0], &features)[0])
}

pub fn fourier_layout(units: usize) -> Layout {
    Layout::from_dims(&[(1, units), (units, 1)])
}

/// `sum_i W2_i sin(W1_i t + b1_i) + b2` with a single scalar output bias.
pub fn build_fourier(g: &mut Graph, units: usize, layout: &Layout, t: Expr) -> Result<Expr, NetworkError> {
    if units == 0 {
        return Err(NetworkError::LayoutMismatch("Fourier network needs >= 1 unit".into()));
    }
    layout.expect_dims(&[(1, units), (units, 1)])?;
    let hidden: Vec<Expr> = affine(g, &layout.layers()[0], &[t])
        .into_iter()
        .map(|z| g.sin(z))
        .collect();
    Ok(affine(g, &layout.layers()[1], &hidden)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::EvalContext;
    use std::f64::consts::PI;

    // Straight-line matrix arithmetic, independent of the graph machinery.
    fn reference_forward(spec: &NetworkSpec, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let layers = store.layout.layers();
        let mut h = x.to_vec();
        for (k, l) in layers.iter().enumerate() {
            let mut z = vec![0.0; l.fan_out];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = store.theta[l.bias(o)];
                for (i, hi) in h.iter().enumerate() {
                    *zo += store.theta[l.weight(o, i)] * hi;
                }
            }
            if k + 1 < layers.len() {
                for v in &mut z {
                    *v = match spec.activation {
                        Activation::Tanh => v.tanh(),
                        Activation::Sin => v.sin(),
                        Activation::Linear => *v,
                    };
                }
            }
            h = z;
        }
        h
    }

    #[test]
    fn linear_model_has_two_parameters() {
        let spec = NetworkSpec::new(&["x"], &[], Activation::Tanh);
        assert_eq!(spec.param_count(), 2);
        let mut g = Graph::new();
        let x = g.input("x");
        let layout = Layout::from_dims(&spec.layer_dims());
        let y = build_dense(&mut g, &spec, &layout, &[x]).unwrap()[0];
        let v = g.evaluate(y, &EvalContext::new(&[3.0], &[2.0, 1.0])).unwrap();
        assert_eq!(v, 7.0);
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        for d in [1, 5, 20] {
            let spec = NetworkSpec::new(&["x"], &[d], Activation::Tanh);
            assert_eq!(spec.param_count(), (1 + 1) * d + (d + 1));
        }
        let spec = NetworkSpec::new(&["t"], &[20, 20, 20, 20], Activation::Sin);
        let store = initialize(&spec, 1, 1.0);
        assert_eq!(store.theta.len(), 2 * 20 + 3 * (20 * 20 + 20) + 20 + 1);
        let spec = NetworkSpec::new(&["x", "y", "t"], &[40, 40, 40, 40], Activation::Sin);
        assert_eq!(spec.param_count(), 4 * 40 + 3 * 41 * 40 + 41);
    }

    #[test]
    fn layout_tiles_theta() {
        let layout = Layout::from_dims(&[(3, 4), (4, 5), (5, 1)]);
        let mut covered = vec![0u8; layout.len()];
        for l in layout.layers() {
            for o in 0..l.fan_out {
                covered[l.bias(o)] += 1;
                for i in 0..l.fan_in {
                    covered[l.weight(o, i)] += 1;
                }
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let spec = NetworkSpec::new(&["x", "y"], &[6, 6], Activation::Tanh);
        let mut g = Graph::new();
        let ins = [g.input("x"), g.input("y")];
        let layout = Layout::from_dims(&spec.layer_dims());
        let y = build_dense(&mut g, &spec, &layout, &ins).unwrap()[0];
        let theta = vec![0.0; layout.len()];
        assert_eq!(g.evaluate(y, &EvalContext::new(&[0.3, -2.0], &theta)).unwrap(), 0.0);
    }

    #[test]
    fn dense_graph_matches_straight_line_reference() {
        for act in [Activation::Tanh, Activation::Sin, Activation::Linear] {
            let spec = NetworkSpec::new(&["x", "y", "t"], &[7, 5], act);
            let store = initialize(&spec, 99, 2.0);
            let mut g = Graph::new();
            let ins = [g.input("x"), g.input("y"), g.input("t")];
            let y = build_dense(&mut g, &spec, &store.layout, &ins).unwrap()[0];
            for p in [[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0], [0.0, 0.0, 0.0]] {
                let got = g.evaluate(y, &EvalContext::new(&p, &store.theta)).unwrap();
                let want = reference_forward(&spec, &store, &p)[0];
                assert!((got - want).abs() <= 1e-12, "{act}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let spec = NetworkSpec::new(&["x"], &[4], Activation::Tanh);
        let mut g = Graph::new();
        let x = g.input("x");
        let wrong = Layout::from_dims(&[(1, 3), (3, 1)]);
        assert!(matches!(
            build_dense(&mut g, &spec, &wrong, &[x]),
            Err(NetworkError::LayoutMismatch(_))
        ));
        assert!(build_polynomial(&mut g, 2, &polynomial_layout(3), x).is_err());
        assert!(build_fourier(&mut g, 2, &fourier_layout(3), x).is_err());
    }

    #[test]
    fn polynomial_examples() {
        let mut g = Graph::new();
        let x = g.input("x");
        let layout = polynomial_layout(2);
        let y = build_polynomial(&mut g, 2, &layout, x).unwrap();
        // theta = [W1, W2, b]
        let v = g.evaluate(y, &EvalContext::new(&[2.0], &[-1.0, 2.0, 1.0])).unwrap();
        assert_eq!(v, 7.0);
        let layout = polynomial_layout(3);
        let y = build_polynomial(&mut g, 3, &layout, x).unwrap();
        assert_eq!(g.evaluate(y, &EvalContext::new(&[1.7], &[0.0; 4])).unwrap(), 0.0);
    }

    #[test]
    fn fourier_examples() {
        let mut g = Graph::new();
        let t = g.input("t");
        let layout = fourier_layout(1);
        let y = build_fourier(&mut g, 1, &layout, t).unwrap();
        // [W1, b1, W2, b2]
        let v = g.evaluate(y, &EvalContext::new(&[0.5], &[PI, 0.0, 1.0, 0.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(g.evaluate(y, &EvalContext::new(&[0.5], &[0.0; 4])).unwrap(), 0.0);

        let layout = fourier_layout(2);
        let y = build_fourier(&mut g, 2, &layout, t).unwrap();
        let w = 4.0 * PI / 3.0;
        let l = layout.layers();
        let mut theta = vec![0.0; layout.len()];
        theta[l[0].weight(0, 0)] = PI;
        theta[l[0].weight(1, 0)] = w;
        theta[l[1].weight(0, 0)] = 1.0;
        theta[l[1].weight(0, 1)] = -1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let tv: f64 = rng.random_range(0.0..6.0);
            let got = g.evaluate(y, &EvalContext::new(&[tv], &theta)).unwrap();
            let want = (PI * tv).sin() - (w * tv).sin();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn initialization_is_deterministic_with_zero_biases() {
        let spec = NetworkSpec::new(&["t"], &[20, 20], Activation::Sin);
        let a = initialize(&spec, 7, 1.0);
        let b = initialize(&spec, 7, 1.0);
        assert_eq!(a, b);
        assert_ne!(a.theta, initialize(&spec, 8, 1.0).theta);
        for l in a.layout.layers() {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for o in 0..l.fan_out {
                assert_eq!(a.theta[l.bias(o)], 0.0);
                for i in 0..l.fan_in {
                    assert!(a.theta[l.weight(o, i)].abs() <= limit);
                }
            }
        }
        let scaled = initialize(&spec, 7, 3.0);
        let l0 = a.layout.layers()[0];
        assert_eq!(scaled.theta[l0.weight(4, 0)], 3.0 * a.theta[l0.weight(4, 0)]);
    }

    #[test]
    fn text_round_trip() {
        let spec = NetworkSpec::new(&["x", "t"], &[3], Activation::Tanh);
        let mut store = initialize(&spec, 3, 1.0);
        store.add_physical("c", 2.0).unwrap();
        let back = ParamStore::from_text(&store.to_text()).unwrap();
        assert_eq!(back, store);
        assert!(matches!(
            ParamStore::from_text("layout 1x1\nphysical\n1.0\n"),
            Err(NetworkError::LayoutMismatch(_))
        ));
        assert!(matches!(
            store.add_physical("c", 1.0),
            Err(NetworkError::DuplicatePhysical(_))
        ));
    }
}
