//! Scalar computation graphs with symbolic input differentiation.
//!
//! A [`Graph`] is an append-only arena of hash-consed nodes. Every node's
//! operands have a smaller index than the node itself, so the arena order is
//! always a valid topological order. Input derivatives are produced by
//! [`Graph::differentiate`], which writes a new derivative graph into the same
//! arena and can be applied repeatedly for higher and mixed orders. Gradients
//! with respect to parameter variables are computed by a reverse sweep over the
//! (possibly differentiated) graph.
//!
//! The reference evaluators in this module walk the graph directly. Training
//! uses [`Program`], a compiled form of the same graph that evaluates several
//! collocation points at once.

mod program;

pub use program::{Program, Workspace, LANES};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("non-finite value encountered during evaluation")]
    NonFiniteResult,
    #[error("no derivative rule registered for operation `{0}`")]
    UnsupportedOp(&'static str),
    #[error("expression {0:?} is not an input variable")]
    NotAnInput(Expr),
}

pub type Result<T, E = AdError> = std::result::Result<T, E>;

/// Handle to a node inside a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(u32);

impl Expr {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tanh,
    Exp,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Exp => "exp",
        }
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Neg => -a,
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Tanh => a.tanh(),
            UnaryOp::Exp => a.exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Node {
    Constant(f64),
    Input(u32),
    Param(u32),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    PowInt(Expr, i32),
}

// Constants compare by bit pattern so that hash-consing never merges values
// that evaluate differently (e.g. 0.0 and -0.0).
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use Node::*;
        match (self, other) {
            (Constant(a), Constant(b)) => a.to_bits() == b.to_bits(),
            (Input(a), Input(b)) | (Param(a), Param(b)) => a == b,
            (Unary(o1, a1), Unary(o2, a2)) => o1 == o2 && a1 == a2,
            (Binary(o1, a1, b1), Binary(o2, a2, b2)) => o1 == o2 && a1 == a2 && b1 == b2,
            (PowInt(a1, n1), PowInt(a2, n2)) => a1 == a2 && n1 == n2,
            _ => false,
        }
    }
}

impl Eq for Node {}

impl Hash for Node {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Node::Constant(v) => v.to_bits().hash(state),
            Node::Input(i) | Node::Param(i) => i.hash(state),
            Node::Unary(op, a) => {
                op.hash(state);
                a.hash(state);
            }
            Node::Binary(op, a, b) => {
                op.hash(state);
                a.hash(state);
                b.hash(state);
            }
            Node::PowInt(a, n) => {
                a.hash(state);
                n.hash(state);
            }
        }
    }
}

impl Node {
    fn operands(&self) -> (Option<Expr>, Option<Expr>) {
        match *self {
            Node::Constant(_) | Node::Input(_) | Node::Param(_) => (None, None),
            Node::Unary(_, a) | Node::PowInt(a, _) => (Some(a), None),
            Node::Binary(_, a, b) => (Some(a), Some(b)),
        }
    }
}

/// Values bound to the variables of a graph for one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub inputs: &'a [f64],
    pub params: &'a [f64],
}

impl<'a> EvalContext<'a> {
    pub fn new(inputs: &'a [f64], params: &'a [f64]) -> Self {
        Self { inputs, params }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    interned: HashMap<Node, Expr>,
    input_names: Vec<String>,
    derivatives: HashMap<(Expr, u32), Expr>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, e: Expr) -> Node {
        self.nodes[e.index()]
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Declares (or looks up) the input variable `name`. Inputs are numbered
    /// in declaration order; that number is the position of the input's value
    /// in [`EvalContext::inputs`].
    pub fn input(&mut self, name: &str) -> Expr {
        let slot = match self.input_names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.input_names.push(name.to_string());
                self.input_names.len() - 1
            }
        };
        self.intern(Node::Input(slot as u32))
    }

    pub fn param(&mut self, index: usize) -> Expr {
        self.intern(Node::Param(index as u32))
    }

    pub fn constant(&mut self, value: f64) -> Expr {
        self.intern(Node::Constant(value))
    }

    /// Returns the existing node equal to `node`, if any.
    pub fn lookup(&self, node: &Node) -> Option<Expr> {
        self.interned.get(node).copied()
    }

    fn intern(&mut self, node: Node) -> Expr {
        if let Some(&e) = self.interned.get(&node) {
            return e;
        }
        let e = Expr(u32::try_from(self.nodes.len()).expect("graph exceeds u32 node ids"));
        self.nodes.push(node);
        self.interned.insert(node, e);
        e
    }

    fn as_const(&self, e: Expr) -> Option<f64> {
        match self.nodes[e.index()] {
            Node::Constant(v) => Some(v),
            _ => None,
        }
    }

    fn is_const(&self, e: Expr, v: f64) -> bool {
        self.as_const(e) == Some(v)
    }

    pub fn add(&mut self, a: Expr, b: Expr) -> Expr {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => return self.constant(x + y),
            (Some(0.0), _) => return b,
            (_, Some(0.0)) => return a,
            _ => {}
        }
        if a == b {
            let two = self.constant(2.0);
            return self.mul(two, a);
        }
        let (a, b) = self.commutative_order(a, b);
        self.intern(Node::Binary(BinaryOp::Add, a, b))
    }

    pub fn sub(&mut self, a: Expr, b: Expr) -> Expr {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => return self.constant(x - y),
            (Some(0.0), _) => return self.neg(b),
            (_, Some(0.0)) => return a,
            _ => {}
        }
        if a == b {
            return self.constant(0.0);
        }
        self.intern(Node::Binary(BinaryOp::Sub, a, b))
    }

    pub fn mul(&mut self, a: Expr, b: Expr) -> Expr {
        let (a, b) = self.commutative_order(a, b);
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => return self.constant(x * y),
            (Some(0.0), _) => return a,
            (Some(1.0), _) => return b,
            (Some(-1.0), _) => return self.neg(b),
            _ => {}
        }
        // Fold nested constant factors: c1 * (c2 * x) -> (c1 * c2) * x.
        if let Some(c1) = self.as_const(a) {
            if let Node::Binary(BinaryOp::Mul, inner_a, inner_b) = self.nodes[b.index()] {
                if let Some(c2) = self.as_const(inner_a) {
                    let c = self.constant(c1 * c2);
                    return self.mul(c, inner_b);
                }
            }
        }
        self.intern(Node::Binary(BinaryOp::Mul, a, b))
    }

    pub fn div(&mut self, a: Expr, b: Expr) -> Expr {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => return self.constant(x / y),
            (Some(0.0), _) => return a,
            (_, Some(1.0)) => return a,
            _ => {}
        }
        self.intern(Node::Binary(BinaryOp::Div, a, b))
    }

    pub fn neg(&mut self, a: Expr) -> Expr {
        match self.nodes[a.index()] {
            Node::Constant(v) => self.constant(-v),
            Node::Unary(UnaryOp::Neg, inner) => inner,
            _ => self.intern(Node::Unary(UnaryOp::Neg, a)),
        }
    }

    pub fn powi(&mut self, a: Expr, n: i32) -> Expr {
        match n {
            0 => return self.constant(1.0),
            1 => return a,
            _ => {}
        }
        if let Some(v) = self.as_const(a) {
            return self.constant(v.powi(n));
        }
        self.intern(Node::PowInt(a, n))
    }

    pub fn sin(&mut self, a: Expr) -> Expr {
        self.unary(UnaryOp::Sin, a)
    }

    pub fn cos(&mut self, a: Expr) -> Expr {
        self.unary(UnaryOp::Cos, a)
    }

    pub fn tanh(&mut self, a: Expr) -> Expr {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn exp(&mut self, a: Expr) -> Expr {
        self.unary(UnaryOp::Exp, a)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return self.neg(a);
        }
        match self.as_const(a) {
            Some(v) => self.constant(op.apply(v)),
            None => self.intern(Node::Unary(op, a)),
        }
    }

    pub fn binary(&mut self, op: BinaryOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinaryOp::Add => self.add(a, b),
            BinaryOp::Sub => self.sub(a, b),
            BinaryOp::Mul => self.mul(a, b),
            BinaryOp::Div => self.div(a, b),
        }
    }

    /// Left-to-right sum `((t0 + t1) + t2) + ...`. Compiled programs evaluate
    /// such chains as a single accumulation.
    pub fn sum(&mut self, terms: &[Expr]) -> Expr {
        match terms.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    // Constants first, then by node id.
    fn commutative_order(&self, a: Expr, b: Expr) -> (Expr, Expr) {
        let ka = (self.as_const(a).is_none(), a);
        let kb = (self.as_const(b).is_none(), b);
        if ka <= kb {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Nodes reachable from `roots`, in ascending (topological) order.
    pub fn reachable(&self, roots: &[Expr]) -> Vec<Expr> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<Expr> = roots.to_vec();
        while let Some(e) = stack.pop() {
            if std::mem::replace(&mut seen[e.index()], true) {
                continue;
            }
            let (a, b) = self.nodes[e.index()].operands();
            stack.extend(a);
            stack.extend(b);
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| Expr(i as u32))
            .collect()
    }

    /// Builds the graph of `d expr / d wrt`. `wrt` must be an input variable.
    ///
    /// Derivatives are memoized per (node, variable), so repeated and mixed
    /// differentiation reuses every previously built derivative node.
    pub fn differentiate(&mut self, expr: Expr, wrt: Expr) -> Result<Expr> {
        let var = match self.nodes[wrt.index()] {
            Node::Input(i) => i,
            _ => return Err(AdError::NotAnInput(wrt)),
        };
        if let Some(&d) = self.derivatives.get(&(expr, var)) {
            return Ok(d);
        }
        for e in self.reachable(&[expr]) {
            if self.derivatives.contains_key(&(e, var)) {
                continue;
            }
            let d = self.derivative_rule(e, var)?;
            self.derivatives.insert((e, var), d);
        }
        Ok(self.derivatives[&(expr, var)])
    }

    /// Repeated differentiation: `d^order expr / d wrt^order`.
    pub fn differentiate_n(&mut self, expr: Expr, wrt: Expr, order: usize) -> Result<Expr> {
        (0..order).try_fold(expr, |e, _| self.differentiate(e, wrt))
    }

    // Operand derivatives are already memoized when this runs.
    fn derivative_rule(&mut self, e: Expr, var: u32) -> Result<Expr> {
        let d = |g: &Self, x: Expr| g.derivatives[&(x, var)];
        let out = match self.nodes[e.index()] {
            Node::Constant(_) | Node::Param(_) => self.constant(0.0),
            Node::Input(i) => self.constant(if i == var { 1.0 } else { 0.0 }),
            Node::Unary(op, a) => {
                let da = d(self, a);
                if self.is_const(da, 0.0) {
                    return Ok(da);
                }
                match op {
                    UnaryOp::Neg => self.neg(da),
                    UnaryOp::Sin => {
                        let c = self.cos(a);
                        self.mul(c, da)
                    }
                    UnaryOp::Cos => {
                        let s = self.sin(a);
                        let sd = self.mul(s, da);
                        self.neg(sd)
                    }
                    UnaryOp::Tanh => {
                        let one = self.constant(1.0);
                        let sq = self.powi(e, 2);
                        let sech2 = self.sub(one, sq);
                        self.mul(sech2, da)
                    }
                    UnaryOp::Exp => self.mul(e, da),
                }
            }
            Node::Binary(op, a, b) => {
                let (da, db) = (d(self, a), d(self, b));
                match op {
                    BinaryOp::Add => self.add(da, db),
                    BinaryOp::Sub => self.sub(da, db),
                    BinaryOp::Mul => {
                        let l = self.mul(da, b);
                        let r = self.mul(a, db);
                        self.add(l, r)
                    }
                    BinaryOp::Div => {
                        // (a/b)' = (a' - (a/b) b') / b
                        let q = self.mul(e, db);
                        let num = self.sub(da, q);
                        self.div(num, b)
                    }
                }
            }
            Node::PowInt(a, n) => {
                let da = d(self, a);
                if self.is_const(da, 0.0) {
                    return Ok(da);
                }
                let coeff = self.constant(f64::from(n));
                let p = self.powi(a, n - 1);
                let cp = self.mul(coeff, p);
                self.mul(cp, da)
            }
        };
        Ok(out)
    }

    fn check_bound(&self, order: &[Expr], ctx: &EvalContext<'_>) -> Result<()> {
        for &e in order {
            match self.nodes[e.index()] {
                Node::Input(i) if i as usize >= ctx.inputs.len() => {
                    let name = self
                        .input_names
                        .get(i as usize)
                        .cloned()
                        .unwrap_or_else(|| format!("input#{i}"));
                    return Err(AdError::UnboundVariable(name));
                }
                Node::Param(i) if i as usize >= ctx.params.len() => {
                    return Err(AdError::UnboundVariable(format!("param#{i}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn forward_values(&self, order: &[Expr], ctx: &EvalContext<'_>) -> Vec<f64> {
        let mut values = vec![0.0; self.nodes.len()];
        for &e in order {
            values[e.index()] = match self.nodes[e.index()] {
                Node::Constant(v) => v,
                Node::Input(i) => ctx.inputs[i as usize],
                Node::Param(i) => ctx.params[i as usize],
                Node::Unary(op, a) => op.apply(values[a.index()]),
                Node::Binary(op, a, b) => op.apply(values[a.index()], values[b.index()]),
                Node::PowInt(a, n) => values[a.index()].powi(n),
            };
        }
        values
    }

    /// Evaluates `expr` at `ctx`.
    pub fn evaluate(&self, expr: Expr, ctx: &EvalContext<'_>) -> Result<f64> {
        let order = self.reachable(&[expr]);
        self.check_bound(&order, ctx)?;
        let v = self.forward_values(&order, ctx)[expr.index()];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AdError::NonFiniteResult)
        }
    }

    /// Reverse-mode gradient of `expr` with respect to every parameter in
    /// `ctx.params`. Parameters not reachable from `expr` get exactly zero.
    pub fn parameter_gradient(&self, expr: Expr, ctx: &EvalContext<'_>) -> Result<Vec<f64>> {
        let order = self.reachable(&[expr]);
        self.check_bound(&order, ctx)?;
        let values = self.forward_values(&order, ctx);
        if !values[expr.index()].is_finite() {
            return Err(AdError::NonFiniteResult);
        }
        let mut adj = vec![0.0; self.nodes.len()];
        let mut grad = vec![0.0; ctx.params.len()];
        adj[expr.index()] = 1.0;
        for &e in order.iter().rev() {
            let g = adj[e.index()];
            if g == 0.0 {
                continue;
            }
            let v = values[e.index()];
            match self.nodes[e.index()] {
                Node::Constant(_) | Node::Input(_) => {}
                Node::Param(i) => grad[i as usize] += g,
                Node::Unary(op, a) => {
                    let x = values[a.index()];
                    adj[a.index()] += g * match op {
                        UnaryOp::Neg => -1.0,
                        UnaryOp::Sin => x.cos(),
                        UnaryOp::Cos => -x.sin(),
                        UnaryOp::Tanh => 1.0 - v * v,
                        UnaryOp::Exp => v,
                    };
                }
                Node::Binary(op, a, b) => {
                    let (x, y) = (values[a.index()], values[b.index()]);
                    let (ga, gb) = match op {
                        BinaryOp::Add => (g, g),
                        BinaryOp::Sub => (g, -g),
                        BinaryOp::Mul => (g * y, g * x),
                        BinaryOp::Div => (g / y, -g * v / y),
                    };
                    adj[a.index()] += ga;
                    adj[b.index()] += gb;
                }
                Node::PowInt(a, n) => {
                    let x = values[a.index()];
                    adj[a.index()] += g * f64::from(n) * x.powi(n - 1);
                }
            }
        }
        if grad.iter().all(|g| g.is_finite()) {
            Ok(grad)
        } else {
            Err(AdError::NonFiniteResult)
        }
    }

    /// Largest relative discrepancy between the reverse-mode parameter
    /// gradient and a central finite difference with step `h`:
    /// `max_i |ad_i - fd_i| / (|fd_i| + 1e-12)`.
    pub fn finite_difference_check(&self, expr: Expr, ctx: &EvalContext<'_>, h: f64) -> Result<f64> {
        assert!(h > 0.0, "finite-difference step must be positive");
        let ad = self.parameter_gradient(expr, ctx)?;
        let mut params = ctx.params.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            let up = self.evaluate(expr, &EvalContext::new(ctx.inputs, &params))?;
            params[i] = orig - h;
            let down = self.evaluate(expr, &EvalContext::new(ctx.inputs, &params))?;
            params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (ad[i] - fd).abs() / (fd.abs() + 1e-12);
            if !rel.is_finite() {
                return Err(AdError::NonFiniteResult);
            }
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    /// Line-oriented text form of the subgraph rooted at `expr`:
    /// `node_id op operand_ids…`, renumbered densely in topological order.
    /// Leaves carry their payload instead of operands (`const 2`,
    /// `input x`, `param 3`); `pow-int` lists its operand then the exponent.
    pub fn dump(&self, expr: Expr) -> String {
        let order = self.reachable(&[expr]);
        let local: HashMap<Expr, usize> = order.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut out = String::new();
        for (id, &e) in order.iter().enumerate() {
            let _ = match self.nodes[e.index()] {
                Node::Constant(v) => writeln!(out, "{id} const {v}"),
                Node::Input(i) => writeln!(out, "{id} input {}", self.input_names[i as usize]),
                Node::Param(i) => writeln!(out, "{id} param {i}"),
                Node::Unary(op, a) => writeln!(out, "{id} {} {}", op.name(), local[&a]),
                Node::Binary(op, a, b) => {
                    writeln!(out, "{id} {} {} {}", op.name(), local[&a], local[&b])
                }
                Node::PowInt(a, n) => writeln!(out, "{id} pow-int {} {n}", local[&a]),
            };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn eval(g: &Graph, e: Expr, inputs: &[f64]) -> f64 {
        g.evaluate(e, &EvalContext::new(inputs, &[])).unwrap()
    }

    #[test]
    fn evaluates_basic_expressions() {
        let mut g = Graph::new();
        let x = g.input("x");
        let y = g.input("y");
        let s = g.sin(x);
        let c = g.cos(x);
        let sc = g.mul(s, c);
        assert_eq!(eval(&g, sc, &[0.0, 0.0]), 0.0);
        let t = g.tanh(x);
        assert_eq!(eval(&g, t, &[0.0, 0.0]), 0.0);
        let x2 = g.powi(x, 2);
        let y2 = g.powi(y, 2);
        let diff = g.sub(x2, y2);
        assert_eq!(eval(&g, diff, &[3.0, 2.0]), 5.0);
    }

    #[test]
    fn unbound_variables_are_errors() {
        let mut g = Graph::new();
        let x = g.input("x");
        let y = g.input("y");
        let p = g.param(0);
        let e = g.add(x, y);
        assert_eq!(
            g.evaluate(e, &EvalContext::new(&[1.0], &[])),
            Err(AdError::UnboundVariable("y".into()))
        );
        let e = g.mul(p, x);
        assert!(matches!(
            g.evaluate(e, &EvalContext::new(&[1.0], &[])),
            Err(AdError::UnboundVariable(_))
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let mut g = Graph::new();
        let x = g.input("x");
        let e = g.exp(x);
        assert_eq!(
            g.evaluate(e, &EvalContext::new(&[1000.0], &[])),
            Err(AdError::NonFiniteResult)
        );
    }

    #[test]
    fn derivative_table() {
        let mut g = Graph::new();
        let x = g.input("x");
        let s = g.sin(x);
        let ds = g.differentiate(s, x).unwrap();
        assert_abs_diff_eq!(eval(&g, ds, &[PI]), -1.0, epsilon = 1e-15);

        let d4 = g.differentiate_n(s, x, 4).unwrap();
        assert_abs_diff_eq!(eval(&g, d4, &[1.0]), 1f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn fourth_derivative_matches_five_point_stencil() {
        let mut g = Graph::new();
        let x = g.input("x");
        let s = g.sin(x);
        let d4 = g.differentiate_n(s, x, 4).unwrap();
        // Central 5-point stencil for the 4th derivative, h = 1e-2.
        let h: f64 = 1e-2;
        let f = |t: f64| t.sin();
        let fd = (f(1.0 - 2.0 * h) - 4.0 * f(1.0 - h) + 6.0 * f(1.0) - 4.0 * f(1.0 + h) + f(1.0 + 2.0 * h)) / h.powi(4);
        let ad = eval(&g, d4, &[1.0]);
        assert!((ad - fd).abs() < 1e-4, "ad={ad} fd={fd}");
        assert_abs_diff_eq!(ad, 0.841471, epsilon = 1e-6);
    }

    #[test]
    fn mixed_partials_commute() {
        let mut g = Graph::new();
        let x = g.input("x");
        let y = g.input("y");
        let x2 = g.powi(x, 2);
        let f = g.mul(x2, y);
        let fx = g.differentiate(f, x).unwrap();
        let fxy = g.differentiate(fx, y).unwrap();
        let fy = g.differentiate(f, y).unwrap();
        let fyx = g.differentiate(fy, x).unwrap();
        assert_eq!(eval(&g, fxy, &[2.0, 7.0]), 4.0);
        assert_eq!(eval(&g, fyx, &[2.0, 7.0]), 4.0);
    }

    #[test]
    fn differentiating_a_parameter_is_rejected() {
        let mut g = Graph::new();
        let x = g.input("x");
        let p = g.param(0);
        let e = g.mul(p, x);
        assert_eq!(g.differentiate(e, p), Err(AdError::NotAnInput(p)));
    }

    #[test]
    fn parameter_gradient_examples() {
        let mut g = Graph::new();
        let x = g.input("x");
        let w = g.param(0);
        let b = g.param(1);
        let wx = g.mul(w, x);
        let lin = g.add(wx, b);
        let grad = g
            .parameter_gradient(lin, &EvalContext::new(&[3.0], &[0.5, -1.0]))
            .unwrap();
        assert_eq!(grad, vec![3.0, 1.0]);

        let t = g.tanh(w);
        let grad = g.parameter_gradient(t, &EvalContext::new(&[0.0], &[0.0, 9.0])).unwrap();
        assert_eq!(grad, vec![1.0, 0.0]);
    }

    #[test]
    fn finite_difference_check_examples() {
        let mut g = Graph::new();
        let x = g.input("x");
        let w = g.param(0);
        let b = g.param(1);
        let wx = g.mul(w, x);
        let lin = g.add(wx, b);
        let err = g
            .finite_difference_check(lin, &EvalContext::new(&[3.0], &[0.5, -1.0]), 1e-6)
            .unwrap();
        assert!(err < 1e-8, "{err}");

        let s = g.sin(w);
        let err = g
            .finite_difference_check(s, &EvalContext::new(&[0.0], &[0.3]), 1e-6)
            .unwrap();
        assert!(err < 1e-7, "{err}");

        let one = g.constant(1.0);
        let inv = g.div(one, w);
        assert_eq!(
            g.finite_difference_check(inv, &EvalContext::new(&[0.0], &[0.0]), 1e-6),
            Err(AdError::NonFiniteResult)
        );
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let mut g = Graph::new();
        let x = g.input("x");
        let y = g.input("y");
        let a = g.mul(x, y);
        let b = g.mul(y, x);
        assert_eq!(a, b);
        let n = g.len();
        let _ = g.sin(a);
        let _ = g.sin(b);
        assert_eq!(g.len(), n + 1);
    }

    #[test]
    fn simplification_rules() {
        let mut g = Graph::new();
        let x = g.input("x");
        let zero = g.constant(0.0);
        let one = g.constant(1.0);
        assert_eq!(g.mul(x, zero), zero);
        assert_eq!(g.mul(one, x), x);
        assert_eq!(g.add(zero, x), x);
        assert_eq!(g.sub(x, x), zero);
        let n = g.neg(x);
        assert_eq!(g.neg(n), x);
        assert_eq!(g.powi(x, 1), x);
        assert_eq!(g.powi(x, 0), one);
        let two = g.constant(2.0);
        let three = g.constant(3.0);
        let tx = g.mul(two, x);
        let sx = g.mul(three, tx);
        assert_eq!(
            g.node(sx),
            Node::Binary(BinaryOp::Mul, g.lookup(&Node::Constant(6.0)).unwrap(), x)
        );
    }

    #[test]
    fn dump_is_line_oriented() {
        let mut g = Graph::new();
        let x = g.input("x");
        let w = g.param(0);
        let wx = g.mul(w, x);
        let s = g.sin(wx);
        let p = g.powi(s, 2);
        let text = g.dump(p);
        assert_eq!(text, "0 input x\n1 param 0\n2 mul 0 1\n3 sin 2\n4 pow-int 3 2\n");
    }
}
