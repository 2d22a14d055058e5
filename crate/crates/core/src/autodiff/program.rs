//! Compiled evaluation of a single graph output over several points at once.
//!
//! A [`Program`] is the reachable part of a graph laid out as a flat
//! instruction list. Each slot holds one value per lane, so a forward or
//! reverse sweep processes [`LANES`] collocation points per instruction. The
//! arithmetic per lane is identical to [`Graph::evaluate`] and
//! [`Graph::parameter_gradient`].

use std::collections::HashMap;

use super::{AdError, BinaryOp, Expr, Graph, Node, Result, UnaryOp};

pub const LANES: usize = 8;

type Lane = [f64; LANES];

const ZERO: Lane = [0.0; LANES];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Code {
    Neg,
    Sin,
    Cos,
    Tanh,
    Exp,
    Add,
    Sub,
    Mul,
    Div,
    PowInt,
    /// Left-to-right accumulation of `terms[a..b]`.
    Sum,
}

#[derive(Clone, Copy, Debug)]
struct Instr {
    code: Code,
    a: u32,
    b: u32,
    n: i32,
    // Slot holding cos(a) for Sin and sin(a) for Cos; used by the reverse sweep.
    aux: u32,
    grad_a: bool,
    grad_b: bool,
    reverse: bool,
}

const NO_SLOT: u32 = u32::MAX;

/// One summand of a [`Code::Sum`]: the value of slot `a`, or the product
/// `a * b` when `b` is set.
#[derive(Clone, Copy, Debug)]
struct Term {
    a: u32,
    b: u32,
    grad_a: bool,
    grad_b: bool,
}

#[derive(Clone, Debug)]
pub struct Program {
    n_slots: usize,
    consts: Vec<(u32, f64)>,
    inputs: Vec<(u32, u32)>,
    params: Vec<(u32, u32)>,
    first_op: usize,
    ops: Vec<Instr>,
    terms: Vec<Term>,
    output: u32,
    output_depends_on_params: bool,
    num_inputs: usize,
    max_param: Option<usize>,
}

/// Per-thread scratch memory for one [`Program`].
#[derive(Clone, Debug)]
pub struct Workspace {
    values: Vec<Lane>,
    adjoints: Vec<Lane>,
}

impl Program {
    pub fn compile(graph: &Graph, output: Expr) -> Program {
        let order = graph.reachable(&[output]);

        // Single-use additions and products feeding an addition are folded
        // into that addition's accumulation chain instead of getting a slot.
        let mut uses: HashMap<Expr, u32> = HashMap::with_capacity(order.len());
        *uses.entry(output).or_default() += 1;
        for &e in &order {
            let (a, b) = graph.node(e).operands();
            for x in a.into_iter().chain(b) {
                *uses.entry(x).or_default() += 1;
            }
        }
        let single = |x: Expr| x != output && uses.get(&x) == Some(&1);
        let is_add = |x: Expr| matches!(graph.node(x), Node::Binary(BinaryOp::Add, ..));
        let is_mul = |x: Expr| matches!(graph.node(x), Node::Binary(BinaryOp::Mul, ..));
        let mut absorbed: HashMap<Expr, bool> = HashMap::new();
        for &e in &order {
            if let Node::Binary(BinaryOp::Add, a, b) = graph.node(e) {
                // At most one operand may be an inner chain, which keeps the
                // accumulation order identical to the graph's.
                let mut chain_taken = false;
                for x in [a, b] {
                    if !single(x) {
                        continue;
                    }
                    if is_add(x) && !chain_taken {
                        chain_taken = true;
                        absorbed.insert(x, true);
                    } else if is_mul(x) {
                        absorbed.insert(x, true);
                    }
                }
            }
        }

        let mut slot_of: HashMap<Expr, u32> = HashMap::with_capacity(order.len());
        let mut consts = Vec::new();
        let mut inputs = Vec::new();
        let mut params = Vec::new();
        let mut next = 0u32;
        for &e in &order {
            match graph.node(e) {
                Node::Constant(v) => consts.push((next, v)),
                Node::Input(i) => inputs.push((next, i)),
                Node::Param(i) => params.push((next, i)),
                _ => continue,
            }
            slot_of.insert(e, next);
            next += 1;
        }
        let first_op = next as usize;
        let mut depends = vec![false; first_op];
        for &(slot, _) in &params {
            depends[slot as usize] = true;
        }

        let mut ops = Vec::with_capacity(order.len() - first_op);
        let mut terms: Vec<Term> = Vec::new();
        // Partner nodes the reverse sweep needs but the graph does not contain.
        let mut pending_aux: Vec<(usize, UnaryOp, u32)> = Vec::new();
        for &e in &order {
            if absorbed.contains_key(&e) {
                continue;
            }
            let node = graph.node(e);
            let mut ins = match node {
                Node::Constant(_) | Node::Input(_) | Node::Param(_) => continue,
                Node::Binary(BinaryOp::Add, ..) => {
                    let start = terms.len();
                    flatten_sum(graph, e, &absorbed, &slot_of, &depends, &mut terms);
                    Instr {
                        code: Code::Sum,
                        a: start as u32,
                        b: terms.len() as u32,
                        n: 0,
                        aux: 0,
                        grad_a: false,
                        grad_b: false,
                        reverse: terms[start..].iter().any(|t| t.grad_a || t.grad_b),
                    }
                }
                Node::Unary(op, a) => simple(unary_code(op), slot_of[&a], slot_of[&a], 0, &depends),
                Node::Binary(op, a, b) => simple(binary_code(op), slot_of[&a], slot_of[&b], 0, &depends),
                Node::PowInt(a, n) => simple(Code::PowInt, slot_of[&a], slot_of[&a], n, &depends),
            };
            if ins.reverse {
                if let Node::Unary(op @ (UnaryOp::Sin | UnaryOp::Cos), a) = node {
                    let partner = if op == UnaryOp::Sin { UnaryOp::Cos } else { UnaryOp::Sin };
                    match graph.lookup(&Node::Unary(partner, a)).and_then(|p| slot_of.get(&p)) {
                        Some(&s) => ins.aux = s,
                        None => pending_aux.push((ops.len(), partner, ins.a)),
                    }
                }
            }
            slot_of.insert(e, next);
            next += 1;
            depends.push(ins.reverse);
            ops.push(ins);
        }
        for (op_index, partner, operand) in pending_aux {
            let mut ins = simple(unary_code(partner), operand, operand, 0, &depends);
            ins.grad_a = false;
            ins.reverse = false;
            ops.push(ins);
            ops[op_index].aux = next;
            next += 1;
        }

        let output_slot = slot_of[&output];
        Program {
            n_slots: next as usize,
            consts,
            output_depends_on_params: depends[output_slot as usize],
            num_inputs: inputs.iter().map(|&(_, i)| i as usize + 1).max().unwrap_or(0),
            max_param: params.iter().map(|&(_, i)| i as usize).max(),
            inputs,
            params,
            first_op,
            ops,
            terms,
            output: output_slot,
        }
    }

    /// Number of value slots (leaves plus non-folded operations).
    pub fn len(&self) -> usize {
        self.n_slots
    }

    pub fn is_empty(&self) -> bool {
        self.n_slots == 0
    }

    /// Minimum number of coordinates each point must supply.
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn workspace(&self) -> Workspace {
        let mut values = vec![ZERO; self.n_slots];
        for &(slot, v) in &self.consts {
            values[slot as usize] = [v; LANES];
        }
        Workspace {
            values,
            adjoints: vec![ZERO; self.n_slots],
        }
    }

    /// Broadcasts parameter values into the workspace. Must be called before
    /// [`Program::forward`] whenever the parameters change.
    pub fn load_params(&self, ws: &mut Workspace, params: &[f64]) -> Result<()> {
        if let Some(max) = self.max_param {
            if max >= params.len() {
                return Err(AdError::UnboundVariable(format!("param#{max}")));
            }
        }
        for &(slot, i) in &self.params {
            ws.values[slot as usize] = [params[i as usize]; LANES];
        }
        Ok(())
    }

    /// Evaluates the output at up to [`LANES`] points stored row-major in
    /// `points` (`dim` coordinates each). Unused lanes repeat the last point.
    pub fn forward(&self, ws: &mut Workspace, points: &[f64], dim: usize) -> Result<Lane> {
        let count = points.len() / dim;
        assert!((1..=LANES).contains(&count), "forward takes 1..={LANES} points");
        if self.num_inputs > dim {
            return Err(AdError::UnboundVariable(format!("input#{dim}")));
        }
        for &(slot, i) in &self.inputs {
            let lane = &mut ws.values[slot as usize];
            for (l, v) in lane.iter_mut().enumerate() {
                *v = points[l.min(count - 1) * dim + i as usize];
            }
        }
        let values = &mut ws.values;
        for (k, ins) in self.ops.iter().enumerate() {
            let out: Lane = match ins.code {
                Code::Sum => {
                    let terms = &self.terms[ins.a as usize..ins.b as usize];
                    let mut acc = term_value(values, &terms[0]);
                    for t in &terms[1..] {
                        let v = term_value(values, t);
                        for l in 0..LANES {
                            acc[l] += v[l];
                        }
                    }
                    acc
                }
                Code::Neg => values[ins.a as usize].map(|x| -x),
                Code::Sin => values[ins.a as usize].map(f64::sin),
                Code::Cos => values[ins.a as usize].map(f64::cos),
                Code::Tanh => values[ins.a as usize].map(f64::tanh),
                Code::Exp => values[ins.a as usize].map(f64::exp),
                Code::PowInt => match ins.n {
                    2 => values[ins.a as usize].map(|x| x * x),
                    n => values[ins.a as usize].map(|x| x.powi(n)),
                },
                Code::Add => zip(&values[ins.a as usize], &values[ins.b as usize], |x, y| x + y),
                Code::Sub => zip(&values[ins.a as usize], &values[ins.b as usize], |x, y| x - y),
                Code::Mul => zip(&values[ins.a as usize], &values[ins.b as usize], |x, y| x * y),
                Code::Div => zip(&values[ins.a as usize], &values[ins.b as usize], |x, y| x / y),
            };
            values[self.first_op + k] = out;
        }
        let out = values[self.output as usize];
        if out[..count].iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(AdError::NonFiniteResult)
        }
    }

    /// Reverse sweep seeded with `seed` per lane, after a [`Program::forward`]
    /// on the same workspace. Parameter adjoints accumulate across calls
    /// until collected with [`Program::collect_gradient`].
    pub fn backward(&self, ws: &mut Workspace, seed: &Lane) {
        if !self.output_depends_on_params {
            return;
        }
        let out = self.output as usize;
        if out < self.first_op {
            // The output is itself a parameter leaf.
            add_assign(&mut ws.adjoints[out], seed);
            return;
        }
        ws.adjoints[out] = *seed;
        let Workspace { values, adjoints } = ws;
        for (k, ins) in self.ops.iter().enumerate().rev() {
            if !ins.reverse {
                continue;
            }
            let dst = self.first_op + k;
            let g = std::mem::replace(&mut adjoints[dst], ZERO);
            let (a, b) = (ins.a as usize, ins.b as usize);
            match ins.code {
                Code::Sum => {
                    for t in &self.terms[a..b] {
                        if t.b == NO_SLOT {
                            if t.grad_a {
                                add_assign(&mut adjoints[t.a as usize], &g);
                            }
                            continue;
                        }
                        let (ta, tb) = (t.a as usize, t.b as usize);
                        if t.grad_a {
                            let v = zip(&g, &values[tb], |x, y| x * y);
                            add_assign(&mut adjoints[ta], &v);
                        }
                        if t.grad_b {
                            let v = zip(&g, &values[ta], |x, y| x * y);
                            add_assign(&mut adjoints[tb], &v);
                        }
                    }
                }
                Code::Add => {
                    if ins.grad_a {
                        add_assign(&mut adjoints[a], &g);
                    }
                    if ins.grad_b {
                        add_assign(&mut adjoints[b], &g);
                    }
                }
                Code::Sub => {
                    if ins.grad_a {
                        add_assign(&mut adjoints[a], &g);
                    }
                    if ins.grad_b {
                        let t = g.map(|x| -x);
                        add_assign(&mut adjoints[b], &t);
                    }
                }
                Code::Mul => {
                    if ins.grad_a {
                        let t = zip(&g, &values[b], |x, y| x * y);
                        add_assign(&mut adjoints[a], &t);
                    }
                    if ins.grad_b {
                        let t = zip(&g, &values[a], |x, y| x * y);
                        add_assign(&mut adjoints[b], &t);
                    }
                }
                Code::Div => {
                    if ins.grad_a {
                        let t = zip(&g, &values[b], |x, y| x / y);
                        add_assign(&mut adjoints[a], &t);
                    }
                    if ins.grad_b {
                        let q = &values[dst];
                        let d = &values[b];
                        let t: Lane = std::array::from_fn(|l| -g[l] * q[l] / d[l]);
                        add_assign(&mut adjoints[b], &t);
                    }
                }
                Code::Neg => {
                    let t = g.map(|x| -x);
                    add_assign(&mut adjoints[a], &t);
                }
                Code::Sin => {
                    let t = zip(&g, &values[ins.aux as usize], |x, c| x * c);
                    add_assign(&mut adjoints[a], &t);
                }
                Code::Cos => {
                    let t = zip(&g, &values[ins.aux as usize], |x, s| -x * s);
                    add_assign(&mut adjoints[a], &t);
                }
                Code::Tanh => {
                    let t = zip(&g, &values[dst], |x, v| x * (1.0 - v * v));
                    add_assign(&mut adjoints[a], &t);
                }
                Code::Exp => {
                    let t = zip(&g, &values[dst], |x, v| x * v);
                    add_assign(&mut adjoints[a], &t);
                }
                Code::PowInt => {
                    let n = ins.n;
                    let t = zip(&g, &values[a], |x, v| x * f64::from(n) * v.powi(n - 1));
                    add_assign(&mut adjoints[a], &t);
                }
            }
        }
    }

    /// Adds the accumulated parameter adjoints (summed over lanes) into
    /// `grad` and clears them.
    pub fn collect_gradient(&self, ws: &mut Workspace, grad: &mut [f64]) {
        for &(slot, i) in &self.params {
            let adj = std::mem::replace(&mut ws.adjoints[slot as usize], ZERO);
            grad[i as usize] += adj.iter().sum::<f64>();
        }
    }

    /// Single-point convenience wrapper around a fresh workspace.
    pub fn evaluate(&self, point: &[f64], params: &[f64]) -> Result<f64> {
        let mut ws = self.workspace();
        self.load_params(&mut ws, params)?;
        Ok(self.forward(&mut ws, point, point.len().max(1))?[0])
    }
}

fn simple(code: Code, a: u32, b: u32, n: i32, depends: &[bool]) -> Instr {
    let (da, db) = (depends[a as usize], depends[b as usize]);
    Instr {
        code,
        a,
        b,
        n,
        aux: 0,
        grad_a: da,
        grad_b: db,
        reverse: da || db,
    }
}

// Appends the summands of the chain rooted at `e` in evaluation order.
fn flatten_sum(
    graph: &Graph,
    e: Expr,
    absorbed: &HashMap<Expr, bool>,
    slot_of: &HashMap<Expr, u32>,
    depends: &[bool],
    out: &mut Vec<Term>,
) {
    let Node::Binary(BinaryOp::Add, a, b) = graph.node(e) else {
        unreachable!("sum chains are rooted at additions")
    };
    // The inner chain (if any) is accumulated first.
    let (first, second) = if absorbed.contains_key(&b) && matches!(graph.node(b), Node::Binary(BinaryOp::Add, ..)) {
        (b, a)
    } else {
        (a, b)
    };
    for x in [first, second] {
        match graph.node(x) {
            Node::Binary(BinaryOp::Add, ..) if absorbed.contains_key(&x) => {
                flatten_sum(graph, x, absorbed, slot_of, depends, out)
            }
            Node::Binary(BinaryOp::Mul, p, q) if absorbed.contains_key(&x) => {
                let (sp, sq) = (slot_of[&p], slot_of[&q]);
                out.push(Term {
                    a: sp,
                    b: sq,
                    grad_a: depends[sp as usize],
                    grad_b: depends[sq as usize],
                });
            }
            _ => {
                let s = slot_of[&x];
                out.push(Term {
                    a: s,
                    b: NO_SLOT,
                    grad_a: depends[s as usize],
                    grad_b: false,
                });
            }
        }
    }
}

#[inline(always)]
fn term_value(values: &[Lane], t: &Term) -> Lane {
    if t.b == NO_SLOT {
        values[t.a as usize]
    } else {
        zip(&values[t.a as usize], &values[t.b as usize], |x, y| x * y)
    }
}

fn unary_code(op: UnaryOp) -> Code {
    match op {
        UnaryOp::Neg => Code::Neg,
        UnaryOp::Sin => Code::Sin,
        UnaryOp::Cos => Code::Cos,
        UnaryOp::Tanh => Code::Tanh,
        UnaryOp::Exp => Code::Exp,
    }
}

fn binary_code(op: BinaryOp) -> Code {
    match op {
        BinaryOp::Add => Code::Add,
        BinaryOp::Sub => Code::Sub,
        BinaryOp::Mul => Code::Mul,
        BinaryOp::Div => Code::Div,
    }
}

#[inline(always)]
fn zip(a: &Lane, b: &Lane, f: impl Fn(f64, f64) -> f64) -> Lane {
    std::array::from_fn(|l| f(a[l], b[l]))
}

#[inline(always)]
fn add_assign(dst: &mut Lane, src: &Lane) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
