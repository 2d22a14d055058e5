//! Weighted multi-term mean-squared-error objectives.
//!
//! A [`CompositeLoss`] owns one compiled residual program per term. The total
//! is `sum_i weight_i * mse_i` with `mse_i = mean((residual - target)^2)` over
//! the term's own collocation set.

use log::warn;
use thiserror::Error;

use crate::autodiff::{AdError, Expr, Graph, Program, Workspace, LANES};
use crate::parallel::{map_blocks, Parallelism};
use crate::sampling::CollocationSet;

/// Points per work block. Fixed so that accumulation order never depends on
/// the thread count.
const BLOCK: usize = 256;

const MAX_DIM: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("term `{name}`: {reason}")]
    BadTerm { name: String, reason: String },
    #[error("term `{0}` has an all-zero gradient")]
    DegenerateGradient(String),
}

#[derive(Clone, Debug)]
pub struct LossTerm {
    pub name: String,
    pub residual: Expr,
    pub targets: Vec<f64>,
    pub set: CollocationSet,
    pub weight: f64,
}

impl LossTerm {
    /// A term whose residual already encodes its target (zero targets).
    pub fn new(name: &str, residual: Expr, set: CollocationSet) -> Self {
        Self {
            name: name.to_string(),
            residual,
            targets: vec![0.0; set.len()],
            set,
            weight: 1.0,
        }
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    term: LossTerm,
    program: Program,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Unweighted MSE of every term.
    pub terms: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    /// Gradient of each unweighted term MSE.
    pub term_grads: Vec<Vec<f64>>,
    /// Gradient of the weighted total.
    pub grad: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CompositeLoss {
    terms: Vec<CompiledTerm>,
    n_params: usize,
}

impl CompositeLoss {
    /// Compiles every term against `graph`. `n_params` is the length of the
    /// trainable vector the residuals are evaluated with.
    pub fn new(graph: &Graph, terms: Vec<LossTerm>, n_params: usize) -> Result<Self, LossError> {
        let terms = terms
            .into_iter()
            .map(|term| {
                let bad = |reason: String| LossError::BadTerm {
                    name: term.name.clone(),
                    reason,
                };
                if term.targets.len() != term.set.len() {
                    return Err(bad(format!(
                        "{} targets for {} points",
                        term.targets.len(),
                        term.set.len()
                    )));
                }
                if term.set.is_empty() {
                    return Err(bad("empty collocation set".into()));
                }
                if !(term.weight > 0.0 && term.weight.is_finite()) {
                    return Err(bad(format!("weight must be positive, got {}", term.weight)));
                }
                let program = Program::compile(graph, term.residual);
                if program.num_inputs() > term.set.dim {
                    return Err(bad(format!(
                        "residual reads {} inputs, points have {}",
                        program.num_inputs(),
                        term.set.dim
                    )));
                }
                Ok(CompiledTerm { term, program })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { terms, n_params })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn term(&self, i: usize) -> &LossTerm {
        &self.terms[i].term
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.term.name.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.term.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.terms.len());
        for (t, &w) in self.terms.iter_mut().zip(weights) {
            assert!(w > 0.0 && w.is_finite(), "loss weights must be positive and finite");
            t.term.weight = w;
        }
    }

    /// Total instruction count over all term programs.
    pub fn program_size(&self) -> usize {
        self.terms.iter().map(|t| t.program.len()).sum()
    }

    pub fn term_mse(&self, i: usize, params: &[f64]) -> Result<f64, LossError> {
        let (mse, _) = self.eval_term(i, params, None, false, Parallelism::Sequential)?;
        Ok(mse)
    }

    pub fn total_loss(&self, params: &[f64]) -> Result<LossBreakdown, LossError> {
        let terms = (0..self.terms.len())
            .map(|i| self.term_mse(i, params))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.breakdown(terms))
    }

    fn breakdown(&self, terms: Vec<f64>) -> LossBreakdown {
        let total = terms.iter().zip(&self.terms).map(|(m, t)| t.term.weight * m).sum();
        LossBreakdown { total, terms }
    }

    /// Loss and gradients. `selection[i]`, when given, restricts term `i` to
    /// those point indices (a mini-batch); the MSE is then the batch mean.
    pub fn evaluate(
        &self,
        params: &[f64],
        selection: Option<&[Vec<usize>]>,
        mode: Parallelism,
    ) -> Result<Evaluation, LossError> {
        let mut mses = Vec::with_capacity(self.terms.len());
        let mut term_grads = Vec::with_capacity(self.terms.len());
        for i in 0..self.terms.len() {
            let sel = selection.map(|s| s[i].as_slice());
            let (mse, grad) = self.eval_term(i, params, sel, true, mode)?;
            mses.push(mse);
            term_grads.push(grad);
        }
        let mut grad = vec![0.0; self.n_params];
        for (g, t) in term_grads.iter().zip(&self.terms) {
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += t.term.weight * v;
            }
        }
        Ok(Evaluation {
            breakdown: self.breakdown(mses),
            term_grads,
            grad,
        })
    }

    /// Residual values of term `i` at every point of its set.
    pub fn residuals(&self, i: usize, params: &[f64]) -> Result<Vec<f64>, LossError> {
        let ct = &self.terms[i];
        let dim = ct.term.set.dim;
        let mut ws = ct.program.workspace();
        ct.program.load_params(&mut ws, params)?;
        let mut out = Vec::with_capacity(ct.term.set.len());
        for chunk in ct.term.set.points.chunks(LANES * dim) {
            let v = ct.program.forward(&mut ws, chunk, dim)?;
            out.extend_from_slice(&v[..chunk.len() / dim]);
        }
        Ok(out)
    }

    fn eval_term(
        &self,
        i: usize,
        params: &[f64],
        selection: Option<&[usize]>,
        want_grad: bool,
        mode: Parallelism,
    ) -> Result<(f64, Vec<f64>), LossError> {
        let ct = &self.terms[i];
        let set = &ct.term.set;
        let dim = set.dim;
        let n = selection.map_or(set.len(), <[usize]>::len);
        if n == 0 {
            return Ok((0.0, vec![0.0; if want_grad { self.n_params } else { 0 }]));
        }
        let index = |k: usize| selection.map_or(k, |s| s[k]);
        let scale = 2.0 / n as f64;
        let n_blocks = n.div_ceil(BLOCK);
        let program = &ct.program;

        let init = || -> (Workspace, bool) {
            let mut ws = program.workspace();
            let ok = program.load_params(&mut ws, params).is_ok();
            (ws, ok)
        };
        let run_block = |state: &mut (Workspace, bool), b: usize| -> Result<(f64, Vec<f64>), LossError> {
            let (ws, loaded) = state;
            if !*loaded {
                program.load_params(ws, params)?;
            }
            let mut sum_sq = 0.0;
            let mut buf = [0.0; LANES * MAX_DIM];
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let mut k = lo;
            while k < hi {
                let count = (hi - k).min(LANES);
                for l in 0..count {
                    buf[l * dim..(l + 1) * dim].copy_from_slice(set.point(index(k + l)));
                }
                let r = program.forward(ws, &buf[..count * dim], dim)?;
                let mut seed = [0.0; LANES];
                for l in 0..count {
                    let e = r[l] - ct.term.targets[index(k + l)];
                    sum_sq += e * e;
                    seed[l] = scale * e;
                }
                if want_grad {
                    program.backward(ws, &seed);
                }
                k += count;
            }
            let mut grad = Vec::new();
            if want_grad {
                grad = vec![0.0; self.n_params];
                program.collect_gradient(ws, &mut grad);
            }
            Ok((sum_sq, grad))
        };
        assert!(dim <= MAX_DIM, "collocation points have at most {MAX_DIM} coordinates");
        let blocks = map_blocks(n_blocks, mode, init, run_block);

        let mut sum_sq = 0.0;
        let mut grad = vec![0.0; if want_grad { self.n_params } else { 0 }];
        for block in blocks {
            let (s, g) = block?;
            sum_sq += s;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        if !sum_sq.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(AdError::NonFiniteResult.into());
        }
        Ok((sum_sq / n as f64, grad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebalanceStatus {
    Anchor,
    Updated,
    /// The term (or the anchor) had an all-zero gradient; weight unchanged.
    Degenerate,
}

/// Gradient-balancing weight update. Term 0 is the anchor and keeps its
/// weight. For every other term
/// `target_i = max|grad_anchor| / (mean|weight_i * grad_i| + 1e-12)` and
/// `weight_i <- (1 - alpha) * weight_i + alpha * target_i`.
///
/// Only the first `n_network` gradient entries (the network parameters)
/// enter the statistics.
pub fn rebalance_weights(
    loss: &mut CompositeLoss,
    term_grads: &[Vec<f64>],
    alpha: f64,
    n_network: usize,
) -> Vec<RebalanceStatus> {
    assert_eq!(term_grads.len(), loss.len());
    let mut weights = loss.weights();
    let mut status = vec![RebalanceStatus::Anchor; weights.len()];
    if weights.is_empty() {
        return status;
    }
    let anchor = &term_grads[0][..n_network];
    let max_anchor = anchor.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for i in 1..weights.len() {
        let g = &term_grads[i][..n_network];
        let mean_abs = g.iter().map(|v| v.abs()).sum::<f64>() / g.len().max(1) as f64;
        if mean_abs == 0.0 || max_anchor == 0.0 {
            warn!("{}", LossError::DegenerateGradient(loss.term(i).name.clone()));
            status[i] = RebalanceStatus::Degenerate;
            continue;
        }
        let target = max_anchor / (weights[i] * mean_abs + 1e-12);
        let updated = (1.0 - alpha) * weights[i] + alpha * target;
        if updated > 0.0 && updated.is_finite() {
            weights[i] = updated;
            status[i] = RebalanceStatus::Updated;
        } else {
            status[i] = RebalanceStatus::Degenerate;
        }
    }
    loss.set_weights(&weights);
    status
}

/// CSV header of the per-epoch training log.
pub fn training_log_header(terms: &[String], physical: &[String]) -> String {
    let mut cols = vec!["epoch".to_string(), "total".to_string()];
    cols.extend(terms.iter().cloned());
    cols.extend(terms.iter().map(|t| format!("lambda_{t}")));
    cols.extend(physical.iter().cloned());
    cols.join(",")
}

pub fn training_log_row(epoch: usize, total: f64, terms: &[f64], weights: &[f64], physical: &[f64]) -> String {
    let mut cols = vec![epoch.to_string(), format!("{total:?}")];
    cols.extend(terms.iter().chain(weights).chain(physical).map(|v| format!("{v:?}")));
    cols.join(",")
}
