//! Governing residuals and closed-form solutions.

use std::f64::consts::PI;

use crate::autodiff::{Expr, Graph, Result};

use super::ProblemKind;

/// Plate constants: thickness, Poisson ratio, Young's modulus, density.
pub const PLATE_H: f64 = 0.004;
pub const PLATE_NU: f64 = 0.25;
pub const PLATE_E: f64 = 7e10;
pub const PLATE_RHO: f64 = 2700.0;

/// Flexural stiffness `E h^3 / (12 (1 - nu^2))`.
pub fn plate_stiffness() -> f64 {
    PLATE_E * PLATE_H.powi(3) / (12.0 * (1.0 - PLATE_NU * PLATE_NU))
}

/// Density-normalized stiffness `D / rho`.
pub fn plate_normalized_stiffness() -> f64 {
    plate_stiffness() / PLATE_RHO
}

/// Angular frequency of the fundamental plate mode, `sqrt(4 pi^4 D/rho)`.
pub fn plate_frequency(d_hat: f64) -> f64 {
    (4.0 * PI.powi(4) * d_hat).sqrt()
}

/// Named scalar nodes (fixed constants or trainable parameters) visible to
/// residual builders.
#[derive(Clone, Debug, Default)]
pub struct Scalars(pub Vec<(String, Expr)>);

impl Scalars {
    pub fn get(&self, name: &str) -> Expr {
        self.0
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, e)| e)
            .unwrap_or_else(|| panic!("missing physical scalar `{name}`"))
    }
}

/// Named scalar values for closed-form evaluation.
#[derive(Clone, Debug, Default)]
pub struct Values(pub Vec<(String, f64)>);

impl Values {
    pub fn get(&self, name: &str) -> f64 {
        self.0
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| panic!("missing physical value `{name}`"))
    }
}

fn d(g: &mut Graph, u: Expr, wrt: Expr, order: usize) -> Result<Expr> {
    g.differentiate_n(u, wrt, order)
}

/// Residual of the governing equation for `u`, or `None` for pure data fits.
/// `vars` are the coordinate inputs in problem order.
pub fn governing_residual(
    kind: ProblemKind,
    g: &mut Graph,
    u: Expr,
    vars: &[Expr],
    s: &Scalars,
) -> Result<Option<Expr>> {
    let r = match kind {
        ProblemKind::LinearRegression | ProblemKind::QuadraticRegression | ProblemKind::FourierSmoothing => {
            return Ok(None)
        }
        ProblemKind::SpringMass => {
            // u_tt + omega^2 u - F0 sin(omega_bar t)
            let t = vars[0];
            let u_tt = d(g, u, t, 2)?;
            let w2 = g.powi(s.get("omega"), 2);
            let stiff = g.mul(w2, u);
            let wt = g.mul(s.get("omega_bar"), t);
            let sin = g.sin(wt);
            let force = g.mul(s.get("F0"), sin);
            let lhs = g.add(u_tt, stiff);
            g.sub(lhs, force)
        }
        ProblemKind::Membrane => {
            // c (u_xx + u_yy) - u_tt
            let u_xx = d(g, u, vars[0], 2)?;
            let u_yy = d(g, u, vars[1], 2)?;
            let u_tt = d(g, u, vars[2], 2)?;
            let lap = g.add(u_xx, u_yy);
            let cl = g.mul(s.get("c"), lap);
            g.sub(cl, u_tt)
        }
        ProblemKind::Plate => {
            // D/rho (u_xxxx + 2 u_xxyy + u_yyyy) + u_tt
            let (x, y, t) = (vars[0], vars[1], vars[2]);
            let u_xx = d(g, u, x, 2)?;
            let u_xxxx = d(g, u_xx, x, 2)?;
            let u_xxyy = d(g, u_xx, y, 2)?;
            let u_yyyy = d(g, u, y, 4)?;
            let u_tt = d(g, u, t, 2)?;
            let two = g.constant(2.0);
            let mixed = g.mul(two, u_xxyy);
            let bih = g.sum(&[u_xxxx, mixed, u_yyyy]);
            let stiff = g.mul(s.get("D_hat"), bih);
            g.add(stiff, u_tt)
        }
        ProblemKind::Laplace => {
            // kappa (f_xx + f_yy)
            let f_xx = d(g, u, vars[0], 2)?;
            let f_yy = d(g, u, vars[1], 2)?;
            let lap = g.add(f_xx, f_yy);
            g.mul(s.get("kappa"), lap)
        }
    };
    Ok(Some(r))
}

/// Closed-form solution as a graph over `vars`.
pub fn oracle_expr(kind: ProblemKind, g: &mut Graph, vars: &[Expr], v: &Values) -> Expr {
    let c = |g: &mut Graph, x: f64| g.constant(x);
    match kind {
        ProblemKind::LinearRegression => {
            let two = c(g, 2.0);
            let one = c(g, 1.0);
            let tx = g.mul(two, vars[0]);
            g.add(tx, one)
        }
        ProblemKind::QuadraticRegression => {
            let x = vars[0];
            let two = c(g, 2.0);
            let one = c(g, 1.0);
            let x2 = g.powi(x, 2);
            let q = g.mul(two, x2);
            let l = g.sub(q, x);
            g.add(l, one)
        }
        ProblemKind::FourierSmoothing => {
            let t = vars[0];
            let (a, b, w, wb) = fourier_constants();
            let wt = {
                let k = c(g, w);
                g.mul(k, t)
            };
            let wbt = {
                let k = c(g, wb);
                g.mul(k, t)
            };
            let s1 = g.sin(wt);
            let s2 = g.sin(wbt);
            let bk = c(g, b);
            let s2 = g.mul(bk, s2);
            let diff = g.sub(s1, s2);
            let ak = c(g, a);
            g.mul(ak, diff)
        }
        ProblemKind::SpringMass => {
            let t = vars[0];
            let (w, wb, f0) = (v.get("omega"), v.get("omega_bar"), v.get("F0"));
            let beta = wb / w;
            let wbt = {
                let k = c(g, wb);
                g.mul(k, t)
            };
            let wt = {
                let k = c(g, w);
                g.mul(k, t)
            };
            let s1 = g.sin(wbt);
            let s2 = g.sin(wt);
            let bk = c(g, beta);
            let s2 = g.mul(bk, s2);
            let diff = g.sub(s1, s2);
            let amp = c(g, f0 / (w * w - wb * wb));
            g.mul(amp, diff)
        }
        ProblemKind::Membrane | ProblemKind::Plate => {
            let (freq, amp) = if kind == ProblemKind::Membrane {
                (PI * (2.0 * v.get("c")).sqrt(), 1.0)
            } else {
                (plate_frequency(v.get("D_hat")), v.get("amplitude"))
            };
            let pi = c(g, PI);
            let px = g.mul(pi, vars[0]);
            let py = g.mul(pi, vars[1]);
            let sx = g.sin(px);
            let sy = g.sin(py);
            let k = c(g, freq);
            let ft = g.mul(k, vars[2]);
            let ct = g.cos(ft);
            let a = c(g, amp);
            let shape = g.mul(sx, sy);
            let shape = g.mul(a, shape);
            g.mul(shape, ct)
        }
        ProblemKind::Laplace => {
            let x2 = g.powi(vars[0], 2);
            let y2 = g.powi(vars[1], 2);
            g.sub(x2, y2)
        }
    }
}

/// `(A, beta, omega, omega_bar)` of the de-noising generator.
pub fn fourier_constants() -> (f64, f64, f64, f64) {
    (1.0, 1.0, 2.0 * PI / 2.0, 2.0 * PI / 1.5)
}

/// Closed-form solution at one point.
pub fn oracle(kind: ProblemKind, p: &[f64], v: &Values) -> f64 {
    match kind {
        ProblemKind::LinearRegression => 2.0 * p[0] + 1.0,
        ProblemKind::QuadraticRegression => 2.0 * p[0] * p[0] - p[0] + 1.0,
        ProblemKind::FourierSmoothing => {
            let (a, b, w, wb) = fourier_constants();
            a * ((w * p[0]).sin() - b * (wb * p[0]).sin())
        }
        ProblemKind::SpringMass => {
            let (w, wb, f0) = (v.get("omega"), v.get("omega_bar"), v.get("F0"));
            let beta = wb / w;
            f0 / (w * w - wb * wb) * ((wb * p[0]).sin() - beta * (w * p[0]).sin())
        }
        ProblemKind::Membrane => {
            let freq = PI * (2.0 * v.get("c")).sqrt();
            (PI * p[0]).sin() * (PI * p[1]).sin() * (freq * p[2]).cos()
        }
        ProblemKind::Plate => {
            let freq = plate_frequency(v.get("D_hat"));
            v.get("amplitude") * (PI * p[0]).sin() * (PI * p[1]).sin() * (freq * p[2]).cos()
        }
        ProblemKind::Laplace => p[0] * p[0] - p[1] * p[1],
    }
}

/// Gradient of the Laplace solution `x^2 - y^2`.
pub fn laplace_gradient(p: &[f64]) -> [f64; 2] {
    [2.0 * p[0], -2.0 * p[1]]
}
