use indexmap::IndexMap;

use super::DensityError;
use crate::formula::{NlExpr, NlFun};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Slot(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, usize),
    Exp(usize),
    Log(usize),
}

/// A non-linear expression flattened into evaluation order, with reverse
/// sweeps for derivatives with respect to its identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct NlTape {
    ops: Vec<Op>,
    slots: Vec<String>,
}

impl NlTape {
    pub fn compile(expr: &NlExpr) -> NlTape {
        let mut tape = NlTape {
            ops: Vec::new(),
            slots: expr.identifiers(),
        };
        tape.emit(expr);
        tape
    }

    fn emit(&mut self, e: &NlExpr) -> usize {
        let op = match e {
            NlExpr::Literal(v) => Op::Const(*v),
            NlExpr::Ident(s) => Op::Slot(
                self.slots
                    .iter()
                    .position(|x| x == s)
                    .expect("identifier listed"),
            ),
            NlExpr::Neg(a) => Op::Neg(self.emit(a)),
            NlExpr::Add(a, b) => Op::Add(self.emit(a), self.emit(b)),
            NlExpr::Sub(a, b) => Op::Sub(self.emit(a), self.emit(b)),
            NlExpr::Mul(a, b) => Op::Mul(self.emit(a), self.emit(b)),
            NlExpr::Div(a, b) => Op::Div(self.emit(a), self.emit(b)),
            NlExpr::Pow(a, b) => Op::Pow(self.emit(a), self.emit(b)),
            NlExpr::Call(NlFun::Exp, a) => Op::Exp(self.emit(a)),
            NlExpr::Call(NlFun::Log, a) => Op::Log(self.emit(a)),
        };
        self.ops.push(op);
        self.ops.len() - 1
    }

    /// Identifiers in slot order.
    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Evaluates the expression; `vals` receives every intermediate value.
    pub fn forward(&self, inputs: &[f64], vals: &mut [f64]) -> Result<f64, String> {
        for (j, op) in self.ops.iter().enumerate() {
            vals[j] = match *op {
                Op::Const(v) => v,
                Op::Slot(s) => inputs[s],
                Op::Neg(a) => -vals[a],
                Op::Add(a, b) => vals[a] + vals[b],
                Op::Sub(a, b) => vals[a] - vals[b],
                Op::Mul(a, b) => vals[a] * vals[b],
                Op::Div(a, b) => {
                    if vals[b] == 0.0 {
                        return Err("division by zero".into());
                    }
                    vals[a] / vals[b]
                }
                Op::Pow(a, b) => pow(vals[a], vals[b])?,
                Op::Exp(a) => vals[a].exp(),
                Op::Log(a) => {
                    if vals[a] <= 0.0 {
                        return Err(format!("log of non-positive value {}", vals[a]));
                    }
                    vals[a].ln()
                }
            };
        }
        Ok(*vals.last().expect("non-empty tape"))
    }

    /// Adds `seed · ∂f/∂input` to `d_inputs` after a successful [`NlTape::forward`].
    pub fn backward(&self, vals: &[f64], seed: f64, adj: &mut [f64], d_inputs: &mut [f64]) {
        adj.fill(0.0);
        let last = self.ops.len() - 1;
        adj[last] = seed;
        for j in (0..self.ops.len()).rev() {
            let g = adj[j];
            if g == 0.0 {
                continue;
            }
            match self.ops[j] {
                Op::Const(_) => {}
                Op::Slot(s) => d_inputs[s] += g,
                Op::Neg(a) => adj[a] -= g,
                Op::Add(a, b) => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Op::Sub(a, b) => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Op::Mul(a, b) => {
                    adj[a] += g * vals[b];
                    adj[b] += g * vals[a];
                }
                Op::Div(a, b) => {
                    adj[a] += g / vals[b];
                    adj[b] -= g * vals[j] / vals[b];
                }
                Op::Pow(a, b) => {
                    let (x, y) = (vals[a], vals[b]);
                    if x > 0.0 {
                        adj[a] += g * y * vals[j] / x;
                        adj[b] += g * vals[j] * x.ln();
                    } else {
                        adj[a] += g * y * x.powi(y as i32 - 1);
                    }
                }
                Op::Exp(a) => adj[a] += g * vals[j],
                Op::Log(a) => adj[a] += g / vals[a],
            }
        }
    }
}

/// `a^b` as `exp(b · ln a)` for positive bases; integer powers otherwise.
fn pow(a: f64, b: f64) -> Result<f64, String> {
    if a > 0.0 {
        return Ok((b * a.ln()).exp());
    }
    if b.fract() != 0.0 || !b.is_finite() {
        return Err(format!("base {a} raised to non-integer power {b}"));
    }
    if a == 0.0 && b < 0.0 {
        return Err("division by zero in power".into());
    }
    Ok(a.powi(b as i32))
}

/// Row-wise value of a non-linear predictor. Identifiers are looked up in
/// `nlpars` first, then in `covariates`.
pub fn eval_nl(
    expr: &NlExpr,
    covariates: &IndexMap<String, Vec<f64>>,
    nlpars: &IndexMap<String, Vec<f64>>,
) -> Result<Vec<f64>, DensityError> {
    let tape = NlTape::compile(expr);
    let columns: Vec<&Vec<f64>> = tape
        .slots()
        .iter()
        .map(|s| {
            nlpars
                .get(s)
                .or_else(|| covariates.get(s))
                .ok_or_else(|| DensityError::Unbound(s.clone()))
        })
        .collect::<Result<_, _>>()?;
    let n = columns.first().map_or(1, |c| c.len());
    let mut vals = vec![0.0; tape.len()];
    let mut inputs = vec![0.0; columns.len()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        for (x, c) in inputs.iter_mut().zip(&columns) {
            *x = c[i];
        }
        let v = tape
            .forward(&inputs, &mut vals)
            .map_err(|message| DensityError::Domain {
                row: i + 1,
                message,
            })?;
        out.push(v);
    }
    Ok(out)
}
