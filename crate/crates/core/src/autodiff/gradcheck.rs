use rayon::prelude::*;
use serde::Serialize;

use super::{Fault, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Worst-case agreement for one parameter tensor.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub index: usize,
    pub elements: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub h: f64,
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err < self.tol)
    }
}

/// Compares reverse-mode gradients of the scalar built by `f` against central
/// finite differences with step `h`.
///
/// `f` receives a fresh graph and one leaf per entry of `params`, and must
/// return the scalar loss. It is evaluated `2 * Σ|params|` extra times, in
/// parallel, so it has to be deterministic.
pub fn grad_check<F>(params: &[Tensor], h: f64, tol: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var> + Sync,
{
    grad_check_with_fault(params, h, tol, None, f)
}

#[doc(hidden)]
pub fn grad_check_with_fault<F>(
    params: &[Tensor],
    h: f64,
    tol: f64,
    fault: Option<Fault>,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var> + Sync,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let mut graph = Graph::with_fault(fault);
    let vars: Vec<Var> = params.iter().map(|p| graph.param(p.clone())).collect();
    let loss = f(&mut graph, &vars)?;
    let mut grads = graph.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.take(v).expect("param gradient")).collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|p| g.param(p.clone())).collect();
        let loss = f(&mut g, &vars)?;
        Ok(g.value(loss).get(0, 0))
    };

    let coords: Vec<(usize, usize)> =
        params.iter().enumerate().flat_map(|(p, t)| (0..t.len()).map(move |e| (p, e))).collect();
    let numeric: Vec<f64> = coords
        .par_iter()
        .map(|&(p, e)| {
            let mut local = params.to_vec();
            let base = local[p].data()[e];
            local[p].data_mut()[e] = base + h;
            let plus = eval(&local)?;
            local[p].data_mut()[e] = base - h;
            let minus = eval(&local)?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect::<Result<_>>()?;

    let mut checks: Vec<ParamCheck> = params
        .iter()
        .enumerate()
        .map(|(index, t)| ParamCheck {
            index,
            elements: t.len(),
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst_element: 0,
            analytic: 0.0,
            numeric: 0.0,
        })
        .collect();
    for (&(p, e), &n) in coords.iter().zip(&numeric) {
        let a = analytic[p].data()[e];
        let rel = relative_error(a, n);
        let check = &mut checks[p];
        check.max_abs_err = check.max_abs_err.max((a - n).abs());
        if rel > check.max_rel_err || (e == 0 && check.max_rel_err == 0.0) {
            check.max_rel_err = rel;
            check.worst_element = e;
            check.analytic = a;
            check.numeric = n;
        }
    }
    Ok(GradCheckReport { h, tol, params: checks })
}
