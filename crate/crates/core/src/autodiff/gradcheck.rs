use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{invalid, Result};

/// Compare the reverse-mode gradient of a scalar function against central
/// differences. Returns `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`.
///
/// `f` receives a fresh graph and the leaf holding the evaluation point and
/// must return a scalar node.
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let eval = |t: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(t)?;
        let y = f(&mut g, x)?;
        let v = g.value(y);
        if v.len() != 1 {
            return Err(invalid(format!("grad_check needs a scalar, got {:?}", v.shape())));
        }
        Ok(v.item())
    };

    let mut g = Graph::new();
    let x = g.leaf(point.clone())?;
    let y = f(&mut g, x)?;
    let analytic = g.backward(y)?.wrt(x).clone();

    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += eps;
        let mut minus = point.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
