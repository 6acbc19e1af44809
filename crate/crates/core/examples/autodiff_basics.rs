//! Build a small graph, back-propagate, and check the gradient against
//! central differences.
//!
//! ```bash
//! cargo run --release --example autodiff_basics
//! ```

use rvqlab::autodiff::{grad_check, Graph, Tensor};

fn main() -> rvqlab::Result<()> {
    let w = Tensor::matrix(3, 2, vec![0.5, -1.0, 0.25, 2.0, -0.75, 1.5])?;

    // loss = mean(relu(x W))
    let mut g = Graph::new();
    let x = g.leaf(Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 0.3, 0.8, -1.1])?)?;
    let wv = g.leaf(w.clone())?;
    let h = g.matmul(x, wv)?;
    let r = g.relu(h)?;
    let loss = g.mean(r)?;
    let grads = g.backward(loss)?;
    println!("loss {:.6}", g.value(loss).item());
    println!("dloss/dx {:?}", grads.wrt(x).data());
    println!("dloss/dW {:?}", grads.wrt(wv).data());

    let point = Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 0.3, 0.8, -1.1])?;
    let err = grad_check(
        |g, x| {
            let wv = g.leaf(w.clone())?;
            let h = g.matmul(x, wv)?;
            let s = g.log_softmax(h)?;
            g.sum(s)
        },
        &point,
        1e-5,
    )?;
    println!("log_softmax max relative error vs finite differences: {err:.2e}");
    Ok(())
}
