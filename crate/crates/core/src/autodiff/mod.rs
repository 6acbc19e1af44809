//! Minimal reverse-mode automatic differentiation in double precision.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Axis, Gradients, Graph, Var, LOG_FLOOR};
pub use params::{BoundParams, Param, ParameterSet};
pub use tensor::{gemm, Tensor};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::signal::{sqrt_hann, FrameLayout};

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    /// Push relu inputs away from the kink at zero.
    fn nudge(mut t: Tensor) -> Tensor {
        for v in t.data_mut() {
            if v.abs() < 0.05 {
                *v = if *v < 0.0 { -0.05 } else { 0.05 };
            }
        }
        t
    }

    #[test]
    fn relu_values_and_mask() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![-1.0, 0.0, 2.0])).unwrap();
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
        let s = g.sum(y).unwrap();
        assert_eq!(g.backward(s).unwrap().wrt(x).data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn square_derivative() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0)).unwrap();
        let y = g.square(x).unwrap();
        assert_eq!(g.backward(y).unwrap().wrt(x).item(), 6.0);
    }

    #[test]
    fn log_softmax_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = Graph::new();
        let x = g.leaf(rand_tensor(&mut rng, &[6, 11], -5.0, 5.0)).unwrap();
        let y = g.log_softmax(x).unwrap();
        for r in 0..6 {
            let s: f64 = g.value(y).row(r).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, -2.0, 3.0, 0.5, 9.0])).unwrap();
        let s = g.sum(x).unwrap();
        assert_eq!(g.backward(s).unwrap().wrt(x).data(), &[1.0; 5]);
    }

    #[test]
    fn disconnected_leaf_gets_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
        let z = g.leaf(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap()).unwrap();
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(z), &Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.leaf(Tensor::zeros(&[2, 3])).unwrap();
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("matmul"), "{msg}");
        let c = g.leaf(Tensor::zeros(&[4])).unwrap();
        assert!(g.add(a, c).is_err());
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(1000.0)).unwrap();
        assert!(g.exp(x).is_err());
        assert!(g.leaf(Tensor::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn log_clamps_small_inputs() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.0, -1.0, 1.0])).unwrap();
        let y = g.log(x).unwrap();
        assert_eq!(g.value(y).data()[0], LOG_FLOOR.ln());
        assert_eq!(g.value(y).data()[1], LOG_FLOOR.ln());
        let s = g.sum(y).unwrap();
        assert_eq!(g.backward(s).unwrap().wrt(x).data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn mean_relu_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Arc::new(rand_tensor(&mut rng, &[6, 4], -1.0, 1.0));
        let x0 = rand_tensor(&mut rng, &[3, 6], -1.0, 1.0);
        let f = |g: &mut Graph, x: Var| {
            let h = g.fixed_matmul(x, w.clone())?;
            let r = g.relu(h)?;
            g.mean(r)
        };
        let mut g = Graph::new();
        let xv = g.leaf(x0.clone()).unwrap();
        let h = g.fixed_matmul(xv, w.clone()).unwrap();
        assert!(g.value(h).data().iter().all(|v| v.abs() > 1e-3));
        assert!(grad_check(f, &x0, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn quadratic_form_gradient_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&mut rng, &[5, 5], -1.0, 1.0);
        let sym: Vec<f64> = (0..25).map(|k| {
            let (i, j) = (k / 5, k % 5);
            0.5 * (a.data()[i * 5 + j] + a.data()[j * 5 + i])
        }).collect();
        let a = Arc::new(Tensor::matrix(5, 5, sym).unwrap());
        let x0 = rand_tensor(&mut rng, &[1, 5], -1.0, 1.0);
        let f = |g: &mut Graph, x: Var| {
            let ax = g.fixed_matmul(x, a.clone())?;
            let p = g.mul(ax, x)?;
            g.sum(p)
        };
        assert!(grad_check(f, &x0, 1e-5).unwrap() <= 1e-9);

        // Exact oracle 2Ax.
        let mut g = Graph::new();
        let x = g.leaf(x0.clone()).unwrap();
        let y = f(&mut g, x).unwrap();
        let grad = g.backward(y).unwrap().wrt(x).clone();
        for i in 0..5 {
            let want: f64 = 2.0 * (0..5).map(|j| a.data()[i * 5 + j] * x0.data()[j]).sum::<f64>();
            assert!((grad.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_pick_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = rand_tensor(&mut rng, &[3, 5], -2.0, 2.0);
        let pick = Arc::new({
            let mut t = Tensor::zeros(&[5, 1]);
            t.data_mut()[2] = 1.0;
            t
        });
        let f = |g: &mut Graph, x: Var| {
            let l = g.log_softmax(x)?;
            let p = g.fixed_matmul(l, pick.clone())?;
            g.sum(p)
        };
        assert!(grad_check(f, &x0, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x0 = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let f = |g: &mut Graph, _x: Var| g.leaf(Tensor::scalar(4.0));
        assert_eq!(grad_check(f, &x0, 1e-5).unwrap(), 0.0);
    }

    /// Every op, checked against central differences at 20 random points.
    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let x0 = nudge(rand_tensor(&mut rng, &[4, 6], -1.5, 1.5));
            let w = rand_tensor(&mut rng, &[6, 3], -1.0, 1.0);
            let m = Arc::new(rand_tensor(&mut rng, &[6, 6], -1.0, 1.0));
            let bias = rand_tensor(&mut rng, &[6], -1.0, 1.0);
            let weights = Arc::new(rand_tensor(&mut rng, &[4, 6], -1.0, 1.0));
            let cases: Vec<(&str, Box<dyn Fn(&mut Graph, Var) -> crate::Result<Var>>)> = vec![
                ("matmul", Box::new(|g, x| {
                    let wv = g.leaf(w.clone())?;
                    let y = g.matmul(x, wv)?;
                    let s = g.square(y)?;
                    g.sum(s)
                })),
                ("matmul_rhs", Box::new(|g, x| {
                    let a = g.leaf(weights.transpose()?)?;
                    let y = g.matmul(a, x)?;
                    let s = g.square(y)?;
                    g.sum(s)
                })),
                ("fixed_matmul", Box::new(|g, x| {
                    let y = g.fixed_matmul(x, m.clone())?;
                    let s = g.square(y)?;
                    g.mean(s)
                })),
                ("add_row", Box::new(|g, x| {
                    let b = g.leaf(bias.clone())?;
                    let y = g.add(x, b)?;
                    let s = g.square(y)?;
                    g.sum(s)
                })),
                ("mul_row", Box::new(|g, x| {
                    let b = g.leaf(bias.clone())?;
                    let y = g.mul(x, b)?;
                    let s = g.square(y)?;
                    g.sum(s)
                })),
                ("mul_self", Box::new(|g, x| {
                    let y = g.mul(x, x)?;
                    let c = g.leaf((*weights).clone())?;
                    let z = g.mul(y, c)?;
                    g.sum(z)
                })),
                ("relu", Box::new(|g, x| {
                    let y = g.relu(x)?;
                    let c = g.leaf((*weights).clone())?;
                    let z = g.mul(y, c)?;
                    g.sum(z)
                })),
                ("log", Box::new(|g, x| {
                    let s = g.square(x)?;
                    let s = g.add_const(s, 0.5)?;
                    let y = g.log(s)?;
                    g.sum(y)
                })),
                ("exp", Box::new(|g, x| {
                    let y = g.exp(x)?;
                    let c = g.leaf((*weights).clone())?;
                    let z = g.mul(y, c)?;
                    g.sum(z)
                })),
                ("scale", Box::new(|g, x| {
                    let y = g.scale(x, -2.5)?;
                    let s = g.square(y)?;
                    g.sum(s)
                })),
                ("slice_concat", Box::new(|g, x| {
                    let a = g.slice(x, Axis::Cols, 1, 3)?;
                    let b = g.slice(x, Axis::Rows, 0, 2)?;
                    let b = g.slice(b, Axis::Cols, 2, 3)?;
                    let c = g.concat(&[a, b], Axis::Rows)?;
                    let d = g.concat(&[c, c], Axis::Cols)?;
                    let s = g.square(d)?;
                    let s = g.exp(s)?;
                    g.sum(s)
                })),
                ("log_softmax", Box::new(|g, x| {
                    let y = g.log_softmax(x)?;
                    let c = g.leaf((*weights).clone())?;
                    let z = g.mul(y, c)?;
                    g.sum(z)
                })),
            ];
            for (name, f) in &cases {
                let err = grad_check(|g, x| f(g, x), &x0, 1e-5).unwrap();
                assert!(err <= 1e-6, "trial {trial} op {name}: {err}");
            }
        }
    }

    #[test]
    fn frame_op_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let len = 700;
        let layout = FrameLayout::analysis(len).unwrap();
        let win = Arc::new(sqrt_hann(layout.width));
        let weights = Arc::new(rand_tensor(&mut rng, &[layout.frames, layout.width], -1.0, 1.0));
        let x0 = rand_tensor(&mut rng, &[len], -1.0, 1.0);
        let f = |g: &mut Graph, x: Var| {
            let fr = g.frame(x, layout, win.clone())?;
            let sq = g.square(fr)?;
            let c = g.leaf((*weights).clone())?;
            let z = g.mul(sq, c)?;
            g.sum(z)
        };
        assert!(grad_check(f, &x0, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn backward_is_deterministic_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = nudge(rand_tensor(&mut rng, &[3, 4], -1.0, 1.0));
        let w = Arc::new(rand_tensor(&mut rng, &[4, 4], -1.0, 1.0));
        let f = |g: &mut Graph, x: Var| -> crate::Result<Var> {
            let h = g.fixed_matmul(x, w.clone())?;
            let r = g.relu(h)?;
            g.sum(r)
        };
        let h = |g: &mut Graph, x: Var| -> crate::Result<Var> {
            let s = g.square(x)?;
            g.mean(s)
        };
        let grad_of = |build: &dyn Fn(&mut Graph, Var) -> crate::Result<Var>| {
            let mut g = Graph::new();
            let x = g.leaf(x0.clone()).unwrap();
            let y = build(&mut g, x).unwrap();
            g.backward(y).unwrap().wrt(x).clone()
        };
        assert_eq!(grad_of(&f), grad_of(&f));

        let (a, b) = (1.75, -0.5);
        let combo = |g: &mut Graph, x: Var| -> crate::Result<Var> {
            let fv = f(g, x)?;
            let hv = h(g, x)?;
            let fa = g.scale(fv, a)?;
            let hb = g.scale(hv, b)?;
            g.add(fa, hb)
        };
        let gf = grad_of(&f);
        let gh = grad_of(&h);
        let gc = grad_of(&combo);
        for i in 0..gc.len() {
            let want = a * gf.data()[i] + b * gh.data()[i];
            assert!((gc.data()[i] - want).abs() <= 1e-12);
        }
    }
}
