//! CTC loss on hand-made logits and greedy decoding of the best path.
//!
//! ```bash
//! cargo run --release --example ctc_decode
//! ```

use rvqlab::asr::{ctc_loss, greedy_decode, min_frames, NUM_CLASSES};
use rvqlab::autodiff::{Graph, Tensor};
use rvqlab::signal::TokenSequence;

fn main() -> rvqlab::Result<()> {
    // Five frames whose argmax path is [blank, 3, 3, blank, 5].
    let peaks = [0usize, 3, 3, 0, 5];
    let mut data = vec![0.0; peaks.len() * NUM_CLASSES];
    for (t, &k) in peaks.iter().enumerate() {
        data[t * NUM_CLASSES + k] = 4.0;
    }
    let logits = Tensor::matrix(peaks.len(), NUM_CLASSES, data)?;
    println!("greedy decode: {:?}", greedy_decode(&logits).ids());

    for target in [vec![3, 5], vec![3, 3, 5], vec![7]] {
        let target = TokenSequence::new(target)?;
        println!("target {:?} needs >= {} frames", target.ids(), min_frames(target.ids()));
        let mut g = Graph::new();
        let l = g.leaf(logits.clone())?;
        let loss = ctc_loss(&mut g, l, &target)?;
        let grads = g.backward(loss)?;
        let gnorm: f64 = grads.wrt(l).data().iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("  loss {:.4}, |dloss/dlogits| {gnorm:.4}", g.value(loss).item());
    }
    Ok(())
}
