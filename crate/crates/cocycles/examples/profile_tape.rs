// Scratch micro-profile of the taped MLP conditioner path.
use std::time::Instant;

use cocycles::bijectors::*;
use cocycles::numerics::{Scalar, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let spec = StackSpec {
        outcome_dim: 2,
        context_dim: 1,
        layers: vec![LayerSpec::new(
            LayerKind::MaskedAffineAutoregressive,
            ConditionerSpec::mlp(),
        )],
    };
    let stack = BijectorStack::new(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pv = stack.init_params(&mut rng);

    let tape = Tape::new();
    let evals = 1024;
    let reps = 20;
    let mut total_fwd = 0.0;
    let mut total_bwd = 0.0;
    let mut nodes = 0usize;
    for _ in 0..reps {
        tape.clear();
        let pvars = tape.inputs(pv.flat());
        let t0 = Instant::now();
        let mut outs = Vec::new();
        for k in 0..evals {
            let u = [tape.constant(0.3 + k as f64 * 1e-4), tape.constant(-0.2)];
            let out = stack.forward(&pvars, &[0.5], &u);
            outs.push((out[0], 1.0));
            outs.push((out[1], 1.0));
        }
        total_fwd += t0.elapsed().as_secs_f64();
        nodes = tape.len();
        let t0 = Instant::now();
        let adj = tape.adjoints_seeded(&outs);
        total_bwd += t0.elapsed().as_secs_f64();
        std::hint::black_box(adj[0]);
    }
    println!(
        "nodes/step={nodes} fwd={:.1}ms bwd={:.1}ms per step ({:.0}ns/node fwd)",
        total_fwd / reps as f64 * 1e3,
        total_bwd / reps as f64 * 1e3,
        total_fwd / reps as f64 / nodes as f64 * 1e9,
    );
    // f64 baseline
    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..reps {
        for k in 0..evals {
            let u = [0.3 + k as f64 * 1e-4, -0.2];
            let out = stack.forward::<f64>(pv.flat(), &[0.5], &u);
            acc += out[1];
        }
    }
    println!(
        "f64 path: {:.2}ms/step (acc {acc:.1})",
        t0.elapsed().as_secs_f64() / reps as f64 * 1e3
    );
}
