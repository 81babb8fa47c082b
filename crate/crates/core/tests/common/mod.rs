#![allow(dead_code)]

use std::path::PathBuf;

use ioentropy::markov::build_transitions;
use ioentropy::{FlowMatrix, TransitionMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn demo_flows() -> FlowMatrix {
    FlowMatrix::from_rows(vec![
        vec![0.0, 2.0, 2.0],
        vec![1.0, 0.0, 1.0],
        vec![3.0, 1.0, 0.0],
    ])
    .unwrap()
}

pub fn demo_chain() -> TransitionMatrix {
    build_transitions(&demo_flows()).unwrap()
}

/// Random flow table on `n` sectors that is guaranteed irreducible: a
/// random Hamiltonian cycle plus each other edge with probability
/// `density`, weights uniform in [0.01, 1).
pub fn random_irreducible_flows(rng: &mut ChaCha8Rng, n: usize, density: f64) -> FlowMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut rows = vec![vec![0.0; n]; n];
    for w in 0..n {
        let (i, j) = (order[w], order[(w + 1) % n]);
        rows[i][j] = rng.gen_range(0.01..1.0);
    }
    for row in rows.iter_mut() {
        for cell in row.iter_mut() {
            if *cell == 0.0 && rng.gen_bool(density) {
                *cell = rng.gen_range(0.01..1.0);
            }
        }
    }
    FlowMatrix::from_rows(rows).unwrap()
}

pub fn random_irreducible_chain(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
    let density = rng.gen_range(0.0..1.0);
    build_transitions(&random_irreducible_flows(rng, n, density)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
