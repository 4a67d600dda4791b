use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unif(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// Random SEM on `v` variables with a hidden causal order.
pub fn random_sem(seed: u64, v: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..v).collect();
    perm.shuffle(&mut rng);
    let mut b = DMatrix::zeros(v, v);
    for a in 0..v {
        for c in a + 1..v {
            if rng.random::<f64>() < 0.5 {
                let w = rng.random_range(0.5..1.5);
                b[(perm[a], perm[c])] = if rng.random::<bool>() { w } else { -w };
            }
        }
    }
    let scale: Vec<f64> = (0..v).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut x = DMatrix::zeros(n, v);
    for r in 0..n {
        for &j in &perm {
            let parents: f64 = (0..v).map(|i| b[(i, j)] * x[(r, i)]).sum();
            x[(r, j)] = parents + scale[j] * unif(&mut rng);
        }
    }
    (x, b)
}

pub fn respects(order: &[usize], b: &DMatrix<f64>) -> bool {
    let mut pos = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    (0..b.nrows()).all(|i| (0..b.ncols()).all(|j| b[(i, j)] == 0.0 || pos[i] < pos[j]))
}
