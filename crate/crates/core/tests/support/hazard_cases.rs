use hazlingam_core::data::{Dataset, TransitionObservation, N_STATES};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_dataset(rng: &mut ChaCha8Rng, n_pumps: usize, p: usize) -> Dataset {
    let n_obs = rng.random_range(1..25);
    let obs = (0..n_obs)
        .map(|_| TransitionObservation {
            pump_index: rng.random_range(0..n_pumps),
            state_index: rng.random_range(1..N_STATES as u8),
            delta_t: rng.random_range(1.0..365.0),
            y: rng.random(),
            x: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
        })
        .collect();
    Dataset::new(obs, n_pumps, N_STATES, p).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    for v in theta.iter_mut().take(N_STATES) {
        *v = rng.random_range(-7.0..-2.0);
    }
    theta
}
