//! Seeded random draws used by the property suites and synthetic streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::scoring::Forecast;

/// Deterministic generator for sample `index` of a suite seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw from the simplex (Dirichlet(1, ..., 1)).
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Forecast {
    loop {
        let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && draws.iter().all(|d| *d > 0.0) {
            return Forecast::from_mass(draws);
        }
    }
}

/// Uniform weight in `(0, 1]`.
pub fn weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Random point of the weight simplex over `m` experts.
pub fn weight_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    dirichlet(rng, m).into_inner()
}

/// Random outcome index.
pub fn outcome<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Draws an outcome from `p`.
pub fn draw_from<R: Rng + ?Sized>(rng: &mut R, p: &Forecast) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, x) in p.probs().iter().enumerate() {
        acc += x;
        if u < acc {
            return j;
        }
    }
    p.len() - 1
}
