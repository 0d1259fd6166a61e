use crate::ndcore::Rng;

/// i.i.d. uniform(0, 1) scores from the seeded stream.
pub fn random_score(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..len).map(|_| rng.uniform()).collect()
}
