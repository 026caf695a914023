//! Seeded inputs shared by the pipeline benchmarks.

use abusedet::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` distinct lowercase words of 4 to 11 letters.
pub fn random_words(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = std::collections::BTreeSet::new();
    while words.len() < n {
        let len = rng.gen_range(4..12);
        words.insert((0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect::<String>());
    }
    words.into_iter().collect()
}

/// Two Gaussian-ish clouds in `d` dimensions, one per label.
pub fn separable_rows(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let abuse = i % 3 == 0;
            let shift = if abuse { 0.8 } else { -0.4 };
            let row = (0..d).map(|_| shift + rng.gen_range(-1.0..1.0)).collect();
            (row, Label::from_bool(abuse))
        })
        .unzip()
}
