use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    /// Sample Pearson coefficient.
    pub r: f64,
    /// Two-sided permutation p-value, counting the identity permutation.
    pub p: f64,
    pub permutations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrelationError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series need at least 3 values, got {0}")]
    TooShort(usize),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series contains a non-finite value")]
    NonFinite,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, CorrelationError> {
    if a.len() != b.len() {
        return Err(CorrelationError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(CorrelationError::TooShort(a.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    // sqrt(s * s) == s exactly; keeps r = ±1 exact for (anti)identical series
    let denom = if saa == sbb { saa } else { (saa * sbb).sqrt() };
    Ok((sab / denom).clamp(-1.0, 1.0))
}

/// Pearson r with a permutation p-value: the fraction of `permutations`
/// shuffles of `b`, plus the identity, whose |r| reaches the observed |r|.
///
/// Shuffles are Fisher-Yates draws from ChaCha8 seeded with `seed`.
pub fn correlate(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> Result<Correlation, CorrelationError> {
    let r = pearson(a, b)?;
    let observed = r.abs() * (1.0 - 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = b.to_vec();
    let mut hits = 1usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if pearson(a, &shuffled)?.abs() >= observed {
            hits += 1;
        }
    }
    Ok(Correlation {
        r,
        p: hits as f64 / (permutations + 1) as f64,
        permutations,
    })
}
