use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CorpusRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpotCheckError {
    #[error("fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpotCheckEntry {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub som_image: Option<String>,
}

/// Examples picked for manual review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheckManifest {
    pub seed: u64,
    pub fraction: f64,
    pub total: usize,
    pub entries: Vec<SpotCheckEntry>,
}

/// Draws `round(fraction * n)` records (at least one for a non-empty corpus)
/// without replacement. Entries keep corpus order.
pub fn spot_check_sample(
    records: &[CorpusRecord],
    fraction: f64,
    seed: u64,
) -> Result<SpotCheckManifest, SpotCheckError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SpotCheckError::InvalidFraction(fraction));
    }
    let n = records.len();
    let k = if n == 0 {
        0
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n)
    };
    let mut picked = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec();
    picked.sort_unstable();
    Ok(SpotCheckManifest {
        seed,
        fraction,
        total: n,
        entries: picked
            .into_iter()
            .map(|i| SpotCheckEntry {
                example_id: records[i].example_id.clone(),
                som_image: records[i].som_image.clone(),
            })
            .collect(),
    })
}
