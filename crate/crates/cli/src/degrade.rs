//! Artificial degradations: random sample loss and compact gaps.

use nmf_inpaint::GapMask;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Total number of rejected gap placements tolerated before giving up.
pub const MAX_REJECTIONS: usize = 10_000;

/// A run of consecutive missing samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub start: usize,
    pub len: usize,
}

/// Drop exactly `round(fraction * len)` samples, uniformly without replacement.
pub fn random_drop(len: usize, fraction: f64, seed: u64) -> Result<GapMask> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::InvalidSpec(format!(
            "drop fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let count = (fraction * len as f64).round() as usize;
    if count >= len {
        return Err(CliError::InvalidSpec(format!(
            "dropping {count} of {len} samples leaves nothing observed"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let missing = sample(&mut rng, len, count).into_vec();
    Ok(GapMask::from_unsorted(missing, len)?)
}

/// Number of samples in `ms` milliseconds at `rate`, rounded.
pub fn ms_to_samples(ms: f64, rate: u32) -> usize {
    (ms * rate as f64 / 1000.0).round() as usize
}

/// Place `count` gaps of `gap_len` samples with at least `min_context`
/// observed samples between gaps and at both ends of the signal.
///
/// Starts are drawn uniformly over the admissible range and rejected when
/// they violate the spacing, up to [`MAX_REJECTIONS`] rejections in total.
/// Gaps are returned sorted by start.
pub fn compact_gaps(
    len: usize,
    count: usize,
    gap_len: usize,
    min_context: usize,
    seed: u64,
) -> Result<(GapMask, Vec<Gap>)> {
    if count == 0 || gap_len == 0 {
        return Err(CliError::InvalidSpec(
            "gap count and gap length must be positive".into(),
        ));
    }
    let needed = count * gap_len + (count + 1) * min_context;
    if needed > len {
        return Err(CliError::InvalidSpec(format!(
            "{count} gaps of {gap_len} samples with context {min_context} need {needed} samples, signal has {len}"
        )));
    }
    // admissible starts: [min_context, len - min_context - gap_len]
    let lo = min_context;
    let hi = len - min_context - gap_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaps: Vec<Gap> = Vec::with_capacity(count);
    let mut rejections = 0usize;
    while gaps.len() < count {
        let start = rng.random_range(lo..=hi);
        let clear = gaps.iter().all(|g| {
            start + gap_len + min_context <= g.start || g.start + g.len + min_context <= start
        });
        if clear {
            gaps.push(Gap {
                start,
                len: gap_len,
            });
        } else {
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(CliError::InvalidSpec(format!(
                    "could not place {count} gaps of {gap_len} samples with context {min_context} \
                     after {MAX_REJECTIONS} rejections"
                )));
            }
        }
    }
    gaps.sort_by_key(|g| g.start);
    let missing = gaps.iter().flat_map(|g| g.start..g.start + g.len).collect();
    Ok((GapMask::new(missing, len)?, gaps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_drop_counts_exactly() {
        let m = random_drop(1000, 0.6, 3).unwrap();
        assert_eq!(m.num_missing(), 600);
        assert_eq!(m, random_drop(1000, 0.6, 3).unwrap());
        assert_ne!(m, random_drop(1000, 0.6, 4).unwrap());
        assert!(random_drop(10, 1.0, 0).is_err());
        assert!(random_drop(10, 0.0, 0).is_err());
    }

    #[test]
    fn twenty_ms_gaps_at_44k1() {
        let gap = ms_to_samples(20.0, 44_100);
        assert_eq!(gap, 882);
        let (mask, gaps) =
            compact_gaps(44_100 * 5, 10, gap, ms_to_samples(20.0, 44_100), 1).unwrap();
        assert_eq!(gaps.len(), 10);
        assert_eq!(mask.num_missing(), 8820);
        for g in &gaps {
            assert!((g.start..g.start + g.len).all(|i| mask.is_missing(i)));
        }
        for pair in gaps.windows(2) {
            assert!(pair[0].start + pair[0].len + 882 <= pair[1].start);
        }
    }

    #[test]
    fn infeasible_layout_is_rejected() {
        assert_eq!(compact_gaps(100, 5, 20, 1, 0).unwrap_err().exit_code(), 2);
        // fits in principle but only in one tight arrangement: rejection budget runs out
        let err = compact_gaps(65, 3, 20, 1, 0).unwrap_err();
        assert!(err.to_string().contains("rejections"));
    }
}
