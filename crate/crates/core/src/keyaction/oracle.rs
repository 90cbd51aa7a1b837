use crate::motion::HoiSequence;
use crate::{Error, Result};

use super::extract::{check_epsilon, SegmentEvaluator};
use super::{JointWeights, KeyActionSet};

/// Longest sequence accepted by the exhaustive oracle.
pub const ORACLE_MAX_FRAMES: usize = 30;

/// Smallest key set (first and last frame included) whose reconstruction stays
/// within `epsilon`, found by dynamic programming over all segments. Cubic in
/// the sequence length, so restricted to short sequences.
pub fn optimal_key_actions_oracle(
    seq: &HoiSequence,
    epsilon: f64,
    weights: &JointWeights,
) -> Result<KeyActionSet> {
    check_epsilon(epsilon)?;
    let n = seq.len();
    if n > ORACLE_MAX_FRAMES {
        return Err(Error::invalid(format!(
            "oracle limited to {ORACLE_MAX_FRAMES} frames, got {n}"
        )));
    }
    let eval = SegmentEvaluator::new(seq, weights)?;
    // best[b] = (key count, previous key) for the prefix ending with a key at b
    let mut best: Vec<(usize, usize)> = vec![(usize::MAX, 0); n];
    best[0] = (1, 0);
    for b in 1..n {
        for a in 0..b {
            if best[a].0 == usize::MAX || best[a].0 + 1 >= best[b].0 {
                continue;
            }
            if eval.interior_errors(a, b)?.iter().all(|&e| e <= epsilon) {
                best[b] = (best[a].0 + 1, a);
            }
        }
    }
    let mut indices = vec![n - 1];
    let mut cur = n - 1;
    while cur != 0 {
        cur = best[cur].1;
        indices.push(cur);
    }
    indices.reverse();
    KeyActionSet::from_indices(seq, indices)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{extract_key_actions, interpolate, reconstruction_error};
    use super::*;

    /// Enumerates every subset of interior frames in order of size.
    fn brute_force_min(seq: &HoiSequence, eps: f64, w: &JointWeights) -> usize {
        let n = seq.len();
        let interior = n - 2;
        let mut best = usize::MAX;
        for mask in 0u32..(1 << interior) {
            let size = mask.count_ones() as usize + 2;
            if size >= best {
                continue;
            }
            let mut idx = vec![0];
            idx.extend(
                (0..interior)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| i + 1),
            );
            idx.push(n - 1);
            let k = KeyActionSet::from_indices(seq, idx).unwrap();
            let r = reconstruction_error(seq, &interpolate(&k).unwrap(), w).unwrap();
            if r.max_error <= eps {
                best = size;
            }
        }
        best
    }

    #[test]
    fn dp_matches_brute_force() {
        for seed in 0..6 {
            let seq = random_sequence(100 + seed, 11, 5);
            let w = JointWeights::default_for(seq.skeleton());
            for eps in [0.02, 0.08, 0.2] {
                let dp = optimal_key_actions_oracle(&seq, eps, &w).unwrap();
                assert_eq!(
                    dp.len(),
                    brute_force_min(&seq, eps, &w),
                    "seed {seed} eps {eps}"
                );
                let r = reconstruction_error(&seq, &interpolate(&dp).unwrap(), &w).unwrap();
                assert!(r.max_error <= eps);
            }
        }
    }

    #[test]
    fn greedy_never_beats_optimum() {
        for seed in 0..10 {
            let seq = random_sequence(seed, 30, 6);
            let w = JointWeights::default_for(seq.skeleton());
            let opt = optimal_key_actions_oracle(&seq, 0.05, &w).unwrap();
            let greedy = extract_key_actions(&seq, 0.05, &w).unwrap();
            assert!(opt.len() <= greedy.len());
        }
    }

    #[test]
    fn refuses_long_sequences() {
        let seq = random_sequence(1, 31, 5);
        let w = JointWeights::default_for(seq.skeleton());
        assert!(optimal_key_actions_oracle(&seq, 0.05, &w).is_err());
    }
}
