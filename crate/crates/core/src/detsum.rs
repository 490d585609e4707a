//! Deterministic reductions.
//!
//! Quadrature sums are accumulated blockwise: fixed-size blocks are summed
//! sequentially, block results are combined by a pairwise tree in block
//! order. Because the block layout does not depend on the scheduler, the
//! result is bit-identical for any thread count.

use rayon::prelude::*;

/// Block size for parallel reductions. Fixed so results do not depend on
/// the number of worker threads.
const BLOCK: usize = 4096;

/// Pairwise tree sum of a slice.
pub fn sum_pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    sum_pairwise(&xs[..mid]) + sum_pairwise(&xs[mid..])
}

/// Deterministic, optionally parallel `sum(f(item))` over a slice.
pub fn map_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    if items.len() <= BLOCK {
        let partial: Vec<f64> = items.iter().map(&f).collect();
        return sum_pairwise(&partial);
    }
    let blocks: Vec<f64> = items
        .par_chunks(BLOCK)
        .map(|chunk| {
            let partial: Vec<f64> = chunk.iter().map(&f).collect();
            sum_pairwise(&partial)
        })
        .collect();
    sum_pairwise(&blocks)
}

/// Deterministic, optionally parallel scatter-accumulate: each item adds
/// into a dense accumulator of length `len`; block accumulators are merged
/// componentwise by a pairwise tree in block order.
pub fn map_accumulate<T: Sync>(
    items: &[T],
    len: usize,
    f: impl Fn(&T, &mut [f64]) + Sync,
) -> Vec<f64> {
    if items.len() <= BLOCK {
        let mut acc = vec![0.0; len];
        for it in items {
            f(it, &mut acc);
        }
        return acc;
    }
    let blocks: Vec<Vec<f64>> = items
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = vec![0.0; len];
            for it in chunk {
                f(it, &mut acc);
            }
            acc
        })
        .collect();
    merge_tree(&blocks, len)
}

fn merge_tree(blocks: &[Vec<f64>], len: usize) -> Vec<f64> {
    match blocks.len() {
        0 => vec![0.0; len],
        1 => blocks[0].clone(),
        n => {
            let mid = n / 2;
            let a = merge_tree(&blocks[..mid], len);
            let b = merge_tree(&blocks[mid..], len);
            a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((sum_pairwise(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn map_sum_deterministic_across_sizes() {
        let xs: Vec<f64> = (0..20000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = map_sum(&xs, |&x| x * x);
        let b = map_sum(&xs, |&x| x * x);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn accumulate_matches_sequential() {
        let items: Vec<usize> = (0..10000).collect();
        let acc = map_accumulate(&items, 7, |&i, acc| {
            acc[i % 7] += (i as f64).sqrt();
        });
        let mut seq = vec![0.0; 7];
        for i in 0..10000usize {
            seq[i % 7] += (i as f64).sqrt();
        }
        for k in 0..7 {
            assert!((acc[k] - seq[k]).abs() < 1e-6 * seq[k].abs().max(1.0));
        }
    }
}
