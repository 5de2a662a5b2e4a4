//! Data-parallel ensemble helpers.
//!
//! All ensemble drivers map a member index to an outcome; outputs are
//! collected in index order, so results are identical whether the work runs
//! on rayon (feature `parallel`, default) or sequentially. The `_seq`
//! variants always run sequentially and exist so benchmarks can compare the
//! two paths in one build.

use crate::error::Result;

/// Derives an independent per-member seed from a base seed (splitmix64).
pub fn member_seed(base: u64, index: usize) -> u64 {
    let mut x = base ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    indexed_map_seq(n, f)
}

/// Sequential reference path.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn try_indexed_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_indexed_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    try_indexed_map_seq(n, f)
}

pub fn try_indexed_map_seq<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let par = indexed_map(100, |i| member_seed(42, i));
        let seq = indexed_map_seq(100, |i| member_seed(42, i));
        assert_eq!(par, seq);
    }

    #[test]
    fn member_seeds_are_spread() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| member_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
