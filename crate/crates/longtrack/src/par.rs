//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`map_collect`] fans out over
//! rayon's thread pool; without it the same call runs sequentially. Output
//! order always matches input order, so downstream reductions (argmax with
//! tie-breaking, gradient sums) are deterministic under either path.
//! [`map_collect_seq`] is always sequential; the benches use it to compare
//! the two paths on identical inputs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential twin of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n` in parallel when enabled, preserving index order.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_collect(&xs, |x| x * x + 1);
        let b = map_collect_seq(&xs, |x| x * x + 1);
        assert_eq!(a, b);
    }

    #[test]
    fn index_map_preserves_order() {
        let v = map_indices(100, |i| i as i64 - 50);
        assert_eq!(v[0], -50);
        assert_eq!(v[99], 49);
    }
}
