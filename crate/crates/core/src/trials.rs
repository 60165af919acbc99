use alloc::vec::Vec;

/// Runs `f` for every index in `0..n`, returning results in index order.
///
/// With the `parallel` feature the indices are spread over the current rayon
/// pool; each call only depends on its index, so the output is identical.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
