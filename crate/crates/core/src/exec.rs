//! Order-preserving data-parallel helpers.
//!
//! Every parallel map here collects results in input order, so reductions
//! performed afterwards are identical to the sequential path bit for bit.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces the sequential path at runtime even when the `parallel` feature is on.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_seq(items, f)
}

/// Maps `f` over `items`, in parallel when enabled.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if is_parallel() {
        map_par(items, f)
    } else {
        map_seq(items, f)
    }
}

/// Maps `f` over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(&idx, |&i| f(i))
}

/// Applies a row-batch transform in chunks of `chunk` rows and stacks the results.
pub fn map_row_chunks<F>(x: ArrayView2<f64>, chunk: usize, f: F) -> Array2<f64>
where
    F: Fn(ArrayView2<f64>) -> Array2<f64> + Sync + Send,
{
    let n = x.nrows();
    let chunk = chunk.max(1);
    if n <= chunk {
        return f(x);
    }
    let parts = map_range(n.div_ceil(chunk), |c| f(x.slice(s![c * chunk..((c + 1) * chunk).min(n), ..])));
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).expect("chunks share a column count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map_seq(&v, |x| x * x + 1);
        let b = map_par(&v, |x| x * x + 1);
        assert_eq!(a, b);
        assert_eq!(map_range(5, |i| i * 2), vec![0, 2, 4, 6, 8]);
    }
}
