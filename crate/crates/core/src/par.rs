//! Node-parallel helpers.
//!
//! With the `parallel` feature these fan out over rayon; without it they are
//! plain loops. Either way every output slot is written by exactly one closure
//! call, so results are bit-identical across thread counts. Reductions are
//! never done here: callers collect per-node values and sum them in order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f` at every index in `0..n` and collect the results in order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Fill `out` in fixed-size chunks; chunk `i` is `out[i*width..(i+1)*width]`.
pub fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(width > 0 && out.len() % width == 0);
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Map over a slice of independent jobs, keeping their order.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
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

/// Ordered sum; kept sequential so the rounding never depends on scheduling.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}
