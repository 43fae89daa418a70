//! Index-parallel maps with a sequential fallback.
//!
//! Every helper here produces output in index order, so results do not depend
//! on the thread schedule. Reductions are left to the caller and done
//! sequentially.

/// Below this many items the sequential path is used even with `parallel` on.
pub const MIN_PARALLEL_LEN: usize = 512;

/// Collects `f(i)` for `i in 0..n`.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= MIN_PARALLEL_LEN {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Applies `f(i, &mut out[i])` to every slot.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if out.len() >= MIN_PARALLEL_LEN {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
    }
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Whether the crate was built with the rayon backend.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
