//! Parallel/sequential sweep helper.

/// Map a function over inputs, in parallel when the `parallel` feature is on.
pub fn map_sweep<I, O, F>(inputs: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        inputs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        inputs.into_iter().map(f).collect()
    }
}
