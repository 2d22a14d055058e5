//! Block-parallel map with a sequential fallback.
//!
//! Work is always split into the same fixed blocks and results come back in
//! block order, so reductions over the returned vector are bit-identical
//! whichever mode runs them.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Fans blocks out over the rayon pool. Falls back to sequential when
    /// the crate is built without the `parallel` feature.
    Parallel,
}

impl Parallelism {
    pub fn is_available(self) -> bool {
        match self {
            Parallelism::Sequential => true,
            Parallelism::Parallel => cfg!(feature = "parallel"),
        }
    }
}

/// Runs `f(workspace, block)` for every block in `0..n_blocks`. Each worker
/// creates its own workspace with `init`.
pub fn map_blocks<W, T, I, F>(n_blocks: usize, mode: Parallelism, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode == Parallelism::Parallel && n_blocks > 1 {
            return (0..n_blocks).into_par_iter().map_init(&init, &f).collect();
        }
    }
    let _ = mode;
    let mut ws = init();
    (0..n_blocks).map(|b| f(&mut ws, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_in_order() {
        let seq = map_blocks(100, Parallelism::Sequential, || 0u64, |_, b| b * b);
        let par = map_blocks(100, Parallelism::Parallel, || 0u64, |_, b| b * b);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }
}
