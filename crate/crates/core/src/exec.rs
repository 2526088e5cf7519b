//! Sequential / data-parallel execution switch.
//!
//! Every batch entry point in the crate funnels through [`map`], so the two
//! paths produce identical output: results are always collected in input order
//! and reductions merge associatively.

/// How batch loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    /// Uses the rayon global pool. Without the `parallel` feature this behaves
    /// exactly like [`Mode::Sequential`].
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

impl Mode {
    /// True when this mode will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Mode::Parallel
    }
}

/// Applies `f` to every item and returns results in input order.
pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Mode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Folds chunks of `items` into partial accumulators with `fold`, then merges
/// them left to right with `merge`. `merge` must be associative for the two
/// modes to agree.
pub fn fold_merge<T, A, I, F, M>(mode: Mode, items: &[T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Mode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().fold(&init, &fold).reduce(&init, &merge);
    }
    let _ = (mode, &merge);
    items.iter().fold(init(), fold)
}
