//! Execution strategy for the embarrassingly parallel loops (quadrature
//! cells, sample points, grid rows). With the `parallel` feature the
//! default is a rayon map; without it, or with `Mode::Sequential`, a
//! plain iterator runs the same closures in the same order. Outputs are
//! collected by index and reduced by the caller in index order, so both
//! modes produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Parallel,
    Sequential,
}

impl Mode {
    /// Parallel when the feature is compiled in, sequential otherwise.
    pub fn auto() -> Mode {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

/// Map f over 0..n, returning results in index order.
pub fn map_range<U, F>(mode: Mode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Mode::Parallel => (0..n).map(f).collect(),
        Mode::Sequential => (0..n).map(f).collect(),
    }
}

/// Map f over a slice, returning results in input order.
pub fn map_slice<T, U, F>(mode: Mode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Mode::Parallel => items.iter().map(f).collect(),
        Mode::Sequential => items.iter().map(f).collect(),
    }
}

/// Update a mutable slice elementwise from its index.
pub fn fill_indexed<T, F>(mode: Mode, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        }
        #[cfg(not(feature = "parallel"))]
        Mode::Parallel => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = f(i);
            }
        }
        Mode::Sequential => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = f(i);
            }
        }
    }
}
