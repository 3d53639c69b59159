//! Per-channel data parallelism.
//!
//! Channel loops in the filters, spectral estimators and epoch statistics go
//! through these helpers. With the `parallel` feature they fan out over rayon
//! when the block is large enough to amortise the dispatch; otherwise, or
//! with [`ExecMode::Sequential`], they run in place. Both paths perform the
//! same per-channel arithmetic, so results are bit-identical.

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Element count below which a block is always processed sequentially.
pub const PARALLEL_MIN_ELEMENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    fn fan_out(self, channels: usize, elements: usize) -> bool {
        cfg!(feature = "parallel")
            && self == ExecMode::Parallel
            && channels > 1
            && elements >= PARALLEL_MIN_ELEMENTS
    }
}

/// Runs `f` on each column of `data` together with that column's state.
pub fn for_each_column_mut<S, F>(mode: ExecMode, data: &mut Array2<f64>, states: &mut [S], f: F)
where
    S: Send,
    F: Fn(ArrayViewMut1<'_, f64>, &mut S) + Sync + Send,
{
    assert_eq!(data.ncols(), states.len(), "one state per column");
    if mode.fan_out(data.ncols(), data.len()) {
        #[cfg(feature = "parallel")]
        {
            data.axis_iter_mut(Axis(1))
                .into_par_iter()
                .zip(states.par_iter_mut())
                .for_each(|(col, st)| f(col, st));
            return;
        }
    }
    for (col, st) in data.axis_iter_mut(Axis(1)).zip(states.iter_mut()) {
        f(col, st);
    }
}

/// Maps every column of `data` to a value, preserving column order.
pub fn map_columns<T, F>(mode: ExecMode, data: &Array2<f64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(ArrayView1<'_, f64>) -> T + Sync + Send,
{
    if mode.fan_out(data.ncols(), data.len()) {
        #[cfg(feature = "parallel")]
        {
            return data.axis_iter(Axis(1)).into_par_iter().map(&f).collect();
        }
    }
    data.axis_iter(Axis(1)).map(f).collect()
}

/// Maps `0..n` through `f`, preserving order. `weight` is the per-item
/// element count used for the fan-out decision.
pub fn map_range<T, F>(mode: ExecMode, n: usize, weight: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if mode.fan_out(n, n.saturating_mul(weight)) {
        #[cfg(feature = "parallel")]
        {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let data = Array2::from_shape_fn((2048, 8), |(r, c)| (r * 31 + c * 7) as f64 % 13.0);
        let seq = map_columns(ExecMode::Sequential, &data, |c| c.sum());
        let par = map_columns(ExecMode::Parallel, &data, |c| c.sum());
        assert_eq!(seq, par);

        let mut a = data.clone();
        let mut b = data.clone();
        let mut sa = vec![0.0; 8];
        let mut sb = vec![0.0; 8];
        let step = |mut col: ArrayViewMut1<f64>, s: &mut f64| {
            for v in col.iter_mut() {
                *s = 0.5 * *s + *v;
                *v = *s;
            }
        };
        for_each_column_mut(ExecMode::Sequential, &mut a, &mut sa, step);
        for_each_column_mut(ExecMode::Parallel, &mut b, &mut sb, step);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
