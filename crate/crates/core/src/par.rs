//! Execution policy for the data-parallel kernels.
//!
//! Every hot loop in the crate (row assembly, per-node quadrature, pair
//! scans) is written once against [`Execution`]. With the `parallel` feature
//! the `Parallel` policy fans rows out over the rayon pool; without it both
//! policies run on the calling thread. Each row is always reduced
//! sequentially, so results are bitwise identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually use more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluate `f(i)` for `i in 0..n`, in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fill consecutive `width`-sized chunks of `out`; chunk `i` is handed to
    /// `f(i, chunk)`.
    pub fn for_each_chunk<F>(self, out: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        assert!(width > 0 && out.len().is_multiple_of(width));
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Cap the number of worker threads used by rayon and by the dense linear
/// algebra. Returns the thread count actually in effect.
///
/// Only the first call configures the global rayon pool; later calls leave
/// it untouched.
pub fn configure_threads(threads: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads.filter(|&n| n > 0) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let n = rayon::current_num_threads();
        faer::set_global_parallelism(if n > 1 { faer::Par::rayon(n) } else { faer::Par::Seq });
        n
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        faer::set_global_parallelism(faer::Par::Seq);
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Execution::Sequential.map(1000, f);
        let b = Execution::Parallel.map(1000, f);
        assert_eq!(a, b);

        let mut x = vec![0.0; 64];
        let mut y = vec![0.0; 64];
        Execution::Sequential.for_each_chunk(&mut x, 8, |i, row| {
            row.iter_mut().enumerate().for_each(|(j, v)| *v = (i * 8 + j) as f64)
        });
        Execution::Parallel.for_each_chunk(&mut y, 8, |i, row| {
            row.iter_mut().enumerate().for_each(|(j, v)| *v = (i * 8 + j) as f64)
        });
        assert_eq!(x, y);
    }
}
