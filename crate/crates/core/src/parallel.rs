//! Order-preserving data-parallel helpers. With the `parallel` feature off, or
//! with [`Exec::Sequential`], everything runs on the calling thread. Results
//! never depend on the execution mode.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn from_jobs(jobs: usize) -> Exec {
        if jobs > 1 {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `items`, keeping input order in the output.
pub fn par_map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, keeping index order.
pub fn par_map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Configures the global rayon pool size. No-op without the `parallel` feature.
pub fn set_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = par_map(Exec::Sequential, &xs, |x| x * x);
        let b = par_map(Exec::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(par_map_range(Exec::Parallel, 5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
