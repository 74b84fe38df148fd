use pirum_core::Executor;
use rayon::prelude::*;

/// Runs jobs on the global rayon pool. Results come back in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pirum_core::Sequential;

    #[test]
    fn matches_sequential_order() {
        let f = |i: usize| i * i + 1;
        assert_eq!(Rayon.map(1000, f), Sequential.map(1000, f));
    }
}
