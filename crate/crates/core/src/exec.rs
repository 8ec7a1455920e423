#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops are executed.
///
/// Results are always returned in input order, so the choice never changes
/// output. Without the `parallel` feature `Parallel` degrades to
/// `Sequential`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_and_preserve_order() {
        let xs: Vec<u64> = (0..257).collect();
        let seq = Execution::Sequential.map(&xs, |i, x| x * 3 + i as u64);
        let par = Execution::Parallel.map(&xs, |i, x| x * 3 + i as u64);
        assert_eq!(seq, par);
        assert_eq!(
            Execution::Sequential.map_range(10, |i| i * i),
            Execution::Parallel.map_range(10, |i| i * i)
        );
    }
}
