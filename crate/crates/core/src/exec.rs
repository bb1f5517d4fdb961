//! Data-parallel map used for batch fitness evaluation and Monte Carlo
//! runs. Output order always matches input order, so results do not
//! depend on the execution mode.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Rayon thread pool; falls back to sequential without the `parallel`
    /// feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl std::str::FromStr for Execution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Execution::Sequential),
            "parallel" => Ok(Execution::Parallel),
            other => Err(format!("unknown execution mode {other:?}")),
        }
    }
}

pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn map_range<U, F>(exec: Execution, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_slice(Execution::Sequential, &items, |x| x * x);
        let par = map_slice(Execution::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(map_range(Execution::Parallel, 5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}
