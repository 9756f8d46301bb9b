//! Deterministic parallel execution of independent replicates.

use rayon::prelude::*;

use crate::error::Result;
use crate::stats::rng::{stream_for, ReplicateRng};

/// Run `f(index, rng)` for every replicate, each on its own stream, and
/// return the results in replicate order. The output does not depend on the
/// number of worker threads.
pub fn run_replicates<T, F>(master_seed: u64, replicates: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ReplicateRng) -> Result<T> + Sync,
{
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_for(master_seed, i);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let job = || run_replicates(42, 257, |i, rng| Ok((i, rng.random::<u64>()))).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(job);
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(job);
        assert_eq!(one, four);
        assert!(one.iter().enumerate().all(|(k, (i, _))| k as u64 == *i));
    }

    #[test]
    fn first_error_is_returned() {
        let r: Result<Vec<()>> = run_replicates(0, 10, |i, _| {
            if i == 3 {
                Err(crate::Error::Absorbed)
            } else {
                Ok(())
            }
        });
        assert!(r.is_err());
    }
}
