//! Replicate dispatch: rayon when the `parallel` feature is on, a plain
//! loop otherwise. Results do not depend on the execution mode because the
//! job closure receives a replicate-indexed RNG stream.

use crate::rng::{replicate_rng, SimRng};

/// Run `count` replicates of `job`, collecting results in replicate order.
/// `job` gets the replicate index and its own RNG stream.
#[cfg(feature = "parallel")]
pub fn run_replicates<T, F>(master_seed: u64, count: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(master_seed, i);
            job(i, &mut rng)
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_replicates<T, F>(master_seed: u64, count: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> T + Send + Sync,
{
    run_replicates_seq(master_seed, count, job)
}

/// Sequential reference implementation, always available (the benchmark
/// suite compares it against the parallel path).
pub fn run_replicates_seq<T, F>(master_seed: u64, count: u64, job: F) -> Vec<T>
where
    F: Fn(u64, &mut SimRng) -> T,
{
    (0..count)
        .map(|i| {
            let mut rng = replicate_rng(master_seed, i);
            job(i, &mut rng)
        })
        .collect()
}

/// Map `items` through `f`, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_items<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Send + Sync,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_items<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    F: Fn(I) -> T,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parallel_and_sequential_agree() {
        let job = |i: u64, rng: &mut SimRng| -> (u64, u64) { (i, rng.gen()) };
        let a = run_replicates(99, 16, job);
        let b = run_replicates_seq(99, 16, job);
        assert_eq!(a, b);
    }
}
