//! Seeded random streams, one per worker.
//!
//! Every worker draws from ChaCha8 seeded with the run seed and its own
//! stream id, and per-worker outputs are concatenated in worker order. The
//! result depends only on `(seed, count, workers)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn worker_rng(seed: u64, worker: usize) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

/// Splits `count` into `workers` contiguous shares, earlier workers taking
/// the remainder.
pub fn split_counts(count: usize, workers: usize) -> Vec<usize> {
    let workers = workers.max(1);
    let (q, r) = (count / workers, count % workers);
    (0..workers).map(|i| q + usize::from(i < r)).collect()
}

/// Runs `job(rng, share, worker)` on every worker thread and concatenates
/// the outputs in worker order.
pub fn parallel_streams<T, F>(seed: u64, count: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize, usize) -> Vec<T> + Sync,
{
    let shares = split_counts(count, workers);
    if shares.len() == 1 {
        return job(&mut worker_rng(seed, 0), count, 0);
    }
    let job = &job;
    let parts: Vec<Vec<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shares
            .iter()
            .enumerate()
            .map(|(w, &share)| scope.spawn(move || job(&mut worker_rng(seed, w), share, w)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    });
    parts.into_iter().flatten().collect()
}
