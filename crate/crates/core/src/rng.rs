//! Named random streams split from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams; adding a consumer never perturbs the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GameSampling = 1,
    Init = 2,
    TieBreaking = 3,
    Evaluation = 4,
}

/// ChaCha generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Thread pool honoring `REGRETFORGE_THREADS`; defaults to rayon's choice.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("REGRETFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction")
}
