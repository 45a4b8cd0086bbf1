//! Library half of the batch CLI: theorem verification suites, the gridworld
//! benchmark orchestration, and run manifests. The binary in `main.rs` is a
//! thin argument-parsing layer over these.

pub mod experiments;
pub mod manifest;
pub mod verify;

/// Worker-count override, env var first, then the flag, then rayon's default.
pub fn worker_count(flag: Option<usize>) -> Option<usize> {
    if let Ok(value) = std::env::var("ROBUST_ENTROPY_WORKERS") {
        if let Ok(parsed) = value.parse::<usize>() {
            if parsed > 0 {
                return Some(parsed);
            }
        }
    }
    flag.filter(|&w| w > 0)
}

/// Run `body` inside a rayon pool of `workers` threads (or the default pool).
pub fn with_pool<T: Send>(workers: Option<usize>, body: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(body),
        None => body(),
    }
}
