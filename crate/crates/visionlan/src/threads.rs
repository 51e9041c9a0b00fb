//! Worker-pool plumbing. `VLAN_THREADS` caps parallelism; results are always
//! reduced in a fixed order, so thread count never changes the numbers.

use rayon::ThreadPool;
use std::sync::OnceLock;

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var("VLAN_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool construction cannot fail")
    })
}
