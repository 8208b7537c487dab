//! Order-preserving fan-out over a bounded worker pool.
//!
//! With the `parallel` feature the work runs on a dedicated rayon pool of
//! `workers` threads; without it, or with `workers == 1`, it runs inline.
//! Either way the output order matches the input order.

/// Maps `f` over `items`, returning results in input order.
pub fn map_ordered<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 && items.len() > 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => return items.iter().map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    items.iter().map(f).collect()
}

/// True when this build can run work on more than one thread.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
