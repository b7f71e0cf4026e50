//! Data-parallel helpers. With the `parallel` feature these dispatch to rayon,
//! otherwise they run sequentially; results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send, F: Fn(&mut T) + Sync + Send>(items: &mut [T], f: F) {
    if items.len() < 16 {
        items.iter_mut().for_each(f);
    } else {
        items.par_iter_mut().for_each(f);
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T: Send, F: Fn(&mut T) + Sync + Send>(items: &mut [T], f: F) {
    items.iter_mut().for_each(f);
}

/// Order-preserving map.
#[cfg(feature = "parallel")]
pub fn map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    if items.len() < 2 {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Order-preserving map over an index range.
pub fn map_range<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    let idx: Vec<usize> = (0..n).collect();
    map(&idx, |&i| f(i))
}

/// Runs `f` on a pool with `threads` workers (`None`: one per core), or
/// inline when the crate is built without the `parallel` feature. Entering
/// a pool once is much cheaper than handing every parallel section to it.
pub fn with_threads<R: Send, F: FnOnce() -> R + Send>(threads: Option<usize>, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        if rayon::current_thread_index().is_some() && threads.is_none() {
            return f();
        }
        static DEFAULT: std::sync::OnceLock<Option<rayon::ThreadPool>> = std::sync::OnceLock::new();
        let own;
        let pool = match threads {
            Some(n) => {
                own = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok();
                own.as_ref()
            }
            None => DEFAULT.get_or_init(|| rayon::ThreadPoolBuilder::new().build().ok()).as_ref(),
        };
        if let Some(pool) = pool {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

/// Number of workers available to data-parallel sections.
pub fn width() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
