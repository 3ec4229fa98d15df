//! Worker pool and the disjoint-access helpers used during a parallel step.
//!
//! Work is distributed dynamically: every worker pulls the next item index
//! from a shared counter until the range is exhausted. With the `parallel`
//! feature disabled, or with a single worker, items run in order on the
//! calling thread.

use std::cell::UnsafeCell;
use std::marker::PhantomData;
use std::ops::{Deref, DerefMut};
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::Result;
#[cfg(feature = "parallel")]
use crate::error::Error;

/// Bytes per cache-isolation block. Two adjacent 64-byte lines, since x86
/// prefetchers pull lines in pairs.
pub const CACHE_BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[repr(align(128))]
pub struct CacheAligned<T>(pub T);

const _: () = assert!(std::mem::align_of::<CacheAligned<u8>>() == CACHE_BLOCK);

impl<T> Deref for CacheAligned<T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.0
    }
}

impl<T> DerefMut for CacheAligned<T> {
    fn deref_mut(&mut self) -> &mut T {
        &mut self.0
    }
}

/// What an idle worker does while others finish the current batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum WaitPolicy {
    /// Busy-wait at the end of every batch until all items are done.
    Spin,
    /// Return to the pool and sleep.
    #[default]
    Yield,
}

impl std::str::FromStr for WaitPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "spin" | "active" => Ok(WaitPolicy::Spin),
            "yield" | "passive" => Ok(WaitPolicy::Yield),
            other => Err(format!("unknown wait policy {other:?} (expected spin or yield)")),
        }
    }
}

pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
    n_workers: usize,
    wait: WaitPolicy,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("n_workers", &self.n_workers)
            .field("wait", &self.wait)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Executor {
    /// `n_workers == 0` selects the hardware default.
    pub fn new(n_workers: usize, wait: WaitPolicy) -> Result<Self> {
        let n_workers = if n_workers == 0 { default_workers() } else { n_workers };
        #[cfg(feature = "parallel")]
        {
            let pool = if n_workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n_workers)
                        .thread_name(|i| format!("seekworld-{i}"))
                        .build()
                        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Self { pool, n_workers, wait })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = n_workers;
            Ok(Self { n_workers: 1, wait })
        }
    }

    pub fn sequential() -> Self {
        Self {
            #[cfg(feature = "parallel")]
            pool: None,
            n_workers: 1,
            wait: WaitPolicy::Yield,
        }
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn wait_policy(&self) -> WaitPolicy {
        self.wait
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Calls `f(worker, item)` once for every `item` in `0..n`. `worker` is in
    /// `0..self.n_workers()` and no two concurrent calls share a worker index.
    pub fn for_each_dynamic<F>(&self, n: usize, f: F)
    where
        F: Fn(usize, usize) + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            let next = AtomicUsize::new(0);
            let done = AtomicUsize::new(0);
            let spin = self.wait == WaitPolicy::Spin;
            pool.broadcast(|ctx| {
                let worker = ctx.index();
                let mut local = 0;
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    f(worker, i);
                    local += 1;
                }
                done.fetch_add(local, Ordering::AcqRel);
                if spin {
                    while done.load(Ordering::Acquire) < n {
                        std::hint::spin_loop();
                    }
                }
            });
            return;
        }
        for i in 0..n {
            f(0, i);
        }
    }
}

/// One value per worker, each on its own cache block.
pub struct WorkerLocal<T> {
    slots: Vec<CacheAligned<UnsafeCell<T>>>,
}

// SAFETY: access is partitioned by worker index; see `get`.
unsafe impl<T: Send> Sync for WorkerLocal<T> {}

impl<T> WorkerLocal<T> {
    pub fn new(n: usize, mut make: impl FnMut(usize) -> T) -> Self {
        Self { slots: (0..n).map(|i| CacheAligned(UnsafeCell::new(make(i)))).collect() }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// # Safety
    /// No other reference to slot `worker` may be live. Holds inside
    /// [`Executor::for_each_dynamic`] when `worker` is the index it passed in.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn get(&self, worker: usize) -> &mut T {
        &mut *self.slots[worker].0.get()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.slots.iter_mut().map(|s| s.0.get_mut())
    }
}

/// Fixed-size chunks of a mutable slice that workers may borrow concurrently,
/// provided no index is borrowed twice at the same time.
pub struct SharedChunks<'a, T> {
    ptr: *mut T,
    len: usize,
    chunk: usize,
    _borrow: PhantomData<&'a mut [T]>,
}

unsafe impl<T: Send> Send for SharedChunks<'_, T> {}
unsafe impl<T: Send> Sync for SharedChunks<'_, T> {}

impl<'a, T> SharedChunks<'a, T> {
    pub fn new(slice: &'a mut [T], chunk: usize) -> Self {
        assert!(chunk > 0);
        Self { ptr: slice.as_mut_ptr(), len: slice.len(), chunk, _borrow: PhantomData }
    }

    /// # Safety
    /// `ptr` must be valid for writes of `len` elements for `'a`.
    pub unsafe fn from_raw(ptr: *mut T, len: usize, chunk: usize) -> Self {
        assert!(chunk > 0);
        Self { ptr, len, chunk, _borrow: PhantomData }
    }

    /// Number of chunks; the last may be short.
    pub fn len(&self) -> usize {
        self.len.div_ceil(self.chunk)
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// # Safety
    /// The caller must guarantee chunk `i` is not borrowed elsewhere while the
    /// returned slice lives.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn chunk_mut(&self, i: usize) -> &'a mut [T] {
        let start = i * self.chunk;
        assert!(start < self.len, "chunk {i} out of range");
        let end = (start + self.chunk).min(self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(start), end - start)
    }
}
