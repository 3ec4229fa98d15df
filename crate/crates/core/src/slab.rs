//! Aligned byte slabs whose first write is distributed across workers.

use std::alloc::{self, Layout};
use std::mem::MaybeUninit;
use std::ptr::NonNull;

use crate::error::{Error, Result};
use crate::exec::{Executor, SharedChunks};

/// Who performs the initial zero-fill of a freshly allocated slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// Each chunk is zeroed by whichever worker pulls it, so pages are first
    /// touched by the threads that later step them.
    #[default]
    FirstTouch,
    /// The calling thread zeroes the whole slab.
    Serial,
}

/// A heap allocation with a caller-chosen alignment. Always fully initialized.
pub struct AlignedBuf {
    ptr: NonNull<u8>,
    len: usize,
    layout: Layout,
}

// SAFETY: AlignedBuf uniquely owns its allocation, like Vec<u8>.
unsafe impl Send for AlignedBuf {}
unsafe impl Sync for AlignedBuf {}

impl AlignedBuf {
    /// Allocates `chunk * n_chunks` bytes aligned to `align` and zero-fills them
    /// chunk by chunk according to `init`.
    pub fn zeroed(
        chunk: usize,
        n_chunks: usize,
        align: usize,
        exec: &Executor,
        init: InitPolicy,
    ) -> Result<Self> {
        let len = chunk
            .checked_mul(n_chunks)
            .ok_or_else(|| Error::Resource(format!("{chunk} x {n_chunks} bytes overflows")))?;
        let layout = Layout::from_size_align(len.max(1), align)
            .map_err(|e| Error::Resource(format!("bad slab layout: {e}")))?;
        // SAFETY: layout has non-zero size.
        let raw = unsafe { alloc::alloc(layout) };
        let ptr = NonNull::new(raw)
            .ok_or_else(|| Error::Resource(format!("failed to allocate {len} bytes")))?;
        if len > 0 {
            // SAFETY: the allocation is `len` bytes, viewed as uninitialized until
            // every chunk has been written below.
            let chunks = unsafe {
                SharedChunks::from_raw(ptr.as_ptr().cast::<MaybeUninit<u8>>(), len, chunk.max(1))
            };
            let n = chunks.len();
            match init {
                InitPolicy::FirstTouch => exec.for_each_dynamic(n, |_, i| {
                    // SAFETY: each chunk index is handed out exactly once.
                    unsafe { chunks.chunk_mut(i) }.fill(MaybeUninit::new(0));
                }),
                InitPolicy::Serial => {
                    for i in 0..n {
                        unsafe { chunks.chunk_mut(i) }.fill(MaybeUninit::new(0));
                    }
                }
            }
        }
        Ok(Self { ptr, len, layout })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_ptr(&self) -> *const u8 {
        self.ptr.as_ptr()
    }

    pub fn as_mut_ptr(&mut self) -> *mut u8 {
        self.ptr.as_ptr()
    }

    pub fn as_slice(&self) -> &[u8] {
        // SAFETY: fully initialized in the constructor.
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.len) }
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.len) }
    }
}

impl Drop for AlignedBuf {
    fn drop(&mut self) {
        // SAFETY: allocated in `zeroed` with this layout.
        unsafe { alloc::dealloc(self.ptr.as_ptr(), self.layout) }
    }
}

impl std::fmt::Debug for AlignedBuf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlignedBuf").field("ptr", &self.ptr).field("len", &self.len).finish()
    }
}
