use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_queue::ArrayQueue;

pub const DEFAULT_QUEUE_CAPACITY: usize = 256;

/// Bounded multi-producer queue that evicts the oldest item when full.
#[derive(Debug)]
pub struct DropOldestQueue<T> {
    inner: ArrayQueue<T>,
    dropped: AtomicU64,
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Arc<Self> {
        Arc::new(DropOldestQueue { inner: ArrayQueue::new(capacity.max(1)), dropped: AtomicU64::new(0) })
    }

    pub fn push(&self, item: T) {
        if self.inner.force_push(item).is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn pop(&self) -> Option<T> {
        self.inner.pop()
    }

    pub fn drain(&self) -> Vec<T> {
        std::iter::from_fn(|| self.inner.pop()).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    /// Items evicted because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}
