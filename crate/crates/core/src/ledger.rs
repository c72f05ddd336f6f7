//! Live-scalar accounting.
//!
//! Long-lived buffers in the solver path register their size with the ledger
//! installed on the current thread. Counting is explicit: a [`Tracked`] guard
//! adds its scalar count on creation and removes it on drop. With no ledger
//! installed every call is a no-op.

use std::cell::RefCell;
use std::fmt;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

/// Which part of a run owns a tracked buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Operator parameters (index sets, modulations).
    Operator,
    /// Measurement-space vectors: data, dual iterate, gradient, direction image.
    Measurement,
    /// Test matrices and sketches.
    Sketch,
    /// Krylov bases and small projected problems.
    Spectral,
    /// Dense matrix iterates (reference solver only).
    Dense,
    /// Short-lived scratch inside operator primitives and reconstruction.
    Workspace,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Operator,
        Category::Measurement,
        Category::Sketch,
        Category::Spectral,
        Category::Dense,
        Category::Workspace,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Operator => "operator",
            Category::Measurement => "measurement",
            Category::Sketch => "sketch",
            Category::Spectral => "spectral",
            Category::Dense => "dense",
            Category::Workspace => "workspace",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const N: usize = Category::ALL.len();

#[derive(Debug, Default)]
pub struct AllocationLedger {
    live: [AtomicI64; N],
    category_peak: [AtomicI64; N],
    total: AtomicI64,
    peak: AtomicI64,
}

impl AllocationLedger {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn add(&self, cat: Category, count: i64) {
        let i = cat.index();
        let live = self.live[i].fetch_add(count, Ordering::SeqCst) + count;
        self.category_peak[i].fetch_max(live, Ordering::SeqCst);
        let total = self.total.fetch_add(count, Ordering::SeqCst) + count;
        self.peak.fetch_max(total, Ordering::SeqCst);
    }

    fn remove(&self, cat: Category, count: i64) {
        self.live[cat.index()].fetch_sub(count, Ordering::SeqCst);
        self.total.fetch_sub(count, Ordering::SeqCst);
    }

    /// Scalars currently live.
    pub fn live(&self) -> u64 {
        self.total.load(Ordering::SeqCst).max(0) as u64
    }

    pub fn live_in(&self, cat: Category) -> u64 {
        self.live[cat.index()].load(Ordering::SeqCst).max(0) as u64
    }

    /// Largest simultaneous total seen so far.
    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::SeqCst).max(0) as u64
    }

    pub fn peak_in(&self, cat: Category) -> u64 {
        self.category_peak[cat.index()].load(Ordering::SeqCst).max(0) as u64
    }

    /// Runs `f` with this ledger installed on the current thread.
    pub fn scope<R>(self: &Arc<Self>, f: impl FnOnce() -> R) -> R {
        let previous = CURRENT.with(|c| c.replace(Some(Arc::clone(self))));
        struct Restore(Option<Arc<AllocationLedger>>);
        impl Drop for Restore {
            fn drop(&mut self) {
                let prev = self.0.take();
                CURRENT.with(|c| *c.borrow_mut() = prev);
            }
        }
        let _restore = Restore(previous);
        f()
    }
}

thread_local! {
    static CURRENT: RefCell<Option<Arc<AllocationLedger>>> = const { RefCell::new(None) };
}

/// Registration of a live buffer; releases its count on drop.
#[derive(Debug)]
#[must_use = "the count is released as soon as the guard is dropped"]
pub struct Tracked {
    ledger: Option<Arc<AllocationLedger>>,
    category: Category,
    count: i64,
}

impl Tracked {
    pub fn untracked() -> Self {
        Tracked {
            ledger: None,
            category: Category::Workspace,
            count: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count as u64
    }
}

impl Clone for Tracked {
    fn clone(&self) -> Self {
        if let Some(l) = &self.ledger {
            l.add(self.category, self.count);
        }
        Tracked {
            ledger: self.ledger.clone(),
            category: self.category,
            count: self.count,
        }
    }
}

impl Drop for Tracked {
    fn drop(&mut self) {
        if let Some(l) = self.ledger.take() {
            l.remove(self.category, self.count);
        }
    }
}

/// Registers `count` scalars under `category` with the current thread's ledger.
pub fn track(category: Category, count: usize) -> Tracked {
    let ledger = CURRENT.with(|c| c.borrow().clone());
    let count = count as i64;
    if let Some(l) = &ledger {
        l.add(category, count);
    }
    Tracked {
        ledger,
        category,
        count,
    }
}
