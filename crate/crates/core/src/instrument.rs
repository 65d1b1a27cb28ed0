//! Per-thread evaluation counters for kernel values and Fourier cosines.
//!
//! Compiled only for this crate's unit tests or with the `instrument`
//! feature; otherwise the hooks are no-ops.

#[cfg(any(test, feature = "instrument"))]
mod counters {
    use std::cell::Cell;

    thread_local! {
        static KERNEL: Cell<u64> = const { Cell::new(0) };
        static COSINE: Cell<u64> = const { Cell::new(0) };
    }

    #[inline]
    pub(crate) fn add_kernel(n: u64) {
        KERNEL.with(|c| c.set(c.get() + n));
    }

    #[inline]
    pub(crate) fn add_cosine(n: u64) {
        COSINE.with(|c| c.set(c.get() + n));
    }

    /// Kernel evaluations on this thread since the last [`reset`].
    pub fn kernel_evaluations() -> u64 {
        KERNEL.with(Cell::get)
    }

    /// Cosine evaluations on this thread since the last [`reset`].
    pub fn cosine_evaluations() -> u64 {
        COSINE.with(Cell::get)
    }

    pub fn reset() {
        KERNEL.with(|c| c.set(0));
        COSINE.with(|c| c.set(0));
    }
}

#[cfg(any(test, feature = "instrument"))]
pub use counters::{cosine_evaluations, kernel_evaluations, reset};
#[cfg(any(test, feature = "instrument"))]
pub(crate) use counters::{add_cosine, add_kernel};

#[cfg(not(any(test, feature = "instrument")))]
#[inline(always)]
pub(crate) fn add_kernel(_: u64) {}

#[cfg(not(any(test, feature = "instrument")))]
#[inline(always)]
pub(crate) fn add_cosine(_: u64) {}
