//! Label-access audit.
//!
//! Ground-truth factors are diagnostics: training and model selection must
//! run on observations alone. Every accessor that exposes factor labels
//! calls [`record_label_access`], and a caller that needs proof of
//! label-freeness wraps the computation in [`scope`] and asserts the count
//! is zero.

use std::cell::Cell;

thread_local! {
    static LABEL_ACCESSES: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Run `f` with the audit armed; returns its result and the number of
/// label accesses observed on this thread.
pub fn scope<T>(f: impl FnOnce() -> T) -> (T, u64) {
    LABEL_ACCESSES.with(|c| c.set(Some(0)));
    let out = f();
    let count = LABEL_ACCESSES.with(|c| c.replace(None)).unwrap_or(0);
    (out, count)
}

/// Note one read of ground-truth factor labels. No-op when unarmed.
pub fn record_label_access() {
    LABEL_ACCESSES.with(|c| {
        if let Some(n) = c.get() {
            c.set(Some(n + 1));
        }
    });
}
