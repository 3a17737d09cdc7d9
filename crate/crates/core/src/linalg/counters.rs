use std::cell::Cell;

/// Number of matrix kernel invocations by cost class on the current thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelCounts {
    pub quadratic: u64,
    pub cubic: u64,
}

impl KernelCounts {
    pub fn since(self, earlier: KernelCounts) -> KernelCounts {
        KernelCounts {
            quadratic: self.quadratic - earlier.quadratic,
            cubic: self.cubic - earlier.cubic,
        }
    }
}

thread_local! {
    static COUNTS: Cell<KernelCounts> = const { Cell::new(KernelCounts { quadratic: 0, cubic: 0 }) };
}

pub fn kernel_counts() -> KernelCounts {
    COUNTS.with(Cell::get)
}

pub fn reset_kernel_counts() {
    COUNTS.with(|c| c.set(KernelCounts::default()));
}

pub(crate) fn tick_quadratic() {
    COUNTS.with(|c| {
        let mut k = c.get();
        k.quadratic += 1;
        c.set(k);
    });
}

pub(crate) fn tick_cubic() {
    COUNTS.with(|c| {
        let mut k = c.get();
        k.cubic += 1;
        c.set(k);
    });
}
