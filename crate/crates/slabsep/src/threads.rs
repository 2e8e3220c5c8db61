//! Replica fan-out over a bounded worker pool. Each replica owns its
//! seed-derived generator, so results are identical for any worker count and
//! merge in replica order.

/// Worker count: explicit request, then the `SLABSEP_THREADS` environment
/// variable, then available parallelism.
pub fn worker_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var("SLABSEP_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs `f(replica_index)` for every index in `0..n`, at most `workers` at a
/// time, returning results in index order.
pub fn run_replicas<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let slots_ptr = SendSlice(slots.as_mut_ptr());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let next = &next;
            let f = &f;
            let slots_ptr = &slots_ptr;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                // Disjoint indices per iteration: each slot written once.
                unsafe {
                    *slots_ptr.0.add(i) = Some(out);
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("replica ran")).collect()
}

struct SendSlice<T>(*mut Option<T>);
unsafe impl<T: Send> Sync for SendSlice<T> {}
