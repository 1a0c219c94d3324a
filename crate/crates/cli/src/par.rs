//! Order-preserving parallel map over a slice.

/// Applies `f` to every item on at most `jobs` scoped threads. The result
/// is in input order regardless of scheduling.
pub fn map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.is_empty() {
        return Vec::new();
    }
    let chunk = items.len().div_ceil(jobs.clamp(1, items.len()));
    let f = &f;
    std::thread::scope(|s| {
        let workers: Vec<_> =
            items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        workers.into_iter().flat_map(|w| w.join().expect("worker panicked")).collect()
    })
}
