//! Worker-thread control.
//!
//! Parallel sections in this crate never change results: work is split into
//! fixed chunks, each chunk writes its own pre-allocated slice, and any
//! reduction walks the chunks in index order afterwards. The thread count
//! only decides how many chunks run concurrently.
//!
//! The default worker count is `min(HD_MMD_THREADS, hardware)`, floor 1.
//! `HD_MMD_THREADS` is a cap, not a demand: setting it above the hardware
//! parallelism has no effect, and unparsable values are ignored. Functions
//! with an explicit `threads` argument bypass the cap so callers (and tests)
//! can force a specific worker count.

/// Hardware parallelism as reported by the OS, floor 1.
pub fn available() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Worker count used by the high-level entry points:
/// `min(HD_MMD_THREADS, available())`, floor 1.
pub fn effective_threads() -> usize {
    parse_cap(std::env::var("HD_MMD_THREADS").ok().as_deref(), available())
}

fn parse_cap(spec: Option<&str>, hardware: usize) -> usize {
    let hw = hardware.max(1);
    match spec.and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(n) if n >= 1 => n.min(hw),
        _ => hw,
    }
}

/// Run `f` over `out` split into consecutive chunks of `chunk_len` items,
/// using up to `threads` worker threads. `f(chunk_index, chunk)` must not
/// depend on execution order; chunk `i` covers items
/// `i * chunk_len .. min((i+1) * chunk_len, out.len())`.
///
/// Chunks are dealt round-robin to workers, so the assignment is static and
/// deterministic (not that it matters for results, which depend only on the
/// chunk layout).
pub(crate) fn for_each_chunk_mut<T, F>(out: &mut [T], chunk_len: usize, threads: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    let threads = threads.max(1);
    if threads == 1 || out.len() <= chunk_len {
        for (i, chunk) in out.chunks_mut(chunk_len).enumerate() {
            f(i, chunk);
        }
        return;
    }
    let mut buckets: Vec<Vec<(usize, &mut [T])>> = Vec::with_capacity(threads);
    buckets.resize_with(threads, Vec::new);
    for (i, chunk) in out.chunks_mut(chunk_len).enumerate() {
        buckets[i % threads].push((i, chunk));
    }
    std::thread::scope(|scope| {
        for bucket in buckets {
            scope.spawn(|| {
                for (i, chunk) in bucket {
                    f(i, chunk);
                }
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_semantics() {
        assert_eq!(parse_cap(None, 8), 8);
        assert_eq!(parse_cap(Some("4"), 8), 4);
        assert_eq!(parse_cap(Some("16"), 8), 8);
        assert_eq!(parse_cap(Some("1"), 8), 1);
        assert_eq!(parse_cap(Some("0"), 8), 8);
        assert_eq!(parse_cap(Some("junk"), 8), 8);
        assert_eq!(parse_cap(Some(" 3 "), 8), 3);
        assert_eq!(parse_cap(None, 0), 1);
    }

    #[test]
    fn chunked_fill_matches_serial_for_any_thread_count() {
        let n = 1003;
        let mut expect = vec![0u64; n];
        for_each_chunk_mut(&mut expect, 64, 1, |ci, chunk| {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = (ci * 64 + j) as u64 * 3 + 1;
            }
        });
        for threads in [2, 3, 4, 7] {
            let mut got = vec![0u64; n];
            for_each_chunk_mut(&mut got, 64, threads, |ci, chunk| {
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v = (ci * 64 + j) as u64 * 3 + 1;
                }
            });
            assert_eq!(got, expect, "threads={threads}");
        }
    }

    #[test]
    fn more_threads_than_chunks_is_fine() {
        let mut out = vec![0u32; 5];
        for_each_chunk_mut(&mut out, 2, 8, |ci, chunk| {
            for v in chunk.iter_mut() {
                *v = ci as u32 + 1;
            }
        });
        assert_eq!(out, vec![1, 1, 2, 2, 3]);
    }
}
