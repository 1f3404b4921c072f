//! Deterministic fork-join helper for embarrassingly parallel sweeps.

/// Worker count: the `KPP_LAB_THREADS` environment variable when set
/// (`0` and `1` both mean sequential), otherwise the machine's available
/// parallelism capped at 8.
pub fn thread_count() -> usize {
    match std::env::var("KPP_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => 1,
            Ok(k) => k,
        },
        Err(_) => std::thread::available_parallelism()
            .map(|p| p.get().min(8))
            .unwrap_or(1),
    }
}

/// Applies `f` to every item and returns results in input order,
/// regardless of worker count; the schedule can never change the output.
pub fn parallel_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let workers = thread_count();
    if workers <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let tagged: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let chunk = tagged.len().div_ceil(workers);
    let mut out: Vec<(usize, U)> = Vec::with_capacity(tagged.len());
    let chunks: Vec<Vec<(usize, T)>> = {
        let mut cs = Vec::new();
        let mut rest = tagged;
        while !rest.is_empty() {
            let tail = rest.split_off(rest.len().min(chunk));
            cs.push(std::mem::replace(&mut rest, tail));
        }
        cs
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| {
                let f = &f;
                scope.spawn(move || {
                    c.into_iter()
                        .map(|(idx, item)| (idx, f(item)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("worker thread panicked"));
        }
    });
    out.sort_by_key(|(idx, _)| *idx);
    out.into_iter().map(|(_, u)| u).collect()
}
