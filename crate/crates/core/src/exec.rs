//! Data-parallel loop helpers with a sequential fallback when the `parallel`
//! feature is disabled.
//!
//! Reductions split the input into fixed-size chunks, reduce each chunk in
//! index order, and then fold the per-chunk partials in index order. The
//! result is identical for any worker count, which keeps every output of the
//! crate byte-reproducible.

/// Chunk granularity for reductions and elementwise loops. Fixed so that
/// floating-point summation order never depends on the thread count.
pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i * chunk, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i * chunk, c);
    }
}

/// Deterministic chunked reduction of `f(i, &items[i])` over all indices.
pub fn sum_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(usize, &T) -> f64 + Sync,
{
    let partials = partial_sums(items, &f);
    partials.into_iter().sum()
}

#[cfg(feature = "parallel")]
fn partial_sums<T, F>(items: &[T], f: &F) -> Vec<f64>
where
    T: Sync,
    F: Fn(usize, &T) -> f64 + Sync,
{
    use rayon::prelude::*;
    items
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK;
            chunk
                .iter()
                .enumerate()
                .map(|(i, x)| f(base + i, x))
                .sum::<f64>()
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn partial_sums<T, F>(items: &[T], f: &F) -> Vec<f64>
where
    F: Fn(usize, &T) -> f64,
{
    items
        .chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK;
            chunk
                .iter()
                .enumerate()
                .map(|(i, x)| f(base + i, x))
                .sum::<f64>()
        })
        .collect()
}

pub fn sum_f64(xs: &[f64]) -> f64 {
    sum_by(xs, |_, x| *x)
}

pub fn dot_f64(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    sum_by(xs, |i, x| x * ys[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs
            .chunks(CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .sum();
        assert_eq!(sum_f64(&xs), seq);
    }

    #[test]
    fn for_each_chunk_covers_all_indices() {
        let mut data = vec![0usize; 10_000];
        for_each_chunk_mut(&mut data, 512, |base, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = base + i;
            }
        });
        for (i, v) in data.iter().enumerate() {
            assert_eq!(*v, i);
        }
    }
}
