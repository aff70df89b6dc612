//! Data-parallel helpers with a sequential fallback. Results are collected in
//! index order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

pub(crate) fn for_each<A, F>(a: &mut [A], f: F)
where
    A: Send,
    F: Fn(&mut A) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        a.par_iter_mut().for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.iter_mut().for_each(f);
    }
}

pub(crate) fn for_each_zip<A, B, F>(a: &mut [A], b: &mut [B], f: F)
where
    A: Send,
    B: Send,
    F: Fn(&mut A, &mut B) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        a.par_iter_mut().zip(b.par_iter_mut()).for_each(|(x, y)| f(x, y));
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.iter_mut().zip(b.iter_mut()).for_each(|(x, y)| f(x, y));
    }
}

pub(crate) fn sum_map<T, F>(xs: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    // Fixed-size chunks keep the summation order independent of thread count.
    const CHUNK: usize = 1024;
    #[cfg(feature = "parallel")]
    {
        let partial: Vec<f64> = xs.par_chunks(CHUNK).map(|c| c.iter().map(&f).sum()).collect();
        partial.iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let partial: Vec<f64> = xs.chunks(CHUNK).map(|c| c.iter().map(&f).sum()).collect();
        partial.iter().sum()
    }
}
