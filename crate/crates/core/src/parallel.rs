//! Order-preserving parallel maps over path indices.
//!
//! Results are collected by index, so output never depends on the number of
//! worker threads. Floating point reductions over the results must be done
//! sequentially by the caller.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Like [`map_indexed`] but fallible; on failure reports the error of the
/// lowest failing index, tagged with that index.
pub fn try_map_indexed<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    let results: Vec<Result<R>> = map_indexed(n, f);
    let mut out = Vec::with_capacity(n);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => return Err(tag(e, i)),
        }
    }
    Ok(out)
}

fn tag(e: Error, i: usize) -> Error {
    if e.path_index().is_some() {
        e
    } else {
        e.at_path(i)
    }
}
