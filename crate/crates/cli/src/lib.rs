//! Command implementations behind the `spatial-iv` binary.

pub mod commands;
pub mod config;
pub mod data;
mod error;
pub mod output;
pub mod reference;
pub mod svg;

pub use error::CliError;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps in input order, in parallel when the `parallel` feature is on.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
