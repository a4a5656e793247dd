//! Empirical center-outward distribution and quantile functions.
//!
//! ```
//! use centerout::pipeline::{fit, FitConfig};
//! use centerout::reference::preset;
//!
//! let sample = preset("fig3-banana", 2)?.sample(200, 7);
//! let f = fit(&sample, &FitConfig::default())?;
//! let forward = f.forward.as_ref().unwrap();
//! let image = forward.eval(sample.row(0))?;
//! assert!((image[0] - f.table.rows[0].f_value[0]).abs() < 1e-5);
//! let q = f.quantile.as_ref().unwrap().eval(&[0.5, 0.0])?;
//! assert_eq!(q.len(), 2);
//! # Ok::<(), centerout::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assignment;
pub mod certificate;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod moreau;
pub mod pipeline;
pub mod points;
pub mod ranks;
pub mod reference;
pub mod rng;
pub(crate) mod serde_ext;

pub use error::{Error, Result};
