//! Randomness: splittable keys, Brownian paths and exact forward drivers.

mod driver;
mod key;
mod path;

pub use driver::{driver_eval, Driver};
pub use key::{derive_child_key, inverse_normal_cdf, Branch, NormalStream, RngKey};
pub use path::{sample_brownian_path, BrownianPath};

pub(crate) use path::fill_increments;
