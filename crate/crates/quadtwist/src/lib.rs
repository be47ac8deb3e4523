//! Central values and moments of quadratic twists of Dirichlet L-functions
//! over arithmetic progressions, with oracle checks for every identity used
//! along the way.

pub mod arith;
pub mod characters;
pub mod cli;
pub mod error;
pub mod gauss_sums;
pub mod lvalues;
pub mod moments;
pub mod numerics;
pub mod predictions;
pub mod special_functions;

pub use error::{Error, Result};
