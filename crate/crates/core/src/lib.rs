pub mod classify;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod font;
pub mod lines;
pub mod mser;
pub mod pipeline;
pub mod raster;
pub mod recognize;
pub mod segment;
pub mod strokefeat;

pub use error::{Error, Result};
