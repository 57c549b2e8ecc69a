#![cfg_attr(not(feature = "std"), no_std)]
extern crate alloc;

pub mod cs;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod importance;
pub mod lp;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
