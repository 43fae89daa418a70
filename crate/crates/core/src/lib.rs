//! U(2)-symmetric cohomogeneity-one Ricci flow in four dimensions.

pub mod banded;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod initial_data;
pub mod io;
pub mod monitors;
pub mod numerics;
pub mod par;
pub mod pipeline;
pub mod profile;
pub mod reference;
pub mod spectral;
pub mod stencil;
pub mod surgery;

pub use error::{Error, Result};
pub use profile::{Profile, Topology};
