//! Simulation and exact analysis of the facilitated exclusion process (FEP)
//! on a discrete circle, through its mapping onto the symmetric simple
//! exclusion process (SSEP) and the height-function representation.

pub mod configurations;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod exact;
pub mod mappings;
pub mod spectral;

pub use configurations::{FepConfiguration, Occupancy, SegmentStatistic, SsepConfiguration, TaggedFepState};
pub use error::{Error, Result};
pub use mappings::{phi, phi_inverse, psi, psi_inverse, HeightFunction, MappedPair};
