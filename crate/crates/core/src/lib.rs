pub mod codec;
pub mod loopgraph;
pub mod series;
pub mod shiftspec;
pub mod spectral;
pub mod transform;
pub mod zeta;
