//! Benchmark problems and the experiment driver.

pub mod experiment;
pub mod gl;
pub mod transport;

pub use gl::{build_gl, GinzburgLandau, GinzburgLandauSpec};
pub use transport::{build_scalar_transport, ScalarTransport, ScalarTransportSpec, VelocityField};
