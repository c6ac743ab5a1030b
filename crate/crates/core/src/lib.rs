pub mod dataset;
pub mod diffprob;
pub mod eval;
pub mod features;
pub mod lifetimes;
pub mod linear;
pub mod numeric;
pub mod pipeline;
pub mod senn;
pub mod synthetic;
