pub mod bounds;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod pipeline;
pub mod regress;
pub mod surrogate;
pub mod system;
