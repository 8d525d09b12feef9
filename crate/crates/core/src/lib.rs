pub mod budget;
pub mod cli;
pub mod diagnostics;
pub mod fp;
pub mod integrator;
pub mod io;
pub mod lorenz;
pub mod pipeline;
pub mod plot;
