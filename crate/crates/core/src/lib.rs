pub mod error;
pub mod io;
pub mod ode;
pub mod quad;
pub mod solver;
pub mod synthesis;
pub mod tdse;
pub mod trajectory;
pub mod verification;

pub use error::{Error, Result};
pub use solver::{ExtremalSolution, SolverOptions};
pub use trajectory::{LagrangeMultipliers, Terminal, TrajectorySolution};
