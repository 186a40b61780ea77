//! Exact graph calculus for the tetrahedral flow on Nambu-determinant
//! Poisson brackets: differential polynomials, superfunctions and the
//! Schouten bracket, Kontsevich graph operations, Nambu micro-graphs, and
//! the sparse exact linear algebra that decides the coboundary equation.

pub mod evaluator;
pub mod exactalg;
pub mod exactlin;
pub mod graphcore;
pub mod micrograph;
pub mod pipeline;
pub mod superspace;
