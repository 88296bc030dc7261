//! Numerical laboratory for the perturbed Allen-Cahn equation
//! `u_t = Δu + ε⁻²(f(u) − ε gᵉ(x,t,u))`, its sharp-interface limit
//! `V_n = −(N−1)κ + c₀(G(α₊) − G(α₋))`, and FitzHugh-Nagumo type systems.

pub mod ac_solver;
pub mod bistable_ode;
pub mod comparison;
pub mod corrector;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod nonlinearity;
pub mod profile;
pub mod quad;
pub mod sharp_interface;

pub use error::{Error, Result};
