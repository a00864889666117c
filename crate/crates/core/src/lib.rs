//! Numerics for anisotropic Ginzburg-Landau vortices under a distributed
//! control field on the flat 2-torus: Finsler convex duality, lattice-gauge
//! field energies, Green-kernel renormalized vortex energies, point-vortex
//! dynamics, and reduced optimal control.

pub mod algebra;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod finsler;
pub mod energy;
pub mod green;
pub mod grid;

pub use algebra::{Covector, Point, SymMat2, TangentVec, Vec2};
pub use control::{ControlField, FourierMode};
pub use dynamics::{FlowKind, VortexTrajectory};
pub use error::{CoreError, Result};
pub use finsler::{FinslerSpec, MetricField, MetricMode};
pub use energy::{EnergyBreakdown, EnergyModel, EnergyParams, KineticForm};
pub use green::{GreenTable, RenormEnergyReport};
pub use grid::{FieldState, TorusGrid, VortexConfig};
