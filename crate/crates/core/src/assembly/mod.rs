//! Fine-grid discretization: two-point flux flow, P1 elasticity and their
//! coupling blocks.

pub mod elasticity;
pub mod flow;
pub mod system;

pub use elasticity::{biot_coupling, elasticity_stiffness, fracture_force_coupling, ElasticityBlocks};
pub use flow::{exchange_matrix, fracture_mass, fracture_tpfa, matrix_mass, tpfa_matrix, ExchangeBlocks};
pub use system::{
    assemble_system, coarse_cell_sources, roller_constraints, AssembledSystem, BlockOperator, Component,
    DisplacementConstraint, DofLayout, StepOperator,
};
