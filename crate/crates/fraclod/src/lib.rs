//! Multiscale finite element toolkit for elliptic and wave problems in
//! fractured two-dimensional media.
//!
//! The crate discretizes Darcy-type problems where thin highly conductive
//! structures are modeled as codimension-one interfaces carrying their own
//! tangential diffusion. It provides:
//!
//! - [`linalg`]: compressed sparse matrices, direct SPD and saddle-point
//!   (KKT) solves, norms and convergence-rate utilities,
//! - [`mesh`]: conforming triangle meshes, nested quadrisection hierarchies,
//!   element patches, fracture polylines and per-triangle traces,
//! - [`field`]: seeded piecewise-constant coefficient fields, interface data
//!   and source terms,
//! - [`assembly`]: P1 assembly of bulk and tangential-interface forms,
//!   reference solves and energy-norm errors,
//! - [`interp`]: the fracture-aware quasi-interpolation operator built from
//!   dual bases over triangles and fracture traces,
//! - [`lod`]: localized correctors, corrected multiscale bases, upscaled
//!   coarse solves and decay diagnostics,
//! - [`wave`]: Crank-Nicolson time stepping in the fine and upscaled spaces.
//!
//! Corrector computation and other embarrassingly parallel loops run on
//! rayon when the `parallel` feature (default) is enabled; disabling it
//! yields a fully sequential build with identical results.

// Indexed loops and NaN-rejecting negated comparisons are deliberate in
// the numeric kernels.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
mod exec;
pub mod field;
pub mod interp;
pub mod linalg;
pub mod lod;
pub mod mesh;
pub mod wave;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix not SPD: nonpositive pivot at row {row}")]
    NotSpd { row: usize },
    #[error("matrix not PSD: v'Av = {value:e} for |v|^2 = {norm_sq:e}")]
    NotPsd { value: f64, norm_sq: f64 },
    #[error("singular system: {context}")]
    Singular { context: String },
    #[error("singular patch problem for element {element}, node {node}, k = {k}")]
    SingularPatch {
        element: usize,
        node: usize,
        k: usize,
    },
    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate triangle {index}: area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("malformed mesh file: {0}")]
    MeshFormat(String),
    #[error("fracture polyline {polyline} leaves the meshed domain")]
    FractureOutsideDomain { polyline: usize },
    #[error("invalid fracture geometry: {0}")]
    FractureGeometry(String),
    #[error("point ({x}, {y}) outside the field domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("region lookup failed at ({x}, {y})")]
    RegionLookup { x: f64, y: f64 },
    #[error("reference solution has zero energy norm")]
    ZeroReference,
    #[error(
        "interpolation selected a trace domain with no dual basis (node {node}, element {element})"
    )]
    NoDualBasis { node: usize, element: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
