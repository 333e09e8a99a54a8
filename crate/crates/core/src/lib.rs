//! Online sparse dictionary learning for image recovery.
//!
//! The crate covers the full pipeline: PNM image ingestion, overlapping-patch
//! extraction and reassembly, seven interchangeable iterative-shrinkage
//! solvers for the basis-pursuit-denoising subproblem, the online learning
//! loop with block-coordinate dictionary updates, and an evaluation harness
//! for reconstruction errors and timings.

pub mod corpus;
pub mod dict;
pub mod error;
pub mod eval;
pub mod image;
pub mod patch;
pub mod solvers;

pub use error::{Error, Result};
pub use image::{to_grayscale, read_pnm, resize_bilinear, write_pnm, GrayImage, PnmImage, RgbImage};
pub use patch::{assemble_image, coverage_map, extract_patches, plan_grid, GridPlan, PatchMatrix};
pub use solvers::{
    bb_steplength, check_optimality, estimate_lipschitz, ista_direction, objective, shrink,
    smooth_gradient, solve, BpdnProblem, Method, MethodParams, SolverConfig, SparseCode,
};
pub use dict::{
    init_dct_dictionary, learn_online, load_dictionary, render_dictionary_mosaic, save_dictionary,
    surrogate_gradient, surrogate_objective, update_dictionary, Dictionary, DrawOrder, LearnConfig,
    LearnRun, LearnState,
};
pub use eval::{
    abs_error, aggregate, inf_error, reconstruct_image, rel_error, AggregateRow, MetricsRecord,
    ReconstructionTiming, Split,
};
