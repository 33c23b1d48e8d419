//! Nonlinear blending of FIR system-level controllers.
//!
//! The crate covers the whole pipeline: plants and FIR closed-loop maps
//! ([`clm`]), projection nonlinearities ([`projection`]), disturbance moments
//! ([`moments`]), a sparse QP engine ([`qp`]), constrained-LQR synthesis of
//! blended maps ([`synthesis`]), controller realizations with anti-windup
//! ([`controller`]) and closed-loop simulation including a localized
//! message-passing runtime ([`sim`]).

pub mod clm;
pub mod controller;
pub mod error;
pub mod linalg;
pub mod moments;
pub mod projection;
pub mod qp;
pub mod quadrature;
pub mod sim;
pub mod synthesis;

pub use clm::{blend_apply, clm_convolve, peak_gain, validate_fir_clm, BlendClm, Closure, FirClm, LinearSystem, ValidationReport};
pub use controller::{min_tau, AntiWindupController, Controller, SlController};
pub use error::{ConstraintFamily, Error, Result};
pub use moments::{alpha_moments, build_sigma_w, AlphaMoments, DisturbanceModel};
pub use projection::{project, zone_decompose, ProjectionKind, ProjectionSpec};
pub use qp::{brute_force_oracle, solve, QpProblem, QpSettings, QpSolution, QpStatus};
pub use synthesis::{synthesize_blend, synthesize_linear, LocalityMask, SafetySpec, SynthesisResult, SynthesisSetup};
