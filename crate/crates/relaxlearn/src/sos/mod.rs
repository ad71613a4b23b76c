//! Sum-of-squares relaxations: monomial bases, moment programs,
//! pseudo-expectations, a first-order SDP solver and ℓ₁ denoising over the
//! relaxed dictionary set.

pub mod denoise;
pub mod holder;
pub mod monomial;
pub mod pexp;
pub mod program;
pub mod solver;

pub use denoise::{denoise_over_qsos, qsos_linear_sup, QsosConfig, QsosSolution};
pub use holder::holder_check;
pub use monomial::{enumerate_monomials, Monomial, MonomialBasis};
pub use pexp::{pexp_check, point_pexp, point_pexp_from_factors, CheckReport, PseudoExpectation};
pub use program::{build_program, BForm, DictLayout, DictProgramParams, ProgramBuilder, SoSProgram};
pub use solver::{solve_sdp, L1Term, SolveOutcome, SolverOptions};
