//! Sums-of-squares certificates `A = B*B` through Gram matrices.
//!
//! A Hermitian polynomial `A` of bidegree `(w, M)` is a sum of squares with
//! factor supported on `W_{≤w} × Y_{≤M′}` exactly when there is a psd
//! matrix `Z`, indexed by those monomials, whose blocks summed over each
//! coset `{(r, c) : r⁻¹c = α}` equal `A_α`. Any such `Z = 𝔅*𝔅` yields the
//! factor `B = Σ_m 𝔅_m·m`, with `𝔅_m` the columns of `𝔅` belonging to `m`.

mod certify;
mod dykstra;
mod gram;
mod ipm;
mod polish;
mod poly;

pub use certify::{
    certify, certify_at, certify_z2_psd, certify_z2_psd_at, factor_gram, symbolic_residual, z2_spec, CertifyOptions,
    CertifyOutcome, GramCertificate, LevelReport,
};
pub use dykstra::{solve_feasibility, Feasibility, Solution, SolverOptions};
pub use gram::{gram_constraints, Coset, GramSystem};
pub use ipm::{maximize_identity_block, IpmResult};
pub use polish::{gauss_newton, low_rank_factor, polish};
pub use poly::{convolve_adjoint, y_only, NcPoly};
