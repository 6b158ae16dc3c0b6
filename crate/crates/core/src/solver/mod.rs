//! The discrimination SDP: construction, interior-point solution and certificates.

pub mod certificate;
pub mod cone;
pub mod discrimination;

pub use certificate::{
    block_gap, verify_certificate, verify_certificate_with, weak_duality_gap, ConditionResidual,
    DualCertificate, VerificationReport, VerificationTolerances,
};
pub use cone::{IpmOptions, IterateRecord, SolveStatus};
pub use discrimination::{build_sdp, solve, SdpProblem, SolveReport, SolverOptions};
