//! Sparse-dense matrix multiplication (SpMM) on a brick-bitmap sparse format.
//!
//! The crate is organized around four pieces:
//!
//! - [`sparse_io`]: Matrix Market ingestion, canonical COO/CSR/dense types,
//!   and seeded synthetic matrix generators.
//! - [`hrpb`]: the HRPB container (Hierarchical Row-Panel-Blocking): row
//!   panels, active-column compaction, 16x4 brick occupancy bitmaps laid out
//!   in brick-CSC order, plus a binary file codec.
//! - [`emulator`]: an instrumented, bit-exact emulation of the tensor-core
//!   SpMM kernel that traverses HRPB, together with a brute-force CSR
//!   reference oracle.
//! - [`model`]: the analytical quantities derived from an HRPB build --
//!   brick-column density alpha, vertical reuse beta, staging-tier
//!   operational intensity -- and the Low/Medium/High synergy classifier.

pub mod emulator;
pub mod hrpb;
pub mod model;
pub mod sparse_io;

pub use emulator::{spmm_hrpb, spmm_reference, verify, ExecConfig, ExecStats, VerifyReport};
pub use hrpb::{csr_to_hrpb, hrpb_to_csr, Hrpb, HrpbConfig, HrpbError};
pub use model::{classify_synergy, model_report, ModelReport, Synergy};
pub use sparse_io::{CooMatrix, CsrMatrix, DenseMatrix};
