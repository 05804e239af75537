//! Balanced-truncation model order reduction for multi-port RLCk circuits.
//!
//! Two reducers share one back end:
//!
//! - [`bt::reduce_dense`] solves the full Gramian Lyapunov equations with
//!   Bartels-Stewart and balances by the square-root method. It is exact and
//!   serves as the reference for small models.
//! - [`eksm::reduce_eksm`] builds extended Krylov subspaces for both Gramians,
//!   solves projected Lyapunov equations, and stops once the reduced transfer
//!   function settles on a frequency grid.
//!
//! Netlists are assembled into MNA descriptor form by [`netlist`], and
//! [`freq`] evaluates, compares and exports frequency responses.

pub mod bt;
pub mod bundle;
pub mod eksm;
pub mod error;
pub mod freq;
pub mod gen;
pub mod linalg;
pub mod mtx;
pub mod netlist;
pub mod system;

pub use bt::{reduce_dense, HsvSpectrum, OrderRequest, Provenance, Rom};
pub use eksm::{reduce_eksm, EksmConfig, EksmReduction};
pub use error::{MorError, Result};
pub use freq::{FrequencyGrid, FrequencySweep, Spacing};
pub use netlist::{assemble_mna, parse_netlist, regularize, Netlist};
pub use system::{DescriptorSystem, LinearModel};
