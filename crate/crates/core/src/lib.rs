//! Parameters of association for `2^k` binary contingency tables.
//!
//! Cells use row-major order with variable 1 the most significant: the entry
//! for `t = (j_1, ..., j_k)` lives at `sum_i (j_i - 1) * 2^(k - i)`.
//!
//! - [`table`]: indexing, parity, slicing, collapsing and marginals.
//! - [`assoc`]: LOR, DI, EX, general contrasts, aggregate contrasts, Bahadur.
//! - [`param_system`]: the full parameterization over all margins and its
//!   inverses.
//! - [`structure`]: canonicalization and the pair/peak decomposition.
//! - [`collapse`]: Simpson's paradox checks, searches and property batteries.
//! - [`sampling`]: decision probabilities for the sign of DI.
//! - [`io`]: file formats and report envelopes.

pub mod assoc;
pub mod collapse;
pub mod error;
pub mod io;
pub mod param_system;
pub mod random;
pub mod sampling;
pub mod structure;
pub mod table;

pub use assoc::{AssociationKind, Evaluation, ScalarFn};
pub use error::{Error, Result};
pub use param_system::{LorFitOptions, ParamKind, ParamSet};
pub use table::{BinaryTable, CellIndex, MarginMask, Parity, TableConfig};
