//! Operator-norm Lyapunov selection for continuous frames and POVMs.
//!
//! Given a Bessel family `{φ_t}` over a non-atomic measure space and a weight
//! `τ: X → [0, 1]`, the selection routines build a set `E` whose partial frame
//! operator `S_{φ,E} = ∫_E φ_t φ_t* dμ` approximates the weighted frame
//! operator `S_{√τφ,X}` in operator norm, with explicit error and measure
//! budgets.

pub mod error;
pub mod fixtures;
pub mod frame;
pub mod generator;
pub mod measure_space;
pub mod operator;
pub mod povm;
pub mod quantize;
pub mod select;
pub mod selection;
pub mod util;

pub use error::{Error, Result};
pub use frame::{Complex64, FrameVector, PCFrame, WeightFn};
pub use generator::{GenFrame, Generator};
pub use measure_space::{Cell, CellId, Interval, IntervalLayout, MeasureSpace};
pub use operator::{loewner_leq, HermitianOp};
pub use povm::{povm_evaluate, povm_select, OperatorDensity};
pub use quantize::{quantize, QuantizeCertificate};
pub use select::discrete::{aw_subset_exhaustive, aw_subset_heuristic, halving_gap_exhaustive, Strategy};
pub use select::{budget_select, dyadic_bisect, lyapunov_select, proportional_select, FrameRef, SelectionReport};
pub use selection::{Kept, Selection};
