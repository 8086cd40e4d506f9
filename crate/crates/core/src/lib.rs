//! Gaussian-process Bayesian optimization over discrete configuration grids.
//!
//! The surrogate is a GP with a Matérn-1/2 or categorical kernel and a
//! linear prior mean; new configurations are chosen by minimizing the lower
//! confidence bound over the unobserved grid.

pub mod acquisition;
pub mod analysis;
pub mod benchfn;
pub mod design;
pub mod gp;
pub mod space;
pub mod tuner;

pub use acquisition::{lcb, select_next, AcquisitionError, KappaSchedule};
pub use design::{lhd_sample, InitialDesign};
pub use gp::{GpError, GpModel, Hyperparams, KernelFamily, ObservationSet};
pub use space::{ConfigPoint, ConfigSpace, ParameterDef, SpaceError, VisitedSet};
pub use tuner::{run_baseline, run_bo4co, BaselineKind, BudgetConfig, RunTrace, SurrogateConfig};
