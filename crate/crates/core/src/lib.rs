//! Exact-arithmetic laboratory for finite stages of Bourgain-Delbaen spaces:
//! the mixed-Tsirelson base space, self-determined subsets and their
//! quotients, the conditional saturation layer, and the witness suites that
//! check the identities and estimates constructively at desk scale.
//!
//! All arithmetic is exact rational with unbounded integers; there is no
//! floating point anywhere in the crate.

pub mod error;
pub mod rational;
pub mod schedule;
pub mod nthreshold;
pub mod node;
pub mod stage;
pub mod vector;

pub use error::{Error, Result};
pub use node::{AlphaAverage, AvgEntry, AvgKind, Certificate, GammaNode, NodeId, RankInterval};
pub use schedule::{NRule, ScheduleMode, StrictReport, WeightSchedule};
pub use stage::{SpaceStage, SpaceTag};
pub use vector::{evaluate, eval_average, eval_e_star, eval_e_star_proj, Atom, BlockVector, DualFunctional};
