//! Feature construction from account panels.
//!
//! * [`def1`]: 30 continuous, size-normalized window variables.
//! * [`def3`]: 5 discretized variables.
//! * [`def2`]: 50 raw window summaries and their pairwise arithmetic interactions,
//!   with staged boosting-based selection.
//! * [`sector`]: ordering-based numeric encoding of a categorical column.

pub mod def1;
pub mod def2;
pub mod def3;
mod matrix;
pub mod sector;
mod window;

pub use def1::{compute_def1, compute_def1_with, DEF1_COLUMNS};
pub use def2::{
    compute_def2_base, generate_interactions, interaction_family, staged_interaction_selection,
    ArithmeticOp, StagedSelection,
};
pub use def3::{compute_def3, Def3Thresholds};
pub use matrix::{read_manifest, ColumnInfo, FeatureMatrix, RowId, MISSING};
pub use sector::{encode_sector, SectorEncoding};
pub use window::{NormalizationBase, WindowStats};
