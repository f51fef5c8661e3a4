//! Refactoring taxonomy, the prompt action catalog, and a heuristic detector
//! of refactorings between two Dockerfile versions.

mod detect;
mod taxonomy;

pub use detect::{detect_refactorings, Detector, RefactoringAction};
pub use taxonomy::{
    action_catalog, RefactoringType, Taxonomy, TaxonomyError, TypeDefinition, ACTIVE_TYPE_COUNT,
};
