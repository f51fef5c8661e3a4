use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of refactoring types the taxonomy must mark active.
pub const ACTIVE_TYPE_COUNT: usize = 10;

const DEFAULT_TAXONOMY: &str = include_str!("../../assets/taxonomy.json");

/// Refactoring type names.
///
/// The detector knows how to recognize every named variant except
/// `MoveStage` and `ExtractRunInstruction`, which exist only so a taxonomy
/// that tries to activate them can be rejected by name. `Custom` types may be
/// listed in a taxonomy for the prompt catalog but are never detected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefactoringType {
    ExtractStage,
    InlineStage,
    InlineRunInstruction,
    SortInstructions,
    UpdateImageTag,
    UpdateBaseImage,
    RenameImage,
    ReplaceAddWithCopy,
    ExtractVariable,
    CombineEnvInstructions,
    MoveStage,
    ExtractRunInstruction,
    /// Residual edit no active type explains.
    Unclassified,
    Custom(String),
}

impl RefactoringType {
    /// Types every taxonomy must keep active.
    pub const REQUIRED: [RefactoringType; 7] = [
        RefactoringType::ExtractStage,
        RefactoringType::InlineStage,
        RefactoringType::InlineRunInstruction,
        RefactoringType::SortInstructions,
        RefactoringType::UpdateImageTag,
        RefactoringType::UpdateBaseImage,
        RefactoringType::RenameImage,
    ];

    pub fn name(&self) -> &str {
        match self {
            RefactoringType::ExtractStage => "ExtractStage",
            RefactoringType::InlineStage => "InlineStage",
            RefactoringType::InlineRunInstruction => "InlineRunInstruction",
            RefactoringType::SortInstructions => "SortInstructions",
            RefactoringType::UpdateImageTag => "UpdateImageTag",
            RefactoringType::UpdateBaseImage => "UpdateBaseImage",
            RefactoringType::RenameImage => "RenameImage",
            RefactoringType::ReplaceAddWithCopy => "ReplaceAddWithCopy",
            RefactoringType::ExtractVariable => "ExtractVariable",
            RefactoringType::CombineEnvInstructions => "CombineEnvInstructions",
            RefactoringType::MoveStage => "MoveStage",
            RefactoringType::ExtractRunInstruction => "ExtractRunInstruction",
            RefactoringType::Unclassified => "Unclassified",
            RefactoringType::Custom(name) => name,
        }
    }

    /// Recognized but never allowed to be active.
    pub fn is_omitted(&self) -> bool {
        matches!(
            self,
            RefactoringType::MoveStage | RefactoringType::ExtractRunInstruction
        )
    }
}

impl FromStr for RefactoringType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let known = [
            RefactoringType::ExtractStage,
            RefactoringType::InlineStage,
            RefactoringType::InlineRunInstruction,
            RefactoringType::SortInstructions,
            RefactoringType::UpdateImageTag,
            RefactoringType::UpdateBaseImage,
            RefactoringType::RenameImage,
            RefactoringType::ReplaceAddWithCopy,
            RefactoringType::ExtractVariable,
            RefactoringType::CombineEnvInstructions,
            RefactoringType::MoveStage,
            RefactoringType::ExtractRunInstruction,
            RefactoringType::Unclassified,
        ];
        Ok(known
            .into_iter()
            .find(|t| t.name() == s)
            .unwrap_or_else(|| RefactoringType::Custom(s.to_owned())))
    }
}

impl fmt::Display for RefactoringType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for RefactoringType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RefactoringType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDefinition {
    pub name: RefactoringType,
    pub definition: String,
    pub active: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed taxonomy: {0}")]
    Json(#[from] serde_json::Error),
    #[error("taxonomy defines {0} active types, expected {ACTIVE_TYPE_COUNT}")]
    ActiveCount(usize),
    #[error("{0} is an omitted type and cannot be active")]
    OmittedActive(RefactoringType),
    #[error("required type {0} is missing or inactive")]
    MissingRequired(RefactoringType),
    #[error("type {0} is listed more than once")]
    Duplicate(RefactoringType),
    #[error("type {0} has an empty definition")]
    EmptyDefinition(RefactoringType),
}

/// Validated set of refactoring types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    types: Vec<TypeDefinition>,
}

#[derive(Deserialize)]
struct TaxonomyFile {
    types: Vec<TypeDefinition>,
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(text)?;
        Self::new(file.types)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn new(types: Vec<TypeDefinition>) -> Result<Self, TaxonomyError> {
        for (i, t) in types.iter().enumerate() {
            if types[..i].iter().any(|o| o.name == t.name) {
                return Err(TaxonomyError::Duplicate(t.name.clone()));
            }
            if t.active && t.name.is_omitted() {
                return Err(TaxonomyError::OmittedActive(t.name.clone()));
            }
            if t.active && t.definition.trim().is_empty() {
                return Err(TaxonomyError::EmptyDefinition(t.name.clone()));
            }
        }
        let active = types.iter().filter(|t| t.active).count();
        if active != ACTIVE_TYPE_COUNT {
            return Err(TaxonomyError::ActiveCount(active));
        }
        for required in RefactoringType::REQUIRED {
            if !types.iter().any(|t| t.active && t.name == required) {
                return Err(TaxonomyError::MissingRequired(required));
            }
        }
        Ok(Taxonomy { types })
    }

    pub fn active(&self) -> impl Iterator<Item = &TypeDefinition> {
        self.types.iter().filter(|t| t.active)
    }

    pub fn is_active(&self, t: &RefactoringType) -> bool {
        self.active().any(|d| &d.name == t)
    }

    pub fn definition(&self, t: &RefactoringType) -> Option<&str> {
        self.types
            .iter()
            .find(|d| &d.name == t)
            .map(|d| d.definition.as_str())
    }

    /// Prompt text listing each active type and its definition, in file order.
    pub fn action_catalog(&self) -> String {
        let mut out = String::new();
        for t in self.active() {
            out.push_str("- ");
            out.push_str(t.name.name());
            out.push_str(": ");
            out.push_str(t.definition.trim());
            out.push('\n');
        }
        out
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Taxonomy::from_json(DEFAULT_TAXONOMY).expect("bundled taxonomy is valid")
    }
}

/// Catalog text for the bundled taxonomy.
pub fn action_catalog() -> String {
    Taxonomy::default().action_catalog()
}
