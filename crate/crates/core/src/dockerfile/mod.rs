//! Dockerfile syntax tree, lossless parser and serializer, behavior
//! fingerprinting, and prompt token estimation.

mod ast;
mod fingerprint;
mod parser;
mod serialize;
mod tokens;

pub use ast::{
    Comment, DockerfileAst, Flag, ImageRef, Instruction, InstructionKind, SourceSpan, Stage,
};
pub use fingerprint::{functional_fingerprint, FunctionalFingerprint, StartupCommands};
pub use parser::parse;
pub use serialize::serialize;
pub use tokens::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            message: message.into(),
        }
    }
}

impl std::str::FromStr for DockerfileAst {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
