use crate::dockerfile::{parse, SyntaxError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractionError {
    #[error("response contains no Dockerfile")]
    NotFound,
    /// Dockerfile-shaped text that does not parse; `text` is kept so callers
    /// can report it as a failed build.
    #[error("response Dockerfile does not parse: {error}")]
    Unparseable { text: String, error: SyntaxError },
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn first_fenced_block(response: &str) -> Option<String> {
    let mut lines = response.split_inclusive('\n');
    lines.find(|l| is_fence(l))?;
    let mut body = String::new();
    for line in lines {
        if is_fence(line) {
            return Some(body);
        }
        body.push_str(line);
    }
    // unterminated fence: take the rest
    Some(body)
}

fn starts_like_dockerfile(response: &str) -> bool {
    let Some(first) = response.lines().find(|l| !l.trim().is_empty()) else {
        return false;
    };
    let first = first.trim_start();
    if first.starts_with('#') {
        return true;
    }
    let word = first.split_whitespace().next().unwrap_or("");
    word.eq_ignore_ascii_case("FROM") || word.eq_ignore_ascii_case("ARG")
}

/// The Dockerfile in a completion: the body of the first fenced block, or the
/// whole response when it starts like a Dockerfile. Lines keep their
/// terminators, so a fenced `serialize(ast)` comes back unchanged.
pub fn extract_dockerfile(response: &str) -> Result<String, ExtractionError> {
    let text = match first_fenced_block(response) {
        Some(block) => block,
        None if starts_like_dockerfile(response) => response.to_owned(),
        None => return Err(ExtractionError::NotFound),
    };
    match parse(&text) {
        Ok(_) => Ok(text),
        Err(error) => Err(ExtractionError::Unparseable { text, error }),
    }
}
