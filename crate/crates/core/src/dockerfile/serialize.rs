use super::ast::DockerfileAst;

/// Renders an AST back to Dockerfile text.
///
/// Instructions unchanged since parsing are emitted exactly as written, along
/// with the comments and blank lines around them; modified or synthesized
/// instructions are rendered canonically on a single line (heredoc payloads
/// keep their embedded newlines).
pub fn serialize(ast: &DockerfileAst) -> String {
    let mut out = String::with_capacity(ast.raw_text.len() + 64);
    for ins in ast.instructions() {
        let leading = &ins.origin.leading;
        if !out.is_empty() && !out.ends_with('\n') && !leading.starts_with('\n') {
            out.push('\n');
        }
        out.push_str(leading);
        match ins.source_text() {
            Some(raw) => out.push_str(raw),
            None => out.push_str(&ins.render()),
        }
    }
    if ast.trailing.is_empty() && !out.ends_with('\n') && ast.raw_text.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&ast.trailing);
    out
}
