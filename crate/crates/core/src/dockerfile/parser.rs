use std::sync::OnceLock;

use regex::Regex;

use super::ast::{
    Comment, DockerfileAst, Flag, ImageRef, Instruction, InstructionKind, Origin, SourceSpan, Stage,
};
use super::SyntaxError;

/// One physical line with its byte range in the source.
struct Line<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn split_lines(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            lines.push(Line {
                text: text[start..i].strip_suffix('\r').unwrap_or(&text[start..i]),
                start,
                end: i,
            });
            start = i + 1;
        }
    }
    if start < text.len() {
        lines.push(Line {
            text: text[start..].strip_suffix('\r').unwrap_or(&text[start..]),
            start,
            end: text.len(),
        });
    }
    lines
}

fn heredoc_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"<<(-?)(["']?)([A-Za-z_][A-Za-z0-9_]*)(["']?)"#).unwrap())
}

fn flag_name_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9-]*$").unwrap())
}

/// A logical instruction before keyword dispatch.
struct Logical {
    text: String,
    start_line: usize,
    end_line: usize,
    raw_start: usize,
    raw_end: usize,
}

/// Parses Dockerfile source into an AST.
pub fn parse(text: &str) -> Result<DockerfileAst, SyntaxError> {
    let lines = split_lines(text);
    let mut escape = '\\';
    let mut comments = Vec::new();
    let mut logicals: Vec<(Logical, String)> = Vec::new();
    let mut trivia_start = 0usize;
    let mut directives_open = true;
    let mut i = 0;

    while i < lines.len() {
        let line = &lines[i];
        let trimmed = line.text.trim();
        if trimmed.is_empty() {
            directives_open = false;
            i += 1;
            continue;
        }
        if let Some(body) = trimmed.strip_prefix('#') {
            if directives_open {
                if let Some((key, value)) = body.trim().split_once('=') {
                    if key.trim().eq_ignore_ascii_case("escape") {
                        match value.trim() {
                            "`" => escape = '`',
                            "\\" => escape = '\\',
                            other => {
                                return Err(SyntaxError::new(
                                    i + 1,
                                    format!("invalid escape directive `{other}`"),
                                ))
                            }
                        }
                    }
                } else {
                    directives_open = false;
                }
            }
            comments.push(Comment {
                span: SourceSpan::line(i + 1),
                text: trimmed.to_owned(),
            });
            i += 1;
            continue;
        }
        directives_open = false;

        let start_line = i + 1;
        let raw_start = line.start;
        let mut folded = String::new();
        let mut current = line.text;
        loop {
            let t = current.trim_end();
            match t.strip_suffix(escape) {
                Some(head) if i + 1 < lines.len() => {
                    folded.push_str(head);
                    i += 1;
                    // comment and blank lines inside a continuation are dropped
                    while i < lines.len() {
                        let next = lines[i].text.trim();
                        if next.starts_with('#') {
                            comments.push(Comment {
                                span: SourceSpan::line(i + 1),
                                text: next.to_owned(),
                            });
                            i += 1;
                        } else if next.is_empty() && i + 1 < lines.len() {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    current = lines[i].text;
                }
                Some(head) => {
                    folded.push_str(head);
                    break;
                }
                None => {
                    folded.push_str(current);
                    break;
                }
            }
        }

        // heredocs are consumed opaquely, body lines appended to the payload
        let markers: Vec<(bool, String)> = heredoc_markers(&folded);
        for (strip_tabs, delimiter) in markers {
            loop {
                i += 1;
                if i >= lines.len() {
                    return Err(SyntaxError::new(
                        start_line,
                        format!("unterminated heredoc `{delimiter}`"),
                    ));
                }
                let body = lines[i].text;
                folded.push('\n');
                folded.push_str(body);
                let candidate = if strip_tabs {
                    body.trim_start_matches('\t')
                } else {
                    body
                };
                if candidate == delimiter {
                    break;
                }
            }
        }

        let end_line = i + 1;
        let raw_end = lines[i].end;
        let leading = text[trivia_start..raw_start].to_owned();
        trivia_start = raw_end;
        logicals.push((
            Logical {
                text: folded,
                start_line,
                end_line,
                raw_start,
                raw_end,
            },
            leading,
        ));
        i += 1;
    }

    let trailing = text[trivia_start..].to_owned();
    build_ast(text, logicals, comments, trailing)
}

fn heredoc_markers(folded: &str) -> Vec<(bool, String)> {
    let (keyword, _) = split_word(folded.trim_start());
    let kind = InstructionKind::from_keyword(keyword);
    if !matches!(
        kind,
        Some(InstructionKind::Run | InstructionKind::Copy | InstructionKind::Add)
    ) {
        return Vec::new();
    }
    heredoc_regex()
        .captures_iter(folded)
        .filter(|c| c[2] == c[4])
        .map(|c| (&c[1] == "-", c[3].to_owned()))
        .collect()
}

fn split_word(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(pos) => (&s[..pos], s[pos..].trim_start()),
        None => (s, ""),
    }
}

fn build_ast(
    text: &str,
    logicals: Vec<(Logical, String)>,
    comments: Vec<Comment>,
    trailing: String,
) -> Result<DockerfileAst, SyntaxError> {
    let mut stages: Vec<Stage> = Vec::new();
    let mut global_args = Vec::new();

    for (logical, leading) in logicals {
        let mut instruction = parse_instruction(&logical)?;
        instruction.origin = Origin {
            leading,
            raw: Some((
                text[logical.raw_start..logical.raw_end].to_owned(),
                instruction.semantic(),
            )),
        };
        let line = logical.start_line;

        match instruction.kind {
            InstructionKind::From => {
                let stage = make_stage(&stages, instruction, line)?;
                stages.push(stage);
            }
            InstructionKind::Arg if stages.is_empty() => global_args.push(instruction),
            kind => {
                if stages.is_empty() {
                    return Err(SyntaxError::new(
                        line,
                        format!("{kind} instruction before the first FROM"),
                    ));
                }
                stages.last_mut().unwrap().instructions.push(instruction);
            }
        }
    }

    if stages.is_empty() {
        let line = global_args
            .last()
            .map_or(1, |a: &Instruction| a.span.end_line);
        return Err(SyntaxError::new(line, "no FROM instruction"));
    }

    let aliases = stage_aliases(&stages);
    for (i, stage) in stages.iter().enumerate() {
        for ins in stage.body() {
            if let Some(src) = ins.copy_source_stage() {
                check_stage_reference(&aliases, i, src, ins.span.start_line)?;
            }
        }
    }

    Ok(DockerfileAst {
        stages,
        global_args,
        raw_text: text.to_owned(),
        comments,
        trailing,
    })
}

fn stage_aliases(stages: &[Stage]) -> Vec<Option<String>> {
    stages.iter().map(|s| s.alias.clone()).collect()
}

/// A `--from` value must name an earlier stage, an earlier stage index, or an
/// external image; a later stage's alias or a forward index is rejected.
fn check_stage_reference(
    aliases: &[Option<String>],
    current: usize,
    reference: &str,
    line: usize,
) -> Result<(), SyntaxError> {
    if let Ok(idx) = reference.parse::<usize>() {
        if idx >= current {
            return Err(SyntaxError::new(
                line,
                format!("--from={reference} does not refer to an earlier stage"),
            ));
        }
        return Ok(());
    }
    let later = aliases[current..]
        .iter()
        .flatten()
        .any(|a| a.eq_ignore_ascii_case(reference));
    let earlier = aliases[..current]
        .iter()
        .flatten()
        .any(|a| a.eq_ignore_ascii_case(reference));
    if later && !earlier {
        return Err(SyntaxError::new(
            line,
            format!("--from={reference} refers to the current or a later stage"),
        ));
    }
    Ok(())
}

fn make_stage(
    stages: &[Stage],
    instruction: Instruction,
    line: usize,
) -> Result<Stage, SyntaxError> {
    let args = &instruction.args;
    let alias = match args.len() {
        1 => None,
        3 if args[1].eq_ignore_ascii_case("as") => Some(args[2].clone()),
        _ => return Err(SyntaxError::new(line, "FROM expects `<image> [AS <name>]`")),
    };
    if let Some(a) = &alias {
        if stages
            .iter()
            .filter_map(|s| s.alias.as_deref())
            .any(|existing| existing.eq_ignore_ascii_case(a))
        {
            return Err(SyntaxError::new(
                line,
                format!("duplicate stage name `{a}`"),
            ));
        }
    }
    let image = &args[0];
    let base = if stages
        .iter()
        .filter_map(|s| s.alias.as_deref())
        .any(|existing| existing.eq_ignore_ascii_case(image))
    {
        ImageRef::stage(image)
    } else {
        ImageRef::parse(image).map_err(|m| SyntaxError::new(line, m))?
    };
    Ok(Stage {
        base,
        alias,
        instructions: vec![instruction],
    })
}

fn parse_instruction(logical: &Logical) -> Result<Instruction, SyntaxError> {
    let line = logical.start_line;
    let (keyword, mut rest) = split_word(logical.text.trim_start());
    let kind = InstructionKind::from_keyword(keyword)
        .ok_or_else(|| SyntaxError::new(line, format!("unknown instruction: {keyword}")))?;

    let mut flags = Vec::new();
    if kind.accepts_flags() {
        while let Some(after) = rest.strip_prefix("--") {
            let (token, remainder) = split_word(after);
            let (name, value) = match token.split_once('=') {
                Some((n, v)) => (n, Some(v)),
                None => (token, None),
            };
            if !flag_name_regex().is_match(name) {
                return Err(SyntaxError::new(
                    line,
                    format!("malformed flag `--{token}` on {kind}"),
                ));
            }
            flags.push(Flag::new(name, value));
            rest = remainder;
        }
    }

    let payload = rest.trim();
    if payload.is_empty() {
        return Err(SyntaxError::new(
            line,
            format!("{kind} requires at least one argument"),
        ));
    }

    let json = if payload.starts_with('[') {
        serde_json::from_str::<Vec<String>>(payload).ok()
    } else {
        None
    };

    let (args, json_form) = if kind.keeps_payload() {
        (vec![payload.to_owned()], json.is_some())
    } else if let Some(items) = json.filter(|_| {
        matches!(
            kind,
            InstructionKind::Copy | InstructionKind::Add | InstructionKind::Volume
        )
    }) {
        (items, true)
    } else {
        (shell_tokens(payload), false)
    };

    match kind {
        InstructionKind::Copy | InstructionKind::Add if args.len() < 2 => {
            return Err(SyntaxError::new(
                line,
                format!("{kind} requires at least a source and a destination"),
            ))
        }
        InstructionKind::Onbuild => {
            let (inner, _) = split_word(payload);
            match InstructionKind::from_keyword(inner) {
                Some(
                    InstructionKind::Onbuild | InstructionKind::From | InstructionKind::Maintainer,
                )
                | None => {
                    return Err(SyntaxError::new(
                        line,
                        format!("invalid ONBUILD trigger `{inner}`"),
                    ))
                }
                Some(_) => {}
            }
        }
        _ => {}
    }

    Ok(Instruction {
        kind,
        flags,
        args,
        json_form,
        span: SourceSpan::new(logical.start_line, logical.end_line),
        origin: Origin::default(),
    })
}

/// Splits on unquoted whitespace, keeping quote characters in the tokens.
pub(crate) fn shell_tokens(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match (quote, c) {
            (None, c) if c.is_whitespace() => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            (None, '"' | '\'') => {
                quote = Some(c);
                current.push(c);
            }
            (Some(q), c) if c == q => {
                quote = None;
                current.push(c);
            }
            (_, '\\') => {
                current.push(c);
                if let Some(next) = chars.next() {
                    current.push(next);
                }
            }
            _ => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
