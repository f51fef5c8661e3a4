use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive 1-based line range in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub end_line: usize,
}

impl SourceSpan {
    pub fn new(start_line: usize, end_line: usize) -> Self {
        debug_assert!(start_line >= 1 && start_line <= end_line);
        SourceSpan {
            start_line,
            end_line,
        }
    }

    pub fn line(line: usize) -> Self {
        SourceSpan::new(line, line)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start_line == self.end_line {
            write!(f, "{}", self.start_line)
        } else {
            write!(f, "{}-{}", self.start_line, self.end_line)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InstructionKind {
    From,
    Run,
    Copy,
    Add,
    Env,
    Arg,
    Workdir,
    Cmd,
    Entrypoint,
    Expose,
    Label,
    User,
    Volume,
    Healthcheck,
    Shell,
    Onbuild,
    Stopsignal,
    Maintainer,
}

impl InstructionKind {
    pub const ALL: [InstructionKind; 18] = [
        InstructionKind::From,
        InstructionKind::Run,
        InstructionKind::Copy,
        InstructionKind::Add,
        InstructionKind::Env,
        InstructionKind::Arg,
        InstructionKind::Workdir,
        InstructionKind::Cmd,
        InstructionKind::Entrypoint,
        InstructionKind::Expose,
        InstructionKind::Label,
        InstructionKind::User,
        InstructionKind::Volume,
        InstructionKind::Healthcheck,
        InstructionKind::Shell,
        InstructionKind::Onbuild,
        InstructionKind::Stopsignal,
        InstructionKind::Maintainer,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            InstructionKind::From => "FROM",
            InstructionKind::Run => "RUN",
            InstructionKind::Copy => "COPY",
            InstructionKind::Add => "ADD",
            InstructionKind::Env => "ENV",
            InstructionKind::Arg => "ARG",
            InstructionKind::Workdir => "WORKDIR",
            InstructionKind::Cmd => "CMD",
            InstructionKind::Entrypoint => "ENTRYPOINT",
            InstructionKind::Expose => "EXPOSE",
            InstructionKind::Label => "LABEL",
            InstructionKind::User => "USER",
            InstructionKind::Volume => "VOLUME",
            InstructionKind::Healthcheck => "HEALTHCHECK",
            InstructionKind::Shell => "SHELL",
            InstructionKind::Onbuild => "ONBUILD",
            InstructionKind::Stopsignal => "STOPSIGNAL",
            InstructionKind::Maintainer => "MAINTAINER",
        }
    }

    /// Case-insensitive keyword lookup.
    pub fn from_keyword(word: &str) -> Option<Self> {
        InstructionKind::ALL
            .into_iter()
            .find(|k| k.keyword().eq_ignore_ascii_case(word))
    }

    /// Instructions whose argument text is kept verbatim as a single payload.
    pub fn keeps_payload(self) -> bool {
        matches!(
            self,
            InstructionKind::Run
                | InstructionKind::Cmd
                | InstructionKind::Entrypoint
                | InstructionKind::Shell
                | InstructionKind::Healthcheck
                | InstructionKind::Onbuild
        )
    }

    /// Instructions that accept `--name[=value]` flags before their arguments.
    pub fn accepts_flags(self) -> bool {
        matches!(
            self,
            InstructionKind::From
                | InstructionKind::Run
                | InstructionKind::Copy
                | InstructionKind::Add
                | InstructionKind::Healthcheck
        )
    }
}

impl fmt::Display for InstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub value: Option<String>,
}

impl Flag {
    pub fn new(name: impl Into<String>, value: Option<&str>) -> Self {
        Flag {
            name: name.into(),
            value: value.map(str::to_owned),
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Some(v) => write!(f, "--{}={}", self.name, v),
            None => write!(f, "--{}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Semantic {
    pub kind: InstructionKind,
    pub flags: Vec<Flag>,
    pub args: Vec<String>,
    pub json_form: bool,
}

/// Source text an instruction was parsed from, kept for lossless output.
#[derive(Debug, Clone, Default)]
pub(crate) struct Origin {
    /// Trivia (blank lines, comments) between the previous instruction and this one.
    pub leading: String,
    /// The instruction text exactly as written, plus the values it parsed to.
    pub raw: Option<(String, Semantic)>,
}

/// One Dockerfile instruction.
///
/// For payload instructions (`RUN`, `CMD`, `ENTRYPOINT`, `SHELL`, `HEALTHCHECK`,
/// `ONBUILD`) `args` holds a single element: the argument text after flags with
/// line continuations folded. Other instructions hold whitespace-separated
/// tokens with quoting left intact, or the decoded strings of a JSON array when
/// `json_form` is set.
#[derive(Debug, Clone)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub flags: Vec<Flag>,
    pub args: Vec<String>,
    pub json_form: bool,
    pub span: SourceSpan,
    pub(crate) origin: Origin,
}

impl PartialEq for Instruction {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.flags == other.flags
            && self.args == other.args
            && self.json_form == other.json_form
    }
}

impl Eq for Instruction {}

impl Instruction {
    /// Builds an instruction with no source text; it is rendered canonically.
    pub fn new(kind: InstructionKind, flags: Vec<Flag>, args: Vec<String>) -> Self {
        let json_form = kind.keeps_payload()
            && args
                .first()
                .is_some_and(|a| serde_json::from_str::<Vec<String>>(a).is_ok());
        Instruction {
            kind,
            flags,
            args,
            json_form,
            span: SourceSpan::line(1),
            origin: Origin::default(),
        }
    }

    /// Convenience for payload instructions such as `RUN apt-get update`.
    pub fn payload(kind: InstructionKind, text: &str) -> Self {
        Instruction::new(kind, Vec::new(), vec![text.to_owned()])
    }

    pub fn flag(&self, name: &str) -> Option<&Flag> {
        self.flags
            .iter()
            .find(|f| f.name.eq_ignore_ascii_case(name))
    }

    pub fn flag_value(&self, name: &str) -> Option<&str> {
        self.flag(name).and_then(|f| f.value.as_deref())
    }

    /// The payload text for payload instructions, or the joined tokens otherwise.
    pub fn text(&self) -> String {
        if self.kind.keeps_payload() {
            self.args.first().cloned().unwrap_or_default()
        } else if self.json_form {
            serde_json::to_string(&self.args).unwrap_or_default()
        } else {
            self.args.join(" ")
        }
    }

    /// Exec-form tokens when the payload is a JSON string array.
    pub fn exec_tokens(&self) -> Option<Vec<String>> {
        if !self.json_form {
            return None;
        }
        if self.kind.keeps_payload() {
            self.args
                .first()
                .and_then(|a| serde_json::from_str::<Vec<String>>(a).ok())
        } else {
            Some(self.args.clone())
        }
    }

    /// The source text as written, when the instruction is unchanged since parse.
    pub fn source_text(&self) -> Option<&str> {
        match &self.origin.raw {
            Some((raw, sem)) if *sem == self.semantic() => Some(raw),
            _ => None,
        }
    }

    pub(crate) fn semantic(&self) -> Semantic {
        Semantic {
            kind: self.kind,
            flags: self.flags.clone(),
            args: self.args.clone(),
            json_form: self.json_form,
        }
    }

    /// Canonical single-instruction rendering (ignores original formatting).
    pub fn render(&self) -> String {
        let mut out = String::from(self.kind.keyword());
        for flag in &self.flags {
            out.push(' ');
            out.push_str(&flag.to_string());
        }
        let body = self.text();
        if !body.is_empty() {
            out.push(' ');
            out.push_str(&body);
        }
        out
    }

    /// `COPY --from` value, if any.
    pub fn copy_source_stage(&self) -> Option<&str> {
        if self.kind == InstructionKind::Copy {
            self.flag_value("from")
        } else {
            None
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source_text() {
            Some(raw) => f.write_str(raw),
            None => f.write_str(&self.render()),
        }
    }
}

/// Image reference of a `FROM` line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub registry: Option<String>,
    pub name: String,
    pub tag: Option<String>,
    pub digest: Option<String>,
    pub stage_alias: Option<String>,
}

impl ImageRef {
    pub fn parse(text: &str) -> Result<ImageRef, String> {
        let text = text.trim();
        if text.is_empty() {
            return Err("empty image reference".into());
        }
        let (rest, digest) = match text.split_once('@') {
            Some((r, d)) if !d.is_empty() => (r, Some(d.to_owned())),
            Some(_) => return Err(format!("empty digest in image reference `{text}`")),
            None => (text, None),
        };
        let last_slash = rest.rfind('/').map_or(0, |i| i + 1);
        let (path, tag) = match rest[last_slash..].rfind(':') {
            Some(i) => {
                let split = last_slash + i;
                (&rest[..split], Some(rest[split + 1..].to_owned()))
            }
            None => (rest, None),
        };
        if tag.as_deref() == Some("") {
            return Err(format!("empty tag in image reference `{text}`"));
        }
        if tag.is_some() && digest.is_some() {
            return Err(format!(
                "image reference `{text}` carries both a tag and a digest"
            ));
        }
        let (registry, name) = match path.split_once('/') {
            Some((first, remainder))
                if first.contains('.') || first.contains(':') || first == "localhost" =>
            {
                (Some(first.to_owned()), remainder.to_owned())
            }
            _ => (None, path.to_owned()),
        };
        if name.is_empty() {
            return Err(format!("missing image name in `{text}`"));
        }
        Ok(ImageRef {
            registry,
            name,
            tag,
            digest,
            stage_alias: None,
        })
    }

    pub fn stage(alias: &str) -> ImageRef {
        ImageRef {
            registry: None,
            name: String::new(),
            tag: None,
            digest: None,
            stage_alias: Some(alias.to_owned()),
        }
    }

    pub fn is_stage(&self) -> bool {
        self.stage_alias.is_some()
    }

    /// Last path component of the repository name (`library/node` → `node`).
    pub fn short_name(&self) -> &str {
        self.name.rsplit('/').next().unwrap_or(&self.name)
    }

    /// Repository including the registry, without tag or digest.
    pub fn repository(&self) -> String {
        match &self.registry {
            Some(r) => format!("{r}/{}", self.name),
            None => self.name.clone(),
        }
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(alias) = &self.stage_alias {
            return f.write_str(alias);
        }
        f.write_str(&self.repository())?;
        if let Some(tag) = &self.tag {
            write!(f, ":{tag}")?;
        }
        if let Some(digest) = &self.digest {
            write!(f, "@{digest}")?;
        }
        Ok(())
    }
}

/// A `FROM`-delimited build stage. `instructions[0]` is always the `FROM`.
#[derive(Debug, Clone)]
pub struct Stage {
    pub base: ImageRef,
    pub alias: Option<String>,
    pub instructions: Vec<Instruction>,
}

impl PartialEq for Stage {
    fn eq(&self, other: &Self) -> bool {
        self.instructions == other.instructions
    }
}

impl Eq for Stage {}

impl Stage {
    pub fn new(base: ImageRef, alias: Option<&str>) -> Stage {
        let mut args = vec![base.to_string()];
        if let Some(a) = alias {
            args.push("AS".into());
            args.push(a.into());
        }
        Stage {
            base,
            alias: alias.map(str::to_owned),
            instructions: vec![Instruction::new(InstructionKind::From, Vec::new(), args)],
        }
    }

    pub fn from_instruction(&self) -> &Instruction {
        &self.instructions[0]
    }

    /// Instructions after the `FROM`.
    pub fn body(&self) -> &[Instruction] {
        &self.instructions[1..]
    }

    pub fn push(&mut self, instruction: Instruction) {
        self.instructions.push(instruction);
    }

    /// Replaces the base image and rewrites the `FROM` line accordingly.
    pub fn set_base(&mut self, base: ImageRef) {
        let from = &mut self.instructions[0];
        if let Some(first) = from.args.first_mut() {
            *first = base.to_string();
        }
        self.base = base;
    }

    pub fn set_alias(&mut self, alias: Option<&str>) {
        let from = &mut self.instructions[0];
        from.args.truncate(1);
        if let Some(a) = alias {
            from.args.push("AS".into());
            from.args.push(a.into());
        }
        self.alias = alias.map(str::to_owned);
    }

    pub fn span(&self) -> SourceSpan {
        let start = self.instructions[0].span.start_line;
        let end = self
            .instructions
            .iter()
            .map(|i| i.span.end_line)
            .max()
            .unwrap_or(start);
        SourceSpan::new(start, end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub span: SourceSpan,
    pub text: String,
}

/// A parsed Dockerfile.
#[derive(Debug, Clone)]
pub struct DockerfileAst {
    pub stages: Vec<Stage>,
    pub global_args: Vec<Instruction>,
    pub raw_text: String,
    pub comments: Vec<Comment>,
    pub(crate) trailing: String,
}

impl PartialEq for DockerfileAst {
    fn eq(&self, other: &Self) -> bool {
        self.stages == other.stages
            && self.global_args == other.global_args
            && self.comments.len() == other.comments.len()
            && self
                .comments
                .iter()
                .zip(&other.comments)
                .all(|(a, b)| a.text == b.text)
    }
}

impl Eq for DockerfileAst {}

impl DockerfileAst {
    pub fn final_stage(&self) -> &Stage {
        self.stages
            .last()
            .expect("a Dockerfile has at least one stage")
    }

    /// All instructions in source order, including global `ARG`s.
    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.global_args
            .iter()
            .chain(self.stages.iter().flat_map(|s| s.instructions.iter()))
    }

    /// Index of the stage a `--from` value or `FROM` base refers to, if any.
    /// Aliases are matched case-insensitively; numeric values are stage indexes.
    pub fn resolve_stage(&self, reference: &str, before: usize) -> Option<usize> {
        if let Ok(idx) = reference.parse::<usize>() {
            return (idx < before).then_some(idx);
        }
        self.stages[..before.min(self.stages.len())]
            .iter()
            .position(|s| {
                s.alias
                    .as_deref()
                    .is_some_and(|a| a.eq_ignore_ascii_case(reference))
            })
    }

    /// Stages the given stage reads from: its base stage and `COPY --from` sources.
    pub fn stage_dependencies(&self, index: usize) -> Vec<usize> {
        let stage = &self.stages[index];
        let mut deps = Vec::new();
        if let Some(alias) = &stage.base.stage_alias {
            if let Some(i) = self.resolve_stage(alias, index) {
                deps.push(i);
            }
        }
        for ins in stage.body() {
            if let Some(src) = ins.copy_source_stage() {
                if let Some(i) = self.resolve_stage(src, index) {
                    if !deps.contains(&i) {
                        deps.push(i);
                    }
                }
            }
        }
        deps
    }

    /// Inserts a stage; later stages keep their references by alias.
    pub fn insert_stage(&mut self, index: usize, stage: Stage) {
        self.stages.insert(index, stage);
    }

    pub fn line_count(&self) -> usize {
        self.raw_text.lines().count().max(1)
    }
}
