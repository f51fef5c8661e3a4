use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{DockerfileAst, Instruction, InstructionKind};

const DEFAULT_SHELL: [&str; 2] = ["/bin/sh", "-c"];

/// Effective startup commands of the final image, in exec form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StartupCommands {
    pub cmd: Option<Vec<String>>,
    pub entrypoint: Option<Vec<String>>,
}

/// What the final image ships and runs: context files added via `COPY`/`ADD`
/// and the startup commands. Two Dockerfiles with equal fingerprints are
/// considered behavior-equivalent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionalFingerprint {
    pub copy_add_entries: BTreeSet<(String, String)>,
    pub startup: StartupCommands,
}

/// Computes the behavior fingerprint.
///
/// `copy_add_entries` collects context-sourced `COPY`/`ADD` pairs from the final
/// stage and every stage it reads from (base stage or `COPY --from`), so that
/// moving build steps into a builder stage keeps the application files the
/// image is built from. `COPY --from` pairs themselves are excluded. Shell-form
/// commands become `[shell..., text]` using the stage's effective `SHELL`.
pub fn functional_fingerprint(ast: &DockerfileAst) -> FunctionalFingerprint {
    let final_index = ast.stages.len() - 1;
    let mut visited = BTreeSet::new();
    let mut queue = vec![final_index];
    while let Some(i) = queue.pop() {
        if visited.insert(i) {
            queue.extend(ast.stage_dependencies(i));
        }
    }

    let mut entries = BTreeSet::new();
    for &i in &visited {
        for ins in ast.stages[i].body() {
            let context_sourced = match ins.kind {
                InstructionKind::Add => true,
                InstructionKind::Copy => ins.flag("from").is_none(),
                _ => false,
            };
            if !context_sourced {
                continue;
            }
            if let Some((dest, sources)) = ins.args.split_last() {
                for src in sources {
                    entries.insert((src.clone(), dest.clone()));
                }
            }
        }
    }

    FunctionalFingerprint {
        copy_add_entries: entries,
        startup: startup_commands(ast, final_index),
    }
}

/// Follows the base-stage chain until a CMD/ENTRYPOINT is found.
fn startup_commands(ast: &DockerfileAst, final_index: usize) -> StartupCommands {
    let mut chain = vec![final_index];
    let mut current = final_index;
    while let Some(alias) = ast.stages[current].base.stage_alias.as_deref() {
        match ast.resolve_stage(alias, current) {
            Some(prev) if !chain.contains(&prev) => {
                chain.push(prev);
                current = prev;
            }
            _ => break,
        }
    }
    // instructions of the chain from the root stage to the final stage
    let instructions: Vec<&Instruction> = chain
        .iter()
        .rev()
        .flat_map(|&i| ast.stages[i].body().iter())
        .collect();

    let mut shell: Vec<String> = DEFAULT_SHELL.iter().map(|s| s.to_string()).collect();
    let mut startup = StartupCommands::default();
    for ins in instructions {
        match ins.kind {
            InstructionKind::Shell => {
                if let Some(tokens) = ins.exec_tokens() {
                    shell = tokens;
                }
            }
            InstructionKind::Cmd => startup.cmd = Some(exec_form(ins, &shell)),
            InstructionKind::Entrypoint => startup.entrypoint = Some(exec_form(ins, &shell)),
            _ => {}
        }
    }
    startup
}

fn exec_form(ins: &Instruction, shell: &[String]) -> Vec<String> {
    if let Some(tokens) = ins.exec_tokens() {
        return tokens;
    }
    let text = ins.text();
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    shell
        .iter()
        .cloned()
        .chain(std::iter::once(normalized))
        .collect()
}
