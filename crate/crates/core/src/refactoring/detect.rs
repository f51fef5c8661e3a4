use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::taxonomy::{RefactoringType, Taxonomy};
use crate::dockerfile::{
    functional_fingerprint, DockerfileAst, ImageRef, Instruction, InstructionKind, SourceSpan,
};

/// One refactoring detected between two versions of a Dockerfile.
///
/// Parameter keys per type:
/// `UpdateImageTag` image, old_tag, new_tag; `UpdateBaseImage` old_image,
/// new_image; `RenameImage` old_name, new_name; `ExtractStage` and
/// `InlineStage` stage; `InlineRunInstruction` and `CombineEnvInstructions`
/// merged_count; `SortInstructions` moved_count; `ReplaceAddWithCopy` sources;
/// `ExtractVariable` name, value; `Unclassified` detected (only when an
/// inactive type was recognized).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefactoringAction {
    #[serde(rename = "type")]
    pub kind: RefactoringType,
    pub before_spans: Vec<SourceSpan>,
    pub after_spans: Vec<SourceSpan>,
    pub params: BTreeMap<String, String>,
}

impl RefactoringAction {
    fn new(kind: RefactoringType) -> Self {
        RefactoringAction {
            kind,
            before_spans: Vec::new(),
            after_spans: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    fn spans(mut self, before: Vec<SourceSpan>, after: Vec<SourceSpan>) -> Self {
        self.before_spans = before;
        self.after_spans = after;
        self
    }

    /// The same edit seen from the other direction.
    fn inverted(self) -> Self {
        use RefactoringType::*;
        let swap = |params: BTreeMap<String, String>, a: &str, b: &str| {
            params
                .into_iter()
                .map(|(k, v)| match k.as_str() {
                    k if k == a => (b.to_owned(), v),
                    k if k == b => (a.to_owned(), v),
                    _ => (k, v),
                })
                .collect()
        };
        let (kind, params) = match self.kind {
            ExtractStage => (InlineStage, self.params),
            InlineStage => (ExtractStage, self.params),
            UpdateImageTag => (UpdateImageTag, swap(self.params, "old_tag", "new_tag")),
            UpdateBaseImage => (UpdateBaseImage, swap(self.params, "old_image", "new_image")),
            RenameImage => (RenameImage, swap(self.params, "old_name", "new_name")),
            SortInstructions => (SortInstructions, self.params),
            InlineRunInstruction => (ExtractRunInstruction, self.params),
            _ => (Unclassified, BTreeMap::new()),
        };
        RefactoringAction {
            kind,
            before_spans: self.after_spans,
            after_spans: self.before_spans,
            params,
        }
    }
}

/// Heuristic refactoring detector over a validated taxonomy.
#[derive(Debug, Clone, Default)]
pub struct Detector {
    taxonomy: Taxonomy,
}

impl Detector {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        Detector {
            taxonomy: taxonomy.clone(),
        }
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Detects the refactorings that turn `before` into `after`.
    ///
    /// Edits no active type explains are reported as `Unclassified`.
    pub fn detect(&self, before: &DockerfileAst, after: &DockerfileAst) -> Vec<RefactoringAction> {
        if before == after {
            return Vec::new();
        }
        let actions = if before.stages.len() > after.stages.len() {
            Directed::new(after, before)
                .run()
                .into_iter()
                .map(RefactoringAction::inverted)
                .collect()
        } else {
            Directed::new(before, after).run()
        };
        actions
            .into_iter()
            .map(|a| {
                if a.kind == RefactoringType::Unclassified || self.taxonomy.is_active(&a.kind) {
                    a
                } else {
                    let name = a.kind.name().to_owned();
                    RefactoringAction {
                        kind: RefactoringType::Unclassified,
                        params: BTreeMap::from([("detected".to_owned(), name)]),
                        ..a
                    }
                }
            })
            .collect()
    }
}

/// Detection with the bundled taxonomy.
pub fn detect_refactorings(
    before: &DockerfileAst,
    after: &DockerfileAst,
) -> Vec<RefactoringAction> {
    Detector::default().detect(before, after)
}

static VARIABLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}|\$([A-Za-z_][A-Za-z0-9_]*)").unwrap()
});

/// Detection for the case where `after` has at least as many stages.
struct Directed<'a> {
    before: &'a DockerfileAst,
    after: &'a DockerfileAst,
    /// (before stage, after stage)
    pairs: Vec<(usize, usize)>,
    /// after stages with no counterpart in `before`
    extra: Vec<usize>,
    /// variables defined in `after` only, with their values
    new_vars: HashMap<String, String>,
    var_uses: BTreeMap<String, (Vec<SourceSpan>, Vec<SourceSpan>)>,
    actions: Vec<RefactoringAction>,
}

/// Matching state of one aligned stage body (or the global ARG list).
struct BodyDiff<'a> {
    before: Vec<Item<'a>>,
    after: Vec<Item<'a>>,
    /// (before index, after index) of matched instructions
    matches: Vec<(usize, usize)>,
}

struct Item<'a> {
    ins: &'a Instruction,
    key: String,
    matched: bool,
}

impl<'a> Directed<'a> {
    fn new(before: &'a DockerfileAst, after: &'a DockerfileAst) -> Self {
        let pairs = align_stages(before, after);
        let extra = (0..after.stages.len())
            .filter(|a| !pairs.iter().any(|p| p.1 == *a))
            .collect();

        let defined_before = defined_variables(before);
        let mut new_vars = HashMap::new();
        for (name, value) in defined_variables(after) {
            if let Some(value) = value {
                if !defined_before.contains_key(&name) {
                    new_vars.entry(name).or_insert(value);
                }
            }
        }
        Directed {
            before,
            after,
            pairs,
            extra,
            new_vars,
            var_uses: BTreeMap::new(),
            actions: Vec::new(),
        }
    }

    fn run(mut self) -> Vec<RefactoringAction> {
        let extracting =
            !self.extra.is_empty() && stage_copy_count(self.after) > stage_copy_count(self.before);

        let mut diffs = Vec::new();
        for &(b, a) in &self.pairs.clone() {
            self.compare_from(b, a);
            let mut diff = self.body_diff(b, a);
            self.match_structural(&mut diff);
            diffs.push(diff);
        }
        let mut globals = BodyDiff {
            before: self
                .before
                .global_args
                .iter()
                .map(|i| self.item(i, None))
                .collect(),
            after: self
                .after
                .global_args
                .iter()
                .map(|i| self.item(i, None))
                .collect(),
            matches: Vec::new(),
        };
        match_exact(&mut globals);
        self.match_variables(&mut globals);

        if extracting {
            self.extract_stages(&mut diffs);
        } else {
            for &s in &self.extra {
                let stage = &self.after.stages[s];
                self.actions.push(
                    RefactoringAction::new(RefactoringType::Unclassified)
                        .spans(Vec::new(), vec![stage.span()]),
                );
            }
        }

        self.absorb_variable_definitions(&mut diffs, &mut globals);
        self.emit_variables();

        let same_behavior =
            functional_fingerprint(self.before) == functional_fingerprint(self.after);
        for diff in &diffs {
            if same_behavior {
                if let Some(action) = sort_action(diff) {
                    self.actions.push(action);
                }
            }
        }
        for diff in diffs.iter().chain(std::iter::once(&globals)) {
            let before: Vec<_> = diff
                .before
                .iter()
                .filter(|i| !i.matched)
                .map(|i| i.ins.span)
                .collect();
            let after: Vec<_> = diff
                .after
                .iter()
                .filter(|i| !i.matched)
                .map(|i| i.ins.span)
                .collect();
            if !before.is_empty() || !after.is_empty() {
                self.actions.push(
                    RefactoringAction::new(RefactoringType::Unclassified).spans(before, after),
                );
            }
        }
        self.actions
    }

    /// Aligned after-stage index for a before-stage index.
    fn map_stage(&self, before_index: usize) -> usize {
        self.pairs
            .iter()
            .find(|(b, _)| *b == before_index)
            .map_or(before_index, |(_, a)| *a)
    }

    /// Comparison key; `side` is `Some((is_before, stage))` for stage bodies so
    /// that `COPY --from` references compare by aligned stage identity.
    fn item(&self, ins: &'a Instruction, side: Option<(bool, usize)>) -> Item<'a> {
        let stage_ref = |reference: &str| -> String {
            let Some((is_before, stage)) = side else {
                return reference.to_ascii_lowercase();
            };
            if is_before {
                match self.before.resolve_stage(reference, stage) {
                    Some(i) => format!("#stage{}", self.map_stage(i)),
                    None => reference.to_ascii_lowercase(),
                }
            } else {
                match self.after.resolve_stage(reference, stage) {
                    Some(i) => format!("#stage{i}"),
                    None => reference.to_ascii_lowercase(),
                }
            }
        };
        Item {
            ins,
            key: instruction_key(ins, &stage_ref),
            matched: false,
        }
    }

    fn body_diff(&self, b: usize, a: usize) -> BodyDiff<'a> {
        let mut diff = BodyDiff {
            before: self.before.stages[b]
                .body()
                .iter()
                .map(|i| self.item(i, Some((true, b))))
                .collect(),
            after: self.after.stages[a]
                .body()
                .iter()
                .map(|i| self.item(i, Some((false, a))))
                .collect(),
            matches: Vec::new(),
        };
        match_exact(&mut diff);
        diff
    }

    fn compare_from(&mut self, b: usize, a: usize) {
        let bs = &self.before.stages[b];
        let as_ = &self.after.stages[a];
        let bspan = vec![bs.from_instruction().span];
        let aspan = vec![as_.from_instruction().span];

        match (&bs.alias, &as_.alias) {
            (Some(x), Some(y)) if x.eq_ignore_ascii_case(y) => {}
            (None, None) => {}
            (x, y) => {
                let name = |alias: &Option<String>, index: usize| {
                    alias.clone().unwrap_or_else(|| index.to_string())
                };
                self.actions.push(
                    RefactoringAction::new(RefactoringType::RenameImage)
                        .param("old_name", name(x, b))
                        .param("new_name", name(y, a))
                        .spans(bspan.clone(), aspan.clone()),
                );
            }
        }

        if bs.from_instruction().flags != as_.from_instruction().flags {
            self.actions.push(
                RefactoringAction::new(RefactoringType::Unclassified)
                    .spans(bspan.clone(), aspan.clone()),
            );
        }

        let after_text = as_
            .from_instruction()
            .args
            .first()
            .cloned()
            .unwrap_or_default();
        let (expanded, used) = expand(&after_text, &self.new_vars);
        for name in &used {
            let entry = self.var_uses.entry(name.clone()).or_default();
            entry.0.extend(bspan.iter().copied());
            entry.1.extend(aspan.iter().copied());
        }
        let mut new_base = if used.is_empty() {
            as_.base.clone()
        } else {
            ImageRef::parse(&expanded).unwrap_or_else(|_| as_.base.clone())
        };
        if new_base.stage_alias.is_none() {
            if let Some(i) = self.after.resolve_stage(&new_base.to_string(), a) {
                new_base = ImageRef::stage(&format!("#stage{i}"));
            }
        } else if let Some(i) = self
            .after
            .resolve_stage(new_base.stage_alias.as_deref().unwrap(), a)
        {
            new_base = ImageRef::stage(&format!("#stage{i}"));
        }
        let old_base = match &bs.base.stage_alias {
            Some(alias) => match self.before.resolve_stage(alias, b) {
                Some(i) => ImageRef::stage(&format!("#stage{}", self.map_stage(i))),
                None => bs.base.clone(),
            },
            None => bs.base.clone(),
        };

        match (old_base.is_stage(), new_base.is_stage()) {
            (true, true) => {
                if old_base != new_base {
                    self.actions.push(
                        RefactoringAction::new(RefactoringType::UpdateBaseImage)
                            .param("old_image", bs.base.to_string())
                            .param("new_image", as_.base.to_string())
                            .spans(bspan, aspan),
                    );
                }
            }
            (false, false) => {
                if old_base.short_name() != new_base.short_name() {
                    self.actions.push(
                        RefactoringAction::new(RefactoringType::UpdateBaseImage)
                            .param("old_image", old_base.to_string())
                            .param("new_image", new_base.to_string())
                            .spans(bspan, aspan),
                    );
                    return;
                }
                if old_base.repository() != new_base.repository() {
                    self.actions.push(
                        RefactoringAction::new(RefactoringType::RenameImage)
                            .param("old_name", old_base.repository())
                            .param("new_name", new_base.repository())
                            .spans(bspan.clone(), aspan.clone()),
                    );
                }
                let (old_tag, new_tag) = (tag_text(&old_base), tag_text(&new_base));
                if old_tag != new_tag {
                    self.actions.push(
                        RefactoringAction::new(RefactoringType::UpdateImageTag)
                            .param("image", new_base.short_name())
                            .param("old_tag", old_tag)
                            .param("new_tag", new_tag)
                            .spans(bspan, aspan),
                    );
                }
            }
            _ => {
                self.actions.push(
                    RefactoringAction::new(RefactoringType::UpdateBaseImage)
                        .param("old_image", bs.base.to_string())
                        .param("new_image", as_.base.to_string())
                        .spans(bspan, aspan),
                );
            }
        }
    }

    /// Merged RUN/ENV instructions, variable extraction and ADD→COPY.
    fn match_structural(&mut self, diff: &mut BodyDiff<'a>) {
        self.match_merged(diff, InstructionKind::Run, run_commands);
        self.match_merged(diff, InstructionKind::Env, env_pairs);
        self.match_variables(diff);

        for ai in 0..diff.after.len() {
            let a = &diff.after[ai];
            if a.matched || a.ins.kind != InstructionKind::Copy {
                continue;
            }
            let wanted = a.key.replacen("COPY", "ADD", 1);
            let found = diff
                .before
                .iter()
                .position(|b| !b.matched && b.ins.kind == InstructionKind::Add && b.key == wanted);
            if let Some(bi) = found {
                diff.before[bi].matched = true;
                diff.after[ai].matched = true;
                diff.matches.push((bi, ai));
                let ins = diff.after[ai].ins;
                let sources = ins.args[..ins.args.len().saturating_sub(1)].join(" ");
                self.actions.push(
                    RefactoringAction::new(RefactoringType::ReplaceAddWithCopy)
                        .param("sources", sources)
                        .spans(vec![diff.before[bi].ins.span], vec![ins.span]),
                );
            }
        }
    }

    /// k ≥ 2 consecutive instructions of `kind` (consecutive among instructions
    /// of that kind) whose parts concatenate to one instruction in `after`.
    fn match_merged(
        &mut self,
        diff: &mut BodyDiff<'a>,
        kind: InstructionKind,
        parts: fn(&Instruction) -> Option<Vec<String>>,
    ) {
        let candidates: Vec<usize> = (0..diff.before.len())
            .filter(|&i| diff.before[i].ins.kind == kind)
            .collect();
        for ai in 0..diff.after.len() {
            let a = &diff.after[ai];
            if a.matched || a.ins.kind != kind {
                continue;
            }
            let Some(target) = parts(a.ins) else { continue };
            if target.len() < 2 {
                continue;
            }
            let Some(window) = find_window(&candidates, &diff.before, &target, parts) else {
                continue;
            };
            for &bi in &window {
                diff.before[bi].matched = true;
            }
            diff.after[ai].matched = true;
            diff.matches.push((window[0], ai));
            let action_kind = match kind {
                InstructionKind::Run => RefactoringType::InlineRunInstruction,
                _ => RefactoringType::CombineEnvInstructions,
            };
            self.actions.push(
                RefactoringAction::new(action_kind)
                    .param("merged_count", window.len().to_string())
                    .spans(
                        window.iter().map(|&bi| diff.before[bi].ins.span).collect(),
                        vec![diff.after[ai].ins.span],
                    ),
            );
        }
    }

    /// After-instructions that equal a before-instruction once variables
    /// introduced by the refactoring are substituted.
    fn match_variables(&mut self, diff: &mut BodyDiff<'a>) {
        if self.new_vars.is_empty() {
            return;
        }
        for ai in 0..diff.after.len() {
            if diff.after[ai].matched {
                continue;
            }
            let (expanded, used) = expand(&diff.after[ai].key, &self.new_vars);
            if used.is_empty() {
                continue;
            }
            let found = diff
                .before
                .iter()
                .position(|b| !b.matched && b.key == expanded);
            if let Some(bi) = found {
                diff.before[bi].matched = true;
                diff.after[ai].matched = true;
                diff.matches.push((bi, ai));
                for name in used {
                    let entry = self.var_uses.entry(name).or_default();
                    entry.0.push(diff.before[bi].ins.span);
                    entry.1.push(diff.after[ai].ins.span);
                }
            }
        }
    }

    /// New ARG/ENV definitions whose variable was used in a match are part of
    /// the extraction rather than residual edits.
    fn absorb_variable_definitions(
        &mut self,
        diffs: &mut [BodyDiff<'a>],
        globals: &mut BodyDiff<'a>,
    ) {
        for diff in diffs.iter_mut().chain(std::iter::once(globals)) {
            for item in diff.after.iter_mut().filter(|i| !i.matched) {
                let names = defined_names(item.ins);
                if names.is_empty() || !names.iter().all(|n| self.var_uses.contains_key(n)) {
                    continue;
                }
                item.matched = true;
                for n in names {
                    if let Some(entry) = self.var_uses.get_mut(&n) {
                        entry.1.insert(0, item.ins.span);
                    }
                }
            }
        }
    }

    fn emit_variables(&mut self) {
        for (name, (before, after)) in std::mem::take(&mut self.var_uses) {
            let value = self.new_vars.get(&name).cloned().unwrap_or_default();
            self.actions.push(
                RefactoringAction::new(RefactoringType::ExtractVariable)
                    .param("name", name)
                    .param("value", value)
                    .spans(dedup(before), dedup(after)),
            );
        }
    }

    /// Before-instructions left over in aligned stages that reappear in an
    /// extracted stage moved there; new `COPY --from` lines bring the results
    /// back.
    fn extract_stages(&mut self, diffs: &mut [BodyDiff<'a>]) {
        let extra = self.extra.clone();
        let pairs = self.pairs.clone();
        for &s in &extra {
            let mut moved = Vec::new();
            let stage_body: Vec<Item> = self.after.stages[s]
                .body()
                .iter()
                .map(|i| self.item(i, Some((false, s))))
                .collect();
            let mut used = vec![false; stage_body.len()];
            let mut after_spans = vec![self.after.stages[s].span()];
            for (diff, &(_, a)) in diffs.iter_mut().zip(&pairs) {
                for b in diff.before.iter_mut().filter(|b| !b.matched) {
                    let hit =
                        (0..stage_body.len()).find(|&j| !used[j] && stage_body[j].key == b.key);
                    if let Some(j) = hit {
                        used[j] = true;
                        b.matched = true;
                        moved.push(b.ins.span);
                    }
                }
                for item in diff.after.iter_mut().filter(|i| !i.matched) {
                    let from_here = item
                        .ins
                        .copy_source_stage()
                        .and_then(|r| self.after.resolve_stage(r, a))
                        == Some(s);
                    if from_here {
                        item.matched = true;
                        after_spans.push(item.ins.span);
                    }
                }
            }
            let stage = self.after.stages[s]
                .alias
                .clone()
                .unwrap_or_else(|| s.to_string());
            self.actions.push(
                RefactoringAction::new(RefactoringType::ExtractStage)
                    .param("stage", stage)
                    .spans(dedup(moved), after_spans),
            );
        }
    }
}

/// Order-preserving assignment of every `before` stage to an `after` stage
/// (`after` has at least as many), final to final, maximizing similarity.
fn align_stages(before: &DockerfileAst, after: &DockerfileAst) -> Vec<(usize, usize)> {
    let nb = before.stages.len() - 1;
    let na = after.stages.len() - 1;
    let similarity = |b: usize, a: usize| -> i64 {
        let (bs, as_) = (&before.stages[b], &after.stages[a]);
        let mut score = 0;
        if let (Some(x), Some(y)) = (&bs.alias, &as_.alias) {
            if x.eq_ignore_ascii_case(y) {
                score += 10;
            }
        }
        if bs.base.short_name() == as_.base.short_name() {
            score += 1;
        }
        let mut remaining: Vec<String> = as_.body().iter().map(|i| i.render()).collect();
        for ins in bs.body() {
            if let Some(k) = remaining.iter().position(|r| *r == ins.render()) {
                remaining.swap_remove(k);
                score += 1;
            }
        }
        score
    };
    // best[i][j]: best score mapping the first i before stages into the first j after stages
    let mut best = vec![vec![i64::MIN; na + 1]; nb + 1];
    for row in best[0].iter_mut() {
        *row = 0;
    }
    for i in 1..=nb {
        for j in i..=na {
            let skip = best[i][j - 1];
            let take = best[i - 1][j - 1].saturating_add(similarity(i - 1, j - 1));
            best[i][j] = skip.max(take);
        }
    }
    let mut pairs = vec![(nb, na)];
    let (mut i, mut j) = (nb, na);
    while i > 0 {
        if j > i && best[i][j] == best[i][j - 1] {
            j -= 1;
        } else {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();
    pairs
}

fn match_exact(diff: &mut BodyDiff) {
    for ai in 0..diff.after.len() {
        let found = diff
            .before
            .iter()
            .position(|b| !b.matched && b.key == diff.after[ai].key);
        if let Some(bi) = found {
            diff.before[bi].matched = true;
            diff.after[ai].matched = true;
            diff.matches.push((bi, ai));
        }
    }
}

fn find_window(
    candidates: &[usize],
    before: &[Item],
    target: &[String],
    parts: fn(&Instruction) -> Option<Vec<String>>,
) -> Option<Vec<usize>> {
    for start in 0..candidates.len() {
        let mut acc: Vec<String> = Vec::new();
        for end in start..candidates.len() {
            let item = &before[candidates[end]];
            if item.matched {
                break;
            }
            let Some(p) = parts(item.ins) else { break };
            acc.extend(p);
            if acc.len() > target.len() || acc[..] != target[..acc.len()] {
                break;
            }
            if acc.len() == target.len() {
                return (end > start).then(|| candidates[start..=end].to_vec());
            }
        }
    }
    None
}

/// Reordering among matched instructions: everything outside a longest
/// order-preserving subsequence counts as moved.
fn sort_action(diff: &BodyDiff) -> Option<RefactoringAction> {
    let mut matches = diff.matches.clone();
    matches.sort();
    let seq: Vec<usize> = matches.iter().map(|m| m.1).collect();
    let keep = longest_increasing(&seq);
    if keep.len() == seq.len() {
        return None;
    }
    let moved: Vec<(usize, usize)> = matches
        .iter()
        .enumerate()
        .filter(|(i, _)| !keep.contains(i))
        .map(|(_, m)| *m)
        .collect();
    Some(
        RefactoringAction::new(RefactoringType::SortInstructions)
            .param("moved_count", moved.len().to_string())
            .spans(
                moved.iter().map(|m| diff.before[m.0].ins.span).collect(),
                moved.iter().map(|m| diff.after[m.1].ins.span).collect(),
            ),
    )
}

/// Indexes of one longest strictly increasing subsequence.
fn longest_increasing(seq: &[usize]) -> BTreeSet<usize> {
    let n = seq.len();
    let mut len = vec![1usize; n];
    let mut prev = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..i {
            if seq[j] < seq[i] && len[j] + 1 > len[i] {
                len[i] = len[j] + 1;
                prev[i] = j;
            }
        }
    }
    let mut out = BTreeSet::new();
    let Some(mut i) = (0..n).max_by_key(|&i| (len[i], std::cmp::Reverse(i))) else {
        return out;
    };
    loop {
        out.insert(i);
        if prev[i] == usize::MAX {
            break;
        }
        i = prev[i];
    }
    out
}

fn instruction_key(ins: &Instruction, stage_ref: &dyn Fn(&str) -> String) -> String {
    let mut key = ins.kind.keyword().to_owned();
    for flag in &ins.flags {
        key.push(' ');
        if ins.kind == InstructionKind::Copy && flag.name.eq_ignore_ascii_case("from") {
            key.push_str("--from=");
            key.push_str(&stage_ref(flag.value.as_deref().unwrap_or_default()));
        } else {
            key.push_str(&flag.to_string());
        }
    }
    for word in ins.text().split_whitespace() {
        key.push(' ');
        key.push_str(word);
    }
    key
}

fn tag_text(image: &ImageRef) -> String {
    match (&image.tag, &image.digest) {
        (Some(t), _) => t.clone(),
        (None, Some(d)) => format!("@{d}"),
        (None, None) => "latest".to_owned(),
    }
}

fn stage_copy_count(ast: &DockerfileAst) -> usize {
    ast.stages
        .iter()
        .flat_map(|s| s.body())
        .filter(|i| {
            i.copy_source_stage().is_some_and(|r| {
                r.parse::<usize>().is_ok()
                    || ast.stages.iter().any(|s| {
                        s.alias
                            .as_deref()
                            .is_some_and(|a| a.eq_ignore_ascii_case(r))
                    })
            })
        })
        .count()
}

/// `&&`-separated commands of a shell-form RUN, whitespace-normalized.
pub(crate) fn run_commands(ins: &Instruction) -> Option<Vec<String>> {
    if ins.kind != InstructionKind::Run || ins.json_form {
        return None;
    }
    Some(
        ins.text()
            .split("&&")
            .map(|c| c.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|c| !c.is_empty())
            .collect(),
    )
}

/// `key=value` pairs of an ENV instruction.
fn env_pairs(ins: &Instruction) -> Option<Vec<String>> {
    if ins.kind != InstructionKind::Env || ins.args.is_empty() {
        return None;
    }
    if !ins.args[0].contains('=') {
        return Some(vec![format!("{}={}", ins.args[0], ins.args[1..].join(" "))]);
    }
    Some(ins.args.clone())
}

fn unquote(value: &str) -> String {
    let v = value.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return v[1..v.len() - 1].to_owned();
        }
    }
    v.to_owned()
}

/// Names set by an ARG or ENV instruction.
fn defined_names(ins: &Instruction) -> Vec<String> {
    definitions(ins).into_iter().map(|(n, _)| n).collect()
}

fn definitions(ins: &Instruction) -> Vec<(String, Option<String>)> {
    match ins.kind {
        InstructionKind::Arg => ins
            .args
            .iter()
            .map(|a| match a.split_once('=') {
                Some((n, v)) => (n.to_owned(), Some(unquote(v))),
                None => (a.clone(), None),
            })
            .collect(),
        InstructionKind::Env => env_pairs(ins)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|p| {
                p.split_once('=')
                    .map(|(n, v)| (n.to_owned(), Some(unquote(v))))
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn defined_variables(ast: &DockerfileAst) -> BTreeMap<String, Option<String>> {
    let mut out = BTreeMap::new();
    for ins in ast.instructions() {
        for (name, value) in definitions(ins) {
            out.entry(name).or_insert(value);
        }
    }
    out
}

fn expand(text: &str, vars: &HashMap<String, String>) -> (String, Vec<String>) {
    let mut used = Vec::new();
    let out = VARIABLE.replace_all(text, |caps: &regex::Captures| {
        let name = caps.get(1).or_else(|| caps.get(2)).unwrap().as_str();
        match vars.get(name) {
            Some(v) => {
                if !used.iter().any(|u| u == name) {
                    used.push(name.to_owned());
                }
                v.clone()
            }
            None => caps[0].to_owned(),
        }
    });
    (out.into_owned(), used)
}

fn dedup(mut spans: Vec<SourceSpan>) -> Vec<SourceSpan> {
    spans.sort();
    spans.dedup();
    spans
}
