//! Shared domain types: answer labels, subsets, benchmark items, evaluation
//! cases, and the record schema every other module consumes.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot negate an unparsed label")]
    InvalidLabel,
    #[error("invalid case id {0}: must be 0-6")]
    InvalidCaseId(u8),
    #[error("dataset file not found: {0}")]
    MissingFile(String),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate item id {id} at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binary answer to an MME-style question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerLabel {
    Yes,
    No,
    Unparsed,
}

impl AnswerLabel {
    /// The label word as it appears in prompts and seeded turns.
    pub fn word(self) -> &'static str {
        match self {
            AnswerLabel::Yes => "Yes",
            AnswerLabel::No => "No",
            AnswerLabel::Unparsed => "Unparsed",
        }
    }

    pub fn is_binary(self) -> bool {
        self != AnswerLabel::Unparsed
    }
}

impl fmt::Display for AnswerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// Binary complement. Errors on `Unparsed`.
pub fn negate(label: AnswerLabel) -> Result<AnswerLabel, ModelError> {
    match label {
        AnswerLabel::Yes => Ok(AnswerLabel::No),
        AnswerLabel::No => Ok(AnswerLabel::Yes),
        AnswerLabel::Unparsed => Err(ModelError::InvalidLabel),
    }
}

/// The eleven MME subsets used for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Existence,
    Count,
    Position,
    Color,
    Posters,
    Scene,
    Ocr,
    CommonsenseReasoning,
    NumericalCalculation,
    TextTranslation,
    CodeReasoning,
}

impl Subset {
    pub const ALL: [Subset; 11] = [
        Subset::Existence,
        Subset::Count,
        Subset::Position,
        Subset::Color,
        Subset::Posters,
        Subset::Scene,
        Subset::Ocr,
        Subset::CommonsenseReasoning,
        Subset::NumericalCalculation,
        Subset::TextTranslation,
        Subset::CodeReasoning,
    ];

    /// Subsets with attribute-level questions that transfer to text form.
    pub const TEXT_MODALITY: [Subset; 4] = [
        Subset::Existence,
        Subset::Count,
        Subset::Position,
        Subset::Color,
    ];

    pub fn supports_text_modality(self) -> bool {
        Subset::TEXT_MODALITY.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::Existence => "existence",
            Subset::Count => "count",
            Subset::Position => "position",
            Subset::Color => "color",
            Subset::Posters => "posters",
            Subset::Scene => "scene",
            Subset::Ocr => "ocr",
            Subset::CommonsenseReasoning => "commonsense_reasoning",
            Subset::NumericalCalculation => "numerical_calculation",
            Subset::TextTranslation => "text_translation",
            Subset::CodeReasoning => "code_reasoning",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One benchmark question. Two questions share a `group_id` per image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub subset: Subset,
    pub image_ref: String,
    pub question: String,
    pub ground_truth: AnswerLabel,
    pub group_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_description: Option<String>,
}

/// Direction of the injected opinion for one evaluation case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpinionKind {
    None,
    AgreeCorrect,
    DisagreeCorrect,
    AgreeWrong,
    DisagreeWrong,
    TwoRoundDisagreeCorrect,
    TwoRoundDisagreeWrong,
}

/// One of the seven evaluation cases. Constructed only via [`CaseSpec::new`],
/// which enforces the case-id / opinion-kind / round-count bijection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    case_id: u8,
    opinion_kind: OpinionKind,
    rounds: u8,
}

impl CaseSpec {
    pub fn new(case_id: u8) -> Result<Self, ModelError> {
        let (opinion_kind, rounds) = match case_id {
            0 => (OpinionKind::None, 1),
            1 => (OpinionKind::AgreeCorrect, 1),
            2 => (OpinionKind::DisagreeCorrect, 1),
            3 => (OpinionKind::AgreeWrong, 1),
            4 => (OpinionKind::DisagreeWrong, 1),
            5 => (OpinionKind::TwoRoundDisagreeCorrect, 2),
            6 => (OpinionKind::TwoRoundDisagreeWrong, 2),
            other => return Err(ModelError::InvalidCaseId(other)),
        };
        Ok(CaseSpec {
            case_id,
            opinion_kind,
            rounds,
        })
    }

    pub fn all() -> Vec<CaseSpec> {
        (0..=6).map(|id| CaseSpec::new(id).unwrap()).collect()
    }

    pub fn case_id(self) -> u8 {
        self.case_id
    }

    pub fn opinion_kind(self) -> OpinionKind {
        self.opinion_kind
    }

    pub fn rounds(self) -> u8 {
        self.rounds
    }

    /// The answer the user opinion steers toward, if any: the label the model
    /// would give by following the opinion.
    pub fn implied_label(self, truth: AnswerLabel) -> Result<Option<AnswerLabel>, ModelError> {
        let wrong = negate(truth)?;
        Ok(match self.opinion_kind {
            OpinionKind::None => None,
            OpinionKind::AgreeCorrect => Some(truth),
            OpinionKind::DisagreeCorrect => Some(wrong),
            OpinionKind::AgreeWrong => Some(wrong),
            OpinionKind::DisagreeWrong => Some(truth),
            OpinionKind::TwoRoundDisagreeCorrect => Some(wrong),
            OpinionKind::TwoRoundDisagreeWrong => Some(truth),
        })
    }
}

/// Whether the conversation carries the image or its textual description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Vision,
    Text,
}

/// Instruction fragment appended after the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptProfile {
    Plain,
    SingleWord,
    SrtCot,
}

/// Area fraction retained when degrading image resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionFactor {
    Full,
    Quarter,
    Sixteenth,
}

impl ResolutionFactor {
    pub fn area_fraction(self) -> f64 {
        match self {
            ResolutionFactor::Full => 1.0,
            ResolutionFactor::Quarter => 0.25,
            ResolutionFactor::Sixteenth => 1.0 / 16.0,
        }
    }

    /// Per-axis scale: the square root of the area fraction.
    pub fn axis_scale(self) -> f64 {
        match self {
            ResolutionFactor::Full => 1.0,
            ResolutionFactor::Quarter => 0.5,
            ResolutionFactor::Sixteenth => 0.25,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ResolutionFactor::Full => "1",
            ResolutionFactor::Quarter => "1/4",
            ResolutionFactor::Sixteenth => "1/16",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1" => Some(ResolutionFactor::Full),
            "1/4" => Some(ResolutionFactor::Quarter),
            "1/16" => Some(ResolutionFactor::Sixteenth),
            _ => None,
        }
    }
}

impl fmt::Display for ResolutionFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parsed structure of a three-section reflective response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrtSections {
    pub textualization: String,
    pub reflection: String,
    pub summarization: String,
}

/// One completed (item, case) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub subset: Subset,
    pub group_id: String,
    pub ground_truth: AnswerLabel,
    pub case_id: u8,
    pub modality: Modality,
    pub resolution_factor: ResolutionFactor,
    pub prompt_profile: PromptProfile,
    pub raw_responses: Vec<String>,
    pub parsed_answer: AnswerLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srt_sections: Option<SrtSections>,
    /// Set when an SrtCot response failed section parsing and the whole text
    /// was scored instead.
    #[serde(default)]
    pub srt_fallback: bool,
}

/// Non-fatal issues found while loading a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// `group_id` does not occur exactly twice within its subset.
    UnpairedGroup {
        subset: Subset,
        group_id: String,
        occurrences: usize,
    },
}

#[derive(Debug)]
pub struct LoadedItems {
    pub items: Vec<QaItem>,
    pub warnings: Vec<LoadWarning>,
}

/// Load a line-delimited QaItem file, preserving order. Group-pairing
/// violations are reported as warnings, not errors.
pub fn load_items(path: &Path) -> Result<LoadedItems, ModelError> {
    if !path.exists() {
        return Err(ModelError::MissingFile(path.display().to_string()));
    }
    let contents = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in contents.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let item: QaItem =
            serde_json::from_str(line).map_err(|e| ModelError::MalformedLine {
                line: lineno,
                message: e.to_string(),
            })?;
        if !item.ground_truth.is_binary() {
            return Err(ModelError::MalformedLine {
                line: lineno,
                message: format!("item {} has non-binary ground truth", item.id),
            });
        }
        if let Some(prev) = seen.insert(item.id.clone(), lineno) {
            let _ = prev;
            return Err(ModelError::DuplicateId {
                id: item.id,
                line: lineno,
            });
        }
        items.push(item);
    }
    let warnings = pairing_warnings(&items);
    Ok(LoadedItems { items, warnings })
}

/// Count `group_id` occurrences per subset and flag everything not paired
/// exactly twice.
pub fn pairing_warnings(items: &[QaItem]) -> Vec<LoadWarning> {
    let mut counts: HashMap<(Subset, &str), usize> = HashMap::new();
    for item in items {
        *counts.entry((item.subset, item.group_id.as_str())).or_insert(0) += 1;
    }
    let mut warnings: Vec<LoadWarning> = counts
        .into_iter()
        .filter(|&(_, n)| n != 2)
        .map(|((subset, gid), n)| LoadWarning::UnpairedGroup {
            subset,
            group_id: gid.to_string(),
            occurrences: n,
        })
        .collect();
    warnings.sort_by(|a, b| {
        let LoadWarning::UnpairedGroup {
            subset: sa,
            group_id: ga,
            ..
        } = a;
        let LoadWarning::UnpairedGroup {
            subset: sb,
            group_id: gb,
            ..
        } = b;
        (sa, ga).cmp(&(sb, gb))
    });
    warnings
}

/// Serialize items back to the line-delimited schema.
pub fn write_items(items: &[QaItem], path: &Path) -> Result<(), ModelError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("QaItem serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Checks requested before an item enters a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requirement {
    NeedsDescription,
    NeedsImageFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationResult {
    pub failures: Vec<String>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate_item(item: &QaItem, requirements: &[Requirement]) -> ValidationResult {
    let mut failures = Vec::new();
    for req in requirements {
        match req {
            Requirement::NeedsDescription => {
                if item
                    .text_description
                    .as_deref()
                    .map_or(true, |d| d.trim().is_empty())
                {
                    failures.push("text_description".to_string());
                }
            }
            Requirement::NeedsImageFile => {
                if !Path::new(&item.image_ref).exists() {
                    failures.push("image_ref".to_string());
                }
            }
        }
    }
    ValidationResult { failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn item(id: &str, subset: Subset, group: &str) -> QaItem {
        QaItem {
            id: id.to_string(),
            subset,
            image_ref: format!("images/{group}.png"),
            question: "Is there a dog in the image?".to_string(),
            ground_truth: AnswerLabel::Yes,
            group_id: group.to_string(),
            text_description: None,
        }
    }

    #[test]
    fn negate_is_involution() {
        assert_eq!(negate(AnswerLabel::Yes).unwrap(), AnswerLabel::No);
        assert_eq!(negate(AnswerLabel::No).unwrap(), AnswerLabel::Yes);
        for l in [AnswerLabel::Yes, AnswerLabel::No] {
            assert_eq!(negate(negate(l).unwrap()).unwrap(), l);
        }
        assert!(matches!(
            negate(AnswerLabel::Unparsed),
            Err(ModelError::InvalidLabel)
        ));
    }

    #[test]
    fn case_spec_bijection() {
        let expected = [
            (0u8, OpinionKind::None, 1u8),
            (1, OpinionKind::AgreeCorrect, 1),
            (2, OpinionKind::DisagreeCorrect, 1),
            (3, OpinionKind::AgreeWrong, 1),
            (4, OpinionKind::DisagreeWrong, 1),
            (5, OpinionKind::TwoRoundDisagreeCorrect, 2),
            (6, OpinionKind::TwoRoundDisagreeWrong, 2),
        ];
        for (id, kind, rounds) in expected {
            let spec = CaseSpec::new(id).unwrap();
            assert_eq!(spec.opinion_kind(), kind);
            assert_eq!(spec.rounds(), rounds);
        }
        assert!(CaseSpec::new(7).is_err());
    }

    #[test]
    fn implied_labels() {
        let truth = AnswerLabel::Yes;
        let implied: Vec<Option<AnswerLabel>> = CaseSpec::all()
            .into_iter()
            .map(|c| c.implied_label(truth).unwrap())
            .collect();
        assert_eq!(
            implied,
            vec![
                None,
                Some(AnswerLabel::Yes),
                Some(AnswerLabel::No),
                Some(AnswerLabel::No),
                Some(AnswerLabel::Yes),
                Some(AnswerLabel::No),
                Some(AnswerLabel::Yes),
            ]
        );
    }

    #[test]
    fn load_items_roundtrip_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.jsonl");
        let items = vec![
            item("a1", Subset::Existence, "g1"),
            item("a2", Subset::Existence, "g1"),
        ];
        write_items(&items, &path).unwrap();
        let loaded = load_items(&path).unwrap();
        assert_eq!(loaded.items, items);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn load_items_flags_unpaired_group() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.jsonl");
        let items = vec![
            item("a1", Subset::Existence, "g1"),
            item("a2", Subset::Existence, "g1"),
            item("a3", Subset::Existence, "g2"),
        ];
        write_items(&items, &path).unwrap();
        let loaded = load_items(&path).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert_eq!(
            loaded.warnings[0],
            LoadWarning::UnpairedGroup {
                subset: Subset::Existence,
                group_id: "g2".to_string(),
                occurrences: 1,
            }
        );
    }

    #[test]
    fn load_items_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.jsonl");
        let good = serde_json::to_string(&item("a1", Subset::Count, "g1")).unwrap();
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{good}").unwrap();
        writeln!(f, "{{\"id\": \"a2\"}}").unwrap();
        let err = load_items(&path).unwrap_err();
        match err {
            ModelError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn load_items_rejects_duplicate_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.jsonl");
        let items = vec![
            item("a1", Subset::Color, "g1"),
            item("a1", Subset::Color, "g1"),
        ];
        write_items(&items, &path).unwrap();
        assert!(matches!(
            load_items(&path).unwrap_err(),
            ModelError::DuplicateId { line: 2, .. }
        ));
    }

    #[test]
    fn validate_item_checks_requested_flags() {
        let mut it = item("a1", Subset::Scene, "g1");
        let res = validate_item(&it, &[Requirement::NeedsDescription]);
        assert_eq!(res.failures, vec!["text_description"]);
        it.text_description = Some("A dog on a lawn.".to_string());
        assert!(validate_item(&it, &[Requirement::NeedsDescription]).is_ok());
        assert!(validate_item(&it, &[]).is_ok());
    }
}
