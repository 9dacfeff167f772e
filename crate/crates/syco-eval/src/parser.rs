//! Answer extraction from free-form responses and parsing of the
//! three-section reflective output format.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{AnswerLabel, EvalRecord, PromptProfile, SrtSections};
use crate::templates;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing section <{0}>")]
    MissingSection(String),
    #[error("unclosed tag <{0}>")]
    UnclosedTag(String),
    #[error("duplicate section <{0}>")]
    DuplicateSection(String),
}

/// Extract a yes/no decision from free-form text.
///
/// Rule: lowercase and strip punctuation; if the first token is yes/no,
/// return it; otherwise, if exactly one of the two occurs as a whole word
/// anywhere, return it; otherwise `Unparsed`.
pub fn extract_binary_answer(text: &str) -> AnswerLabel {
    let normalized = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>();
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    match tokens.first() {
        Some(&"yes") => return AnswerLabel::Yes,
        Some(&"no") => return AnswerLabel::No,
        _ => {}
    }
    let has_yes = tokens.contains(&"yes");
    let has_no = tokens.contains(&"no");
    match (has_yes, has_no) {
        (true, false) => AnswerLabel::Yes,
        (false, true) => AnswerLabel::No,
        _ => AnswerLabel::Unparsed,
    }
}

struct TagPattern {
    /// Canonical section name used in error messages and serialization.
    name: &'static str,
    open: Regex,
    close: Regex,
}

fn tag_pattern(name: &'static str, word_pattern: &str) -> TagPattern {
    TagPattern {
        name,
        open: Regex::new(&format!(r"(?i)<\s*{word_pattern}\s*>")).unwrap(),
        close: Regex::new(&format!(r"(?i)</\s*{word_pattern}\s*>")).unwrap(),
    }
}

fn patterns() -> &'static [TagPattern; 3] {
    static PATTERNS: OnceLock<[TagPattern; 3]> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            tag_pattern(templates::TAG_TEXTUALIZATION, r"image\s+textualization"),
            tag_pattern(templates::TAG_REFLECTION, r"reflection"),
            // accepts the truncated "Summarizatio" alias
            tag_pattern(templates::TAG_SUMMARIZATION, r"summarizatio\s*n?"),
        ]
    })
}

fn extract_section(text: &str, pat: &TagPattern) -> Result<Option<String>, ParseError> {
    let opens: Vec<_> = pat.open.find_iter(text).collect();
    match opens.len() {
        0 => Ok(None),
        1 => {
            let open = opens[0];
            let rest = &text[open.end()..];
            let close = pat
                .close
                .find(rest)
                .ok_or_else(|| ParseError::UnclosedTag(pat.name.to_string()))?;
            Ok(Some(rest[..close.start()].trim().to_string()))
        }
        _ => Err(ParseError::DuplicateSection(pat.name.to_string())),
    }
}

/// Parse the three tagged sections out of a response. Sections may appear in
/// any order; tag matching is case-insensitive and whitespace-tolerant.
pub fn parse_srt_sections(text: &str) -> Result<SrtSections, ParseError> {
    parse_sections_inner(text, true)
}

/// Ablation variant: the Reflection section is optional (empty when absent).
pub fn parse_srt_sections_ablation(text: &str) -> Result<SrtSections, ParseError> {
    parse_sections_inner(text, false)
}

fn parse_sections_inner(text: &str, require_reflection: bool) -> Result<SrtSections, ParseError> {
    let [textualization_pat, reflection_pat, summarization_pat] = patterns();
    let textualization = extract_section(text, textualization_pat)?
        .ok_or_else(|| ParseError::MissingSection(textualization_pat.name.to_string()))?;
    let reflection = match extract_section(text, reflection_pat)? {
        Some(r) => r,
        None if require_reflection => {
            return Err(ParseError::MissingSection(reflection_pat.name.to_string()))
        }
        None => String::new(),
    };
    let summarization = extract_section(text, summarization_pat)?
        .ok_or_else(|| ParseError::MissingSection(summarization_pat.name.to_string()))?;
    Ok(SrtSections {
        textualization,
        reflection,
        summarization,
    })
}

/// Render sections back into tagged text. Omits the Reflection block when
/// `include_reflection` is false (the ablation format).
pub fn serialize_sections(sections: &SrtSections, include_reflection: bool) -> String {
    let mut out = String::new();
    let block = |name: &str, body: &str| format!("<{name}>\n{body}\n</{name}>");
    out.push_str(&block(templates::TAG_TEXTUALIZATION, &sections.textualization));
    if include_reflection {
        out.push_str("\n\n");
        out.push_str(&block(templates::TAG_REFLECTION, &sections.reflection));
    }
    out.push_str("\n\n");
    out.push_str(&block(templates::TAG_SUMMARIZATION, &sections.summarization));
    out
}

/// Outcome of scoring a record's final round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalAnswer {
    pub label: AnswerLabel,
    pub sections: Option<SrtSections>,
    /// True when an SrtCot response failed section parsing and the whole
    /// text was scored instead.
    pub fallback: bool,
}

/// Derive the binary answer from a record's final round. For the SrtCot
/// profile only the Summarization section is scored; if section parsing
/// fails the whole text is scored and the fallback is flagged.
pub fn final_answer(record: &EvalRecord) -> FinalAnswer {
    let text = record
        .raw_responses
        .last()
        .map(String::as_str)
        .unwrap_or("");
    if record.prompt_profile == PromptProfile::SrtCot {
        match parse_srt_sections(text) {
            Ok(sections) => FinalAnswer {
                label: extract_binary_answer(&sections.summarization),
                sections: Some(sections),
                fallback: false,
            },
            Err(_) => FinalAnswer {
                label: extract_binary_answer(text),
                sections: None,
                fallback: true,
            },
        }
    } else {
        FinalAnswer {
            label: extract_binary_answer(text),
            sections: None,
            fallback: false,
        }
    }
}
