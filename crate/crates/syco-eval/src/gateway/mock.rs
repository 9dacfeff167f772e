//! Deterministic mock sycophant model.
//!
//! Every decision is a counter-based hash of (seed, item, case, round,
//! purpose), so there is no shared RNG state and parallel execution cannot
//! perturb outcomes.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::chat::Conversation;
use crate::model::{negate, AnswerLabel, OpinionKind, SrtSections};
use crate::parser::serialize_sections;

use super::{Backend, GatewayError, RequestMeta};

#[derive(Debug, Clone)]
pub struct MockModelConfig {
    /// Chance of answering with the ground truth absent any opinion.
    pub base_accuracy: f64,
    /// Chance of adopting the opinion-implied answer, per opinion kind.
    pub follow_prob: HashMap<OpinionKindKey, f64>,
    /// Chance of repeating the round-1 answer in round 2.
    pub stubbornness: f64,
    pub seed: u64,
    /// Wrap answers in the three-section reflective format.
    pub emit_srt_sections: bool,
}

/// Hashable stand-in for `OpinionKind` in the per-kind probability map.
pub type OpinionKindKey = &'static str;

fn kind_key(kind: OpinionKind) -> OpinionKindKey {
    match kind {
        OpinionKind::None => "none",
        OpinionKind::AgreeCorrect => "agree_correct",
        OpinionKind::DisagreeCorrect => "disagree_correct",
        OpinionKind::AgreeWrong => "agree_wrong",
        OpinionKind::DisagreeWrong => "disagree_wrong",
        OpinionKind::TwoRoundDisagreeCorrect => "two_round_disagree_correct",
        OpinionKind::TwoRoundDisagreeWrong => "two_round_disagree_wrong",
    }
}

impl MockModelConfig {
    /// Single follow probability applied to every opinion kind.
    pub fn uniform(base_accuracy: f64, follow_prob: f64, stubbornness: f64, seed: u64) -> Self {
        let mut map = HashMap::new();
        for kind in [
            OpinionKind::AgreeCorrect,
            OpinionKind::DisagreeCorrect,
            OpinionKind::AgreeWrong,
            OpinionKind::DisagreeWrong,
            OpinionKind::TwoRoundDisagreeCorrect,
            OpinionKind::TwoRoundDisagreeWrong,
        ] {
            map.insert(kind_key(kind), follow_prob);
        }
        MockModelConfig {
            base_accuracy,
            follow_prob: map,
            stubbornness,
            seed,
            emit_srt_sections: false,
        }
    }

    fn follow_prob_for(&self, kind: OpinionKind) -> f64 {
        self.follow_prob.get(kind_key(kind)).copied().unwrap_or(0.0)
    }
}

/// Uniform draw in [0, 1) derived from a keyed hash.
pub fn hash_unit(seed: u64, parts: &[&str]) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(bytes) >> 11) as f64 / (1u64 << 53) as f64
}

pub struct MockModel {
    cfg: MockModelConfig,
}

impl MockModel {
    pub fn new(cfg: MockModelConfig) -> Self {
        MockModel { cfg }
    }

    fn draw(&self, meta: &RequestMeta, round: u8, purpose: &str) -> f64 {
        hash_unit(
            self.cfg.seed,
            &[
                &meta.item_id,
                &meta.case.case_id().to_string(),
                &round.to_string(),
                purpose,
            ],
        )
    }

    /// Answer absent any opinion: ground truth with probability
    /// `base_accuracy`, else its complement. Keyed on round 1 so the
    /// baseline is stable across rounds.
    fn base_answer(&self, meta: &RequestMeta) -> AnswerLabel {
        let truth = meta.ground_truth;
        if self.draw(meta, 1, "base") < self.cfg.base_accuracy {
            truth
        } else {
            negate(truth).expect("ground truth is binary")
        }
    }

    fn answer(&self, meta: &RequestMeta) -> Result<AnswerLabel, GatewayError> {
        let kind = meta.case.opinion_kind();
        let implied = meta
            .case
            .implied_label(meta.ground_truth)
            .map_err(|_| GatewayError::MissingMetadata(meta.item_id.clone()))?;
        let base = self.base_answer(meta);
        Ok(match (kind, meta.round) {
            (OpinionKind::None, _) => base,
            // two-round cases: first round sees no opinion yet
            (OpinionKind::TwoRoundDisagreeCorrect | OpinionKind::TwoRoundDisagreeWrong, 1) => base,
            (OpinionKind::TwoRoundDisagreeCorrect | OpinionKind::TwoRoundDisagreeWrong, _) => {
                if self.draw(meta, 2, "stubborn") < self.cfg.stubbornness {
                    base
                } else {
                    implied.expect("two-round cases imply a label")
                }
            }
            // single-round opinion cases
            (_, _) => {
                if self.draw(meta, 1, "follow") < self.cfg.follow_prob_for(kind) {
                    implied.expect("opinion cases imply a label")
                } else {
                    base
                }
            }
        })
    }

    fn render(&self, label: AnswerLabel, meta: &RequestMeta) -> String {
        if self.cfg.emit_srt_sections {
            let sections = SrtSections {
                textualization: format!("A synthetic scene for item {}.", meta.item_id),
                reflection: format!(
                    "Considered case {} evidence before answering.",
                    meta.case.case_id()
                ),
                summarization: label.word().to_string(),
            };
            serialize_sections(&sections, true)
        } else {
            label.word().to_string()
        }
    }
}

impl Backend for MockModel {
    fn complete(
        &self,
        _conversation: &Conversation,
        meta: &RequestMeta,
    ) -> Result<String, GatewayError> {
        let label = self.answer(meta)?;
        Ok(self.render(label, meta))
    }
}
