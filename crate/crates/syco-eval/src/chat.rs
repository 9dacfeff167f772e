//! Conversation structure sent to a chat backend.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("image parts are only allowed in user messages")]
    ImageInNonUserMessage,
    #[error("a message may contain at most one image part")]
    MultipleImages,
    #[error("roles must alternate user/assistant after any leading system message")]
    RoleOrder,
    #[error("seeded assistant index {0} does not point at an assistant message")]
    BadSeededTurn(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessagePart {
    Text { content: String },
    ImageRef { source: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<MessagePart>,
}

impl ChatMessage {
    pub fn user_text(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            parts: vec![MessagePart::Text {
                content: content.into(),
            }],
        }
    }

    pub fn user_with_image(image: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            parts: vec![
                MessagePart::ImageRef {
                    source: image.into(),
                },
                MessagePart::Text {
                    content: content.into(),
                },
            ],
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            parts: vec![MessagePart::Text {
                content: content.into(),
            }],
        }
    }

    /// Concatenated text parts.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                MessagePart::Text { content } => Some(content.as_str()),
                MessagePart::ImageRef { .. } => None,
            })
            .collect()
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, MessagePart::ImageRef { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<ChatMessage>,
    /// For two-round cases the first assistant turn is injected as history,
    /// not generated; this points at it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeded_assistant_turn: Option<usize>,
}

impl Conversation {
    pub fn new(messages: Vec<ChatMessage>) -> Result<Self, ChatError> {
        Self::with_seeded_turn(messages, None)
    }

    pub fn with_seeded_turn(
        messages: Vec<ChatMessage>,
        seeded_assistant_turn: Option<usize>,
    ) -> Result<Self, ChatError> {
        for msg in &messages {
            if msg.image_count() > 1 {
                return Err(ChatError::MultipleImages);
            }
            if msg.image_count() == 1 && msg.role != Role::User {
                return Err(ChatError::ImageInNonUserMessage);
            }
        }
        let mut expected = Role::User;
        for (i, msg) in messages.iter().enumerate() {
            if i == 0 && msg.role == Role::System {
                continue;
            }
            if msg.role != expected {
                return Err(ChatError::RoleOrder);
            }
            expected = if expected == Role::User {
                Role::Assistant
            } else {
                Role::User
            };
        }
        if let Some(idx) = seeded_assistant_turn {
            if messages.get(idx).map(|m| m.role) != Some(Role::Assistant) {
                return Err(ChatError::BadSeededTurn(idx));
            }
        }
        Ok(Conversation {
            messages,
            seeded_assistant_turn,
        })
    }

    pub fn image_count(&self) -> usize {
        self.messages.iter().map(|m| m.image_count()).sum()
    }
}
