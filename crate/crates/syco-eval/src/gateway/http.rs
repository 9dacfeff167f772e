//! OpenAI-compatible chat-completions backend.
//!
//! Image parts are sent as base64 data URLs. Retries use exponential backoff
//! with jitter; 4xx statuses other than 429 are not retried.

use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use crate::chat::{Conversation, MessagePart, Role};

use super::{Backend, GatewayError, RequestMeta};

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Defaults to 0 for reproducibility; never changed silently.
    pub temperature: f64,
    pub max_tokens: u32,
    pub endpoint: String,
    pub model_name: String,
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub parallelism: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            temperature: 0.0,
            max_tokens: 1024,
            endpoint: "http://localhost:8000/v1/chat/completions".to_string(),
            model_name: "gpt-4o-mini".to_string(),
            api_key_env: "SYCO_EVAL_API_KEY".to_string(),
            timeout: Duration::from_secs(120),
            max_retries: 3,
            parallelism: 1,
        }
    }
}

fn data_url(path: &str) -> Result<String, GatewayError> {
    let bytes = std::fs::read(path)?;
    let mime = match Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_lowercase)
        .as_deref()
    {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "image/png",
    };
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{mime};base64,{encoded}"))
}

fn part_to_json(part: &MessagePart, inline_images: bool) -> Result<Value, GatewayError> {
    Ok(match part {
        MessagePart::Text { content } => json!({"type": "text", "text": content}),
        MessagePart::ImageRef { source } => {
            let url = if source.starts_with("http://")
                || source.starts_with("https://")
                || source.starts_with("data:")
                || !inline_images
            {
                source.clone()
            } else {
                data_url(source)?
            };
            json!({"type": "image_url", "image_url": {"url": url}})
        }
    })
}

/// The outbound chat-completions payload. Seeded assistant turns travel as
/// ordinary assistant messages; temperature is always present.
pub fn build_payload(
    conversation: &Conversation,
    cfg: &GenConfig,
    inline_images: bool,
) -> Result<Value, GatewayError> {
    let mut messages = Vec::new();
    for msg in &conversation.messages {
        let role = match msg.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        let content: Value = if msg.image_count() == 0 {
            Value::String(msg.text())
        } else {
            let parts: Result<Vec<Value>, _> = msg
                .parts
                .iter()
                .map(|p| part_to_json(p, inline_images))
                .collect();
            Value::Array(parts?)
        };
        messages.push(json!({"role": role, "content": content}));
    }
    Ok(json!({
        "model": cfg.model_name,
        "messages": messages,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }))
}

pub struct HttpBackend {
    cfg: GenConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: GenConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| GatewayError::MalformedResponse {
                message: format!("client construction failed: {e}"),
                correlation_id: "-".to_string(),
            })?;
        Ok(HttpBackend { cfg, client })
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    fn attempt(&self, payload: &Value, correlation_id: &str) -> Result<String, GatewayError> {
        let api_key = std::env::var(&self.cfg.api_key_env).unwrap_or_default();
        let mut req = self
            .client
            .post(&self.cfg.endpoint)
            .header("x-correlation-id", correlation_id)
            .json(payload);
        if !api_key.is_empty() {
            req = req.bearer_auth(api_key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout {
                    correlation_id: correlation_id.to_string(),
                }
            } else {
                GatewayError::MalformedResponse {
                    message: e.to_string(),
                    correlation_id: correlation_id.to_string(),
                }
            }
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(GatewayError::HttpStatus {
                status,
                correlation_id: correlation_id.to_string(),
            });
        }
        let body: Value = resp.json().map_err(|e| GatewayError::MalformedResponse {
            message: e.to_string(),
            correlation_id: correlation_id.to_string(),
        })?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::MalformedResponse {
                message: "missing choices[0].message.content".to_string(),
                correlation_id: correlation_id.to_string(),
            })
    }

    fn retriable(err: &GatewayError) -> bool {
        match err {
            GatewayError::Timeout { .. } => true,
            GatewayError::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            GatewayError::MalformedResponse { .. } => false,
            _ => false,
        }
    }
}

impl Backend for HttpBackend {
    fn complete(
        &self,
        conversation: &Conversation,
        meta: &RequestMeta,
    ) -> Result<String, GatewayError> {
        let correlation_id = format!(
            "{}-c{}-r{}-{:08x}",
            meta.item_id,
            meta.case.case_id(),
            meta.round,
            rand::random::<u32>()
        );
        let payload = build_payload(conversation, &self.cfg, true)?;
        let mut last_error = String::new();
        let attempts = self.cfg.max_retries + 1;
        for attempt in 0..attempts {
            match self.attempt(&payload, &correlation_id) {
                Ok(text) => return Ok(text),
                Err(err) => {
                    if !Self::retriable(&err) {
                        return Err(err);
                    }
                    last_error = err.to_string();
                    if attempt + 1 < attempts {
                        let backoff = 250u64.saturating_mul(1 << attempt.min(6));
                        let jitter = rand::random::<u64>() % (backoff / 2 + 1);
                        std::thread::sleep(Duration::from_millis(backoff + jitter));
                    }
                }
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts,
            last_error,
            correlation_id,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::ChatMessage;

    #[test]
    fn payload_carries_seeded_assistant_and_temperature() {
        let conv = Conversation::with_seeded_turn(
            vec![
                ChatMessage::user_text("Is there a dog?"),
                ChatMessage::assistant("Yes"),
                ChatMessage::user_text("I don't think that's right. Please answer again."),
            ],
            Some(1),
        )
        .unwrap();
        let cfg = GenConfig::default();
        let payload = build_payload(&conv, &cfg, true).unwrap();
        assert_eq!(payload["temperature"], 0.0);
        assert_eq!(payload["messages"][1]["role"], "assistant");
        assert_eq!(payload["messages"][1]["content"], "Yes");
        assert_eq!(payload["messages"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn image_parts_become_data_urls() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("pic.png");
        std::fs::write(&img, [0x89, 0x50, 0x4e, 0x47]).unwrap();
        let conv = Conversation::new(vec![ChatMessage::user_with_image(
            img.to_str().unwrap(),
            "q",
        )])
        .unwrap();
        let payload = build_payload(&conv, &GenConfig::default(), true).unwrap();
        let url = payload["messages"][0]["content"][0]["image_url"]["url"]
            .as_str()
            .unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
    }

    #[test]
    fn retriable_classification() {
        let id = "x".to_string();
        assert!(HttpBackend::retriable(&GatewayError::HttpStatus {
            status: 429,
            correlation_id: id.clone()
        }));
        assert!(HttpBackend::retriable(&GatewayError::HttpStatus {
            status: 503,
            correlation_id: id.clone()
        }));
        assert!(!HttpBackend::retriable(&GatewayError::HttpStatus {
            status: 400,
            correlation_id: id
        }));
    }
}
