//! Chat-completion question generator: prompts a remote model once per
//! planned section and parses one question per response line.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{IntentError, IntentGenerator, IntentSource};
use crate::docmodel::Document;
use crate::httpapi::{
    post_json_with_retry, ApiConfig, HttpTransport, ReqwestTransport, RetryPolicy,
};

const SYSTEM_PROMPT: &str = "You generate the questions a reader would most likely ask about a \
                             document section. Cover the main topics and the key details. Output \
                             one question per line with no numbering and no commentary.";

/// Remote chat-completion client emitting candidate questions.
pub struct LlmIntentGenerator {
    transport: Arc<dyn HttpTransport>,
    base_url: String,
    api_key: String,
    model: String,
    temperature: f64,
    top_k: u32,
    retry: RetryPolicy,
}

impl LlmIntentGenerator {
    pub const DEFAULT_TEMPERATURE: f64 = 0.7;
    pub const DEFAULT_TOP_K: u32 = 40;

    /// Builds a network-backed client from `IDC_API_URL` / `IDC_API_KEY`.
    pub fn from_env(
        model: impl Into<String>,
        temperature: f64,
        top_k: u32,
    ) -> Result<Self, IntentError> {
        let cfg = ApiConfig::from_env()?;
        Ok(Self::with_transport(
            Arc::new(ReqwestTransport::new()),
            cfg,
            model,
            temperature,
            top_k,
            RetryPolicy::default(),
        ))
    }

    pub fn with_transport(
        transport: Arc<dyn HttpTransport>,
        cfg: ApiConfig,
        model: impl Into<String>,
        temperature: f64,
        top_k: u32,
        retry: RetryPolicy,
    ) -> Self {
        LlmIntentGenerator {
            transport,
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            api_key: cfg.api_key,
            model: model.into(),
            temperature,
            top_k,
            retry,
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

impl IntentGenerator for LlmIntentGenerator {
    fn source(&self) -> IntentSource {
        IntentSource::Llm
    }

    fn generate_section(
        &self,
        doc: &Document,
        (lo, hi): (usize, usize),
        count: usize,
    ) -> Result<Vec<String>, IntentError> {
        let section_text = doc.sentences[lo..hi.min(doc.len())]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "top_k": self.top_k,
            "messages": [
                { "role": "system", "content": SYSTEM_PROMPT },
                {
                    "role": "user",
                    "content": format!(
                        "Write {count} questions, one per line, that a reader might ask about \
                         the following text:\n\n{section_text}"
                    )
                }
            ]
        });
        let resp = post_json_with_retry(
            &*self.transport,
            self.retry,
            &self.endpoint(),
            &self.api_key,
            &body,
        )?;
        let content = resp
            .get("choices")
            .and_then(Value::as_array)
            .and_then(|c| c.first())
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(Value::as_str)
            .ok_or_else(|| IntentError::BadResponse("missing choices[0].message.content".into()))?;
        Ok(content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::httpapi::{ReplayStep, ReplayTransport};
    use crate::intent::{generate_intents, IntentPlan, SectionPlan};
    use serde_json::json;

    const FIXTURE: &str = include_str!("../../tests/fixtures/llm_questions.json");

    fn client(script: Vec<ReplayStep>) -> (Arc<ReplayTransport>, LlmIntentGenerator) {
        let transport = Arc::new(ReplayTransport::new(script));
        let cfg = ApiConfig {
            base_url: "http://api.test/v1".into(),
            api_key: "k".into(),
        };
        let gen = LlmIntentGenerator::with_transport(
            transport.clone(),
            cfg,
            "test-chat",
            0.7,
            40,
            RetryPolicy::without_delay(),
        );
        (transport, gen)
    }

    #[test]
    fn replays_recorded_questions() {
        let fixture: Value = serde_json::from_str(FIXTURE).unwrap();
        let (transport, gen) = client(vec![ReplayStep::ok(&fixture["response"])]);
        let doc = Document::build("d", "Water boils. Ice floats. Salt matters.");
        let plan = IntentPlan {
            target_count: 3,
            sections: vec![SectionPlan {
                range: (0, 3),
                count: 3,
            }],
        };
        let qs = generate_intents(&gen, &doc, &plan).unwrap();
        let expected: Vec<String> = fixture["questions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        assert_eq!(qs, expected, "numbering stripped by normalization");

        let reqs = transport.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].0, "http://api.test/v1/chat/completions");
        let body = &reqs[0].1;
        assert_eq!(body["model"], "test-chat");
        assert_eq!(body["temperature"], 0.7);
        assert_eq!(body["top_k"], 40);
        let messages = body["messages"].as_array().unwrap();
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[0]["role"], "system");
        let user = messages[1]["content"].as_str().unwrap();
        assert!(user.contains("Write 3 questions"), "{user}");
        assert!(
            user.contains("Water boils. Ice floats. Salt matters."),
            "{user}"
        );
    }

    #[test]
    fn section_failure_reports_index_and_partial_results() {
        let ok = json!({"choices": [{"message": {"content": "What is up?\nWhat is down?"}}]});
        let mut script = vec![ReplayStep::ok(&ok)];
        script.extend(vec![ReplayStep::status(500, "down"); 6]);
        let (_, gen) = client(script);
        let doc = Document::build("d", "One fish. Two fish. Red fish. Blue fish.");
        let plan = IntentPlan {
            target_count: 4,
            sections: vec![
                SectionPlan {
                    range: (0, 2),
                    count: 2,
                },
                SectionPlan {
                    range: (2, 4),
                    count: 2,
                },
            ],
        };
        let err = generate_intents(&gen, &doc, &plan).unwrap_err();
        match err {
            IntentError::Section {
                section,
                partial,
                source,
            } => {
                assert_eq!(section, 1);
                assert_eq!(partial, vec!["What is up?", "What is down?"]);
                assert!(
                    source.to_string().contains("giving up after 6 attempts"),
                    "{source}"
                );
            }
            other => panic!("expected section error, got {other}"),
        }
    }

    #[test]
    fn sections_are_prompted_independently() {
        let a = json!({"choices": [{"message": {"content": "Q one?"}}]});
        let b = json!({"choices": [{"message": {"content": "Q two?"}}]});
        let (transport, gen) = client(vec![ReplayStep::ok(&a), ReplayStep::ok(&b)]);
        let doc = Document::build("d", "One fish. Two fish. Red fish. Blue fish.");
        let plan = IntentPlan {
            target_count: 2,
            sections: vec![
                SectionPlan {
                    range: (0, 2),
                    count: 1,
                },
                SectionPlan {
                    range: (2, 4),
                    count: 1,
                },
            ],
        };
        let qs = generate_intents(&gen, &doc, &plan).unwrap();
        assert_eq!(qs, vec!["Q one?", "Q two?"]);
        let reqs = transport.requests();
        assert_eq!(reqs.len(), 2);
        let first = reqs[0].1["messages"][1]["content"].as_str().unwrap();
        let second = reqs[1].1["messages"][1]["content"].as_str().unwrap();
        assert!(first.contains("One fish. Two fish."));
        assert!(!first.contains("Red fish"));
        assert!(second.contains("Red fish. Blue fish."));
    }

    #[test]
    fn malformed_response_is_an_error() {
        let (_, gen) = client(vec![ReplayStep::ok(&json!({"choices": []}))]);
        let doc = Document::build("d", "One.");
        let plan = IntentPlan {
            target_count: 1,
            sections: vec![SectionPlan {
                range: (0, 1),
                count: 1,
            }],
        };
        let err = generate_intents(&gen, &doc, &plan).unwrap_err();
        assert!(
            err.to_string().contains("choices[0].message.content"),
            "{err}"
        );
    }
}
