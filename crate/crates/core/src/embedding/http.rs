//! HTTP JSON embedding client: batched POSTs to `{base}/embeddings` with
//! bearer auth and bounded retry, credentials taken from the environment.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{EmbedError, Embedder};
use crate::httpapi::{
    post_json_with_retry, ApiConfig, HttpTransport, ReqwestTransport, RetryPolicy,
};

/// Remote embedding service client.
pub struct ApiEmbedder {
    transport: Arc<dyn HttpTransport>,
    base_url: String,
    api_key: String,
    model: String,
    dim: usize,
    retry: RetryPolicy,
    batch_size: usize,
}

impl ApiEmbedder {
    /// Default dimension for remote embedding models.
    pub const DEFAULT_DIM: usize = 1536;
    /// Texts per request.
    pub const BATCH_SIZE: usize = 64;

    /// Builds a network-backed client from `IDC_API_URL` / `IDC_API_KEY`.
    pub fn from_env(model: impl Into<String>, dim: usize) -> Result<Self, EmbedError> {
        let cfg = ApiConfig::from_env()?;
        Ok(Self::with_transport(
            Arc::new(ReqwestTransport::new()),
            cfg,
            model,
            dim,
            RetryPolicy::default(),
        ))
    }

    /// Builds a client over any transport (used with the replay transport in
    /// tests).
    pub fn with_transport(
        transport: Arc<dyn HttpTransport>,
        cfg: ApiConfig,
        model: impl Into<String>,
        dim: usize,
        retry: RetryPolicy,
    ) -> Self {
        ApiEmbedder {
            transport,
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            api_key: cfg.api_key,
            model: model.into(),
            dim,
            retry,
            batch_size: Self::BATCH_SIZE,
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/embeddings", self.base_url)
    }

    fn parse_batch(&self, expected: usize, resp: Value) -> Result<Vec<Vec<f64>>, EmbedError> {
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::BadResponse("missing 'data' array".into()))?;
        if data.len() != expected {
            return Err(EmbedError::BatchCount {
                expected,
                actual: data.len(),
            });
        }
        let mut out = Vec::with_capacity(expected);
        for (row, item) in data.iter().enumerate() {
            let raw = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| EmbedError::BadResponse(format!("item {row} lacks 'embedding'")))?;
            let mut v = Vec::with_capacity(raw.len());
            for x in raw {
                let x = x.as_f64().ok_or_else(|| {
                    EmbedError::BadResponse(format!("item {row} has a non-numeric entry"))
                })?;
                if !x.is_finite() {
                    return Err(EmbedError::BadResponse(format!(
                        "item {row} has a non-finite entry"
                    )));
                }
                v.push(x);
            }
            if v.len() != self.dim {
                return Err(EmbedError::RowDim {
                    row,
                    expected: self.dim,
                    actual: v.len(),
                });
            }
            out.push(v);
        }
        Ok(out)
    }
}

impl Embedder for ApiEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let url = self.endpoint();
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            let body = json!({ "model": self.model, "input": batch });
            let resp =
                post_json_with_retry(&*self.transport, self.retry, &url, &self.api_key, &body)?;
            out.extend(self.parse_batch(batch.len(), resp)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::httpapi::{ReplayStep, ReplayTransport};

    const FIXTURE: &str = include_str!("../../tests/fixtures/embed_batch.json");

    fn client(script: Vec<ReplayStep>, dim: usize) -> (Arc<ReplayTransport>, ApiEmbedder) {
        let transport = Arc::new(ReplayTransport::new(script));
        let cfg = ApiConfig {
            base_url: "http://api.test/v1".into(),
            api_key: "k".into(),
        };
        let emb = ApiEmbedder::with_transport(
            transport.clone(),
            cfg,
            "test-embed",
            dim,
            RetryPolicy::without_delay(),
        );
        (transport, emb)
    }

    #[test]
    fn replays_recorded_exchange() {
        let fixture: Value = serde_json::from_str(FIXTURE).unwrap();
        let (transport, emb) = client(vec![ReplayStep::ok(&fixture["response"])], 4);
        let inputs: Vec<&str> = fixture["request"]["input"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        let vectors = emb.embed(&inputs).unwrap();
        assert_eq!(vectors.len(), 3);
        assert_eq!(vectors[2], vec![0.5, 0.5, 0.0, 0.0]);

        let reqs = transport.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].0, "http://api.test/v1/embeddings");
        assert_eq!(reqs[0].1, fixture["request"]);
    }

    #[test]
    fn retries_rate_limit_then_succeeds() {
        let body = serde_json::json!({"data": [{"embedding": [1.0, 2.0]}]});
        let (transport, emb) = client(
            vec![ReplayStep::status(429, "slow down"), ReplayStep::ok(&body)],
            2,
        );
        let vectors = emb.embed(&["x"]).unwrap();
        assert_eq!(vectors, vec![vec![1.0, 2.0]]);
        assert_eq!(transport.requests().len(), 2);
    }

    #[test]
    fn exhausting_retries_reports_attempts() {
        let (_, emb) = client(vec![ReplayStep::status(503, "down"); 6], 2);
        let err = emb.embed(&["x"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("giving up after 6 attempts"), "got: {msg}");
    }

    #[test]
    fn batches_large_inputs() {
        let mk = |n: usize| {
            let rows: Vec<Value> = (0..n)
                .map(|_| serde_json::json!({"embedding": [0.0, 1.0]}))
                .collect();
            serde_json::json!({ "data": rows })
        };
        let (transport, emb) = client(
            vec![
                ReplayStep::ok(&mk(64)),
                ReplayStep::ok(&mk(64)),
                ReplayStep::ok(&mk(2)),
            ],
            2,
        );
        let texts: Vec<String> = (0..130).map(|i| format!("text {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = emb.embed(&refs).unwrap();
        assert_eq!(vectors.len(), 130);
        let reqs = transport.requests();
        assert_eq!(reqs.len(), 3);
        assert_eq!(reqs[0].1["input"].as_array().unwrap().len(), 64);
        assert_eq!(reqs[2].1["input"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn mismatched_count_is_an_error() {
        let body = serde_json::json!({"data": [{"embedding": [1.0, 0.0]}]});
        let (_, emb) = client(vec![ReplayStep::ok(&body)], 2);
        let err = emb.embed(&["a", "b"]).unwrap_err();
        assert!(matches!(
            err,
            EmbedError::BatchCount {
                expected: 2,
                actual: 1
            }
        ));
    }

    #[test]
    fn mismatched_dimension_is_an_error() {
        let body = serde_json::json!({"data": [{"embedding": [1.0, 0.0, 0.0]}]});
        let (_, emb) = client(vec![ReplayStep::ok(&body)], 2);
        let err = emb.embed(&["a"]).unwrap_err();
        assert!(matches!(
            err,
            EmbedError::RowDim {
                row: 0,
                expected: 2,
                actual: 3
            }
        ));
    }
}
