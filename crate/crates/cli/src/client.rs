//! [`ExperimentApi`] over HTTP, for agents driving a running service.

use std::time::Duration;

use feedlab_core::engine::{
    ApiError, CreateSessionRequest, EngineError, EventAck, EventInput, ExperimentApi, FeedView,
    QuestionnaireOutcome, QuestionnaireSubmission, SessionView, Step1View, Step2View, SubmitOutcome,
};
use feedlab_core::{ClaimId, SessionId};
use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde_json::Value;

pub struct HttpApi {
    base: String,
    http: Client,
}

fn unavailable(message: impl Into<String>) -> EngineError {
    EngineError::Unavailable {
        message: message.into(),
    }
}

impl HttpApi {
    pub fn new(base_url: &str) -> Result<Self, EngineError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| unavailable(e.to_string()))?;
        Ok(HttpApi {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, EngineError> {
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| unavailable(e.to_string()))?;
        if status.is_success() {
            return serde_json::from_slice(&bytes)
                .map_err(|e| unavailable(format!("unexpected response body: {e}")));
        }
        match serde_json::from_slice::<ApiError>(&bytes) {
            Ok(err) => Err(EngineError::from_api(err)),
            Err(_) => Err(unavailable(format!(
                "HTTP {status}: {}",
                String::from_utf8_lossy(&bytes)
            ))),
        }
    }

    /// Percent-encodes each segment.
    fn at(&self, segments: &[&str]) -> String {
        let mut url = match reqwest::Url::parse(&self.base) {
            Ok(u) => u,
            Err(_) => return format!("{}/{}", self.base, segments.join("/")),
        };
        if let Ok(mut path) = url.path_segments_mut() {
            path.pop_if_empty().extend(segments);
        }
        url.to_string()
    }

    pub fn health(&self) -> Result<Value, EngineError> {
        self.send(self.http.get(self.at(&["health"])))
    }

    pub fn live_report(&self) -> Result<Value, EngineError> {
        self.send(self.http.get(self.at(&["reports", "live"])))
    }
}

impl ExperimentApi for HttpApi {
    fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionView, EngineError> {
        self.send(self.http.post(self.at(&["sessions"])).json(req))
    }

    fn session(&self, id: &SessionId) -> Result<SessionView, EngineError> {
        self.send(self.http.get(self.at(&["sessions", id.as_str()])))
    }

    fn feed(&self, id: &SessionId) -> Result<FeedView, EngineError> {
        self.send(self.http.get(self.at(&["sessions", id.as_str(), "feed"])))
    }

    fn advance(&self, id: &SessionId) -> Result<SessionView, EngineError> {
        self.send(self.http.post(self.at(&["sessions", id.as_str(), "advance"])))
    }

    fn submit_questionnaire(
        &self,
        id: &SessionId,
        form: &QuestionnaireSubmission,
    ) -> Result<QuestionnaireOutcome, EngineError> {
        self.send(
            self.http
                .post(self.at(&["sessions", id.as_str(), "questionnaire"]))
                .json(form),
        )
    }

    fn post_event(&self, id: &SessionId, event: &EventInput) -> Result<EventAck, EngineError> {
        self.send(
            self.http
                .post(self.at(&["sessions", id.as_str(), "events"]))
                .json(event),
        )
    }

    fn step1(&self, id: &SessionId, claim: &ClaimId) -> Result<Step1View, EngineError> {
        let url = self.at(&["sessions", id.as_str(), "intervention", claim.as_str(), "step1"]);
        self.send(self.http.get(url))
    }

    fn step2(&self, id: &SessionId, claim: &ClaimId) -> Result<Step2View, EngineError> {
        let url = self.at(&["sessions", id.as_str(), "intervention", claim.as_str(), "step2"]);
        self.send(self.http.get(url))
    }

    fn submit(&self, id: &SessionId) -> Result<SubmitOutcome, EngineError> {
        self.send(self.http.post(self.at(&["sessions", id.as_str(), "submit"])))
    }
}
