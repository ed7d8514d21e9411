//! Pluggable wire transport for backend requests.

use std::fmt;
use std::time::Duration;

/// One outgoing request: POST `body` (JSON bytes) to `url`.
pub struct TransportRequest<'a> {
    pub url: &'a str,
    pub body: &'a [u8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportErrorKind {
    Timeout,
    Connect,
    Status(u16),
    Other,
}

#[derive(Debug)]
pub struct TransportError {
    pub kind: TransportErrorKind,
    pub message: String,
}

impl TransportError {
    pub fn new(kind: TransportErrorKind, message: impl Into<String>) -> Self {
        TransportError {
            kind,
            message: message.into(),
        }
    }

    /// Timeouts, connection failures, and 5xx/429 responses are worth
    /// retrying; other statuses are not.
    pub fn is_retryable(&self) -> bool {
        match self.kind {
            TransportErrorKind::Timeout | TransportErrorKind::Connect => true,
            TransportErrorKind::Status(code) => code >= 500 || code == 429,
            TransportErrorKind::Other => false,
        }
    }
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransportErrorKind::Timeout => write!(f, "timeout: {}", self.message),
            TransportErrorKind::Connect => write!(f, "connect: {}", self.message),
            TransportErrorKind::Status(code) => write!(f, "http {}: {}", code, self.message),
            TransportErrorKind::Other => write!(f, "{}", self.message),
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &TransportRequest<'_>) -> Result<Vec<u8>, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpTransport { agent }
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &TransportRequest<'_>) -> Result<Vec<u8>, TransportError> {
        let response = self
            .agent
            .post(req.url)
            .set("content-type", "application/json")
            .send_bytes(req.body);

        match response {
            Ok(resp) => {
                let mut body = Vec::new();
                resp.into_reader()
                    .read_to_end(&mut body)
                    .map_err(|e| TransportError::new(TransportErrorKind::Other, e.to_string()))?;
                Ok(body)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(TransportError::new(TransportErrorKind::Status(code), body))
            }
            Err(ureq::Error::Transport(t)) => {
                let kind = match t.kind() {
                    ureq::ErrorKind::Io => TransportErrorKind::Timeout,
                    ureq::ErrorKind::ConnectionFailed | ureq::ErrorKind::Dns => {
                        TransportErrorKind::Connect
                    }
                    _ => TransportErrorKind::Connect,
                };
                Err(TransportError::new(kind, t.to_string()))
            }
        }
    }
}
