//! Wire protocol v1. One JSON message per line (or per websocket text frame).
//!
//! ```text
//! request:  {"type":"frame","id":<int>,"landmarks":[[x,y] x 21]}
//! response: {"type":"prediction","id":<int>,"label":"<A-Z>","confidence":<real>,"probs":[<26 reals>]}
//! error:    {"type":"error","id":<int|null>,"code":"<CODE>","message":"<text>"}
//! ```
//!
//! Unknown request fields are ignored. Non-finite coordinates arrive as
//! `null` (what `JSON.stringify` emits for NaN and Infinity) or as the bare
//! tokens `NaN`, `Infinity`, `-Infinity`; both map to `NON_FINITE`.

use serde::Serialize;
use serde_json::Value;

use crate::features::{FeatureError, LandmarkFrame, Point2, NUM_LANDMARKS};
use crate::label::GestureLabel;
use crate::model::{predict, ModelError, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Malformed,
    BadLandmarkCount,
    DegenerateHand,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Response {
    Prediction {
        id: i64,
        label: GestureLabel,
        confidence: f64,
        probs: Vec<f64>,
    },
    Error {
        id: Option<i64>,
        code: ErrorCode,
        message: String,
    },
}

impl Response {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("responses hold finite numbers")
    }

    pub fn id(&self) -> Option<i64> {
        match self {
            Response::Prediction { id, .. } => Some(*id),
            Response::Error { id, .. } => *id,
        }
    }

    fn error(id: Option<i64>, code: ErrorCode, message: impl Into<String>) -> Self {
        Response::Error {
            id,
            code,
            message: message.into(),
        }
    }
}

/// A validated frame request.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRequest {
    pub id: i64,
    pub frame: LandmarkFrame,
}

/// Parses one raw line into a frame request or the error response to send.
pub fn parse_request(raw: &[u8]) -> Result<FrameRequest, Response> {
    let malformed = |id, msg: &str| Response::error(id, ErrorCode::Malformed, msg);
    let text = std::str::from_utf8(raw).map_err(|_| malformed(None, "message is not valid UTF-8"))?;
    let text = text.trim_end_matches(['\n', '\r']);
    let value: Value = serde_json::from_str(text)
        .or_else(|_| serde_json::from_str(&replace_non_finite_tokens(text)))
        .map_err(|e| malformed(None, &format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(malformed(None, "message must be a JSON object"));
    };
    let id = match obj.get("id") {
        Some(Value::Number(n)) => n.as_i64(),
        _ => None,
    };
    match obj.get("type") {
        Some(Value::String(t)) if t == "frame" => {}
        _ => return Err(malformed(id, "expected \"type\":\"frame\"")),
    }
    let Some(id) = id else {
        return Err(malformed(None, "\"id\" must be an integer"));
    };
    let Some(Value::Array(landmarks)) = obj.get("landmarks") else {
        return Err(malformed(Some(id), "\"landmarks\" must be an array"));
    };
    if landmarks.len() != NUM_LANDMARKS {
        return Err(Response::error(
            Some(id),
            ErrorCode::BadLandmarkCount,
            format!("expected {NUM_LANDMARKS} landmark pairs, got {}", landmarks.len()),
        ));
    }
    let mut points = Vec::with_capacity(NUM_LANDMARKS);
    let mut non_finite = false;
    for (i, pair) in landmarks.iter().enumerate() {
        let coords = match pair {
            Value::Array(c) if c.len() == 2 => c,
            _ => return Err(malformed(Some(id), &format!("landmark {i} must be an [x, y] pair"))),
        };
        let mut xy = [0.0; 2];
        for (slot, v) in xy.iter_mut().zip(coords) {
            match v {
                Value::Number(n) => *slot = n.as_f64().unwrap_or(f64::NAN),
                Value::Null => non_finite = true,
                _ => {
                    return Err(malformed(
                        Some(id),
                        &format!("landmark {i} coordinates must be numbers"),
                    ))
                }
            }
        }
        points.push(Point2::new(xy[0], xy[1]));
    }
    if non_finite {
        return Err(Response::error(Some(id), ErrorCode::NonFinite, "non-finite landmark coordinate"));
    }
    let frame = LandmarkFrame::new(&points).map_err(|e| feature_error(Some(id), &e))?;
    Ok(FrameRequest { id, frame })
}

/// Handles one request line. Never panics on bad input; every line yields
/// exactly one response.
pub fn handle_message(model: &ModelParams, raw: &[u8]) -> Response {
    let request = match parse_request(raw) {
        Ok(r) => r,
        Err(response) => return response,
    };
    match predict(model, &request.frame) {
        Ok(p) => Response::Prediction {
            id: request.id,
            label: p.label,
            confidence: p.confidence,
            probs: p.probs,
        },
        Err(ModelError::Feature(e)) => feature_error(Some(request.id), &e),
        Err(e) => Response::error(Some(request.id), ErrorCode::Malformed, e.to_string()),
    }
}

fn feature_error(id: Option<i64>, e: &FeatureError) -> Response {
    let code = match e {
        FeatureError::DegenerateHand => ErrorCode::DegenerateHand,
        FeatureError::NonFinite => ErrorCode::NonFinite,
        FeatureError::BadLandmarkCount(_) => ErrorCode::BadLandmarkCount,
        FeatureError::EmptyInput => ErrorCode::Malformed,
    };
    Response::error(id, code, e.to_string())
}

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` tokens outside strings to
/// `null` so the message can still be parsed and reported as non-finite.
fn replace_non_finite_tokens(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if let Some(token) = ["-Infinity", "Infinity", "NaN"].iter().find(|t| rest.starts_with(**t)) {
            out.push_str("null");
            rest = &rest[token.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}
