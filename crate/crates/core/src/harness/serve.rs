//! Line-delimited streaming scoring protocol for trainer integration.
//!
//! One JSON request per line in, one JSON reply per line out, flushed per
//! reply. Malformed requests produce an error reply carrying the offending
//! line number; the loop never crashes on bad input and shuts down cleanly
//! when the input stream closes.

use crate::parser::ViolationCode;
use crate::reward::total_reward;
use crate::sample::TargetTuple;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// A scoring request. `num_images` is accepted for protocol completeness
/// (trainers know their slot count) but does not affect the reward.
#[derive(Debug, Clone, Deserialize)]
pub struct ScoreRequest {
    pub id: serde_json::Value,
    pub ground_truth: Vec<TargetTuple>,
    pub response_text: String,
    #[serde(default)]
    pub num_images: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReply {
    pub id: serde_json::Value,
    pub r_miou: f64,
    pub r_format: u8,
    pub total: f64,
    pub diagnostics: Vec<ViolationCode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReply {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<serde_json::Value>,
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ServeSummary {
    pub requests: usize,
    pub scored: usize,
    pub errors: usize,
}

/// Serves scoring requests until the input stream ends.
pub fn serve_scoring<R: BufRead, W: Write>(
    input: R,
    mut output: W,
) -> std::io::Result<ServeSummary> {
    let mut summary = ServeSummary::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        summary.requests += 1;
        let line_no = idx + 1;
        let reply = match serde_json::from_str::<ScoreRequest>(&line) {
            Ok(req) => match total_reward(&req.response_text, &req.ground_truth) {
                Ok(b) => {
                    summary.scored += 1;
                    serde_json::to_string(&ScoreReply {
                        id: req.id,
                        r_miou: b.r_miou,
                        r_format: b.r_format,
                        total: b.total,
                        diagnostics: b.violations,
                    })
                }
                Err(e) => {
                    summary.errors += 1;
                    serde_json::to_string(&ErrorReply {
                        id: Some(req.id),
                        line: line_no,
                        error: e.to_string(),
                    })
                }
            },
            Err(e) => {
                summary.errors += 1;
                serde_json::to_string(&ErrorReply {
                    id: None,
                    line: line_no,
                    error: e.to_string(),
                })
            }
        }
        .expect("replies serialize");
        output.write_all(reply.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(summary)
}
