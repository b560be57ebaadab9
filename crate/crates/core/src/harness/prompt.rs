//! Prompt assets and the single serialization point for training prompts.
//!
//! The system prompt and the fixed user-prompt suffix are stored bit-exact
//! as crate assets. Synthesized samples store only the query body; the
//! suffix is appended here, at render time, separated by a single space.

/// System prompt establishing the tagged think/answer discipline.
pub const SYSTEM_PROMPT: &str = include_str!("../../assets/system_prompt.txt");

/// Fixed instruction suffix appended to every query body.
pub const USER_SUFFIX: &str = include_str!("../../assets/user_suffix.txt");

/// Renders the full user prompt for a sample's query body.
pub fn render_user_prompt(query_body: &str) -> String {
    format!("{query_body} {USER_SUFFIX}")
}
