//! Call-block parsing of model responses.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use crate::world::ToolCall;

pub const OPEN: &str = "<tool_call>";
pub const CLOSE: &str = "</tool_call>";
pub const STOP: &str = "<stop/>";
pub const CALL_FORMAT_REMINDER: &str =
    "Answer with <tool_call> blocks holding JSON objects with `name` and `arguments`, or <stop/>.";

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Calls {
        thought: String,
        calls: Vec<ToolCall>,
    },
    /// Only a `<think>` block: a step without calls.
    Think {
        thought: String,
    },
    Stop {
        thought: String,
    },
    Unparseable {
        reason: String,
    },
}

#[derive(Deserialize)]
struct Block {
    name: String,
    #[serde(default)]
    arguments: BTreeMap<String, Value>,
}

fn think_only(text: &str) -> Option<String> {
    let t = text.trim();
    let inner = t.strip_prefix("<think>")?.strip_suffix("</think>")?;
    (!inner.contains("<think>")).then(|| inner.trim().to_string())
}

pub fn parse_tool_calls(text: &str) -> Parsed {
    let mut calls = Vec::new();
    let mut rest = text;
    let mut thought = String::new();
    while let Some(start) = rest.find(OPEN) {
        thought.push_str(&rest[..start]);
        let body_start = start + OPEN.len();
        let Some(len) = rest[body_start..].find(CLOSE) else {
            return Parsed::Unparseable {
                reason: "unterminated <tool_call> block".into(),
            };
        };
        let body = &rest[body_start..body_start + len];
        match serde_json::from_str::<Block>(body.trim()) {
            Ok(b) => calls.push(ToolCall {
                id: None,
                name: b.name,
                arguments: b.arguments,
            }),
            Err(e) => {
                return Parsed::Unparseable {
                    reason: format!("call block {} is not valid JSON: {e}", calls.len() + 1),
                }
            }
        }
        rest = &rest[body_start + len + CLOSE.len()..];
    }
    thought.push_str(rest);
    let thought = thought.replace(STOP, "").trim().to_string();
    if !calls.is_empty() {
        return Parsed::Calls { thought, calls };
    }
    if text.contains(STOP) {
        return Parsed::Stop { thought };
    }
    if let Some(t) = think_only(text) {
        return Parsed::Think { thought: t };
    }
    Parsed::Unparseable {
        reason: "no <tool_call> block found".into(),
    }
}

/// The block a well-behaved model would emit for `call`.
pub fn render_call(call: &ToolCall) -> String {
    let body = serde_json::json!({"name": call.name, "arguments": call.arguments});
    format!("{OPEN}\n{body}\n{CLOSE}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_double_blocks() {
        let one = "I will read it.\n<tool_call>\n{\"name\": \"ReadFile\", \"arguments\": {\"path\": \"CloudDisk://a.md\"}}\n</tool_call>";
        match parse_tool_calls(one) {
            Parsed::Calls { thought, calls } => {
                assert_eq!(thought, "I will read it.");
                assert_eq!(
                    calls,
                    vec![ToolCall::new("ReadFile").arg("path", "CloudDisk://a.md")]
                );
            }
            other => panic!("{other:?}"),
        }
        let two = format!(
            "{}{}",
            render_call(&ToolCall::new("ListContacts")),
            render_call(&ToolCall::new("TakeNote").arg("text", "x"))
        );
        let Parsed::Calls { calls, .. } = parse_tool_calls(&two) else {
            panic!()
        };
        assert_eq!(
            calls.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            ["ListContacts", "TakeNote"]
        );
    }

    #[test]
    fn prose_is_unparseable() {
        assert!(matches!(
            parse_tool_calls("Let me think about it."),
            Parsed::Unparseable { .. }
        ));
        assert!(matches!(
            parse_tool_calls("<tool_call>{oops}</tool_call>"),
            Parsed::Unparseable { .. }
        ));
        assert!(matches!(
            parse_tool_calls("<tool_call>{}"),
            Parsed::Unparseable { .. }
        ));
    }

    #[test]
    fn stop_and_think() {
        assert_eq!(
            parse_tool_calls("All done. <stop/>"),
            Parsed::Stop {
                thought: "All done.".into()
            }
        );
        assert_eq!(
            parse_tool_calls("<think>hmm</think>"),
            Parsed::Think {
                thought: "hmm".into()
            }
        );
    }
}
