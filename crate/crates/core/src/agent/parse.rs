//! Parsing of agent completions.
//!
//! The agent is asked to reply with a JSON object; models wrap it in prose
//! anyway, so the parser scans for the first parseable object carrying the
//! required fields and ignores everything else, extra fields included.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("completion contains no JSON object")]
    NoObject,
    #[error("no JSON object in the completion has fields {0}")]
    MissingFields(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOutput {
    pub thought: String,
    pub action: String,
}

/// Finds the first JSON object in `completion` whose fields satisfy
/// `extract`, tolerating surrounding prose and trailing garbage.
fn scan_objects<T>(
    completion: &str,
    wanted: &'static str,
    extract: impl Fn(&serde_json::Map<String, serde_json::Value>) -> Option<T>,
) -> Result<T, ParseError> {
    let mut saw_object = false;
    for (i, c) in completion.char_indices() {
        if c != '{' {
            continue;
        }
        let mut stream =
            serde_json::Deserializer::from_str(&completion[i..]).into_iter::<serde_json::Value>();
        if let Some(Ok(serde_json::Value::Object(map))) = stream.next() {
            saw_object = true;
            if let Some(found) = extract(&map) {
                return Ok(found);
            }
        }
    }
    if saw_object {
        Err(ParseError::MissingFields(wanted))
    } else {
        Err(ParseError::NoObject)
    }
}

/// Extracts the `thought` and `action` fields from a completion.
pub fn parse_agent_output(completion: &str) -> Result<ParsedOutput, ParseError> {
    scan_objects(completion, "thought and action", |map| {
        let thought = map.get("thought")?.as_str()?;
        let action = map.get("action")?.as_str()?;
        Some(ParsedOutput {
            thought: thought.to_string(),
            action: action.to_string(),
        })
    })
}

/// Extracts a non-empty `subtasks` list of non-empty strings.
pub fn parse_plan_output(completion: &str) -> Result<Vec<String>, ParseError> {
    scan_objects(completion, "subtasks", |map| {
        let subtasks = map.get("subtasks")?.as_array()?;
        let statements: Option<Vec<String>> = subtasks
            .iter()
            .map(|v| v.as_str().map(str::to_string).filter(|s| !s.is_empty()))
            .collect();
        statements.filter(|s| !s.is_empty())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_object_parses_verbatim() {
        let out =
            parse_agent_output(r#"{"thought": "look first", "action": "app.call(x=1)"}"#).unwrap();
        assert_eq!(out.thought, "look first");
        assert_eq!(out.action, "app.call(x=1)");
    }

    #[test]
    fn surrounding_prose_is_tolerated() {
        let completion = r#"Sure! Here is my next move:
{"thought": "check balance", "action": "ledger.balance(user=\"alice\")"}
Hope that helps."#;
        let out = parse_agent_output(completion).unwrap();
        assert_eq!(out.thought, "check balance");
    }

    #[test]
    fn extra_fields_are_ignored() {
        let out = parse_agent_output(
            r#"{"thought": "t", "action": "a", "confidence": 0.9, "notes": [1,2]}"#,
        )
        .unwrap();
        assert_eq!(out.action, "a");
    }

    #[test]
    fn completion_without_object_is_a_parse_error() {
        assert_eq!(
            parse_agent_output("no json here at all"),
            Err(ParseError::NoObject)
        );
    }

    #[test]
    fn object_missing_fields_is_a_parse_error() {
        assert_eq!(
            parse_agent_output(r#"{"thought": "only half"}"#),
            Err(ParseError::MissingFields("thought and action"))
        );
        // Non-string fields do not count.
        assert!(parse_agent_output(r#"{"thought": 3, "action": 4}"#).is_err());
    }

    #[test]
    fn later_object_with_fields_wins_over_earlier_without() {
        let completion = r#"{"note": "metadata"} then {"thought": "t", "action": "a"}"#;
        let out = parse_agent_output(completion).unwrap();
        assert_eq!(out.thought, "t");
    }

    #[test]
    fn plan_parsing_accepts_lists_and_rejects_empty() {
        let plan = parse_plan_output(r#"{"subtasks": ["first", "second"]}"#).unwrap();
        assert_eq!(plan, vec!["first", "second"]);
        assert!(parse_plan_output(r#"{"subtasks": []}"#).is_err());
        assert!(parse_plan_output("not json").is_err());
        assert!(parse_plan_output(r#"{"subtasks": ["ok", ""]}"#).is_err());
    }
}
