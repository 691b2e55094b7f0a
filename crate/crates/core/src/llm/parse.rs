//! Turning free-form agent answers into scripts and structured values.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::ModelCard;

/// Content of every fenced region, in order. An unterminated final fence
/// runs to the end of the text.
fn fenced_regions(response: &str) -> Vec<String> {
    let mut regions = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(lines), true) => {
                regions.push(lines.join("\n"));
                current = None;
            }
            (Some(lines), false) => lines.push(line),
            (None, false) => {}
        }
    }
    if let Some(lines) = current {
        regions.push(lines.join("\n"));
    }
    regions
}

/// The last fenced code region, or the whole answer trimmed when there is none.
pub fn extract_script(response: &str) -> String {
    match fenced_regions(response).pop() {
        Some(region) => region.trim_end_matches(['\n', '\r']).to_string(),
        None => response.trim().to_string(),
    }
}

/// The first JSON value found in the answer: inside a fence, the whole text,
/// or starting at the first `{` / `[` with trailing prose ignored.
pub fn extract_json(response: &str) -> Result<Value> {
    let mut candidates: Vec<String> = fenced_regions(response).into_iter().rev().collect();
    candidates.push(response.to_string());
    let mut last_err = String::from("no JSON value found");
    for text in &candidates {
        let Some(start) = text.find(['{', '[']) else {
            continue;
        };
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => return Ok(value),
            Some(Err(e)) => last_err = e.to_string(),
            None => {}
        }
    }
    Err(Error::MalformedStructuredOutput(last_err))
}

fn extract_typed<T: DeserializeOwned>(response: &str) -> Result<T> {
    let value = extract_json(response)?;
    serde_json::from_value(value).map_err(|e| Error::MalformedStructuredOutput(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct CardEntry {
    model_name: String,
    example_code: String,
}

/// Parses the retriever's JSON array of `{model_name, example_code}` entries.
pub fn parse_model_cards(response: &str, expected: usize) -> Result<Vec<ModelCard>> {
    let value = extract_json(response)?;
    let entries = match value {
        Value::Array(items) => items,
        Value::Object(mut map) => match map.remove("models") {
            Some(Value::Array(items)) => items,
            _ => {
                return Err(Error::MalformedStructuredOutput(
                    "expected a JSON array of model cards".into(),
                ))
            }
        },
        _ => {
            return Err(Error::MalformedStructuredOutput(
                "expected a JSON array of model cards".into(),
            ))
        }
    };
    let cards = entries
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let entry: CardEntry = serde_json::from_value(item)
                .map_err(|e| Error::MalformedStructuredOutput(format!("card {}: {e}", i + 1)))?;
            ModelCard::new(entry.model_name, entry.example_code).map_err(|_| {
                Error::MalformedStructuredOutput(format!("card {} has an empty field", i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if cards.len() != expected {
        return Err(Error::WrongCardCount {
            expected,
            actual: cards.len(),
        });
    }
    Ok(cards)
}

/// Serializes cards in the same shape the retriever is asked to produce.
pub fn format_model_cards(cards: &[ModelCard]) -> String {
    let entries: Vec<CardEntry> = cards
        .iter()
        .map(|c| CardEntry {
            model_name: c.model_description.clone(),
            example_code: c.example_code.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("cards serialize")
}

/// Leakage extractor answer.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct LeakageAnswer {
    #[serde(default)]
    pub code_block: String,
    pub leakage: bool,
}

impl LeakageAnswer {
    pub fn parse(response: &str) -> Result<Self> {
        extract_typed(response)
    }
}

/// Extractor answer: the block to refine and a first plan for it.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TargetAnswer {
    pub code_block: String,
    pub plan: String,
}

impl TargetAnswer {
    pub fn parse(response: &str) -> Result<Self> {
        let answer: Self = extract_typed(response)?;
        if answer.code_block.trim().is_empty() || answer.plan.trim().is_empty() {
            return Err(Error::MalformedStructuredOutput(
                "code_block and plan must be non-empty".into(),
            ));
        }
        Ok(answer)
    }
}

/// Answer naming an optional block; an empty or missing block means none.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct BlockAnswer {
    #[serde(default)]
    pub code_block: Option<String>,
}

impl BlockAnswer {
    pub fn parse(response: &str) -> Result<Option<String>> {
        let answer: Self = extract_typed(response)?;
        Ok(answer.code_block.filter(|b| !b.trim().is_empty()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn script_extraction_examples() {
        assert_eq!(extract_script("here\n```\nprint(1)\n```"), "print(1)");
        assert_eq!(
            extract_script("diff:\n```python\nold()\n```\nfinal:\n```python\nnew()\nrun()\n```\n"),
            "new()\nrun()"
        );
        assert_eq!(extract_script("x = 1"), "x = 1");
        assert_eq!(extract_script("  x = 1\n\n"), "x = 1");
        assert_eq!(
            extract_script("```python\nunterminated()\n"),
            "unterminated()"
        );
    }

    #[test]
    fn empty_fence_yields_empty_script() {
        assert_eq!(extract_script("```\n```"), "");
    }

    fn cards_json(n: usize) -> String {
        let items: Vec<String> = (0..n)
            .map(|i| format!(r#"{{"model_name": "model {i}", "example_code": "fit({i})"}}"#))
            .collect();
        format!("[{}]", items.join(", "))
    }

    #[test]
    fn parses_cards_in_order() {
        let text = format!("Here you go:\n```json\n{}\n```", cards_json(4));
        let cards = parse_model_cards(&text, 4).unwrap();
        assert_eq!(cards.len(), 4);
        assert_eq!(cards[0].model_description, "model 0");
        assert_eq!(cards[3].example_code, "fit(3)");
    }

    #[test]
    fn wrong_count() {
        assert!(matches!(
            parse_model_cards(&cards_json(3), 4),
            Err(Error::WrongCardCount {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn truncated_is_malformed() {
        let full = cards_json(4);
        let truncated = &full[..full.len() / 2];
        assert!(matches!(
            parse_model_cards(truncated, 4),
            Err(Error::MalformedStructuredOutput(_))
        ));
        assert!(matches!(
            parse_model_cards("no json here", 1),
            Err(Error::MalformedStructuredOutput(_))
        ));
        assert!(matches!(
            parse_model_cards(r#"[{"model_name": "", "example_code": "x"}]"#, 1),
            Err(Error::MalformedStructuredOutput(_))
        ));
    }

    #[test]
    fn structured_answers() {
        let a = LeakageAnswer::parse(
            "```json\n{\"code_block\": \"x = scale(all)\", \"leakage\": true}\n```",
        )
        .unwrap();
        assert!(a.leakage);
        assert_eq!(a.code_block, "x = scale(all)");

        let t = TargetAnswer::parse(r#"{"code_block": "fit()", "plan": "tune"} trailing words"#)
            .unwrap();
        assert_eq!(t.plan, "tune");
        assert!(TargetAnswer::parse(r#"{"code_block": "", "plan": "tune"}"#).is_err());

        assert_eq!(BlockAnswer::parse(r#"{"code_block": ""}"#).unwrap(), None);
        assert_eq!(BlockAnswer::parse(r#"{}"#).unwrap(), None);
        assert_eq!(
            BlockAnswer::parse(r#"{"code_block": "df = df.sample(100)"}"#)
                .unwrap()
                .as_deref(),
            Some("df = df.sample(100)")
        );
    }

    fn card() -> impl Strategy<Value = ModelCard> {
        (
            "[a-zA-Z][a-zA-Z0-9 ()\"{}\\[\\]\n]{0,30}",
            "[a-z][a-z0-9_=(), \n\"'{}\\[\\]]{0,40}",
        )
            .prop_map(|(d, c)| ModelCard::new(d, c).unwrap())
    }

    proptest! {
        #[test]
        fn parse_inverts_format(cards in prop::collection::vec(card(), 0..6)) {
            let text = format_model_cards(&cards);
            prop_assert_eq!(parse_model_cards(&text, cards.len()).unwrap(), cards);
        }
    }
}
