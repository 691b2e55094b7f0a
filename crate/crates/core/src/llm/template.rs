//! `{placeholder}` prompt templates loaded from text assets.
//!
//! `{name}` is substituted from the bindings, `{{` and `}}` produce literal
//! braces, and any other brace is copied through unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

use super::AgentRole;

pub type Bindings = BTreeMap<&'static str, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: AgentRole,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

#[derive(Debug, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Slot(&'a str),
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Piece::Text(&body[start..i]));
                out.push(Piece::Brace(bytes[i] as char));
                i += 2;
                start = i;
            }
            b'{' => {
                let rest = &body[i + 1..];
                let name_len = rest
                    .bytes()
                    .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
                    .count();
                let valid_start = rest
                    .bytes()
                    .next()
                    .is_some_and(|b| b.is_ascii_alphabetic() || b == b'_');
                if valid_start && rest.as_bytes().get(name_len) == Some(&b'}') {
                    out.push(Piece::Text(&body[start..i]));
                    out.push(Piece::Slot(&rest[..name_len]));
                    i += name_len + 2;
                    start = i;
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Text(&body[start..]));
    out
}

impl PromptTemplate {
    pub fn new(role: AgentRole, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = pieces(&body)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(name) => Some(name.to_string()),
                _ => None,
            })
            .collect();
        Self {
            role,
            body,
            required_placeholders,
        }
    }
}

/// Substitutes every placeholder. Bindings the template does not use are ignored.
pub fn render_prompt(template: &PromptTemplate, bindings: &Bindings) -> Result<String> {
    if let Some(missing) = template
        .required_placeholders
        .iter()
        .find(|name| !bindings.contains_key(name.as_str()))
    {
        return Err(Error::MissingBinding {
            role: template.role,
            name: missing.clone(),
        });
    }
    let mut out = String::with_capacity(template.body.len());
    for piece in pieces(&template.body) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Brace(c) => out.push(c),
            Piece::Slot(name) => out.push_str(&bindings[name]),
        }
    }
    Ok(out)
}

macro_rules! bundled {
    ($($stem:literal),* $(,)?) => {
        &[$(($stem, include_str!(concat!("../../assets/prompts/", $stem, ".txt")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "retriever",
    "init",
    "merger",
    "abl",
    "summarize",
    "extractor",
    "coder",
    "planner",
    "ens_planner",
    "ens_planner.initial",
    "ensembler",
    "debugger",
    "leakage_extractor",
    "leakage_corrector",
    "data_usage",
    "test",
    "subsample_extractor",
    "subsample_remover",
);

/// All templates, keyed by role and optional variant (`ens_planner.initial`).
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: HashMap<(AgentRole, Option<String>), PromptTemplate>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        let mut set = Self {
            templates: HashMap::new(),
        };
        for (name, body) in BUNDLED {
            set.insert_named(name, body)
                .expect("bundled template names are valid");
        }
        set
    }

    /// Bundled templates overridden by any `<stem>[.<variant>].txt` in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut set = Self::bundled();
        let entries =
            std::fs::read_dir(dir).map_err(Error::io(format!("reading {}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(Error::io("listing templates"))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body = std::fs::read_to_string(&path)
                .map_err(Error::io(format!("reading {}", path.display())))?;
            set.insert_named(name, &body)?;
        }
        Ok(set)
    }

    fn insert_named(&mut self, name: &str, body: &str) -> Result<()> {
        let (stem, variant) = match name.split_once('.') {
            Some((s, v)) => (s, Some(v.to_string())),
            None => (name, None),
        };
        let role = AgentRole::from_stem(stem)
            .ok_or_else(|| Error::Config(format!("template `{name}` names no agent role")))?;
        self.templates
            .insert((role, variant), PromptTemplate::new(role, body));
        Ok(())
    }

    pub fn set(&mut self, role: AgentRole, body: impl Into<String>) {
        self.templates
            .insert((role, None), PromptTemplate::new(role, body));
    }

    /// The variant template if present, otherwise the role's base template.
    pub fn get(&self, role: AgentRole, variant: Option<&str>) -> Result<&PromptTemplate> {
        variant
            .and_then(|v| self.templates.get(&(role, Some(v.to_string()))))
            .or_else(|| self.templates.get(&(role, None)))
            .ok_or(Error::MissingTemplate(role))
    }
}
