//! Query template pool shared by both synthesis branches.
//!
//! Templates are plain text patterns with an optional `{label}`
//! placeholder. A built-in pool ships with the crate; callers may load
//! their own from a JSONL file of `{id, branch, pattern}` entries.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Placeholder substituted with the query label.
pub const LABEL_PLACEHOLDER: &str = "{label}";

const BUILTIN_TEMPLATES: &str = include_str!("../assets/templates.jsonl");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Jsonl(#[from] crate::io::JsonlError),
    #[error("duplicate template id {0:?}")]
    DuplicateId(String),
    #[error("inter template {0:?} must contain exactly one {{label}} placeholder")]
    InterPlaceholder(String),
    #[error("intra template {0:?} may contain at most one {{label}} placeholder")]
    IntraPlaceholder(String),
    #[error("template pool has no {0:?} templates")]
    EmptyBranch(Branch),
}

/// Synthesis branch a template belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Inter,
    Intra,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Inter => write!(f, "inter"),
            Branch::Intra => write!(f, "intra"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub branch: Branch,
    pub pattern: String,
}

impl Template {
    /// Substitutes the label into the pattern.
    pub fn instantiate(&self, label: &str) -> String {
        self.pattern.replace(LABEL_PLACEHOLDER, label)
    }
}

/// Validated template pool with non-empty per-branch subsets.
#[derive(Debug, Clone)]
pub struct TemplatePool {
    templates: Vec<Template>,
    inter: Vec<usize>,
    intra: Vec<usize>,
}

impl TemplatePool {
    pub fn new(templates: Vec<Template>) -> Result<Self, TemplateError> {
        let mut seen = std::collections::HashSet::new();
        let mut inter = Vec::new();
        let mut intra = Vec::new();
        for (idx, t) in templates.iter().enumerate() {
            if !seen.insert(t.id.clone()) {
                return Err(TemplateError::DuplicateId(t.id.clone()));
            }
            let placeholders = t.pattern.matches(LABEL_PLACEHOLDER).count();
            match t.branch {
                Branch::Inter => {
                    if placeholders != 1 {
                        return Err(TemplateError::InterPlaceholder(t.id.clone()));
                    }
                    inter.push(idx);
                }
                Branch::Intra => {
                    if placeholders > 1 {
                        return Err(TemplateError::IntraPlaceholder(t.id.clone()));
                    }
                    intra.push(idx);
                }
            }
        }
        if inter.is_empty() {
            return Err(TemplateError::EmptyBranch(Branch::Inter));
        }
        if intra.is_empty() {
            return Err(TemplateError::EmptyBranch(Branch::Intra));
        }
        Ok(Self {
            templates,
            inter,
            intra,
        })
    }

    /// The pool embedded in the crate.
    pub fn builtin() -> Self {
        let templates: Vec<Template> = BUILTIN_TEMPLATES
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).expect("builtin templates are valid"))
            .collect();
        Self::new(templates).expect("builtin templates satisfy pool invariants")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let templates: Vec<Template> = crate::io::read_jsonl(path)?;
        Self::new(templates)
    }

    /// Templates of one branch, in file order.
    pub fn branch(&self, branch: Branch) -> Vec<&Template> {
        let idx = match branch {
            Branch::Inter => &self.inter,
            Branch::Intra => &self.intra,
        };
        idx.iter().map(|&i| &self.templates[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}
