//! Model description as given on the command line or in a model file.

use std::path::Path;

use hierform::modelspec::{Family, ModelSpec, PriorSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub formula: String,
    pub extra: Vec<String>,
    pub family: String,
    pub nl: bool,
    pub priors: Vec<String>,
}

/// Accepts `name ~ rhs`, `name = rhs` and `name: rhs`.
pub fn normalize_extra(text: &str) -> String {
    if text.contains('~') {
        return text.to_string();
    }
    for sep in ['=', ':'] {
        if let Some((name, rhs)) = text.split_once(sep) {
            let name = name.trim();
            let is_ident = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
                && !name.starts_with(|c: char| c.is_ascii_digit());
            if is_ident {
                return format!("{name} ~ {}", rhs.trim());
            }
        }
    }
    text.to_string()
}

impl ModelInput {
    /// Reads a model file: the first formula line is the main formula, later
    /// lines are `name: formula` extras. `family:` and `prior:` lines set
    /// the family and add priors; `#` starts a comment.
    pub fn from_file(
        path: &Path,
        family: Option<&str>,
        nl: bool,
        priors: &[String],
    ) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut input = ModelInput {
            formula: String::new(),
            extra: Vec::new(),
            family: family.unwrap_or("gaussian").to_string(),
            nl,
            priors: Vec::new(),
        };
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once(':') {
                match key.trim() {
                    "family" if family.is_none() => {
                        input.family = value.trim().to_string();
                        continue;
                    }
                    "family" => continue,
                    "prior" => {
                        input.priors.push(value.trim().to_string());
                        continue;
                    }
                    "nl" => {
                        input.nl = input.nl || value.trim() == "true";
                        continue;
                    }
                    _ => {}
                }
            }
            if input.formula.is_empty() {
                input.formula = line.to_string();
            } else {
                input.extra.push(normalize_extra(line));
            }
        }
        if input.formula.is_empty() {
            return Err(CliError::Usage(format!(
                "{}: no formula found",
                path.display()
            )));
        }
        input.priors.extend(priors.iter().cloned());
        Ok(input)
    }

    pub fn family(&self) -> Result<Family, CliError> {
        Family::from_name(&self.family).ok_or_else(|| {
            let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
            CliError::Usage(format!(
                "unknown family `{}` (known: {})",
                self.family,
                known.join(", ")
            ))
        })
    }

    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let priors = self
            .priors
            .iter()
            .map(|p| p.parse::<PriorSpec>())
            .collect::<Result<Vec<_>, _>>()?;
        let extra: Vec<&str> = self.extra.iter().map(String::as_str).collect();
        Ok(ModelSpec::from_strings(
            &self.formula,
            &extra,
            self.family()?,
            self.nl,
            priors,
        )?)
    }
}
