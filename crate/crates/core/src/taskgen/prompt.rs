//! Prompt templates with `{{name}}` placeholders, filled in a single pass so
//! table content is never re-scanned for placeholders.

use super::{TaskError, TaskInstance, TaskKind};

pub const DEFAULT_TEMPLATE: &str = "default";

const DEFAULT_TEXT: &str = "{{preamble}}\n\n{{table}}\n\n{{question}}\n{{directive}}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        PromptTemplate {
            id: id.into(),
            text: text.into(),
        }
    }

    pub fn builtin(id: &str) -> Result<Self, TaskError> {
        match id {
            DEFAULT_TEMPLATE => Ok(PromptTemplate::new(DEFAULT_TEMPLATE, DEFAULT_TEXT)),
            other => Err(TaskError::UnknownTemplate(other.to_string())),
        }
    }

    /// Substitutes `vars`; any placeholder without a value is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TaskError> {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| TaskError::UnfilledPlaceholder(after.to_string()))?;
            let name = after[..close].trim();
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TaskError::UnfilledPlaceholder(name.to_string()))?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Prompt for a task with the given table text and question.
    pub fn fill(
        &self,
        kind: TaskKind,
        format: crate::formats::Format,
        table: &str,
        question: &str,
    ) -> Result<String, TaskError> {
        let preamble = match kind {
            TaskKind::TableReconstruction => {
                "Each line below describes one table row as comma-separated \"column: value\" pairs.".to_string()
            }
            _ => format!("The following table is written in {} format.", format.describe()),
        };
        let directive = if kind.is_fact() {
            "Answer with the value only.".to_string()
        } else {
            format!(
                "Output only the table in {} format, including the header row and row index.",
                format.describe()
            )
        };
        self.render(&[
            ("preamble", &preamble),
            ("table", table),
            ("question", question),
            ("directive", &directive),
        ])
    }
}

pub fn build_prompt(instance: &TaskInstance, template_id: &str) -> Result<String, TaskError> {
    PromptTemplate::builtin(template_id)?.fill(
        instance.kind,
        instance.format,
        &instance.rendered_table,
        &instance.question,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::Format;

    #[test]
    fn unfilled_placeholder_is_an_error() {
        let t = PromptTemplate::new("x", "{{table}} and {{missing}}");
        assert_eq!(
            t.render(&[("table", "T")]),
            Err(TaskError::UnfilledPlaceholder("missing".into()))
        );
    }

    #[test]
    fn content_is_not_rescanned() {
        let t = PromptTemplate::builtin(DEFAULT_TEMPLATE).unwrap();
        let p = t
            .fill(TaskKind::Navigation, Format::Json, "{{question}}", "Q?")
            .unwrap();
        assert!(p.contains("{{question}}"));
        assert!(p.ends_with("Q?\nAnswer with the value only."));
    }

    #[test]
    fn unknown_template() {
        assert!(matches!(
            PromptTemplate::builtin("fancy"),
            Err(TaskError::UnknownTemplate(_))
        ));
    }
}
