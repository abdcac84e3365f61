//! Rating prompts, one self-contained user message per expression.

use serde::{Deserialize, Serialize};

use crate::model::{default_scale, Expression, ScaleSpec, Variable};

const SLOT_INTRO: &str = "The expression is: ";
const ANSWER_INTRO: &str = ". Only answer a number from ";
const CLOSING: &str = "Please limit your answer to numbers.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("expression is empty")]
    EmptyExpression,
    #[error("scale: {0}")]
    Scale(String),
}

/// A fully rendered user message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub variable: Variable,
}

impl PromptText {
    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// "a, b and c"
fn join_plain(words: &[String]) -> String {
    match words {
        [] => String::new(),
        [only] => only.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// "a, b, and c"
fn join_serial(words: &[String]) -> String {
    match words {
        [] => String::new(),
        [only] => only.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

fn render(variable: Variable, expression: &str, scale: &ScaleSpec) -> String {
    let (lo, hi) = (scale.min, scale.max);
    let opening = match variable {
        Variable::Concreteness => format!(
            "Could you please rate the concreteness of the following multiword expression on a \
             scale from {lo} to {hi}, where {lo} means {} and {hi} means {}? ",
            scale.low_label, scale.high_label
        ),
        Variable::Valence | Variable::Arousal => format!(
            "Could you please rate how reading the following multiword expression makes a person \
             feel. Use a scale from {lo} to {hi}, where {lo} means {} and {hi} means {}. ",
            scale.low_label, scale.high_label
        ),
    };
    format!(
        "{opening}Examples of words that would get a rating of {lo} are {}. \
         Examples of words that would get a rating of {hi} are {}. \
         {SLOT_INTRO}{expression}{ANSWER_INTRO}{lo} to {hi}. {CLOSING}",
        join_plain(&scale.low_anchors),
        join_serial(&scale.high_anchors),
    )
}

/// Renders the rating prompt for one expression.
///
/// The instructions are complete in every prompt; nothing is carried over
/// between expressions.
pub fn build_prompt(
    variable: Variable,
    expression: &Expression,
    scale: &ScaleSpec,
) -> Result<PromptText, PromptError> {
    if expression.raw().trim().is_empty() {
        return Err(PromptError::EmptyExpression);
    }
    scale
        .validate()
        .map_err(|e| PromptError::Scale(e.to_string()))?;
    Ok(PromptText {
        text: render(variable, expression.raw(), scale),
        variable,
    })
}

/// What can be recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub variable: Variable,
    pub expression: String,
    pub min: u8,
    pub max: u8,
}

/// Inverse of [`build_prompt`].
///
/// Prompts rendered with default scales are matched exactly against their
/// templates. Prompts with custom anchors fall back to reading the expression
/// slot and the answer range, and guess the variable from the wording.
pub fn parse_prompt(text: &str) -> Option<ParsedPrompt> {
    for variable in Variable::ALL {
        let scale = default_scale(variable);
        let template = render(variable, "\u{0}", &scale);
        let (prefix, suffix) = template.split_once('\u{0}')?;
        if let Some(expr) = text
            .strip_prefix(prefix)
            .and_then(|t| t.strip_suffix(suffix))
        {
            if !expr.trim().is_empty() {
                return Some(ParsedPrompt {
                    variable,
                    expression: expr.to_string(),
                    min: scale.min,
                    max: scale.max,
                });
            }
        }
    }
    parse_generic(text)
}

fn parse_generic(text: &str) -> Option<ParsedPrompt> {
    let start = text.find(SLOT_INTRO)? + SLOT_INTRO.len();
    let end = text.rfind(ANSWER_INTRO)?;
    if end <= start {
        return None;
    }
    let expression = &text[start..end];
    let tail = text[end + ANSWER_INTRO.len()..].strip_suffix(CLOSING)?;
    let range = tail.trim_end().strip_suffix('.')?;
    let (lo, hi) = range.split_once(" to ")?;
    let (min, max) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
    let lower = text.to_lowercase();
    let variable = if lower.contains("rate the concreteness") {
        Variable::Concreteness
    } else if lower.contains("arous") || lower.contains("calm") {
        Variable::Arousal
    } else {
        Variable::Valence
    };
    (!expression.trim().is_empty() && min < max).then(|| ParsedPrompt {
        variable,
        expression: expression.to_string(),
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(s: &str) -> Expression {
        Expression::new(s).unwrap()
    }

    fn prompt(v: Variable, s: &str) -> String {
        build_prompt(v, &expr(s), &default_scale(v)).unwrap().text
    }

    #[test]
    fn concreteness_prompt_is_verbatim() {
        assert_eq!(
            prompt(Variable::Concreteness, "shoot a film"),
            "Could you please rate the concreteness of the following multiword expression on a \
             scale from 1 to 5, where 1 means very abstract and 5 means very concrete? Examples \
             of words that would get a rating of 1 are essentialness, although and hope. \
             Examples of words that would get a rating of 5 are bat, frangipane, and blackbird. \
             The expression is: shoot a film. Only answer a number from 1 to 5. Please limit \
             your answer to numbers."
        );
    }

    #[test]
    fn valence_prompt_is_verbatim() {
        assert_eq!(
            prompt(Variable::Valence, "pure joy"),
            "Could you please rate how reading the following multiword expression makes a \
             person feel. Use a scale from 1 to 9, where 1 means very negative, bad and 9 means \
             very positive, good. Examples of words that would get a rating of 1 are pedophile, \
             AIDS and wreck. Examples of words that would get a rating of 9 are vacation, \
             fantastic, and laugh. The expression is: pure joy. Only answer a number from 1 to \
             9. Please limit your answer to numbers."
        );
    }

    #[test]
    fn arousal_prompt_is_verbatim() {
        assert_eq!(
            prompt(Variable::Arousal, "gang rape"),
            "Could you please rate how reading the following multiword expression makes a \
             person feel. Use a scale from 1 to 9, where 1 means very calm, relaxed and 9 means \
             very aroused, energized. Examples of words that would get a rating of 1 are grain, \
             dull and rest. Examples of words that would get a rating of 9 are gun, lover, and \
             thrill. The expression is: gang rape. Only answer a number from 1 to 9. Please \
             limit your answer to numbers."
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(
            prompt(Variable::Valence, "x"),
            prompt(Variable::Valence, "x")
        );
    }

    #[test]
    fn expression_appears_once_and_prompt_closes() {
        for v in Variable::ALL {
            let p = prompt(v, "fat cat");
            assert_eq!(p.matches("fat cat").count(), 1);
            assert!(p.ends_with(CLOSING));
        }
    }

    #[test]
    fn custom_anchors_are_rendered() {
        let mut scale = default_scale(Variable::Concreteness);
        scale.low_anchors = vec!["idea".into()];
        scale.high_anchors = vec!["stone".into(), "tree".into()];
        let p = build_prompt(Variable::Concreteness, &expr("rock"), &scale)
            .unwrap()
            .text;
        assert!(p.contains("rating of 1 are idea."));
        assert!(p.contains("rating of 5 are stone and tree."));
    }

    #[test]
    fn empty_expression_rejected() {
        // Expression::new already refuses blank text; go through serde to
        // sneak one past the constructor.
        let blank: Expression = serde_json::from_str(r#"{"raw":" ","key":""}"#).unwrap();
        let scale = default_scale(Variable::Valence);
        assert_eq!(
            build_prompt(Variable::Valence, &blank, &scale),
            Err(PromptError::EmptyExpression)
        );
    }

    #[test]
    fn parse_inverts_build() {
        for v in Variable::ALL {
            for e in [
                "shoot a film",
                "Merry Christmas and a Happy New Year",
                "a. b",
            ] {
                let parsed = parse_prompt(&prompt(v, e)).unwrap();
                assert_eq!(parsed.variable, v);
                assert_eq!(parsed.expression, e);
                let s = default_scale(v);
                assert_eq!((parsed.min, parsed.max), (s.min, s.max));
            }
        }
        let mut scale = default_scale(Variable::Arousal);
        scale.high_anchors = vec!["storm".into()];
        let p = build_prompt(Variable::Arousal, &expr("thunder"), &scale).unwrap();
        let parsed = parse_prompt(&p.text).unwrap();
        assert_eq!(parsed.variable, Variable::Arousal);
        assert_eq!(parsed.expression, "thunder");
        assert!(parse_prompt("rate this: 4").is_none());
    }
}
