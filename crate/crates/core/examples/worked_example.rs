//! From first-token log-probabilities to a rating: the "shoot a film"
//! concreteness answer puts .646 on 4, .346 on 3, .006 on 5 and .001 on 2.

use llm_norms::client::{extract_token_distribution, RawCompletion};
use llm_norms::estimator::estimate;
use llm_norms::model::{default_scale, Expression, Variable};
use llm_norms::prompts::build_prompt;

fn main() -> anyhow::Result<()> {
    let variable = Variable::Concreteness;
    let scale = default_scale(variable);
    let expr = Expression::new("shoot a film")?;

    let prompt = build_prompt(variable, &expr, &scale)?;
    println!("prompt:\n{}\n", prompt.text);

    let raw = RawCompletion {
        prompt_digest: String::new(),
        top_tokens: [
            ("4", 0.646f64),
            ("3", 0.346),
            ("5", 0.006),
            ("2", 0.001),
            ("I", 0.0005),
        ]
        .iter()
        .map(|&(t, p)| (t.to_string(), p.ln()))
        .collect(),
        chosen_text: "4".into(),
    };
    let dist = extract_token_distribution(&raw, &scale)?;
    for (point, p) in dist.mass() {
        println!("  P({point}) = {p:.3}");
    }
    println!("  off-scale = {:.4}", dist.residual());

    let est = estimate(expr, variable, &scale, &dist)?;
    println!("\ndominant rating: {}", est.dominant);
    println!(
        "probability-weighted rating: {:.2} ({})",
        est.expected, est.expected
    );
    Ok(())
}
