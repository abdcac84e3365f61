//! Histogram plot data for mock estimates. Sharp answer distributions pile
//! the weighted ratings up on the integers of the scale.

use llm_norms::analytics::histogram;
use llm_norms::client::extract_token_distribution;
use llm_norms::estimator::expected_rating;
use llm_norms::mock::simulate_response;
use llm_norms::model::{default_scale, Expression, Variable};
use llm_norms::prompts::build_prompt;

fn main() -> anyhow::Result<()> {
    let variable = Variable::Concreteness;
    let scale = default_scale(variable);
    for sharpness in [1.0, 6.0] {
        let mut values = Vec::new();
        for i in 0..1000 {
            let expr = Expression::new(format!("item {i}"))?;
            let raw = simulate_response(&build_prompt(variable, &expr, &scale)?, 3, sharpness)?;
            values.push(expected_rating(&extract_token_distribution(&raw, &scale)?)?);
        }
        let width = 0.1;
        let hist = histogram(&values, width, (0.95, 5.05))?;
        let peaks: Vec<String> = hist
            .peak_centers(5)
            .iter()
            .map(|c| format!("{c:.1}"))
            .collect();
        println!("sharpness {sharpness}: peaks at {}", peaks.join(", "));
        for bin in hist.bins.iter().step_by(2) {
            println!(
                "  {:>4.1} {}",
                bin.center,
                "#".repeat(bin.count.div_ceil(4))
            );
        }
    }
    Ok(())
}
