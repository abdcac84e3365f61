//! Items where an estimate and the gold norm disagree by more than 1.75
//! scale points, plus a correlation restricted to idioms.

use llm_norms::analytics::{
    discrepancy_report, subset_correlation, DiscrepancyDirection, ScoreTable,
};
use llm_norms::datasets::{
    load_expression_list, load_gold_norms, ExpressionListOptions, GoldColumns,
};
use llm_norms::mock::latent_rating;
use llm_norms::model::{default_scale, Variable};

fn main() -> anyhow::Result<()> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let variable = Variable::Concreteness;
    let scale = default_scale(variable);
    let (gold, _) = load_gold_norms(
        fixtures.join("gold_concreteness.csv"),
        "gold",
        variable,
        &scale,
        &GoldColumns::default(),
    )?;

    // The mock's latent ratings stand in for model estimates here.
    let (words, _) = load_expression_list(
        fixtures.join("expressions.csv"),
        &ExpressionListOptions::default(),
    )?;
    let est = ScoreTable::from_pairs(
        "estimate",
        words
            .iter()
            .map(|e| (e.key().to_string(), latent_rating(e, variable, 7, &scale))),
    );
    let gold = ScoreTable::from(&gold);

    let report = discrepancy_report(&gold, &est, 1.75);
    println!(
        "{} of {} shared items differ by more than 1.75 ({} estimated lower, {} higher)",
        report.entries.len(),
        report.shared,
        report.count(DiscrepancyDirection::EstimateLower),
        report.count(DiscrepancyDirection::EstimateHigher)
    );
    for d in &report.entries {
        println!(
            "  {:<18} gold {:.2}  estimate {:.2}  {}",
            d.key,
            d.gold,
            d.estimate,
            d.direction.as_str()
        );
    }

    let (idioms, _) = load_expression_list(
        fixtures.join("idioms.csv"),
        &ExpressionListOptions::default(),
    )?;
    let keys: Vec<String> = idioms.iter().map(|e| e.key().to_string()).collect();
    let (r, n) = subset_correlation(&gold, &est, &keys)?;
    println!("idiom subset: r = {r:.3} over {n} items");
    Ok(())
}
