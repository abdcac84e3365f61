//! Pairwise-complete correlations between rating sources that cover
//! different expressions.

use llm_norms::analytics::{correlation_matrix, ScoreTable};
use llm_norms::datasets::{load_gold_norms, GoldColumns};
use llm_norms::model::{default_scale, Variable};

fn main() -> anyhow::Result<()> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scale = default_scale(Variable::Concreteness);
    let (gold, _) = load_gold_norms(
        fixtures.join("gold_concreteness.csv"),
        "gold",
        Variable::Concreteness,
        &scale,
        &GoldColumns::default(),
    )?;
    let gold = ScoreTable::from(&gold);

    // Two made-up raters: one agrees closely on most items, one covers only a few.
    let close = ScoreTable::from_pairs(
        "close rater",
        gold.values
            .iter()
            .skip(5)
            .map(|(k, v)| (k.clone(), (v + 0.3 * (k.len() % 3) as f64).min(5.0))),
    );
    let sparse = ScoreTable::from_pairs("sparse rater", [("blind spot", 1.5), ("hot dog", 4.5)]);

    let report = correlation_matrix(&[gold, close, sparse])?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("Pearson above the diagonal, Spearman below:");
    let mut out = Vec::new();
    report.matrix.write_square_csv(&mut out)?;
    print!("{}", String::from_utf8(out)?);
    Ok(())
}
