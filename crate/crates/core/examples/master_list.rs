//! Rank columns and the combined master list: one row per expression with
//! dominant rating, weighted rating, relative rank and percentile for each
//! variable.

use llm_norms::datasets::{load_master_list, write_master_list};
use llm_norms::mock::latent_rating;
use llm_norms::model::{default_scale, EstimateTable, Expression, NormEstimate, Variable};
use llm_norms::ranking::assign_ranks;

fn main() -> anyhow::Result<()> {
    let words = [
        "red tape",
        "ice cream",
        "peace of mind",
        "roller coaster",
        "dead end",
    ];
    let mut tables = Vec::new();
    for variable in Variable::ALL {
        let scale = default_scale(variable);
        let rows = words
            .iter()
            .map(|w| {
                let expr = Expression::new(*w)?;
                let expected = latent_rating(&expr, variable, 1, &scale);
                Ok(NormEstimate::new(
                    expr,
                    variable,
                    &scale,
                    expected.round() as u8,
                    expected,
                    0.0,
                )?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        tables.push(assign_ranks(EstimateTable::new(variable, rows)?)?);
    }

    let mut out = Vec::new();
    write_master_list(&tables, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out));

    let path = std::env::temp_dir().join(format!("llm-norms-master-{}.csv", std::process::id()));
    std::fs::write(&path, &out)?;
    let back = load_master_list(&path)?;
    let mut again = Vec::new();
    write_master_list(&back, &mut again)?;
    std::fs::remove_file(&path)?;
    println!("\nre-export byte-identical: {}", out == again);
    Ok(())
}
