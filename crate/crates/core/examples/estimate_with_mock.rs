//! Batch estimation against the offline mock endpoint, with a response cache
//! so the second pass is free.

use std::sync::Arc;

use llm_norms::client::{LlmClient, ModelConfig, ResponseCache};
use llm_norms::mock::{latent_rating, MockConfig, MockServer};
use llm_norms::model::{default_scale, Expression, Variable};
use llm_norms::pipeline::estimate_expressions;
use llm_norms::ranking::assign_ranks;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let seed = 7;
    let mock = MockServer::start(
        ([127, 0, 0, 1], 0).into(),
        MockConfig {
            seed,
            ..Default::default()
        },
    )
    .await?;
    println!("mock endpoint at {}", mock.url());

    let variable = Variable::Valence;
    let scale = default_scale(variable);
    let words = [
        "pure joy",
        "broken heart",
        "traffic jam",
        "birthday party",
        "coffee table",
        "panic attack",
    ];
    let expressions = words
        .iter()
        .map(|w| Expression::new(*w))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = tempfile_dir()?;
    let cache = Arc::new(ResponseCache::open(dir.join("cache.jsonl"))?);
    let config = ModelConfig {
        endpoint_url: mock.url(),
        model_name: "mock-norms".into(),
        ..ModelConfig::default()
    };
    let client = LlmClient::with_api_key(config, cache, None)?;

    let run = estimate_expressions(&client, &expressions, variable, &scale).await?;
    let table = assign_ranks(run.table)?;
    println!(
        "{:<16} {:>8} {:>9} {:>7} {:>6}",
        "expression", "dominant", "expected", "latent", "pct"
    );
    for row in &table.rows {
        let latent = latent_rating(&row.expression, variable, seed, &scale);
        println!(
            "{:<16} {:>8} {:>9.3} {:>7.3} {:>6}",
            row.expression.raw(),
            row.dominant,
            row.expected,
            latent,
            row.percentile.unwrap_or(0)
        );
    }
    println!("network requests: {}", client.network_requests());

    estimate_expressions(&client, &expressions, variable, &scale).await?;
    println!("after a cached rerun: {}", client.network_requests());
    mock.shutdown().await;
    std::fs::remove_dir_all(dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("llm-norms-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
