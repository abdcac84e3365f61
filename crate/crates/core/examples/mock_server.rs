//! Talks to the mock endpoint over plain HTTP, the way any chat-completion
//! client would. Run `llm-norms mock-serve` for a long-lived server.

use llm_norms::client::parse_completion;
use llm_norms::mock::{BackgroundMock, MockConfig};
use llm_norms::model::{default_scale, Expression, Variable};
use llm_norms::prompts::build_prompt;

fn main() -> anyhow::Result<()> {
    let mock = BackgroundMock::start(MockConfig {
        seed: 42,
        sharpness: 2.0,
        error_rate: 0.0,
    })?;
    println!("serving on {}", mock.url());

    let scale = default_scale(Variable::Arousal);
    let prompt = build_prompt(
        Variable::Arousal,
        &Expression::new("roller coaster")?,
        &scale,
    )?;
    let body = serde_json::json!({
        "model": "mock-norms",
        "messages": [{"role": "user", "content": prompt.text}],
        "temperature": 0,
        "logprobs": true,
        "top_logprobs": 5,
        "max_tokens": 1
    });
    let rt = tokio::runtime::Runtime::new()?;
    let bytes = rt.block_on(async {
        let resp = reqwest::Client::new()
            .post(mock.url())
            .json(&body)
            .send()
            .await?;
        resp.error_for_status()?.bytes().await
    })?;
    let completion = parse_completion(&bytes, "", 5)?;
    println!("answer {:?}; top alternatives:", completion.chosen_text);
    for (token, lp) in &completion.top_tokens {
        println!("  {token:>2}  p = {:.4}", lp.exp());
    }
    println!("requests served: {}", mock.request_count());
    Ok(())
}
