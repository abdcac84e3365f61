//! Mean arousal per valence bin with a quadratic trend, and the items that
//! fall into the unusual corners of the valence/arousal plane.

use indexmap::IndexMap;
use llm_norms::analytics::{valence_arousal_profile, ProfileOptions, ScoreTable};

fn main() -> anyhow::Result<()> {
    // Arousal rises towards both ends of the valence scale.
    let mut valence = IndexMap::new();
    let mut arousal = IndexMap::new();
    for i in 0..400 {
        let v = 1.0 + 8.0 * (i as f64 / 399.0);
        let wobble = ((i * 37) % 11) as f64 / 10.0 - 0.5;
        valence.insert(format!("w{i}"), v);
        arousal.insert(
            format!("w{i}"),
            (2.5 + 0.22 * (v - 5.0).powi(2) + wobble).clamp(1.0, 9.0),
        );
    }
    valence.insert("calm despair".into(), 1.2);
    arousal.insert("calm despair".into(), 2.9);
    valence.insert("frantic meh".into(), 5.0);
    arousal.insert("frantic meh".into(), 9.0);

    let profile = valence_arousal_profile(
        &ScoreTable::new("valence", valence),
        &ScoreTable::new("arousal", arousal),
        &ProfileOptions::default(),
    )?;
    let f = profile.fit;
    println!(
        "{} items, arousal = {:.3} v^2 + {:.3} v + {:.3}",
        profile.n, f.a, f.b, f.c
    );
    for bin in &profile.bins {
        if let Some(m) = bin.mean_arousal {
            println!(
                "  valence {:>4.2}: mean arousal {m:.2} (fit {:.2}, n = {})",
                bin.center,
                f.eval(bin.center),
                bin.n
            );
        }
    }
    for hit in &profile.exceptions {
        println!(
            "  {}: {} (valence {:.2}, arousal {:.2})",
            hit.rule, hit.key, hit.valence, hit.arousal
        );
    }
    Ok(())
}
