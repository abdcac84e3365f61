use indexmap::IndexMap;
use llm_norms::analytics::{
    compare, correlation_matrix, discrepancy_report, histogram, pearson, spearman,
    DiscrepancyDirection, ScoreTable,
};
use llm_norms::client::{extract_token_distribution, RawCompletion};
use llm_norms::datasets::{load_master_list, write_master_list};
use llm_norms::estimator::{dominant_rating, expected_rating};
use llm_norms::mock::{latent_rating, simulate_response};
use llm_norms::model::{default_scale, EstimateTable, Expression, NormEstimate, Variable};
use llm_norms::prompts::{build_prompt, parse_prompt};
use llm_norms::ranking::assign_ranks;
use proptest::prelude::*;

fn variable() -> impl Strategy<Value = Variable> {
    prop::sample::select(Variable::ALL.to_vec())
}

fn phrase() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,3}"
}

/// Top-k tokens as an endpoint might list them: numerals with odd spacing,
/// out-of-range numbers and words, whose probabilities sum to at most one.
fn top_tokens() -> impl Strategy<Value = Vec<(String, f64)>> {
    let token = prop::sample::select(vec![
        "1", "2", "3", "4", "5", "6", "7", "8", "9", " 3", "5.", "\n7", "0", "10", "I", "Sorry",
        "four",
    ]);
    prop::collection::vec((token, 0.0f64..1.0), 1..20).prop_map(|raw| {
        let total: f64 = raw.iter().map(|t| t.1).sum::<f64>() + 1e-3;
        raw.into_iter()
            .map(|(t, w)| (t.to_string(), (w / total).max(1e-300).ln()))
            .collect()
    })
}

fn table(name: &str, pairs: Vec<(String, f64)>) -> ScoreTable {
    ScoreTable::new(name, pairs.into_iter().collect::<IndexMap<_, _>>())
}

proptest! {
    #[test]
    fn distribution_mass_and_residual_partition_one(tokens in top_tokens(), var in variable()) {
        let scale = default_scale(var);
        let raw = RawCompletion { prompt_digest: "d".into(), top_tokens: tokens, chosen_text: String::new() };
        let dist = extract_token_distribution(&raw, &scale).unwrap();
        for (&p, &m) in dist.mass() {
            prop_assert!(scale.contains(p));
            prop_assert!((0.0..=1.0).contains(&m));
        }
        prop_assert!((dist.in_scale_mass() + dist.residual() - 1.0).abs() < 1e-9);
        if !dist.is_all_residual() {
            let e = expected_rating(&dist).unwrap();
            prop_assert!(e >= f64::from(scale.min) && e <= f64::from(scale.max));
            let d = dominant_rating(&dist).unwrap();
            let top = dist.mass().values().cloned().fold(0.0, f64::max);
            prop_assert_eq!(dist.mass()[&d], top);
            prop_assert!(dist.mass().iter().all(|(&p, &m)| m < top || p >= d));
        }
    }

    #[test]
    fn prompt_round_trips(expr in phrase(), var in variable()) {
        let scale = default_scale(var);
        let p = build_prompt(var, &Expression::new(expr.as_str()).unwrap(), &scale).unwrap();
        let parsed = parse_prompt(&p.text).unwrap();
        prop_assert_eq!(parsed.variable, var);
        prop_assert_eq!(parsed.expression, expr);
        prop_assert_eq!((parsed.min, parsed.max), (scale.min, scale.max));
    }

    #[test]
    fn mock_responses_are_valid_completions(expr in phrase(), var in variable(), seed in any::<u64>(), sharpness in 0.05f64..50.0) {
        let scale = default_scale(var);
        let prompt = build_prompt(var, &Expression::new(expr.as_str()).unwrap(), &scale).unwrap();
        let raw = simulate_response(&prompt, seed, sharpness).unwrap();
        prop_assert!(!raw.top_tokens.is_empty());
        prop_assert!(raw.top_tokens.iter().all(|t| t.1 <= 0.0 && t.1.is_finite()));
        prop_assert!(raw.top_tokens.windows(2).all(|w| w[0].1 >= w[1].1));
        let total: f64 = raw.top_tokens.iter().map(|t| t.1.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let dist = extract_token_distribution(&raw, &scale).unwrap();
        prop_assert!(dist.residual() < 1e-9);
        prop_assert_eq!(raw.chosen_text, dominant_rating(&dist).unwrap().to_string());
    }

    #[test]
    fn spearman_ignores_monotone_transforms(xs in prop::collection::vec(-100i32..100, 3..40), shift in -5.0f64..5.0) {
        let xs: Vec<f64> = xs.iter().map(|&v| f64::from(v) / 10.0).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x.sin() + (i % 3) as f64).collect();
        let warped: Vec<f64> = xs.iter().map(|x| (x + shift).exp()).collect();
        match (spearman(&xs, &ys), spearman(&warped, &ys)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn correlations_are_bounded_and_symmetric(pairs in prop::collection::vec((-50i32..50, -50i32..50), 3..60)) {
        let xs: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        if let (Ok(r), Ok(r2)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            prop_assert!((r - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_cells_equal_pairwise_comparisons(
        a in prop::collection::btree_map(0u16..60, 1.0f64..9.0, 0..40),
        b in prop::collection::btree_map(0u16..60, 1.0f64..9.0, 0..40),
        c in prop::collection::btree_map(0u16..60, 1.0f64..9.0, 0..40),
    ) {
        let tables: Vec<ScoreTable> = [("a", a), ("b", b), ("c", c)]
            .into_iter()
            .map(|(n, m)| table(n, m.into_iter().map(|(k, v)| (format!("k{k}"), v)).collect()))
            .collect();
        let report = correlation_matrix(&tables).unwrap();
        let mut absent = 0;
        for i in 0..3 {
            prop_assert!(report.matrix.pair(i, i).is_none());
            for j in 0..3 {
                if i == j { continue; }
                prop_assert_eq!(report.matrix.pair(i, j), report.matrix.pair(j, i));
                let direct = compare(&tables[i], &tables[j]).ok();
                prop_assert_eq!(report.matrix.pair(i, j), direct);
                if i < j && direct.is_none() { absent += 1; }
                if let Some(s) = direct {
                    prop_assert_eq!(s.n, tables[i].shared_count(&tables[j]));
                    prop_assert_eq!(report.matrix.display_value(i, j), Some(if i < j { s.pearson } else { s.spearman }));
                }
            }
        }
        prop_assert_eq!(report.warnings.len(), absent);
    }

    #[test]
    fn histogram_counts_every_value(values in prop::collection::vec(-2.0f64..12.0, 0..300), width in 0.05f64..2.0) {
        let h = histogram(&values, width, (1.0, 9.0)).unwrap();
        prop_assert_eq!(h.total(), values.len());
        prop_assert_eq!(h.bins.len(), ((8.0 / width) - 1e-9).ceil() as usize);
    }

    #[test]
    fn swapping_sources_flips_discrepancy_direction(
        pairs in prop::collection::vec((1.0f64..5.0, 1.0f64..5.0), 1..80),
        threshold in 0.0f64..3.0,
    ) {
        let gold = table("gold", pairs.iter().enumerate().map(|(i, p)| (format!("e{i}"), p.0)).collect());
        let est = table("est", pairs.iter().enumerate().map(|(i, p)| (format!("e{i}"), p.1)).collect());
        let fwd = discrepancy_report(&gold, &est, threshold);
        let back = discrepancy_report(&est, &gold, threshold);
        prop_assert_eq!(fwd.entries.len(), back.entries.len());
        for d in &fwd.entries {
            prop_assert!(d.diff.abs() > threshold);
            let other = back.entries.iter().find(|o| o.key == d.key).unwrap();
            prop_assert_ne!(other.direction, d.direction);
            prop_assert_eq!(d.direction == DiscrepancyDirection::EstimateHigher, d.diff > 0.0);
        }
        prop_assert!(fwd.entries.windows(2).all(|w| w[0].diff.abs() >= w[1].diff.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn master_list_round_trips(values in prop::collection::vec((1.0f64..=5.0, 1.0f64..=9.0, 1.0f64..=9.0), 1..60)) {
        let tables: Vec<EstimateTable> = Variable::ALL
            .iter()
            .enumerate()
            .map(|(col, &v)| {
                let scale = default_scale(v);
                let rows = values
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let e = [t.0, t.1, t.2][col];
                        let expr = Expression::new(format!("mwe {i}")).unwrap();
                        NormEstimate::new(expr, v, &scale, e.round() as u8, e, 0.0).unwrap()
                    })
                    .collect();
                assign_ranks(EstimateTable::new(v, rows).unwrap()).unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut first = Vec::new();
        write_master_list(&tables, &mut first).unwrap();
        std::fs::write(&path, &first).unwrap();
        let loaded = load_master_list(&path).unwrap();
        for (a, b) in tables.iter().zip(&loaded) {
            for (x, y) in a.rows.iter().zip(&b.rows) {
                prop_assert_eq!(x.expected.to_bits(), y.expected.to_bits());
                prop_assert_eq!(x.dominant, y.dominant);
                prop_assert_eq!(x.relative_rank, y.relative_rank);
                prop_assert_eq!(x.percentile, y.percentile);
            }
        }
        let mut second = Vec::new();
        write_master_list(&loaded, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}

#[test]
fn seeds_move_latents_for_nearly_every_word() {
    let scale = default_scale(Variable::Valence);
    let differ = (0..1000)
        .filter(|i| {
            let e = Expression::new(format!("sample word {i}")).unwrap();
            latent_rating(&e, Variable::Valence, 1, &scale)
                != latent_rating(&e, Variable::Valence, 2, &scale)
        })
        .count();
    assert!(differ >= 990, "{differ} of 1000");
}

#[test]
fn soft_mock_tracks_latent_on_average() {
    for var in Variable::ALL {
        let scale = default_scale(var);
        let mut total = 0.0;
        for i in 0..500 {
            let e = Expression::new(format!("soft item {i}")).unwrap();
            let prompt = build_prompt(var, &e, &scale).unwrap();
            let raw = simulate_response(&prompt, 9, 1.0).unwrap();
            let expected =
                expected_rating(&extract_token_distribution(&raw, &scale).unwrap()).unwrap();
            total += (expected - latent_rating(&e, var, 9, &scale)).abs();
        }
        let mean = total / 500.0;
        assert!(mean <= 0.25, "{var}: mean |expected - latent| = {mean}");
    }
}

#[test]
fn sharp_mock_is_degenerate_on_nearest_point() {
    let scale = default_scale(Variable::Arousal);
    for i in 0..300 {
        let e = Expression::new(format!("sharp item {i}")).unwrap();
        let latent = latent_rating(&e, Variable::Arousal, 2, &scale);
        if (latent.fract() - 0.5).abs() < 0.05 {
            continue;
        }
        let prompt = build_prompt(Variable::Arousal, &e, &scale).unwrap();
        let raw = simulate_response(&prompt, 2, 200.0).unwrap();
        let dist = extract_token_distribution(&raw, &scale).unwrap();
        let d = dominant_rating(&dist).unwrap();
        assert_eq!(f64::from(d), latent.round());
        assert!(dist.mass()[&d] > 0.99);
    }
}
