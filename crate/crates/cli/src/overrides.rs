//! Dotted-key settings overrides, shared by instance files and `--set`.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use fwbnb::bnb::{Branching, Settings};
use fwbnb::fw::{FwVariant, LineSearch};

/// Every key accepted by [`apply`].
pub const KEYS: &[&str] = &[
    "branch_and_bound.verbose",
    "branch_and_bound.branching",
    "branch_and_bound.premature_stop_k",
    "frank_wolfe.variant",
    "frank_wolfe.lazy",
    "frank_wolfe.line_search",
    "frank_wolfe.max_fw_iter",
    "tolerances.abs_gap",
    "tolerances.rel_gap",
    "tolerances.fw_gap_decay",
    "tolerances.fw_epsilon_start",
    "tolerances.fw_epsilon_min",
    "tolerances.min_lower_bound",
    "tolerances.node_limit",
    "tolerances.time_limit_s",
    "domain.warm_start",
    "domain.domain_point",
    "heuristic.simple_rounding_prob",
    "heuristic.probability_rounding_prob",
    "heuristic.follow_gradient_prob",
    "heuristic.follow_gradient_steps",
    "heuristic.hyperplane_aware_rounding_prob",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse `{value}`: {e}"))
}

/// Splits `key=value`.
pub fn split_assignment(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| anyhow!("expected key=value, got `{s}`"))
}

/// JSON scalars from instance files go through the same parser as `--set`.
pub fn json_to_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn apply(settings: &mut Settings, key: &str, value: &str) -> Result<()> {
    let tol = &mut settings.tolerances;
    let heur = &mut settings.heuristics;
    match key {
        "branch_and_bound.verbose" => settings.branch_and_bound.verbose = parse(key, value)?,
        "branch_and_bound.branching" => {
            settings.branch_and_bound.branching = match value {
                "most_infeasible" => Branching::MostInfeasible,
                "gradient_based" => Branching::GradientBased,
                _ => bail!("{key}: expected most_infeasible or gradient_based, got `{value}`"),
            }
        }
        "branch_and_bound.premature_stop_k" => settings.branch_and_bound.premature_stop_k = parse(key, value)?,
        "frank_wolfe.variant" => {
            settings.frank_wolfe.variant = match value {
                "standard" => FwVariant::Standard,
                "away" => FwVariant::AwayFw,
                "pairwise" => FwVariant::Pairwise,
                "bpcg" => FwVariant::Bpcg,
                "dicg" => FwVariant::Dicg,
                _ => bail!("{key}: expected standard, away, pairwise, bpcg or dicg, got `{value}`"),
            }
        }
        "frank_wolfe.lazy" => settings.frank_wolfe.lazy = parse(key, value)?,
        "frank_wolfe.line_search" => {
            settings.frank_wolfe.line_search = match value {
                "agnostic" => LineSearch::Agnostic,
                "secant" => LineSearch::default(),
                "backtracking" => LineSearch::Backtracking {
                    tau: 2.0,
                    initial_l: 1.0,
                },
                _ => bail!("{key}: expected agnostic, secant or backtracking, got `{value}`"),
            }
        }
        "frank_wolfe.max_fw_iter" => tol.max_fw_iter = parse(key, value)?,
        "tolerances.abs_gap" => tol.abs_gap = parse(key, value)?,
        "tolerances.rel_gap" => tol.rel_gap = parse(key, value)?,
        "tolerances.fw_gap_decay" => tol.fw_gap_decay = parse(key, value)?,
        "tolerances.fw_epsilon_start" => tol.fw_epsilon_start = parse(key, value)?,
        "tolerances.fw_epsilon_min" => tol.fw_epsilon_min = parse(key, value)?,
        "tolerances.min_lower_bound" => tol.min_lower_bound = Some(parse(key, value)?),
        "tolerances.node_limit" => tol.node_limit = Some(parse(key, value)?),
        "tolerances.time_limit_s" => tol.time_limit_s = Some(parse(key, value)?),
        "domain.warm_start" => {
            if !parse::<bool>(key, value)? {
                settings.domain.active_set = None;
            }
        }
        "domain.domain_point" => {
            if !parse::<bool>(key, value)? {
                settings.domain.domain_point = None;
            }
        }
        "heuristic.simple_rounding_prob" => heur.simple_rounding_prob = parse(key, value)?,
        "heuristic.probability_rounding_prob" => heur.probability_rounding_prob = parse(key, value)?,
        "heuristic.follow_gradient_prob" => heur.follow_gradient_prob = parse(key, value)?,
        "heuristic.follow_gradient_steps" => heur.follow_gradient_steps = parse(key, value)?,
        "heuristic.hyperplane_aware_rounding_prob" => heur.hyperplane_aware_rounding_prob = parse(key, value)?,
        _ => bail!("unknown setting `{key}`; known keys: {}", KEYS.join(", ")),
    }
    Ok(())
}

/// Applies `key=value` strings in order.
pub fn apply_all<'a>(settings: &mut Settings, assignments: impl IntoIterator<Item = &'a str>) -> Result<()> {
    for a in assignments {
        let (k, v) = split_assignment(a)?;
        apply(settings, k, v).with_context(|| format!("applying `{a}`"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_key_is_accepted() {
        let samples = [
            "true", "gradient_based", "3", "pairwise", "false", "secant", "50", "1e-5", "0.0", "0.5", "0.1", "1e-7",
            "-4", "10", "2.5", "true", "false", "1.0", "0.2", "0.3", "4", "0.7",
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut s = Settings::default();
        for (k, v) in KEYS.iter().zip(samples) {
            apply(&mut s, k, v).unwrap();
        }
        assert_eq!(s.frank_wolfe.variant, FwVariant::Pairwise);
        assert_eq!(s.tolerances.node_limit, Some(10));
        assert_eq!(s.tolerances.max_fw_iter, 50);
        assert_eq!(s.heuristics.hyperplane_aware_rounding_prob, 0.7);
    }

    #[test]
    fn bad_keys_and_values() {
        let mut s = Settings::default();
        assert!(apply(&mut s, "frank_wolfe.speed", "1").is_err());
        assert!(apply(&mut s, "frank_wolfe.lazy", "maybe").is_err());
        assert!(apply_all(&mut s, ["tolerances.abs_gap"]).is_err());
    }

    #[test]
    fn json_scalars_render_as_text() {
        assert_eq!(json_to_text(&serde_json::json!(true)), "true");
        assert_eq!(json_to_text(&serde_json::json!("dicg")), "dicg");
        assert_eq!(json_to_text(&serde_json::json!(0.25)), "0.25");
    }
}
