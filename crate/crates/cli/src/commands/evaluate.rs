use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use p2p_core::agents::PolicyCheckpoint;
use p2p_core::env::{kpi_report, run_episode, Environment, EpisodeLog, KpiReport, KpiSummary, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv, write_json};
use crate::config::PolicyFamily;
use crate::manifest::write_manifest;
use crate::scenario::{environment, forecast_table, load_community};
use crate::{CliError, RunConfig};

/// One metric in one market setting across the policy families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub p2p: String,
    pub rule_based: Option<f64>,
    pub dqn: Option<f64>,
    pub dqn_forecast: Option<f64>,
    /// `(forecast − plain) / plain · 100`.
    pub pct_diff_dqn_vs_forecast: Option<f64>,
}

fn p2p_label(enabled: bool) -> &'static str {
    if enabled {
        "p2p_on"
    } else {
        "p2p_off"
    }
}

pub fn pct_diff(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| (b - a) / a * 100.0)
}

/// Checkpointed networks of one learned family, one per agent.
fn load_family(cfg: &RunConfig, env: &Environment, family: PolicyFamily) -> Result<Vec<PolicyCheckpoint>, CliError> {
    let dir = cfg.checkpoint_dir().join(family.slug());
    env.agents()
        .iter()
        .map(|a| {
            let path = dir.join(format!("{}.json", a.id));
            if !path.exists() {
                return Err(CliError::Validation(format!("missing policy checkpoint {} (run train-agents first)", path.display())));
            }
            let ckpt = PolicyCheckpoint::load(&path)?;
            if ckpt.agent_id != a.id {
                return Err(CliError::Validation(format!("{} holds agent `{}`", path.display(), ckpt.agent_id)));
            }
            Ok(ckpt)
        })
        .collect()
}

fn policies(family: PolicyFamily, ckpts: &[PolicyCheckpoint], n_agents: usize, epsilon: f64, seed: u64) -> Result<Vec<Policy>, CliError> {
    match family {
        PolicyFamily::RuleBased => Ok(vec![Policy::RuleBased; n_agents]),
        PolicyFamily::Dqn | PolicyFamily::DqnForecast => ckpts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                Ok(Policy::Dqn { q: c.network()?, spec: c.state, epsilon, rng })
            })
            .collect(),
    }
}

/// Episode start hours, shared by every cell of the grid.
pub fn episode_starts(cfg: &RunConfig) -> Vec<usize> {
    let e = &cfg.evaluation;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    (0..e.episodes).map(|_| e.start + 24 * rng.random_range(0..e.span_days.max(1))).collect()
}

pub fn run_cell(env: &Environment, cfg: &RunConfig, family: PolicyFamily, ckpts: &[PolicyCheckpoint]) -> Result<Vec<EpisodeLog>, CliError> {
    let eps = cfg.evaluation_epsilon();
    episode_starts(cfg)
        .into_iter()
        .enumerate()
        .map(|(k, start)| {
            let mut p = policies(family, ckpts, env.n_agents(), eps, cfg.seed.wrapping_add(k as u64))?;
            Ok(run_episode(env, start, cfg.evaluation.episode_hours, &mut p)?)
        })
        .collect()
}

fn metric_rows(p2p: bool, reports: &[(PolicyFamily, KpiReport)]) -> Vec<ComparisonRow> {
    let metrics: [(&str, fn(&KpiSummary) -> f64); 3] = [
        ("cost_bought", |s| s.cost_bought.mean),
        ("revenue_sold", |s| s.revenue_sold.mean),
        ("peak_hour_grid_demand", |s| s.peak_hour_grid_demand.mean),
    ];
    metrics
        .iter()
        .map(|(name, f)| {
            let get = |fam: PolicyFamily| reports.iter().find(|(x, _)| *x == fam).map(|(_, r)| f(&r.community));
            let (dqn, fc) = (get(PolicyFamily::Dqn), get(PolicyFamily::DqnForecast));
            ComparisonRow {
                metric: (*name).into(),
                p2p: p2p_label(p2p).into(),
                rule_based: get(PolicyFamily::RuleBased),
                dqn,
                dqn_forecast: fc,
                pct_diff_dqn_vs_forecast: dqn.zip(fc).and_then(|(a, b)| pct_diff(a, b)),
            }
        })
        .collect()
}

fn fmt_opt(x: Option<f64>, pct: bool) -> String {
    match (x, pct) {
        (None, _) => "-".into(),
        (Some(v), true) => format!("{v:+.1}%"),
        (Some(v), false) => format!("{v:.2}"),
    }
}

/// Markdown table: one row per metric, one column group per market setting.
pub fn comparison_markdown(rows: &[ComparisonRow]) -> String {
    let mut settings: Vec<&str> = Vec::new();
    for r in rows {
        if !settings.contains(&r.p2p.as_str()) {
            settings.push(&r.p2p);
        }
    }
    let mut out = String::from("| Metric |");
    let mut rule = String::from("|---|");
    for s in &settings {
        let s = if *s == "p2p_on" { "With P2P" } else { "Without P2P" };
        let _ = write!(out, " Rule-Based ({s}) | DQN ({s}) | DQN+Forecasting ({s}) | % Diff (DQN vs DQN Forecasting) ({s}) |");
        rule.push_str("---|---|---|---|");
    }
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    let labels = [("cost_bought", "Electricity Cost (Bought)"), ("revenue_sold", "Electricity Revenue (Sold)"), ("peak_hour_grid_demand", "Peak Hour Demand (kWh)")];
    for (key, label) in labels {
        let _ = write!(out, "| {label} |");
        for s in &settings {
            if let Some(r) = rows.iter().find(|r| r.metric == key && r.p2p == *s) {
                let _ = write!(
                    out,
                    " {} | {} | {} | {} |",
                    fmt_opt(r.rule_based, false),
                    fmt_opt(r.dqn, false),
                    fmt_opt(r.dqn_forecast, false),
                    fmt_opt(r.pct_diff_dqn_vs_forecast, true)
                );
            }
        }
        out.push('\n');
    }
    out
}

pub fn evaluate(cfg: &RunConfig, only_p2p: Option<bool>) -> Result<PathBuf, CliError> {
    let dir = ensure_dir(&cfg.out_dir.join("evaluate"))?;
    let community = load_community(cfg)?;
    let env = environment(cfg, &community, forecast_table(cfg, &community)?)?;
    let settings: Vec<bool> = only_p2p.map_or(vec![true, false], |p| vec![p]);
    let mut loaded = Vec::new();
    for &fam in &cfg.evaluation.families {
        let ckpts = if fam == PolicyFamily::RuleBased { Vec::new() } else { load_family(cfg, &env, fam)? };
        loaded.push((fam, ckpts));
    }
    for s in &episode_starts(cfg) {
        env.check_span(*s, cfg.evaluation.episode_hours)?;
    }

    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for &p2p in &settings {
        let cell_env = env.with_p2p(p2p);
        let mut reports = Vec::new();
        for (fam, ckpts) in &loaded {
            let logs = run_cell(&cell_env, cfg, *fam, ckpts)?;
            let report = kpi_report(p2p_label(p2p), fam.slug(), &logs)?;
            let sub = format!("{}/{}", p2p_label(p2p), fam.slug());
            fs::create_dir_all(dir.join(&sub))?;
            let first = &logs[0];
            write_json(&dir.join(format!("{sub}/kpi.json")), &report)?;
            write_csv(&dir.join(format!("{sub}/steps.csv")), &first.rows)?;
            write_csv(&dir.join(format!("{sub}/trades.csv")), &first.trades)?;
            write_csv(&dir.join(format!("{sub}/prices.csv")), &first.prices)?;
            write_csv(&dir.join(format!("{sub}/soc_profile.csv")), &first.daily_soc_profile())?;
            for f in ["kpi.json", "steps.csv", "trades.csv", "prices.csv", "soc_profile.csv"] {
                outputs.push(format!("{sub}/{f}"));
            }
            reports.push((*fam, report));
        }
        rows.extend(metric_rows(p2p, &reports));
    }
    write_csv(&dir.join("comparison.csv"), &rows)?;
    fs::write(dir.join("comparison.md"), comparison_markdown(&rows))?;
    outputs.extend(["comparison.csv".to_string(), "comparison.md".to_string()]);
    write_manifest(&dir, "evaluate", cfg, &outputs)?;
    Ok(dir)
}
