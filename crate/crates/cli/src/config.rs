//! Flat key/value experiment configuration files.
//!
//! ```text
//! kind = contact
//! n = 50, 100, 200
//! lambda = 1.0
//! reps = 200
//! seed = 1
//! ```

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Contact,
    Poisson,
    Convergence,
    Verify,
    BoundSweep,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::Contact => "contact",
            ExperimentKind::Poisson => "poisson",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Verify => "verify",
            ExperimentKind::BoundSweep => "bound-sweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingRule {
    /// Complete interaction graph with unit kernel entries.
    EqualPatch,
    /// Nearest-neighbour ring; influence stays bounded as `n` grows.
    Ring,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_list: Vec<usize>,
    pub lambda: f64,
    pub d: usize,
    /// Kernel volumes `R^d` for the top-hat radius sweep.
    pub rd_list: Vec<f64>,
    pub horizon: f64,
    pub m: f64,
    pub reps: usize,
    pub seed: u64,
    pub rule: ScalingRule,
    /// Constant extinction rate (bound sweep).
    pub extinction: f64,
    /// Parameter grids for the bound sweep.
    pub theta_list: Vec<f64>,
    pub eta_list: Vec<f64>,
    pub r_list: Vec<f64>,
    pub alpha: f64,
    /// Original text, hashed into the run manifest.
    pub raw: String,
}

fn parse_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn list_of<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {key} entry {tok:?}: {e}"))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_map(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let kind = match get("kind") {
            Some("contact") => ExperimentKind::Contact,
            Some("poisson") => ExperimentKind::Poisson,
            Some("convergence") => ExperimentKind::Convergence,
            Some("verify") => ExperimentKind::Verify,
            Some("bound-sweep") | Some("sweep") => ExperimentKind::BoundSweep,
            Some(other) => bail!("unknown experiment kind: {other}"),
            None => bail!("config needs a `kind` key"),
        };
        let n_default = match kind {
            ExperimentKind::Contact => vec![50, 100, 200],
            ExperimentKind::Poisson => vec![4000],
            ExperimentKind::Convergence => vec![100, 400, 1600],
            ExperimentKind::Verify => vec![2000],
            ExperimentKind::BoundSweep => vec![1000],
        };
        let config = Self {
            kind,
            n_list: match get("n") {
                Some(s) => list_of(s, "n")?,
                None => n_default,
            },
            lambda: match get("lambda") {
                Some(s) => s.parse().context("bad lambda")?,
                None => 1.0,
            },
            d: match get("d") {
                Some(s) => s.parse().context("bad d")?,
                None => 2,
            },
            rd_list: match get("rd") {
                Some(s) => list_of(s, "rd")?,
                None => vec![50.0, 200.0, 800.0],
            },
            horizon: match get("T") {
                Some(s) => s.parse().context("bad T")?,
                None => 2.0,
            },
            m: match get("m") {
                Some(s) => s.parse().context("bad m")?,
                None => 1.0,
            },
            reps: match get("reps") {
                Some(s) => s.parse().context("bad reps")?,
                None => 200,
            },
            seed: match get("seed") {
                Some(s) => s.parse().context("bad seed")?,
                None => 1,
            },
            rule: match get("rule") {
                Some("equal") | None => ScalingRule::EqualPatch,
                Some("ring") => ScalingRule::Ring,
                Some(other) => bail!("unknown scaling rule: {other}"),
            },
            extinction: match get("extinction") {
                Some(s) => s.parse().context("bad extinction")?,
                None => 0.5,
            },
            theta_list: match get("theta") {
                Some(s) => list_of(s, "theta")?,
                None => vec![0.5, 1.0, 2.0],
            },
            eta_list: match get("eta") {
                Some(s) => list_of(s, "eta")?,
                None => vec![0.1, 0.25, 0.4],
            },
            r_list: match get("r") {
                Some(s) => list_of(s, "r")?,
                None => vec![2.0, 3.0, 4.5, 6.0],
            },
            alpha: match get("alpha") {
                Some(s) => s.parse().context("bad alpha")?,
                None => 0.35,
            },
            raw: text.to_string(),
        };
        if config.reps == 0 {
            bail!("reps must be at least 1");
        }
        if config.n_list.is_empty() {
            bail!("n list must not be empty");
        }
        Ok(config)
    }
}
