//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use fdp_core::accountant::{log_grid, sine_block_schedule, GradientSource};

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {raw:?}", n + 1))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                bail!("line {}: empty key", n + 1);
            }
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key `{k}`", n + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    /// Fails on any key outside `allowed`.
    pub fn restrict(&self, allowed: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self.entries.keys().map(String::as_str).filter(|k| !allowed.contains(k)).collect();
        if !unknown.is_empty() {
            bail!("unknown key(s) {}; allowed: {}", unknown.join(", "), allowed.join(", "));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => parse_f64(v).with_context(|| format!("key `{key}`")),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("key `{key}`: {v:?}: {e}")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("key `{key}`: {v:?}: {e}")),
        }
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.str(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(v).with_context(|| format!("key `{key}`")),
        }
    }
}

pub fn parse_f64(v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|e| anyhow!("{v:?}: {e}"))?;
    if !x.is_finite() {
        bail!("{v:?} is not finite");
    }
    Ok(x)
}

/// `a,b,c` or `log:lo:hi:n`.
pub fn parse_list(v: &str) -> Result<Vec<f64>> {
    if let Some(rest) = v.strip_prefix("log:") {
        let p: Vec<&str> = rest.split(':').collect();
        if p.len() != 3 {
            bail!("expected log:lo:hi:n, got {v:?}");
        }
        let (lo, hi) = (parse_f64(p[0])?, parse_f64(p[1])?);
        let n: usize = p[2].parse().map_err(|e| anyhow!("{v:?}: {e}"))?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            bail!("log grid needs 0 < lo ≤ hi and n ≥ 1, got {v:?}");
        }
        return Ok(log_grid(lo, hi, n));
    }
    v.split(',').filter(|s| !s.trim().is_empty()).map(parse_f64).collect()
}

/// `sine:base:block`, `constant:σ` or `list:σ₁,σ₂,…` for `steps` steps.
pub fn parse_schedule(v: &str, steps: usize) -> Result<Vec<f64>> {
    let (kind, rest) = v.split_once(':').ok_or_else(|| anyhow!("bad sigma_schedule {v:?}"))?;
    match kind {
        "sine" => {
            let (base, block) = rest.split_once(':').ok_or_else(|| anyhow!("expected sine:base:block, got {v:?}"))?;
            let block: usize = block.parse().map_err(|e| anyhow!("{v:?}: {e}"))?;
            if block == 0 {
                bail!("sine block length must be positive");
            }
            Ok(sine_block_schedule(steps, parse_f64(base)?, block))
        }
        "constant" => Ok(vec![parse_f64(rest)?; steps]),
        "list" => {
            let l = parse_list(rest)?;
            if l.len() != steps {
                bail!("schedule lists {} values for {steps} steps", l.len());
            }
            Ok(l)
        }
        _ => bail!("unknown schedule kind `{kind}` (sine, constant, list)"),
    }
}

/// `constant:norm:dim`, `random:norm:dim` or `decaying:initial:rate:dim`.
pub fn parse_gradient(v: &str) -> Result<GradientSource> {
    let p: Vec<&str> = v.split(':').collect();
    let dim = |s: &str| -> Result<usize> { s.parse().map_err(|e| anyhow!("{v:?}: {e}")) };
    Ok(match (p[0], p.len()) {
        ("constant", 3) => GradientSource::ConstantNorm { norm: parse_f64(p[1])?, dim: dim(p[2])? },
        ("random", 3) => GradientSource::RandomDirection { norm: parse_f64(p[1])?, dim: dim(p[2])? },
        ("decaying", 4) => {
            GradientSource::DecayingNorm { initial: parse_f64(p[1])?, rate: parse_f64(p[2])?, dim: dim(p[3])? }
        }
        _ => bail!("bad gradient source {v:?} (constant:norm:dim, random:norm:dim, decaying:initial:rate:dim)"),
    })
}
