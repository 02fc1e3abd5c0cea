//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, and
//! unknown keys are rejected. The canonical rendering lists every key in a
//! fixed order; its SHA-256 is the config digest stamped on all outputs.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use edt_core::edt::{EdtConfig, PixelDistance};
use edt_core::eval::Arm;
use edt_core::splits::SplitScheme;
use edt_core::ProductLabelSpace;
use sha2::{Digest, Sha256};

pub const DEFAULT_ROSTER: &str = "color:cyclic:5,shape:categorical:3,scale:ordinal:3,pos_x:ordinal:8,pos_y:ordinal:8";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub roster: ProductLabelSpace,
    pub split: SplitScheme,
    pub seed: u64,
    /// Number of consecutive seeds an ablation runs, starting at `seed`.
    pub seeds: usize,
    pub arms: Vec<Arm>,
    pub edt: EdtConfig,
    pub law_images: usize,
    /// Oracle-law check sample size for `verify-algebra`.
    pub law_tuples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            roster: DEFAULT_ROSTER.parse().expect("default roster"),
            split: SplitScheme::Paths { n_paths: 10, path_len: 56 },
            seed: 0,
            seeds: 5,
            arms: Arm::ALL.to_vec(),
            edt: EdtConfig::default(),
            law_images: 256,
            law_tuples: 256,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.edt;
        match key {
            "roster" => self.roster = parse(key, value)?,
            "split" => self.split = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "seeds" => self.seeds = parse(key, value)?,
            "arms" => self.arms = list(key, value)?,
            "lambda0" => e.lambda0 = parse(key, value)?,
            "lambda1" => e.lambda1 = parse(key, value)?,
            "lambda2" => e.lambda2 = parse(key, value)?,
            "lambda3" => e.lambda3 = parse(key, value)?,
            "distance" => e.distance = parse(key, value)?,
            "lr_aug" => e.lr_aug = parse(key, value)?,
            "lr_pred" => e.lr_pred = parse(key, value)?,
            "batch" => e.batch = parse(key, value)?,
            "aug_iters" => e.aug_iters = parse(key, value)?,
            "pred_iters" => e.pred_iters = parse(key, value)?,
            "aug_hidden" => e.aug_hidden = parse(key, value)?,
            "pred_hidden" => e.pred_hidden = list(key, value)?,
            "aug_powers" => e.aug_powers = parse(key, value)?,
            "law_images" => self.law_images = parse(key, value)?,
            "law_tuples" => self.law_tuples = parse(key, value)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        let e = &self.edt;
        for (name, w) in [("lambda0", e.lambda0), ("lambda1", e.lambda1), ("lambda2", e.lambda2), ("lambda3", e.lambda3)] {
            if !(w.is_finite() && w >= 0.0) {
                bail!("{name} must be finite and non-negative");
            }
        }
        for (name, lr) in [("lr_aug", e.lr_aug), ("lr_pred", e.lr_pred)] {
            if !(lr.is_finite() && lr > 0.0) {
                bail!("{name} must be positive");
            }
        }
        if e.batch == 0 {
            bail!("batch must be at least 1");
        }
        if e.aug_hidden == 0 || e.pred_hidden.is_empty() || e.pred_hidden.contains(&0) {
            bail!("hidden widths must be positive");
        }
        if self.seeds == 0 || self.arms.is_empty() {
            bail!("ablations need at least one seed and one arm");
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            cfg.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn edt_for(&self, seed: u64) -> EdtConfig {
        EdtConfig { seed, ..self.edt.clone() }
    }

    pub fn digest(&self) -> String {
        Sha256::digest(self.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.edt;
        let distance = match e.distance {
            PixelDistance::Bce => "bce",
            PixelDistance::Mse => "mse",
        };
        writeln!(f, "roster = {}", self.roster)?;
        writeln!(f, "split = {}", self.split)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "seeds = {}", self.seeds)?;
        writeln!(f, "arms = {}", join(&self.arms))?;
        writeln!(f, "lambda0 = {}", e.lambda0)?;
        writeln!(f, "lambda1 = {}", e.lambda1)?;
        writeln!(f, "lambda2 = {}", e.lambda2)?;
        writeln!(f, "lambda3 = {}", e.lambda3)?;
        writeln!(f, "distance = {distance}")?;
        writeln!(f, "lr_aug = {}", e.lr_aug)?;
        writeln!(f, "lr_pred = {}", e.lr_pred)?;
        writeln!(f, "batch = {}", e.batch)?;
        writeln!(f, "aug_iters = {}", e.aug_iters)?;
        writeln!(f, "pred_iters = {}", e.pred_iters)?;
        writeln!(f, "aug_hidden = {}", e.aug_hidden)?;
        writeln!(f, "pred_hidden = {}", join(&e.pred_hidden))?;
        writeln!(f, "aug_powers = {}", e.aug_powers)?;
        writeln!(f, "law_images = {}", self.law_images)?;
        writeln!(f, "law_tuples = {}", self.law_tuples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse_text(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_overrides() {
        let cfg = RunConfig::parse_text("# tiny\nsplit = rand:0.5\n\naug_iters = 10 # fast\narms = erm,oracle\n").unwrap();
        assert_eq!(cfg.split, SplitScheme::Rand { rho: 0.5 });
        assert_eq!(cfg.edt.aug_iters, 10);
        assert_eq!(cfg.arms, vec![Arm::Erm, Arm::EdtOracle]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse_text("learning_rate = 1").is_err());
        assert!(RunConfig::parse_text("batch = 0").is_err());
        assert!(RunConfig::parse_text("lambda1 = -1").is_err());
        assert!(RunConfig::parse_text("split = diagonal").is_err());
        assert!(RunConfig::parse_text("no equals sign").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
