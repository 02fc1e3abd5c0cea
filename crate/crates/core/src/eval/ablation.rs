use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edt::{law_report, learned_maps, train_augmenters, train_predictor, AugSource, AugmenterSet, EdtConfig, EdtError, ImageOracle, LawResiduals};
use crate::scenes::Dataset;
use crate::splits::{SplitMask, SplitScheme};

use super::{evaluate, MetricsRecord, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    /// Supervised training only.
    Erm,
    /// Unregularized augmenters (λ₁ = λ₂ = 0) feeding ℓ3.
    EdtL0L3,
    /// Augmenters regularized by ℓ1 and ℓ2 feeding ℓ3.
    EdtFull,
    /// Exact augmentations feeding ℓ3.
    EdtOracle,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Erm, Arm::EdtL0L3, Arm::EdtFull, Arm::EdtOracle];

    pub fn key(self) -> &'static str {
        match self {
            Arm::Erm => "erm",
            Arm::EdtL0L3 => "edt-l0l3",
            Arm::EdtFull => "edt",
            Arm::EdtOracle => "oracle",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Arm::Erm => "ERM",
            Arm::EdtL0L3 => "EDT (l0, l3)",
            Arm::EdtFull => "EDT (l0, l1, l2, l3)",
            Arm::EdtOracle => "EDT-oracle",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL.into_iter().find(|a| a.key() == s).ok_or_else(|| format!("unknown arm {s:?} (expected erm, edt-l0l3, edt or oracle)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationConfig {
    pub scheme: SplitScheme,
    pub seeds: Vec<u64>,
    pub arms: Vec<Arm>,
    /// Base training settings; the seed field is replaced per run and the
    /// λ₁, λ₂ of the unregularized arm are zeroed.
    pub edt: EdtConfig,
    /// Train-cell images drawn for the law reports.
    pub law_images: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub arm: Arm,
    pub test: Result<MetricsRecord, String>,
    pub train: Option<MetricsRecord>,
}

/// Everything one seed produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub outcomes: Vec<ArmOutcome>,
    /// Law residuals of the augmenters trained with λ₁, λ₂ as configured.
    pub laws_regularized: Option<LawResiduals>,
    /// Law residuals of the augmenters trained with λ₁ = λ₂ = 0.
    pub laws_unregularized: Option<LawResiduals>,
}

/// Runs every arm for one seed. The seed fixes the split and all training.
pub fn run_seed(oracle: &ImageOracle, dataset: &Dataset, config: &AblationConfig, seed: u64) -> SeedRun {
    let space = oracle.renderer().space();
    let fail = |arm, e: String| ArmOutcome { arm, test: Err(e), train: None };
    let mask = match SplitMask::build(space, &config.scheme, seed) {
        Ok(m) => m,
        Err(e) => {
            return SeedRun { seed, outcomes: config.arms.iter().map(|&a| fail(a, e.to_string())).collect(), laws_regularized: None, laws_unregularized: None }
        }
    };
    let mut base = config.edt.clone();
    base.seed = seed;
    let mut unreg = base.clone();
    unreg.lambda1 = 0.0;
    unreg.lambda2 = 0.0;

    let mut law_ids: Vec<usize> = mask.train().iter().copied().collect();
    law_ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    law_ids.truncate(config.law_images.max(1));

    let wants = |arm| config.arms.contains(&arm);
    let train_set = |cfg: &EdtConfig| train_augmenters(oracle, &mask, cfg).map(|t| t.set);
    let full = wants(Arm::EdtFull).then(|| train_set(&base));
    let plain = wants(Arm::EdtL0L3).then(|| train_set(&unreg));
    let laws = |set: &Option<Result<AugmenterSet, EdtError>>| -> Option<LawResiduals> {
        let set = set.as_ref()?.as_ref().ok()?;
        law_report(&set.context(None), &learned_maps(set), oracle, &law_ids).ok()
    };
    let (laws_regularized, laws_unregularized) = (laws(&full), laws(&plain));

    let outcomes = config
        .arms
        .iter()
        .map(|&arm| {
            let source = match arm {
                Arm::Erm => Ok(AugSource::None),
                Arm::EdtOracle => Ok(AugSource::Oracle),
                Arm::EdtFull => full.as_ref().expect("trained above").as_ref().map(AugSource::Learned).map_err(|e| e.to_string()),
                Arm::EdtL0L3 => plain.as_ref().expect("trained above").as_ref().map(AugSource::Learned).map_err(|e| e.to_string()),
            };
            let source = match source {
                Ok(s) => s,
                Err(e) => return fail(arm, e),
            };
            let trained = match train_predictor(oracle, &mask, source, &base) {
                Ok(t) => t,
                Err(e) => return fail(arm, e.to_string()),
            };
            let tag = |mut r: MetricsRecord| {
                r.arm = arm.key().to_string();
                r
            };
            ArmOutcome {
                arm,
                test: evaluate(&trained.predictor, dataset, &mask, Side::Test).map(tag).map_err(|e| e.to_string()),
                train: evaluate(&trained.predictor, dataset, &mask, Side::Train).map(tag).ok(),
            }
        })
        .collect();
    SeedRun { seed, outcomes, laws_regularized, laws_unregularized }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub runs: Vec<SeedRun>,
    pub table: AblationTable,
}

/// Runs all seeds concurrently and reduces them to a table.
pub fn ablation(oracle: &ImageOracle, dataset: &Dataset, config: &AblationConfig) -> AblationResult {
    let runs: Vec<SeedRun> = config.seeds.par_iter().map(|&s| run_seed(oracle, dataset, config, s)).collect();
    let table = AblationTable::reduce(&config.arms, &runs);
    AblationResult { runs, table }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Summary> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Some(Summary { mean, std, n })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ({:.2})", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub arm: Arm,
    /// `None` when any seed of this arm failed.
    pub cells: Option<Vec<Summary>>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub columns: Vec<String>,
    pub rows: Vec<ArmRow>,
}

/// Outcome of the directional check `full < l0l3 < erm` on one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub column: String,
    pub full: f64,
    pub l0l3: f64,
    pub erm: f64,
    pub holds: bool,
}

impl AblationTable {
    pub fn reduce(arms: &[Arm], runs: &[SeedRun]) -> Self {
        let columns: Vec<String> = runs
            .iter()
            .flat_map(|r| &r.outcomes)
            .find_map(|o| o.test.as_ref().ok())
            .map(|r| r.scores.iter().map(|s| s.factor.clone()).collect())
            .unwrap_or_default();
        let rows = arms
            .iter()
            .map(|&arm| {
                let outcomes: Vec<&ArmOutcome> = runs.iter().flat_map(|r| &r.outcomes).filter(|o| o.arm == arm).collect();
                let errors: Vec<String> = outcomes.iter().filter_map(|o| o.test.as_ref().err().cloned()).collect();
                let cells = (errors.is_empty() && !outcomes.is_empty()).then(|| {
                    columns
                        .iter()
                        .map(|c| {
                            let xs: Vec<f64> = outcomes.iter().filter_map(|o| o.test.as_ref().ok()?.get(c)).collect();
                            Summary::of(&xs).expect("every seed succeeded")
                        })
                        .collect()
                });
                ArmRow { arm, cells, errors }
            })
            .collect();
        Self { columns, rows }
    }

    pub fn mean(&self, arm: Arm, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.rows.iter().find(|r| r.arm == arm)?.cells.as_ref()?[c].mean)
    }

    /// Arm with the lowest mean in `column`; ties go to the earlier arm.
    pub fn best(&self, column: &str) -> Option<Arm> {
        self.rows
            .iter()
            .filter_map(|r| Some((r.arm, self.mean(r.arm, column)?)))
            .fold(None, |best: Option<(Arm, f64)>, (a, m)| match best {
                Some((_, bm)) if bm <= m => best,
                _ => Some((a, m)),
            })
            .map(|(a, _)| a)
    }

    pub fn ordering(&self, column: &str) -> Option<Ordering> {
        let (full, l0l3, erm) = (self.mean(Arm::EdtFull, column)?, self.mean(Arm::EdtL0L3, column)?, self.mean(Arm::Erm, column)?);
        Some(Ordering { column: column.to_string(), full, l0l3, erm, holds: full < l0l3 && l0l3 < erm })
    }

    /// Whether the oracle arm's mean is at most every learned arm's mean.
    pub fn oracle_bound(&self, column: &str) -> Option<bool> {
        let oracle = self.mean(Arm::EdtOracle, column)?;
        let learned: Vec<f64> = [Arm::Erm, Arm::EdtL0L3, Arm::EdtFull].iter().filter_map(|&a| self.mean(a, column)).collect();
        (!learned.is_empty()).then(|| learned.iter().all(|&m| oracle <= m))
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<22}", "arm")?;
        for c in &self.columns {
            write!(f, "{c:>16}")?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:<22}", row.arm.title())?;
            match &row.cells {
                Some(cells) => {
                    for (c, s) in self.columns.iter().zip(cells) {
                        let mark = if self.best(c) == Some(row.arm) { "*" } else { " " };
                        write!(f, "{:>15}{mark}", s.to_string())?;
                    }
                }
                None => write!(f, "  failed: {}", row.errors.first().map(String::as_str).unwrap_or("no runs"))?,
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
