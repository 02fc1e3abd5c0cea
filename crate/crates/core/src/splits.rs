//! Combination-shift splits of the label grid and the paired training data
//! each augmenter learns from.
//!
//! A split partitions combination ids into train and test. Every scheme
//! guarantees coverage: each value of each factor occurs in at least one
//! training combination, so test combinations are new only as combinations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::ElemId;
use crate::factors::{FactorError, FactorTuple, ProductLabelSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("domain and label factor must differ")]
    SameFactor,
    #[error("step block {block} cannot cover {labels} labels over {domains} domains")]
    Coverage { block: usize, labels: usize, domains: usize },
    #[error("ratio {0} must lie strictly between 0 and 1")]
    Ratio(f64),
    #[error("ratio {rho} selects {cells} cells, fewer than the {needed} needed to cover every value")]
    RatioTooSmall { rho: f64, cells: usize, needed: usize },
    #[error("bad split spec {0:?}")]
    Spec(String),
    #[error("combination id {0} outside the grid")]
    Id(usize),
}

/// How a split was built.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitScheme {
    Axis { domain: usize, label: usize },
    Step { domain: usize, label: usize, block: usize },
    Rand { rho: f64 },
    Paths { n_paths: usize, path_len: usize },
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitScheme::Axis { domain, label } => write!(f, "axis:{domain},{label}"),
            SplitScheme::Step { domain, label, block } => write!(f, "step:{domain},{label},{block}"),
            SplitScheme::Rand { rho } => write!(f, "rand:{rho}"),
            SplitScheme::Paths { n_paths, path_len } => write!(f, "paths:{n_paths},{path_len}"),
        }
    }
}

/// Parses `axis`, `step`, `rand:<rho>`, `paths:<n>,<len>`. Axis and step
/// take factors 0 and 1 as domain and label unless given as
/// `axis:<domain>,<label>` or `step:<domain>,<label>,<block>`; the default
/// block is 3.
impl FromStr for SplitScheme {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SplitError::Spec(s.to_string());
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = |args: &str| -> Result<Vec<usize>, SplitError> {
            if args.is_empty() {
                return Ok(Vec::new());
            }
            args.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
        };
        match head {
            "axis" => match nums(args)?[..] {
                [] => Ok(SplitScheme::Axis { domain: 0, label: 1 }),
                [domain, label] => Ok(SplitScheme::Axis { domain, label }),
                _ => Err(bad()),
            },
            "step" => match nums(args)?[..] {
                [] => Ok(SplitScheme::Step { domain: 0, label: 1, block: 3 }),
                [block] => Ok(SplitScheme::Step { domain: 0, label: 1, block }),
                [domain, label, block] => Ok(SplitScheme::Step { domain, label, block }),
                _ => Err(bad()),
            },
            "rand" => Ok(SplitScheme::Rand { rho: args.parse().map_err(|_| bad())? }),
            "paths" => match nums(args)?[..] {
                [n_paths, path_len] => Ok(SplitScheme::Paths { n_paths, path_len }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Train/test partition of the combination grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitMask {
    pub scheme: SplitScheme,
    pub seed: u64,
    grid_size: usize,
    train: BTreeSet<usize>,
}

impl SplitMask {
    pub fn new(scheme: SplitScheme, seed: u64, grid_size: usize, train: BTreeSet<usize>) -> Result<Self, SplitError> {
        if let Some(&bad) = train.iter().find(|&&id| id >= grid_size) {
            return Err(SplitError::Id(bad));
        }
        Ok(Self { scheme, seed, grid_size, train })
    }

    pub fn build(space: &ProductLabelSpace, scheme: &SplitScheme, seed: u64) -> Result<Self, SplitError> {
        match *scheme {
            SplitScheme::Axis { domain, label } => split_axis(space, domain, label, seed),
            SplitScheme::Step { domain, label, block } => split_step(space, domain, label, block, seed),
            SplitScheme::Rand { rho } => split_rand(space, rho, seed),
            SplitScheme::Paths { n_paths, path_len } => Ok(split_paths(space, n_paths, path_len, seed)),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn train(&self) -> &BTreeSet<usize> {
        &self.train
    }

    pub fn test(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid_size).filter(|id| !self.train.contains(id))
    }

    pub fn is_train(&self, id: usize) -> bool {
        self.train.contains(&id)
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn test_len(&self) -> usize {
        self.grid_size - self.train.len()
    }

    /// Every value of every factor occurs in some training combination.
    pub fn covers(&self, space: &ProductLabelSpace) -> bool {
        missing_values(space, &self.train).iter().all(Vec::is_empty)
    }

    /// `SPLIT <scheme> <seed>` followed by one train id per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("SPLIT {} {}\n", self.scheme, self.seed);
        for id in &self.train {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, space: &ProductLabelSpace) -> Result<Self, SplitError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| SplitError::Spec("empty split file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let ["SPLIT", scheme, seed] = parts[..] else {
            return Err(SplitError::Spec(header.to_string()));
        };
        let scheme = scheme.parse()?;
        let seed = seed.parse().map_err(|_| SplitError::Spec(header.to_string()))?;
        let train = lines.map(|l| l.parse().map_err(|_| SplitError::Spec(l.to_string()))).collect::<Result<_, _>>()?;
        Self::new(scheme, seed, space.grid_size(), train)
    }
}

fn check_pair(space: &ProductLabelSpace, domain: usize, label: usize) -> Result<(usize, usize), SplitError> {
    if domain == label {
        return Err(SplitError::SameFactor);
    }
    Ok((space.factor(domain)?.cardinality(), space.factor(label)?.cardinality()))
}

/// All combinations whose (domain, label) cell is selected; other factors are
/// fully enumerated.
fn lift_cells(space: &ProductLabelSpace, domain: usize, label: usize, keep: impl Fn(usize, usize) -> bool) -> BTreeSet<usize> {
    space.tuples().filter(|y| keep(y[domain], y[label])).map(|y| space.encode(&y)).collect()
}

/// Reference domain plus reference label: value 0 of either factor.
pub fn split_axis(space: &ProductLabelSpace, domain: usize, label: usize, seed: u64) -> Result<SplitMask, SplitError> {
    check_pair(space, domain, label)?;
    let train = lift_cells(space, domain, label, |d, l| d == 0 || l == 0);
    SplitMask::new(SplitScheme::Axis { domain, label }, seed, space.grid_size(), train)
}

/// Staircase: domain `d` keeps labels `(d * offset + k) mod L` for `k < block`,
/// with `offset = ceil(L / D)`.
pub fn split_step(space: &ProductLabelSpace, domain: usize, label: usize, block: usize, seed: u64) -> Result<SplitMask, SplitError> {
    let (domains, labels) = check_pair(space, domain, label)?;
    let block = block.min(labels);
    let offset = labels.div_ceil(domains);
    let covered: BTreeSet<usize> = (0..domains).flat_map(|d| (0..block).map(move |k| (d * offset + k) % labels)).collect();
    if block == 0 || covered.len() != labels {
        return Err(SplitError::Coverage { block, labels, domains });
    }
    let train = lift_cells(space, domain, label, |d, l| (l + labels - (d * offset) % labels) % labels < block);
    SplitMask::new(SplitScheme::Step { domain, label, block }, seed, space.grid_size(), train)
}

const RAND_ATTEMPTS: usize = 1000;

/// `ceil(rho * |grid|)` uniformly drawn combinations. Draws that miss a value
/// are rejected; if every attempt misses, the last draw is repaired.
pub fn split_rand(space: &ProductLabelSpace, rho: f64, seed: u64) -> Result<SplitMask, SplitError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SplitError::Ratio(rho));
    }
    let n = space.grid_size();
    let cells = ((rho * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let needed = space.cardinalities().into_iter().max().unwrap_or(1);
    if cells < needed {
        return Err(SplitError::RatioTooSmall { rho, cells, needed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    let mut train = BTreeSet::new();
    for _ in 0..RAND_ATTEMPTS {
        ids.shuffle(&mut rng);
        train = ids[..cells].iter().copied().collect();
        if missing_values(space, &train).iter().all(Vec::is_empty) {
            break;
        }
    }
    repair_coverage(space, &mut train, &mut rng);
    SplitMask::new(SplitScheme::Rand { rho }, seed, n, train)
}

/// Random walks that change exactly one factor per step.
pub fn random_walks(space: &ProductLabelSpace, n_paths: usize, path_len: usize, rng: &mut impl Rng) -> Vec<Vec<FactorTuple>> {
    let movable: Vec<usize> = (0..space.num_factors()).filter(|&i| space.factors()[i].cardinality() > 1).collect();
    (0..n_paths)
        .map(|_| {
            let mut cur = space.decode(rng.gen_range(0..space.grid_size()));
            let mut walk = vec![cur.clone()];
            if movable.is_empty() {
                return walk;
            }
            for _ in 0..path_len {
                let i = movable[rng.gen_range(0..movable.len())];
                let card = space.factors()[i].cardinality();
                // Uniform over the other values of factor i.
                let shift = rng.gen_range(1..card);
                cur.0[i] = (cur.0[i] + shift) % card;
                walk.push(cur.clone());
            }
            walk
        })
        .collect()
}

/// Union of `n_paths` random walks of `path_len` steps, plus repair cells.
pub fn split_paths(space: &ProductLabelSpace, n_paths: usize, path_len: usize, seed: u64) -> SplitMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: BTreeSet<usize> = random_walks(space, n_paths.max(1), path_len, &mut rng).iter().flatten().map(|y| space.encode(y)).collect();
    repair_coverage(space, &mut train, &mut rng);
    SplitMask::new(SplitScheme::Paths { n_paths, path_len }, seed, space.grid_size(), train).expect("ids come from the grid")
}

/// Values of each factor absent from `train`.
pub fn missing_values(space: &ProductLabelSpace, train: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut seen: Vec<Vec<bool>> = space.cardinalities().into_iter().map(|c| vec![false; c]).collect();
    for &id in train {
        for (i, v) in space.decode(id).0.into_iter().enumerate() {
            seen[i][v] = true;
        }
    }
    seen.into_iter().map(|s| s.iter().enumerate().filter(|(_, &b)| !b).map(|(v, _)| v).collect()).collect()
}

/// Add the fewest cells that make every value appear: cell `r` carries the
/// `r`-th missing value of each factor and random values elsewhere.
fn repair_coverage(space: &ProductLabelSpace, train: &mut BTreeSet<usize>, rng: &mut impl Rng) {
    let missing = missing_values(space, train);
    let rounds = missing.iter().map(Vec::len).max().unwrap_or(0);
    for r in 0..rounds {
        let values = missing.iter().zip(space.cardinalities()).map(|(m, card)| m.get(r).copied().unwrap_or_else(|| rng.gen_range(0..card))).collect();
        train.insert(space.encode(&FactorTuple(values)));
    }
}

/// Whether a pair set has anything to train on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairStatus {
    Ready,
    /// No pairs: the augmenter for this generator is skipped.
    Empty,
}

/// Training pairs `(y, act_factor(i, a, y))` with both ends in train.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub factor: usize,
    pub elem: ElemId,
    pub pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn status(&self) -> PairStatus {
        if self.pairs.is_empty() {
            PairStatus::Empty
        } else {
            PairStatus::Ready
        }
    }
}

pub fn select_pairs(space: &ProductLabelSpace, mask: &SplitMask, i: usize, a: ElemId) -> Result<PairSet, SplitError> {
    let f = space.factor(i)?;
    if !f.monoid().contains(a) {
        return Err(FactorError::Element { factor: i, elem: a }.into());
    }
    let pairs = mask
        .train()
        .iter()
        .filter_map(|&id| {
            let target = space.encode(&space.act_factor(i, a, &space.decode(id)).expect("validated above"));
            mask.is_train(target).then_some((id, target))
        })
        .collect();
    Ok(PairSet { factor: i, elem: a, pairs })
}
