use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{AdamConfig, AdamState, Real, Tensor};
use crate::factors::FactorTuple;
use crate::scenes::PIXELS;
use crate::splits::{select_pairs, SplitMask};

use super::losses::{loss_l0, loss_l1, loss_l2, GradSink};
use super::maps::{power, ImageOracle, Path, Step};
use super::predictor::{loss_l3, Predictor, PredictorOptim};
use super::{AugmenterSet, EdtConfig, EdtError};

/// Iterations per log record.
pub const LOG_EVERY: usize = 100;

/// Window means of each loss term; absent terms are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: usize,
    pub l0: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
    pub sup: Option<f64>,
}

#[derive(Default)]
struct Window {
    sums: [f64; 5],
    counts: [usize; 5],
}

impl Window {
    fn add(&mut self, term: usize, v: f64) {
        self.sums[term] += v;
        self.counts[term] += 1;
    }

    fn flush(&mut self, iter: usize) -> LogRecord {
        let m = |t: usize| (self.counts[t] > 0).then(|| self.sums[t] / self.counts[t] as f64);
        let rec = LogRecord { iter, l0: m(0), l1: m(1), l2: m(2), l3: m(3), sup: m(4) };
        *self = Window::default();
        rec
    }
}

pub struct TrainedAugmenters {
    pub set: AugmenterSet,
    pub adam: Vec<AdamState<f32>>,
    pub log: Vec<LogRecord>,
}

pub struct TrainedPredictor {
    pub predictor: Predictor<f32>,
    pub log: Vec<LogRecord>,
}

/// Where ℓ3 takes its augmentations from.
#[derive(Clone, Copy)]
pub enum AugSource<'a> {
    /// Plain supervised training.
    None,
    Learned(&'a AugmenterSet),
    /// Exact re-rendering.
    Oracle,
}

fn batch_of(images: &[crate::scenes::SceneImage], ids: impl Iterator<Item = usize>) -> Tensor<f32> {
    let mut data = Vec::new();
    let mut rows = 0;
    for id in ids {
        data.extend_from_slice(images[id].pixels());
        rows += 1;
    }
    Tensor::matrix(rows, PIXELS, data)
}

fn sample<'a, T>(rng: &mut impl Rng, items: &'a [T], n: usize) -> impl Iterator<Item = &'a T> + 'a {
    let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..items.len())).collect();
    picks.into_iter().map(move |i| &items[i])
}

/// Fits one augmenter per factor generator to the training pairs (λ₀·ℓ0),
/// regularized by λ₁·ℓ1 and λ₂·ℓ2 on unpaired train-cell images.
///
/// Each iteration takes one ℓ0 batch per augmenter, one ℓ1 batch for the
/// next factor in turn, and one ℓ2 batch for the next cross-factor pair in
/// turn. ℓ1 compares `α^(r+p)` with `α^r`, where `g^(r+p) = g^r` is the
/// generator's power relation.
pub fn train_augmenters(oracle: &ImageOracle, mask: &SplitMask, config: &EdtConfig) -> Result<TrainedAugmenters, EdtError> {
    let space = oracle.renderer().space();
    let train: Vec<usize> = mask.train().iter().copied().collect();
    if train.is_empty() {
        return Err(EdtError::NoTrainCells);
    }
    if config.batch == 0 {
        return Err(EdtError::EmptyBatch);
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut set = AugmenterSet::init(space, config.aug_hidden, &mut init_rng);

    let mut pairs = Vec::with_capacity(set.len());
    for aug in &set.augmenters {
        pairs.push(select_pairs(space, mask, aug.factor, aug.elem)?.pairs);
    }
    for (i, f) in space.factors().iter().enumerate() {
        let slots: Vec<usize> = (0..set.len()).filter(|&s| set.augmenters[s].factor == i).collect();
        if !slots.is_empty() && slots.iter().all(|&s| pairs[s].is_empty()) {
            return Err(EdtError::NoPairs(f.name().to_string()));
        }
    }
    let relations: Vec<Option<(Path, Path)>> = set
        .augmenters
        .iter()
        .enumerate()
        .map(|(slot, a)| {
            let rel = space.factors()[a.factor].monoid().power_relation(a.elem);
            (rel.order() > 1).then(|| (power(slot, rel.index + rel.period), power(slot, rel.index)))
        })
        .collect();
    let compose: Vec<usize> = (0..set.len()).filter(|&s| relations[s].is_some()).collect();
    let cross: Vec<(usize, usize)> =
        (0..set.len()).flat_map(|a| (a + 1..set.len()).map(move |b| (a, b))).filter(|&(a, b)| set.augmenters[a].factor != set.augmenters[b].factor).collect();

    let adam_cfg = AdamConfig::with_lr(config.lr_aug);
    let mut adam: Vec<AdamState<f32>> = set.augmenters.iter().map(|a| AdamState::new(&a.net, adam_cfg)).collect();
    let images = oracle.images();
    let mut window = Window::default();
    let mut log = Vec::new();

    for iter in 0..config.aug_iters {
        let ctx = set.context(None);
        let mut sink = GradSink::new(&ctx);
        sink.weight = f32::lit(config.lambda0);
        for (slot, ps) in pairs.iter().enumerate() {
            if ps.is_empty() || config.lambda0 == 0.0 {
                continue;
            }
            let chosen: Vec<(usize, usize)> = sample(&mut rng, ps, config.batch).copied().collect();
            let x = batch_of(images, chosen.iter().map(|p| p.0));
            let target = batch_of(images, chosen.iter().map(|p| p.1));
            let v = loss_l0(&ctx, &[Step::Learned(slot)], &x, &target, config.distance, &mut sink)?;
            window.add(0, v);
        }
        if config.lambda1 > 0.0 && !compose.is_empty() {
            let slot = compose[iter % compose.len()];
            let (left, right) = relations[slot].as_ref().expect("filtered");
            let x = batch_of(images, sample(&mut rng, &train, config.batch).copied());
            sink.weight = f32::lit(config.lambda1);
            let v = loss_l1(&ctx, &left[..1], &left[1..], right, &x, config.distance, &mut sink)?;
            window.add(1, v);
        }
        if config.lambda2 > 0.0 && !cross.is_empty() {
            let (a, b) = cross[iter % cross.len()];
            let x = batch_of(images, sample(&mut rng, &train, config.batch).copied());
            sink.weight = f32::lit(config.lambda2);
            let v = loss_l2(&ctx, &[Step::Learned(a)], &[Step::Learned(b)], &x, config.distance, &mut sink)?;
            window.add(2, v);
        }
        for ((aug, state), g) in set.augmenters.iter_mut().zip(&mut adam).zip(&sink.grads) {
            state.step(&mut aug.net, g)?;
        }
        if (iter + 1) % LOG_EVERY == 0 {
            log.push(window.flush(iter + 1));
        }
    }
    Ok(TrainedAugmenters { set, adam, log })
}

/// Supervised training on train cells plus λ₃·ℓ3, one uniformly drawn
/// factor augmentation per batch. With `aug_powers` the augmentation is a
/// uniformly drawn non-identity power of the factor's generator.
pub fn train_predictor(oracle: &ImageOracle, mask: &SplitMask, source: AugSource<'_>, config: &EdtConfig) -> Result<TrainedPredictor, EdtError> {
    let space = oracle.renderer().space();
    let train: Vec<usize> = mask.train().iter().copied().collect();
    if train.is_empty() {
        return Err(EdtError::NoTrainCells);
    }
    if config.batch == 0 {
        return Err(EdtError::EmptyBatch);
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(3);
    let mut dims = vec![PIXELS];
    dims.extend(&config.pred_hidden);
    let mut predictor = Predictor::new(space, &dims, &mut init_rng);
    let mut optim = PredictorOptim::new(&predictor, AdamConfig::with_lr(config.lr_pred));

    // (factor, generator, slot) for every movable factor.
    let movers: Vec<(usize, usize, Option<usize>)> = space
        .factors()
        .iter()
        .enumerate()
        .flat_map(|(i, f)| f.generators().into_iter().map(move |g| (i, g)))
        .map(|(i, g)| {
            let slot = match source {
                AugSource::Learned(set) => set.augmenters.iter().position(|a| a.factor == i && a.elem == g),
                _ => None,
            };
            (i, g, slot)
        })
        .filter(|&(_, _, slot)| !matches!(source, AugSource::Learned(_)) || slot.is_some())
        .collect();
    let use_l3 = config.lambda3 > 0.0 && !matches!(source, AugSource::None) && !movers.is_empty();
    let empty = AugmenterSet { augmenters: Vec::new() };
    let ctx = match source {
        AugSource::Learned(set) => set.context(None),
        AugSource::Oracle => empty.context(Some(oracle)),
        AugSource::None => empty.context(None),
    };

    let images = oracle.images();
    let mut window = Window::default();
    let mut log = Vec::new();
    for iter in 0..config.pred_iters {
        let ids: Vec<usize> = sample(&mut rng, &train, config.batch).copied().collect();
        let x = batch_of(images, ids.iter().copied());
        let labels: Vec<FactorTuple> = ids.iter().map(|&id| space.decode(id)).collect();
        let (sup, mut grads) = predictor.supervised_loss(&x, &labels)?;
        window.add(4, sup);
        if use_l3 {
            let &(i, g, slot) = movers.choose(&mut rng).expect("non-empty");
            let monoid = space.factors()[i].monoid();
            let k = if config.aug_powers { rng.gen_range(1..monoid.power_relation(g).order()) } else { 1 };
            let path: Path = match slot {
                Some(s) => power(s, k),
                None => vec![Step::Oracle { factor: i, elem: g }; k],
            };
            let (v, mut g3) = loss_l3(&predictor, &ctx, space, &path, i, monoid.pow(g, k), &x, &labels)?;
            g3.scale(f32::lit(config.lambda3));
            grads.add_assign(&g3);
            window.add(3, v);
        }
        optim.step(&mut predictor, &grads)?;
        if (iter + 1) % LOG_EVERY == 0 {
            log.push(window.flush(iter + 1));
        }
    }
    Ok(TrainedPredictor { predictor, log })
}
