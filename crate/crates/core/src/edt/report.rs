//! Residuals of the algebraic laws for a set of image maps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::ElemId;
use crate::diffcore::Tensor;
use crate::scenes::PIXELS;

use super::maps::{ImageOracle, MapContext, Path, Step};
use super::{AugmenterSet, EdtError, PixelDistance};

/// Drift fraction above which a non-target factor counts as leaking.
pub const LEAK_THRESHOLD: f64 = 0.25;

/// An image map standing for the action of `elem` on `factor`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportMap {
    pub factor: usize,
    pub elem: ElemId,
    pub path: Path,
}

/// One map per trained augmenter.
pub fn learned_maps(set: &AugmenterSet) -> Vec<ReportMap> {
    set.augmenters.iter().enumerate().map(|(slot, a)| ReportMap { factor: a.factor, elem: a.elem, path: vec![Step::Learned(slot)] }).collect()
}

/// The exact actions of the same generators.
pub fn oracle_maps(set: &AugmenterSet) -> Vec<ReportMap> {
    set.augmenters.iter().map(|a| ReportMap { factor: a.factor, elem: a.elem, path: vec![Step::Oracle { factor: a.factor, elem: a.elem }] }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorDrift {
    pub factor: String,
    /// Fraction of images whose decoded value of this factor moved.
    pub drift: f64,
    pub leaking: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapLaws {
    pub factor: String,
    pub elem: ElemId,
    /// `d(α(x), oracle(x))`.
    pub match_oracle: f64,
    /// `d(α^(r+p)(x), α^r(x))`; zero for an identity generator.
    pub compose: f64,
    /// Fraction of images decoded to exactly the acted-on label.
    pub hit_rate: f64,
    pub leakage: Vec<FactorDrift>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommuteResidual {
    pub first: String,
    pub second: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawResiduals {
    pub maps: Vec<MapLaws>,
    pub commute: Vec<CommuteResidual>,
}

impl LawResiduals {
    pub fn mean_match(&self) -> f64 {
        mean(self.maps.iter().map(|m| m.match_oracle))
    }

    pub fn mean_compose(&self) -> f64 {
        mean(self.maps.iter().map(|m| m.compose))
    }

    pub fn mean_commute(&self) -> f64 {
        mean(self.commute.iter().map(|c| c.residual))
    }

    pub fn leaking(&self) -> usize {
        self.maps.iter().flat_map(|m| &m.leakage).filter(|d| d.leaking).count()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl fmt::Display for LawResiduals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>4} {:>12} {:>12} {:>8}  leakage", "factor", "elem", "vs-oracle", "compose", "hit")?;
        for m in &self.maps {
            let leaks: Vec<String> = m.leakage.iter().map(|d| format!("{}={:.3}{}", d.factor, d.drift, if d.leaking { "!" } else { "" })).collect();
            writeln!(f, "{:<10} {:>4} {:>12.6} {:>12.6} {:>8.3}  {}", m.factor, m.elem, m.match_oracle, m.compose, m.hit_rate, leaks.join(" "))?;
        }
        for c in &self.commute {
            writeln!(f, "commute {} / {}: {:.6}", c.first, c.second, c.residual)?;
        }
        write!(
            f,
            "means: vs-oracle {:.6}, compose {:.6}, commute {:.6}, leaking {}",
            self.mean_match(),
            self.mean_compose(),
            self.mean_commute(),
            self.leaking()
        )
    }
}

fn repeat(path: &[Step], n: usize) -> Path {
    (0..n).flat_map(|_| path.iter().copied()).collect()
}

/// Mean-squared residuals of each law on the images of `ids`, which must be
/// rendered grid cells.
///
/// (a) every map against the exact action, (b) every generator power
/// relation, (c) every cross-factor pair's commutation, (d) label drift of
/// the mapped images decoded by exhaustive nearest-image lookup.
pub fn law_report(ctx: &MapContext<'_, f32>, maps: &[ReportMap], oracle: &ImageOracle, ids: &[usize]) -> Result<LawResiduals, EdtError> {
    if ids.is_empty() {
        return Err(EdtError::EmptyBatch);
    }
    let space = oracle.renderer().space();
    let images = oracle.images();
    let mut data = Vec::with_capacity(ids.len() * PIXELS);
    for &id in ids {
        data.extend_from_slice(images[id].pixels());
    }
    let x = Tensor::matrix(ids.len(), PIXELS, data);
    let labels: Vec<_> = ids.iter().map(|&id| space.decode(id)).collect();
    let d = |a: &Tensor<f32>, b: &Tensor<f32>| -> Result<f64, EdtError> { Ok(PixelDistance::Mse.eval(a, b)?.0) };

    let mut out = Vec::with_capacity(maps.len());
    for m in maps {
        let y = ctx.apply(&m.path, &x)?;
        let exact = ctx_oracle(ctx, oracle).apply(&[Step::Oracle { factor: m.factor, elem: m.elem }], &x)?;
        let rel = space.factor(m.factor)?.monoid().power_relation(m.elem);
        let compose = if rel.order() > 1 {
            let shared = ctx.apply(&repeat(&m.path, rel.index), &x)?;
            d(&ctx.apply(&repeat(&m.path, rel.period), &shared)?, &shared)?
        } else {
            0.0
        };
        let decoded = oracle.nearest(&y);
        let mut hits = 0;
        let mut moved = vec![0usize; space.num_factors()];
        for (label, &id) in labels.iter().zip(&decoded) {
            let want = space.act_factor(m.factor, m.elem, label)?;
            let got = space.decode(id);
            hits += usize::from(got == want);
            for (j, cnt) in moved.iter_mut().enumerate() {
                *cnt += usize::from(j != m.factor && got[j] != label[j]);
            }
        }
        let leakage = (0..space.num_factors())
            .filter(|&j| j != m.factor)
            .map(|j| {
                let drift = moved[j] as f64 / ids.len() as f64;
                FactorDrift { factor: space.factors()[j].name().to_string(), drift, leaking: drift > LEAK_THRESHOLD }
            })
            .collect();
        out.push(MapLaws {
            factor: space.factors()[m.factor].name().to_string(),
            elem: m.elem,
            match_oracle: d(&y, &exact)?,
            compose,
            hit_rate: hits as f64 / ids.len() as f64,
            leakage,
        });
    }

    let mut commute = Vec::new();
    for (a, ma) in maps.iter().enumerate() {
        for mb in &maps[a + 1..] {
            if ma.factor == mb.factor {
                continue;
            }
            let ab: Path = ma.path.iter().chain(&mb.path).copied().collect();
            let ba: Path = mb.path.iter().chain(&ma.path).copied().collect();
            commute.push(CommuteResidual {
                first: space.factors()[ma.factor].name().to_string(),
                second: space.factors()[mb.factor].name().to_string(),
                residual: d(&ctx.apply(&ab, &x)?, &ctx.apply(&ba, &x)?)?,
            });
        }
    }
    Ok(LawResiduals { maps: out, commute })
}

fn ctx_oracle<'a>(ctx: &MapContext<'a, f32>, oracle: &'a ImageOracle) -> MapContext<'a, f32> {
    MapContext::new(ctx.augmenters, Some(oracle))
}
