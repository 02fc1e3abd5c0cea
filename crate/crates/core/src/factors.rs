//! Label spaces: individual factors with their ground-truth monoid actions,
//! and the product space they form.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{ElemId, FiniteAction, Verification};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FactorError {
    #[error("factor index {0} out of range")]
    Index(usize),
    #[error("element {elem} is not in the monoid of factor {factor}")]
    Element { factor: usize, elem: ElemId },
    #[error("value {value} out of range for factor {factor}")]
    Value { factor: usize, value: usize },
    #[error("expected {expected} components, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("duplicate factor name {0:?}")]
    DuplicateName(String),
    #[error("label space needs at least one factor")]
    Empty,
    #[error("factor cardinality must be positive")]
    ZeroCardinality,
    #[error("bad roster entry {0:?} (expected name:kind:cardinality)")]
    Roster(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    Categorical,
    Cyclic,
    Ordinal,
}

impl FactorKind {
    pub fn tag(self) -> u8 {
        match self {
            FactorKind::Categorical => 0,
            FactorKind::Cyclic => 1,
            FactorKind::Ordinal => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FactorKind::Categorical),
            1 => Some(FactorKind::Cyclic),
            2 => Some(FactorKind::Ordinal),
            _ => None,
        }
    }

    /// Whether predictions for this factor are scored as classes.
    pub fn is_classification(self) -> bool {
        !matches!(self, FactorKind::Ordinal)
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Categorical => "categorical",
            FactorKind::Cyclic => "cyclic",
            FactorKind::Ordinal => "ordinal",
        })
    }
}

impl FromStr for FactorKind {
    type Err = FactorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "categorical" => Ok(FactorKind::Categorical),
            "cyclic" => Ok(FactorKind::Cyclic),
            "ordinal" => Ok(FactorKind::Ordinal),
            _ => Err(FactorError::Roster(s.to_string())),
        }
    }
}

/// One label component together with its ground-truth action.
///
/// Categorical and cyclic factors are acted on by rotation (categories get a
/// fixed cyclic order); ordinal factors by a saturating shift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpec {
    name: String,
    kind: FactorKind,
    action: FiniteAction,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, kind: FactorKind, cardinality: usize) -> Result<Self, FactorError> {
        if cardinality == 0 {
            return Err(FactorError::ZeroCardinality);
        }
        let action = match kind {
            FactorKind::Categorical | FactorKind::Cyclic => FiniteAction::rotation(cardinality),
            FactorKind::Ordinal => FiniteAction::saturating_shift(cardinality, cardinality),
        }
        .expect("cardinality checked above");
        Ok(Self { name: name.into(), kind, action })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn cardinality(&self) -> usize {
        self.action.carrier_size()
    }

    pub fn action(&self) -> &FiniteAction {
        &self.action
    }

    pub fn monoid(&self) -> &crate::algebra::MonoidTable {
        self.action.monoid()
    }

    /// The single generator `1`, or nothing for a one-valued factor.
    pub fn generators(&self) -> Vec<ElemId> {
        if self.cardinality() > 1 {
            vec![1]
        } else {
            Vec::new()
        }
    }

    pub fn apply(&self, a: ElemId, value: usize) -> usize {
        self.action.apply(a, value)
    }
}

impl fmt::Display for FactorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.name, self.kind, self.cardinality())
    }
}

/// A point of the product label space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactorTuple(pub Vec<usize>);

impl FactorTuple {
    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for FactorTuple {
    fn from(v: Vec<usize>) -> Self {
        FactorTuple(v)
    }
}

impl std::ops::Index<usize> for FactorTuple {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Ordered product of factors. Combinations are numbered row-major, with the
/// first factor most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductLabelSpace {
    factors: Vec<FactorSpec>,
}

impl ProductLabelSpace {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self, FactorError> {
        if factors.is_empty() {
            return Err(FactorError::Empty);
        }
        let mut names = HashSet::new();
        for f in &factors {
            if !names.insert(f.name()) {
                return Err(FactorError::DuplicateName(f.name().to_string()));
            }
        }
        Ok(Self { factors })
    }

    /// color Cyclic(5), shape Categorical(3), scale Ordinal(3),
    /// pos_x Ordinal(8), pos_y Ordinal(8): 2880 combinations.
    pub fn minisprites() -> Self {
        "color:cyclic:5,shape:categorical:3,scale:ordinal:3,pos_x:ordinal:8,pos_y:ordinal:8".parse().expect("default roster is valid")
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> Result<&FactorSpec, FactorError> {
        self.factors.get(i).ok_or(FactorError::Index(i))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name() == name)
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.factors.iter().map(FactorSpec::cardinality).collect()
    }

    /// Number of combinations.
    pub fn grid_size(&self) -> usize {
        self.factors.iter().map(FactorSpec::cardinality).product()
    }

    pub fn check(&self, y: &FactorTuple) -> Result<(), FactorError> {
        if y.len() != self.factors.len() {
            return Err(FactorError::Arity { expected: self.factors.len(), got: y.len() });
        }
        for (i, (&v, f)) in y.0.iter().zip(&self.factors).enumerate() {
            if v >= f.cardinality() {
                return Err(FactorError::Value { factor: i, value: v });
            }
        }
        Ok(())
    }

    pub fn encode(&self, y: &FactorTuple) -> usize {
        y.0.iter().zip(&self.factors).fold(0, |acc, (&v, f)| acc * f.cardinality() + v)
    }

    pub fn decode(&self, mut id: usize) -> FactorTuple {
        let mut values = vec![0; self.factors.len()];
        for (slot, f) in values.iter_mut().zip(&self.factors).rev() {
            *slot = id % f.cardinality();
            id /= f.cardinality();
        }
        FactorTuple(values)
    }

    pub fn tuples(&self) -> impl Iterator<Item = FactorTuple> + '_ {
        (0..self.grid_size()).map(|id| self.decode(id))
    }

    /// Act on component `i` only.
    pub fn act_factor(&self, i: usize, a: ElemId, y: &FactorTuple) -> Result<FactorTuple, FactorError> {
        let f = self.factor(i)?;
        if !f.monoid().contains(a) {
            return Err(FactorError::Element { factor: i, elem: a });
        }
        self.check(y)?;
        let mut out = y.clone();
        out.0[i] = f.apply(a, y.0[i]);
        Ok(out)
    }

    /// Componentwise action of the product monoid.
    pub fn act_tuple(&self, elems: &[ElemId], y: &FactorTuple) -> Result<FactorTuple, FactorError> {
        if elems.len() != self.factors.len() {
            return Err(FactorError::Arity { expected: self.factors.len(), got: elems.len() });
        }
        self.check(y)?;
        let values = elems
            .iter()
            .zip(&self.factors)
            .zip(&y.0)
            .enumerate()
            .map(|(i, ((&a, f), &v))| if f.monoid().contains(a) { Ok(f.apply(a, v)) } else { Err(FactorError::Element { factor: i, elem: a }) })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FactorTuple(values))
    }

    /// Canonical projection onto factor `i`.
    pub fn project(&self, i: usize, y: &FactorTuple) -> Result<usize, FactorError> {
        self.factor(i)?;
        y.0.get(i).copied().ok_or(FactorError::Arity { expected: self.factors.len(), got: y.len() })
    }

    /// Identity element of every factor.
    pub fn identities(&self) -> Vec<ElemId> {
        self.factors.iter().map(|f| f.monoid().identity()).collect()
    }

    /// Identity everywhere except `a` at factor `i`.
    pub fn single(&self, i: usize, a: ElemId) -> Vec<ElemId> {
        let mut elems = self.identities();
        elems[i] = a;
        elems
    }

    /// Action law checks for every factor.
    pub fn verify(&self) -> Verification {
        let mut all = Verification::default();
        for f in &self.factors {
            all.extend(f.action().verify().scoped(f.name()));
        }
        all
    }
}

impl fmt::Display for ProductLabelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses rosters such as `color:cyclic:5,pos_x:ordinal:8`.
impl FromStr for ProductLabelSpace {
    type Err = FactorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let factors = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|entry| {
                let parts: Vec<&str> = entry.split(':').collect();
                let [name, kind, card] = parts[..] else {
                    return Err(FactorError::Roster(entry.to_string()));
                };
                let card: usize = card.parse().map_err(|_| FactorError::Roster(entry.to_string()))?;
                FactorSpec::new(name, kind.parse()?, card)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ProductLabelSpace::new(factors)
    }
}
