use std::collections::HashSet;

use super::{AlgebraError, ElemId, LawReport, MonoidTable, Verification};

/// A monoid action on the finite carrier `{0, .., m-1}`, stored curried: one
/// endofunction per monoid element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAction {
    monoid: MonoidTable,
    carrier: usize,
    maps: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionProperties {
    pub faithful: bool,
    pub trivial: bool,
    /// Number of distinct endofunctions the action induces.
    pub image_size: usize,
}

impl FiniteAction {
    pub fn new(monoid: MonoidTable, carrier: usize, maps: Vec<Vec<usize>>) -> Result<Self, AlgebraError> {
        if maps.len() != monoid.len() {
            return Err(AlgebraError::MapCount { got: maps.len(), expected: monoid.len() });
        }
        for (a, map) in maps.iter().enumerate() {
            if map.len() != carrier {
                return Err(AlgebraError::RowLength { row: a, len: map.len(), expected: carrier });
            }
            if let Some(&p) = map.iter().find(|&&p| p >= carrier) {
                return Err(AlgebraError::OutOfRange { what: "carrier point", value: p, bound: carrier });
            }
        }
        Ok(Self { monoid, carrier, maps })
    }

    pub fn from_fn(monoid: MonoidTable, carrier: usize, act: impl Fn(ElemId, usize) -> usize) -> Result<Self, AlgebraError> {
        let maps = monoid.elements().map(|a| (0..carrier).map(|p| act(a, p)).collect()).collect();
        Self::new(monoid, carrier, maps)
    }

    /// Cyclic group of order `n` rotating `{0..n-1}`.
    pub fn rotation(n: usize) -> Result<Self, AlgebraError> {
        Self::from_fn(MonoidTable::cyclic(n)?, n, |a, p| (p + a) % n)
    }

    /// Saturating monoid of size `n` shifting `{0..m-1}` upward, clamped at `m-1`.
    pub fn saturating_shift(n: usize, m: usize) -> Result<Self, AlgebraError> {
        Self::from_fn(MonoidTable::saturating(n)?, m, |a, p| (p + a).min(m.saturating_sub(1)))
    }

    pub fn monoid(&self) -> &MonoidTable {
        &self.monoid
    }

    pub fn carrier_size(&self) -> usize {
        self.carrier
    }

    pub fn map(&self, a: ElemId) -> &[usize] {
        &self.maps[a]
    }

    #[inline]
    pub fn apply(&self, a: ElemId, p: usize) -> usize {
        self.maps[a][p]
    }

    /// Replace the endofunction of one element. No law is checked.
    pub fn with_map(mut self, a: ElemId, map: Vec<usize>) -> Result<Self, AlgebraError> {
        if a >= self.maps.len() {
            return Err(AlgebraError::OutOfRange { what: "element", value: a, bound: self.maps.len() });
        }
        self.maps[a] = map;
        Self::new(self.monoid, self.carrier, self.maps)
    }

    /// Exhaustive check that the identity acts trivially and that
    /// `act(a·b) = act(a) ∘ act(b)` for every pair and carrier point.
    pub fn verify(&self) -> Verification {
        let mut identity = LawReport::new("action identity");
        let e = self.monoid.identity();
        for p in 0..self.carrier {
            if self.maps[e][p] != p {
                identity.record(vec![p]);
            }
        }
        let mut composition = LawReport::new("action composition");
        for a in self.monoid.elements() {
            for b in self.monoid.elements() {
                let ab = &self.maps[self.monoid.op(a, b)];
                for (p, &abp) in ab.iter().enumerate() {
                    if abp != self.maps[a][self.maps[b][p]] {
                        composition.record(vec![a, b, p]);
                    }
                }
            }
        }
        Verification::new(vec![identity, composition])
    }

    pub fn properties(&self) -> ActionProperties {
        let distinct: HashSet<&[usize]> = self.maps.iter().map(Vec::as_slice).collect();
        let identity: Vec<usize> = (0..self.carrier).collect();
        ActionProperties { faithful: distinct.len() == self.maps.len(), trivial: self.maps.iter().all(|m| *m == identity), image_size: distinct.len() }
    }

    /// Componentwise action of the product monoid on the product carrier,
    /// with points flattened as `p1 * m2 + p2`.
    pub fn product(&self, other: &FiniteAction) -> FiniteAction {
        let monoid = self.monoid.product(&other.monoid);
        let (n2, m2) = (other.monoid.len(), other.carrier);
        let maps = monoid
            .elements()
            .map(|a| {
                let (a1, a2) = (a / n2, a % n2);
                (0..self.carrier * m2).map(|p| self.apply(a1, p / m2) * m2 + other.apply(a2, p % m2)).collect()
            })
            .collect();
        FiniteAction { monoid, carrier: self.carrier * m2, maps }
    }
}

/// Check both orders of the product decomposition
/// `act(a1,a2) = act(a1,e2) ∘ act(e1,a2) = act(e1,a2) ∘ act(a1,e2)`
/// on an action of `m1 × m2`.
pub fn verify_decomposition(product: &FiniteAction, m1: &MonoidTable, m2: &MonoidTable) -> Result<Verification, AlgebraError> {
    let n2 = m2.len();
    if product.monoid().len() != m1.len() * n2 {
        return Err(AlgebraError::MapCount { got: product.monoid().len(), expected: m1.len() * n2 });
    }
    let (e1, e2) = (m1.identity(), m2.identity());
    let mut left = LawReport::new("decomposition first-then-second");
    let mut right = LawReport::new("decomposition second-then-first");
    for a1 in m1.elements() {
        for a2 in m2.elements() {
            let full = product.map(a1 * n2 + a2);
            let only1 = product.map(a1 * n2 + e2);
            let only2 = product.map(e1 * n2 + a2);
            for p in 0..product.carrier_size() {
                if full[p] != only1[only2[p]] {
                    left.record(vec![a1, a2, p]);
                }
                if full[p] != only2[only1[p]] {
                    right.record(vec![a1, a2, p]);
                }
            }
        }
    }
    Ok(Verification::new(vec![left, right]))
}

/// Number of distinct endofunctions among the restricted forms
/// `act(a1, e2)` and `act(e1, a2)` of a product action.
pub fn restricted_image_size(product: &FiniteAction, m1: &MonoidTable, m2: &MonoidTable) -> usize {
    let n2 = m2.len();
    let mut distinct: HashSet<&[usize]> = HashSet::new();
    for a1 in m1.elements() {
        distinct.insert(product.map(a1 * n2 + m2.identity()));
    }
    for a2 in m2.elements() {
        distinct.insert(product.map(m1.identity() * n2 + a2));
    }
    distinct.len()
}
