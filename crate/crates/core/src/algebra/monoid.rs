use std::collections::BTreeSet;

use super::{AlgebraError, LawReport, Verification};

/// Index of an element inside a [`MonoidTable`].
pub type ElemId = usize;

/// A finite monoid stored as its Cayley table.
///
/// Construction only checks the table's shape and that every entry names an
/// element. The monoid laws are checked separately by [`MonoidTable::verify`],
/// so a table that breaks associativity can still be built and reported on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonoidTable {
    n: usize,
    table: Vec<ElemId>,
    identity: ElemId,
}

impl MonoidTable {
    pub fn from_rows(rows: Vec<Vec<ElemId>>, identity: ElemId) -> Result<Self, AlgebraError> {
        let n = rows.len();
        if n == 0 {
            return Err(AlgebraError::Empty);
        }
        if identity >= n {
            return Err(AlgebraError::OutOfRange { what: "identity", value: identity, bound: n });
        }
        let mut table = Vec::with_capacity(n * n);
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(AlgebraError::RowLength { row: a, len: row.len(), expected: n });
            }
            for value in row {
                if value >= n {
                    return Err(AlgebraError::OutOfRange { what: "table entry", value, bound: n });
                }
                table.push(value);
            }
        }
        Ok(Self { n, table, identity })
    }

    fn from_fn(n: usize, identity: ElemId, op: impl Fn(ElemId, ElemId) -> ElemId) -> Self {
        let table = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| op(a, b)).collect();
        Self { n, table, identity }
    }

    /// The cyclic group of order `n` under addition mod `n`.
    pub fn cyclic(n: usize) -> Result<Self, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::Empty);
        }
        Ok(Self::from_fn(n, 0, |a, b| (a + b) % n))
    }

    /// Natural-number addition truncated at `n - 1`.
    pub fn saturating(n: usize) -> Result<Self, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::Empty);
        }
        Ok(Self::from_fn(n, 0, |a, b| (a + b).min(n - 1)))
    }

    /// Direct product with componentwise composition. The pair `(a1, a2)` is
    /// stored at index `a1 * other.len() + a2`.
    pub fn product(&self, other: &MonoidTable) -> MonoidTable {
        let n2 = other.n;
        Self::from_fn(self.n * n2, self.identity * n2 + other.identity, |x, y| {
            let (x1, x2) = (x / n2, x % n2);
            let (y1, y2) = (y / n2, y % n2);
            self.op(x1, y1) * n2 + other.op(x2, y2)
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn identity(&self) -> ElemId {
        self.identity
    }

    pub fn elements(&self) -> std::ops::Range<ElemId> {
        0..self.n
    }

    pub fn contains(&self, a: ElemId) -> bool {
        a < self.n
    }

    /// `a · b`. Panics if either id is out of range.
    #[inline]
    pub fn op(&self, a: ElemId, b: ElemId) -> ElemId {
        assert!(a < self.n && b < self.n, "element id out of range");
        self.table[a * self.n + b]
    }

    pub fn row(&self, a: ElemId) -> &[ElemId] {
        &self.table[a * self.n..(a + 1) * self.n]
    }

    /// `a^k`, with `a^0` the identity.
    pub fn pow(&self, a: ElemId, k: usize) -> ElemId {
        (0..k).fold(self.identity, |acc, _| self.op(acc, a))
    }

    /// Exhaustive identity and associativity check.
    pub fn verify(&self) -> Verification {
        let e = self.identity;
        let mut identity = LawReport::new("identity");
        for a in self.elements() {
            if self.op(e, a) != a || self.op(a, e) != a {
                identity.record(vec![a]);
            }
        }
        let mut assoc = LawReport::new("associativity");
        for a in self.elements() {
            for b in self.elements() {
                let ab = self.op(a, b);
                for c in self.elements() {
                    if self.op(ab, c) != self.op(a, self.op(b, c)) {
                        assoc.record(vec![a, b, c]);
                    }
                }
            }
        }
        Verification::new(vec![identity, assoc])
    }

    /// Some `b` with `a·b = b·a = e`.
    pub fn inverse(&self, a: ElemId) -> Option<ElemId> {
        self.elements().find(|&b| self.op(a, b) == self.identity && self.op(b, a) == self.identity)
    }

    pub fn is_group(&self) -> bool {
        self.elements().all(|a| self.inverse(a).is_some())
    }

    pub fn is_commutative(&self) -> bool {
        self.elements().all(|a| self.elements().all(|b| self.op(a, b) == self.op(b, a)))
    }

    /// The index and period of the cyclic submonoid generated by `g`: the
    /// least `index` and `period >= 1` with `g^(index + period) = g^index`.
    pub fn power_relation(&self, g: ElemId) -> PowerRelation {
        let mut seen = vec![usize::MAX; self.n];
        let mut cur = self.identity;
        let mut k = 0;
        loop {
            if seen[cur] != usize::MAX {
                return PowerRelation { index: seen[cur], period: k - seen[cur] };
            }
            seen[cur] = k;
            cur = self.op(cur, g);
            k += 1;
        }
    }
}

/// `g^(index + period) = g^index`, minimal in both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PowerRelation {
    pub index: usize,
    pub period: usize,
}

impl PowerRelation {
    /// Number of distinct powers `g^0 .. g^(index + period - 1)`.
    pub fn order(&self) -> usize {
        self.index + self.period
    }

    /// Reduce an exponent to the smallest equivalent one.
    pub fn reduce(&self, k: usize) -> usize {
        if k < self.index {
            k
        } else {
            self.index + (k - self.index) % self.period
        }
    }
}

/// A subset of a monoid's elements, to be closed under composition.
#[derive(Clone, Debug)]
pub struct GeneratorSet<'a> {
    monoid: &'a MonoidTable,
    gens: Vec<ElemId>,
}

impl<'a> GeneratorSet<'a> {
    pub fn new(monoid: &'a MonoidTable, gens: Vec<ElemId>) -> Result<Self, AlgebraError> {
        if let Some(&bad) = gens.iter().find(|&&g| !monoid.contains(g)) {
            return Err(AlgebraError::OutOfRange { what: "generator", value: bad, bound: monoid.len() });
        }
        Ok(Self { monoid, gens })
    }

    pub fn gens(&self) -> &[ElemId] {
        &self.gens
    }

    /// Least subset containing the identity and the generators that is closed
    /// under the table.
    pub fn closure(&self) -> BTreeSet<ElemId> {
        let mut closed: BTreeSet<ElemId> = BTreeSet::new();
        closed.insert(self.monoid.identity());
        let mut frontier = vec![self.monoid.identity()];
        while let Some(x) = frontier.pop() {
            for &g in &self.gens {
                for y in [self.monoid.op(x, g), self.monoid.op(g, x)] {
                    if closed.insert(y) {
                        frontier.push(y);
                    }
                }
            }
        }
        closed
    }

    pub fn is_generating(&self) -> bool {
        self.closure().len() == self.monoid.len()
    }
}

/// Free-function form of [`GeneratorSet::closure`].
pub fn closure_from_generators(monoid: &MonoidTable, gens: &[ElemId]) -> Result<BTreeSet<ElemId>, AlgebraError> {
    Ok(GeneratorSet::new(monoid, gens.to_vec())?.closure())
}
