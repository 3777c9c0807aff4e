//! The graded module `⊕_d H*(Quot_d)` on the basis
//! `a_{k_1}(c_1) … a_{k_d}(c_d)|0⟩` with `r > k_1 ≥ … ≥ k_d ≥ 0`.
//!
//! A basis vector stores its slots sorted by `k` descending and, inside a block
//! of equal `k`, by letter. Permuting two slots costs the Koszul sign of their
//! letters, so a block holding the same odd letter twice is zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curve::{CurveClass, CurveLetter};
use crate::error::{CurveError, FockError};
use crate::scalar::Scalar;

pub type Slot = (u32, CurveLetter);

#[inline]
fn slot_key(s: &Slot) -> (std::cmp::Reverse<u32>, CurveLetter) {
    (std::cmp::Reverse(s.0), s.1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockBasisVector {
    slots: Vec<Slot>,
}

impl FockBasisVector {
    pub fn vacuum() -> Self {
        FockBasisVector { slots: Vec::new() }
    }

    /// Sort raw slots into canonical order. Returns `None` when the vector
    /// vanishes, otherwise the sign picked up and the canonical vector.
    pub fn canonicalize(raw: &[Slot], rank: u32) -> Result<Option<(bool, FockBasisVector)>, FockError> {
        if let Some(&(k, _)) = raw.iter().find(|s| s.0 >= rank) {
            return Err(FockError::IndexOutOfRange { k, r: rank });
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&i| slot_key(&raw[i]));
        let letters: Vec<CurveLetter> = raw.iter().map(|s| s.1).collect();
        let negate = crate::curve::permutation_sign(&letters, &order);
        let slots: Vec<Slot> = order.iter().map(|&i| raw[i]).collect();
        if slots.windows(2).any(|w| w[0] == w[1] && w[0].1.is_odd()) {
            return Ok(None);
        }
        Ok(Some((negate, FockBasisVector { slots })))
    }

    /// Canonical form of `a_k(c)` applied to `self`.
    pub(crate) fn prepend(&self, slot: Slot) -> Option<(bool, FockBasisVector)> {
        let pos = self.slots.partition_point(|s| slot_key(s) < slot_key(&slot));
        if slot.1.is_odd() && self.slots.get(pos) == Some(&slot) {
            return None;
        }
        let negate = slot.1.is_odd() && self.slots[..pos].iter().filter(|s| s.1.is_odd()).count() % 2 == 1;
        let mut slots = Vec::with_capacity(self.slots.len() + 1);
        slots.extend_from_slice(&self.slots[..pos]);
        slots.push(slot);
        slots.extend_from_slice(&self.slots[pos..]);
        Some((negate, FockBasisVector { slots }))
    }

    /// Write `self = ±a_k(c)·w` by pulling slot `p` to the front.
    pub(crate) fn peel(&self, p: usize) -> (bool, Slot, FockBasisVector) {
        let slot = self.slots[p];
        let negate = slot.1.is_odd() && self.slots[..p].iter().filter(|s| s.1.is_odd()).count() % 2 == 1;
        let mut rest = self.slots.clone();
        rest.remove(p);
        (negate, slot, FockBasisVector { slots: rest })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn charge(&self) -> usize {
        self.slots.len()
    }

    pub fn degree(&self) -> u32 {
        self.slots.iter().map(|(k, c)| 2 * k + c.degree()).sum()
    }

    pub fn is_odd(&self) -> bool {
        self.slots.iter().filter(|s| s.1.is_odd()).count() % 2 == 1
    }

    /// `Σ k_i`, the size of the partition of `a`-indices.
    pub fn weight(&self) -> u32 {
        self.slots.iter().map(|s| s.0).sum()
    }
}

impl fmt::Display for FockBasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in &self.slots {
            write!(f, "a[{k}]({c}) ")?;
        }
        write!(f, "|0>")
    }
}

/// All canonical vectors of one charge, with a reverse index.
#[derive(Clone, Debug)]
pub struct Basis {
    rank: u32,
    genus: u32,
    charge: usize,
    vectors: Vec<FockBasisVector>,
    index: HashMap<FockBasisVector, u32>,
}

impl Basis {
    pub fn enumerate(rank: u32, genus: u32, charge: usize) -> Basis {
        let mut types: Vec<Slot> = (0..rank)
            .flat_map(|k| CurveLetter::all(genus).into_iter().map(move |c| (k, c)))
            .collect();
        types.sort_by_key(slot_key);
        let mut vectors = Vec::new();
        let mut cur = Vec::with_capacity(charge);
        fn rec(types: &[Slot], from: usize, left: usize, cur: &mut Vec<Slot>, out: &mut Vec<FockBasisVector>) {
            if left == 0 {
                out.push(FockBasisVector { slots: cur.clone() });
                return;
            }
            for t in from..types.len() {
                let next = if types[t].1.is_odd() { t + 1 } else { t };
                cur.push(types[t]);
                rec(types, next, left - 1, cur, out);
                cur.pop();
            }
        }
        rec(&types, 0, charge, &mut cur, &mut vectors);
        let index = vectors.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        Basis { rank, genus, charge, vectors, index }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn charge(&self) -> usize {
        self.charge
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FockBasisVector] {
        &self.vectors
    }

    pub fn get(&self, i: u32) -> &FockBasisVector {
        &self.vectors[i as usize]
    }

    pub fn index_of(&self, v: &FockBasisVector) -> Option<u32> {
        self.index.get(v).copied()
    }

    /// Number of basis vectors in each cohomological degree `0..=2rd`.
    pub fn graded_dims(&self) -> Vec<u64> {
        let mut dims = vec![0u64; 2 * self.rank as usize * self.charge + 1];
        for v in &self.vectors {
            dims[v.degree() as usize] += 1;
        }
        dims
    }
}

/// Coefficients of `Π_{i<r} (1+tz^{2i+1})^{2g} / ((1-tz^{2i})(1-tz^{2i+2}))`,
/// as `table[d][degree]` for `d ≤ d_max`.
pub fn poincare_closed_form(rank: u32, genus: u32, d_max: usize) -> Vec<Vec<u64>> {
    let width = 2 * rank as usize * d_max + 1;
    let mut poly = vec![vec![0u64; width]; d_max + 1];
    poly[0][0] = 1;
    let mul_factor = |poly: &mut Vec<Vec<u64>>, shift: usize, geometric: bool| {
        // multiply by (1 + t z^shift) or by 1/(1 - t z^shift)
        if geometric {
            for d in 1..=d_max {
                for e in shift..width {
                    poly[d][e] += poly[d - 1][e - shift];
                }
            }
        } else {
            for d in (1..=d_max).rev() {
                for e in (shift..width).rev() {
                    poly[d][e] += poly[d - 1][e - shift];
                }
            }
        }
    };
    for i in 0..rank as usize {
        for _ in 0..2 * genus {
            mul_factor(&mut poly, 2 * i + 1, false);
        }
        mul_factor(&mut poly, 2 * i, true);
        mul_factor(&mut poly, 2 * i + 2, true);
    }
    poly.into_iter()
        .enumerate()
        .map(|(d, row)| row[..2 * rank as usize * d + 1].to_vec())
        .collect()
}

/// A finite combination of `basis vector ⊗ monomial on the open labels`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState<S> {
    genus: u32,
    labels: Vec<String>,
    terms: BTreeMap<(FockBasisVector, Vec<CurveLetter>), S>,
}

impl<S: Scalar> FockState<S> {
    pub fn zero(genus: u32) -> Self {
        FockState { genus, labels: Vec::new(), terms: BTreeMap::new() }
    }

    pub fn zero_with_labels(genus: u32, labels: Vec<String>) -> Result<Self, CurveError> {
        CurveClass::<S>::zero(genus, labels.clone())?;
        Ok(FockState { genus, labels, terms: BTreeMap::new() })
    }

    pub fn vacuum(genus: u32) -> Self {
        Self::basis_vector(genus, FockBasisVector::vacuum())
    }

    pub fn basis_vector(genus: u32, v: FockBasisVector) -> Self {
        let mut s = Self::zero(genus);
        s.add_term(v, Vec::new(), S::one());
        s
    }

    /// `(1/d!)·a_0(1)^d|0⟩`, the unit of `H*(Quot_d)`.
    pub fn unit(genus: u32, d: usize) -> Self {
        let v = FockBasisVector { slots: vec![(0, CurveLetter::Unit); d] };
        let fact = (1..=d as i64).fold(S::one(), |acc, i| acc * S::from_int(i));
        let mut s = Self::zero(genus);
        s.add_term(v, Vec::new(), S::one() / fact);
        s
    }

    /// Build from raw slots, canonicalizing.
    pub fn from_slots(genus: u32, rank: u32, raw: &[Slot], coeff: S) -> Result<Self, FockError> {
        if let Some(bad) = raw.iter().find(|s| !s.1.fits_genus(genus)) {
            return Err(CurveError::InvalidLetter { letter: bad.1.to_string(), genus }.into());
        }
        let mut s = Self::zero(genus);
        if let Some((neg, v)) = FockBasisVector::canonicalize(raw, rank)? {
            s.add_term(v, Vec::new(), coeff.signed(neg));
        }
        Ok(s)
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisVector, &[CurveLetter], &S)> {
        self.terms.iter().map(|((v, x), c)| (v, x.as_slice(), c))
    }

    pub fn coefficient(&self, v: &FockBasisVector, external: &[CurveLetter]) -> S {
        self.terms.get(&(v.clone(), external.to_vec())).cloned().unwrap_or_else(S::zero)
    }

    /// Common charge of all terms; `None` for a zero or mixed-charge state.
    pub fn charge(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|(v, _)| v.charge());
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn is_mixed_charge(&self) -> bool {
        !self.terms.is_empty() && self.charge().is_none()
    }

    pub(crate) fn with_labels(genus: u32, labels: Vec<String>) -> Self {
        FockState { genus, labels, terms: BTreeMap::new() }
    }

    pub(crate) fn add_term(&mut self, v: FockBasisVector, external: Vec<CurveLetter>, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((v, external)) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                let c = e.get().clone() + coeff;
                if c.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = c;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, CurveError> {
        if self.genus != other.genus {
            return Err(CurveError::GenusMismatch { left: self.genus, right: other.genus });
        }
        if self.labels != other.labels {
            return Err(CurveError::LabelMismatch { left: self.labels.clone(), right: other.labels.clone() });
        }
        let mut out = self.clone();
        for ((v, x), c) in &other.terms {
            out.add_term(v.clone(), x.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, CurveError> {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::with_labels(self.genus, self.labels.clone());
        for ((v, x), c) in &self.terms {
            out.add_term(v.clone(), x.clone(), c.clone() * s.clone());
        }
        out
    }

    /// Reorder the open labels, with the Koszul sign of the external letters.
    pub fn permute_labels(&self, new_order: &[String]) -> Result<Self, CurveError> {
        let mut out = Self::with_labels(self.genus, new_order.to_vec());
        let mut by_vector: BTreeMap<FockBasisVector, CurveClass<S>> = BTreeMap::new();
        for ((v, x), c) in &self.terms {
            let cls = by_vector
                .entry(v.clone())
                .or_insert_with(|| CurveClass::zero(self.genus, self.labels.clone()).expect("labels checked"));
            cls.try_add_term(x.clone(), c.clone())?;
        }
        for (v, cls) in by_vector {
            for (x, c) in cls.permute_labels(new_order)?.terms() {
                out.add_term(v.clone(), x.to_vec(), c.clone());
            }
        }
        Ok(out)
    }

    /// Multiply the external factor by a class on the same labels, from the right.
    pub fn mul_external(&self, class: &CurveClass<S>) -> Result<Self, CurveError> {
        if class.labels() != self.labels.as_slice() {
            return Err(CurveError::LabelMismatch { left: self.labels.clone(), right: class.labels().to_vec() });
        }
        let mut out = Self::with_labels(self.genus, self.labels.clone());
        for ((v, x), c) in &self.terms {
            for (y, d) in class.terms() {
                if let Some((neg, m)) = crate::curve::monomial_mul(x, y) {
                    out.add_term(v.clone(), m, (c.clone() * d.clone()).signed(neg));
                }
            }
        }
        Ok(out)
    }

    /// Cap the open label `label` with the one-label class `cap`: multiply the
    /// external class by `cap` on `label` (Koszul sign against the labels to
    /// its right) and integrate that label away.
    pub fn cap_label(&self, label: &str, cap: &CurveClass<S>) -> Result<Self, CurveError> {
        let pos = self.labels.iter().position(|l| l == label).ok_or_else(|| CurveError::UnknownLabel(label.into()))?;
        let mut labels = self.labels.clone();
        labels.remove(pos);
        let mut out = Self::with_labels(self.genus, labels);
        for ((v, x), c) in &self.terms {
            let after_odd = x[pos + 1..].iter().filter(|l| l.is_odd()).count() % 2 == 1;
            for (y, d) in cap.terms() {
                if let Some((neg, l)) = x[pos].mul(y[0]) {
                    if l == CurveLetter::Point {
                        let neg = neg ^ (after_odd && y[0].is_odd());
                        let mut rest = x.clone();
                        rest.remove(pos);
                        out.add_term(v.clone(), rest, (c.clone() * d.clone()).signed(neg));
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<S: Scalar> fmt::Display for FockState<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, ((v, x), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c} · {v}")?;
            if !x.is_empty() {
                let parts: Vec<String> = self.labels.iter().zip(x).map(|(l, c)| format!("{l}:{c}")).collect();
                write!(f, " ⊗ ({})", parts.join(", "))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Q;
    use CurveLetter::*;

    #[test]
    fn canonicalize_examples() {
        let (neg, v) = FockBasisVector::canonicalize(&[(0, Alpha(1)), (1, Unit)], 2).unwrap().unwrap();
        assert!(!neg);
        assert_eq!(v.slots(), &[(1, Unit), (0, Alpha(1))]);
        assert!(FockBasisVector::canonicalize(&[(0, Alpha(1)), (0, Alpha(1))], 1).unwrap().is_none());
        let a = FockBasisVector::canonicalize(&[(0, Point), (0, Unit)], 1).unwrap();
        let b = FockBasisVector::canonicalize(&[(0, Unit), (0, Point)], 1).unwrap();
        assert_eq!(a, b);
        let (neg, _) = FockBasisVector::canonicalize(&[(0, Beta(1)), (0, Alpha(1))], 1).unwrap().unwrap();
        assert!(neg);
        assert!(matches!(
            FockBasisVector::canonicalize(&[(2, Unit)], 2),
            Err(FockError::IndexOutOfRange { k: 2, r: 2 })
        ));
    }

    #[test]
    fn prepend_agrees_with_canonicalize() {
        let basis = Basis::enumerate(2, 1, 2);
        for v in basis.vectors() {
            for k in 0..2 {
                for c in CurveLetter::all(1) {
                    let mut raw = vec![(k, c)];
                    raw.extend_from_slice(v.slots());
                    assert_eq!(v.prepend((k, c)), FockBasisVector::canonicalize(&raw, 2).unwrap());
                }
            }
        }
    }

    #[test]
    fn small_bases() {
        let b = Basis::enumerate(2, 0, 1);
        let shown: Vec<String> = b.vectors().iter().map(|v| v.to_string()).collect();
        assert_eq!(shown, ["a[1](1) |0>", "a[1](w) |0>", "a[0](1) |0>", "a[0](w) |0>"]);
        assert_eq!(b.graded_dims(), vec![1, 0, 2, 0, 1]);
        assert_eq!(Basis::enumerate(3, 2, 0).len(), 1);
        assert_eq!(Basis::enumerate(1, 1, 2).graded_dims(), vec![1, 2, 2, 2, 1]);
    }

    #[test]
    fn closed_form_spot_values() {
        assert_eq!(poincare_closed_form(2, 0, 1)[1], vec![1, 0, 2, 0, 1]);
        assert_eq!(poincare_closed_form(1, 1, 2)[2], vec![1, 2, 2, 2, 1]);
        assert_eq!(poincare_closed_form(1, 0, 3)[3], vec![1, 0, 1, 0, 1, 0, 1]);
        assert_eq!(poincare_closed_form(2, 2, 0), vec![vec![1]]);
    }

    #[test]
    fn display() {
        let s = FockState::<Q>::vacuum(0).scale(&Q::from_integer(3.into()));
        assert_eq!(s.to_string(), "3 · |0>");
        let t = FockState::<Q>::from_slots(1, 2, &[(0, Point), (1, Alpha(1))], Q::from_integer((-2).into())).unwrap();
        assert_eq!(t.to_string(), "-2 · a[1](al1) a[0](w) |0>");
        assert_eq!(FockState::<Q>::zero(0).to_string(), "0");
    }

    #[test]
    fn unit_vector_normalisation() {
        let u = FockState::<Q>::unit(0, 3);
        let (_, _, c) = u.terms().next().unwrap();
        assert_eq!(*c, Q::new(1.into(), 6.into()));
    }
}
