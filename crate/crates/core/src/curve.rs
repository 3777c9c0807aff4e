//! Cohomology rings `H*(C^L)` of powers of a genus `g` curve, with labelled
//! tensor factors.
//!
//! `H*(C)` has the symplectic basis `1, α_1..α_g, β_1..β_g, ω` with
//! `α_i β_i = ω = -β_i α_i` and `∫ω = 1`. A class on a label set `L` is a sparse
//! combination of tensor monomials, one letter per label in label order.
//! Products, integration and relabelling all carry Koszul signs for the odd
//! letters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CurveError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CurveLetter {
    Unit,
    Alpha(u32),
    Beta(u32),
    Point,
}

impl CurveLetter {
    pub fn degree(self) -> u32 {
        match self {
            CurveLetter::Unit => 0,
            CurveLetter::Alpha(_) | CurveLetter::Beta(_) => 1,
            CurveLetter::Point => 2,
        }
    }

    #[inline]
    pub fn is_odd(self) -> bool {
        matches!(self, CurveLetter::Alpha(_) | CurveLetter::Beta(_))
    }

    pub fn fits_genus(self, genus: u32) -> bool {
        match self {
            CurveLetter::Alpha(i) | CurveLetter::Beta(i) => (1..=genus).contains(&i),
            _ => true,
        }
    }

    /// The `2g + 2` basis letters in their canonical order.
    pub fn all(genus: u32) -> Vec<CurveLetter> {
        let mut out = Vec::with_capacity(2 * genus as usize + 2);
        out.push(CurveLetter::Unit);
        out.extend((1..=genus).map(CurveLetter::Alpha));
        out.extend((1..=genus).map(CurveLetter::Beta));
        out.push(CurveLetter::Point);
        out
    }

    /// Cup product of two letters on the same curve factor: `None` when it
    /// vanishes, otherwise `(negate, letter)`.
    #[inline]
    pub fn mul(self, other: CurveLetter) -> Option<(bool, CurveLetter)> {
        use CurveLetter::*;
        match (self, other) {
            (Unit, x) | (x, Unit) => Some((false, x)),
            (Alpha(i), Beta(j)) if i == j => Some((false, Point)),
            (Beta(i), Alpha(j)) if i == j => Some((true, Point)),
            _ => None,
        }
    }

    /// `∫_C` of a single letter.
    #[inline]
    pub fn integral(self) -> i64 {
        if self == CurveLetter::Point {
            1
        } else {
            0
        }
    }

    /// The letter `b†` (with sign) such that every `x ∈ H*(C)` satisfies
    /// `x = Σ_b ∫(b·x) b†`.
    pub fn dual(self) -> (bool, CurveLetter) {
        use CurveLetter::*;
        match self {
            Unit => (false, Point),
            Point => (false, Unit),
            Alpha(i) => (false, Beta(i)),
            Beta(i) => (true, Alpha(i)),
        }
    }

    pub fn parse(s: &str) -> Option<CurveLetter> {
        match s {
            "1" => Some(CurveLetter::Unit),
            "w" => Some(CurveLetter::Point),
            _ => {
                let (ctor, idx): (fn(u32) -> CurveLetter, &str) = if let Some(rest) = s.strip_prefix("al") {
                    (CurveLetter::Alpha, rest)
                } else {
                    (CurveLetter::Beta as fn(u32) -> CurveLetter, s.strip_prefix("be")?)
                };
                let i: u32 = idx.parse().ok()?;
                (i >= 1).then(|| ctor(i))
            }
        }
    }
}

impl fmt::Display for CurveLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveLetter::Unit => write!(f, "1"),
            CurveLetter::Alpha(i) => write!(f, "al{i}"),
            CurveLetter::Beta(i) => write!(f, "be{i}"),
            CurveLetter::Point => write!(f, "w"),
        }
    }
}

/// Koszul sign of putting `letters` into the order given by `perm`
/// (`perm[i]` is the old position of the new `i`-th letter).
pub(crate) fn permutation_sign(letters: &[CurveLetter], perm: &[usize]) -> bool {
    let mut negate = false;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] && letters[perm[i]].is_odd() && letters[perm[j]].is_odd() {
                negate = !negate;
            }
        }
    }
    negate
}

/// Product of two tensor monomials of equal length.
pub(crate) fn monomial_mul(x: &[CurveLetter], y: &[CurveLetter]) -> Option<(bool, Vec<CurveLetter>)> {
    debug_assert_eq!(x.len(), y.len());
    let mut negate = false;
    // y_i travels left past x_{i+1}, ..., x_n
    for i in 0..y.len() {
        if y[i].is_odd() {
            let passed = x[i + 1..].iter().filter(|l| l.is_odd()).count();
            negate ^= passed % 2 == 1;
        }
    }
    let mut out = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(y) {
        let (s, l) = a.mul(*b)?;
        negate ^= s;
        out.push(l);
    }
    Some((negate, out))
}

/// The three numbers the module depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModuliParams {
    /// rank of `V`
    pub rank: u32,
    pub genus: u32,
    /// degree of `V`, so `c_1(V) = n·ω`
    pub deg_v: i64,
}

impl ModuliParams {
    pub fn new(rank: u32, genus: u32, deg_v: i64) -> Option<Self> {
        (rank >= 1).then_some(ModuliParams { rank, genus, deg_v })
    }

    /// `K_C = (2g-2)·ω`, as the multiple of `ω`.
    pub fn canonical_degree(&self) -> i64 {
        2 * self.genus as i64 - 2
    }

    /// `c(V, z + K_C) = z^r + κ·ω·z^{r-1}`; returns `κ = (2g-2)r - n`.
    pub fn shifted_c1(&self) -> i64 {
        self.canonical_degree() * self.rank as i64 - self.deg_v
    }
}

/// One summand `sign · left ⊗ right` of the Künneth decomposition of the
/// diagonal. `sign · ∫(right · left) = 1` for every pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualPair {
    pub left: CurveLetter,
    pub right: CurveLetter,
    pub negate: bool,
}

/// All `2g + 2` summands of `δ = Σ_b b† ⊗ b`.
pub fn dual_basis_pairs(genus: u32) -> Vec<DualPair> {
    CurveLetter::all(genus)
        .into_iter()
        .map(|b| {
            let (negate, left) = b.dual();
            DualPair { left, right: b, negate }
        })
        .collect()
}

/// An element of `H*(C^L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveClass<S> {
    genus: u32,
    labels: Vec<String>,
    terms: BTreeMap<Vec<CurveLetter>, S>,
}

impl<S: Scalar> CurveClass<S> {
    pub fn zero(genus: u32, labels: Vec<String>) -> Result<Self, CurveError> {
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(CurveError::DuplicateLabel(l.clone()));
            }
        }
        Ok(CurveClass { genus, labels, terms: BTreeMap::new() })
    }

    /// A class on the empty label set, i.e. a number.
    pub fn scalar(genus: u32, value: S) -> Self {
        let mut c = CurveClass { genus, labels: Vec::new(), terms: BTreeMap::new() };
        c.add_term(Vec::new(), value);
        c
    }

    pub fn monomial<L: Into<String>>(
        genus: u32,
        labels: impl IntoIterator<Item = L>,
        letters: Vec<CurveLetter>,
        coeff: S,
    ) -> Result<Self, CurveError> {
        let mut c = Self::zero(genus, labels.into_iter().map(Into::into).collect())?;
        c.try_add_term(letters, coeff)?;
        Ok(c)
    }

    /// A single letter on a single label.
    pub fn letter(genus: u32, label: &str, letter: CurveLetter) -> Result<Self, CurveError> {
        Self::monomial(genus, [label], vec![letter], S::one())
    }

    /// `K_C = (2g-2)ω` on one label.
    pub fn canonical_class(genus: u32, label: &str) -> Self {
        let k = S::from_int(2 * genus as i64 - 2);
        Self::monomial(genus, [label], vec![CurveLetter::Point], k).expect("single label")
    }

    /// The diagonal class `δ ∈ H²(C_{l1} × C_{l2})`.
    pub fn diagonal_class(genus: u32, l1: &str, l2: &str) -> Result<Self, CurveError> {
        if l1 == l2 {
            return Err(CurveError::EqualLabels(l1.to_string()));
        }
        let mut c = Self::zero(genus, vec![l1.to_string(), l2.to_string()])?;
        for p in dual_basis_pairs(genus) {
            c.add_term(vec![p.left, p.right], S::one().signed(p.negate));
        }
        Ok(c)
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

    pub fn terms(&self) -> impl Iterator<Item = (&[CurveLetter], &S)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, letters: &[CurveLetter]) -> S {
        self.terms.get(letters).cloned().unwrap_or_else(S::zero)
    }

    /// Value of a class on the empty label set.
    pub fn as_scalar(&self) -> Option<S> {
        self.labels.is_empty().then(|| self.coefficient(&[]))
    }

    fn add_term(&mut self, letters: Vec<CurveLetter>, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(letters) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get().clone() + coeff;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn try_add_term(&mut self, letters: Vec<CurveLetter>, coeff: S) -> Result<(), CurveError> {
        if letters.len() != self.labels.len() {
            return Err(CurveError::Arity { expected: self.labels.len(), got: letters.len() });
        }
        if let Some(bad) = letters.iter().find(|l| !l.fits_genus(self.genus)) {
            return Err(CurveError::InvalidLetter { letter: bad.to_string(), genus: self.genus });
        }
        self.add_term(letters, coeff);
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<(), CurveError> {
        if self.genus != other.genus {
            return Err(CurveError::GenusMismatch { left: self.genus, right: other.genus });
        }
        if self.labels != other.labels {
            return Err(CurveError::LabelMismatch { left: self.labels.clone(), right: other.labels.clone() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, CurveError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = CurveClass { genus: self.genus, labels: self.labels.clone(), terms: BTreeMap::new() };
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v.clone() * s.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CurveError> {
        self.check_compatible(other)?;
        let mut out = CurveClass { genus: self.genus, labels: self.labels.clone(), terms: BTreeMap::new() };
        for (x, a) in &self.terms {
            for (y, b) in &other.terms {
                if let Some((neg, m)) = monomial_mul(x, y) {
                    out.add_term(m, (a.clone() * b.clone()).signed(neg));
                }
            }
        }
        Ok(out)
    }

    /// Push forward along the projection forgetting `label`: the letter on
    /// `label` is moved to the far right (Koszul sign) and integrated.
    pub fn integrate(&self, label: &str) -> Result<Self, CurveError> {
        let pos = self.position(label)?;
        let mut labels = self.labels.clone();
        labels.remove(pos);
        let mut out = CurveClass { genus: self.genus, labels, terms: BTreeMap::new() };
        for (m, c) in &self.terms {
            if m[pos] != CurveLetter::Point {
                continue;
            }
            // ω is even, so moving it to the right costs nothing
            let mut rest = m.clone();
            rest.remove(pos);
            out.add_term(rest, c.clone());
        }
        Ok(out)
    }

    /// Integrate over every label, leaving a number.
    pub fn integrate_all(&self) -> S {
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            if m.iter().all(|l| *l == CurveLetter::Point) {
                acc = acc + c.clone();
            }
        }
        acc
    }

    /// Reorder the tensor factors so that the labels read `new_order`.
    pub fn permute_labels(&self, new_order: &[String]) -> Result<Self, CurveError> {
        let perm = self.permutation_to(new_order)?;
        let mut out = CurveClass { genus: self.genus, labels: new_order.to_vec(), terms: BTreeMap::new() };
        for (m, c) in &self.terms {
            let neg = permutation_sign(m, &perm);
            out.add_term(perm.iter().map(|&i| m[i]).collect(), c.clone().signed(neg));
        }
        Ok(out)
    }

    /// Pull back along the projection `C^{new} → C^{self}` (the new label set
    /// must contain the old one); new factors carry the unit.
    pub fn extend_to(&self, labels: &[String]) -> Result<Self, CurveError> {
        let mut tmp_labels = self.labels.clone();
        for l in labels {
            if !self.labels.contains(l) {
                tmp_labels.push(l.clone());
            }
        }
        if tmp_labels.len() != labels.len() {
            return Err(CurveError::NotAPermutation(labels.to_vec()));
        }
        let pad = labels.len() - self.labels.len();
        let mut tmp = CurveClass { genus: self.genus, labels: tmp_labels, terms: BTreeMap::new() };
        for (m, c) in &self.terms {
            let mut m = m.clone();
            m.extend(std::iter::repeat_n(CurveLetter::Unit, pad));
            tmp.add_term(m, c.clone());
        }
        tmp.permute_labels(labels)
    }

    /// Whether every monomial has the same parity, and which.
    pub fn parity(&self) -> Option<bool> {
        let mut it = self.terms.keys().map(|m| m.iter().filter(|l| l.is_odd()).count() % 2 == 1);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    /// Cohomological degree when homogeneous.
    pub fn degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.iter().map(|l| l.degree()).sum::<u32>());
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    fn position(&self, label: &str) -> Result<usize, CurveError> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| CurveError::UnknownLabel(label.to_string()))
    }

    fn permutation_to(&self, new_order: &[String]) -> Result<Vec<usize>, CurveError> {
        if new_order.len() != self.labels.len() {
            return Err(CurveError::NotAPermutation(new_order.to_vec()));
        }
        let mut perm = Vec::with_capacity(new_order.len());
        for l in new_order {
            let p = self.position(l).map_err(|_| CurveError::NotAPermutation(new_order.to_vec()))?;
            if perm.contains(&p) {
                return Err(CurveError::NotAPermutation(new_order.to_vec()));
            }
            perm.push(p);
        }
        Ok(perm)
    }
}

impl<S: Scalar> fmt::Display for CurveClass<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let letters: Vec<String> = m.iter().map(|l| l.to_string()).collect();
            write!(f, "({c})·{}", if letters.is_empty() { "1".to_string() } else { letters.join("⊗") })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Q;
    use CurveLetter::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn mono(g: u32, labels: &[&str], letters: Vec<CurveLetter>) -> CurveClass<Q> {
        CurveClass::monomial(g, labels.iter().copied(), letters, q(1)).unwrap()
    }

    #[test]
    fn alpha_beta_is_point() {
        let a = CurveClass::<Q>::letter(1, "a", Alpha(1)).unwrap();
        let b = CurveClass::<Q>::letter(1, "a", Beta(1)).unwrap();
        assert_eq!(a.mul(&b).unwrap(), CurveClass::letter(1, "a", Point).unwrap());
        assert_eq!(b.mul(&a).unwrap(), CurveClass::letter(1, "a", Point).unwrap().scale(&q(-1)));
        assert!(a.mul(&a).unwrap().is_zero());
    }

    #[test]
    fn koszul_sign_across_labels() {
        // (α⊗β)(β⊗α) = (-1)^{|β||β|} (αβ)⊗(βα) = -(ω)⊗(-ω) = ω⊗ω
        let x = mono(1, &["a", "b"], vec![Alpha(1), Beta(1)]);
        let y = mono(1, &["a", "b"], vec![Beta(1), Alpha(1)]);
        assert_eq!(x.mul(&y).unwrap(), mono(1, &["a", "b"], vec![Point, Point]));
    }

    #[test]
    fn mul_rejects_mismatch() {
        let x = mono(1, &["a"], vec![Unit]);
        let y = mono(1, &["b"], vec![Unit]);
        assert!(matches!(x.mul(&y), Err(CurveError::LabelMismatch { .. })));
        let z = mono(2, &["a"], vec![Unit]);
        assert!(matches!(x.mul(&z), Err(CurveError::GenusMismatch { .. })));
    }

    #[test]
    fn integration_examples() {
        let w = mono(0, &["a"], vec![Point]);
        assert_eq!(w.integrate("a").unwrap().as_scalar(), Some(q(1)));
        let al = mono(1, &["a"], vec![Alpha(1)]);
        assert!(al.integrate("a").unwrap().is_zero());
        let ww = mono(0, &["a", "b"], vec![Point, Point]);
        assert_eq!(ww.integrate("a").unwrap(), mono(0, &["b"], vec![Point]));
        assert!(matches!(w.integrate("z"), Err(CurveError::UnknownLabel(_))));
    }

    #[test]
    fn diagonal_genus_zero() {
        let d = CurveClass::<Q>::diagonal_class(0, "a", "b").unwrap();
        let expected = mono(0, &["a", "b"], vec![Unit, Point]).add(&mono(0, &["a", "b"], vec![Point, Unit])).unwrap();
        assert_eq!(d, expected);
        // δ·δ = 2 ω⊗ω = -δ·(K⊗1) with K = -2ω
        let dd = d.mul(&d).unwrap();
        assert_eq!(dd, mono(0, &["a", "b"], vec![Point, Point]).scale(&q(2)));
        let k = CurveClass::<Q>::canonical_class(0, "a").extend_to(&["a".into(), "b".into()]).unwrap();
        assert_eq!(dd, d.mul(&k).unwrap().scale(&q(-1)));
        assert!(matches!(CurveClass::<Q>::diagonal_class(0, "a", "a"), Err(CurveError::EqualLabels(_))));
    }

    #[test]
    fn one_point_on_the_diagonal() {
        let d = CurveClass::<Q>::diagonal_class(2, "a", "b").unwrap();
        let w1 = mono(2, &["a", "b"], vec![Point, Unit]);
        assert_eq!(d.mul(&w1).unwrap().integrate_all(), q(1));
    }

    #[test]
    fn dual_pairs_shape() {
        assert_eq!(
            dual_basis_pairs(0),
            vec![
                DualPair { left: Point, right: Unit, negate: false },
                DualPair { left: Unit, right: Point, negate: false }
            ]
        );
        let p1 = dual_basis_pairs(1);
        let ab = p1.iter().find(|p| p.left == Alpha(1) && p.right == Beta(1)).unwrap();
        let ba = p1.iter().find(|p| p.left == Beta(1) && p.right == Alpha(1)).unwrap();
        assert_ne!(ab.negate, ba.negate);
        for g in 0..4 {
            let pairs = dual_basis_pairs(g);
            assert_eq!(pairs.len(), 2 * g as usize + 2);
            for p in pairs {
                let (neg, l) = p.right.mul(p.left).unwrap();
                assert_eq!(l, Point);
                assert_eq!(neg, p.negate, "sign·∫(right·left) must be 1");
            }
        }
    }

    #[test]
    fn swap_examples() {
        let ab: Vec<String> = vec!["b".into(), "a".into()];
        let x = mono(1, &["a", "b"], vec![Point, Unit]);
        assert_eq!(x.permute_labels(&ab).unwrap(), mono(1, &["b", "a"], vec![Unit, Point]));
        let y = mono(1, &["a", "b"], vec![Alpha(1), Beta(1)]);
        assert_eq!(y.permute_labels(&ab).unwrap(), mono(1, &["b", "a"], vec![Beta(1), Alpha(1)]).scale(&q(-1)));
        let z = mono(1, &["a", "b"], vec![Alpha(1), Alpha(1)]);
        assert_eq!(z.permute_labels(&ab).unwrap(), z.permute_labels(&ab).unwrap());
        assert_eq!(z.permute_labels(&ab).unwrap(), mono(1, &["b", "a"], vec![Alpha(1), Alpha(1)]).scale(&q(-1)));
    }

    #[test]
    fn letter_parse_roundtrip() {
        for l in CurveLetter::all(3) {
            assert_eq!(CurveLetter::parse(&l.to_string()), Some(l));
        }
        assert_eq!(CurveLetter::parse("al0"), None);
        assert_eq!(CurveLetter::parse("x"), None);
    }
}
