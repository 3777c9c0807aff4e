//! Operators `a_k, f_k, m_k, h_k, e_k` on the Fock basis.
//!
//! Every operator is computed in its open form: applied to a basis vector of
//! charge `d` it returns `Σ_b X_b(v) ⊗ b`, a combination of target basis
//! vectors each tagged with one letter on a fresh curve label. Capping with a
//! class `c` pairs that letter against `c`. Products `X·Y` restricted to the
//! diagonal multiply the two letters (outer on the left).
//!
//! `f_j` is pushed through the leading (or a chosen) slot of the basis vector
//! with the general `[f, a]` commutator, which brings in `a·f` and `h·m` at
//! charge `d - 1`; `m`, `h` and `e` are read off operator series built from
//! `Σ a f` at the same or the next charge. All recursion strictly lowers
//! the charge of the `f`'s argument, and results are memoized per
//! `(operator, charge, basis index)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{dual_basis_pairs, CurveClass, CurveLetter, DualPair, ModuliParams};
use crate::error::{CurveError, EngineError};
use crate::fock::{Basis, FockBasisVector, FockState};
use crate::scalar::{odd, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    A,
    F,
    M,
    H,
    E,
}

impl OpKind {
    pub fn symbol(self) -> char {
        match self {
            OpKind::A => 'a',
            OpKind::F => 'f',
            OpKind::M => 'm',
            OpKind::H => 'h',
            OpKind::E => 'e',
        }
    }

    pub fn from_symbol(c: char) -> Option<OpKind> {
        Some(match c {
            'a' => OpKind::A,
            'f' => OpKind::F,
            'm' => OpKind::M,
            'h' => OpKind::H,
            'e' => OpKind::E,
            _ => return None,
        })
    }

    /// Change in charge: `a`, `e` create, `f` annihilates.
    pub fn charge_shift(self) -> i64 {
        match self {
            OpKind::A | OpKind::E => 1,
            OpKind::F => -1,
            OpKind::M | OpKind::H => 0,
        }
    }

    /// Cohomological degree shift of the capped operator, before adding `deg c`.
    pub fn degree_shift(self, index: u32, rank: u32) -> i64 {
        let k = index as i64;
        match self {
            OpKind::A | OpKind::E => 2 * k,
            OpKind::F => 2 * k - 2 * rank as i64,
            OpKind::M | OpKind::H => 2 * k - 2,
        }
    }
}

/// How an operator's curve factor is consumed.
#[derive(Clone, Debug, PartialEq)]
pub enum Cap<S> {
    /// Pair against a class on one label and integrate.
    Class(CurveClass<S>),
    /// Keep the factor as a new open label on the state.
    Open(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorToken<S> {
    pub kind: OpKind,
    pub index: u32,
    pub cap: Cap<S>,
}

impl<S: Scalar> OperatorToken<S> {
    pub fn capped(kind: OpKind, index: u32, cap: CurveClass<S>) -> Self {
        OperatorToken { kind, index, cap: Cap::Class(cap) }
    }

    pub fn letter(kind: OpKind, index: u32, genus: u32, letter: CurveLetter) -> Self {
        let cap = CurveClass::letter(genus, "_", letter).expect("one label");
        OperatorToken { kind, index, cap: Cap::Class(cap) }
    }

    pub fn open(kind: OpKind, index: u32, label: impl Into<String>) -> Self {
        OperatorToken { kind, index, cap: Cap::Open(label.into()) }
    }
}

impl<S: Scalar> fmt::Display for OperatorToken<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}](", self.kind.symbol(), self.index)?;
        match &self.cap {
            Cap::Open(l) => write!(f, "@{l}")?,
            Cap::Class(c) => {
                let mut first = true;
                for (m, s) in c.terms() {
                    let letter = m.first().map(|l| l.to_string()).unwrap_or_else(|| "1".into());
                    if first {
                        first = false;
                    } else {
                        write!(f, " + ")?;
                    }
                    if s.is_one() {
                        write!(f, "{letter}")?;
                    } else {
                        write!(f, "{s}*{letter}")?;
                    }
                }
                if first {
                    write!(f, "0")?;
                }
            }
        }
        write!(f, ")")
    }
}

/// Tokens applied right to left.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorWord<S> {
    pub tokens: Vec<OperatorToken<S>>,
}

impl<S: Scalar> OperatorWord<S> {
    pub fn new(tokens: Vec<OperatorToken<S>>) -> Self {
        OperatorWord { tokens }
    }
}

impl<S: Scalar> fmt::Display for OperatorWord<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.tokens.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Which slot `f` is pushed through first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PeelOrder {
    Leading,
    /// A slot chosen pseudo-randomly per `(seed, j, charge, vector)`.
    Random(u64),
}

/// Internal operator family, including the auxiliary series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Op {
    A(u32),
    F(u32),
    M(u32),
    H(u32),
    E(u32),
    /// `M_p`, coefficient of `z^{-p}` in `Id - [a(z)f(z)]_{<0}`.
    Mser(u32),
    /// coefficients of `M(z)^{-1}`
    Minv(u32),
    /// coefficients of `c(E, z + K)` in `z^{r-q}`
    Chern(u32),
    /// coefficients of `z^r / c(E, z)`
    Ninv(u32),
}

impl Op {
    pub(crate) fn from_kind(kind: OpKind, index: u32) -> Op {
        match kind {
            OpKind::A => Op::A(index),
            OpKind::F => Op::F(index),
            OpKind::M => Op::M(index),
            OpKind::H => Op::H(index),
            OpKind::E => Op::E(index),
        }
    }

    fn target_charge(self, d: usize) -> Option<usize> {
        match self {
            Op::A(_) | Op::E(_) => Some(d + 1),
            Op::F(_) => d.checked_sub(1),
            _ => Some(d),
        }
    }
}

/// Open-form image of one basis vector: `(target index, letter, coefficient)`.
pub(crate) type Image<S> = Arc<Vec<(u32, CurveLetter, S)>>;

struct Acc<S> {
    map: HashMap<(u32, CurveLetter), S>,
}

impl<S: Scalar> Acc<S> {
    fn new() -> Self {
        Acc { map: HashMap::new() }
    }

    fn add(&mut self, i: u32, b: CurveLetter, c: S) {
        if c.is_zero() {
            return;
        }
        let e = self.map.entry((i, b)).or_insert_with(S::zero);
        *e = e.clone() + c;
    }

    /// Add `factor · ω · (self-image)`: only unit letters survive.
    fn add_times_point(&mut self, other: Acc<S>, factor: S) {
        if factor.is_zero() {
            return;
        }
        for ((i, b), c) in other.map {
            if b == CurveLetter::Unit {
                self.add(i, CurveLetter::Point, c * factor.clone());
            }
        }
    }

    fn absorb(&mut self, other: Acc<S>, factor: &S) {
        for ((i, b), c) in other.map {
            self.add(i, b, c * factor.clone());
        }
    }

    fn finish(self) -> Vec<(u32, CurveLetter, S)> {
        let mut v: Vec<_> = self.map.into_iter().filter(|(_, c)| !c.is_zero()).map(|((i, b), c)| (i, b, c)).collect();
        v.sort_by_key(|x| (x.0, x.1));
        v
    }
}

/// Sparse matrix stored by columns, rows sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<S> {
    rows: usize,
    cols: Vec<Vec<(u32, S)>>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn from_columns(rows: usize, cols: Vec<Vec<(u32, S)>>) -> Self {
        let cols = cols
            .into_iter()
            .map(|col| {
                let mut m: std::collections::BTreeMap<u32, S> = std::collections::BTreeMap::new();
                for (i, c) in col {
                    let e = m.entry(i).or_insert_with(S::zero);
                    *e = e.clone() + c;
                }
                m.into_iter().filter(|(_, c)| !c.is_zero()).collect()
            })
            .collect();
        SparseMatrix { rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(u32, S)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.cols[j]
            .binary_search_by_key(&(i as u32), |e| e.0)
            .map(|p| self.cols[j][p].1.clone())
            .unwrap_or_else(|_| S::zero())
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn scale(&self, s: &S) -> Self {
        let cols = self.cols.iter().map(|c| c.iter().map(|(i, x)| (*i, x.clone() * s.clone())).collect()).collect();
        Self::from_columns(self.rows, cols)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols()), (other.rows, other.cols()), "shape mismatch");
        let cols =
            self.cols.iter().zip(&other.cols).map(|(a, b)| a.iter().chain(b.iter()).cloned().collect()).collect();
        Self::from_columns(self.rows, cols)
    }

    /// Rank by exact Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut dense: Vec<Vec<S>> = self
            .cols
            .iter()
            .map(|c| {
                let mut v = vec![S::zero(); self.rows];
                for (i, x) in c {
                    v[*i as usize] = x.clone();
                }
                v
            })
            .collect();
        let mut rank = 0;
        let ncols = dense.len();
        for row in 0..self.rows {
            let Some(p) = (rank..ncols).find(|&j| !dense[j][row].is_zero()) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot = dense[rank][row].clone();
            for j in rank + 1..ncols {
                if dense[j][row].is_zero() {
                    continue;
                }
                let f = dense[j][row].clone() / pivot.clone();
                for i in row..self.rows {
                    let t = dense[rank][i].clone() * f.clone();
                    dense[j][i] = dense[j][i].clone() - t;
                }
            }
            rank += 1;
        }
        rank
    }
}

const SHARDS: usize = 64;

type Key = (Op, u32, u32);

/// Memoizing evaluator for one choice of `(r, g, n)`.
pub struct Engine<S> {
    params: ModuliParams,
    order: PeelOrder,
    fuel: Option<u64>,
    spent: AtomicU64,
    pairs: Vec<DualPair>,
    bases: RwLock<Vec<Arc<Basis>>>,
    cache: Vec<RwLock<HashMap<Key, Image<S>>>>,
    matrices: RwLock<HashMap<(OpKind, u32, CurveLetter, usize), Arc<SparseMatrix<S>>>>,
}

impl<S: Scalar> Engine<S> {
    pub fn new(params: ModuliParams) -> Self {
        Engine {
            params,
            order: PeelOrder::Leading,
            fuel: None,
            spent: AtomicU64::new(0),
            pairs: dual_basis_pairs(params.genus),
            bases: RwLock::new(Vec::new()),
            cache: (0..SHARDS).map(|_| RwLock::new(HashMap::new())).collect(),
            matrices: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_peel_order(mut self, order: PeelOrder) -> Self {
        self.order = order;
        self
    }

    /// Bound the number of freshly computed operator images.
    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.fuel = Some(fuel);
        self
    }

    pub fn params(&self) -> ModuliParams {
        self.params
    }

    pub fn peel_order(&self) -> PeelOrder {
        self.order
    }

    /// Operator images computed so far.
    pub fn steps(&self) -> u64 {
        self.spent.load(Ordering::Relaxed)
    }

    pub fn basis(&self, d: usize) -> Arc<Basis> {
        if let Some(b) = self.bases.read().get(d) {
            return b.clone();
        }
        let mut w = self.bases.write();
        while w.len() <= d {
            let next = w.len();
            w.push(Arc::new(Basis::enumerate(self.params.rank, self.params.genus, next)));
        }
        w[d].clone()
    }

    fn rank(&self) -> u32 {
        self.params.rank
    }

    fn check_index(&self, kind: OpKind, index: u32) -> Result<(), EngineError> {
        let r = self.rank();
        match kind {
            OpKind::A if index >= r => Err(EngineError::IndexOutOfRange { kind: 'a', index, max: r - 1 }),
            OpKind::M if index > r => Err(EngineError::IndexOutOfRange { kind: 'm', index, max: r }),
            _ => Ok(()),
        }
    }

    // ---- core recursion -------------------------------------------------

    pub(crate) fn image(&self, op: Op, d: usize, idx: u32) -> Result<Image<S>, EngineError> {
        let key = (op, d as u32, idx);
        let shard = &self.cache[(idx as usize).wrapping_add(d * 7) % SHARDS];
        if let Some(v) = shard.read().get(&key) {
            return Ok(v.clone());
        }
        let n = self.spent.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(limit) = self.fuel {
            if n > limit {
                return Err(EngineError::FuelExhausted(limit));
            }
        }
        let v = Arc::new(self.compute(op, d, idx)?);
        shard.write().entry(key).or_insert_with(|| v.clone());
        Ok(v)
    }

    fn identity(idx: u32) -> Vec<(u32, CurveLetter, S)> {
        vec![(idx, CurveLetter::Unit, S::one())]
    }

    /// `acc += scale · (outer · inner)(v)` restricted to the diagonal.
    fn merge(&self, outer: Op, inner: Op, d: usize, idx: u32, scale: S, acc: &mut Acc<S>) -> Result<(), EngineError> {
        if scale.is_zero() {
            return Ok(());
        }
        let Some(mid) = inner.target_charge(d) else {
            return Ok(());
        };
        for (i1, b1, c1) in self.image(inner, d, idx)?.iter() {
            for (i2, b2, c2) in self.image(outer, mid, *i1)?.iter() {
                if let Some((neg, b)) = b2.mul(*b1) {
                    acc.add(*i2, b, (scale.clone() * c1.clone() * c2.clone()).signed(neg));
                }
            }
        }
        Ok(())
    }

    fn sign(n: i64) -> S {
        S::one().signed(odd(n))
    }

    fn peel_slot(&self, j: u32, d: usize, idx: u32) -> usize {
        match self.order {
            PeelOrder::Leading => 0,
            PeelOrder::Random(seed) => {
                let mix = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    ^ ((j as u64) << 48)
                    ^ ((d as u64) << 40)
                    ^ idx as u64;
                ChaCha8Rng::seed_from_u64(mix).gen_range(0..d)
            }
        }
    }

    fn compute(&self, op: Op, d: usize, idx: u32) -> Result<Vec<(u32, CurveLetter, S)>, EngineError> {
        let r = self.rank() as i64;
        let kappa = S::from_int(self.params.shifted_c1());
        let kc = S::from_int(self.params.canonical_degree());
        match op {
            Op::A(k) => {
                let v = self.basis(d).get(idx).clone();
                let tgt = self.basis(d + 1);
                let mut acc = Acc::new();
                for p in &self.pairs {
                    if let Some((neg, w)) = v.prepend((k, p.left)) {
                        let i = tgt.index_of(&w).expect("canonical vector in basis");
                        acc.add(i, p.right, S::one().signed(neg ^ p.negate));
                    }
                }
                Ok(acc.finish())
            }
            Op::F(j) => {
                if d == 0 || j as i64 > r * d as i64 {
                    return Ok(Vec::new());
                }
                let basis = self.basis(d);
                let tgt = self.basis(d - 1);
                let below = if d >= 2 { Some(self.basis(d - 2)) } else { None };
                let v = basis.get(idx);
                let (eps, (k, c), w) = v.peel(self.peel_slot(j, d, idx));
                let wi = tgt.index_of(&w).expect("peeled vector in basis");
                let mut acc = Acc::new();
                // a_k(c) f_j(w), f's letter passing c
                if let Some(below) = &below {
                    for (i1, b, co) in self.image(Op::F(j), d - 1, wi)?.iter() {
                        if let Some((neg, u)) = below.get(*i1).prepend((k, c)) {
                            let i2 = tgt.index_of(&u).expect("canonical vector in basis");
                            acc.add(i2, *b, co.clone().signed(neg ^ (b.is_odd() && c.is_odd())));
                        }
                    }
                }
                // δ-term of [f_j, a_k], with the a-label capped by c
                let mut z = Acc::new();
                let (k, j) = (k as i64, j as i64);
                for s in 0..k {
                    self.merge(Op::A(s as u32), Op::F((k + j - s - 1) as u32), d - 1, wi, Self::sign(k - s), &mut z)?;
                }
                for s in 0..=k {
                    let t = k + j - r - s + 1;
                    if t >= 0 {
                        self.merge(Op::H(t as u32), Op::M(s as u32), d - 1, wi, Self::sign(k - s), &mut z)?;
                    }
                }
                for ((i, b), co) in z.map {
                    if let Some((neg, l)) = b.mul(c) {
                        acc.add(i, l, co.signed(neg));
                    }
                }
                let mut out = acc.finish();
                if eps {
                    for e in &mut out {
                        e.2 = -e.2.clone();
                    }
                }
                Ok(out)
            }
            Op::Mser(0) | Op::Minv(0) | Op::Ninv(0) | Op::M(0) => Ok(Self::identity(idx)),
            Op::Mser(p) => {
                let mut acc = Acc::new();
                let p = p as i64;
                for k in 0..r {
                    let j = p + r - 2 - k;
                    if j >= 0 {
                        self.merge(Op::A(k as u32), Op::F(j as u32), d, idx, -Self::sign(k), &mut acc)?;
                    }
                }
                Ok(acc.finish())
            }
            Op::Minv(q) => {
                let mut acc = Acc::new();
                for p in 1..=q {
                    self.merge(Op::Mser(p), Op::Minv(q - p), d, idx, -S::one(), &mut acc)?;
                }
                Ok(acc.finish())
            }
            Op::Chern(q) => {
                let mut acc = Acc::new();
                self.push(&mut acc, Op::Minv(q), d, idx, &S::one())?;
                if q >= 1 {
                    let mut prev = Acc::new();
                    self.push(&mut prev, Op::Minv(q - 1), d, idx, &S::one())?;
                    acc.add_times_point(prev, kappa);
                }
                Ok(acc.finish())
            }
            Op::M(q) => {
                if q as i64 > r {
                    return Ok(Vec::new());
                }
                let mut acc = Acc::new();
                self.push(&mut acc, Op::Chern(q), d, idx, &Self::sign(q as i64))?;
                let mut prev = Acc::new();
                self.push(&mut prev, Op::M(q - 1), d, idx, &S::one())?;
                acc.add_times_point(prev, S::from_int(r - q as i64 + 1) * kc);
                Ok(acc.finish())
            }
            Op::Ninv(t) => {
                let mut acc = Acc::new();
                for i in 1..=t.min(r as u32) {
                    self.merge(Op::M(i), Op::Ninv(t - i), d, idx, -Self::sign(i as i64), &mut acc)?;
                }
                Ok(acc.finish())
            }
            Op::H(t) => {
                let mut acc = Acc::new();
                for p in 0..=t {
                    self.merge(Op::Mser(p), Op::Ninv(t - p), d, idx, S::one(), &mut acc)?;
                }
                Ok(acc.finish())
            }
            Op::E(k) => {
                let mut acc = Acc::new();
                let k = k as i64;
                for q in 0..=k.min(r - 1) {
                    let sq = Self::sign(q);
                    self.merge(Op::Mser((k - q) as u32), Op::A(q as u32), d, idx, sq.clone(), &mut acc)?;
                    if k - q >= 1 {
                        let mut t = Acc::new();
                        self.merge(Op::Mser((k - q - 1) as u32), Op::A(q as u32), d, idx, S::one(), &mut t)?;
                        acc.add_times_point(t, -(sq.clone() * kappa.clone()));
                    }
                    if q >= 1 {
                        let mut t = Acc::new();
                        self.merge(Op::Mser((k - q) as u32), Op::A((q - 1) as u32), d, idx, S::one(), &mut t)?;
                        acc.add_times_point(t, -sq * S::from_int(r - q) * kc.clone());
                    }
                }
                Ok(acc.finish())
            }
        }
    }

    fn push(&self, acc: &mut Acc<S>, op: Op, d: usize, idx: u32, scale: &S) -> Result<(), EngineError> {
        let mut t = Acc::new();
        for (i, b, c) in self.image(op, d, idx)?.iter() {
            t.add(*i, *b, c.clone());
        }
        acc.absorb(t, scale);
        Ok(())
    }

    // ---- public application --------------------------------------------

    fn op_for(&self, kind: OpKind, index: u32) -> Result<Op, EngineError> {
        self.check_index(kind, index)?;
        Ok(Op::from_kind(kind, index))
    }

    /// Open image of basis vector `idx` of charge `d`.
    pub fn open_image(
        &self,
        kind: OpKind,
        index: u32,
        d: usize,
        idx: u32,
    ) -> Result<Arc<Vec<(u32, CurveLetter, S)>>, EngineError> {
        let op = self.op_for(kind, index)?;
        self.image(op, d, idx)
    }

    /// Apply one token to a state. An open token inserts its label first;
    /// a capped token acts as the open one followed by capping that label.
    pub fn apply(&self, token: &OperatorToken<S>, state: &FockState<S>) -> Result<FockState<S>, EngineError> {
        let op = self.op_for(token.kind, token.index)?;
        let genus = self.params.genus;
        if state.genus() != genus {
            return Err(CurveError::GenusMismatch { left: genus, right: state.genus() }.into());
        }
        let mut labels = state.labels().to_vec();
        let cap = match &token.cap {
            Cap::Open(l) => {
                if labels.contains(l) {
                    return Err(EngineError::DuplicateLabel(l.clone()));
                }
                labels.insert(0, l.clone());
                None
            }
            Cap::Class(c) => {
                if c.labels().len() != 1 {
                    return Err(EngineError::CapArity(c.labels().len()));
                }
                if c.genus() != genus {
                    return Err(CurveError::GenusMismatch { left: genus, right: c.genus() }.into());
                }
                Some(c)
            }
        };
        let mut out = FockState::with_labels(genus, labels);
        for (v, x, coeff) in state.terms() {
            let x_odd = x.iter().filter(|l| l.is_odd()).count() % 2 == 1;
            let d = v.charge();
            let Some(td) = op.target_charge(d) else { continue };
            let basis = self.basis(d);
            let idx = basis.index_of(v).expect("state vectors are canonical");
            let tgt = self.basis(td);
            for (i, b, c) in self.image(op, d, idx)?.iter() {
                let w = tgt.get(*i).clone();
                match cap {
                    None => {
                        let mut ext = Vec::with_capacity(x.len() + 1);
                        ext.push(*b);
                        ext.extend_from_slice(x);
                        out.add_term(w, ext, coeff.clone() * c.clone());
                    }
                    Some(cls) => {
                        for (m, s) in cls.terms() {
                            if let Some((neg, CurveLetter::Point)) = b.mul(m[0]) {
                                let neg = neg ^ (x_odd && b.is_odd());
                                out.add_term(w.clone(), x.to_vec(), (coeff.clone() * c.clone() * s.clone()).signed(neg));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_a(&self, k: u32, cap: Cap<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        self.apply(&OperatorToken { kind: OpKind::A, index: k, cap }, v)
    }

    pub fn apply_f(&self, j: u32, cap: Cap<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        self.apply(&OperatorToken { kind: OpKind::F, index: j, cap }, v)
    }

    pub fn apply_m(&self, k: u32, cap: Cap<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        self.apply(&OperatorToken { kind: OpKind::M, index: k, cap }, v)
    }

    /// `h_t`, zero for negative `t`.
    pub fn apply_h(&self, t: i64, cap: Cap<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        if t < 0 {
            let mut labels = v.labels().to_vec();
            if let Cap::Open(l) = &cap {
                labels.insert(0, l.clone());
            }
            return Ok(FockState::with_labels(v.genus(), labels));
        }
        self.apply(&OperatorToken { kind: OpKind::H, index: t as u32, cap }, v)
    }

    pub fn apply_e(&self, k: u32, cap: Cap<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        self.apply(&OperatorToken { kind: OpKind::E, index: k, cap }, v)
    }

    /// Apply a word right to left.
    pub fn act_word(&self, word: &OperatorWord<S>, v: &FockState<S>) -> Result<FockState<S>, EngineError> {
        let mut seen: Vec<&str> = v.labels().iter().map(String::as_str).collect();
        for t in &word.tokens {
            self.check_index(t.kind, t.index)?;
            if let Cap::Open(l) = &t.cap {
                if seen.contains(&l.as_str()) {
                    return Err(EngineError::DuplicateLabel(l.clone()));
                }
                seen.push(l);
            }
        }
        let mut state = v.clone();
        for t in word.tokens.iter().rev() {
            state = self.apply(t, &state)?;
        }
        Ok(state)
    }

    /// Matrix of the capped operator from charge `d` to its target charge.
    pub fn operator_matrix(&self, token: &OperatorToken<S>, d: usize) -> Result<SparseMatrix<S>, EngineError> {
        let Cap::Class(cap) = &token.cap else {
            return Err(EngineError::CapArity(0));
        };
        if cap.labels().len() != 1 {
            return Err(EngineError::CapArity(cap.labels().len()));
        }
        let op = self.op_for(token.kind, token.index)?;
        let rows = op.target_charge(d).map(|t| self.basis(t).len()).unwrap_or(0);
        let mut total = SparseMatrix::from_columns(rows, vec![Vec::new(); self.basis(d).len()]);
        for (m, s) in cap.terms() {
            let part = self.letter_matrix(token.kind, token.index, m[0], d)?;
            total = total.add(&part.scale(s));
        }
        Ok(total)
    }

    fn letter_matrix(
        &self,
        kind: OpKind,
        index: u32,
        letter: CurveLetter,
        d: usize,
    ) -> Result<Arc<SparseMatrix<S>>, EngineError> {
        let key = (kind, index, letter, d);
        if let Some(m) = self.matrices.read().get(&key) {
            return Ok(m.clone());
        }
        let op = self.op_for(kind, index)?;
        let rows = op.target_charge(d).map(|t| self.basis(t).len()).unwrap_or(0);
        let n = self.basis(d).len();
        let mut cols = Vec::with_capacity(n);
        for idx in 0..n as u32 {
            let mut col = Vec::new();
            for (i, b, c) in self.image(op, d, idx)?.iter() {
                if let Some((neg, CurveLetter::Point)) = b.mul(letter) {
                    col.push((*i, c.clone().signed(neg)));
                }
            }
            cols.push(col);
        }
        let m = Arc::new(SparseMatrix::from_columns(rows, cols));
        self.matrices.write().insert(key, m.clone());
        Ok(m)
    }

    /// Truncation test: `z^{-k}` coefficients of `c(V, z+K)·M(z)^{-1}`
    /// for `k = 1..=kmax`, all of which must vanish on charge `d`.
    pub fn chern_tail_vanishes(&self, d: usize, kmax: u32) -> Result<bool, EngineError> {
        let r = self.rank();
        for k in 1..=kmax {
            for idx in 0..self.basis(d).len() as u32 {
                if !self.image(Op::Chern(r + k), d, idx)?.is_empty() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Internal image for relation checks: the series coefficients
    /// `M_p = -[a(z)f(z)]_{z^{-p}}` (`p ≥ 1`, identity for `p = 0`).
    pub fn series_image(&self, p: u32, d: usize, idx: u32) -> Result<Image<S>, EngineError> {
        self.image(Op::Mser(p), d, idx)
    }
}

/// Whether a basis vector lies in the span of an image (helper for tests).
pub fn image_to_state<S: Scalar>(
    genus: u32,
    basis: &Basis,
    image: &[(u32, CurveLetter, S)],
    label: &str,
) -> FockState<S> {
    let mut out = FockState::with_labels(genus, vec![label.to_string()]);
    for (i, b, c) in image {
        out.add_term(basis.get(*i).clone(), vec![*b], c.clone());
    }
    out
}

#[allow(dead_code)]
fn _assert_send_sync<S: Scalar>() {
    fn is<T: Send + Sync>() {}
    is::<Engine<S>>();
    is::<FockBasisVector>();
}
