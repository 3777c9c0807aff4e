//! Executable checks of the commutation relations, the `[f, a]` rule, the
//! multiplication identity, vacuum formulas, truncation, confluence and the
//! dual pairing.
//!
//! Two-operator relations are compared as open two-label states on labels
//! `(x, y)`: `x` carries the operators indexed by `k`, `y` those indexed by
//! `l`. A composite `X(ℓ_out) Y(ℓ_in)` naturally lands in `(ℓ_out, ℓ_in)` order
//! and is reordered to `(x, y)` with the Koszul sign of the two letters.
//! Comparing open states is the same as capping both labels with every pair
//! of basis letters.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{dual_basis_pairs, monomial_mul, CurveLetter, DualPair, ModuliParams};
use crate::engine::{Engine, Op, OpKind, OperatorToken, OperatorWord, PeelOrder, SparseMatrix};
use crate::error::EngineError;
use crate::fock::{FockBasisVector, FockState};
use crate::scalar::{odd, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationId {
    MM,
    EE,
    FF,
    ME,
    FM,
    EF,
    AA,
    #[serde(rename = "FA-restricted")]
    FaRestricted,
    #[serde(rename = "FA-general")]
    FaGeneral,
    #[serde(rename = "MULT")]
    Mult,
    #[serde(rename = "PAIRING")]
    Pairing,
}

impl RelationId {
    pub const YANGIAN: [RelationId; 6] =
        [RelationId::MM, RelationId::EE, RelationId::FF, RelationId::ME, RelationId::FM, RelationId::EF];

    pub const ALL: [RelationId; 11] = [
        RelationId::MM,
        RelationId::EE,
        RelationId::FF,
        RelationId::ME,
        RelationId::FM,
        RelationId::EF,
        RelationId::AA,
        RelationId::FaRestricted,
        RelationId::FaGeneral,
        RelationId::Mult,
        RelationId::Pairing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationId::MM => "MM",
            RelationId::EE => "EE",
            RelationId::FF => "FF",
            RelationId::ME => "ME",
            RelationId::FM => "FM",
            RelationId::EF => "EF",
            RelationId::AA => "AA",
            RelationId::FaRestricted => "FA-restricted",
            RelationId::FaGeneral => "FA-general",
            RelationId::Mult => "MULT",
            RelationId::Pairing => "PAIRING",
        }
    }

    pub fn parse(s: &str) -> Option<RelationId> {
        let s = s.trim();
        RelationId::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One relation family on a bounded grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationCase {
    pub id: RelationId,
    pub params: ModuliParams,
    /// largest source charge
    pub d_max: usize,
    /// largest `k` (and `l`) index
    pub k_max: u32,
}

impl RelationCase {
    pub fn new(id: RelationId, params: ModuliParams, d_max: usize, k_max: u32) -> Self {
        RelationCase { id, params, d_max, k_max }
    }
}

/// Flip the sign of one summand of a relation's right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub term: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub d: usize,
    pub k: u32,
    pub l: u32,
    pub vector: String,
    /// letters the two labels are capped with where the sides differ
    pub caps: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: RelationId,
    pub params: ModuliParams,
    pub d_max: usize,
    pub k_max: u32,
    /// number of `(indices, basis vector, caps)` tuples compared
    pub tested: u64,
    pub failures: u64,
    /// the failure with the smallest `(d, k, l, vector)`
    pub first_failure: Option<Failure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

type Two<S> = HashMap<(u32, CurveLetter, CurveLetter), S>;
type One<S> = HashMap<(u32, CurveLetter), S>;

fn add2<S: Scalar>(m: &mut Two<S>, key: (u32, CurveLetter, CurveLetter), c: S) {
    if c.is_zero() {
        return;
    }
    let e = m.entry(key).or_insert_with(S::zero);
    *e = e.clone() + c;
}

fn add1<S: Scalar>(m: &mut One<S>, key: (u32, CurveLetter), c: S) {
    if c.is_zero() {
        return;
    }
    let e = m.entry(key).or_insert_with(S::zero);
    *e = e.clone() + c;
}

fn sign<S: Scalar>(n: i64) -> S {
    S::one().signed(odd(n))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Label {
    X,
    Y,
}

struct Ctx<'a, S> {
    eng: &'a Engine<S>,
    pairs: Vec<DualPair>,
    r: i64,
    kappa: S,
    kc: S,
}

impl<'a, S: Scalar> Ctx<'a, S> {
    fn new(eng: &'a Engine<S>) -> Self {
        let p = eng.params();
        Ctx {
            eng,
            pairs: dual_basis_pairs(p.genus),
            r: p.rank as i64,
            kappa: S::from_int(p.shifted_c1()),
            kc: S::from_int(p.canonical_degree()),
        }
    }

    fn charge_after(op: Op, d: usize) -> Option<usize> {
        match op {
            Op::A(_) | Op::E(_) => Some(d + 1),
            Op::F(_) => d.checked_sub(1),
            _ => Some(d),
        }
    }

    /// `acc += scale · outer(ℓ_out) inner(ℓ_in) v`, in `(x, y)` order.
    fn comp(
        &self,
        outer: Op,
        outer_on: Label,
        inner: Op,
        d: usize,
        idx: u32,
        scale: &S,
        acc: &mut Two<S>,
    ) -> Result<(), EngineError> {
        if scale.is_zero() {
            return Ok(());
        }
        let Some(mid) = Self::charge_after(inner, d) else { return Ok(()) };
        for (i1, b_in, c1) in self.eng.image(inner, d, idx)?.iter() {
            for (i2, b_out, c2) in self.eng.image(outer, mid, *i1)?.iter() {
                let c = scale.clone() * c1.clone() * c2.clone();
                match outer_on {
                    Label::X => add2(acc, (*i2, *b_out, *b_in), c),
                    Label::Y => add2(acc, (*i2, *b_in, *b_out), c.signed(b_in.is_odd() && b_out.is_odd())),
                }
            }
        }
        Ok(())
    }

    /// `acc += scale · src · δ_{xy}`.
    fn times_delta(&self, src: &Two<S>, scale: &S, acc: &mut Two<S>) {
        for ((i, bx, by), c) in src {
            for p in &self.pairs {
                if let Some((neg, m)) = monomial_mul(&[*bx, *by], &[p.left, p.right]) {
                    add2(acc, (*i, m[0], m[1]), (scale.clone() * c.clone()).signed(neg ^ p.negate));
                }
            }
        }
    }

    /// `acc += scale · (1 ⊗ Z) · δ_{xy}` for a one-label `Z` on `y`.
    fn delta_single(&self, z: &One<S>, scale: &S, acc: &mut Two<S>) {
        let mut lifted = Two::new();
        for ((i, b), c) in z {
            add2(&mut lifted, (*i, CurveLetter::Unit, *b), c.clone());
        }
        self.times_delta(&lifted, scale, acc);
    }

    /// `acc += scale · (outer · inner)(v)` restricted to the diagonal.
    fn merge(&self, outer: Op, inner: Op, d: usize, idx: u32, scale: &S, acc: &mut One<S>) -> Result<(), EngineError> {
        let Some(mid) = Self::charge_after(inner, d) else { return Ok(()) };
        for (i1, b1, c1) in self.eng.image(inner, d, idx)?.iter() {
            for (i2, b2, c2) in self.eng.image(outer, mid, *i1)?.iter() {
                if let Some((neg, b)) = b2.mul(*b1) {
                    add1(acc, (*i2, b), (scale.clone() * c1.clone() * c2.clone()).signed(neg));
                }
            }
        }
        Ok(())
    }

    /// Apply a charge-preserving op to a one-label state, merging letters.
    fn apply_one(&self, op: Op, d: usize, state: &One<S>) -> Result<One<S>, EngineError> {
        let mut out = One::new();
        for ((i, b), c) in state {
            for (i2, b2, c2) in self.eng.image(op, d, *i)?.iter() {
                if let Some((neg, l)) = b2.mul(*b) {
                    add1(&mut out, (*i2, l), (c.clone() * c2.clone()).signed(neg));
                }
            }
        }
        Ok(out)
    }

    fn image_one(&self, op: Op, d: usize, idx: u32) -> Result<One<S>, EngineError> {
        let mut out = One::new();
        for (i, b, c) in self.eng.image(op, d, idx)?.iter() {
            add1(&mut out, (*i, *b), c.clone());
        }
        Ok(out)
    }

    /// Both sides of a two-operator relation at one grid point.
    fn sides(
        &self,
        id: RelationId,
        k: u32,
        l: u32,
        d: usize,
        idx: u32,
        mutation: Option<Mutation>,
    ) -> Result<(Two<S>, Two<S>), EngineError> {
        use Label::{X, Y};
        let one = S::one();
        let neg = -S::one();
        let flip = |t: usize| -> S {
            if mutation.map(|m| m.term) == Some(t) {
                -S::one()
            } else {
                S::one()
            }
        };
        let mut lhs = Two::new();
        let mut rhs = Two::new();
        let r = self.r;
        match id {
            RelationId::MM => {
                self.comp(Op::M(k), X, Op::M(l), d, idx, &one, &mut lhs)?;
                self.comp(Op::M(l), Y, Op::M(k), d, idx, &neg, &mut lhs)?;
            }
            RelationId::AA => {
                self.comp(Op::A(k), X, Op::A(l), d, idx, &one, &mut lhs)?;
                self.comp(Op::A(l), Y, Op::A(k), d, idx, &one, &mut rhs)?;
            }
            RelationId::EE => {
                self.comp(Op::E(k + 1), X, Op::E(l), d, idx, &one, &mut lhs)?;
                self.comp(Op::E(l), Y, Op::E(k + 1), d, idx, &neg, &mut lhs)?;
                self.comp(Op::E(k), X, Op::E(l + 1), d, idx, &neg, &mut lhs)?;
                self.comp(Op::E(l + 1), Y, Op::E(k), d, idx, &one, &mut lhs)?;
                let mut t = Two::new();
                self.comp(Op::E(k), X, Op::E(l), d, idx, &flip(0), &mut t)?;
                self.comp(Op::E(l), Y, Op::E(k), d, idx, &flip(1), &mut t)?;
                self.times_delta(&t, &neg, &mut rhs);
            }
            RelationId::FF => {
                self.comp(Op::F(l), Y, Op::F(k + 1), d, idx, &one, &mut lhs)?;
                self.comp(Op::F(k + 1), X, Op::F(l), d, idx, &neg, &mut lhs)?;
                self.comp(Op::F(l + 1), Y, Op::F(k), d, idx, &neg, &mut lhs)?;
                self.comp(Op::F(k), X, Op::F(l + 1), d, idx, &one, &mut lhs)?;
                let mut t = Two::new();
                self.comp(Op::F(k), X, Op::F(l), d, idx, &flip(0), &mut t)?;
                self.comp(Op::F(l), Y, Op::F(k), d, idx, &flip(1), &mut t)?;
                self.times_delta(&t, &neg, &mut rhs);
            }
            RelationId::ME => {
                self.comp(Op::M(l), Y, Op::E(k), d, idx, &one, &mut lhs)?;
                self.comp(Op::E(k), X, Op::M(l), d, idx, &neg, &mut lhs)?;
                let mut t = Two::new();
                for s in 0..l {
                    let c = sign::<S>(s as i64 + 1) * flip(s as usize);
                    self.comp(Op::E(k + s), X, Op::M(l - s - 1), d, idx, &c, &mut t)?;
                }
                self.times_delta(&t, &one, &mut rhs);
            }
            RelationId::FM => {
                self.comp(Op::F(k), X, Op::M(l), d, idx, &one, &mut lhs)?;
                self.comp(Op::M(l), Y, Op::F(k), d, idx, &neg, &mut lhs)?;
                let mut t = Two::new();
                for s in 0..l {
                    let c = sign::<S>(s as i64 + 1) * flip(s as usize);
                    self.comp(Op::M(l - s - 1), Y, Op::F(k + s), d, idx, &c, &mut t)?;
                }
                self.times_delta(&t, &one, &mut rhs);
            }
            RelationId::EF => {
                self.comp(Op::E(k), X, Op::F(l), d, idx, &one, &mut lhs)?;
                self.comp(Op::F(l), Y, Op::E(k), d, idx, &neg, &mut lhs)?;
                let t = k as i64 + l as i64 - r + 1;
                if t >= 0 {
                    let h = self.image_one(Op::H(t as u32), d, idx)?;
                    self.delta_single(&h, &(neg.clone() * flip(0)), &mut rhs);
                }
            }
            RelationId::FaRestricted | RelationId::FaGeneral => {
                // k = i (the a-index, label x), l = j (the f-index, label y)
                self.comp(Op::F(l), Y, Op::A(k), d, idx, &one, &mut lhs)?;
                self.comp(Op::A(k), X, Op::F(l), d, idx, &neg, &mut lhs)?;
                let z = if id == RelationId::FaRestricted {
                    self.z_restricted(k, l, d, idx)?
                } else {
                    self.z_general(k, l, d, idx)?
                };
                self.delta_single(&z, &one, &mut rhs);
            }
            RelationId::Mult | RelationId::Pairing => unreachable!("not a two-label relation"),
        }
        Ok((lhs, rhs))
    }

    /// The general `[f_j, a_i]` correction: `Σ_{s<i} a_s f_{i+j-s-1} (-1)^{i-s}
    /// + Σ_{s≤i} h_{i+j-r-s+1} m_s (-1)^{i-s}`.
    fn z_general(&self, i: u32, j: u32, d: usize, idx: u32) -> Result<One<S>, EngineError> {
        let (i, j) = (i as i64, j as i64);
        let mut z = One::new();
        for s in 0..i {
            self.merge(Op::A(s as u32), Op::F((i + j - s - 1) as u32), d, idx, &sign(i - s), &mut z)?;
        }
        for s in 0..=i {
            let t = i + j - self.r - s + 1;
            if t >= 0 {
                self.merge(Op::H(t as u32), Op::M(s as u32), d, idx, &sign(i - s), &mut z)?;
            }
        }
        Ok(z)
    }

    /// The two-case form valid for `i, j < r`.
    fn z_restricted(&self, i: u32, j: u32, d: usize, idx: u32) -> Result<One<S>, EngineError> {
        let r = self.r;
        let (i, j) = (i as i64, j as i64);
        let mut z = One::new();
        if i + j < r {
            if i + j == r - 1 {
                add1(&mut z, (idx, CurveLetter::Unit), sign(i));
            }
            for s in 0..i {
                self.merge(Op::A(s as u32), Op::F((i + j - s - 1) as u32), d, idx, &sign(i - s), &mut z)?;
            }
        } else {
            for s in i..r {
                self.merge(Op::A(s as u32), Op::F((i + j - s - 1) as u32), d, idx, &-sign::<S>(i - s), &mut z)?;
            }
        }
        Ok(z)
    }

    /// `(-1)^k S_k` with `S(z) = c(V, z+K)/c(E, z+K)` rebuilt from the `m`'s,
    /// and `Σ_i (-1)^{i-k-1} a_i f_{r+k-2-i}`, for `k = 1..=k_max`.
    fn mult_sides(
        &self,
        k_max: u32,
        d: usize,
        idx: u32,
        mutation: Option<Mutation>,
    ) -> Result<Vec<(One<S>, One<S>)>, EngineError> {
        let r = self.r;
        // D(z) = z^r / c(E, z + K)
        let mut dser: Vec<One<S>> = vec![HashMap::from([((idx, CurveLetter::Unit), S::one())])];
        for t in 1..=k_max as i64 {
            let mut acc = One::new();
            for q in 1..=t.min(r + 1) {
                let prev = &dser[(t - q) as usize];
                // Ĉ_q = (-1)^q m_q + (-1)^{q-1} (r-q+1) K m_{q-1}
                if q <= r {
                    for (key, c) in self.apply_one(Op::M(q as u32), d, prev)? {
                        add1(&mut acc, key, -(c * sign::<S>(q)));
                    }
                }
                let w = S::from_int(r - q + 1) * self.kc.clone();
                if !w.is_zero() {
                    for ((i, b), c) in self.apply_one(Op::M((q - 1) as u32), d, prev)? {
                        if b == CurveLetter::Unit {
                            add1(&mut acc, (i, CurveLetter::Point), -(c * sign::<S>(q - 1) * w.clone()));
                        }
                    }
                }
            }
            dser.push(acc);
        }
        let mut out = Vec::new();
        for k in 1..=k_max as i64 {
            let mut lhs = One::new();
            for (key, c) in &dser[k as usize] {
                add1(&mut lhs, *key, c.clone() * sign::<S>(k));
            }
            for ((i, b), c) in &dser[(k - 1) as usize] {
                if *b == CurveLetter::Unit {
                    add1(&mut lhs, (*i, CurveLetter::Point), c.clone() * self.kappa.clone() * sign::<S>(k));
                }
            }
            let mut rhs = One::new();
            for i in 0..r {
                let j = r + k - 2 - i;
                if j >= 0 {
                    let flip = if mutation.map(|m| m.term as i64) == Some(i) { -S::one() } else { S::one() };
                    self.merge(Op::A(i as u32), Op::F(j as u32), d, idx, &(sign::<S>(i - k - 1) * flip), &mut rhs)?;
                }
            }
            out.push((lhs, rhs));
        }
        Ok(out)
    }
}

fn diff_two<S: Scalar>(lhs: &Two<S>, rhs: &Two<S>) -> Option<(CurveLetter, CurveLetter)> {
    let mut keys: Vec<_> = lhs.keys().chain(rhs.keys()).copied().collect();
    keys.sort();
    keys.into_iter().find_map(|key| {
        let a = lhs.get(&key).cloned().unwrap_or_else(S::zero);
        let b = rhs.get(&key).cloned().unwrap_or_else(S::zero);
        (a != b).then_some((key.1, key.2))
    })
}

fn two_to_state<S: Scalar>(eng: &Engine<S>, d: usize, m: &Two<S>) -> FockState<S> {
    let basis = eng.basis(d);
    let mut out = FockState::with_labels(eng.params().genus, vec!["x".into(), "y".into()]);
    for ((i, bx, by), c) in m {
        out.add_term(basis.get(*i).clone(), vec![*bx, *by], c.clone());
    }
    out
}

fn one_to_state<S: Scalar>(eng: &Engine<S>, d: usize, m: &One<S>) -> FockState<S> {
    let basis = eng.basis(d);
    let mut out = FockState::with_labels(eng.params().genus, vec!["x".into()]);
    for ((i, b), c) in m {
        out.add_term(basis.get(*i).clone(), vec![*b], c.clone());
    }
    out
}

fn cap_name(b: CurveLetter) -> String {
    b.dual().1.to_string()
}

/// Index range of `(k, l)` for each relation.
fn index_grid(id: RelationId, rank: u32, k_max: u32) -> Vec<(u32, u32)> {
    let (ks, ls): (u32, u32) = match id {
        RelationId::MM => (k_max.min(rank), k_max.min(rank)),
        RelationId::ME => (k_max, k_max.min(rank)),
        RelationId::FM => (k_max, k_max.min(rank)),
        RelationId::AA => (rank - 1, rank - 1),
        RelationId::FaRestricted => (rank - 1, rank - 1),
        RelationId::FaGeneral => (rank - 1, k_max),
        _ => (k_max, k_max),
    };
    let mut out = Vec::new();
    for k in 0..=ks {
        for l in 0..=ls {
            out.push((k, l));
        }
    }
    out
}

fn finish_report(
    case: &RelationCase,
    tested: u64,
    mut failures: Vec<((usize, u32, u32, u32), Failure)>,
) -> CheckReport {
    failures.sort_by_key(|a| a.0);
    CheckReport {
        id: case.id,
        params: case.params,
        d_max: case.d_max,
        k_max: case.k_max,
        tested,
        failures: failures.len() as u64,
        first_failure: failures.into_iter().next().map(|f| f.1),
    }
}

/// Check one relation family on every basis vector of charge `≤ d_max`.
pub fn check_relation<S: Scalar>(
    eng: &Engine<S>,
    case: &RelationCase,
    mutation: Option<Mutation>,
) -> Result<CheckReport, EngineError> {
    match case.id {
        RelationId::Mult => return check_mult_identity_with(eng, case, mutation),
        RelationId::Pairing => return check_pairing(eng, case),
        _ => {}
    }
    let ctx = Ctx::new(eng);
    let g = eng.params().genus as u64;
    let caps = (2 * g + 2) * (2 * g + 2);
    let mut tasks = Vec::new();
    for d in 0..=case.d_max {
        let n = eng.basis(d).len() as u32;
        for (k, l) in index_grid(case.id, eng.params().rank, case.k_max) {
            for idx in 0..n {
                tasks.push((d, k, l, idx));
            }
        }
    }
    let results: Vec<Result<Option<((usize, u32, u32, u32), Failure)>, EngineError>> = tasks
        .par_iter()
        .map(|&(d, k, l, idx)| {
            let (lhs, rhs) = ctx.sides(case.id, k, l, d, idx, mutation)?;
            Ok(diff_two(&lhs, &rhs).map(|(bx, by)| {
                let td = match case.id {
                    RelationId::EE => d + 2,
                    RelationId::FF => d.saturating_sub(2),
                    RelationId::ME => d + 1,
                    RelationId::FM => d.saturating_sub(1),
                    RelationId::AA => d + 2,
                    _ => d,
                };
                (
                    (d, k, l, idx),
                    Failure {
                        d,
                        k,
                        l,
                        vector: eng.basis(d).get(idx).to_string(),
                        caps: vec![cap_name(bx), cap_name(by)],
                        lhs: two_to_state(eng, td, &lhs).to_string(),
                        rhs: two_to_state(eng, td, &rhs).to_string(),
                    },
                )
            }))
        })
        .collect();
    let mut failures = Vec::new();
    for r in results {
        if let Some(f) = r? {
            failures.push(f);
        }
    }
    Ok(finish_report(case, tasks.len() as u64 * caps, failures))
}

/// `[f_j, a_i]` in the two-case form against the general form and against
/// the actual commutator, for `i, j < r`.
pub fn check_fa_restricted<S: Scalar>(eng: &Engine<S>, d_max: usize) -> Result<CheckReport, EngineError> {
    let case = RelationCase::new(RelationId::FaRestricted, eng.params(), d_max, eng.params().rank - 1);
    let direct = check_relation(eng, &case, None)?;
    let ctx = Ctx::new(eng);
    let mut failures = Vec::new();
    let mut tested = 0u64;
    for d in 0..=d_max {
        for idx in 0..eng.basis(d).len() as u32 {
            for i in 0..eng.params().rank {
                for j in 0..eng.params().rank {
                    tested += 1;
                    let a = ctx.z_restricted(i, j, d, idx)?;
                    let b = ctx.z_general(i, j, d, idx)?;
                    let sa = one_to_state(eng, d, &a);
                    let sb = one_to_state(eng, d, &b);
                    if sa != sb {
                        failures.push((
                            (d, i, j, idx),
                            Failure {
                                d,
                                k: i,
                                l: j,
                                vector: eng.basis(d).get(idx).to_string(),
                                caps: Vec::new(),
                                lhs: sa.to_string(),
                                rhs: sb.to_string(),
                            },
                        ));
                    }
                }
            }
        }
    }
    let mut report = finish_report(&case, tested, failures);
    report.tested += direct.tested;
    report.failures += direct.failures;
    if report.first_failure.is_none() {
        report.first_failure = direct.first_failure;
    }
    Ok(report)
}

/// Multiplication by `c_k((V - E) ⊗ K^{-1})` two ways, `k = 1..=k_max`.
pub fn check_mult_identity<S: Scalar>(eng: &Engine<S>, d_max: usize, k_max: u32) -> Result<CheckReport, EngineError> {
    check_mult_identity_with(eng, &RelationCase::new(RelationId::Mult, eng.params(), d_max, k_max), None)
}

fn check_mult_identity_with<S: Scalar>(
    eng: &Engine<S>,
    case: &RelationCase,
    mutation: Option<Mutation>,
) -> Result<CheckReport, EngineError> {
    let ctx = Ctx::new(eng);
    let mut tasks = Vec::new();
    for d in 0..=case.d_max {
        for idx in 0..eng.basis(d).len() as u32 {
            tasks.push((d, idx));
        }
    }
    let results: Vec<Result<Vec<((usize, u32, u32, u32), Failure)>, EngineError>> = tasks
        .par_iter()
        .map(|&(d, idx)| {
            let mut fails = Vec::new();
            for (k, (lhs, rhs)) in ctx.mult_sides(case.k_max, d, idx, mutation)?.into_iter().enumerate() {
                let a = one_to_state(eng, d, &lhs);
                let b = one_to_state(eng, d, &rhs);
                if a != b {
                    let k = k as u32 + 1;
                    fails.push((
                        (d, k, 0, idx),
                        Failure {
                            d,
                            k,
                            l: 0,
                            vector: eng.basis(d).get(idx).to_string(),
                            caps: Vec::new(),
                            lhs: a.to_string(),
                            rhs: b.to_string(),
                        },
                    ));
                }
            }
            Ok(fails)
        })
        .collect();
    let mut failures = Vec::new();
    for r in results {
        failures.extend(r?);
    }
    Ok(finish_report(case, tasks.len() as u64 * case.k_max as u64, failures))
}

/// `c(V, z+K)·M(z)^{-1}` has no `z^{-k}` terms, `k = 1..=5`, on charges `≤ d_max`.
pub fn check_truncation<S: Scalar>(eng: &Engine<S>, d_max: usize) -> Result<bool, EngineError> {
    for d in 0..=d_max {
        if !eng.chern_tail_vanishes(d, 5)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Vacuum formulas: `f(w)·1 = 1/c(E, w)` and `e(z)·1 = 1 - c(V,z+K)/c(E,z+K)`
/// on `1 = 1_{Quot_d}` for `d ≤ d_max`, all coefficients up to `j_max`. At
/// `d = 1` the first is also compared to the explicit `1/c(V, w)`.
pub fn check_vacuum<S: Scalar>(eng: &Engine<S>, d_max: usize, j_max: u32) -> Result<bool, EngineError> {
    let p = eng.params();
    let r = p.rank as i64;
    let unit_idx = |d: usize| -> u32 {
        let v = FockBasisVector::canonicalize(&vec![(0, CurveLetter::Unit); d], p.rank)
            .expect("k = 0")
            .expect("even letters")
            .1;
        eng.basis(d).index_of(&v).expect("in basis")
    };
    let inv_fact = |d: usize| -> S { S::one() / (1..=d as i64).fold(S::one(), |a, i| a * S::from_int(i)) };
    let to_one = |v: &[(u32, CurveLetter, S)], scale: &S| -> One<S> {
        let mut out = One::new();
        for (i, b, c) in v {
            add1(&mut out, (*i, *b), c.clone() * scale.clone());
        }
        out
    };
    for d in 1..=d_max {
        let u = unit_idx(d);
        let lower = unit_idx(d - 1);
        for j in 0..=j_max {
            let got = to_one(&eng.image(Op::F(j), d, u)?, &inv_fact(d));
            let t = j as i64 + 1 - r;
            let want = if t >= 0 {
                to_one(&eng.image(Op::Ninv(t as u32), d - 1, lower)?, &inv_fact(d - 1))
            } else {
                One::new()
            };
            if got != want {
                return Ok(false);
            }
            if d == 1 {
                let mut explicit = One::new();
                if t == 0 {
                    add1(&mut explicit, (0, CurveLetter::Unit), S::one());
                } else if t == 1 {
                    add1(&mut explicit, (0, CurveLetter::Point), S::from_int(p.deg_v));
                }
                if got != explicit {
                    return Ok(false);
                }
            }
        }
    }
    for d in 0..d_max {
        let u = unit_idx(d);
        let upper = unit_idx(d + 1);
        for k in 0..=j_max {
            let got = to_one(&eng.image(Op::E(k), d, u)?, &inv_fact(d));
            let want = to_one(&eng.image(Op::Mser(k + 1), d + 1, upper)?, &-inv_fact(d + 1));
            if got != want {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every capped operator matrix is homogeneous of the expected degree.
pub fn check_homogeneity<S: Scalar>(eng: &Engine<S>, d_max: usize, k_max: u32) -> Result<bool, EngineError> {
    let p = eng.params();
    for d in 0..=d_max {
        let basis = eng.basis(d);
        for kind in [OpKind::A, OpKind::F, OpKind::M, OpKind::H, OpKind::E] {
            let top = match kind {
                OpKind::A => p.rank - 1,
                OpKind::M => p.rank,
                _ => k_max,
            };
            for index in 0..=top {
                let shift = kind.degree_shift(index, p.rank);
                let Some(td) = (d as i64 + kind.charge_shift()).try_into().ok() else { continue };
                let tgt = eng.basis(td);
                for idx in 0..basis.len() as u32 {
                    let src = basis.get(idx).degree() as i64;
                    for (i, b, _) in eng.open_image(kind, index, d, idx)?.iter() {
                        // the open letter b pairs with a cap of degree 2 - deg b
                        let want = src + shift + 2 - b.degree() as i64;
                        if tgt.get(*i).degree() as i64 != want {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// `⟨0| f_{r-1-k_d}(c_d) … f_{r-1-k_1}(c_1) v`: the vacuum coefficient after
/// applying capped `f`'s, rightmost first.
pub fn dual_pairing<S: Scalar>(
    eng: &Engine<S>,
    indices: &[u32],
    caps: &[CurveLetter],
    v: &FockState<S>,
) -> Result<S, EngineError> {
    let charge = v.charge().unwrap_or(0);
    if indices.len() != caps.len() || (!v.is_zero() && indices.len() != charge) {
        return Err(EngineError::LengthMismatch { word: indices.len(), charge });
    }
    let g = eng.params().genus;
    let word = OperatorWord::new(
        indices.iter().zip(caps).rev().map(|(&j, &c)| OperatorToken::letter(OpKind::F, j, g, c)).collect(),
    );
    let out = eng.act_word(&word, v)?;
    Ok(out.coefficient(&FockBasisVector::vacuum(), &[]))
}

/// Pairing matrix on charge `d`: row `λ` is the `f`-word dual to basis
/// vector `λ`, column `μ` the basis vector.
pub fn pairing_matrix<S: Scalar>(eng: &Engine<S>, d: usize) -> Result<SparseMatrix<S>, EngineError> {
    let basis = eng.basis(d);
    let r = eng.params().rank;
    let n = basis.len();
    let rows: Vec<Result<Vec<(u32, S)>, EngineError>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let lam = basis.get(row as u32);
            // f_{r-1-k_1}(c_1†) applies first
            let indices: Vec<u32> = lam.slots().iter().map(|(k, _)| r - 1 - k).collect();
            let caps: Vec<CurveLetter> = lam.slots().iter().map(|(_, c)| c.dual().1).collect();
            let mut entries = Vec::new();
            for (col, mu) in basis.vectors().iter().enumerate() {
                let rev_i: Vec<u32> = indices.iter().rev().copied().collect();
                let rev_c: Vec<CurveLetter> = caps.iter().rev().copied().collect();
                let x = dual_pairing(eng, &rev_i, &rev_c, &FockState::basis_vector(eng.params().genus, mu.clone()))?;
                if !x.is_zero() {
                    entries.push((col as u32, x));
                }
            }
            Ok(entries)
        })
        .collect();
    // stored by columns: transpose the row lists
    let mut cols = vec![Vec::new(); n];
    for (row, r) in rows.into_iter().enumerate() {
        for (col, x) in r? {
            cols[col as usize].push((row as u32, x));
        }
    }
    Ok(SparseMatrix::from_columns(n, cols))
}

/// Whether row `λ` annihilates every column `μ` with smaller weight, or equal
/// weight and lexicographically larger partition.
pub fn pairing_is_triangular<S: Scalar>(eng: &Engine<S>, d: usize, m: &SparseMatrix<S>) -> bool {
    let basis = eng.basis(d);
    let parts = |v: &FockBasisVector| -> Vec<u32> { v.slots().iter().map(|s| s.0).collect() };
    for col in 0..m.cols() {
        let mu = basis.get(col as u32);
        for (row, _) in m.column(col) {
            let lam = basis.get(*row);
            let (wl, wm) = (lam.weight(), mu.weight());
            if wm < wl || (wm == wl && parts(mu) > parts(lam)) {
                return false;
            }
        }
    }
    true
}

fn check_pairing<S: Scalar>(eng: &Engine<S>, case: &RelationCase) -> Result<CheckReport, EngineError> {
    let mut failures = Vec::new();
    let mut tested = 0;
    for d in 0..=case.d_max {
        let m = pairing_matrix(eng, d)?;
        tested += (m.rows() * m.cols()) as u64;
        let rank = m.rank();
        if rank != m.cols() {
            failures.push((
                (d, 0, 0, 0),
                Failure {
                    d,
                    k: 0,
                    l: 0,
                    vector: String::new(),
                    caps: Vec::new(),
                    lhs: format!("rank {rank}"),
                    rhs: format!("dimension {}", m.cols()),
                },
            ));
        }
    }
    Ok(finish_report(case, tested, failures))
}

/// Outcome of a confluence run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfluenceReport {
    pub evaluations: u64,
    pub mismatches: u64,
    pub fuel_exhaustions: u64,
}

/// Evaluate random words with engines that push `f` through randomly chosen
/// slots and compare with the leading-slot engine.
pub fn check_confluence<S: Scalar>(
    params: ModuliParams,
    seeds: &[u64],
    words_per_seed: usize,
    d_max: usize,
    fuel: u64,
) -> ConfluenceReport {
    let reference: Engine<S> = Engine::new(params);
    let r = params.rank;
    let g = params.genus;
    let letters = CurveLetter::all(g);
    let per_seed: Vec<(u64, u64, u64)> = seeds
        .par_iter()
        .map(|&seed| {
            let eng: Engine<S> = Engine::new(params).with_peel_order(PeelOrder::Random(seed)).with_fuel(fuel);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut evals, mut bad, mut dry) = (0, 0, 0);
            for _ in 0..words_per_seed {
                let d0 = rng.gen_range(0..=d_max);
                let basis = eng.basis(d0);
                let v = basis.get(rng.gen_range(0..basis.len() as u32)).clone();
                let mut charge = d0 as i64;
                let mut tokens = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    let kind = [OpKind::A, OpKind::F, OpKind::M, OpKind::H, OpKind::E][rng.gen_range(0..5)];
                    let new = charge + kind.charge_shift();
                    if new < 0 || new > d_max as i64 + 1 {
                        continue;
                    }
                    let index = match kind {
                        OpKind::A => rng.gen_range(0..r),
                        OpKind::M => rng.gen_range(0..=r),
                        _ => rng.gen_range(0..=2 * r),
                    };
                    charge = new;
                    tokens.push(OperatorToken::letter(kind, index, g, letters[rng.gen_range(0..letters.len())]));
                }
                tokens.reverse();
                let word = OperatorWord::new(tokens);
                let state = FockState::basis_vector(g, v);
                evals += 1;
                match (eng.act_word(&word, &state), reference.act_word(&word, &state)) {
                    (Ok(a), Ok(b)) => {
                        if a != b {
                            bad += 1;
                        }
                    }
                    (Err(EngineError::FuelExhausted(_)), _) => dry += 1,
                    _ => bad += 1,
                }
            }
            (evals, bad, dry)
        })
        .collect();
    let mut rep = ConfluenceReport { evaluations: 0, mismatches: 0, fuel_exhaustions: 0 };
    for (e, b, f) in per_seed {
        rep.evaluations += e;
        rep.mismatches += b;
        rep.fuel_exhaustions += f;
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Q;

    fn engine(r: u32, g: u32, n: i64) -> Engine<Q> {
        Engine::new(ModuliParams::new(r, g, n).unwrap())
    }

    #[test]
    fn relation_names_roundtrip() {
        for id in RelationId::ALL {
            assert_eq!(RelationId::parse(id.name()), Some(id));
        }
        assert_eq!(RelationId::parse("fa-restricted"), Some(RelationId::FaRestricted));
        assert_eq!(RelationId::parse("XY"), None);
    }

    #[test]
    fn ef_rank_one_vacuum() {
        let e = engine(1, 0, 2);
        let ctx = Ctx::new(&e);
        let (lhs, rhs) = ctx.sides(RelationId::EF, 0, 0, 0, 0, None).unwrap();
        assert_eq!(lhs, rhs);
        // capping x with 1 and y with ω picks the ω⊗1 coefficient: -1
        assert_eq!(lhs.get(&(0, CurveLetter::Point, CurveLetter::Unit)), Some(&Q::from_integer((-1).into())));
    }

    #[test]
    fn small_grid_passes() {
        let e = engine(1, 1, 1);
        for id in RelationId::YANGIAN {
            let rep = check_relation(&e, &RelationCase::new(id, e.params(), 2, 3), None).unwrap();
            assert!(rep.passed(), "{id}: {:?}", rep.first_failure);
        }
    }

    #[test]
    fn ee_mutation_is_caught() {
        let e = engine(1, 0, 0);
        let rep = check_relation(&e, &RelationCase::new(RelationId::EE, e.params(), 2, 2), Some(Mutation { term: 0 }))
            .unwrap();
        assert!(!rep.passed());
        let f = rep.first_failure.unwrap();
        assert_eq!((f.d, f.k, f.l), (0, 0, 0));
    }

    #[test]
    fn pairing_rank_one() {
        let e = engine(1, 0, 0);
        let v = FockState::from_slots(0, 1, &[(0, CurveLetter::Unit)], Q::from_integer(1.into())).unwrap();
        let x = dual_pairing(&e, &[0], &[CurveLetter::Point], &v).unwrap();
        assert_eq!(x, Q::from_integer(1.into()));
        assert!(matches!(
            dual_pairing(&e, &[0, 0], &[CurveLetter::Point, CurveLetter::Point], &v),
            Err(EngineError::LengthMismatch { .. })
        ));
    }
}
