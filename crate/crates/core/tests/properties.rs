use proptest::prelude::*;
use quot_yangian::*;

const G: u32 = 2;

fn letter() -> impl Strategy<Value = CurveLetter> {
    prop::sample::select(CurveLetter::all(G))
}

fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

fn class(labels: &'static [&'static str]) -> impl Strategy<Value = CurveClassQ> {
    prop::collection::vec((prop::collection::vec(letter(), labels.len()), -3i64..=3), 0..4).prop_map(move |terms| {
        let mut c = CurveClassQ::zero(G, labels.iter().map(|s| s.to_string()).collect()).unwrap();
        for (m, k) in terms {
            c.try_add_term(m, q(k)).unwrap();
        }
        c
    })
}

proptest! {
    #[test]
    fn super_commutative(x in letter(), y in letter()) {
        let a = CurveClassQ::letter(G, "t", x).unwrap();
        let b = CurveClassQ::letter(G, "t", y).unwrap();
        let sign = if x.is_odd() && y.is_odd() { q(-1) } else { q(1) };
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap().scale(&sign));
    }

    #[test]
    fn associative(a in class(&["x", "y"]), b in class(&["x", "y"]), c in class(&["x", "y"])) {
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn distributive(a in class(&["x", "y"]), b in class(&["x", "y"]), c in class(&["x", "y"])) {
        let l = a.mul(&b.add(&c).unwrap()).unwrap();
        let r = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn label_swap_is_a_ring_map(a in class(&["x", "y"]), b in class(&["x", "y"])) {
        let yx = ["y".to_string(), "x".to_string()];
        let sw = |c: &CurveClassQ| c.permute_labels(&yx).unwrap();
        prop_assert_eq!(sw(&a.mul(&b).unwrap()), sw(&a).mul(&sw(&b)).unwrap());
        let xy = ["x".to_string(), "y".to_string()];
        prop_assert_eq!(sw(&a).permute_labels(&xy).unwrap(), a);
    }

    #[test]
    fn delta_is_symmetric(_u in 0..1u8) {
        let d = CurveClassQ::diagonal_class(G, "x", "y").unwrap();
        let swapped = d.permute_labels(&["y".to_string(), "x".to_string()]).unwrap();
        let renamed = CurveClassQ::diagonal_class(G, "y", "x").unwrap();
        prop_assert_eq!(swapped, renamed);
    }

    #[test]
    fn canonicalize_is_idempotent(raw in prop::collection::vec((0u32..3, letter()), 0..6)) {
        if let Some((_, v)) = FockBasisVector::canonicalize(&raw, 3).unwrap() {
            let again = FockBasisVector::canonicalize(v.slots(), 3).unwrap();
            prop_assert_eq!(again, Some((false, v)));
        }
    }

    #[test]
    fn canonicalize_sign_is_odd_inversions(
        raw in prop::collection::vec((0u32..3, letter()), 0..6),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let Some((_, v)) = FockBasisVector::canonicalize(&raw, 3).unwrap() else { return Ok(()) };
        let n = v.slots().len();
        let p: Vec<usize> = perm.into_iter().filter(|&i| i < n).collect();
        let shuffled: Vec<_> = p.iter().map(|&i| v.slots()[i]).collect();
        let mut inversions = 0;
        for a in 0..n {
            for b in a + 1..n {
                if p[a] > p[b] && shuffled[a].1.is_odd() && shuffled[b].1.is_odd() {
                    inversions += 1;
                }
            }
        }
        let got = FockBasisVector::canonicalize(&shuffled, 3).unwrap();
        prop_assert_eq!(got, Some((inversions % 2 == 1, v)));
    }

    #[test]
    fn parity_follows_degree(raw in prop::collection::vec((0u32..3, letter()), 0..6)) {
        if let Some((_, v)) = FockBasisVector::canonicalize(&raw, 3).unwrap() {
            prop_assert_eq!(v.is_odd(), v.degree() % 2 == 1);
            let odd = v.slots().iter().filter(|s| s.1.is_odd()).count();
            prop_assert_eq!(v.is_odd(), odd % 2 == 1);
        }
    }

    #[test]
    fn operators_are_linear(
        kind in prop::sample::select(vec![OpKind::A, OpKind::F, OpKind::M, OpKind::H, OpKind::E]),
        index in 0u32..2,
        cap in letter(),
        x in 0usize..64, y in 0usize..64,
        s in -3i64..=3,
    ) {
        let eng: EngineQ = Engine::new(ModuliParams::new(2, G, 1).unwrap());
        let basis = eng.basis(1);
        let bv = |i: usize| FockStateQ::basis_vector(G, basis.get((i % basis.len()) as u32).clone());
        let tok = OperatorToken::letter(kind, index, G, cap);
        let sum = bv(x).add(&bv(y).scale(&q(s))).unwrap();
        let lhs = eng.apply(&tok, &sum).unwrap();
        let rhs = eng.apply(&tok, &bv(x)).unwrap().add(&eng.apply(&tok, &bv(y)).unwrap().scale(&q(s))).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
