//! Acceptance suite. One line per criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use quot_yangian::curve::dual_basis_pairs;
use quot_yangian::fock::poincare_closed_form;
use quot_yangian::relations::*;
use quot_yangian::*;

// every comparison below is exact; only wall-clock budgets carry a tolerance
const BETTI_BUDGET: Duration = Duration::from_secs(60);
const RELATION_BUDGET: Duration = Duration::from_secs(600);
const CONFLUENCE_EVALS: u64 = 1000;
const MIN_MUTATIONS: usize = 6;

fn grid() -> Vec<ModuliParams> {
    let mut out = Vec::new();
    for r in [1, 2] {
        for g in [0, 1, 2] {
            for n in [0, 1, 3] {
                out.push(ModuliParams::new(r, g, n).unwrap());
            }
        }
    }
    out
}

fn d_max(p: &ModuliParams) -> usize {
    if p.rank == 1 {
        3
    } else {
        2
    }
}

fn engine(p: ModuliParams) -> EngineQ {
    Engine::new(p)
}

fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

fn betti() -> Result<String, String> {
    let t = Instant::now();
    for r in [1, 2, 3] {
        for g in [0, 1, 2] {
            let dm = if r == 3 { 3 } else { 5 };
            let closed = poincare_closed_form(r, g, dm);
            for (d, want) in closed.iter().enumerate() {
                let got = Basis::enumerate(r, g, d).graded_dims();
                if &got != want {
                    return Err(format!("r={r} g={g} d={d}: enumerated {got:?}, closed form {want:?}"));
                }
            }
        }
    }
    let spot = |r, g, d| Basis::enumerate(r, g, d).graded_dims();
    if spot(2, 0, 1) != [1, 0, 2, 0, 1] || spot(1, 1, 2) != [1, 2, 2, 2, 1] {
        return Err("spot values".into());
    }
    let el = t.elapsed();
    if el > BETTI_BUDGET {
        return Err(format!("took {el:?}"));
    }
    Ok(format!("9 (r,g) pairs, {el:.2?}"))
}

fn relations() -> Result<String, String> {
    let t = Instant::now();
    let mut tested = 0;
    for p in grid() {
        let eng = engine(p);
        for id in RelationId::YANGIAN {
            let case = RelationCase::new(id, p, d_max(&p), 2 * p.rank + 2);
            let rep = check_relation(&eng, &case, None).map_err(|e| e.to_string())?;
            if !rep.passed() {
                return Err(format!("{id} at {p:?}: {:?}", rep.first_failure));
            }
            tested += rep.tested;
        }
    }
    let el = t.elapsed();
    if el > RELATION_BUDGET {
        return Err(format!("took {el:?}"));
    }
    Ok(format!("{tested} comparisons over 18 grid points, {el:.2?}"))
}

fn fa_rule() -> Result<String, String> {
    let mut tested = 0;
    for p in grid() {
        let eng = engine(p);
        let rep = check_fa_restricted(&eng, 3).map_err(|e| e.to_string())?;
        if !rep.passed() {
            return Err(format!("{p:?}: {:?}", rep.first_failure));
        }
        tested += rep.tested;
    }
    Ok(format!("{tested} comparisons, d ≤ 3"))
}

fn truncation() -> Result<String, String> {
    for p in grid() {
        let eng = engine(p);
        if !check_truncation(&eng, 3).map_err(|e| e.to_string())? {
            return Err(format!("{p:?}"));
        }
        if !check_mult_identity(&eng, 3, 2 * p.rank + 2).map_err(|e| e.to_string())?.passed() {
            return Err(format!("multiplication identity at {p:?}"));
        }
    }
    Ok("z^-1..z^-5 vanish, d ≤ 3".into())
}

fn vacuum() -> Result<String, String> {
    for p in grid() {
        let eng = engine(p);
        if !check_vacuum(&eng, 3, 2 * p.rank + 2).map_err(|e| e.to_string())? {
            return Err(format!("{p:?}"));
        }
    }
    let p = ModuliParams::new(1, 0, 3).unwrap();
    let eng = engine(p);
    let word = OperatorWord::new(vec![
        OperatorToken::letter(OpKind::F, 1, 0, CurveLetter::Unit),
        OperatorToken::letter(OpKind::A, 0, 0, CurveLetter::Unit),
    ]);
    let out = eng.act_word(&word, &FockStateQ::vacuum(0)).map_err(|e| e.to_string())?;
    if out != FockStateQ::vacuum(0).scale(&q(3)) {
        return Err(format!("f_1(1) a_0(1)|0> = {out}"));
    }
    Ok("f_1(1) a_0(1)|0> = 3|0> at r=1, n=3".into())
}

fn curve_invariants() -> Result<String, String> {
    let mut checked = 0;
    for g in 0..=2 {
        let letters = CurveLetter::all(g);
        let delta = CurveClassQ::diagonal_class(g, "x", "y").unwrap();
        let lab = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let xyz = lab(&["x", "y", "z"]);
        let delta3 = delta.extend_to(&xyz).unwrap();

        // ∫_y δ(x,y)·m(y,z) = m(x,z) for every monomial m
        for &u in &letters {
            for &v in &letters {
                let m = CurveClassQ::monomial(g, ["y", "z"], vec![u, v], q(1)).unwrap();
                let got = delta3.mul(&m.extend_to(&xyz).unwrap()).unwrap().integrate("y").unwrap();
                let want = CurveClassQ::monomial(g, ["x", "z"], vec![u, v], q(1)).unwrap();
                if got != want {
                    return Err(format!("correspondence g={g} {u}⊗{v}: {got}"));
                }
                checked += 1;
            }
        }

        // δ·(δ + K_C) = 0
        let k = CurveClassQ::canonical_class(g, "x").extend_to(&lab(&["x", "y"])).unwrap();
        let prod = delta.mul(&delta.add(&k).unwrap()).unwrap();
        if !prod.is_zero() {
            return Err(format!("δ(δ+K) at g={g}: {prod}"));
        }

        // δ rebuilt from the dual of each letter, and ∫∫ δ·(u⊗v) = ∫ u·v
        let mut rebuilt = CurveClassQ::zero(g, lab(&["x", "y"])).unwrap();
        for &b in &letters {
            let (neg, dual) = b.dual();
            let c = if neg { q(-1) } else { q(1) };
            rebuilt = rebuilt.add(&CurveClassQ::monomial(g, ["x", "y"], vec![dual, b], c).unwrap()).unwrap();
        }
        if rebuilt != delta || dual_basis_pairs(g).len() != letters.len() {
            return Err(format!("reconstruction g={g}"));
        }
        for &u in &letters {
            for &v in &letters {
                let uv = CurveClassQ::monomial(g, ["x", "y"], vec![u, v], q(1)).unwrap();
                let lhs = delta.mul(&uv).unwrap().integrate_all();
                let rhs = match u.mul(v) {
                    Some((neg, w)) => q(w.integral()) * if neg { q(-1) } else { q(1) },
                    None => q(0),
                };
                if lhs != rhs {
                    return Err(format!("pairing g={g} {u},{v}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} monomial identities, g ≤ 2"))
}

fn confluence() -> Result<String, String> {
    let seeds: Vec<u64> = (0..8).collect();
    let mut total = 0;
    for p in grid() {
        let rep = check_confluence::<Q>(p, &seeds, CONFLUENCE_EVALS as usize / seeds.len(), d_max(&p), 10_000_000);
        if rep.evaluations < CONFLUENCE_EVALS || rep.mismatches > 0 || rep.fuel_exhaustions > 0 {
            return Err(format!("{p:?}: {rep:?}"));
        }
        total += rep.evaluations;
    }
    Ok(format!("{total} evaluations, 0 mismatches, 0 fuel exhaustions"))
}

fn pairing() -> Result<String, String> {
    for r in [1, 2] {
        for g in [0, 1] {
            for n in [0, 1, 3] {
                let eng = engine(ModuliParams::new(r, g, n).unwrap());
                for d in 0..=3 {
                    let m = pairing_matrix(&eng, d).map_err(|e| e.to_string())?;
                    if m.rank() != m.cols() || !pairing_is_triangular(&eng, d, &m) {
                        return Err(format!("r={r} g={g} n={n} d={d}: rank {} of {}", m.rank(), m.cols()));
                    }
                }
            }
        }
    }
    Ok("full rank and triangular, d ≤ 3".into())
}

fn mutations() -> Result<String, String> {
    let p = ModuliParams::new(2, 1, 1).unwrap();
    let eng = engine(p);
    let cases = [
        (RelationId::EE, 0),
        (RelationId::EE, 1),
        (RelationId::FF, 0),
        (RelationId::FF, 1),
        (RelationId::ME, 0),
        (RelationId::ME, 1),
        (RelationId::FM, 0),
        (RelationId::FM, 1),
        (RelationId::EF, 0),
        (RelationId::Mult, 0),
        (RelationId::Mult, 1),
    ];
    let mut caught = 0;
    let mut missed = Vec::new();
    for (id, term) in cases {
        let case = RelationCase::new(id, p, 2, 2 * p.rank + 2);
        let rep = check_relation(&eng, &case, Some(Mutation { term })).map_err(|e| e.to_string())?;
        if rep.passed() {
            missed.push(format!("{id}#{term}"));
        } else {
            caught += 1;
        }
    }
    if caught < MIN_MUTATIONS || !missed.is_empty() {
        return Err(format!("caught {caught}, missed {missed:?}"));
    }
    Ok(format!("{caught}/{} mutations caught", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Result<String, String>); 9] = [
        ("Betti agreement", betti),
        ("Yangian relations", relations),
        ("[f,a] restricted vs general", fa_rule),
        ("truncation of c(V,z+K)M(z)^-1", truncation),
        ("vacuum formulas", vacuum),
        ("curve invariants", curve_invariants),
        ("confluence", confluence),
        ("pairing non-degeneracy", pairing),
        ("mutation sensitivity", mutations),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match f() {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg}) [{:.2?}]", i + 1, t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg}) [{:.2?}]", i + 1, t.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
