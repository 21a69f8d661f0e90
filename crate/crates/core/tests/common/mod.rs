#![allow(dead_code)]

use polybound::flow::{build_aux_graph, decompose_flows, FlowSolution, PathDecomposition};
use polybound::rational::q;
use polybound::reductions::ReductionTrace;
use polybound::{classify, DegreeConstraint, Instance, Rational, VarSet};

pub fn set(n: usize, vars: &[usize]) -> VarSet {
    VarSet::from_vars(n, vars.iter().copied())
}

/// The four-variable running example over `a, b, c, d`.
pub fn run4() -> Instance {
    Instance::from_triples(
        4,
        &[(&[], &[0, 1], q(1, 1)), (&[], &[1, 2], q(2, 1)), (&[], &[0, 2], q(1, 1)), (&[0], &[0, 3], q(1, 1))],
    )
    .unwrap()
    .with_names(["a", "b", "c", "d"].map(String::from).to_vec())
    .unwrap()
}

pub fn gap2() -> Instance {
    Instance::from_triples(2, &[(&[], &[1], q(1, 1)), (&[1], &[0, 1], q(1, 1))]).unwrap()
}

pub fn tri3() -> Instance {
    Instance::from_triples(3, &[(&[], &[0, 1], q(1, 1)), (&[], &[1, 2], q(1, 1)), (&[], &[0, 2], q(1, 1))]).unwrap()
}

/// The hand-picked optimal flow for the running example: capacities
/// `(1, 0, 1, 1)` and one path per sink.
pub fn run4_golden() -> (Instance, FlowSolution, PathDecomposition) {
    let inst = run4();
    let s = |v: &[usize]| set(4, v);
    let one = || q(1, 1);
    let paths = vec![
        vec![(vec![s(&[]), s(&[0, 1]), s(&[0])], one())],
        vec![(vec![s(&[]), s(&[0, 1]), s(&[1])], one())],
        vec![(vec![s(&[]), s(&[0, 2]), s(&[2])], one())],
        vec![(vec![s(&[]), s(&[0, 1]), s(&[0]), s(&[0, 3]), s(&[3])], one())],
    ];
    let delta = vec![one(), q(0, 1), one(), one()];
    let sol = FlowSolution::from_paths(&inst, delta, &paths).unwrap();
    let graph = build_aux_graph(&inst).unwrap();
    let dec = decompose_flows(&inst, &sol, &graph).unwrap();
    (inst, sol, dec)
}

/// Minimum of `sum c_j w_j` subject to `sum_{j: v in Y_j} w_j >= 1` for every
/// variable and `w >= 0`, by enumerating the vertices of the feasible
/// region. Only for cardinality constraints that cover every variable.
pub fn fractional_edge_cover(inst: &Instance) -> Rational {
    let (n, k) = (inst.n(), inst.k());
    // Constraint rows: covering rows first, then w_j >= 0.
    let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for v in 0..n {
        let a = inst.constraints().iter().map(|dc| if dc.y.contains(v) { q(1, 1) } else { q(0, 1) }).collect();
        rows.push((a, q(1, 1)));
    }
    for j in 0..k {
        let mut a = vec![q(0, 1); k];
        a[j] = q(1, 1);
        rows.push((a, q(0, 1)));
    }
    let mut best: Option<Rational> = None;
    for tight in combinations(rows.len(), k) {
        let Some(w) = solve_square(&tight.iter().map(|&r| rows[r].clone()).collect::<Vec<_>>()) else {
            continue;
        };
        let feasible = rows.iter().all(|(a, b)| a.iter().zip(&w).map(|(x, y)| x * y).sum::<Rational>() >= *b);
        if feasible {
            let obj: Rational = inst.constraints().iter().zip(&w).map(|(dc, x)| &dc.c * x).sum();
            if best.as_ref().is_none_or(|b| obj < *b) {
                best = Some(obj);
            }
        }
    }
    best.expect("a covering instance has a feasible vertex")
}

fn combinations(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, r, cur, out);
            cur.pop();
        }
    }
    go(0, m, r, &mut cur, &mut out);
    out
}

/// Gauss-Jordan elimination; `None` when the system is singular.
fn solve_square(rows: &[(Vec<Rational>, Rational)]) -> Option<Vec<Rational>> {
    let k = rows.len();
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for col in 0..k {
        let p = (col..k).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, p);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..k {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..=k {
                    let d = &m[col][c] * &f;
                    m[r][c] = &m[r][c] - &d;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[k].clone()).collect())
}

/// Instances with `n <= max_n`, `1..=max_k` constraints, `|X| <= max_x` and
/// coefficients in halves from 0 to 4.
pub fn arb_instance(max_n: usize, max_k: usize, max_x: usize) -> impl proptest::strategy::Strategy<Value = Instance> {
    use proptest::prelude::*;
    (1..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec((0u64..1 << n, 0u64..1 << n, 0i64..=8), 1..=max_k)
            .prop_map(move |raw| build(n, max_x, &raw))
    })
}

pub fn build(n: usize, max_x: usize, raw: &[(u64, u64, i64)]) -> Instance {
    let full = (1u64 << n) - 1;
    let cs = raw
        .iter()
        .map(|&(xb, yb, c)| {
            let mut x = xb;
            while x.count_ones() as usize > max_x || x == full {
                x &= x - 1;
            }
            let mut y = x | yb;
            if y == x {
                y |= 1 << (!x).trailing_zeros();
            }
            DegreeConstraint::new(VarSet::from_bits(n, x), VarSet::from_bits(n, y), q(c, 2)).unwrap()
        })
        .collect();
    Instance::new(n, cs).unwrap()
}

/// Non-added constraints read first copies and write second copies, so
/// they are acyclic; added ones are two-variable functional dependencies.
pub fn copy_shape(t: &ReductionTrace) -> bool {
    let n = t.original.n();
    let firsts = (1u64 << n) - 1;
    let tags = classify(&t.reduced).constraints;
    t.reduced.constraints().iter().enumerate().all(|(i, dc)| {
        if t.added_consistency.contains(&i) {
            tags[i].fd && dc.y.len() == 2
        } else {
            dc.x.bits() & !firsts == 0 && dc.y.difference(dc.x).bits() & firsts == 0
        }
    })
}

pub fn two_three_shape(t: &ReductionTrace) -> bool {
    t.reduced
        .constraints()
        .iter()
        .all(|dc| dc.x.len() <= 2 && dc.y.difference(dc.x).len() <= 1 && (dc.x.len() < 2 || dc.is_fd()))
}

pub fn simple_fd_shape(t: &ReductionTrace) -> bool {
    classify(&t.reduced).constraints.iter().all(|tag| tag.simple || tag.fd)
}
