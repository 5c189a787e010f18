//! Cross-validation of the brute-force oracles against the engine.

mod common;

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use setrow_core::oracle::{
    gen_instances, naive_decompose, naive_empty_arrow, naive_empty_row, Bounds,
};
use setrow_core::subtype::{empty_arrow, is_empty, is_subtype};
use setrow_core::types::{Basic, Kind, Label, NodeId, Tail, TypeStore};

fn basics_only_type(st: &mut TypeStore, rng: &mut ChaCha8Rng, depth: usize) -> NodeId {
    if depth == 0 || rng.gen_bool(0.5) {
        return match rng.gen_range(0..6) {
            0 => st.mk_basic(Basic::Int),
            1 => st.mk_basic(Basic::Str),
            2 => st.mk_bool(),
            3 => st.mk_basic(Basic::True),
            4 => st.any(),
            _ => st.bottom(),
        };
    }
    let a = basics_only_type(st, rng, depth - 1);
    let b = basics_only_type(st, rng, depth - 1);
    match rng.gen_range(0..3) {
        0 => st.mk_or(a, b).unwrap(),
        1 => st.mk_and(a, b).unwrap(),
        _ => st.mk_not(a),
    }
}

#[test]
fn arrow_formula_agrees_with_engine() {
    let mut st = TypeStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let mk = |st: &mut TypeStore, rng: &mut ChaCha8Rng| {
            let d = basics_only_type(st, rng, 1);
            let c = basics_only_type(st, rng, 1);
            st.mk_arrow(d, c).unwrap()
        };
        let pos: Vec<NodeId> = (0..rng.gen_range(0..=2))
            .map(|_| mk(&mut st, &mut rng))
            .collect();
        let neg: Vec<NodeId> = (0..rng.gen_range(0..=2))
            .map(|_| mk(&mut st, &mut rng))
            .collect();
        let naive = naive_empty_arrow(&st, &pos, &neg);
        let engine = empty_arrow(&mut st, &pos, &neg);
        assert_eq!(
            naive,
            engine,
            "pos={:?} neg={:?}",
            pos.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>(),
            neg.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>()
        );
    }
}

#[test]
fn intersection_of_arrows_below_arrow_of_unions() {
    // Frozen from the quantified formula: the intersection of int->int and
    // bool->bool sits below (int|bool) -> (int|bool).
    let mut st = TypeStore::new();
    let i = st.mk_basic(Basic::Int);
    let b = st.mk_bool();
    let ii = st.mk_arrow(i, i).unwrap();
    let bb = st.mk_arrow(b, b).unwrap();
    let u = st.mk_or(i, b).unwrap();
    let uu = st.mk_arrow(u, u).unwrap();
    assert!(naive_empty_arrow(&st, &[ii, bb], &[uu]));
    assert!(empty_arrow(&mut st, &[ii, bb], &[uu]));
}

#[test]
fn decompose_over_empty_label_set_is_a_single_branch() {
    let mut st = TypeStore::new();
    let a = st.label("a");
    let i = st.mk_basic(Basic::Int);
    let fi = st.as_field(i).unwrap();
    let atom = st
        .mk_row_atom([(a, fi)].into(), Tail::Closed, BTreeSet::new())
        .unwrap();
    let branches = naive_decompose(&mut st, &[atom], &[atom], &BTreeSet::new()).unwrap();
    assert_eq!(branches.len(), 1);
    assert!(branches[0].label_conditions.is_empty());
    // r <= r holds, so the single branch must be satisfied.
    assert!(branches[0].clone().holds(&mut st));
}

#[test]
fn decompose_componentwise_instance_is_not_discharged() {
    // The component-wise instance over {log, succ, val}: the intersection
    // with the negated union is inhabited, so at least one branch fails.
    let mut st = TypeStore::new();
    let log = st.label("log");
    let succ = st.label("succ");
    let val = st.label("val");
    let s = st.mk_basic(Basic::Str);
    let tt = st.mk_basic(Basic::True);
    let ff = st.mk_basic(Basic::False);
    let any = st.any();
    let fs = st.as_field(s).unwrap();
    let ft = st.as_field(tt).unwrap();
    let ffl = st.as_field(ff).unwrap();
    let fany = st.as_field(any).unwrap();
    let u = st.undef();
    let none: BTreeSet<Label> = BTreeSet::new();
    let row1 = st
        .mk_row_atom(
            [(log, fs), (succ, ft), (val, fany)].into(),
            Tail::Closed,
            none.clone(),
        )
        .unwrap();
    let row2 = st
        .mk_row_atom(
            [(log, fs), (succ, ffl), (val, u)].into(),
            Tail::Closed,
            none.clone(),
        )
        .unwrap();
    let rho = st.var("rho", Kind::Row(BTreeSet::from([val])));
    let ftop = st.field_top();
    let lhs = st
        .mk_row_atom([(val, ftop)].into(), Tail::Var(rho), none)
        .unwrap();
    let labels = BTreeSet::from([log, succ, val]);
    let branches = naive_decompose(&mut st, &[lhs], &[row1, row2], &labels).unwrap();
    let all_hold = branches.clone().iter().all(|b| b.clone().holds(&mut st));
    assert!(
        !all_hold,
        "the intersection is inhabited, some branch must fail"
    );
    // Engine agreement: the intersection really is non-empty.
    let n1 = st.mk_not(row1);
    let n2 = st.mk_not(row2);
    let t = st.mk_and(lhs, n1).unwrap();
    let t = st.mk_and(t, n2).unwrap();
    assert!(!is_empty(&mut st, t));
}

#[test]
fn decompose_equivalence_on_random_instances() {
    let mut st = TypeStore::new();
    let bounds = Bounds::default();
    let instances = gen_instances(&mut st, &bounds, 77, 60);
    for inst in &instances {
        if inst.pos.is_empty() && inst.neg.is_empty() {
            continue;
        }
        // Rows with index 0 mirror the records.
        let pos: Vec<NodeId> = inst.pos.iter().map(|&p| st.rectorow(p).unwrap()).collect();
        let neg: Vec<NodeId> = inst.neg.iter().map(|&q| st.rectorow(q).unwrap()).collect();
        let mut labels: BTreeSet<Label> = BTreeSet::new();
        for &n in pos.iter().chain(neg.iter()) {
            let (fields, _, _) = st.atom_parts(n).unwrap();
            labels.extend(fields.keys().copied());
        }
        let branches = naive_decompose(&mut st, &pos, &neg, &labels).unwrap();
        let all_hold = branches.clone().iter().all(|b| b.clone().holds(&mut st));
        let mut parts: Vec<NodeId> = pos.clone();
        for &q in &neg {
            parts.push(st.mk_not(q));
        }
        let whole = st.mk_and_all(&Kind::Row(BTreeSet::new()), &parts).unwrap();
        let engine = is_empty(&mut st, whole);
        assert_eq!(
            all_hold,
            engine,
            "decomposition disagrees on pos={:?} neg={:?}",
            pos.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>(),
            neg.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>()
        );
    }
}

#[test]
fn zero_negative_instances_need_empty_positive() {
    let mut st = TypeStore::new();
    let bounds = Bounds {
        max_neg: 0,
        ..Bounds::default()
    };
    let instances = gen_instances(&mut st, &bounds, 5, 40);
    for inst in &instances {
        let engine = setrow_core::subtype::empty_record(&mut st, &inst.pos, &inst.neg, &inst.vp);
        // With no negatives, emptiness can only come from the merged fields.
        if engine {
            let mut parts = inst.pos.clone();
            let whole = {
                parts.push(st.top_record());
                st.mk_and_all(&Kind::Type, &parts).unwrap()
            };
            assert!(is_empty(&mut st, whole));
        }
    }
}

#[test]
fn derived_variable_algebra() {
    let mut st = TypeStore::new();
    let a = st.label("a");
    let b = st.label("b");
    let c = st.label("c");
    let rho = st.var("rho", Kind::Row(BTreeSet::from([a])));
    // rho \ {} is rho.
    assert_eq!(st.derived_cut_var(rho, &BTreeSet::new()), rho);
    // Cutting labels outside the definition space is the identity.
    assert_eq!(st.derived_cut_var(rho, &BTreeSet::from([a])), rho);
    // (rho \ L1) \ L2 is rho \ (L1 u L2).
    let c1 = st.derived_cut_var(rho, &BTreeSet::from([b]));
    let c2 = st.derived_cut_var(c1, &BTreeSet::from([c]));
    let direct = st.derived_cut_var(rho, &BTreeSet::from([b, c]));
    assert_eq!(c2, direct);
    // (rho \ L).l collapses onto rho.l.
    let p1 = st.derived_field_var(c1, c);
    let p2 = st.derived_field_var(rho, c);
    assert_eq!(p1, p2);
}

#[test]
fn iota_enumeration_matches_subtype_on_two_row_variables() {
    let mut st = TypeStore::new();
    let a = st.label("a");
    let i = st.mk_basic(Basic::Int);
    let excl = BTreeSet::from([a]);
    let r1 = st.var("r1", Kind::Row(excl.clone()));
    let r2 = st.var("r2", Kind::Row(excl));
    let t1 = st.mk_record(vec![(a, i)], Tail::Var(r1)).unwrap();
    let t2 = st.mk_record(vec![(a, i)], Tail::Var(r2)).unwrap();
    assert!(!naive_empty_row(&mut st, &[t1], &[t2]).unwrap());
    assert!(!is_subtype(&mut st, t1, t2));
}

#[test]
fn phi_matches_oracle_on_proper_row_kinds() {
    // The same comparison as the record-world one, but over rows with a
    // nonempty excluded set, obtained by cutting generated instances.
    let mut st = TypeStore::new();
    let bounds = Bounds::default();
    let instances = gen_instances(&mut st, &bounds, 123, 300);
    let extra = st.label("z");
    let cut = BTreeSet::from([extra]);
    let mut compared = 0usize;
    for inst in &instances {
        if !inst.vp.is_empty() {
            continue; // context atoms live in the record world
        }
        let mut pos = Vec::new();
        for &p in &inst.pos {
            let r = st.rectorow(p).unwrap();
            pos.push(setrow_core::oracle::cutrow_plain(&mut st, r, &cut).unwrap());
        }
        let mut neg = Vec::new();
        for &q in &inst.neg {
            let r = st.rectorow(q).unwrap();
            neg.push(setrow_core::oracle::cutrow_plain(&mut st, r, &cut).unwrap());
        }
        let mut parts: Vec<NodeId> = pos.clone();
        for &q in &neg {
            parts.push(st.mk_not(q));
        }
        let whole = st.mk_and_all(&Kind::Row(cut.clone()), &parts).unwrap();
        let engine = is_empty(&mut st, whole);
        let naive = naive_empty_row(&mut st, &pos, &neg).unwrap();
        assert_eq!(
            engine,
            naive,
            "row-kind disagreement: pos={:?} neg={:?}",
            pos.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>(),
            neg.iter().map(|&n| st.debug_node(n)).collect::<Vec<_>>()
        );
        compared += 1;
    }
    assert!(compared > 100, "only {} comparisons", compared);
}
