//! Property tests: lattice laws, DNF round-trips, substitution laws and
//! printer round-trips on randomized types.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::TypeGen;
use setrow_core::dnf::{reassemble, to_summands};
use setrow_core::frontend;
use setrow_core::subst::{apply, compose, freshen};
use setrow_core::subtype::{is_equiv, is_subtype};
use setrow_core::types::{Kind, Tail, TypeStore};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_laws(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 3);
        let s = g.ty(&mut st, &mut rng, 3);
        prop_assert!(is_subtype(&mut st, t, t));
        let meet = st.mk_and(t, s).unwrap();
        prop_assert!(is_subtype(&mut st, meet, t));
        let join = st.mk_or(t, s).unwrap();
        prop_assert!(is_subtype(&mut st, t, join));
        let nn = {
            let n = st.mk_not(t);
            st.mk_not(n)
        };
        prop_assert!(is_equiv(&mut st, nn, t));
        // De Morgan.
        let not_join = st.mk_not(join);
        let nt = st.mk_not(t);
        let ns = st.mk_not(s);
        let meet_nots = st.mk_and(nt, ns).unwrap();
        prop_assert!(is_equiv(&mut st, not_join, meet_nots));
        let not_meet = st.mk_not(meet);
        let join_nots = st.mk_or(nt, ns).unwrap();
        prop_assert!(is_equiv(&mut st, not_meet, join_nots));
    }

    #[test]
    fn transitivity_on_constructed_chains(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = g.subtype_pair(&mut st, &mut rng, 3);
        let c = {
            let extra = g.ty(&mut st, &mut rng, 3);
            st.mk_or(b, extra).unwrap()
        };
        prop_assert!(is_subtype(&mut st, a, b));
        prop_assert!(is_subtype(&mut st, b, c));
        prop_assert!(is_subtype(&mut st, a, c));
    }

    #[test]
    fn dnf_round_trip(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 4);
        let summands = to_summands(&mut st, t);
        let back = reassemble(&mut st, &Kind::Type, &summands);
        prop_assert!(is_equiv(&mut st, t, back), "dnf of {} lost meaning", st.debug_node(t));
    }

    #[test]
    fn substitution_preserves_subtyping(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t1, t2) = g.subtype_pair(&mut st, &mut rng, 3);
        let both = st.mk_or(t1, t2).unwrap();
        let sub = g.subst_for(&mut st, &mut rng, both, 2);
        let s1 = apply(&mut st, &sub, t1).unwrap();
        let s2 = apply(&mut st, &sub, t2).unwrap();
        prop_assert!(
            is_subtype(&mut st, s1, s2),
            "subtyping lost: {} vs {}",
            st.debug_node(s1),
            st.debug_node(s2)
        );
    }

    #[test]
    fn substitution_preserves_kinds(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 3);
        let sub = g.subst_for(&mut st, &mut rng, t, 2);
        let out = apply(&mut st, &sub, t).unwrap();
        prop_assert_eq!(st.kind(out), Kind::Type);
        prop_assert!(st.kind_check(out).is_ok());
    }

    #[test]
    fn compose_equals_sequential_application(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 3);
        let s1 = g.subst_for(&mut st, &mut rng, t, 2);
        let mid = apply(&mut st, &s1, t).unwrap();
        let s2 = g.subst_for(&mut st, &mut rng, mid, 2);
        let seq = apply(&mut st, &s2, mid).unwrap();
        let c = compose(&mut st, &s2, &s1).unwrap();
        let once = apply(&mut st, &c, t).unwrap();
        prop_assert!(is_equiv(&mut st, seq, once));
    }

    #[test]
    fn freshen_produces_disjoint_copies(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 3);
        let (c1, _) = freshen(&mut st, t, &BTreeSet::new()).unwrap();
        let (c2, _) = freshen(&mut st, t, &BTreeSet::new()).unwrap();
        let v1 = st.vars_of(c1);
        let v2 = st.vars_of(c2);
        prop_assert!(v1.intersection(&v2).next().is_none());
    }

    #[test]
    fn print_parse_round_trip(seed in 0u64..10_000) {
        let mut st = TypeStore::new();
        let g = TypeGen::new(&mut st);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = g.ty(&mut st, &mut rng, 3);
        let printed = frontend::print(&mut st, t);
        let back = frontend::parse_type(&mut st, &printed)
            .unwrap_or_else(|e| panic!("`{}` does not re-parse: {}", printed, e));
        prop_assert!(is_equiv(&mut st, t, back), "`{}` re-parses differently", printed);
    }
}

#[test]
fn emptiness_memo_never_flips() {
    // Re-deciding the same nodes after unrelated work returns the same
    // verdicts (the decided cache is monotone).
    let mut st = TypeStore::new();
    let g = TypeGen::new(&mut st);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nodes = Vec::new();
    for _ in 0..40 {
        nodes.push(g.ty(&mut st, &mut rng, 3));
    }
    let first: Vec<bool> = nodes
        .iter()
        .map(|&n| setrow_core::subtype::is_empty(&mut st, n))
        .collect();
    for _ in 0..40 {
        let t = g.ty(&mut st, &mut rng, 3);
        let _ = setrow_core::subtype::is_empty(&mut st, t);
    }
    let second: Vec<bool> = nodes
        .iter()
        .map(|&n| setrow_core::subtype::is_empty(&mut st, n))
        .collect();
    assert_eq!(first, second);
}

#[test]
fn record_operators_on_negation_heavy_types() {
    // Stress the two record type operators on types whose DNF mixes
    // positive atoms, negatives and variable-only summands.
    use setrow_core::typing::{del_field, sel_type};
    let mut st = TypeStore::new();
    let g = TypeGen::new(&mut st);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let l = g.labels[0];
    let any = st.any();
    let probe = st.mk_record(vec![(l, any)], Tail::Open).unwrap();
    let top_rec = st.top_record();
    let mut sel_cases = 0usize;
    let mut del_cases = 0usize;
    for _ in 0..400 {
        let t = g.ty(&mut st, &mut rng, 3);
        if is_subtype(&mut st, t, probe) {
            sel_cases += 1;
            let sel = sel_type(&mut st, t, l).unwrap();
            // Correctness of the bound and its minimality against t.l itself.
            let back = st.mk_record(vec![(l, sel)], Tail::Open).unwrap();
            assert!(is_subtype(&mut st, t, back));
        }
        if is_subtype(&mut st, t, top_rec) {
            del_cases += 1;
            let extra = g.record(&mut st, &mut rng, 1);
            let wide = st.mk_or(t, extra).unwrap();
            let d1 = del_field(&mut st, t, l).unwrap();
            let d2 = del_field(&mut st, wide, l).unwrap();
            assert!(is_subtype(&mut st, d1, d2));
        }
    }
    assert!(
        sel_cases > 10 && del_cases > 10,
        "{} / {}",
        sel_cases,
        del_cases
    );
}
