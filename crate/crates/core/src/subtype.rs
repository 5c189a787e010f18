//! Emptiness and subtyping of types, field-types and rows.
//!
//! Subtyping reduces to emptiness: `t1 <= t2` iff `t1 & !t2` is empty.
//! Emptiness works on the DNF, world by world. Basic and arrow worlds use
//! the classic decompositions; the record/row world goes through the
//! preprocessing that isolates row variables and then through `phi`.
//!
//! Coinductive memoization: a node whose emptiness check is in progress is
//! assumed empty on re-entry. Negative verdicts are cached globally (extra
//! hypotheses only ever help proving emptiness, so a failure under
//! hypotheses is a real failure); positive verdicts are cached when the
//! check started with no pending hypotheses, so the proof is self-contained.

use std::collections::{BTreeMap, BTreeSet};

use crate::dnf::{field_dnf, to_summands, FieldPart, Summand};
use crate::types::{Basic, Body, Kind, Label, NodeId, Tail, TypeStore, VarId, BASICS};

/// In-progress hypothesis set for the coinductive check.
#[derive(Default)]
pub struct EmptinessMemo {
    assumed: BTreeSet<NodeId>,
}

/// A record or row atom reduced to what emptiness needs.
#[derive(Debug, Clone)]
pub struct AtomView {
    pub id: NodeId,
    pub fields: BTreeMap<Label, NodeId>,
    pub tail: Tail,
}

impl AtomView {
    pub fn of(st: &TypeStore, n: NodeId) -> AtomView {
        match st.body(n) {
            Body::Record(fields, tail) => AtomView {
                id: n,
                fields: fields.clone(),
                tail: *tail,
            },
            Body::RowAtom(fields, tail, _) => AtomView {
                id: n,
                fields: fields.clone(),
                tail: *tail,
            },
            b => panic!("not an atom: {:?}", b),
        }
    }

    /// `R(l)` with the tail's default for labels not listed.
    pub fn field(&self, st: &TypeStore, l: Label) -> NodeId {
        match self.fields.get(&l) {
            Some(&f) => f,
            None => match self.tail {
                Tail::Closed => st.undef(),
                Tail::Open | Tail::Var(_) => st.field_top(),
            },
        }
    }
}

/// Emptiness of any term; dispatches on the kind of `n`.
pub fn is_empty(st: &mut TypeStore, n: NodeId) -> bool {
    let mut memo = EmptinessMemo::default();
    empty_node(st, n, &mut memo)
}

/// `t1 <= t2` for two terms of the same kind (types, field-types, or rows
/// over the same definition space).
pub fn is_subtype(st: &mut TypeStore, t1: NodeId, t2: NodeId) -> bool {
    let d = st
        .mk_diff(t1, t2)
        .expect("is_subtype: operands of the same kind");
    is_empty(st, d)
}

pub fn is_equiv(st: &mut TypeStore, t1: NodeId, t2: NodeId) -> bool {
    is_subtype(st, t1, t2) && is_subtype(st, t2, t1)
}

pub(crate) fn empty_node(st: &mut TypeStore, n: NodeId, memo: &mut EmptinessMemo) -> bool {
    if let Some(&v) = st.empty_decided.get(&n) {
        return v;
    }
    if memo.assumed.contains(&n) {
        return true;
    }
    let self_contained = memo.assumed.is_empty();
    memo.assumed.insert(n);
    let r = compute_empty(st, n, memo);
    memo.assumed.remove(&n);
    if !r || self_contained {
        let prev = st.empty_decided.insert(n, r);
        debug_assert!(
            prev.is_none() || prev == Some(r),
            "emptiness verdict flipped"
        );
    }
    r
}

fn compute_empty(st: &mut TypeStore, n: NodeId, memo: &mut EmptinessMemo) -> bool {
    match st.kind(n) {
        Kind::Type => {
            let summands = to_summands(st, n);
            summands.iter().all(|s| type_summand_empty(st, s, memo))
        }
        Kind::Field => {
            let parts = field_dnf(st, n);
            parts.iter().all(|p| match p.part {
                FieldPart::Undef => false,
                FieldPart::Value(t) => empty_node(st, t, memo),
            })
        }
        Kind::Row(_) => {
            let summands = to_summands(st, n);
            summands.iter().all(|s| {
                let pos: Vec<AtomView> = s.pos.iter().map(|&p| AtomView::of(st, p)).collect();
                let neg: Vec<AtomView> = s.neg.iter().map(|&q| AtomView::of(st, q)).collect();
                atoms_empty(st, &pos, &neg, &BTreeSet::new(), memo)
            })
        }
    }
}

fn type_summand_empty(st: &mut TypeStore, s: &Summand, memo: &mut EmptinessMemo) -> bool {
    if s.pos.is_empty() {
        // No positive atom: the summand covers every world, each one must be
        // emptied by its own negatives.
        let neg_basic: Vec<Basic> = s
            .neg
            .iter()
            .filter_map(|&q| match st.body(q) {
                Body::Basic(b) => Some(*b),
                _ => None,
            })
            .collect();
        if !empty_basic(&[], &neg_basic) {
            return false;
        }
        let neg_arrow: Vec<(NodeId, NodeId)> = s
            .neg
            .iter()
            .filter_map(|&q| match st.body(q) {
                Body::Arrow(d, c) => Some((*d, *c)),
                _ => None,
            })
            .collect();
        if !empty_arrow_views(st, &[], &neg_arrow, memo) {
            return false;
        }
        let neg_rec: Vec<AtomView> = s
            .neg
            .iter()
            .filter_map(|&q| match st.body(q) {
                Body::Record(..) => Some(AtomView::of(st, q)),
                _ => None,
            })
            .collect();
        return atoms_empty(st, &[], &neg_rec, &BTreeSet::new(), memo);
    }
    match st.body(s.pos[0]).clone() {
        Body::Basic(_) => {
            let pos: Vec<Basic> = s
                .pos
                .iter()
                .map(|&p| match st.body(p) {
                    Body::Basic(b) => *b,
                    _ => unreachable!("single-world summand"),
                })
                .collect();
            let neg: Vec<Basic> = s
                .neg
                .iter()
                .filter_map(|&q| match st.body(q) {
                    Body::Basic(b) => Some(*b),
                    _ => None,
                })
                .collect();
            empty_basic(&pos, &neg)
        }
        Body::Arrow(..) => {
            let pos: Vec<(NodeId, NodeId)> = s
                .pos
                .iter()
                .map(|&p| match st.body(p) {
                    Body::Arrow(d, c) => (*d, *c),
                    _ => unreachable!(),
                })
                .collect();
            let neg: Vec<(NodeId, NodeId)> = s
                .neg
                .iter()
                .filter_map(|&q| match st.body(q) {
                    Body::Arrow(d, c) => Some((*d, *c)),
                    _ => None,
                })
                .collect();
            empty_arrow_views(st, &pos, &neg, memo)
        }
        Body::Record(..) => {
            let pos: Vec<AtomView> = s.pos.iter().map(|&p| AtomView::of(st, p)).collect();
            let neg: Vec<AtomView> = s.neg.iter().map(|&q| AtomView::of(st, q)).collect();
            atoms_empty(st, &pos, &neg, &BTreeSet::new(), memo)
        }
        b => panic!("unexpected positive atom {:?}", b),
    }
}

/// Emptiness of an intersection of basic literals under the fixed palette
/// (`int` and `str` infinite, `true`/`false` singletons; all disjoint).
pub fn empty_basic(pos: &[Basic], neg: &[Basic]) -> bool {
    let distinct: BTreeSet<Basic> = pos.iter().copied().collect();
    match distinct.len() {
        0 => BASICS.iter().all(|b| neg.contains(b)),
        1 => neg.contains(distinct.iter().next().unwrap()),
        _ => true,
    }
}

/// Public wrapper over arrow-world emptiness, for atom node lists.
pub fn empty_arrow(st: &mut TypeStore, pos: &[NodeId], neg: &[NodeId]) -> bool {
    let pv: Vec<(NodeId, NodeId)> = pos
        .iter()
        .map(|&p| match st.body(p) {
            Body::Arrow(d, c) => (*d, *c),
            b => panic!("not an arrow atom: {:?}", b),
        })
        .collect();
    let nv: Vec<(NodeId, NodeId)> = neg
        .iter()
        .map(|&q| match st.body(q) {
            Body::Arrow(d, c) => (*d, *c),
            b => panic!("not an arrow atom: {:?}", b),
        })
        .collect();
    let mut memo = EmptinessMemo::default();
    empty_arrow_views(st, &pv, &nv, &mut memo)
}

fn empty_arrow_views(
    st: &mut TypeStore,
    pos: &[(NodeId, NodeId)],
    neg: &[(NodeId, NodeId)],
    memo: &mut EmptinessMemo,
) -> bool {
    neg.iter().any(|&(s, s1)| {
        let n = pos.len();
        (0u32..(1 << n)).all(|mask| {
            // P' = the positives selected by the mask.
            let mut dom_parts = vec![s];
            for (i, &(d, _)) in pos.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    dom_parts.push(st.mk_not(d));
                }
            }
            let dom_meet = st.mk_and_all(&Kind::Type, &dom_parts).unwrap();
            if empty_node(st, dom_meet, memo) {
                return true;
            }
            if mask != (1 << n) - 1 {
                let mut cod_parts: Vec<NodeId> = pos
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) == 0)
                    .map(|(_, &(_, c))| c)
                    .collect();
                cod_parts.push(st.mk_not(s1));
                let cod_meet = st.mk_and_all(&Kind::Type, &cod_parts).unwrap();
                if empty_node(st, cod_meet, memo) {
                    return true;
                }
            }
            false
        })
    })
}

/// Emptiness of `/\ P & /\ !N [& /\ vp]` for record atoms (or row atoms over
/// one definition space). `extra_vp` adds bare positive row variables to the
/// context, as tallying and the test oracle need.
pub fn empty_record(
    st: &mut TypeStore,
    pos: &[NodeId],
    neg: &[NodeId],
    extra_vp: &BTreeSet<VarId>,
) -> bool {
    let pv: Vec<AtomView> = pos.iter().map(|&p| AtomView::of(st, p)).collect();
    let nv: Vec<AtomView> = neg.iter().map(|&q| AtomView::of(st, q)).collect();
    let mut memo = EmptinessMemo::default();
    atoms_empty(st, &pv, &nv, extra_vp, &mut memo)
}

pub(crate) fn atoms_empty(
    st: &mut TypeStore,
    pos: &[AtomView],
    neg: &[AtomView],
    extra_vp: &BTreeSet<VarId>,
    memo: &mut EmptinessMemo,
) -> bool {
    // Preprocessing: merge the positive fields over L into one monomorphic
    // atom, group the positive tails.
    let mut labels: BTreeSet<Label> = BTreeSet::new();
    for a in pos.iter().chain(neg.iter()) {
        labels.extend(a.fields.keys().copied());
    }
    let closed = pos.iter().any(|a| a.tail == Tail::Closed);
    let mut vp: BTreeSet<VarId> = extra_vp.clone();
    for a in pos {
        if let Tail::Var(v) = a.tail {
            vp.insert(v);
        }
    }
    let mut fields: BTreeMap<Label, NodeId> = BTreeMap::new();
    for &l in &labels {
        let mut parts: Vec<NodeId> = pos
            .iter()
            .map(|a| a.field(st, l))
            .filter(|&f| f != st.field_top())
            .collect();
        parts.sort_unstable();
        parts.dedup();
        let meet = st.mk_and_all(&Kind::Field, &parts).unwrap();
        fields.insert(l, meet);
    }
    // R° empty: some merged field is empty.
    for &f in fields.values() {
        if field_empty(st, f, memo) {
            return true;
        }
    }
    let mut sorted_neg: Vec<AtomView> = neg.to_vec();
    sorted_neg.sort_by_key(|a| a.id);
    phi_rec(st, &fields, closed, &vp, &sorted_neg, memo)
}

fn field_empty(st: &mut TypeStore, f: NodeId, memo: &mut EmptinessMemo) -> bool {
    empty_node(st, f, memo)
}

/// The backtrack-free record emptiness function. `r_circ` must be a
/// monomorphic non-empty record/row atom whose explicit fields cover every
/// `fin` of `neg`.
pub fn phi(st: &mut TypeStore, r_circ: NodeId, vp: &BTreeSet<VarId>, neg: &[NodeId]) -> bool {
    let view = AtomView::of(st, r_circ);
    let closed = match view.tail {
        Tail::Closed => true,
        Tail::Open => false,
        Tail::Var(_) => panic!("phi wants a monomorphic R°"),
    };
    let mut sorted_neg: Vec<AtomView> = neg.iter().map(|&n| AtomView::of(st, n)).collect();
    sorted_neg.sort_by_key(|a| a.id);
    let mut memo = EmptinessMemo::default();
    phi_rec(st, &view.fields, closed, vp, &sorted_neg, &mut memo)
}

fn phi_rec(
    st: &mut TypeStore,
    fields: &BTreeMap<Label, NodeId>,
    closed: bool,
    vp: &BTreeSet<VarId>,
    neg: &[AtomView],
    memo: &mut EmptinessMemo,
) -> bool {
    let Some((r, rest)) = neg.split_first() else {
        return false;
    };
    let tail_matches = match r.tail {
        Tail::Open => true,
        Tail::Closed => closed,
        Tail::Var(v) => vp.contains(&v),
    };
    if !tail_matches {
        return phi_rec(st, fields, closed, vp, rest, memo);
    }
    for (&l, &tau) in fields {
        let tau_r = r.field(st, l);
        let not_tau_r = st.mk_not(tau_r);
        let cut = st.mk_and(tau, not_tau_r).unwrap();
        if field_empty(st, cut, memo) {
            continue; // R°(l) <= R(l)
        }
        let mut updated = fields.clone();
        updated.insert(l, cut);
        if !phi_rec(st, &updated, closed, vp, rest, memo) {
            return false;
        }
    }
    true
}

/// Emptiness of a field-type.
pub fn empty_field(st: &mut TypeStore, f: NodeId) -> bool {
    debug_assert_eq!(st.kind(f), Kind::Field);
    is_empty(st, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Basic;

    fn store() -> TypeStore {
        TypeStore::new()
    }

    #[test]
    fn basic_world() {
        assert!(empty_basic(&[Basic::Int], &[Basic::Int]));
        assert!(empty_basic(&[Basic::Int, Basic::Str], &[]));
        assert!(!empty_basic(&[Basic::True], &[Basic::Int]));
    }

    #[test]
    fn simple_type_emptiness() {
        let mut st = store();
        let i = st.mk_basic(Basic::Int);
        assert!(!is_empty(&mut st, i));
        let ni = st.mk_not(i);
        let both = st.mk_and(i, ni).unwrap();
        assert!(is_empty(&mut st, both));
        let b = st.bottom();
        assert!(is_empty(&mut st, b));
        let a = st.any();
        assert!(!is_empty(&mut st, a));
    }

    #[test]
    fn arrow_examples() {
        let mut st = store();
        let i = st.mk_basic(Basic::Int);
        let bo = st.mk_bool();
        let ib = st.mk_arrow(i, bo).unwrap();
        assert!(is_subtype(&mut st, ib, ib));
        let bot = st.bottom();
        let any = st.any();
        let top_arrow = st.mk_arrow(bot, any).unwrap();
        assert!(is_subtype(&mut st, ib, top_arrow));
        assert!(!is_subtype(&mut st, top_arrow, ib));
        // /\ (ti -> si) <= (\/ ti) -> (\/ si)
        let ii = st.mk_arrow(i, i).unwrap();
        let bb = st.mk_arrow(bo, bo).unwrap();
        let inter = st.mk_and(ii, bb).unwrap();
        let u = st.mk_or(i, bo).unwrap();
        let uu = st.mk_arrow(u, u).unwrap();
        assert!(is_subtype(&mut st, inter, uu));
        assert!(!is_subtype(&mut st, uu, inter));
    }

    #[test]
    fn record_with_empty_field_is_empty() {
        let mut st = store();
        let l1 = st.label("l1");
        let bot = st.bottom();
        let open = st.mk_record(vec![(l1, bot)], Tail::Open).unwrap();
        assert!(is_empty(&mut st, open));
        let closed = st.mk_record(vec![(l1, bot)], Tail::Closed).unwrap();
        assert!(is_empty(&mut st, closed));
        let excl: BTreeSet<Label> = BTreeSet::from([l1]);
        let rho = st.var("p", Kind::Row(excl));
        let poly = st.mk_record(vec![(l1, bot)], Tail::Var(rho)).unwrap();
        assert!(is_empty(&mut st, poly));
    }

    #[test]
    fn open_record_intersection_equivalence() {
        let mut st = store();
        let l1 = st.label("l1");
        let l2 = st.label("l2");
        let i = st.mk_basic(Basic::Int);
        let bo = st.mk_bool();
        let both = st.mk_record(vec![(l1, i), (l2, bo)], Tail::Open).unwrap();
        let r1 = st.mk_record(vec![(l1, i)], Tail::Open).unwrap();
        let r2 = st.mk_record(vec![(l2, bo)], Tail::Open).unwrap();
        let inter = st.mk_and(r1, r2).unwrap();
        assert!(is_equiv(&mut st, both, inter));
    }

    #[test]
    fn row_variable_discrimination() {
        let mut st = store();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let excl = BTreeSet::from([a]);
        let rho1 = st.var("r1", Kind::Row(excl.clone()));
        let rho2 = st.var("r2", Kind::Row(excl));
        let t1 = st.mk_record(vec![(a, i)], Tail::Var(rho1)).unwrap();
        let t2 = st.mk_record(vec![(a, i)], Tail::Var(rho2)).unwrap();
        let open = st.mk_record(vec![(a, i)], Tail::Open).unwrap();
        assert!(!is_subtype(&mut st, t1, t2));
        assert!(is_subtype(&mut st, t1, open));
        assert!(is_subtype(&mut st, t1, t1));
    }

    #[test]
    fn worked_subtyping_example() {
        // <a=true, b=int|bool | rho> & {..b=int|str, c=int}
        //   <= <a=bool, b=int | rho> | <a=int | rho'>
        let mut st = store();
        let (a, b, c) = (st.label("a"), st.label("b"), st.label("c"));
        let i = st.mk_basic(Basic::Int);
        let s = st.mk_basic(Basic::Str);
        let tt = st.mk_basic(Basic::True);
        let bo = st.mk_bool();
        let rho = st.var("rho", Kind::Row(BTreeSet::from([a, b])));
        let rho2 = st.var("rho'", Kind::Row(BTreeSet::from([a])));
        let ib = st.mk_or(i, bo).unwrap();
        let is_ = st.mk_or(i, s).unwrap();
        let lhs1 = st
            .mk_record(vec![(a, tt), (b, ib)], Tail::Var(rho))
            .unwrap();
        let lhs2 = st.mk_record(vec![(b, is_), (c, i)], Tail::Open).unwrap();
        let lhs = st.mk_and(lhs1, lhs2).unwrap();
        let rhs1 = st.mk_record(vec![(a, bo), (b, i)], Tail::Var(rho)).unwrap();
        let rhs2 = st.mk_record(vec![(a, i)], Tail::Var(rho2)).unwrap();
        let rhs = st.mk_or(rhs1, rhs2).unwrap();
        assert!(is_subtype(&mut st, lhs, rhs));
        assert!(!is_subtype(&mut st, rhs, lhs));
    }

    #[test]
    fn phi_answers_false_on_empty_negatives() {
        let mut st = store();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let r = st.mk_record(vec![(a, i)], Tail::Open).unwrap();
        assert!(!phi(&mut st, r, &BTreeSet::new(), &[]));
    }

    #[test]
    fn field_emptiness() {
        let mut st = store();
        let u = st.undef();
        assert!(!empty_field(&mut st, u));
        let i = st.mk_basic(Basic::Int);
        let fi = st.as_field(i).unwrap();
        let nfi = st.mk_not(fi);
        let e = st.mk_and(fi, nfi).unwrap();
        assert!(empty_field(&mut st, e));
        // (int | undef) & !undef is still int.
        let iu = st.mk_or(fi, u).unwrap();
        let nu = st.mk_not(u);
        let t = st.mk_and(iu, nu).unwrap();
        assert!(!empty_field(&mut st, t));
        assert!(is_subtype(&mut st, t, fi));
        assert!(is_subtype(&mut st, fi, t));
    }

    #[test]
    fn recursive_type_subtyping_terminates() {
        let mut st = store();
        let x = st.var("X", Kind::Type);
        let xn = st.intern(Body::Var(x));
        let i = st.mk_basic(Basic::Int);
        let body = st.mk_arrow(i, xn).unwrap();
        let rec = st.mk_rec(x, body).unwrap();
        assert!(!is_empty(&mut st, rec));
        assert!(is_subtype(&mut st, rec, rec));
        let bot = st.bottom();
        let any = st.any();
        let top_arrow = st.mk_arrow(bot, any).unwrap();
        assert!(is_subtype(&mut st, rec, top_arrow));
    }
}
