//! Disjunctive normal forms, split per constructor world.
//!
//! A summand is an intersection of positive and negative atoms plus positive
//! and negative top-level variables. Summands whose variable sets intersect
//! are trivially empty and dropped at build time, as are summands with
//! positive atoms from two different constructor worlds; negative atoms of a
//! world foreign to the positives are discharged on the spot.

use std::collections::BTreeSet;

use crate::types::{Body, Kind, NodeId, TypeStore, VarId};

/// One intersection of a DNF.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Summand {
    pub pos: Vec<NodeId>,
    pub neg: Vec<NodeId>,
    pub vpos: BTreeSet<VarId>,
    pub vneg: BTreeSet<VarId>,
}

impl Summand {
    pub fn top() -> Self {
        Summand {
            pos: vec![],
            neg: vec![],
            vpos: BTreeSet::new(),
            vneg: BTreeSet::new(),
        }
    }

    pub fn atom(n: NodeId) -> Self {
        Summand {
            pos: vec![n],
            ..Summand::top()
        }
    }

    pub fn var(v: VarId) -> Self {
        let mut s = Summand::top();
        s.vpos.insert(v);
        s
    }
}

/// Constructor world of a type atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum World {
    Basic,
    Arrow,
    Record,
}

pub fn world_of(st: &TypeStore, atom: NodeId) -> World {
    match st.body(atom) {
        Body::Basic(_) => World::Basic,
        Body::Arrow(..) => World::Arrow,
        Body::Record(..) => World::Record,
        b => panic!("not a type atom: {:?}", b),
    }
}

/// DNF of a type, with summands grouped by the world of their positive atoms.
/// Summands with no positive atom land in `var_only` and keep negatives of
/// every world.
#[derive(Debug, Clone, Default)]
pub struct Dnf {
    pub basic: Vec<Summand>,
    pub arrow: Vec<Summand>,
    pub record: Vec<Summand>,
    pub var_only: Vec<Summand>,
}

impl Dnf {
    pub fn all_summands(&self) -> impl Iterator<Item = &Summand> {
        self.basic
            .iter()
            .chain(self.arrow.iter())
            .chain(self.record.iter())
            .chain(self.var_only.iter())
    }
}

/// Flat list of canonical summands of a node (any kind). Cached per node.
pub fn to_summands(st: &mut TypeStore, n: NodeId) -> Vec<Summand> {
    if let Some(cached) = st.summand_cache_get(n) {
        return cached;
    }
    let kind = st.kind(n);
    let out = match st.body(n).clone() {
        Body::Bottom(_) => vec![],
        Body::Var(v) => vec![Summand::var(v)],
        Body::Basic(_)
        | Body::Arrow(..)
        | Body::Record(..)
        | Body::RowAtom(..)
        | Body::Undef
        | Body::FieldOf(_) => vec![Summand::atom(n)],
        Body::Or(a, b) => {
            let mut s = to_summands(st, a);
            s.extend(to_summands(st, b));
            dedupe(s)
        }
        Body::And(a, b) => {
            let sa = to_summands(st, a);
            let sb = to_summands(st, b);
            let mut out = Vec::new();
            for x in &sa {
                for y in &sb {
                    if let Some(m) = meet(st, &kind, x, y) {
                        out.push(m);
                    }
                }
            }
            dedupe(out)
        }
        Body::Not(a) => {
            let sa = to_summands(st, a);
            // not (s1 | ... | sk) = not s1 & ... & not sk
            let mut acc = vec![Summand::top()];
            for s in &sa {
                let lits = complement_literals(s);
                let mut next = Vec::new();
                for x in &acc {
                    for y in &lits {
                        if let Some(m) = meet(st, &kind, x, y) {
                            next.push(m);
                        }
                    }
                }
                acc = dedupe(next);
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        Body::Pending => panic!("dnf of a pending node"),
    };
    st.summand_cache_put(n, out.clone());
    out
}

fn complement_literals(s: &Summand) -> Vec<Summand> {
    let mut lits = Vec::new();
    for &p in &s.pos {
        lits.push(Summand {
            neg: vec![p],
            ..Summand::top()
        });
    }
    for &q in &s.neg {
        lits.push(Summand::atom(q));
    }
    for &v in &s.vpos {
        let mut l = Summand::top();
        l.vneg.insert(v);
        lits.push(l);
    }
    for &v in &s.vneg {
        lits.push(Summand::var(v));
    }
    lits
}

fn meet(st: &TypeStore, kind: &Kind, a: &Summand, b: &Summand) -> Option<Summand> {
    let mut s = a.clone();
    s.pos.extend(b.pos.iter().copied());
    s.neg.extend(b.neg.iter().copied());
    s.vpos.extend(b.vpos.iter().copied());
    s.vneg.extend(b.vneg.iter().copied());
    canonicalize(st, kind, s)
}

/// Sorts, dedupes and prunes a summand; `None` when it is trivially empty.
fn canonicalize(st: &TypeStore, kind: &Kind, mut s: Summand) -> Option<Summand> {
    s.pos.sort_unstable();
    s.pos.dedup();
    s.neg.sort_unstable();
    s.neg.dedup();
    if s.vpos.intersection(&s.vneg).next().is_some() {
        return None;
    }
    if s.pos.iter().any(|p| s.neg.binary_search(p).is_ok()) {
        return None;
    }
    match kind {
        Kind::Type => {
            let worlds: BTreeSet<u8> = s.pos.iter().map(|&p| world_of(st, p) as u8).collect();
            if worlds.len() > 1 {
                return None;
            }
            if let Some(&w) = worlds.iter().next() {
                s.neg.retain(|&q| world_of(st, q) as u8 == w);
            }
        }
        Kind::Field => {
            let has_undef = s.pos.iter().any(|&p| matches!(st.body(p), Body::Undef));
            let has_value = s
                .pos
                .iter()
                .any(|&p| matches!(st.body(p), Body::FieldOf(_)));
            if has_undef && has_value {
                return None;
            }
        }
        Kind::Row(_) => {}
    }
    Some(s)
}

fn dedupe(v: Vec<Summand>) -> Vec<Summand> {
    let set: BTreeSet<Summand> = v.into_iter().collect();
    set.into_iter().collect()
}

/// DNF of a type node, grouped per world.
pub fn to_dnf(st: &mut TypeStore, n: NodeId) -> Dnf {
    debug_assert_eq!(st.kind(n), Kind::Type);
    let mut d = Dnf::default();
    for s in to_summands(st, n) {
        match s.pos.first() {
            None => d.var_only.push(s),
            Some(&p) => match world_of(st, p) {
                World::Basic => d.basic.push(s),
                World::Arrow => d.arrow.push(s),
                World::Record => d.record.push(s),
            },
        }
    }
    d
}

/// Rebuilds a node from a summand (canonical fold order).
pub fn summand_node(st: &mut TypeStore, kind: &Kind, s: &Summand) -> NodeId {
    let mut parts: Vec<NodeId> = s.pos.clone();
    for &q in &s.neg {
        parts.push(st.mk_not(q));
    }
    for &v in &s.vpos {
        let vn = st.intern(Body::Var(v));
        parts.push(vn);
    }
    for &v in &s.vneg {
        let vn = st.intern(Body::Var(v));
        parts.push(st.mk_not(vn));
    }
    st.mk_and_all(kind, &parts)
        .expect("summand parts share a kind")
}

/// Same, ignoring the variable components (used where variables are erased).
pub fn summand_node_atoms_only(st: &mut TypeStore, kind: &Kind, s: &Summand) -> NodeId {
    let mut parts: Vec<NodeId> = s.pos.clone();
    for &q in &s.neg {
        parts.push(st.mk_not(q));
    }
    st.mk_and_all(kind, &parts)
        .expect("summand parts share a kind")
}

/// Reassembles the whole DNF into a node equivalent to the source.
pub fn reassemble(st: &mut TypeStore, kind: &Kind, summands: &[Summand]) -> NodeId {
    let parts: Vec<NodeId> = summands.iter().map(|s| summand_node(st, kind, s)).collect();
    st.mk_or_all(kind, &parts).expect("summands share a kind")
}

/// Canonical two-part view of a field-type summand: either the undefined
/// part or a plain type standing for the value part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldPart {
    Undef,
    Value(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSummand {
    pub part: FieldPart,
    pub vpos: BTreeSet<VarId>,
    pub vneg: BTreeSet<VarId>,
}

/// Canonical field DNF: every summand is either `undef & vars` or
/// `t & vars` with `t` a type.
pub fn field_dnf(st: &mut TypeStore, n: NodeId) -> Vec<FieldSummand> {
    debug_assert_eq!(st.kind(n), Kind::Field);
    let mut out = Vec::new();
    for s in to_summands(st, n) {
        let pos_types: Vec<NodeId> = s
            .pos
            .iter()
            .filter_map(|&p| match st.body(p) {
                Body::FieldOf(t) => Some(*t),
                _ => None,
            })
            .collect();
        let pos_undef = s.pos.iter().any(|&p| matches!(st.body(p), Body::Undef));
        let neg_types: Vec<NodeId> = s
            .neg
            .iter()
            .filter_map(|&q| match st.body(q) {
                Body::FieldOf(t) => Some(*t),
                _ => None,
            })
            .collect();
        let neg_undef = s.neg.iter().any(|&q| matches!(st.body(q), Body::Undef));
        if pos_types.is_empty() && !neg_undef {
            out.push(FieldSummand {
                part: FieldPart::Undef,
                vpos: s.vpos.clone(),
                vneg: s.vneg.clone(),
            });
        }
        if !pos_undef {
            let mut parts = pos_types;
            for t in neg_types {
                parts.push(st.mk_not(t));
            }
            let value = st
                .mk_and_all(&Kind::Type, &parts)
                .expect("value parts are types");
            out.push(FieldSummand {
                part: FieldPart::Value(value),
                vpos: s.vpos,
                vneg: s.vneg,
            });
        }
    }
    out
}

/// DNF of a row term: intersections of positive/negative row atoms.
pub fn row_summands(st: &mut TypeStore, n: NodeId) -> Vec<Summand> {
    debug_assert!(st.kind(n).is_row());
    to_summands(st, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Basic, Tail};

    #[test]
    fn variable_only_summand() {
        let mut st = TypeStore::new();
        let a = st.var("a", Kind::Type);
        let an = st.intern(Body::Var(a));
        let d = to_dnf(st_mut(&mut st), an);
        assert_eq!(d.var_only.len(), 1);
        assert!(d.var_only[0].vpos.contains(&a));
    }

    fn st_mut(st: &mut TypeStore) -> &mut TypeStore {
        st
    }

    #[test]
    fn record_intersection_is_one_summand() {
        let mut st = TypeStore::new();
        let a = st.label("a");
        let b = st.label("b");
        let i = st.mk_basic(Basic::Int);
        let bo = st.mk_bool();
        let r1 = st.mk_record(vec![(a, i)], Tail::Open).unwrap();
        let r2 = st.mk_record(vec![(b, bo)], Tail::Open).unwrap();
        let t = st.mk_and(r1, r2).unwrap();
        let d = to_dnf(&mut st, t);
        assert_eq!(d.record.len(), 1);
        assert_eq!(d.record[0].pos.len(), 2);
        assert!(d.record[0].neg.is_empty());
    }

    #[test]
    fn mixed_world_positive_summand_is_dropped() {
        let mut st = TypeStore::new();
        let i = st.mk_basic(Basic::Int);
        let arr = st.mk_arrow(i, i).unwrap();
        let t = st.mk_and(i, arr).unwrap();
        let d = to_dnf(&mut st, t);
        assert!(d.all_summands().next().is_none());
    }

    #[test]
    fn negation_distributes() {
        let mut st = TypeStore::new();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let r = st.mk_record(vec![(a, i)], Tail::Open).unwrap();
        let u = st.mk_or(i, r).unwrap();
        let n = st.mk_not(u);
        let d = to_dnf(&mut st, n);
        // !(int | {a:int..}) has a single variable-free summand with two negatives.
        assert_eq!(d.var_only.len(), 1);
        assert_eq!(d.var_only[0].neg.len(), 2);
    }
}
