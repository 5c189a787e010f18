//! Type substitutions over type, field and row variables.
//!
//! A substitution maps each variable to a term of the same kind; row
//! variables of definition space `L` map to rows of definition space `L`.
//! Applying a substitution to a record (or row) whose tail is substituted
//! expands the Boolean structure of the replacing row outwards, after
//! putting it in row DNF.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dnf::row_summands;
use crate::types::{Body, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId, VarOrigin};

/// The decomposed shape of a row binding: explicit fields over the
/// decomposition set and a row term for the remainder. Derived-variable
/// projections are defined against this shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowParts {
    pub fields: BTreeMap<Label, NodeId>,
    pub rest: NodeId,
}

/// Finite map from variables to terms of matching kind. Identity bindings
/// are never stored. Row bindings may carry their decomposed shape.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<VarId, NodeId>,
    row_parts: BTreeMap<VarId, RowParts>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds a row variable through its decomposition; the stored term is
    /// the expansion of the parts.
    pub fn bind_row(
        &mut self,
        st: &mut TypeStore,
        v: VarId,
        fields: BTreeMap<Label, NodeId>,
        rest: NodeId,
    ) -> Result<(), TypeError> {
        let excl = st.row_var_excluded(v);
        let full = expand_row(st, fields.clone(), rest, excl)?;
        self.bind(st, v, full)?;
        if self.bindings.contains_key(&v) {
            self.row_parts.insert(v, RowParts { fields, rest });
        }
        Ok(())
    }

    pub fn parts(&self, v: VarId) -> Option<&RowParts> {
        self.row_parts.get(&v)
    }

    pub fn bind(&mut self, st: &mut TypeStore, v: VarId, term: NodeId) -> Result<(), TypeError> {
        let vk = st.var_kind(v);
        let tk = st.kind(term);
        let term = match (&vk, &tk) {
            (a, b) if a == b => term,
            (Kind::Field, Kind::Type) => st.as_field(term)?,
            _ => {
                return Err(TypeError::Kind(format!(
                    "binding a {:?} variable to a {:?} term",
                    vk, tk
                )))
            }
        };
        if st.var_term(v) == term {
            self.bindings.remove(&v);
            self.row_parts.remove(&v);
            return Ok(());
        }
        self.bindings.insert(v, term);
        self.row_parts.remove(&v);
        Ok(())
    }

    pub fn get(&self, v: VarId) -> Option<NodeId> {
        self.bindings.get(&v).copied()
    }

    pub fn domain(&self) -> impl Iterator<Item = VarId> + '_ {
        self.bindings.keys().copied()
    }

    pub fn is_identity(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, NodeId)> + '_ {
        self.bindings.iter().map(|(&v, &n)| (v, n))
    }

    fn touches(&self, st: &mut TypeStore, n: NodeId) -> bool {
        let vars = st.vars_of(n);
        vars.iter()
            .any(|v| self.bindings.contains_key(v) || self.resolves_derived(st, *v))
    }

    fn resolves_derived(&self, st: &TypeStore, v: VarId) -> bool {
        match st.var_info(v).origin.clone() {
            VarOrigin::FieldProj { base, .. } | VarOrigin::Cut { base, .. } => {
                self.bindings.contains_key(&base)
            }
            _ => false,
        }
    }
}

/// Applies a substitution. Regular graphs stay regular: cyclic nodes are
/// rebuilt through placeholders.
pub fn apply(st: &mut TypeStore, sub: &Substitution, n: NodeId) -> Result<NodeId, TypeError> {
    if sub.is_identity() {
        return Ok(n);
    }
    let mut memo = HashMap::new();
    apply_rec(st, sub, n, &mut memo)
}

fn apply_rec(
    st: &mut TypeStore,
    sub: &Substitution,
    n: NodeId,
    memo: &mut HashMap<NodeId, NodeId>,
) -> Result<NodeId, TypeError> {
    if let Some(&r) = memo.get(&n) {
        return Ok(r);
    }
    if !sub.touches(st, n) {
        memo.insert(n, n);
        return Ok(n);
    }
    if st.is_cyclic(n) {
        let ph = st.alloc_pending(st.kind(n));
        memo.insert(n, ph);
        let r = rebuild(st, sub, n, memo)?;
        st.patch_pending(ph, r);
        return Ok(ph);
    }
    let r = rebuild(st, sub, n, memo)?;
    memo.insert(n, r);
    Ok(r)
}

fn rebuild(
    st: &mut TypeStore,
    sub: &Substitution,
    n: NodeId,
    memo: &mut HashMap<NodeId, NodeId>,
) -> Result<NodeId, TypeError> {
    Ok(match st.body(n).clone() {
        Body::Var(v) => resolve_var(st, sub, v)?.unwrap_or(n),
        Body::Basic(_) | Body::Undef | Body::Bottom(_) => n,
        Body::Arrow(d, c) => {
            let d2 = apply_rec(st, sub, d, memo)?;
            let c2 = apply_rec(st, sub, c, memo)?;
            st.mk_arrow(d2, c2)?
        }
        Body::FieldOf(t) => {
            let t2 = apply_rec(st, sub, t, memo)?;
            st.as_field(t2)?
        }
        Body::Or(a, b) => {
            let a2 = apply_rec(st, sub, a, memo)?;
            let b2 = apply_rec(st, sub, b, memo)?;
            st.mk_or(a2, b2)?
        }
        Body::And(a, b) => {
            let a2 = apply_rec(st, sub, a, memo)?;
            let b2 = apply_rec(st, sub, b, memo)?;
            st.mk_and(a2, b2)?
        }
        Body::Not(a) => {
            let a2 = apply_rec(st, sub, a, memo)?;
            st.mk_not(a2)
        }
        Body::Record(fields, tail) => {
            let mut fields2 = BTreeMap::new();
            for (l, f) in fields {
                fields2.insert(l, apply_rec(st, sub, f, memo)?);
            }
            match resolve_tail(st, sub, tail)? {
                TailResult::Keep(t) => st.intern(Body::Record(fields2, t)),
                TailResult::Row(row) => expand_record(st, fields2, row)?,
            }
        }
        Body::RowAtom(fields, tail, excl) => {
            let mut fields2 = BTreeMap::new();
            for (l, f) in fields {
                fields2.insert(l, apply_rec(st, sub, f, memo)?);
            }
            match resolve_tail(st, sub, tail)? {
                TailResult::Keep(t) => st.intern(Body::RowAtom(fields2, t, excl)),
                TailResult::Row(row) => expand_row(st, fields2, row, excl)?,
            }
        }
        Body::Pending => {
            return Err(TypeError::Contractivity(
                "substitution into a pending node".into(),
            ))
        }
    })
}

enum TailResult {
    Keep(Tail),
    Row(NodeId),
}

fn resolve_tail(
    st: &mut TypeStore,
    sub: &Substitution,
    tail: Tail,
) -> Result<TailResult, TypeError> {
    match tail {
        Tail::Closed | Tail::Open => Ok(TailResult::Keep(tail)),
        Tail::Var(v) => match resolve_row_var(st, sub, v)? {
            Some(row) => Ok(TailResult::Row(row)),
            None => Ok(TailResult::Keep(tail)),
        },
    }
}

fn resolve_var(
    st: &mut TypeStore,
    sub: &Substitution,
    v: VarId,
) -> Result<Option<NodeId>, TypeError> {
    if let Some(t) = sub.get(v) {
        return Ok(Some(t));
    }
    match st.var_info(v).origin.clone() {
        VarOrigin::FieldProj { base, label } => match sub.get(base) {
            None => Ok(None),
            Some(row) => match sub.parts(base) {
                Some(parts) => match parts.fields.get(&label) {
                    Some(&f) => Ok(Some(f)),
                    None => Ok(Some(project_field(st, parts.rest, label)?)),
                },
                None => Ok(Some(project_field(st, row, label)?)),
            },
        },
        VarOrigin::Cut { base, cut } => resolve_cut(st, sub, base, &cut),
        _ => Ok(None),
    }
}

fn resolve_row_var(
    st: &mut TypeStore,
    sub: &Substitution,
    v: VarId,
) -> Result<Option<NodeId>, TypeError> {
    if let Some(t) = sub.get(v) {
        return Ok(Some(t));
    }
    match st.var_info(v).origin.clone() {
        VarOrigin::Cut { base, cut } => resolve_cut(st, sub, base, &cut),
        _ => Ok(None),
    }
}

fn resolve_cut(
    st: &mut TypeStore,
    sub: &Substitution,
    base: VarId,
    cut: &BTreeSet<Label>,
) -> Result<Option<NodeId>, TypeError> {
    let Some(row) = sub.get(base) else {
        return Ok(None);
    };
    let Some(parts) = sub.parts(base) else {
        return Ok(Some(cut_row(st, row, cut)?));
    };
    let parts = parts.clone();
    let mut kept = parts.fields.clone();
    kept.retain(|l, _| !cut.contains(l));
    let beyond: BTreeSet<Label> = cut
        .iter()
        .copied()
        .filter(|l| !parts.fields.contains_key(l))
        .collect();
    let rest = if beyond.is_empty() {
        parts.rest
    } else {
        cut_row(st, parts.rest, &beyond)?
    };
    let mut excl = st.row_var_excluded(base);
    excl.extend(cut.iter().copied());
    Ok(Some(expand_row(st, kept, rest, excl)?))
}

/// `(rho.l) sigma`: the field of the substituted row, defined when the row
/// is an atom.
pub fn project_field(st: &mut TypeStore, row: NodeId, l: Label) -> Result<NodeId, TypeError> {
    match st.body(row).clone() {
        Body::RowAtom(fields, tail, excl) => {
            if excl.contains(&l) {
                return Err(TypeError::DerivedProjection(format!(
                    "label `{}` outside the row's definition space",
                    st.label_name(l)
                )));
            }
            Ok(match fields.get(&l) {
                Some(&f) => f,
                None => match tail {
                    Tail::Closed => st.undef(),
                    Tail::Open => st.field_top(),
                    Tail::Var(r2) => {
                        let dv = st.derived_field_var(r2, l);
                        st.intern(Body::Var(dv))
                    }
                },
            })
        }
        _ => Err(TypeError::DerivedProjection(
            "field projection of a non-atomic row".into(),
        )),
    }
}

/// `(rho \ L) sigma`: the substituted row with the labels of `cut` removed.
pub fn cut_row(
    st: &mut TypeStore,
    row: NodeId,
    cut: &BTreeSet<Label>,
) -> Result<NodeId, TypeError> {
    match st.body(row).clone() {
        Body::RowAtom(fields, tail, excl) => {
            let mut fields2 = fields.clone();
            fields2.retain(|l, _| !cut.contains(l));
            let mut excl2 = excl.clone();
            excl2.extend(cut.iter().copied());
            let tail2 = match tail {
                Tail::Var(r2) => {
                    let r2_excl = st.row_var_excluded(r2);
                    let effective: BTreeSet<Label> = cut
                        .iter()
                        .copied()
                        .filter(|l| !r2_excl.contains(l))
                        .collect();
                    if effective.is_empty() {
                        Tail::Var(r2)
                    } else {
                        Tail::Var(st.derived_cut_var(r2, &effective))
                    }
                }
                t => t,
            };
            st.mk_row_atom(fields2, tail2, excl2)
        }
        _ => Err(TypeError::DerivedProjection(
            "cut of a non-atomic row".into(),
        )),
    }
}

/// `{ fields | row }`: a record whose explicit fields are `fields` and whose
/// remainder is described by the row term, expanded outwards.
pub fn expand_record(
    st: &mut TypeStore,
    fields: BTreeMap<Label, NodeId>,
    row: NodeId,
) -> Result<NodeId, TypeError> {
    expand(st, fields, row, None)
}

/// Same for a row result of excluded set `excl`.
pub fn expand_row(
    st: &mut TypeStore,
    fields: BTreeMap<Label, NodeId>,
    row: NodeId,
    excl: BTreeSet<Label>,
) -> Result<NodeId, TypeError> {
    expand(st, fields, row, Some(excl))
}

fn expand(
    st: &mut TypeStore,
    fields: BTreeMap<Label, NodeId>,
    row: NodeId,
    excl: Option<BTreeSet<Label>>,
) -> Result<NodeId, TypeError> {
    let out_kind = match &excl {
        None => Kind::Type,
        Some(e) => Kind::Row(e.clone()),
    };
    let merge_atom = |st: &mut TypeStore, atom: NodeId, fields: &BTreeMap<Label, NodeId>| {
        let (afields, atail, _aexcl) = st.atom_parts(atom)?;
        let mut merged = fields.clone();
        for (l, f) in afields {
            if merged.insert(l, f).is_some() {
                return Err(TypeError::Kind(format!(
                    "row overlaps the explicit field `{}`",
                    st.label_name(l)
                )));
            }
        }
        match &excl {
            None => st.mk_record(merged.into_iter().collect(), atail),
            Some(e) => st.mk_row_atom(merged, atail, e.clone()),
        }
    };
    // Single positive atom: merge directly, keeping atoms atomic.
    if let Body::RowAtom(..) = st.body(row) {
        return merge_atom(st, row, &fields);
    }
    let summands = row_summands(st, row);
    let mut parts = Vec::new();
    for s in &summands {
        let mut conj = Vec::new();
        for &p in &s.pos {
            conj.push(merge_atom(st, p, &fields)?);
        }
        for &q in &s.neg {
            let m = merge_atom(st, q, &fields)?;
            conj.push(st.mk_not(m));
        }
        parts.push(st.mk_and_all(&out_kind, &conj)?);
    }
    let body = st.mk_or_all(&out_kind, &parts)?;
    // Pin the explicit fields (and, for records, the record world itself)
    // with an open atom, so negative summands cannot leak past them. The
    // row case with no fields needs no guard: the result is the row term.
    let guard = match &excl {
        None => st.mk_record(fields.into_iter().collect(), Tail::Open)?,
        Some(_) if fields.is_empty() => return Ok(body),
        Some(e) => st.mk_row_atom(fields, Tail::Open, e.clone())?,
    };
    st.mk_and(guard, body)
}

/// `compose(s2, s1)`: applying the result equals applying `s1` then `s2`.
pub fn compose(
    st: &mut TypeStore,
    s2: &Substitution,
    s1: &Substitution,
) -> Result<Substitution, TypeError> {
    let mut out = Substitution::new();
    for (v, t) in s1.iter() {
        match s1.parts(v) {
            Some(parts) => {
                let mut fields = BTreeMap::new();
                for (&l, &f) in &parts.fields {
                    fields.insert(l, apply(st, s2, f)?);
                }
                let rest = apply(st, s2, parts.rest)?;
                out.bind_row(st, v, fields, rest)?;
            }
            None => {
                let t2 = apply(st, s2, t)?;
                out.bind(st, v, t2)?;
            }
        }
    }
    for (v, t) in s2.iter() {
        if s1.get(v).is_none() {
            out.bind(st, v, t)?;
            if let (Some(parts), true) = (s2.parts(v), out.bindings.contains_key(&v)) {
                out.row_parts.insert(v, parts.clone());
            }
        }
    }
    Ok(out)
}

/// Renames every variable of `t` not in `avoid` to a fresh one of the same
/// kind. Returns the renamed term and the renaming.
pub fn freshen(
    st: &mut TypeStore,
    t: NodeId,
    avoid: &BTreeSet<VarId>,
) -> Result<(NodeId, Substitution), TypeError> {
    let vars = st.vars_of(t);
    let mut ren = Substitution::new();
    for v in vars {
        if avoid.contains(&v) {
            continue;
        }
        let info = st.var_info(v).clone();
        debug_assert!(
            matches!(info.origin, VarOrigin::Named | VarOrigin::Fresh),
            "derived variables do not occur in source types"
        );
        let fresh = st.fresh_var(&info.name, info.kind);
        let term = st.var_term(fresh);
        ren.bind(st, v, term)?;
    }
    let renamed = apply(st, &ren, t)?;
    Ok((renamed, ren))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtype::{is_empty, is_equiv, is_subtype};
    use crate::types::Basic;

    #[test]
    fn identity_returns_same_node() {
        let mut st = TypeStore::new();
        let a = st.var("a", Kind::Type);
        let an = st.intern(Body::Var(a));
        let i = st.mk_basic(Basic::Int);
        let t = st.mk_or(an, i).unwrap();
        let sub = Substitution::new();
        assert_eq!(apply(&mut st, &sub, t).unwrap(), t);
    }

    #[test]
    fn row_union_distributes_into_record() {
        let mut st = TypeStore::new();
        let a = st.label("a");
        let b = st.label("b");
        let i = st.mk_basic(Basic::Int);
        let s = st.mk_basic(Basic::Str);
        let rho = st.var("r", Kind::Row(BTreeSet::from([a])));
        let rec = st.mk_record(vec![(a, i)], Tail::Var(rho)).unwrap();
        // sigma(rho) = <b=int>_a | <b=str>_a  (closed rows)
        let fi = st.as_field(i).unwrap();
        let fs = st.as_field(s).unwrap();
        let r1 = st
            .mk_row_atom(BTreeMap::from([(b, fi)]), Tail::Closed, BTreeSet::from([a]))
            .unwrap();
        let r2 = st
            .mk_row_atom(BTreeMap::from([(b, fs)]), Tail::Closed, BTreeSet::from([a]))
            .unwrap();
        let row = st.mk_or(r1, r2).unwrap();
        let mut sub = Substitution::new();
        sub.bind(&mut st, rho, row).unwrap();
        let out = apply(&mut st, &sub, rec).unwrap();
        let e1 = st.mk_record(vec![(a, i), (b, i)], Tail::Closed).unwrap();
        let e2 = st.mk_record(vec![(a, i), (b, s)], Tail::Closed).unwrap();
        let expected = st.mk_or(e1, e2).unwrap();
        assert!(is_equiv(&mut st, out, expected));
    }

    #[test]
    fn empty_row_empties_the_record() {
        let mut st = TypeStore::new();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let rho = st.var("r", Kind::Row(BTreeSet::from([a])));
        let rec = st.mk_record(vec![(a, i)], Tail::Var(rho)).unwrap();
        let bot_row = st.bottom_of(&Kind::Row(BTreeSet::from([a])));
        let mut sub = Substitution::new();
        sub.bind(&mut st, rho, bot_row).unwrap();
        let out = apply(&mut st, &sub, rec).unwrap();
        assert!(is_empty(&mut st, out));
    }

    #[test]
    fn negative_row_into_bare_record_stays_in_the_record_world() {
        let mut st = TypeStore::new();
        let rho = st.var("r", Kind::Row(BTreeSet::new()));
        let bare = st.mk_record(vec![], Tail::Var(rho)).unwrap();
        let crow = st
            .mk_row_atom(BTreeMap::new(), Tail::Closed, BTreeSet::new())
            .unwrap();
        let neg = st.mk_not(crow);
        let mut sub = Substitution::new();
        sub.bind(&mut st, rho, neg).unwrap();
        let out = apply(&mut st, &sub, bare).unwrap();
        let top_rec = st.top_record();
        assert!(is_subtype(&mut st, out, top_rec));
        let i = st.mk_basic(Basic::Int);
        assert!(!is_subtype(&mut st, i, out));
        let crec = st.mk_record(vec![], Tail::Closed).unwrap();
        let expected = st.mk_diff(top_rec, crec).unwrap();
        assert!(is_equiv(&mut st, out, expected));
    }

    #[test]
    fn compose_chains_bindings() {
        let mut st = TypeStore::new();
        let a = st.var("a", Kind::Type);
        let b = st.var("b", Kind::Type);
        let bn = st.intern(Body::Var(b));
        let i = st.mk_basic(Basic::Int);
        let mut s1 = Substitution::new();
        s1.bind(&mut st, a, bn).unwrap();
        let mut s2 = Substitution::new();
        s2.bind(&mut st, b, i).unwrap();
        let c = compose(&mut st, &s2, &s1).unwrap();
        assert_eq!(c.get(a), Some(i));
        assert_eq!(c.get(b), Some(i));
        let id = Substitution::new();
        let c2 = compose(&mut st, &id, &s1).unwrap();
        assert_eq!(c2, s1);
    }

    #[test]
    fn freshen_renames_off_avoid() {
        let mut st = TypeStore::new();
        let a = st.var("a", Kind::Type);
        let an = st.intern(Body::Var(a));
        let arr = st.mk_arrow(an, an).unwrap();
        let (fresh1, ren1) = freshen(&mut st, arr, &BTreeSet::new()).unwrap();
        assert_ne!(fresh1, arr);
        assert_eq!(ren1.iter().count(), 1);
        match st.body(fresh1) {
            Body::Arrow(d, c) => assert_eq!(d, c),
            b => panic!("unexpected {:?}", b),
        }
        let (fresh2, _) = freshen(&mut st, arr, &BTreeSet::new()).unwrap();
        assert_ne!(fresh1, fresh2);
        let avoid = BTreeSet::from([a]);
        let (same, ren3) = freshen(&mut st, arr, &avoid).unwrap();
        assert_eq!(same, arr);
        assert!(ren3.is_identity());
    }

    #[test]
    fn substitution_into_recursive_type() {
        let mut st = TypeStore::new();
        let x = st.var("X", Kind::Type);
        let a = st.var("a", Kind::Type);
        let xn = st.intern(Body::Var(x));
        let an = st.intern(Body::Var(a));
        let arr = st.mk_arrow(an, xn).unwrap();
        let rec = st.mk_rec(x, arr).unwrap();
        let i = st.mk_basic(Basic::Int);
        let mut sub = Substitution::new();
        sub.bind(&mut st, a, i).unwrap();
        let out = apply(&mut st, &sub, rec).unwrap();
        // mu X. int -> X
        match st.body(out) {
            Body::Arrow(d, c) => {
                assert_eq!(*d, i);
                assert_eq!(*c, out);
            }
            b => panic!("unexpected {:?}", b),
        }
        assert!(is_subtype(&mut st, out, out));
    }
}
