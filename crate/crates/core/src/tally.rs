//! Tallying: solving subtyping constraints for substitutions.
//!
//! The pipeline has five steps: constraint normalization (with the row
//! decomposition introducing the derived variables `rho.l` and `rho \ L`),
//! merging, saturation, harmonization of row decompositions, and the
//! transformation of constraint sets into equation systems solved by
//! `unify`. On top of it sit the search drivers `leq_sub` (cardinality
//! search for instance subtyping) and `apply_types` (dove-tail search for
//! the application operator).
//!
//! Failure is reported as an empty solution set; tallying is sound but not
//! complete, so an empty set does not prove unsatisfiability.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::dnf::{to_summands, Summand};
use crate::subst::{apply, compose, expand_row, freshen, Substitution};
use crate::subtype::{is_empty, is_subtype, AtomView};
use crate::types::{Body, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId, VarOrigin};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TallyError {
    #[error("fuel exhausted during tallying")]
    Fuel,
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// `lhs <= rhs` or `lhs >= rhs` between two terms of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rel {
    Leq,
    Geq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constraint {
    pub left: NodeId,
    pub rel: Rel,
    pub right: NodeId,
}

impl Constraint {
    pub fn leq(left: NodeId, right: NodeId) -> Self {
        Constraint {
            left,
            rel: Rel::Leq,
            right,
        }
    }
    pub fn geq(left: NodeId, right: NodeId) -> Self {
        Constraint {
            left,
            rel: Rel::Geq,
            right,
        }
    }
}

/// A normalized constraint: a variable against a bound of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NormC {
    pub var: VarId,
    pub rel: Rel,
    pub bound: NodeId,
}

pub type CSet = BTreeSet<NormC>;
/// A set of alternative constraint sets.
pub type CSets = Vec<CSet>;

fn cmeet(a: &CSets, b: &CSets) -> CSets {
    let mut out: BTreeSet<CSet> = BTreeSet::new();
    for x in a {
        for y in b {
            let mut u = x.clone();
            u.extend(y.iter().copied());
            out.insert(u);
        }
    }
    prune_supersets(out.into_iter().collect())
}

fn cjoin(a: CSets, b: CSets) -> CSets {
    let mut out: BTreeSet<CSet> = a.into_iter().collect();
    out.extend(b);
    prune_supersets(out.into_iter().collect())
}

/// Drops alternatives that strictly contain another alternative: their
/// solutions are covered by the smaller set's general solution.
fn prune_supersets(sets: CSets) -> CSets {
    let mut out: Vec<CSet> = Vec::new();
    let mut sorted = sets;
    sorted.sort_by_key(|s| s.len());
    for s in sorted {
        if !out.iter().any(|kept| kept.is_subset(&s)) {
            out.push(s);
        }
    }
    out.sort();
    out
}

fn singleton_empty() -> CSets {
    vec![CSet::new()]
}

/// Injective variable and label ordering driving normalization and the
/// equation solver. Variables outside `delta` rank strictly below the
/// monomorphic ones; derived variables order by their base first, then by
/// an even label rank or an odd cut-set rank.
pub struct Ordering {
    delta: BTreeSet<VarId>,
    base_rank: HashMap<VarId, u64>,
    next_base: u64,
    label_rank: HashMap<Label, u64>,
    next_label: u64,
    cut_rank: HashMap<BTreeSet<Label>, u64>,
    next_cut: u64,
}

const DELTA_OFFSET: u64 = 1 << 40;

impl Ordering {
    pub fn build(st: &mut TypeStore, constraints: &[Constraint], delta: &BTreeSet<VarId>) -> Self {
        let mut o = Ordering {
            delta: delta.clone(),
            base_rank: HashMap::new(),
            next_base: 0,
            label_rank: HashMap::new(),
            next_label: 0,
            cut_rank: HashMap::new(),
            next_cut: 0,
        };
        for c in constraints {
            for t in [c.left, c.right] {
                let mut seen = BTreeSet::new();
                o.register_term(st, t, &mut seen);
            }
        }
        o
    }

    fn register_term(&mut self, st: &TypeStore, n: NodeId, seen: &mut BTreeSet<NodeId>) {
        if !seen.insert(n) {
            return;
        }
        match st.body(n).clone() {
            Body::Var(v) => self.register_var(st, v),
            Body::Arrow(a, b) | Body::Or(a, b) | Body::And(a, b) => {
                self.register_term(st, a, seen);
                self.register_term(st, b, seen);
            }
            Body::Not(a) | Body::FieldOf(a) => self.register_term(st, a, seen),
            Body::Record(fields, tail) => {
                self.register_atom(st, &fields, tail, seen);
            }
            Body::RowAtom(fields, tail, excl) => {
                for l in &excl {
                    self.register_label(*l);
                }
                self.register_atom(st, &fields, tail, seen);
            }
            _ => {}
        }
    }

    fn register_atom(
        &mut self,
        st: &TypeStore,
        fields: &BTreeMap<Label, NodeId>,
        tail: Tail,
        seen: &mut BTreeSet<NodeId>,
    ) {
        for (l, f) in fields {
            self.register_label(*l);
            self.register_term(st, *f, seen);
        }
        if let Tail::Var(v) = tail {
            self.register_var(st, v);
        }
    }

    fn register_var(&mut self, st: &TypeStore, v: VarId) {
        match st.var_info(v).origin.clone() {
            VarOrigin::FieldProj { base, label } => {
                self.register_var(st, base);
                self.register_label(label);
            }
            VarOrigin::Cut { base, cut } => {
                self.register_var(st, base);
                self.register_cut(&cut);
            }
            _ => {
                if !self.base_rank.contains_key(&v) {
                    let offset = if self.delta.contains(&v) {
                        DELTA_OFFSET
                    } else {
                        0
                    };
                    self.base_rank.insert(v, self.next_base + offset);
                    self.next_base += 1;
                }
            }
        }
    }

    fn register_label(&mut self, l: Label) {
        if !self.label_rank.contains_key(&l) {
            // Even and nonzero, so it never collides with a plain variable
            // (second component 0) or a cut-set (odd).
            self.label_rank.insert(l, 2 * (self.next_label + 1));
            self.next_label += 1;
        }
    }

    fn register_cut(&mut self, cut: &BTreeSet<Label>) {
        if !self.cut_rank.contains_key(cut) {
            self.cut_rank.insert(cut.clone(), 2 * self.next_cut + 1);
            self.next_cut += 1;
        }
    }

    /// Lexicographic rank of a variable.
    pub fn rank(&mut self, st: &TypeStore, v: VarId) -> (u64, u64) {
        match st.var_info(v).origin.clone() {
            VarOrigin::FieldProj { base, label } => {
                self.register_var(st, base);
                self.register_label(label);
                (self.base_rank[&base], self.label_rank[&label])
            }
            VarOrigin::Cut { base, cut } => {
                self.register_var(st, base);
                self.register_cut(&cut);
                (self.base_rank[&base], self.cut_rank[&cut])
            }
            _ => {
                self.register_var(st, v);
                (self.base_rank[&v], 0)
            }
        }
    }

    fn min_var(&mut self, st: &TypeStore, vars: &BTreeSet<VarId>) -> Option<VarId> {
        vars.iter().copied().min_by_key(|&v| self.rank(st, v))
    }
}

/// Mutable state of one tallying run.
pub struct TallyCtx<'a> {
    pub delta: &'a BTreeSet<VarId>,
    pub ord: Ordering,
    pub fuel: u64,
}

impl<'a> TallyCtx<'a> {
    fn spend(&mut self) -> Result<(), TallyError> {
        if self.fuel == 0 {
            return Err(TallyError::Fuel);
        }
        self.fuel -= 1;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Normalizes a constraint set into alternatives of variable-isolated,
/// well-ordered constraints. An empty result means failure.
pub fn normalize(
    st: &mut TypeStore,
    constraints: &[Constraint],
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let mut acc = singleton_empty();
    for c in constraints {
        let one = norm_constraint(st, c, ctx)?;
        acc = cmeet(&acc, &one);
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

fn norm_constraint(
    st: &mut TypeStore,
    c: &Constraint,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let (a, b) = match c.rel {
        Rel::Leq => (c.left, c.right),
        Rel::Geq => (c.right, c.left),
    };
    let kind = st.kind(a);
    let t = if b == st.bottom_of(&kind) {
        a
    } else {
        st.mk_diff(a, b)?
    };
    norm_zero(st, t, &BTreeSet::new(), ctx)
}

/// Normalization of `t <= 0`.
fn norm_zero(
    st: &mut TypeStore,
    t: NodeId,
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    ctx.spend()?;
    let kind = st.kind(t);
    let summands = to_summands(st, t);
    let mut acc = singleton_empty();
    for s in &summands {
        let one = match kind {
            Kind::Type => norm_type_summand(st, s, sigma, ctx)?,
            Kind::Field => norm_field_summand(st, s, sigma, ctx)?,
            Kind::Row(ref excl) => norm_row_summand(st, s, excl, sigma, ctx)?,
        };
        acc = cmeet(&acc, &one);
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

/// Rebuilds the summand minus one variable literal and isolates the
/// variable: `single(v, T & v) = {(v <= !T)}`, `single(v, T & !v) = {(v >= T)}`.
fn single_out(st: &mut TypeStore, kind: &Kind, s: &Summand, v: VarId, positive: bool) -> CSets {
    let mut rest = s.clone();
    if positive {
        rest.vpos.remove(&v);
    } else {
        rest.vneg.remove(&v);
    }
    let rest_node = crate::dnf::summand_node(st, kind, &rest);
    let c = if positive {
        NormC {
            var: v,
            rel: Rel::Leq,
            bound: st.mk_not(rest_node),
        }
    } else {
        NormC {
            var: v,
            rel: Rel::Geq,
            bound: rest_node,
        }
    };
    vec![CSet::from([c])]
}

fn norm_type_summand(
    st: &mut TypeStore,
    s: &Summand,
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let tlvs: BTreeSet<VarId> = s.vpos.union(&s.vneg).copied().collect();
    if let Some(v) = ctx.ord.min_var(st, &tlvs) {
        if !ctx.delta.contains(&v) {
            return Ok(single_out(st, &Kind::Type, s, v, s.vpos.contains(&v)));
        }
        // All top-level variables are monomorphic: they cannot help, strip
        // them and continue on the atoms.
        let stripped = crate::dnf::summand_node_atoms_only(st, &Kind::Type, s);
        return norm_zero(st, stripped, sigma, ctx);
    }
    let node = crate::dnf::summand_node_atoms_only(st, &Kind::Type, s);
    if sigma.contains(&node) {
        return Ok(singleton_empty());
    }
    let mut sigma2 = sigma.clone();
    sigma2.insert(node);
    if s.pos.is_empty() {
        // The summand covers every world; each world must be emptied.
        let basics: Vec<crate::types::Basic> = s
            .neg
            .iter()
            .filter_map(|&q| match st.body(q) {
                Body::Basic(b) => Some(*b),
                _ => None,
            })
            .collect();
        let basic_part = if crate::subtype::empty_basic(&[], &basics) {
            singleton_empty()
        } else {
            vec![]
        };
        if basic_part.is_empty() {
            return Ok(vec![]);
        }
        let arrows: Vec<NodeId> = s
            .neg
            .iter()
            .filter(|&&q| matches!(st.body(q), Body::Arrow(..)))
            .copied()
            .collect();
        let arrow_part = norm_arrow(st, &[], &arrows, &sigma2, ctx)?;
        if arrow_part.is_empty() {
            return Ok(vec![]);
        }
        let recs: Vec<NodeId> = s
            .neg
            .iter()
            .filter(|&&q| matches!(st.body(q), Body::Record(..)))
            .copied()
            .collect();
        let rec_part = norm_rec(st, &[], &recs, &sigma2, ctx)?;
        let mut acc = cmeet(&basic_part, &arrow_part);
        acc = cmeet(&acc, &rec_part);
        return Ok(acc);
    }
    match st.body(s.pos[0]).clone() {
        Body::Basic(_) => {
            let pos: Vec<crate::types::Basic> = s
                .pos
                .iter()
                .map(|&p| match st.body(p) {
                    Body::Basic(b) => *b,
                    _ => unreachable!(),
                })
                .collect();
            let neg: Vec<crate::types::Basic> = s
                .neg
                .iter()
                .filter_map(|&q| match st.body(q) {
                    Body::Basic(b) => Some(*b),
                    _ => None,
                })
                .collect();
            Ok(if crate::subtype::empty_basic(&pos, &neg) {
                singleton_empty()
            } else {
                vec![]
            })
        }
        Body::Arrow(..) => norm_arrow(st, &s.pos, &s.neg, &sigma2, ctx),
        Body::Record(..) => norm_rec(st, &s.pos, &s.neg, &sigma2, ctx),
        b => panic!("unexpected positive type atom {:?}", b),
    }
}

fn norm_arrow(
    st: &mut TypeStore,
    pos: &[NodeId],
    neg: &[NodeId],
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let pv: Vec<(NodeId, NodeId)> = pos
        .iter()
        .map(|&p| match st.body(p) {
            Body::Arrow(d, c) => (*d, *c),
            _ => unreachable!(),
        })
        .collect();
    let mut join = vec![];
    for &q in neg {
        let (dj, cj) = match st.body(q) {
            Body::Arrow(d, c) => (*d, *c),
            _ => unreachable!(),
        };
        let mut meet_all = singleton_empty();
        let n = pv.len();
        'subsets: for mask in 0u32..(1 << n) {
            let mut dom_parts = vec![dj];
            for (i, &(d, _)) in pv.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    dom_parts.push(st.mk_not(d));
                }
            }
            let dom_meet = st.mk_and_all(&Kind::Type, &dom_parts)?;
            let dom_sets = norm_zero(st, dom_meet, sigma, ctx)?;
            let mut alt = dom_sets;
            if mask != (1 << n) - 1 {
                let mut cod_parts: Vec<NodeId> = pv
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) == 0)
                    .map(|(_, &(_, c))| c)
                    .collect();
                cod_parts.push(st.mk_not(cj));
                let cod_meet = st.mk_and_all(&Kind::Type, &cod_parts)?;
                let cod_sets = norm_zero(st, cod_meet, sigma, ctx)?;
                alt = cjoin(alt, cod_sets);
            }
            meet_all = cmeet(&meet_all, &alt);
            if meet_all.is_empty() {
                break 'subsets;
            }
        }
        join = cjoin(join, meet_all);
    }
    Ok(join)
}

fn norm_rec(
    st: &mut TypeStore,
    pos: &[NodeId],
    neg: &[NodeId],
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let mut parts: Vec<NodeId> = Vec::new();
    for &p in pos {
        parts.push(st.rectorow(p)?);
    }
    for &q in neg {
        let r = st.rectorow(q)?;
        parts.push(st.mk_not(r));
    }
    let row = st.mk_and_all(&Kind::Row(BTreeSet::new()), &parts)?;
    norm_zero(st, row, sigma, ctx)
}

fn norm_field_summand(
    st: &mut TypeStore,
    s: &Summand,
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let tlvs: BTreeSet<VarId> = s.vpos.union(&s.vneg).copied().collect();
    if let Some(v) = ctx.ord.min_var(st, &tlvs) {
        if !ctx.delta.contains(&v) {
            return Ok(single_out(st, &Kind::Field, s, v, s.vpos.contains(&v)));
        }
        let stripped = crate::dnf::summand_node_atoms_only(st, &Kind::Field, s);
        return norm_zero(st, stripped, sigma, ctx);
    }
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
    // Undefined part: present unless a positive type pins the summand to
    // values or a negative undef discharges it. `(undef <= 0)` fails.
    if pos_types.is_empty() && !neg_undef {
        return Ok(vec![]);
    }
    if pos_undef {
        // Value part vanishes; the undef part was discharged above.
        return Ok(singleton_empty());
    }
    let mut parts = pos_types;
    for t in neg_types {
        parts.push(st.mk_not(t));
    }
    let value = st.mk_and_all(&Kind::Type, &parts)?;
    norm_zero(st, value, sigma, ctx)
}

/// `r[l]`: the field of an atom at `l`, using the derived variableated
/// `rho.l` when a polymorphic tail covers `l`.
fn bracket_field(st: &mut TypeStore, view: &AtomView, l: Label, delta: &BTreeSet<VarId>) -> NodeId {
    if let Some(&f) = view.fields.get(&l) {
        return f;
    }
    match view.tail {
        Tail::Closed => st.undef(),
        Tail::Open => st.field_top(),
        Tail::Var(v) => {
            let excl = st.row_var_excluded(v);
            if !delta.contains(&v) && !excl.contains(&l) {
                let dv = st.derived_field_var(v, l);
                st.intern(Body::Var(dv))
            } else {
                st.field_top()
            }
        }
    }
}

/// The cut of an atom by `L`, keeping polymorphic information through the
/// derived variable `rho \ L` unless the tail is monomorphic.
fn cut_atom(
    st: &mut TypeStore,
    view: &AtomView,
    cut: &BTreeSet<Label>,
    problem_excl: &BTreeSet<Label>,
    delta: &BTreeSet<VarId>,
) -> Result<NodeId, TallyError> {
    let mut fields = view.fields.clone();
    fields.retain(|l, _| !cut.contains(l));
    let mut excl = problem_excl.clone();
    excl.extend(cut.iter().copied());
    let tail = match view.tail {
        Tail::Var(v) => {
            let vexcl = st.row_var_excluded(v);
            let reached: BTreeSet<Label> =
                cut.iter().copied().filter(|l| !vexcl.contains(l)).collect();
            if reached.is_empty() {
                Tail::Var(v)
            } else if delta.contains(&v) {
                Tail::Open
            } else {
                Tail::Var(st.derived_cut_var(v, &reached))
            }
        }
        t => t,
    };
    Ok(st.mk_row_atom(fields, tail, excl)?)
}

/// `row{fin(r)}{tail(r)}`: explicit fields widened to the field top.
fn fin_tail_row(st: &mut TypeStore, view: &AtomView, excl: &BTreeSet<Label>) -> NodeId {
    let top = st.field_top();
    let fields: BTreeMap<Label, NodeId> = view.fields.keys().map(|&l| (l, top)).collect();
    st.mk_row_atom(fields, view.tail, excl.clone())
        .expect("fin row is well-kinded")
}

fn tail_var(view: &AtomView) -> Option<VarId> {
    match view.tail {
        Tail::Var(v) => Some(v),
        _ => None,
    }
}

fn norm_row_summand(
    st: &mut TypeStore,
    s: &Summand,
    problem_excl: &BTreeSet<Label>,
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let pos: Vec<AtomView> = s.pos.iter().map(|&p| AtomView::of(st, p)).collect();
    let neg: Vec<AtomView> = s.neg.iter().map(|&q| AtomView::of(st, q)).collect();
    let tlvs: BTreeSet<VarId> = pos.iter().chain(neg.iter()).filter_map(tail_var).collect();
    let poly: BTreeSet<VarId> = tlvs
        .iter()
        .copied()
        .filter(|v| !ctx.delta.contains(v))
        .collect();
    if let Some(rho0) = ctx.ord.min_var(st, &poly) {
        let rho_excl = st.row_var_excluded(rho0);
        let cut: BTreeSet<Label> = rho_excl
            .iter()
            .copied()
            .filter(|l| !problem_excl.contains(l))
            .collect();
        if cut.is_empty() {
            // The variable occurs as a bare atom: isolate it.
            return Ok(isolate_row_var(st, s, &pos, &neg, rho0, problem_excl));
        }
        return nrow_decompose(st, &pos, &neg, rho0, &cut, problem_excl, sigma, ctx);
    }
    ntail_mono(st, &pos, &neg, sigma, ctx)
}

fn isolate_row_var(
    st: &mut TypeStore,
    s: &Summand,
    pos: &[AtomView],
    neg: &[AtomView],
    rho0: VarId,
    problem_excl: &BTreeSet<Label>,
) -> CSets {
    let kind = Kind::Row(problem_excl.clone());
    let bare = st.var_term(rho0);
    if let Some(idx) = pos.iter().position(|v| v.id == bare) {
        let mut rest = s.clone();
        rest.pos
            .remove(rest.pos.iter().position(|&p| p == pos[idx].id).unwrap());
        let rest_node = crate::dnf::summand_node(st, &kind, &rest);
        let bound = st.mk_not(rest_node);
        return vec![CSet::from([NormC {
            var: rho0,
            rel: Rel::Leq,
            bound,
        }])];
    }
    if let Some(idx) = neg.iter().position(|v| v.id == bare) {
        let mut rest = s.clone();
        rest.neg
            .remove(rest.neg.iter().position(|&q| q == neg[idx].id).unwrap());
        let bound = crate::dnf::summand_node(st, &kind, &rest);
        return vec![CSet::from([NormC {
            var: rho0,
            rel: Rel::Geq,
            bound,
        }])];
    }
    // The smallest variable has no explicit fields in front of it, yet its
    // atoms are not bare: they carry fields inside the problem space, which
    // kinding rules out.
    unreachable!("bare atom of the smallest row variable not found")
}

#[allow(clippy::too_many_arguments)]
fn nrow_decompose(
    st: &mut TypeStore,
    pos: &[AtomView],
    neg: &[AtomView],
    _rho0: VarId,
    cut: &BTreeSet<Label>,
    problem_excl: &BTreeSet<Label>,
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let labels: Vec<Label> = cut.iter().copied().collect();
    let touches_cut = |st: &TypeStore, v: VarId| {
        let e = st.row_var_excluded(v);
        cut.iter().any(|l| !e.contains(l))
    };
    let p_delta: Vec<&AtomView> = pos
        .iter()
        .filter(|a| tail_var(a).is_some_and(|v| ctx.delta.contains(&v) && touches_cut(st, v)))
        .collect();
    let options = labels.len() + 1;
    let total = (options as u64).pow(neg.len() as u32);
    let mut acc = singleton_empty();
    for code in 0..total {
        let iota = decode_assignment(&labels, neg.len(), options as u64, code);
        // Field alternatives.
        let mut alts: CSets = vec![];
        for &l in &labels {
            let mut parts: Vec<NodeId> = pos
                .iter()
                .map(|a| bracket_field(st, a, l, ctx.delta))
                .collect();
            for (i, a) in neg.iter().enumerate() {
                if iota[i] == Some(l) {
                    let f = bracket_field(st, a, l, ctx.delta);
                    parts.push(st.mk_not(f));
                }
            }
            let meet = st.mk_and_all(&Kind::Field, &parts)?;
            alts = cjoin(alts, norm_zero(st, meet, sigma, ctx)?);
        }
        // Tail alternative: product over the admissible N'.
        let blanks: Vec<usize> = (0..neg.len()).filter(|&i| iota[i].is_none()).collect();
        let blank_delta: Vec<usize> = blanks
            .iter()
            .copied()
            .filter(|&i| {
                tail_var(&neg[i]).is_some_and(|v| ctx.delta.contains(&v) && touches_cut(st, v))
            })
            .collect();
        let mut tail_acc = singleton_empty();
        for mask in 0u32..(1 << blank_delta.len()) {
            let nprime: BTreeSet<usize> = blank_delta
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &i)| i)
                .collect();
            // Side condition: the tag residue must be non-empty, otherwise
            // this N' is already discharged.
            let mut tag_parts: Vec<NodeId> = p_delta
                .iter()
                .map(|a| fin_tail_row(st, a, problem_excl))
                .collect();
            for &i in &nprime {
                let r = fin_tail_row(st, &neg[i], problem_excl);
                tag_parts.push(st.mk_not(r));
            }
            let tag = st.mk_and_all(&Kind::Row(problem_excl.clone()), &tag_parts)?;
            if is_empty(st, tag) {
                continue;
            }
            let mut parts: Vec<NodeId> = Vec::new();
            for a in pos {
                parts.push(cut_atom(st, a, cut, problem_excl, ctx.delta)?);
            }
            for &i in &blanks {
                if !nprime.contains(&i) {
                    let c = cut_atom(st, &neg[i], cut, problem_excl, ctx.delta)?;
                    parts.push(st.mk_not(c));
                }
            }
            let mut cut_excl = problem_excl.clone();
            cut_excl.extend(cut.iter().copied());
            let residue = st.mk_and_all(&Kind::Row(cut_excl), &parts)?;
            tail_acc = cmeet(&tail_acc, &norm_zero(st, residue, sigma, ctx)?);
            if tail_acc.is_empty() {
                break;
            }
        }
        alts = cjoin(alts, tail_acc);
        acc = cmeet(&acc, &alts);
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

fn decode_assignment(
    labels: &[Label],
    n: usize,
    options: u64,
    mut code: u64,
) -> Vec<Option<Label>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let d = (code % options) as usize;
        code /= options;
        out.push(if d == labels.len() {
            None
        } else {
            Some(labels[d])
        });
    }
    out
}

fn ntail_mono(
    st: &mut TypeStore,
    pos: &[AtomView],
    neg: &[AtomView],
    sigma: &BTreeSet<NodeId>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    let mut labels: BTreeSet<Label> = BTreeSet::new();
    for a in pos.iter().chain(neg.iter()) {
        labels.extend(a.fields.keys().copied());
    }
    let labels: Vec<Label> = labels.into_iter().collect();
    let p_delta: Vec<&AtomView> = pos.iter().filter(|a| tail_var(a).is_some()).collect();
    let pos_plain_closed = pos
        .iter()
        .filter(|a| tail_var(a).is_none())
        .any(|a| a.tail == Tail::Closed);
    let options = labels.len() + 1;
    let total = (options as u64).pow(neg.len() as u32);
    let mut acc = singleton_empty();
    for code in 0..total {
        let iota = decode_assignment(&labels, neg.len(), options as u64, code);
        let blanks: Vec<usize> = (0..neg.len()).filter(|&i| iota[i].is_none()).collect();
        // I1: no blank monomorphic negative already subsumes the defaults.
        let i1 = blanks.iter().all(|&i| match neg[i].tail {
            Tail::Var(_) => true,
            Tail::Open => false,
            Tail::Closed => !pos_plain_closed,
        });
        // I2: no blank polymorphic negative shares a tail with a positive.
        let i2 = blanks.iter().all(|&i| match tail_var(&neg[i]) {
            None => true,
            Some(v) => !p_delta.iter().any(|p| tail_var(p) == Some(v)),
        });
        if !(i1 && i2) {
            continue;
        }
        let mut alts: CSets = vec![];
        for &l in &labels {
            let mut parts: Vec<NodeId> = pos.iter().map(|a| a.field(st, l)).collect();
            for (i, a) in neg.iter().enumerate() {
                if iota[i] == Some(l) {
                    let f = a.field(st, l);
                    parts.push(st.mk_not(f));
                }
            }
            let meet = st.mk_and_all(&Kind::Field, &parts)?;
            alts = cjoin(alts, norm_zero(st, meet, sigma, ctx)?);
        }
        acc = cmeet(&acc, &alts);
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Merging, saturation, harmonization
// ---------------------------------------------------------------------------

/// Joins lower bounds and meets upper bounds so each variable keeps at most
/// one constraint per direction.
pub fn merge(st: &mut TypeStore, c: &CSet) -> Result<CSet, TallyError> {
    let mut lows: BTreeMap<VarId, Vec<NodeId>> = BTreeMap::new();
    let mut highs: BTreeMap<VarId, Vec<NodeId>> = BTreeMap::new();
    for nc in c {
        match nc.rel {
            Rel::Geq => lows.entry(nc.var).or_default().push(nc.bound),
            Rel::Leq => highs.entry(nc.var).or_default().push(nc.bound),
        }
    }
    let mut out = CSet::new();
    for (v, bs) in lows {
        let kind = term_kind(st, v);
        let b = st.mk_or_all(&kind, &bs)?;
        out.insert(NormC {
            var: v,
            rel: Rel::Geq,
            bound: b,
        });
    }
    for (v, bs) in highs {
        let kind = term_kind(st, v);
        let b = st.mk_and_all(&kind, &bs)?;
        out.insert(NormC {
            var: v,
            rel: Rel::Leq,
            bound: b,
        });
    }
    Ok(out)
}

fn term_kind(st: &TypeStore, v: VarId) -> Kind {
    st.var_kind(v)
}

/// Saturation: for every variable with both bounds, require the lower bound
/// below the upper one, normalizing that constraint and merging it in, until
/// a fixpoint. `sigma_pairs` caches the pairs already saturated.
pub fn saturate(
    st: &mut TypeStore,
    c: &CSet,
    sigma_pairs: &BTreeSet<(NodeId, NodeId)>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    ctx.spend()?;
    let merged = merge(st, c)?;
    let mut dom: Vec<VarId> = merged.iter().map(|nc| nc.var).collect();
    dom.sort_by_key(|&v| ctx.ord.rank(st, v));
    dom.dedup();
    for v in dom {
        let lo = merged
            .iter()
            .find(|nc| nc.var == v && nc.rel == Rel::Geq)
            .map(|nc| nc.bound);
        let hi = merged
            .iter()
            .find(|nc| nc.var == v && nc.rel == Rel::Leq)
            .map(|nc| nc.bound);
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if sigma_pairs.contains(&(lo, hi)) {
                continue;
            }
            let mut pairs2 = sigma_pairs.clone();
            pairs2.insert((lo, hi));
            let diff = st.mk_diff(lo, hi)?;
            let extra = norm_zero(st, diff, &BTreeSet::new(), ctx)?;
            let alts = cmeet(&vec![merged.clone()], &extra);
            let mut out = vec![];
            for alt in alts {
                out = cjoin(out, saturate(st, &alt, &pairs2, ctx)?);
            }
            return Ok(out);
        }
    }
    Ok(vec![merged])
}

fn cut_of(st: &TypeStore, v: VarId) -> Option<(VarId, BTreeSet<Label>)> {
    match st.var_info(v).origin.clone() {
        VarOrigin::Cut { base, cut } => Some((base, cut)),
        _ => match st.var_kind(v) {
            Kind::Row(_) => Some((v, BTreeSet::new())),
            _ => None,
        },
    }
}

/// All labels mentioned by derived variables of `base` anywhere in the set.
fn derived_labels(st: &mut TypeStore, c: &CSet, base: VarId) -> BTreeSet<Label> {
    let mut out = BTreeSet::new();
    let mut visit = |st: &mut TypeStore, v: VarId| match st.var_info(v).origin.clone() {
        VarOrigin::FieldProj { base: b, label } if b == base => {
            out.insert(label);
        }
        VarOrigin::Cut { base: b, cut } if b == base => {
            out.extend(cut.iter().copied());
        }
        _ => {}
    };
    for nc in c {
        visit(st, nc.var);
        for v in st.vars_of(nc.bound) {
            visit(st, v);
        }
    }
    out
}

/// Harmonization: every row variable gets one decomposition set per
/// constraint set, re-normalizing the constraints that used a smaller one.
pub fn harmonize(
    st: &mut TypeStore,
    c: &CSet,
    visited: &mut BTreeSet<CSet>,
    ctx: &mut TallyCtx,
) -> Result<CSets, TallyError> {
    ctx.spend()?;
    let violation = c.iter().copied().find(|nc| {
        if let Some((base, cut)) = cut_of(st, nc.var) {
            let l0 = derived_labels(st, c, base);
            !l0.is_subset(&cut)
        } else {
            false
        }
    });
    let Some(nc) = violation else {
        return Ok(vec![c.clone()]);
    };
    let (base, cut) = cut_of(st, nc.var).expect("violation is a row variable");
    let mut l0 = derived_labels(st, c, base);
    l0.extend(cut.iter().copied());
    let base_excl = st.row_var_excluded(base);
    l0.retain(|l| !base_excl.contains(l));
    // Refined left-hand side: row<(l = rho.l) over L0 \ cut | rho \ L0>_cut.
    let mut fields = BTreeMap::new();
    for &l in l0.difference(&cut) {
        let fv = st.derived_field_var(base, l);
        fields.insert(l, st.intern(Body::Var(fv)));
    }
    let tail_var = st.derived_cut_var(base, &l0);
    let mut atom_excl = base_excl.clone();
    atom_excl.extend(cut.iter().copied());
    let refined = st.mk_row_atom(fields, Tail::Var(tail_var), atom_excl)?;
    let constraint = match nc.rel {
        Rel::Leq => Constraint::leq(refined, nc.bound),
        Rel::Geq => Constraint::geq(refined, nc.bound),
    };
    let extra = norm_constraint(st, &constraint, ctx)?;
    let mut rest = c.clone();
    rest.remove(&nc);
    let alts = cmeet(&vec![rest], &extra);
    let mut out = vec![];
    for alt in alts {
        for s in saturate(st, &alt, &BTreeSet::new(), ctx)? {
            if visited.insert(s.clone()) {
                out = cjoin(out, harmonize(st, &s, visited, ctx)?);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Equations and unification
// ---------------------------------------------------------------------------

/// One equation; row equations keep the decomposed shape their solution was
/// assembled from, so derived-variable projections stay defined.
#[derive(Debug, Clone)]
pub struct Equation {
    pub var: VarId,
    pub rhs: NodeId,
    pub parts: Option<crate::subst::RowParts>,
}

/// An ordered system with at most one equation per variable.
#[derive(Debug, Clone)]
pub struct EquationSystem {
    pub eqs: Vec<Equation>,
}

impl EquationSystem {
    /// Top-level variables of every right-hand side rank above the left.
    pub fn is_well_ordered(&self, st: &mut TypeStore, ctx: &mut TallyCtx) -> bool {
        let dom: BTreeSet<VarId> = self.eqs.iter().map(|e| e.var).collect();
        self.eqs.iter().all(|e| {
            let rv = ctx.ord.rank(st, e.var);
            top_level_vars(st, e.rhs)
                .into_iter()
                .filter(|w| dom.contains(w))
                .all(|w| ctx.ord.rank(st, w) > rv)
        })
    }
}

/// A normalized constraint set is well-ordered when every bound's
/// top-level variables rank strictly above the constrained variable.
pub fn cset_well_ordered(st: &mut TypeStore, c: &CSet, ctx: &mut TallyCtx) -> bool {
    c.iter().all(|nc| {
        let rv = ctx.ord.rank(st, nc.var);
        top_level_vars(st, nc.bound)
            .into_iter()
            .all(|w| ctx.ord.rank(st, w) > rv)
    })
}

/// Variables whose substitution expands in place in a term of the given
/// kind: type and field variables through the connectives, tail variables
/// of row atoms for rows. A row variable in a record tail sits under the
/// record constructor and is guarded, so it does not count for a type.
pub fn top_level_vars(st: &TypeStore, n: NodeId) -> BTreeSet<VarId> {
    let row = st.kind(n).is_row();
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    fn go(
        st: &TypeStore,
        n: NodeId,
        row: bool,
        out: &mut BTreeSet<VarId>,
        seen: &mut BTreeSet<NodeId>,
    ) {
        if !seen.insert(n) {
            return;
        }
        match st.body(n) {
            Body::Var(v) => {
                out.insert(*v);
            }
            Body::Or(a, b) | Body::And(a, b) => {
                go(st, *a, row, out, seen);
                go(st, *b, row, out, seen);
            }
            Body::Not(a) => go(st, *a, row, out, seen),
            Body::RowAtom(_, Tail::Var(v), _) if row => {
                out.insert(*v);
            }
            _ => {}
        }
    }
    go(st, n, row, &mut out, &mut seen);
    out
}

/// Rewrites a harmonized constraint set into a well-ordered equation system,
/// filling missing bounds with the kind's bottom and top.
pub fn to_equations(
    st: &mut TypeStore,
    c: &CSet,
    ctx: &mut TallyCtx,
) -> Result<EquationSystem, TallyError> {
    let mut lows: BTreeMap<VarId, NodeId> = BTreeMap::new();
    let mut highs: BTreeMap<VarId, NodeId> = BTreeMap::new();
    for nc in c {
        match nc.rel {
            Rel::Geq => {
                lows.insert(nc.var, nc.bound);
            }
            Rel::Leq => {
                highs.insert(nc.var, nc.bound);
            }
        }
    }
    let dom: BTreeSet<VarId> = lows.keys().chain(highs.keys()).copied().collect();
    let mut eqs: Vec<Equation> = Vec::new();
    let mut row_bases: BTreeMap<VarId, BTreeSet<VarId>> = BTreeMap::new();
    for &v in &dom {
        match st.var_info(v).origin.clone() {
            VarOrigin::FieldProj { base, .. } => {
                row_bases.entry(base).or_default().insert(v);
            }
            VarOrigin::Cut { base, .. } => {
                row_bases.entry(base).or_default().insert(v);
            }
            _ => match st.var_kind(v) {
                Kind::Row(_) => {
                    row_bases.entry(v).or_default().insert(v);
                }
                kind => {
                    let lo = lows.get(&v).copied().unwrap_or_else(|| st.bottom_of(&kind));
                    let hi = highs.get(&v).copied().unwrap_or_else(|| st.top_of(&kind));
                    let fresh = st.fresh_var(&st.var_info(v).name.clone(), kind.clone());
                    let fv = st.var_term(fresh);
                    let joined = st.mk_or(lo, fv)?;
                    let rhs = st.mk_and(joined, hi)?;
                    eqs.push(Equation {
                        var: v,
                        rhs,
                        parts: None,
                    });
                }
            },
        }
    }
    for (base, members) in row_bases {
        let base_excl = st.row_var_excluded(base);
        // The harmonized cut: the unique cut variable in the domain, if any.
        let cuts: BTreeSet<BTreeSet<Label>> = members
            .iter()
            .filter_map(|&v| cut_of(st, v).map(|(_, cut)| cut))
            .collect();
        debug_assert!(
            cuts.len() <= 1,
            "harmonization leaves a single cut per base"
        );
        // The decomposition set must cover every projection and cut of the
        // base anywhere in the set, or applying the solution to those
        // occurrences would be undefined. A harmonized domain cut already
        // covers them; without one, collect them directly.
        let labels: BTreeSet<Label> = match cuts.into_iter().next() {
            Some(cut) => cut,
            None => derived_labels(st, c, base),
        };
        let mut fields: BTreeMap<Label, NodeId> = BTreeMap::new();
        for &l in &labels {
            let pv = st.derived_field_var(base, l);
            let lo = lows
                .get(&pv)
                .copied()
                .unwrap_or_else(|| st.bottom_of(&Kind::Field));
            let hi = highs.get(&pv).copied().unwrap_or_else(|| st.field_top());
            let fresh = st.fresh_var(&st.var_info(pv).name.clone(), Kind::Field);
            let fv = st.var_term(fresh);
            let joined = st.mk_or(lo, fv)?;
            fields.insert(l, st.mk_and(joined, hi)?);
        }
        let cut_var = if labels.is_empty() {
            base
        } else {
            st.derived_cut_var(base, &labels)
        };
        let tail_kind = st.var_kind(cut_var);
        let lo = lows
            .get(&cut_var)
            .copied()
            .unwrap_or_else(|| st.bottom_of(&tail_kind));
        let hi = highs
            .get(&cut_var)
            .copied()
            .unwrap_or_else(|| st.top_of(&tail_kind));
        let fresh = st.fresh_var(&st.var_info(base).name.clone(), tail_kind);
        let fv = st.var_term(fresh);
        let joined = st.mk_or(lo, fv)?;
        let tail_term = st.mk_and(joined, hi)?;
        let rhs = expand_row(st, fields.clone(), tail_term, base_excl)?;
        eqs.push(Equation {
            var: base,
            rhs,
            parts: Some(crate::subst::RowParts {
                fields,
                rest: tail_term,
            }),
        });
    }
    eqs.sort_by_key(|e| ctx.ord.rank(st, e.var));
    Ok(EquationSystem { eqs })
}

/// Solves a well-ordered equation system into its general solution. Right
/// sides mentioning their own variable become recursive types.
pub fn unify(
    st: &mut TypeStore,
    e: &EquationSystem,
    ctx: &mut TallyCtx,
) -> Result<Substitution, TallyError> {
    let mut eqs: Vec<Equation> = e.eqs.clone();
    eqs.sort_by_key(|eq| ctx.ord.rank(st, eq.var));
    let mut solved: Vec<Equation> = Vec::new();
    for i in 0..eqs.len() {
        let eq = eqs[i].clone();
        let (mu, parts) = if st.vars_of(eq.rhs).contains(&eq.var) {
            (st.mk_rec(eq.var, eq.rhs)?, None)
        } else {
            (eq.rhs, eq.parts.clone())
        };
        let mut one = Substitution::new();
        match &parts {
            Some(p) => one.bind_row(st, eq.var, p.fields.clone(), p.rest)?,
            None => one.bind(st, eq.var, mu)?,
        }
        for item in eqs.iter_mut().skip(i + 1) {
            item.rhs = apply(st, &one, item.rhs)?;
            if let Some(p) = &mut item.parts {
                let mut fields2 = BTreeMap::new();
                for (&l, &f) in &p.fields {
                    fields2.insert(l, apply(st, &one, f)?);
                }
                p.fields = fields2;
                p.rest = apply(st, &one, p.rest)?;
            }
        }
        solved.push(Equation {
            var: eq.var,
            rhs: mu,
            parts,
        });
    }
    // Back-substitute so no binding mentions a domain variable.
    let mut out = Substitution::new();
    for eq in solved.iter().rev() {
        match &eq.parts {
            Some(p) => {
                let mut fields2 = BTreeMap::new();
                for (&l, &f) in &p.fields {
                    fields2.insert(l, apply(st, &out, f)?);
                }
                let rest2 = apply(st, &out, p.rest)?;
                out.bind_row(st, eq.var, fields2, rest2)?;
            }
            None => {
                let t2 = apply(st, &out, eq.rhs)?;
                out.bind(st, eq.var, t2)?;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The complete algorithm
// ---------------------------------------------------------------------------

pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Runs the five tallying steps and returns the solution set (possibly
/// empty). Branches that fail inside `unify` on a knot that cannot be tied
/// are dropped, as are degenerate solutions that instantiate a row variable
/// to an empty row: such an assignment collapses every record the variable
/// tails and the worked examples never count it as a solution.
pub fn tally(
    st: &mut TypeStore,
    constraints: &[Constraint],
    delta: &BTreeSet<VarId>,
    fuel: u64,
) -> Result<Vec<Substitution>, TallyError> {
    let ord = Ordering::build(st, constraints, delta);
    let mut ctx = TallyCtx { delta, ord, fuel };
    let normalized = normalize(st, constraints, &mut ctx)?;
    debug_assert!(normalized
        .iter()
        .all(|c| cset_well_ordered(st, c, &mut ctx)));
    let mut saturated: CSets = vec![];
    for c in &normalized {
        saturated = cjoin(saturated, saturate(st, c, &BTreeSet::new(), &mut ctx)?);
    }
    let mut harmonized: CSets = vec![];
    for c in &saturated {
        let mut visited = BTreeSet::new();
        harmonized = cjoin(harmonized, harmonize(st, c, &mut visited, &mut ctx)?);
    }
    debug_assert!(harmonized
        .iter()
        .all(|c| cset_well_ordered(st, c, &mut ctx)));
    let mut out: Vec<Substitution> = Vec::new();
    'sets: for c in &harmonized {
        let eqs = to_equations(st, c, &mut ctx)?;
        debug_assert!(eqs.is_well_ordered(st, &mut ctx));
        match unify(st, &eqs, &mut ctx) {
            Ok(sub) => {
                for (v, t) in sub.iter() {
                    if st.var_kind(v).is_row() && is_empty(st, t) {
                        continue 'sets;
                    }
                }
                if !out.contains(&sub) {
                    out.push(sub);
                }
            }
            Err(TallyError::Type(TypeError::Contractivity(_))) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `sigma` solves every constraint (checked through the subtype engine).
pub fn solution_satisfies(
    st: &mut TypeStore,
    sub: &Substitution,
    constraints: &[Constraint],
) -> bool {
    constraints.iter().all(|c| {
        let (Ok(l), Ok(r)) = (apply(st, sub, c.left), apply(st, sub, c.right)) else {
            return false;
        };
        match c.rel {
            Rel::Leq => is_subtype(st, l, r),
            Rel::Geq => is_subtype(st, r, l),
        }
    })
}

/// A copy of `sub` with every tallying-introduced fresh variable of its
/// binding terms set to the bottom of its kind: the minimal instance of the
/// general solution.
fn bottom_slack(st: &mut TypeStore, sub: &Substitution) -> Result<Substitution, TallyError> {
    let mut slack: BTreeSet<VarId> = BTreeSet::new();
    for (_, t) in sub.iter() {
        for v in st.vars_of(t) {
            if matches!(st.var_info(v).origin, VarOrigin::Fresh) {
                slack.insert(v);
            }
        }
    }
    if slack.is_empty() {
        return Ok(sub.clone());
    }
    let mut zero = Substitution::new();
    for v in slack {
        let kind = st.var_kind(v);
        let b = st.bottom_of(&kind);
        zero.bind(st, v, b)?;
    }
    Ok(compose(st, &zero, sub)?)
}

/// Searches, by increasing cardinality, for substitutions `[s_i]` with
/// `/\ t1 s_i <= t2` and domains disjoint from `delta`. Prefers the minimal
/// instance of a found solution (slack variables bottomed) when it still
/// verifies.
pub fn leq_sub(
    st: &mut TypeStore,
    t1: NodeId,
    t2: NodeId,
    delta: &BTreeSet<VarId>,
    max_card: u32,
    fuel: u64,
) -> Result<Option<Vec<Substitution>>, TallyError> {
    if is_subtype(st, t1, t2) {
        return Ok(Some(vec![Substitution::new()]));
    }
    for card in 1..=max_card {
        let mut copies = Vec::new();
        let mut meet_parts = Vec::new();
        for _ in 0..card {
            let (renamed, ren) = freshen(st, t1, delta)?;
            meet_parts.push(renamed);
            copies.push(ren);
        }
        let meet = st.mk_and_all(&Kind::Type, &meet_parts)?;
        let theta = tally(st, &[Constraint::leq(meet, t2)], delta, fuel)?;
        for sub in theta {
            let mut insts = Vec::new();
            for ren in &copies {
                insts.push(compose(st, &sub, ren)?);
            }
            let verify = |st: &mut TypeStore, insts: &[Substitution]| -> Result<bool, TallyError> {
                let mut parts = Vec::new();
                for s in insts {
                    parts.push(apply(st, s, t1)?);
                }
                let whole = st.mk_and_all(&Kind::Type, &parts)?;
                Ok(is_subtype(st, whole, t2))
            };
            let mut minimal = Vec::new();
            for s in &insts {
                minimal.push(bottom_slack(st, s)?);
            }
            if verify(st, &minimal)? {
                return Ok(Some(minimal));
            }
            if verify(st, &insts)? {
                return Ok(Some(insts));
            }
        }
    }
    Ok(None)
}

/// `dom(t)` for `t <= 0 -> 1`: the meet over non-empty arrow summands of the
/// join of their domains.
pub fn arrow_domain(st: &mut TypeStore, t: NodeId) -> Result<NodeId, TallyError> {
    let summands = to_summands(st, t);
    let mut metas: Vec<NodeId> = Vec::new();
    for s in &summands {
        let node = crate::dnf::summand_node(st, &Kind::Type, s);
        if is_empty(st, node) {
            continue;
        }
        let doms: Vec<NodeId> = s
            .pos
            .iter()
            .filter_map(|&p| match st.body(p) {
                Body::Arrow(d, _) => Some(*d),
                _ => None,
            })
            .collect();
        metas.push(st.mk_or_all(&Kind::Type, &doms)?);
    }
    Ok(st.mk_and_all(&Kind::Type, &metas)?)
}

/// Minimal result type of applying `t` to `s`: `t o s = min{ r | t <= s -> r }`.
pub fn min_apply(st: &mut TypeStore, t: NodeId, s: NodeId) -> Result<NodeId, TallyError> {
    let summands = to_summands(st, t);
    let mut results: Vec<NodeId> = Vec::new();
    for su in &summands {
        let node = crate::dnf::summand_node(st, &Kind::Type, su);
        if is_empty(st, node) {
            continue;
        }
        let arrows: Vec<(NodeId, NodeId)> = su
            .pos
            .iter()
            .filter_map(|&p| match st.body(p) {
                Body::Arrow(d, c) => Some((*d, *c)),
                _ => None,
            })
            .collect();
        let n = arrows.len();
        for mask in 0u32..(1 << n) {
            // Q = selected subset; keep it when s is not below the join of
            // the selected domains.
            let mut sel_dom: Vec<NodeId> = Vec::new();
            for (i, &(d, _)) in arrows.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    sel_dom.push(d);
                }
            }
            let join = st.mk_or_all(&Kind::Type, &sel_dom)?;
            if is_subtype(st, s, join) {
                continue;
            }
            let rest_cod: Vec<NodeId> = arrows
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, &(_, c))| c)
                .collect();
            results.push(st.mk_and_all(&Kind::Type, &rest_cod)?);
        }
    }
    Ok(st.mk_or_all(&Kind::Type, &results)?)
}

/// The application operator `t1 . t2` over a dove-tail search for two
/// substitution sets within `budget` total copies. Returns candidate result
/// types, earliest (smallest expansion) level first.
pub fn apply_types(
    st: &mut TypeStore,
    t1: NodeId,
    t2: NodeId,
    delta: &BTreeSet<VarId>,
    budget: u32,
    fuel: u64,
) -> Result<Vec<NodeId>, TallyError> {
    let bot = st.bottom();
    let any = st.any();
    let top_arrow = st.mk_arrow(bot, any)?;
    let mut out: Vec<NodeId> = Vec::new();
    for total in 2..=budget.max(2) {
        for j in 1..total {
            let i = total - j;
            let mut t1_parts = Vec::new();
            for _ in 0..j {
                let (renamed, _) = freshen(st, t1, delta)?;
                t1_parts.push(renamed);
            }
            let mut t2_parts = Vec::new();
            for _ in 0..i {
                let (renamed, _) = freshen(st, t2, delta)?;
                t2_parts.push(renamed);
            }
            let f = st.mk_and_all(&Kind::Type, &t1_parts)?;
            let x = st.mk_and_all(&Kind::Type, &t2_parts)?;
            let gamma = st.fresh_var("g", Kind::Type);
            let gamma_n = st.var_term(gamma);
            let target = st.mk_arrow(x, gamma_n)?;
            let theta = tally(st, &[Constraint::leq(f, target)], delta, fuel)?;
            for sub in theta {
                let minimal = bottom_slack(st, &sub)?;
                let variants: Vec<Substitution> = if minimal == sub {
                    vec![sub]
                } else {
                    vec![minimal, sub]
                };
                for sub in variants {
                    let fs = apply(st, &sub, f)?;
                    if is_empty(st, fs) || !is_subtype(st, fs, top_arrow) {
                        continue;
                    }
                    let xs = apply(st, &sub, x)?;
                    if is_empty(st, xs) {
                        continue;
                    }
                    let dom = arrow_domain(st, fs)?;
                    if !is_subtype(st, xs, dom) {
                        continue;
                    }
                    let r = min_apply(st, fs, xs)?;
                    if !out.iter().any(|&o| crate::subtype::is_equiv(st, o, r)) {
                        out.push(r);
                    }
                }
            }
        }
        if !out.is_empty() {
            break;
        }
    }
    Ok(out)
}
