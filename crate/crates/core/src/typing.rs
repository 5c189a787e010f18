//! The algorithmic type system for the record calculus, plus the type
//! operators for selection (`t.l`) and field deletion (the row `|t|_l`).
//!
//! Two modes: `Practical` checks the plain side conditions of the rules and
//! only falls back to tallying for applications that need instantiation;
//! `Complete` runs the substitution search of the side conditions
//! everywhere, at a configurable expansion budget.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dnf::{field_dnf, to_summands, FieldPart};
use crate::subst::{apply, expand_record};
use crate::subtype::{is_empty, is_subtype, AtomView};
use crate::tally::{apply_types, arrow_domain, leq_sub, min_apply, TallyError};
use crate::types::{Basic, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Practical,
    Complete,
}

#[derive(Debug, Clone)]
pub struct CheckCfg {
    pub mode: Mode,
    pub max_card: u32,
    pub budget: u32,
    pub fuel: u64,
}

impl Default for CheckCfg {
    fn default() -> Self {
        CheckCfg {
            mode: Mode::Practical,
            max_card: 2,
            budget: 4,
            fuel: crate::tally::DEFAULT_FUEL,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypingError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("rule {rule}: {msg}")]
    Side { rule: &'static str, msg: String },
    #[error("rule {rule}: no instantiation found within budget")]
    Budget { rule: &'static str },
    #[error(transparent)]
    Kind(#[from] TypeError),
    #[error(transparent)]
    Tally(#[from] TallyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Const {
    Int(i64),
    Str(String),
    True,
    False,
}

/// Expressions of the record calculus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Const),
    Var(String),
    App(Box<Expr>, Box<Expr>),
    Abs {
        annot: Vec<(NodeId, NodeId)>,
        param: String,
        body: Box<Expr>,
    },
    Empty,
    Ext {
        rec: Box<Expr>,
        label: String,
        val: Box<Expr>,
    },
    Sel {
        rec: Box<Expr>,
        label: String,
    },
    Del {
        rec: Box<Expr>,
        label: String,
    },
}

impl Expr {
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Abs { .. } | Expr::Empty => true,
            Expr::Ext { rec, val, .. } => rec.is_value() && val.is_value(),
            _ => false,
        }
    }
}

/// Typing environment: term bindings and the monomorphic variable set.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    pub gamma: BTreeMap<String, NodeId>,
    pub delta: BTreeSet<VarId>,
}

pub fn basic_of(st: &mut TypeStore, c: &Const) -> NodeId {
    match c {
        Const::Int(_) => st.mk_basic(Basic::Int),
        Const::Str(_) => st.mk_basic(Basic::Str),
        Const::True => st.mk_basic(Basic::True),
        Const::False => st.mk_basic(Basic::False),
    }
}

// ---------------------------------------------------------------------------
// Type operators
// ---------------------------------------------------------------------------

/// The record-world reading of a summand: the positive atoms (or the
/// implicit top record when there are none) and the record-world
/// negatives. `None` for semantically empty summands, which contribute
/// nothing to the record operators.
type WorldViews = (Vec<AtomView>, Vec<AtomView>);

fn record_world_views(
    st: &mut TypeStore,
    s: &crate::dnf::Summand,
) -> Result<Option<WorldViews>, TypingError> {
    let node = crate::dnf::summand_node(st, &Kind::Type, s);
    if is_empty(st, node) {
        return Ok(None);
    }
    let pos: Vec<AtomView> = if s.pos.is_empty() {
        let top = st.top_record();
        vec![AtomView::of(st, top)]
    } else {
        s.pos.iter().map(|&p| AtomView::of(st, p)).collect()
    };
    let neg: Vec<AtomView> = s
        .neg
        .iter()
        .filter(|&&q| matches!(st.body(q), crate::types::Body::Record(..)))
        .map(|&q| AtomView::of(st, q))
        .collect();
    Ok(Some((pos, neg)))
}

/// `t.l` for `t <= {.. l: any}`: the minimal `s` with `t <= {.. l: s}`.
///
/// Works summand by summand over the choices of negatives applied to the
/// field; a choice only contributes when both its field part and the
/// residual record part are inhabited, which is what makes the result
/// minimal.
pub fn sel_type(st: &mut TypeStore, t: NodeId, l: Label) -> Result<NodeId, TypingError> {
    let any = st.any();
    let probe = st.mk_record(vec![(l, any)], Tail::Open)?;
    if !is_subtype(st, t, probe) {
        return Err(TypingError::Side {
            rule: "Sel",
            msg: format!("the field `{}` may be absent", st.label_name(l)),
        });
    }
    let summands = to_summands(st, t);
    let mut out: Vec<NodeId> = Vec::new();
    for s in &summands {
        let Some((pos, neg)) = record_world_views(st, s)? else {
            continue;
        };
        for mask in 0u32..(1 << neg.len()) {
            let on_field: Vec<usize> = (0..neg.len()).filter(|i| mask & (1 << i) != 0).collect();
            let off_field: Vec<usize> = (0..neg.len()).filter(|i| mask & (1 << i) == 0).collect();
            let mut field_parts: Vec<NodeId> = pos.iter().map(|a| a.field(st, l)).collect();
            for &i in &on_field {
                let f = neg[i].field(st, l);
                field_parts.push(st.mk_not(f));
            }
            let field = st.mk_and_all(&Kind::Field, &field_parts)?;
            if is_empty(st, field) {
                continue;
            }
            if !sel_residual_inhabited(st, &pos, &neg, &off_field, l)? {
                continue;
            }
            out.push(field_value_part(st, field)?);
        }
    }
    Ok(st.mk_or_all(&Kind::Type, &out)?)
}

/// The record residue of a selection branch: the summand with the field at
/// `l` widened away, negatives split between their widened form and their
/// tail row.
fn sel_residual_inhabited(
    st: &mut TypeStore,
    pos: &[AtomView],
    neg: &[AtomView],
    off_field: &[usize],
    l: Label,
) -> Result<bool, TypingError> {
    let covers = |st: &TypeStore, a: &AtomView| match a.tail {
        Tail::Var(v) => !st.row_var_excluded(v).contains(&l),
        _ => false,
    };
    let nvar: Vec<usize> = off_field
        .iter()
        .copied()
        .filter(|&i| covers(st, &neg[i]))
        .collect();
    let mut alts: Vec<NodeId> = Vec::new();
    for vmask in 0u32..(1 << nvar.len()) {
        let tag_set: BTreeSet<usize> = nvar
            .iter()
            .enumerate()
            .filter(|(k, _)| vmask & (1 << k) != 0)
            .map(|(_, &i)| i)
            .collect();
        let mut parts: Vec<NodeId> = Vec::new();
        for a in pos {
            parts.push(widen_at(st, a, l)?);
            if covers(st, a) {
                parts.push(fin_record(st, a)?);
            }
        }
        for &i in off_field {
            if tag_set.contains(&i) {
                let r = fin_record(st, &neg[i])?;
                parts.push(st.mk_not(r));
            } else {
                let w = widen_at(st, &neg[i], l)?;
                parts.push(st.mk_not(w));
            }
        }
        alts.push(st.mk_and_all(&Kind::Type, &parts)?);
    }
    let res = st.mk_or_all(&Kind::Type, &alts)?;
    Ok(!is_empty(st, res))
}

/// `{ l = any|undef | cutrow(R, l) }`: the atom with the field at `l`
/// released; a variable tail covering `l` widens to open.
fn widen_at(st: &mut TypeStore, a: &AtomView, l: Label) -> Result<NodeId, TypingError> {
    let mut fields = a.fields.clone();
    fields.insert(l, st.field_top());
    let tail = match a.tail {
        Tail::Var(v) if !st.row_var_excluded(v).contains(&l) => Tail::Open,
        t => t,
    };
    Ok(st.mk_record(fields.into_iter().collect(), tail)?)
}

/// `{ fin(R) = any|undef .. | tail(R) }`: only the tail information remains.
fn fin_record(st: &mut TypeStore, a: &AtomView) -> Result<NodeId, TypingError> {
    let top = st.field_top();
    let fields: Vec<(Label, NodeId)> = a.fields.keys().map(|&l| (l, top)).collect();
    Ok(st.mk_record(fields, a.tail)?)
}

/// The value part of a field-type as a plain type.
fn field_value_part(st: &mut TypeStore, f: NodeId) -> Result<NodeId, TypingError> {
    let mut alts = Vec::new();
    for s in field_dnf(st, f) {
        if s.vpos.intersection(&s.vneg).next().is_some() {
            continue;
        }
        if let FieldPart::Value(t) = s.part {
            alts.push(t);
        }
    }
    Ok(st.mk_or_all(&Kind::Type, &alts)?)
}

/// `|t|_l` for `t <= {..}`: the row of `t` with the field at `l` removed,
/// defined literal by literal on the DNF; type variables are erased and
/// semantically empty summands dropped.
pub fn del_field(st: &mut TypeStore, t: NodeId, l: Label) -> Result<NodeId, TypingError> {
    let top_rec = st.top_record();
    if !is_subtype(st, t, top_rec) {
        return Err(TypingError::Side {
            rule: "Del",
            msg: "the expression is not surely a record".into(),
        });
    }
    let row_kind = Kind::Row(BTreeSet::from([l]));
    let summands = to_summands(st, t);
    let mut alts: Vec<NodeId> = Vec::new();
    for s in &summands {
        let Some((pos, neg)) = record_world_views(st, s)? else {
            continue;
        };
        let mut parts: Vec<NodeId> = Vec::new();
        for a in &pos {
            parts.push(del_pos_literal(st, a, l)?);
        }
        for a in &neg {
            if let Some(r) = del_neg_literal(st, a, l)? {
                parts.push(r);
            }
        }
        alts.push(st.mk_and_all(&row_kind, &parts)?);
    }
    Ok(st.mk_or_all(&row_kind, &alts)?)
}

fn del_pos_literal(st: &mut TypeStore, a: &AtomView, l: Label) -> Result<NodeId, TypingError> {
    let excl = BTreeSet::from([l]);
    if a.fields.contains_key(&l) || !matches!(a.tail, Tail::Var(_)) {
        let mut fields = a.fields.clone();
        fields.remove(&l);
        Ok(st.mk_row_atom(fields, a.tail, excl)?)
    } else {
        // A row variable covers l: its binding must be forgotten.
        Ok(st.mk_row_atom(a.fields.clone(), Tail::Open, excl)?)
    }
}

/// `None` stands for the top row on `Labels \ {l}` (a dropped conjunct).
fn del_neg_literal(
    st: &mut TypeStore,
    a: &AtomView,
    l: Label,
) -> Result<Option<NodeId>, TypingError> {
    let excl = BTreeSet::from([l]);
    let keeps_shape = match a.fields.get(&l) {
        Some(&f) => {
            let top = st.field_top();
            crate::subtype::is_subtype(st, top, f)
        }
        None => a.tail == Tail::Open,
    };
    if keeps_shape {
        let mut fields = a.fields.clone();
        fields.remove(&l);
        let atom = st.mk_row_atom(fields, a.tail, excl)?;
        Ok(Some(st.mk_not(atom)))
    } else {
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

pub struct Checker {
    pub cfg: CheckCfg,
}

impl Checker {
    pub fn new(cfg: CheckCfg) -> Self {
        Checker { cfg }
    }

    pub fn type_of(
        &self,
        st: &mut TypeStore,
        env: &TypeEnv,
        e: &Expr,
    ) -> Result<NodeId, TypingError> {
        match e {
            Expr::Const(c) => Ok(basic_of(st, c)),
            Expr::Var(x) => env
                .gamma
                .get(x)
                .copied()
                .ok_or_else(|| TypingError::Unbound(x.clone())),
            Expr::Abs { annot, param, body } => {
                let mut env2 = env.clone();
                for &(ti, ti2) in annot {
                    env2.delta.extend(st.vars_of(ti));
                    env2.delta.extend(st.vars_of(ti2));
                }
                let mut arrows = Vec::new();
                for &(ti, ti2) in annot {
                    let mut env_i = env2.clone();
                    env_i.gamma.insert(param.clone(), ti);
                    let tb = self.type_of(st, &env_i, body)?;
                    let found =
                        leq_sub(st, tb, ti2, &env_i.delta, self.cfg.max_card, self.cfg.fuel)?;
                    if found.is_none() {
                        return Err(TypingError::Side {
                            rule: "Abs",
                            msg: format!(
                                "body type {} does not match the annotation {}",
                                st.debug_node(tb),
                                st.debug_node(ti2)
                            ),
                        });
                    }
                    arrows.push(st.mk_arrow(ti, ti2)?);
                }
                Ok(st.mk_and_all(&Kind::Type, &arrows)?)
            }
            Expr::App(e1, e2) => {
                let t1 = self.type_of(st, env, e1)?;
                let t2 = self.type_of(st, env, e2)?;
                let bot = st.bottom();
                let any = st.any();
                let top_arrow = st.mk_arrow(bot, any)?;
                if self.cfg.mode == Mode::Practical && is_subtype(st, t1, top_arrow) {
                    let dom = arrow_domain(st, t1)?;
                    if is_subtype(st, t2, dom) {
                        return Ok(min_apply(st, t1, t2)?);
                    }
                }
                let candidates =
                    apply_types(st, t1, t2, &env.delta, self.cfg.budget, self.cfg.fuel)?;
                self.pick_candidate(st, candidates, "App")
            }
            Expr::Empty => Ok(st.mk_record(vec![], Tail::Closed)?),
            Expr::Ext { rec, label, val } => {
                let l = st.label(label);
                let t = self.type_of(st, env, rec)?;
                let t2 = self.type_of(st, env, val)?;
                let u = st.undef();
                let absent = st.mk_record(vec![(l, u)], Tail::Open)?;
                let base = self.coerce(st, env, t, absent, "Ext")?;
                let row = del_field(st, base, l)?;
                let f = st.as_field(t2)?;
                Ok(expand_record(st, BTreeMap::from([(l, f)]), row)?)
            }
            Expr::Del { rec, label } => {
                let l = st.label(label);
                let t = self.type_of(st, env, rec)?;
                let top_rec = st.top_record();
                let base = self.coerce(st, env, t, top_rec, "Del")?;
                let row = del_field(st, base, l)?;
                let u = st.undef();
                Ok(expand_record(st, BTreeMap::from([(l, u)]), row)?)
            }
            Expr::Sel { rec, label } => {
                let l = st.label(label);
                let t = self.type_of(st, env, rec)?;
                let any = st.any();
                let present = st.mk_record(vec![(l, any)], Tail::Open)?;
                let base = self.coerce(st, env, t, present, "Sel")?;
                sel_type(st, base, l)
            }
        }
    }

    /// Practical mode demands `t <= bound`; complete mode may instantiate
    /// `t` first. Returns the (possibly instantiated) record type.
    fn coerce(
        &self,
        st: &mut TypeStore,
        env: &TypeEnv,
        t: NodeId,
        bound: NodeId,
        rule: &'static str,
    ) -> Result<NodeId, TypingError> {
        match self.cfg.mode {
            Mode::Practical => {
                if is_subtype(st, t, bound) {
                    Ok(t)
                } else {
                    Err(TypingError::Side {
                        rule,
                        msg: format!(
                            "{} is not a subtype of {}",
                            st.debug_node(t),
                            st.debug_node(bound)
                        ),
                    })
                }
            }
            Mode::Complete => {
                let found = leq_sub(st, t, bound, &env.delta, self.cfg.max_card, self.cfg.fuel)?;
                match found {
                    None => Err(TypingError::Budget { rule }),
                    Some(subs) => {
                        let mut parts = Vec::new();
                        for s in &subs {
                            parts.push(apply(st, s, t)?);
                        }
                        Ok(st.mk_and_all(&Kind::Type, &parts)?)
                    }
                }
            }
        }
    }

    fn pick_candidate(
        &self,
        st: &mut TypeStore,
        candidates: Vec<NodeId>,
        rule: &'static str,
    ) -> Result<NodeId, TypingError> {
        if candidates.is_empty() {
            return Err(TypingError::Budget { rule });
        }
        let inter = st.mk_and_all(&Kind::Type, &candidates)?;
        if !is_empty(st, inter) {
            return Ok(inter);
        }
        Ok(candidates[0])
    }
}

/// Test support: a closed value checks against `t` when its practical type
/// is a subtype of `t`.
pub fn check_value(st: &mut TypeStore, v: &Expr, t: NodeId) -> bool {
    debug_assert!(v.is_value());
    let checker = Checker::new(CheckCfg::default());
    match checker.type_of(st, &TypeEnv::default(), v) {
        Ok(tv) => is_subtype(st, tv, t),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> TypeStore {
        TypeStore::new()
    }

    fn int_lit(n: i64) -> Expr {
        Expr::Const(Const::Int(n))
    }

    #[test]
    fn sel_type_on_plain_records() {
        let mut st = store();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let tt = st.mk_basic(Basic::True);
        let r1 = st.mk_record(vec![(a, i)], Tail::Open).unwrap();
        let s1 = sel_type(&mut st, r1, a).unwrap();
        assert!(crate::subtype::is_equiv(&mut st, s1, i));
        let r2 = st.mk_record(vec![(a, tt)], Tail::Open).unwrap();
        let u = st.mk_or(r1, r2).unwrap();
        let sel = sel_type(&mut st, u, a).unwrap();
        let it = st.mk_or(i, tt).unwrap();
        assert!(crate::subtype::is_equiv(&mut st, sel, it));
    }

    #[test]
    fn sel_type_is_minimal_on_negated_fields() {
        // ({.. a: int|bool} & !{.. a: bool|undef}).a is int, not int|bool.
        let mut st = store();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let bo = st.mk_bool();
        let ib = st.mk_or(i, bo).unwrap();
        let fb = st.as_field(bo).unwrap();
        let u = st.undef();
        let fbu = st.mk_or(fb, u).unwrap();
        let rpos = st.mk_record(vec![(a, ib)], Tail::Open).unwrap();
        let rneg = st.mk_record(vec![(a, fbu)], Tail::Open).unwrap();
        let t = st.mk_diff(rpos, rneg).unwrap();
        let sel = sel_type(&mut st, t, a).unwrap();
        assert!(
            crate::subtype::is_equiv(&mut st, sel, i),
            "got {}",
            st.debug_node(sel)
        );
    }

    #[test]
    fn sel_type_rejects_possibly_absent_field() {
        let mut st = store();
        let a = st.label("a");
        let empty = st.mk_record(vec![], Tail::Closed).unwrap();
        assert!(matches!(
            sel_type(&mut st, empty, a),
            Err(TypingError::Side { rule: "Sel", .. })
        ));
    }

    #[test]
    fn del_field_drops_explicit_fields() {
        let mut st = store();
        let a = st.label("a");
        let i = st.mk_basic(Basic::Int);
        let closed = st.mk_record(vec![(a, i)], Tail::Closed).unwrap();
        let row = del_field(&mut st, closed, a).unwrap();
        let expected = st
            .mk_row_atom(BTreeMap::new(), Tail::Closed, BTreeSet::from([a]))
            .unwrap();
        assert!(crate::subtype::is_equiv(&mut st, row, expected));
    }

    #[test]
    fn del_field_forgets_row_variable_information() {
        // |{a=int | rho}|_b is the open row {a=int ..} on Labels \ {b}.
        let mut st = store();
        let a = st.label("a");
        let b = st.label("b");
        let i = st.mk_basic(Basic::Int);
        let rho = st.var("rho", Kind::Row(BTreeSet::from([a])));
        let t = st.mk_record(vec![(a, i)], Tail::Var(rho)).unwrap();
        let row = del_field(&mut st, t, b).unwrap();
        let fi = st.as_field(i).unwrap();
        let expected = st
            .mk_row_atom(BTreeMap::from([(a, fi)]), Tail::Open, BTreeSet::from([b]))
            .unwrap();
        assert!(crate::subtype::is_equiv(&mut st, row, expected));
    }

    #[test]
    fn empty_record_types_as_closed_empty() {
        let mut st = store();
        let checker = Checker::new(CheckCfg::default());
        let t = checker
            .type_of(&mut st, &TypeEnv::default(), &Expr::Empty)
            .unwrap();
        let e = st.mk_record(vec![], Tail::Closed).unwrap();
        assert_eq!(t, e);
    }

    #[test]
    fn selection_of_added_field() {
        let mut st = store();
        let checker = Checker::new(CheckCfg::default());
        let prog = Expr::Sel {
            rec: Box::new(Expr::Ext {
                rec: Box::new(Expr::Empty),
                label: "a".into(),
                val: Box::new(int_lit(3)),
            }),
            label: "a".into(),
        };
        let t = checker
            .type_of(&mut st, &TypeEnv::default(), &prog)
            .unwrap();
        let i = st.mk_basic(Basic::Int);
        assert!(crate::subtype::is_equiv(&mut st, t, i));
    }

    #[test]
    fn selection_on_empty_record_is_rejected() {
        let mut st = store();
        let checker = Checker::new(CheckCfg::default());
        let prog = Expr::Sel {
            rec: Box::new(Expr::Empty),
            label: "a".into(),
        };
        assert!(checker
            .type_of(&mut st, &TypeEnv::default(), &prog)
            .is_err());
    }

    #[test]
    fn deletion_on_empty_record_stays_empty_record() {
        let mut st = store();
        let checker = Checker::new(CheckCfg::default());
        let prog = Expr::Del {
            rec: Box::new(Expr::Empty),
            label: "a".into(),
        };
        let t = checker
            .type_of(&mut st, &TypeEnv::default(), &prog)
            .unwrap();
        let e = st.mk_record(vec![], Tail::Closed).unwrap();
        assert!(crate::subtype::is_equiv(&mut st, t, e));
    }

    #[test]
    fn identity_function_applies() {
        let mut st = store();
        let i = st.mk_basic(Basic::Int);
        let checker = Checker::new(CheckCfg::default());
        let f = Expr::Abs {
            annot: vec![(i, i)],
            param: "x".into(),
            body: Box::new(Expr::Var("x".into())),
        };
        let prog = Expr::App(Box::new(f), Box::new(int_lit(3)));
        let t = checker
            .type_of(&mut st, &TypeEnv::default(), &prog)
            .unwrap();
        assert!(is_subtype(&mut st, t, i));
    }

    #[test]
    fn del_domain_checks_against_row_polymorphic_annotation() {
        // lam x : ({domain: any|undef | rho} -> {domain: undef | rho}) . x \ domain
        let mut st = store();
        let domain = st.label("domain");
        let rho = st.var("f", Kind::Row(BTreeSet::from([domain])));
        let ftop = st.field_top();
        let dom_t = st.mk_record(vec![(domain, ftop)], Tail::Var(rho)).unwrap();
        let u = st.undef();
        let cod_t = st.mk_record(vec![(domain, u)], Tail::Var(rho)).unwrap();
        let body = Expr::Del {
            rec: Box::new(Expr::Var("x".into())),
            label: "domain".into(),
        };
        let f = Expr::Abs {
            annot: vec![(dom_t, cod_t)],
            param: "x".into(),
            body: Box::new(body),
        };
        let checker = Checker::new(CheckCfg::default());
        let t = checker.type_of(&mut st, &TypeEnv::default(), &f).unwrap();
        let expected = st.mk_arrow(dom_t, cod_t).unwrap();
        assert!(crate::subtype::is_equiv(&mut st, t, expected));
    }

    #[test]
    fn operators_handle_purely_negative_record_types() {
        // The records with `l` present, written without a positive atom.
        let mut st = store();
        let l = st.label("l");
        let i = st.mk_basic(Basic::Int);
        let s = st.mk_basic(Basic::Str);
        let tt = st.mk_basic(Basic::True);
        let ff = st.mk_basic(Basic::False);
        let bot = st.bottom();
        let any = st.any();
        let arr = st.mk_arrow(bot, any).unwrap();
        let u = st.undef();
        let labs = st.mk_record(vec![(l, u)], Tail::Open).unwrap();
        let mut t = st.any();
        for x in [i, s, tt, ff, arr, labs] {
            let nx = st.mk_not(x);
            t = st.mk_and(t, nx).unwrap();
        }
        let sel = sel_type(&mut st, t, l).unwrap();
        assert!(crate::subtype::is_equiv(&mut st, sel, any));
        let row = del_field(&mut st, t, l).unwrap();
        let top_row = st
            .mk_row_atom(BTreeMap::new(), Tail::Open, BTreeSet::from([l]))
            .unwrap();
        assert!(is_subtype(&mut st, row, top_row));
    }

    #[test]
    fn widening_an_unused_binding_keeps_acceptance() {
        let mut st = store();
        let i = st.mk_basic(Basic::Int);
        let any = st.any();
        let checker = Checker::new(CheckCfg::default());
        let prog = Expr::App(
            Box::new(Expr::Abs {
                annot: vec![(i, i)],
                param: "x".into(),
                body: Box::new(Expr::Var("x".into())),
            }),
            Box::new(int_lit(1)),
        );
        let mut narrow = TypeEnv::default();
        narrow.gamma.insert("unused".into(), i);
        let mut wide = TypeEnv::default();
        wide.gamma.insert("unused".into(), any);
        assert!(checker.type_of(&mut st, &narrow, &prog).is_ok());
        assert!(checker.type_of(&mut st, &wide, &prog).is_ok());
    }

    #[test]
    fn check_value_examples() {
        let mut st = store();
        let i = st.mk_basic(Basic::Int);
        assert!(check_value(&mut st, &int_lit(3), i));
        let e = st.mk_record(vec![], Tail::Closed).unwrap();
        assert!(check_value(&mut st, &Expr::Empty, e));
        let tt = st.mk_basic(Basic::True);
        let ff = st.mk_basic(Basic::False);
        assert!(check_value(&mut st, &Expr::Const(Const::True), tt));
        assert!(!check_value(&mut st, &Expr::Const(Const::True), ff));
    }
}
