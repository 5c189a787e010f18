//! Brute-force test oracles, independent of the production decision paths.
//!
//! `naive_empty_row` implements the quantified row-emptiness characterization
//! literally, enumerating every map from the negative atoms to `L ∪ {_}`.
//! Field comparisons are evaluated over a six-witness finite model that is
//! exact for the basics-only fragment the generators produce, so the oracle
//! shares no code with `phi` or the emptiness engine on the path it checks.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::subtype::AtomView;
use crate::types::{Basic, Body, Kind, Label, NodeId, Tail, TypeError, TypeStore, VarId};

/// One assignment of negative atoms to labels or blank, total on `N`.
#[derive(Debug, Clone)]
pub struct IotaMap {
    pub assignment: Vec<Option<Label>>,
}

/// Finite-model witnesses: one per block of the partition induced by the
/// basic palette, plus a non-basic value and the undefined marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    IntW,
    StrW,
    TrueW,
    FalseW,
    OtherW,
    UndefW,
}

const SHAPES: [Shape; 6] = [
    Shape::IntW,
    Shape::StrW,
    Shape::TrueW,
    Shape::FalseW,
    Shape::OtherW,
    Shape::UndefW,
];

fn eval_type(st: &TypeStore, t: NodeId, s: Shape) -> bool {
    if s == Shape::UndefW {
        return false;
    }
    match st.body(t) {
        Body::Basic(Basic::Int) => s == Shape::IntW,
        Body::Basic(Basic::Str) => s == Shape::StrW,
        Body::Basic(Basic::True) => s == Shape::TrueW,
        Body::Basic(Basic::False) => s == Shape::FalseW,
        Body::Or(a, b) => eval_type(st, *a, s) || eval_type(st, *b, s),
        Body::And(a, b) => eval_type(st, *a, s) && eval_type(st, *b, s),
        Body::Not(a) => !eval_type(st, *a, s),
        Body::Bottom(Kind::Type) => false,
        b => panic!("oracle model only covers the basics fragment, got {:?}", b),
    }
}

fn eval_field(st: &TypeStore, f: NodeId, s: Shape) -> bool {
    match st.body(f) {
        Body::FieldOf(t) => eval_type(st, *t, s),
        Body::Undef => s == Shape::UndefW,
        Body::Or(a, b) => eval_field(st, *a, s) || eval_field(st, *b, s),
        Body::And(a, b) => eval_field(st, *a, s) && eval_field(st, *b, s),
        Body::Not(a) => !eval_field(st, *a, s),
        Body::Bottom(Kind::Field) => false,
        b => panic!("oracle model only covers the basics fragment, got {:?}", b),
    }
}

/// `meet of lhs <= join of rhs` over the finite model.
fn model_field_leq(st: &TypeStore, lhs: &[NodeId], rhs: &[NodeId]) -> bool {
    SHAPES.iter().all(|&s| {
        let in_lhs = lhs.iter().all(|&f| eval_field(st, f, s));
        let in_rhs = rhs.iter().any(|&f| eval_field(st, f, s));
        !in_lhs || in_rhs
    })
}

fn def_is_undef(tail: Tail) -> bool {
    tail == Tail::Closed
}

/// The quantified emptiness characterization of `/\P <= \/N` for atomic rows
/// (or records read as rows) sharing one definition space.
pub fn naive_empty_row(
    st: &mut TypeStore,
    pos: &[NodeId],
    neg: &[NodeId],
) -> Result<bool, TypeError> {
    let kinds: BTreeSet<Kind> = pos.iter().chain(neg).map(|&n| st.kind(n)).collect();
    if kinds.len() > 1 {
        return Err(TypeError::Kind(
            "oracle atoms must share one definition space".into(),
        ));
    }
    let pos_views: Vec<AtomView> = pos.iter().map(|&p| AtomView::of(st, p)).collect();
    let neg_views: Vec<AtomView> = neg.iter().map(|&q| AtomView::of(st, q)).collect();
    let mut labels: BTreeSet<Label> = BTreeSet::new();
    for v in pos_views.iter().chain(neg_views.iter()) {
        labels.extend(v.fields.keys().copied());
    }
    let labels: Vec<Label> = labels.into_iter().collect();
    let options = labels.len() + 1;
    let total = (options as u64).pow(neg_views.len() as u32);
    for code in 0..total {
        let iota = decode_iota(&labels, neg_views.len(), options as u64, code);
        if !iota_satisfied(st, &pos_views, &neg_views, &labels, &iota) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn decode_iota(labels: &[Label], n: usize, options: u64, mut code: u64) -> IotaMap {
    let mut assignment = Vec::with_capacity(n);
    for _ in 0..n {
        let d = (code % options) as usize;
        code /= options;
        assignment.push(if d == labels.len() {
            None
        } else {
            Some(labels[d])
        });
    }
    IotaMap { assignment }
}

fn iota_satisfied(
    st: &TypeStore,
    pos: &[AtomView],
    neg: &[AtomView],
    labels: &[Label],
    iota: &IotaMap,
) -> bool {
    // Condition 1: some label already discharges the containment.
    for &l in labels {
        let lhs: Vec<NodeId> = pos.iter().map(|v| v.field(st, l)).collect();
        let rhs: Vec<NodeId> = neg
            .iter()
            .zip(&iota.assignment)
            .filter(|(_, a)| **a == Some(l))
            .map(|(v, _)| v.field(st, l))
            .collect();
        if model_field_leq(st, &lhs, &rhs) {
            return true;
        }
    }
    let blanks: Vec<&AtomView> = neg
        .iter()
        .zip(&iota.assignment)
        .filter(|(_, a)| a.is_none())
        .map(|(v, _)| v)
        .collect();
    // Condition 2: a blank monomorphic negative subsumes the default fields.
    let pos_def_undef = pos.iter().any(|v| def_is_undef(v.tail));
    for v in &blanks {
        let holds = match v.tail {
            Tail::Closed => pos_def_undef,
            Tail::Open => true,
            Tail::Var(_) => continue,
        };
        if holds {
            return true;
        }
    }
    // Condition 3: a blank polymorphic negative shares a tail with a positive.
    for v in &blanks {
        if let Tail::Var(r) = v.tail {
            if pos.iter().any(|p| p.tail == Tail::Var(r)) {
                return true;
            }
        }
    }
    false
}

/// The quantified arrow-emptiness formula over the finite model, for arrows
/// whose domains and codomains stay in the basics fragment:
/// `/\P <= \/N` iff some negative `s -> s'` has, for every `P' <= P`,
/// `s <= \/ doms(P')` or (`P' /= P` and `/\ cods(P \ P') <= s'`).
pub fn naive_empty_arrow(st: &TypeStore, pos: &[NodeId], neg: &[NodeId]) -> bool {
    let view = |st: &TypeStore, n: NodeId| match st.body(n) {
        Body::Arrow(d, c) => (*d, *c),
        b => panic!("not an arrow atom: {:?}", b),
    };
    let pv: Vec<(NodeId, NodeId)> = pos.iter().map(|&p| view(st, p)).collect();
    let model_type_leq = |st: &TypeStore, lhs: &[NodeId], rhs: &[NodeId]| {
        SHAPES.iter().filter(|&&s| s != Shape::UndefW).all(|&s| {
            let in_l = lhs.iter().all(|&t| eval_type(st, t, s));
            let in_r = rhs.iter().any(|&t| eval_type(st, t, s));
            !in_l || in_r
        })
    };
    neg.iter().any(|&q| {
        let (s, s1) = view(st, q);
        (0u32..(1 << pv.len())).all(|mask| {
            let sel_doms: Vec<NodeId> = pv
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &(d, _))| d)
                .collect();
            if model_type_leq(st, &[s], &sel_doms) {
                return true;
            }
            if mask != (1 << pv.len()) - 1 {
                let rest_cods: Vec<NodeId> = pv
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) == 0)
                    .map(|(_, &(_, c))| c)
                    .collect();
                if model_type_leq(st, &rest_cods, &[s1]) {
                    return true;
                }
            }
            false
        })
    })
}

/// `cutrow(r, L)`: the atom with the labels of `L` removed; a variable tail
/// reached by the cut is widened to open.
pub fn cutrow_plain(
    st: &mut TypeStore,
    atom: NodeId,
    cut: &BTreeSet<Label>,
) -> Result<NodeId, TypeError> {
    let (fields, tail, excl) = st.atom_parts(atom)?;
    let mut fields2 = fields.clone();
    fields2.retain(|l, _| !cut.contains(l));
    let mut excl2 = excl.clone();
    excl2.extend(cut.iter().copied());
    let tail2 = match tail {
        Tail::Var(v) => {
            let covered: BTreeSet<Label> = fields.keys().copied().chain(excl).collect();
            if cut.iter().all(|l| covered.contains(l)) {
                Tail::Var(st.derived_cut_var(v, cut))
            } else {
                Tail::Open
            }
        }
        t => t,
    };
    st.mk_row_atom(fields2, tail2, excl2)
}

/// One `(iota, N')` branch of the general row decomposition. The branch
/// holds when any of its three conditions does; the conjunction of all
/// branches is equivalent to the emptiness of the source intersection.
#[derive(Debug, Clone)]
pub struct DecompBranch {
    /// Per label: positive field meet and the join of the negatives mapped
    /// to that label.
    pub label_conditions: Vec<(NodeId, NodeId)>,
    /// Cut residue: positives and the blank negatives outside `N'`.
    pub cut_pos: Vec<NodeId>,
    pub cut_neg: Vec<NodeId>,
    /// Tag residue: `fin`-shaped rows of variable-tailed positives and of
    /// the `N'` negatives.
    pub tag_pos: Vec<NodeId>,
    pub tag_neg: Vec<NodeId>,
}

impl DecompBranch {
    /// Evaluates the branch through the subtype engine.
    pub fn holds(&self, st: &mut TypeStore) -> bool {
        for &(meet, join) in &self.label_conditions {
            if crate::subtype::is_subtype(st, meet, join) {
                return true;
            }
        }
        if (!self.cut_pos.is_empty() || !self.cut_neg.is_empty())
            && intersection_empty(st, &self.cut_pos, &self.cut_neg)
        {
            return true;
        }
        if !self.tag_neg.is_empty() && intersection_empty(st, &self.tag_pos, &self.tag_neg) {
            return true;
        }
        false
    }
}

fn intersection_empty(st: &mut TypeStore, pos: &[NodeId], neg: &[NodeId]) -> bool {
    let kind = pos
        .iter()
        .chain(neg.iter())
        .map(|&n| st.kind(n))
        .next()
        .expect("nonempty residue");
    let mut parts: Vec<NodeId> = pos.to_vec();
    for &q in neg {
        parts.push(st.mk_not(q));
    }
    let t = st.mk_and_all(&kind, &parts).unwrap();
    crate::subtype::is_empty(st, t)
}

/// Enumerates the residual subproblems of the general decomposition of
/// `/\P & /\!N` over the label set `L`.
pub fn naive_decompose(
    st: &mut TypeStore,
    pos: &[NodeId],
    neg: &[NodeId],
    cut_labels: &BTreeSet<Label>,
) -> Result<Vec<DecompBranch>, TypeError> {
    let pos_views: Vec<AtomView> = pos.iter().map(|&p| AtomView::of(st, p)).collect();
    let neg_views: Vec<AtomView> = neg.iter().map(|&q| AtomView::of(st, q)).collect();
    let in_vars = |st: &TypeStore, v: &AtomView| -> bool {
        match v.tail {
            Tail::Var(r) => {
                let excl = st.row_var_excluded(r);
                cut_labels.iter().any(|l| !excl.contains(l))
            }
            _ => false,
        }
    };
    let labels: Vec<Label> = cut_labels.iter().copied().collect();
    let options = labels.len() + 1;
    let total = (options as u64).pow(neg_views.len() as u32);
    let mut branches = Vec::new();
    for code in 0..total {
        let iota = decode_iota(&labels, neg_views.len(), options as u64, code);
        let blank_vars: Vec<usize> = (0..neg_views.len())
            .filter(|&i| iota.assignment[i].is_none() && in_vars(st, &neg_views[i]))
            .collect();
        for mask in 0u32..(1 << blank_vars.len()) {
            let nprime: BTreeSet<usize> = blank_vars
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &i)| i)
                .collect();
            let mut label_conditions = Vec::new();
            for &l in &labels {
                let meets: Vec<NodeId> = pos_views.iter().map(|v| v.field(st, l)).collect();
                let joins: Vec<NodeId> = (0..neg_views.len())
                    .filter(|&i| iota.assignment[i] == Some(l))
                    .map(|i| neg_views[i].field(st, l))
                    .collect();
                let meet = st.mk_and_all(&Kind::Field, &meets).unwrap();
                let join = st.mk_or_all(&Kind::Field, &joins).unwrap();
                label_conditions.push((meet, join));
            }
            let mut cut_pos = Vec::new();
            for &p in pos {
                cut_pos.push(cutrow_plain(st, p, cut_labels)?);
            }
            let mut cut_neg = Vec::new();
            for (i, &q) in neg.iter().enumerate() {
                if iota.assignment[i].is_none() && !nprime.contains(&i) {
                    cut_neg.push(cutrow_plain(st, q, cut_labels)?);
                }
            }
            let mut tag_pos = Vec::new();
            for v in &pos_views {
                if in_vars(st, v) {
                    tag_pos.push(fin_row(st, v)?);
                }
            }
            let mut tag_neg = Vec::new();
            for &i in &nprime {
                tag_neg.push(fin_row(st, &neg_views[i])?);
            }
            branches.push(DecompBranch {
                label_conditions,
                cut_pos,
                cut_neg,
                tag_pos,
                tag_neg,
            });
        }
    }
    Ok(branches)
}

/// `row{fin(r)}{tail(r)}`: the atom with every explicit field widened to the
/// field top, keeping the tail.
fn fin_row(st: &mut TypeStore, v: &AtomView) -> Result<NodeId, TypeError> {
    let excl = match st.kind(v.id) {
        Kind::Row(e) => e,
        Kind::Type => BTreeSet::new(),
        _ => return Err(TypeError::Kind("fin_row on a non-atom".into())),
    };
    let top = st.field_top();
    let fields = v.fields.keys().map(|&l| (l, top)).collect();
    st.mk_row_atom(fields, v.tail, excl)
}

/// Size limits for generated record-emptiness instances.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub max_labels: usize,
    pub max_row_vars: usize,
    pub max_pos: usize,
    pub max_neg: usize,
    pub field_depth: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_labels: 3,
            max_row_vars: 2,
            max_pos: 2,
            max_neg: 2,
            field_depth: 2,
        }
    }
}

/// One generated record-world emptiness problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pos: Vec<NodeId>,
    pub neg: Vec<NodeId>,
    pub vp: BTreeSet<VarId>,
}

/// Deterministic stream of emptiness problems for a seed.
pub fn gen_instances(
    st: &mut TypeStore,
    bounds: &Bounds,
    seed: u64,
    count: usize,
) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label_names = ["a", "b", "c", "d", "e"];
    let labels: Vec<Label> = label_names
        .iter()
        .take(bounds.max_labels)
        .map(|n| st.label(n))
        .collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let nvars = rng.gen_range(0..=bounds.max_row_vars);
        let row_vars: Vec<VarId> = (0..nvars)
            .map(|i| {
                let mut excl = BTreeSet::new();
                for &l in &labels {
                    if rng.gen_bool(0.5) {
                        excl.insert(l);
                    }
                }
                st.fresh_var(&format!("p{}", i), Kind::Row(excl))
            })
            .collect();
        let npos = rng.gen_range(0..=bounds.max_pos);
        let nneg = rng.gen_range(0..=bounds.max_neg);
        let gen_atom = |st: &mut TypeStore, rng: &mut ChaCha8Rng| -> NodeId {
            let tail = match rng.gen_range(0..3) {
                0 => Tail::Closed,
                1 => Tail::Open,
                _ => {
                    if row_vars.is_empty() {
                        Tail::Open
                    } else {
                        Tail::Var(row_vars[rng.gen_range(0..row_vars.len())])
                    }
                }
            };
            let fin: BTreeSet<Label> = match tail {
                Tail::Var(v) => st.row_var_excluded(v),
                _ => labels
                    .iter()
                    .filter(|_| rng.gen_bool(0.6))
                    .copied()
                    .collect(),
            };
            let fields: Vec<(Label, NodeId)> = fin
                .iter()
                .map(|&l| (l, gen_field(st, rng, bounds.field_depth)))
                .collect();
            st.mk_record(fields, tail)
                .expect("generated atom is well-kinded")
        };
        let pos: Vec<NodeId> = (0..npos).map(|_| gen_atom(st, &mut rng)).collect();
        let neg: Vec<NodeId> = (0..nneg).map(|_| gen_atom(st, &mut rng)).collect();
        let vp: BTreeSet<VarId> = row_vars
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .copied()
            .collect();
        out.push(Instance { pos, neg, vp });
    }
    out
}

/// Random field-type over the basics fragment.
pub fn gen_field(st: &mut TypeStore, rng: &mut ChaCha8Rng, depth: usize) -> NodeId {
    if depth == 0 || rng.gen_bool(0.5) {
        let choice = rng.gen_range(0..8);
        return match choice {
            0 => {
                let i = st.mk_basic(Basic::Int);
                st.as_field(i).unwrap()
            }
            1 => {
                let s = st.mk_basic(Basic::Str);
                st.as_field(s).unwrap()
            }
            2 => {
                let b = st.mk_bool();
                st.as_field(b).unwrap()
            }
            3 => {
                let t = st.mk_basic(Basic::True);
                st.as_field(t).unwrap()
            }
            4 => st.undef(),
            5 => {
                let i = st.mk_basic(Basic::Int);
                let fi = st.as_field(i).unwrap();
                let u = st.undef();
                st.mk_or(fi, u).unwrap()
            }
            6 => st.field_top(),
            _ => st.bottom_of(&Kind::Field),
        };
    }
    let a = gen_field(st, rng, depth - 1);
    let b = gen_field(st, rng, depth - 1);
    match rng.gen_range(0..3) {
        0 => st.mk_or(a, b).unwrap(),
        1 => st.mk_and(a, b).unwrap(),
        _ => st.mk_not(a),
    }
}

/// The positive context records `{ (l = any|undef) over excl(rho) | rho }`
/// for the variables of `vp`, as plain atoms for the oracle side.
pub fn vp_context_atoms(st: &mut TypeStore, vp: &BTreeSet<VarId>) -> Vec<NodeId> {
    vp.iter()
        .map(|&v| {
            let excl = st.row_var_excluded(v);
            let top = st.field_top();
            let fields: Vec<(Label, NodeId)> = excl.iter().map(|&l| (l, top)).collect();
            st.mk_record(fields, Tail::Var(v))
                .expect("context atom is well-kinded")
        })
        .collect()
}
