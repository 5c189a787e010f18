//! The type algebra: labels, kinds, variables, hash-consed type nodes.
//!
//! Types live in a [`TypeStore`]. The store interns every node body, so
//! structural equality coincides with id equality for non-recursive terms.
//! Recursive (regular, contractive) types are built by [`TypeStore::mk_rec`],
//! which ties a knot through the store; their identity is the node id.
//!
//! Three kinds of terms share one node space: types, field-types and rows.
//! A type embeds into a field-type through the explicit [`Body::FieldOf`]
//! wrapper, which keeps the meaning of negation unambiguous (complementing a
//! field-type includes `undef`, complementing a type does not).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Interned label handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u32);

/// Handle of a type/field/row variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

/// Handle of an interned node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Kind of a term: type, field-type, or row over `Labels \ excluded`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Type,
    Field,
    /// Rows are indexed by the finite set of labels they are *not* defined on.
    Row(BTreeSet<Label>),
}

impl Kind {
    pub fn is_row(&self) -> bool {
        matches!(self, Kind::Row(_))
    }
}

/// Fields, tail and excluded set of a record or row atom.
pub type AtomParts = (BTreeMap<Label, NodeId>, Tail, BTreeSet<Label>);

/// The tail of a record or row atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tail {
    Closed,
    Open,
    Var(VarId),
}

/// Basic types. `bool` is sugar for `true | false`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basic {
    Int,
    Str,
    True,
    False,
}

pub const BASICS: [Basic; 4] = [Basic::Int, Basic::Str, Basic::True, Basic::False];

/// Node body. Children are already-interned node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Body {
    /// A type or field variable (row variables only occur as tails).
    Var(VarId),
    Basic(Basic),
    Arrow(NodeId, NodeId),
    Record(BTreeMap<Label, NodeId>, Tail),
    RowAtom(BTreeMap<Label, NodeId>, Tail, BTreeSet<Label>),
    /// A type used as a field-type.
    FieldOf(NodeId),
    Undef,
    Or(NodeId, NodeId),
    And(NodeId, NodeId),
    Not(NodeId),
    Bottom(Kind),
    /// Placeholder while a recursive knot is being tied. Never escapes.
    Pending,
}

/// Where a variable came from; derived row-variable projections keep a link
/// to their base so substitution and ordering can treat them specially.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarOrigin {
    Named,
    Fresh,
    /// `rho.l` — the field of `rho` at label `l` (a field variable).
    FieldProj {
        base: VarId,
        label: Label,
    },
    /// `rho \ L` — `rho` with the labels of `L` cut away (a row variable).
    Cut {
        base: VarId,
        cut: BTreeSet<Label>,
    },
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub kind: Kind,
    pub origin: VarOrigin,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("kind error: {0}")]
    Kind(String),
    #[error("contractivity error: {0}")]
    Contractivity(String),
    #[error("undefined derived projection: {0}")]
    DerivedProjection(String),
}

struct Slot {
    body: Body,
    kind: Kind,
}

/// Append-only store of interned nodes, labels and variables.
///
/// One store per engine; writes are single-threaded. After a quiescent point
/// the data could be shared read-only, but all deciding operations take
/// `&mut` because they intern intermediate nodes.
pub struct TypeStore {
    slots: Vec<Slot>,
    intern: HashMap<Body, NodeId>,
    labels: Vec<String>,
    label_ids: HashMap<String, Label>,
    vars: Vec<VarInfo>,
    named_vars: HashMap<(String, Kind), VarId>,
    derived_field: HashMap<(VarId, Label), VarId>,
    derived_cut: HashMap<(VarId, BTreeSet<Label>), VarId>,
    vars_cache: HashMap<NodeId, BTreeSet<VarId>>,
    cyclic_cache: HashMap<NodeId, bool>,
    summand_cache: HashMap<NodeId, Vec<crate::dnf::Summand>>,
    /// Globally decided emptiness verdicts (per node id).
    pub(crate) empty_decided: HashMap<NodeId, bool>,

    bottom_ty: NodeId,
    any_ty: NodeId,
    undef: NodeId,
    bottom_field: NodeId,
    field_top: NodeId,
}

impl TypeStore {
    pub fn new() -> Self {
        let mut st = TypeStore {
            slots: Vec::new(),
            intern: HashMap::new(),
            labels: Vec::new(),
            label_ids: HashMap::new(),
            vars: Vec::new(),
            named_vars: HashMap::new(),
            derived_field: HashMap::new(),
            derived_cut: HashMap::new(),
            vars_cache: HashMap::new(),
            cyclic_cache: HashMap::new(),
            summand_cache: HashMap::new(),
            empty_decided: HashMap::new(),
            bottom_ty: NodeId(0),
            any_ty: NodeId(0),
            undef: NodeId(0),
            bottom_field: NodeId(0),
            field_top: NodeId(0),
        };
        st.bottom_ty = st.intern(Body::Bottom(Kind::Type));
        st.any_ty = st.intern(Body::Not(st.bottom_ty));
        st.undef = st.intern(Body::Undef);
        st.bottom_field = st.intern(Body::Bottom(Kind::Field));
        let any_f = st.intern(Body::FieldOf(st.any_ty));
        st.field_top = st.intern(Body::Or(any_f, st.undef));
        st
    }

    // ----- labels and variables -----

    pub fn label(&mut self, name: &str) -> Label {
        if let Some(&l) = self.label_ids.get(name) {
            return l;
        }
        let l = Label(self.labels.len() as u32);
        self.labels.push(name.to_string());
        self.label_ids.insert(name.to_string(), l);
        l
    }

    pub fn label_name(&self, l: Label) -> &str {
        &self.labels[l.0 as usize]
    }

    /// Interns a named variable; `(name, kind)` pairs are unique.
    pub fn var(&mut self, name: &str, kind: Kind) -> VarId {
        let key = (name.to_string(), kind.clone());
        if let Some(&v) = self.named_vars.get(&key) {
            return v;
        }
        let v = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: name.to_string(),
            kind,
            origin: VarOrigin::Named,
        });
        self.named_vars.insert(key, v);
        v
    }

    pub fn fresh_var(&mut self, hint: &str, kind: Kind) -> VarId {
        let v = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: format!("{}#{}", hint, v.0),
            kind,
            origin: VarOrigin::Fresh,
        });
        v
    }

    pub fn var_info(&self, v: VarId) -> &VarInfo {
        &self.vars[v.0 as usize]
    }

    pub fn var_kind(&self, v: VarId) -> Kind {
        self.vars[v.0 as usize].kind.clone()
    }

    /// Definition space complement of a row variable (its excluded label set).
    pub fn row_var_excluded(&self, v: VarId) -> BTreeSet<Label> {
        match self.var_kind(v) {
            Kind::Row(e) => e,
            _ => panic!("row_var_excluded on non-row variable"),
        }
    }

    /// The derived field variable `rho.l`. Requires `l` in the definition
    /// space of `rho`. Projections of cut variables collapse onto the root:
    /// `(rho \ L).l` is `rho.l`.
    pub fn derived_field_var(&mut self, base: VarId, label: Label) -> VarId {
        let base = match self.var_info(base).origin.clone() {
            VarOrigin::Cut { base: root, cut } => {
                debug_assert!(!cut.contains(&label), "label was cut away");
                root
            }
            _ => base,
        };
        let excl = self.row_var_excluded(base);
        debug_assert!(!excl.contains(&label), "label outside definition space");
        if let Some(&v) = self.derived_field.get(&(base, label)) {
            return v;
        }
        let name = format!(
            "{}.{}",
            self.vars[base.0 as usize].name,
            self.label_name(label)
        );
        let v = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name,
            kind: Kind::Field,
            origin: VarOrigin::FieldProj { base, label },
        });
        self.derived_field.insert((base, label), v);
        v
    }

    /// The derived row variable `rho \ L`, canonicalized: cutting labels
    /// outside the definition space is the identity, and cuts compose.
    pub fn derived_cut_var(&mut self, base: VarId, cut: &BTreeSet<Label>) -> VarId {
        let (root, base_cut) = match self.var_info(base).origin.clone() {
            VarOrigin::Cut { base: b, cut: c } => (b, c),
            _ => (base, BTreeSet::new()),
        };
        let root_excl = self.row_var_excluded(root);
        let mut full: BTreeSet<Label> = base_cut;
        full.extend(cut.iter().copied());
        full.retain(|l| !root_excl.contains(l));
        if full.is_empty() {
            return root;
        }
        if let Some(&v) = self.derived_cut.get(&(root, full.clone())) {
            return v;
        }
        let names: Vec<&str> = full.iter().map(|l| self.label_name(*l)).collect();
        let name = format!(
            "{}\\{{{}}}",
            self.vars[root.0 as usize].name,
            names.join(",")
        );
        let mut kind_excl = root_excl;
        kind_excl.extend(full.iter().copied());
        let v = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name,
            kind: Kind::Row(kind_excl),
            origin: VarOrigin::Cut {
                base: root,
                cut: full.clone(),
            },
        });
        self.derived_cut.insert((root, full), v);
        v
    }

    // ----- interning -----

    /// Interns a body, returning the existing id for a structurally equal one.
    /// Light canonicalization only: double negation collapses.
    pub fn intern(&mut self, body: Body) -> NodeId {
        let body = match body {
            Body::Not(x) => match &self.slots[x.0 as usize].body {
                Body::Not(y) => return *y,
                _ => Body::Not(x),
            },
            b => b,
        };
        if let Some(&id) = self.intern.get(&body) {
            return id;
        }
        let kind = self.kind_of_body(&body).unwrap_or(Kind::Type);
        let id = NodeId(self.slots.len() as u32);
        self.slots.push(Slot {
            body: body.clone(),
            kind,
        });
        self.intern.insert(body, id);
        id
    }

    pub fn body(&self, n: NodeId) -> &Body {
        &self.slots[n.0 as usize].body
    }

    pub fn kind(&self, n: NodeId) -> Kind {
        self.slots[n.0 as usize].kind.clone()
    }

    pub fn node_count(&self) -> usize {
        self.slots.len()
    }

    // ----- canonical nodes -----

    pub fn bottom(&self) -> NodeId {
        self.bottom_ty
    }
    pub fn any(&self) -> NodeId {
        self.any_ty
    }
    pub fn undef(&self) -> NodeId {
        self.undef
    }
    /// The top field-type `any | undef`.
    pub fn field_top(&self) -> NodeId {
        self.field_top
    }
    pub fn bottom_of(&mut self, kind: &Kind) -> NodeId {
        match kind {
            Kind::Type => self.bottom_ty,
            Kind::Field => self.bottom_field,
            Kind::Row(_) => self.intern(Body::Bottom(kind.clone())),
        }
    }
    pub fn top_of(&mut self, kind: &Kind) -> NodeId {
        match kind {
            Kind::Type => self.any_ty,
            Kind::Field => self.field_top,
            Kind::Row(e) => {
                let e = e.clone();
                self.mk_row_atom(BTreeMap::new(), Tail::Open, e).unwrap()
            }
        }
    }
    /// The top record type `{..}`.
    pub fn top_record(&mut self) -> NodeId {
        self.mk_record(vec![], Tail::Open).unwrap()
    }

    // ----- kind computation -----

    fn kind_of_body(&self, body: &Body) -> Result<Kind, TypeError> {
        Ok(match body {
            Body::Var(v) => {
                let k = self.var_kind(*v);
                if k.is_row() {
                    return Err(TypeError::Kind("row variables occur only as tails".into()));
                }
                k
            }
            Body::Basic(_) | Body::Arrow(..) | Body::Record(..) => Kind::Type,
            Body::Undef | Body::FieldOf(_) => Kind::Field,
            Body::RowAtom(_, _, excl) => Kind::Row(excl.clone()),
            Body::Or(a, b) | Body::And(a, b) => {
                let (ka, kb) = (self.kind(*a), self.kind(*b));
                if ka != kb {
                    return Err(TypeError::Kind(format!(
                        "operands of a connective have kinds {:?} and {:?}",
                        ka, kb
                    )));
                }
                ka
            }
            Body::Not(a) => self.kind(*a),
            Body::Bottom(k) => k.clone(),
            Body::Pending => Kind::Type,
        })
    }

    /// Full kinding check of the graph under `n` (Appendix-style side
    /// conditions), memoized per store.
    pub fn kind_check(&mut self, n: NodeId) -> Result<Kind, TypeError> {
        let mut seen = BTreeSet::new();
        self.kind_check_rec(n, &mut seen)?;
        Ok(self.kind(n))
    }

    fn kind_check_rec(&self, n: NodeId, seen: &mut BTreeSet<NodeId>) -> Result<(), TypeError> {
        if !seen.insert(n) {
            return Ok(());
        }
        match self.body(n).clone() {
            Body::Pending => {
                return Err(TypeError::Contractivity("unresolved recursive node".into()))
            }
            Body::Var(_) | Body::Basic(_) | Body::Undef | Body::Bottom(_) => {}
            Body::Arrow(d, c) => {
                for x in [d, c] {
                    if self.kind(x) != Kind::Type {
                        return Err(TypeError::Kind("arrow operand is not a type".into()));
                    }
                    self.kind_check_rec(x, seen)?;
                }
            }
            Body::FieldOf(t) => {
                if self.kind(t) != Kind::Type {
                    return Err(TypeError::Kind("field wrapper on a non-type".into()));
                }
                self.kind_check_rec(t, seen)?;
            }
            Body::Record(fields, tail) => {
                self.check_atom(&fields, tail, &BTreeSet::new(), seen)?;
            }
            Body::RowAtom(fields, tail, excl) => {
                self.check_atom(&fields, tail, &excl, seen)?;
            }
            Body::Or(a, b) | Body::And(a, b) => {
                self.kind_of_body(self.body(n)).map(|_| ())?;
                self.kind_check_rec(a, seen)?;
                self.kind_check_rec(b, seen)?;
            }
            Body::Not(a) => self.kind_check_rec(a, seen)?,
        }
        Ok(())
    }

    fn check_atom(
        &self,
        fields: &BTreeMap<Label, NodeId>,
        tail: Tail,
        excluded: &BTreeSet<Label>,
        seen: &mut BTreeSet<NodeId>,
    ) -> Result<(), TypeError> {
        for l in fields.keys() {
            if excluded.contains(l) {
                return Err(TypeError::Kind(format!(
                    "label `{}` is both present and excluded",
                    self.label_name(*l)
                )));
            }
        }
        if let Tail::Var(v) = tail {
            let var_excl = match self.var_kind(v) {
                Kind::Row(e) => e,
                _ => {
                    return Err(TypeError::Kind(
                        "tail variable is not a row variable".into(),
                    ))
                }
            };
            let mut covered: BTreeSet<Label> = excluded.clone();
            covered.extend(fields.keys().copied());
            if var_excl != covered {
                return Err(TypeError::Kind(format!(
                    "row variable `{}` has definition space excluding {{{}}} but the atom covers {{{}}}",
                    self.vars[v.0 as usize].name,
                    var_excl.iter().map(|l| self.label_name(*l)).collect::<Vec<_>>().join(","),
                    covered.iter().map(|l| self.label_name(*l)).collect::<Vec<_>>().join(","),
                )));
            }
        }
        for f in fields.values() {
            if self.kind(*f) != Kind::Field {
                return Err(TypeError::Kind("record field is not a field-type".into()));
            }
            self.kind_check_rec(*f, seen)?;
        }
        Ok(())
    }

    // ----- checked builders -----

    pub fn mk_basic(&mut self, b: Basic) -> NodeId {
        self.intern(Body::Basic(b))
    }

    /// `true | false`.
    pub fn mk_bool(&mut self) -> NodeId {
        let t = self.mk_basic(Basic::True);
        let f = self.mk_basic(Basic::False);
        self.mk_or(t, f).unwrap()
    }

    pub fn mk_arrow(&mut self, dom: NodeId, cod: NodeId) -> Result<NodeId, TypeError> {
        if self.kind(dom) != Kind::Type || self.kind(cod) != Kind::Type {
            return Err(TypeError::Kind("arrow operands must be types".into()));
        }
        Ok(self.intern(Body::Arrow(dom, cod)))
    }

    /// Wraps a type as a field-type; identity on field-types.
    pub fn as_field(&mut self, n: NodeId) -> Result<NodeId, TypeError> {
        match self.kind(n) {
            Kind::Field => Ok(n),
            Kind::Type => Ok(self.intern(Body::FieldOf(n))),
            Kind::Row(_) => Err(TypeError::Kind("a row is not a field-type".into())),
        }
    }

    fn join_operands(&mut self, a: NodeId, b: NodeId) -> Result<(NodeId, NodeId), TypeError> {
        let (ka, kb) = (self.kind(a), self.kind(b));
        if ka == kb {
            return Ok((a, b));
        }
        match (&ka, &kb) {
            (Kind::Type, Kind::Field) => Ok((self.as_field(a)?, b)),
            (Kind::Field, Kind::Type) => Ok((a, self.as_field(b)?)),
            _ => Err(TypeError::Kind(format!(
                "connective operands of incompatible kinds {:?} and {:?}",
                ka, kb
            ))),
        }
    }

    pub fn mk_or(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TypeError> {
        let (a, b) = self.join_operands(a, b)?;
        Ok(self.intern(Body::Or(a, b)))
    }

    pub fn mk_and(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TypeError> {
        let (a, b) = self.join_operands(a, b)?;
        Ok(self.intern(Body::And(a, b)))
    }

    pub fn mk_not(&mut self, a: NodeId) -> NodeId {
        self.intern(Body::Not(a))
    }

    /// `a \ b` as `a & !b`.
    pub fn mk_diff(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TypeError> {
        let (a, b) = self.join_operands(a, b)?;
        let nb = self.mk_not(b);
        self.mk_and(a, nb)
    }

    pub fn mk_or_all(&mut self, kind: &Kind, items: &[NodeId]) -> Result<NodeId, TypeError> {
        match items.split_first() {
            None => Ok(self.bottom_of(kind)),
            Some((&h, t)) => {
                let mut acc = h;
                for &x in t {
                    acc = self.mk_or(acc, x)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn mk_and_all(&mut self, kind: &Kind, items: &[NodeId]) -> Result<NodeId, TypeError> {
        match items.split_first() {
            None => Ok(self.top_of(kind)),
            Some((&h, t)) => {
                let mut acc = h;
                for &x in t {
                    acc = self.mk_and(acc, x)?;
                }
                Ok(acc)
            }
        }
    }

    /// Builds a record atom. Field entries of kind `Type` are wrapped.
    pub fn mk_record(
        &mut self,
        fields: Vec<(Label, NodeId)>,
        tail: Tail,
    ) -> Result<NodeId, TypeError> {
        let mut map = BTreeMap::new();
        for (l, f) in fields {
            let f = self.as_field(f)?;
            if map.insert(l, f).is_some() {
                return Err(TypeError::Kind(format!(
                    "duplicate label `{}`",
                    self.label_name(l)
                )));
            }
        }
        let body = Body::Record(map.clone(), tail);
        let mut seen = BTreeSet::new();
        self.check_atom(&map, tail, &BTreeSet::new(), &mut seen)?;
        Ok(self.intern(body))
    }

    /// Builds a row atom of kind `Row(excluded)`.
    pub fn mk_row_atom(
        &mut self,
        fields: BTreeMap<Label, NodeId>,
        tail: Tail,
        excluded: BTreeSet<Label>,
    ) -> Result<NodeId, TypeError> {
        let mut map = BTreeMap::new();
        for (l, f) in fields {
            map.insert(l, self.as_field(f)?);
        }
        let mut seen = BTreeSet::new();
        self.check_atom(&map, tail, &excluded, &mut seen)?;
        Ok(self.intern(Body::RowAtom(map, tail, excluded)))
    }

    /// The term standing for a variable: a `Var` node for type and field
    /// variables, the bare atom `row<| v>` for row variables.
    pub fn var_term(&mut self, v: VarId) -> NodeId {
        match self.var_kind(v) {
            Kind::Row(excl) => self
                .mk_row_atom(BTreeMap::new(), Tail::Var(v), excl)
                .expect("bare row variable atom is well-kinded"),
            _ => self.intern(Body::Var(v)),
        }
    }

    pub(crate) fn alloc_pending(&mut self, kind: Kind) -> NodeId {
        let id = NodeId(self.slots.len() as u32);
        self.slots.push(Slot {
            body: Body::Pending,
            kind,
        });
        id
    }

    /// Fills a pending slot with the body of `like` and registers it for
    /// interning. Used to tie knots while rebuilding cyclic graphs.
    pub(crate) fn patch_pending(&mut self, ph: NodeId, like: NodeId) {
        debug_assert!(matches!(self.body(ph), Body::Pending));
        let body = self.slots[like.0 as usize].body.clone();
        debug_assert!(!matches!(body, Body::Pending));
        self.slots[ph.0 as usize].body = body.clone();
        self.slots[ph.0 as usize].kind = self.slots[like.0 as usize].kind.clone();
        self.intern.entry(body).or_insert(ph);
        self.invalidate_caches();
    }

    // ----- atom field lookup -----

    /// `R(l)`: the field-type an atom associates to `l`. For rows, `l` must
    /// be inside the definition space.
    pub fn atom_field(&mut self, atom: NodeId, l: Label) -> Result<NodeId, TypeError> {
        let (fields, tail, excl) = self.atom_parts(atom)?;
        if excl.contains(&l) {
            return Err(TypeError::Kind(format!(
                "label `{}` is outside the definition space of the row",
                self.label_name(l)
            )));
        }
        Ok(match fields.get(&l) {
            Some(&f) => f,
            None => match tail {
                Tail::Closed => self.undef,
                Tail::Open | Tail::Var(_) => self.field_top,
            },
        })
    }

    /// Fields, tail and excluded set of a record or row atom.
    pub fn atom_parts(&self, atom: NodeId) -> Result<AtomParts, TypeError> {
        match self.body(atom) {
            Body::Record(fields, tail) => Ok((fields.clone(), *tail, BTreeSet::new())),
            Body::RowAtom(fields, tail, excl) => Ok((fields.clone(), *tail, excl.clone())),
            _ => Err(TypeError::Kind("not a record or row atom".into())),
        }
    }

    /// `row(R)`: reads a Boolean combination of record atoms as a row of
    /// excluded set `∅` (homomorphically). Errors if a non-record world is
    /// reachable.
    pub fn rectorow(&mut self, t: NodeId) -> Result<NodeId, TypeError> {
        match self.body(t).clone() {
            Body::Record(fields, tail) => self.mk_row_atom(fields, tail, BTreeSet::new()),
            Body::Or(a, b) => {
                let ra = self.rectorow(a)?;
                let rb = self.rectorow(b)?;
                self.mk_or(ra, rb)
            }
            Body::And(a, b) => {
                let ra = self.rectorow(a)?;
                let rb = self.rectorow(b)?;
                self.mk_and(ra, rb)
            }
            Body::Not(a) => {
                let ra = self.rectorow(a)?;
                Ok(self.mk_not(ra))
            }
            Body::Bottom(Kind::Type) => Ok(self.intern(Body::Bottom(Kind::Row(BTreeSet::new())))),
            _ => Err(TypeError::Kind(
                "rectorow applied to a non-record combination".into(),
            )),
        }
    }

    // ----- recursive types -----

    /// Ties a recursive knot: returns a node `r` equal to `body` with every
    /// occurrence of `binder` replaced by `r` itself. Every cycle must cross
    /// an arrow or a record/row field, otherwise a contractivity error is
    /// returned.
    pub fn mk_rec(&mut self, binder: VarId, body: NodeId) -> Result<NodeId, TypeError> {
        if !self.vars_of(body).contains(&binder) {
            return Ok(body);
        }
        let kind = self.kind(body);
        if self.var_kind(binder) != kind {
            return Err(TypeError::Kind(
                "rec binder kind differs from body kind".into(),
            ));
        }
        let placeholder = NodeId(self.slots.len() as u32);
        self.slots.push(Slot {
            body: Body::Pending,
            kind: kind.clone(),
        });
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        let unfolded = self.replace_var(body, binder, placeholder, &mut map)?;
        let new_body = self.slots[unfolded.0 as usize].body.clone();
        self.slots[placeholder.0 as usize].body = new_body.clone();
        self.intern.entry(new_body).or_insert(placeholder);
        self.invalidate_caches();
        if !self.is_contractive(placeholder) {
            return Err(TypeError::Contractivity(
                "recursion does not cross an arrow or record constructor".into(),
            ));
        }
        Ok(placeholder)
    }

    /// Structural replacement of a variable by a node (used to tie knots).
    /// Row-variable binders are replaced in tail position, which requires the
    /// replacement to be readable as a row atom; a pending replacement there
    /// is a contractivity violation.
    fn replace_var(
        &mut self,
        n: NodeId,
        binder: VarId,
        repl: NodeId,
        map: &mut HashMap<NodeId, NodeId>,
    ) -> Result<NodeId, TypeError> {
        if let Some(&r) = map.get(&n) {
            return Ok(r);
        }
        if !self.vars_of(n).contains(&binder) {
            map.insert(n, n);
            return Ok(n);
        }
        let out = match self.body(n).clone() {
            Body::Var(v) => {
                if v == binder {
                    repl
                } else {
                    n
                }
            }
            Body::Arrow(d, c) => {
                let placeholder = NodeId(self.slots.len() as u32);
                self.slots.push(Slot {
                    body: Body::Pending,
                    kind: Kind::Type,
                });
                map.insert(n, placeholder);
                let d2 = self.replace_var(d, binder, repl, map)?;
                let c2 = self.replace_var(c, binder, repl, map)?;
                let body = Body::Arrow(d2, c2);
                self.slots[placeholder.0 as usize].body = body.clone();
                self.intern.entry(body).or_insert(placeholder);
                self.invalidate_caches();
                return Ok(placeholder);
            }
            Body::Record(fields, tail) => {
                let placeholder = NodeId(self.slots.len() as u32);
                self.slots.push(Slot {
                    body: Body::Pending,
                    kind: Kind::Type,
                });
                map.insert(n, placeholder);
                let mut fields2 = BTreeMap::new();
                for (l, f) in fields {
                    fields2.insert(l, self.replace_var(f, binder, repl, map)?);
                }
                let tail2 = self.replace_tail(tail, binder, repl)?;
                let body = Body::Record(fields2, tail2);
                self.slots[placeholder.0 as usize].body = body.clone();
                self.intern.entry(body).or_insert(placeholder);
                self.invalidate_caches();
                return Ok(placeholder);
            }
            Body::RowAtom(fields, tail, excl) => {
                let mut fields2 = BTreeMap::new();
                for (l, f) in fields {
                    fields2.insert(l, self.replace_var(f, binder, repl, map)?);
                }
                let tail2 = self.replace_tail(tail, binder, repl)?;
                self.intern(Body::RowAtom(fields2, tail2, excl))
            }
            Body::Or(a, b) => {
                let a2 = self.replace_var(a, binder, repl, map)?;
                let b2 = self.replace_var(b, binder, repl, map)?;
                self.intern(Body::Or(a2, b2))
            }
            Body::And(a, b) => {
                let a2 = self.replace_var(a, binder, repl, map)?;
                let b2 = self.replace_var(b, binder, repl, map)?;
                self.intern(Body::And(a2, b2))
            }
            Body::Not(a) => {
                let a2 = self.replace_var(a, binder, repl, map)?;
                self.intern(Body::Not(a2))
            }
            Body::FieldOf(t) => {
                let t2 = self.replace_var(t, binder, repl, map)?;
                self.intern(Body::FieldOf(t2))
            }
            _ => n,
        };
        map.insert(n, out);
        Ok(out)
    }

    fn replace_tail(&mut self, tail: Tail, binder: VarId, repl: NodeId) -> Result<Tail, TypeError> {
        match tail {
            Tail::Var(v) if v == binder => Err(TypeError::Contractivity(
                "row recursion through a tail does not cross a constructor".into(),
            )),
            _ => {
                let _ = repl;
                Ok(tail)
            }
        }
    }

    /// True when every cycle reachable from `n` crosses an arrow or the field
    /// of a record/row atom: equivalently, the subgraph of non-guard edges
    /// (connectives and field wrappers) is acyclic and no pending node is
    /// reachable.
    pub fn is_contractive(&self, n: NodeId) -> bool {
        let mut reachable = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(m) = stack.pop() {
            if !reachable.insert(m) {
                continue;
            }
            match self.body(m) {
                Body::Pending => return false,
                Body::Arrow(a, b) | Body::Or(a, b) | Body::And(a, b) => {
                    stack.push(*a);
                    stack.push(*b);
                }
                Body::Not(a) | Body::FieldOf(a) => stack.push(*a),
                Body::Record(fields, _) | Body::RowAtom(fields, _, _) => {
                    stack.extend(fields.values().copied());
                }
                _ => {}
            }
        }
        fn soft_children(body: &Body) -> Vec<NodeId> {
            match body {
                Body::Or(a, b) | Body::And(a, b) => vec![*a, *b],
                Body::Not(a) | Body::FieldOf(a) => vec![*a],
                _ => vec![],
            }
        }
        // 1 = in progress, 2 = done.
        let mut color: HashMap<NodeId, u8> = HashMap::new();
        fn acyclic(st: &TypeStore, m: NodeId, color: &mut HashMap<NodeId, u8>) -> bool {
            match color.get(&m) {
                Some(1) => return false,
                Some(_) => return true,
                None => {}
            }
            color.insert(m, 1);
            for c in soft_children(st.body(m)) {
                if !acyclic(st, c, color) {
                    return false;
                }
            }
            color.insert(m, 2);
            true
        }
        reachable.iter().all(|&m| acyclic(self, m, &mut color))
    }

    // ----- reachability caches -----

    fn invalidate_caches(&mut self) {
        self.vars_cache.clear();
        self.cyclic_cache.clear();
        self.summand_cache.clear();
    }

    pub(crate) fn summand_cache_get(&self, n: NodeId) -> Option<Vec<crate::dnf::Summand>> {
        self.summand_cache.get(&n).cloned()
    }

    pub(crate) fn summand_cache_put(&mut self, n: NodeId, s: Vec<crate::dnf::Summand>) {
        self.summand_cache.insert(n, s);
    }

    /// All variables occurring in the graph under `n` (including tails).
    pub fn vars_of(&mut self, n: NodeId) -> BTreeSet<VarId> {
        if let Some(v) = self.vars_cache.get(&n) {
            return v.clone();
        }
        let mut acc = BTreeSet::new();
        let mut seen = BTreeSet::new();
        self.collect_vars(n, &mut acc, &mut seen);
        self.vars_cache.insert(n, acc.clone());
        acc
    }

    fn collect_vars(&self, n: NodeId, acc: &mut BTreeSet<VarId>, seen: &mut BTreeSet<NodeId>) {
        if !seen.insert(n) {
            return;
        }
        match self.body(n) {
            Body::Var(v) => {
                acc.insert(*v);
            }
            Body::Arrow(a, b) | Body::Or(a, b) | Body::And(a, b) => {
                self.collect_vars(*a, acc, seen);
                self.collect_vars(*b, acc, seen);
            }
            Body::Not(a) | Body::FieldOf(a) => self.collect_vars(*a, acc, seen),
            Body::Record(fields, tail) | Body::RowAtom(fields, tail, _) => {
                if let Tail::Var(v) = tail {
                    acc.insert(*v);
                }
                for f in fields.values() {
                    self.collect_vars(*f, acc, seen);
                }
            }
            _ => {}
        }
    }

    /// True when `n` participates in a cycle of the node graph.
    pub fn is_cyclic(&mut self, n: NodeId) -> bool {
        if let Some(&c) = self.cyclic_cache.get(&n) {
            return c;
        }
        let mut stack = Vec::new();
        let mut state: HashMap<NodeId, u8> = HashMap::new(); // 1 = on stack, 2 = done
        let mut cyclic: BTreeSet<NodeId> = BTreeSet::new();
        self.cycle_dfs(n, &mut stack, &mut state, &mut cyclic);
        for &m in state.keys() {
            self.cyclic_cache.insert(m, cyclic.contains(&m));
        }
        self.cyclic_cache.get(&n).copied().unwrap_or(false)
    }

    fn cycle_dfs(
        &self,
        n: NodeId,
        stack: &mut Vec<NodeId>,
        state: &mut HashMap<NodeId, u8>,
        cyclic: &mut BTreeSet<NodeId>,
    ) {
        match state.get(&n) {
            Some(1) => {
                // Everything from the first occurrence of n on the stack is cyclic.
                if let Some(pos) = stack.iter().position(|&m| m == n) {
                    for &m in &stack[pos..] {
                        cyclic.insert(m);
                    }
                }
                return;
            }
            Some(_) => return,
            None => {}
        }
        state.insert(n, 1);
        stack.push(n);
        let children: Vec<NodeId> = match self.body(n) {
            Body::Arrow(a, b) | Body::Or(a, b) | Body::And(a, b) => vec![*a, *b],
            Body::Not(a) | Body::FieldOf(a) => vec![*a],
            Body::Record(fields, _) | Body::RowAtom(fields, _, _) => {
                fields.values().copied().collect()
            }
            _ => vec![],
        };
        for c in children {
            self.cycle_dfs(c, stack, state, cyclic);
        }
        stack.pop();
        state.insert(n, 2);
    }

    // ----- debug printing -----

    pub fn debug_node(&self, n: NodeId) -> String {
        let mut seen = BTreeSet::new();
        self.debug_rec(n, &mut seen)
    }

    fn debug_rec(&self, n: NodeId, seen: &mut BTreeSet<NodeId>) -> String {
        if !seen.insert(n) {
            return format!("#{}", n.0);
        }
        let s = match self.body(n) {
            Body::Var(v) => self.vars[v.0 as usize].name.clone(),
            Body::Basic(b) => format!("{:?}", b).to_lowercase(),
            Body::Arrow(d, c) => {
                format!(
                    "({} -> {})",
                    self.debug_rec(*d, seen),
                    self.debug_rec(*c, seen)
                )
            }
            Body::Record(fields, tail) => self.debug_atom(fields, *tail, None, seen),
            Body::RowAtom(fields, tail, excl) => self.debug_atom(fields, *tail, Some(excl), seen),
            Body::FieldOf(t) => self.debug_rec(*t, seen),
            Body::Undef => "undef".into(),
            Body::Or(a, b) => {
                format!(
                    "({} | {})",
                    self.debug_rec(*a, seen),
                    self.debug_rec(*b, seen)
                )
            }
            Body::And(a, b) => {
                format!(
                    "({} & {})",
                    self.debug_rec(*a, seen),
                    self.debug_rec(*b, seen)
                )
            }
            Body::Not(a) => format!("!{}", self.debug_rec(*a, seen)),
            Body::Bottom(Kind::Type) => "none".into(),
            Body::Bottom(_) => "none'".into(),
            Body::Pending => "<pending>".into(),
        };
        seen.remove(&n);
        s
    }

    fn debug_atom(
        &self,
        fields: &BTreeMap<Label, NodeId>,
        tail: Tail,
        excl: Option<&BTreeSet<Label>>,
        seen: &mut BTreeSet<NodeId>,
    ) -> String {
        let mut parts: Vec<String> = fields
            .iter()
            .map(|(l, f)| format!("{}: {}", self.label_name(*l), self.debug_rec(*f, seen)))
            .collect();
        match tail {
            Tail::Closed => {}
            Tail::Open => parts.push("..".into()),
            Tail::Var(v) => parts.push(format!("@{}", self.vars[v.0 as usize].name)),
        }
        let open = if excl.is_some() { "<" } else { "{" };
        let close = if excl.is_some() { ">" } else { "}" };
        let idx = excl
            .map(|e| {
                format!(
                    "_{{{}}}",
                    e.iter()
                        .map(|l| self.label_name(*l))
                        .collect::<Vec<_>>()
                        .join(",")
                )
            })
            .unwrap_or_default();
        format!("{}{}{}{}", open, parts.join(", "), close, idx)
    }
}

impl Default for TypeStore {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for TypeStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TypeStore({} nodes)", self.slots.len())
    }
}
