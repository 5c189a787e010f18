//! Shared generators for the integration and acceptance suites.
//! Everything is seeded; a seed fully determines the stream.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use setrow_core::oracle::gen_field;
use setrow_core::subst::Substitution;
use setrow_core::types::{Basic, Body, Kind, Label, NodeId, Tail, TypeStore, VarId};

pub struct TypeGen {
    pub labels: Vec<Label>,
    pub tvars: Vec<VarId>,
}

impl TypeGen {
    pub fn new(st: &mut TypeStore) -> Self {
        let labels = ["a", "b", "c"].iter().map(|n| st.label(n)).collect();
        let tvars = ["x", "y"].iter().map(|n| st.var(n, Kind::Type)).collect();
        TypeGen { labels, tvars }
    }

    /// A random type of bounded depth over basics, records, arrows,
    /// variables and the connectives.
    pub fn ty(&self, st: &mut TypeStore, rng: &mut ChaCha8Rng, depth: usize) -> NodeId {
        if depth == 0 || rng.gen_bool(0.4) {
            return match rng.gen_range(0..8) {
                0 => st.mk_basic(Basic::Int),
                1 => st.mk_basic(Basic::Str),
                2 => st.mk_bool(),
                3 => st.mk_basic(Basic::True),
                4 => st.any(),
                5 => st.bottom(),
                6 => {
                    let v = self.tvars[rng.gen_range(0..self.tvars.len())];
                    st.intern(Body::Var(v))
                }
                _ => self.record(st, rng, depth.saturating_sub(1)),
            };
        }
        match rng.gen_range(0..5) {
            0 => {
                let a = self.ty(st, rng, depth - 1);
                let b = self.ty(st, rng, depth - 1);
                st.mk_or(a, b).unwrap()
            }
            1 => {
                let a = self.ty(st, rng, depth - 1);
                let b = self.ty(st, rng, depth - 1);
                st.mk_and(a, b).unwrap()
            }
            2 => {
                let a = self.ty(st, rng, depth - 1);
                st.mk_not(a)
            }
            3 => {
                let d = self.ty(st, rng, depth - 1);
                let c = self.ty(st, rng, depth - 1);
                st.mk_arrow(d, c).unwrap()
            }
            _ => self.record(st, rng, depth - 1),
        }
    }

    /// A record atom; row variables are shared per covered label set so
    /// kinds always agree.
    pub fn record(&self, st: &mut TypeStore, rng: &mut ChaCha8Rng, fdepth: usize) -> NodeId {
        let fin: BTreeSet<Label> = self
            .labels
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .copied()
            .collect();
        let tail = match rng.gen_range(0..3) {
            0 => Tail::Closed,
            1 => Tail::Open,
            _ => {
                let mask: String = self
                    .labels
                    .iter()
                    .map(|l| if fin.contains(l) { '1' } else { '0' })
                    .collect();
                Tail::Var(st.var(&format!("r{}", mask), Kind::Row(fin.clone())))
            }
        };
        let fields: Vec<(Label, NodeId)> = fin
            .iter()
            .map(|&l| (l, gen_field(st, rng, fdepth.min(2))))
            .collect();
        st.mk_record(fields, tail).unwrap()
    }

    /// A random well-kinded substitution over the variables of `t`.
    pub fn subst_for(
        &self,
        st: &mut TypeStore,
        rng: &mut ChaCha8Rng,
        t: NodeId,
        depth: usize,
    ) -> Substitution {
        let mut sub = Substitution::new();
        for v in st.vars_of(t) {
            if rng.gen_bool(0.3) {
                continue;
            }
            match st.var_kind(v) {
                Kind::Type => {
                    let ty = self.ty(st, rng, depth);
                    sub.bind(st, v, ty).unwrap();
                }
                Kind::Field => {
                    let f = gen_field(st, rng, depth.min(2));
                    sub.bind(st, v, f).unwrap();
                }
                Kind::Row(excl) => {
                    let row = self.row(st, rng, &excl, depth);
                    sub.bind(st, v, row).unwrap();
                }
            }
        }
        sub
    }

    /// A random row term of the given definition space.
    pub fn row(
        &self,
        st: &mut TypeStore,
        rng: &mut ChaCha8Rng,
        excl: &BTreeSet<Label>,
        depth: usize,
    ) -> NodeId {
        let atom = |st: &mut TypeStore, rng: &mut ChaCha8Rng| {
            let fin: BTreeSet<Label> = self
                .labels
                .iter()
                .filter(|l| !excl.contains(l) && rng.gen_bool(0.5))
                .copied()
                .collect();
            let fields = fin.iter().map(|&l| (l, gen_field(st, rng, 1))).collect();
            let tail = if rng.gen_bool(0.5) {
                Tail::Closed
            } else {
                Tail::Open
            };
            st.mk_row_atom(fields, tail, excl.clone()).unwrap()
        };
        let mut t = atom(st, rng);
        for _ in 0..depth.min(2) {
            if rng.gen_bool(0.4) {
                let other = atom(st, rng);
                t = if rng.gen_bool(0.5) {
                    st.mk_or(t, other).unwrap()
                } else {
                    st.mk_and(t, other).unwrap()
                };
            }
        }
        t
    }

    /// A pair `(t1, t2)` with `t1 <= t2` by construction.
    pub fn subtype_pair(
        &self,
        st: &mut TypeStore,
        rng: &mut ChaCha8Rng,
        depth: usize,
    ) -> (NodeId, NodeId) {
        let base = self.ty(st, rng, depth);
        if rng.gen_bool(0.5) {
            let extra = self.ty(st, rng, depth);
            let wide = st.mk_or(base, extra).unwrap();
            (base, wide)
        } else {
            let extra = self.ty(st, rng, depth);
            let narrow = st.mk_and(base, extra).unwrap();
            (narrow, base)
        }
    }
}
