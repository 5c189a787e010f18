//! Microbenchmarks for the subtyping engine and the tallying pipeline.

use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use setrow_core::oracle::{gen_instances, Bounds};
use setrow_core::subtype::{empty_record, is_subtype};
use setrow_core::tally::{tally, Constraint, DEFAULT_FUEL};
use setrow_core::types::{Basic, Body, Kind, Tail, TypeStore};

/// The worked subtyping example, rebuilt per iteration on a fresh store so
/// the memo does not trivialize the measurement.
fn bench_worked_subtyping(c: &mut Criterion) {
    c.bench_function("subtype/worked_example", |b| {
        b.iter(|| {
            let mut st = TypeStore::new();
            let (a, bb, cc) = (st.label("a"), st.label("b"), st.label("c"));
            let i = st.mk_basic(Basic::Int);
            let s = st.mk_basic(Basic::Str);
            let tt = st.mk_basic(Basic::True);
            let bo = st.mk_bool();
            let rho = st.var("rho", Kind::Row(BTreeSet::from([a, bb])));
            let rho2 = st.var("rho'", Kind::Row(BTreeSet::from([a])));
            let ib = st.mk_or(i, bo).unwrap();
            let is_ = st.mk_or(i, s).unwrap();
            let lhs1 = st
                .mk_record(vec![(a, tt), (bb, ib)], Tail::Var(rho))
                .unwrap();
            let lhs2 = st.mk_record(vec![(bb, is_), (cc, i)], Tail::Open).unwrap();
            let lhs = st.mk_and(lhs1, lhs2).unwrap();
            let rhs1 = st
                .mk_record(vec![(a, bo), (bb, i)], Tail::Var(rho))
                .unwrap();
            let rhs2 = st.mk_record(vec![(a, i)], Tail::Var(rho2)).unwrap();
            let rhs = st.mk_or(rhs1, rhs2).unwrap();
            assert!(is_subtype(&mut st, lhs, rhs));
        })
    });
}

/// Record emptiness over a pre-generated instance batch, shared store.
fn bench_record_emptiness(c: &mut Criterion) {
    let mut st = TypeStore::new();
    let instances = gen_instances(&mut st, &Bounds::default(), 42, 200);
    c.bench_function("subtype/record_emptiness_batch", |b| {
        b.iter(|| {
            let mut count = 0usize;
            for inst in &instances {
                if empty_record(&mut st, &inst.pos, &inst.neg, &inst.vp) {
                    count += 1;
                }
            }
            count
        })
    });
}

/// The three-way record constraint split through the whole pipeline.
fn bench_tally_record_split(c: &mut Criterion) {
    c.bench_function("tally/record_split", |b| {
        b.iter(|| {
            let mut st = TypeStore::new();
            let l1 = st.label("l1");
            let l2 = st.label("l2");
            let a = st.var("a", Kind::Type);
            let bv = st.var("b", Kind::Type);
            let an = st.intern(Body::Var(a));
            let bn = st.intern(Body::Var(bv));
            let i = st.mk_basic(Basic::Int);
            let bo = st.mk_bool();
            let left = st.mk_record(vec![(l1, an), (l2, bn)], Tail::Open).unwrap();
            let right = st.mk_record(vec![(l1, i), (l2, bo)], Tail::Open).unwrap();
            let theta = tally(
                &mut st,
                &[Constraint::leq(left, right)],
                &BTreeSet::new(),
                DEFAULT_FUEL,
            )
            .unwrap();
            assert!(!theta.is_empty());
        })
    });
}

/// A polymorphic application solved by the dove-tail search.
fn bench_apply_types(c: &mut Criterion) {
    c.bench_function("tally/apply_row_polymorphic", |b| {
        b.iter(|| {
            let mut st = TypeStore::new();
            let domain = st.label("domain");
            let line = st.label("line");
            let rho = st.var("f", Kind::Row(BTreeSet::from([domain])));
            let ftop = st.field_top();
            let u = st.undef();
            let dom_t = st.mk_record(vec![(domain, ftop)], Tail::Var(rho)).unwrap();
            let cod_t = st.mk_record(vec![(domain, u)], Tail::Var(rho)).unwrap();
            let f = st.mk_arrow(dom_t, cod_t).unwrap();
            let i = st.mk_basic(Basic::Int);
            let arg = st.mk_record(vec![(line, i)], Tail::Closed).unwrap();
            let rs =
                setrow_core::tally::apply_types(&mut st, f, arg, &BTreeSet::new(), 4, DEFAULT_FUEL)
                    .unwrap();
            assert!(!rs.is_empty());
        })
    });
}

/// Random generated mixed-kind constraint sets through tallying.
fn bench_tally_random(c: &mut Criterion) {
    c.bench_function("tally/random_sets_x20", |b| {
        b.iter(|| {
            let mut st = TypeStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let labels: Vec<_> = ["a", "b"].iter().map(|n| st.label(n)).collect();
            let mut solved = 0usize;
            for _ in 0..20 {
                let t1 = random_record(&mut st, &mut rng, &labels);
                let t2 = random_record(&mut st, &mut rng, &labels);
                if let Ok(theta) = tally(
                    &mut st,
                    &[Constraint::leq(t1, t2)],
                    &BTreeSet::new(),
                    DEFAULT_FUEL,
                ) {
                    solved += theta.len();
                }
            }
            solved
        })
    });
}

fn random_record(
    st: &mut TypeStore,
    rng: &mut ChaCha8Rng,
    labels: &[setrow_core::types::Label],
) -> setrow_core::types::NodeId {
    use rand::Rng;
    let mut fields = Vec::new();
    for &l in labels {
        if rng.gen_bool(0.6) {
            fields.push((l, setrow_core::oracle::gen_field(st, rng, 1)));
        }
    }
    let tail = if rng.gen_bool(0.5) {
        Tail::Open
    } else {
        Tail::Closed
    };
    st.mk_record(fields, tail).unwrap()
}

criterion_group!(
    benches,
    bench_worked_subtyping,
    bench_record_emptiness,
    bench_tally_record_split,
    bench_apply_types,
    bench_tally_random
);
criterion_main!(benches);
