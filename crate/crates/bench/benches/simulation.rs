use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mis_core::analysis::is_stable;
use mis_core::harness::{run_trial, Experiment, ExperimentSpec};
use mis_core::oracle::{absorption, build_chain, ChainDaemon};
use mis_core::{generate, Algorithm, Configuration, GraphKind};

fn experiment(json: &str) -> Experiment {
    ExperimentSpec::from_json(json).unwrap().validate().unwrap()
}

fn trials(c: &mut Criterion) {
    let anon = experiment(
        r#"{"algo":"anon","graph":{"kind":"gnp","n":40,"p":0.2},"daemon":"conflict","trials":1,"seed":1,"p_bound":0.1}"#,
    );
    let byz = experiment(
        r#"{"algo":"byz","graph":{"kind":"gnp","n":20,"p":0.2,"byzantine":[0]},"daemon":"fair:rsubset:0.5:n",
            "byz_policy":"flip","trials":1,"seed":1,"p_bound":0.5}"#,
    );
    let mut i = 0;
    c.bench_function("anon gnp(40) conflict trial", |b| {
        b.iter(|| {
            i += 1;
            black_box(run_trial(&anon, i, false).unwrap())
        })
    });
    c.bench_function("byz gnp(20) one Byzantine trial", |b| {
        b.iter(|| {
            i += 1;
            black_box(run_trial(&byz, i, false).unwrap())
        })
    });
    c.bench_function("anon gnp(40) conflict trial with trace", |b| {
        b.iter(|| {
            i += 1;
            black_box(run_trial(&anon, i, true).unwrap())
        })
    });
}

fn exact(c: &mut Criterion) {
    let algo = Algorithm::Anonymous;
    let g = generate(GraphKind::Cycle, 5, 0.0, 0).unwrap();
    let start = Configuration::from_flags(&g, &[false; 5]);
    c.bench_function("exact chain C5 single-node absorption", |b| {
        b.iter(|| {
            let chain = build_chain(
                algo,
                &g,
                ChainDaemon::SingleRandom,
                std::slice::from_ref(&start),
                |cfg| is_stable(algo, &g, cfg),
            )
            .unwrap();
            black_box(absorption(&chain, 0).unwrap())
        })
    });
}

criterion_group!(benches, trials, exact);
criterion_main!(benches);
