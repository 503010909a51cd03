use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfrkit::pipeline::backend::ReplayBackend;
use mfrkit::{
    extract_blocks, parse_model, parse_plan, run_strategy, score_transcript, solve, validate_plan, Corpus, Mode,
    SearchConfig, Strategy, Task,
};

fn tasks() -> Vec<Task> {
    Corpus::default().load_all().expect("corpus loads")
}

fn parsing(c: &mut Criterion) {
    let tasks = tasks();
    c.bench_function("parse_model/corpus", |b| {
        b.iter(|| {
            for t in &tasks {
                black_box(parse_model(black_box(&t.reference_model_text)).unwrap());
            }
        })
    });
    let plans: Vec<String> = tasks.iter().map(|t| t.reference_plan.to_text()).collect();
    c.bench_function("parse_plan/corpus", |b| {
        b.iter(|| {
            for p in &plans {
                black_box(parse_plan(black_box(p)));
            }
        })
    });
    let response = format!(
        "Some reasoning first.\n\n```mdl\n{}```\n\nand a plan\n\n```plan\n{}```\n",
        tasks[0].reference_model_text, plans[0]
    );
    c.bench_function("extract_blocks", |b| b.iter(|| black_box(extract_blocks(black_box(&response)))));
}

fn validation(c: &mut Criterion) {
    let tasks = tasks();
    c.bench_function("validate_plan/corpus", |b| {
        b.iter(|| {
            for t in &tasks {
                black_box(validate_plan(&t.reference_model, &t.reference_plan, Mode::ContinueAndSkip));
            }
        })
    });
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for t in tasks() {
        g.bench_function(&t.id, |b| b.iter(|| black_box(solve(&t.reference_model, &SearchConfig::default()).unwrap())));
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let tasks = tasks();
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/replay.jsonl");
    let backend = ReplayBackend::load(&fixture).expect("fixture loads");
    let runs: Vec<_> = tasks
        .iter()
        .flat_map(|t| Strategy::ALL.map(|s| (t, run_strategy(t, s, &backend, 0.0))))
        .collect();
    c.bench_function("score_transcript/replay", |b| {
        b.iter(|| {
            for (t, r) in &runs {
                black_box(score_transcript(t, r));
            }
        })
    });
    c.bench_function("run_strategy/replay", |b| {
        b.iter(|| {
            for t in &tasks {
                black_box(run_strategy(t, Strategy::React, &backend, 0.0));
            }
        })
    });
}

criterion_group!(benches, parsing, validation, search, scoring);
criterion_main!(benches);
