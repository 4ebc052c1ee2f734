//! Sequential vs rayon evaluation of generated suites and of patch
//! evaluations, plus scalar vs lane-parallel interpretation of one suite.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lgpgi::batch::{interpret_batch, LaneWidth};
use lgpgi::gi::{EditSampler, EditWeights, Patch, Scenario};
use lgpgi::lgp::{expected_registers, DivisionTable};
use lgpgi::par::{self, Execution};
use lgpgi::testgen::{gen_suite, rng_from_seed, ProgramShape, TestSuite};

fn suites(n: u64) -> Vec<TestSuite> {
    let table = DivisionTable::shared();
    (0..n).map(|seed| gen_suite(seed, &ProgramShape::default(), 64, table).unwrap()).collect()
}

fn run_suite(suite: &TestSuite, width: LaneWidth) -> u64 {
    let table = DivisionTable::shared();
    suite.programs.iter().zip(&suite.inputs).map(|(p, c)| interpret_batch(p, c, table, width).row(p.output.index())[0] as u64).sum()
}

fn parallel_vs_sequential(c: &mut Criterion) {
    let suites = suites(256);
    let mut g = c.benchmark_group("suites");
    g.throughput(Throughput::Elements(suites.len() as u64));
    let mut modes = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        modes.push(("parallel", Execution::Parallel));
    }
    for (name, exec) in modes {
        g.bench_function(BenchmarkId::new(name, suites.len()), |b| b.iter(|| par::map(exec, &suites, |s| run_suite(s, LaneWidth::W8)).iter().sum::<u64>()));
    }
    g.finish();
}

/// Fresh patch evaluations on the seeded-defect scenario, where each item
/// costs about a millisecond.
fn patch_evaluations(c: &mut Criterion) {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/gi");
    let scenario = Scenario::load(&dir.join("seeded_defect.scenario")).unwrap();
    let evaluator = scenario.evaluator().unwrap().without_cache();
    let sampler = EditSampler::new(evaluator.trees(), &EditWeights::default());
    let mut rng = rng_from_seed(7);
    let patches: Vec<Patch> = (0..32).map(|_| Patch { edits: vec![sampler.sample(&mut rng).unwrap()], ..Patch::default() }).collect();
    let mut g = c.benchmark_group("evaluations");
    g.sample_size(10);
    g.throughput(Throughput::Elements(patches.len() as u64));
    let mut modes = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        modes.push(("parallel", Execution::Parallel));
    }
    for (name, exec) in modes {
        g.bench_function(name, |b| b.iter(|| par::map(exec, &patches, |p| evaluator.evaluate(p).0.fitness()).iter().min().copied()));
    }
    g.finish();
}

fn scalar_vs_batch(c: &mut Criterion) {
    let table = DivisionTable::shared();
    let suite = &suites(1)[0];
    let mut g = c.benchmark_group("one_suite");
    g.bench_function("scalar", |b| {
        b.iter(|| suite.programs.iter().zip(&suite.inputs).map(|(p, c)| expected_registers(p, c, table).len()).sum::<usize>())
    });
    for w in [LaneWidth::W8, LaneWidth::W16, LaneWidth::W32] {
        g.bench_function(BenchmarkId::new("batch", w.bits()), |b| b.iter(|| run_suite(suite, w)));
    }
    g.finish();
}

criterion_group!(benches, parallel_vs_sequential, patch_evaluations, scalar_vs_batch);
criterion_main!(benches);
