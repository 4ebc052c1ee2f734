//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Run with `cargo test -p lgpgi --test acceptance`.

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;

use lgpgi::batch::{gather_divide, interpret_batch, LaneWidth, LANES};
use lgpgi::gi::{local_search, report, EditKind, EditSampler, EditWeights, Evaluation, Evaluator, Outcome, Patch, Payload, Scenario, SearchConfig, SearchResult};
use lgpgi::harness::{run_mutant, CounterChoice, Limits, Provider, StatusCode};
use lgpgi::lgp::{expected_registers, protected_div, DivisionTable, Instruction, Opcode, Operand, Program, Reg, NUM_REGS};
use lgpgi::testgen::{
    entropy_loss_by_opcode, fixture, gen_division_inputs, gen_suite, rng_from_seed, trace_distributions, trace_suite, value_entropy, InputCategory,
    ProgramShape, Step,
};

type Verdict = Result<String, String>;

fn check(cond: bool, pass: String, fail: String) -> Verdict {
    if cond {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/gi")
}

fn seeded() -> Scenario {
    Scenario::load(&fixtures().join("seeded_defect.scenario")).expect("seeded-defect scenario")
}

fn c1_division_rows() -> Verdict {
    let start = Instant::now();
    let table = DivisionTable::shared();
    let mut wrong = 0;
    let mut pairs = 0;
    for line in include_str!("data/fixture_cases.txt").lines().filter(|l| !l.starts_with('#')) {
        let mut it = line.split_whitespace();
        let p: usize = it.next().unwrap().parse().unwrap();
        if it.next() != Some("q") {
            continue;
        }
        let q: Vec<u8> = it.map(|v| v.parse().unwrap()).collect();
        let cases = fixture::cases(p - 1);
        let xs: [u8; LANES] = std::array::from_fn(|i| cases[i].0);
        let ys: [u8; LANES] = std::array::from_fn(|i| cases[i].1);
        let gathered = gather_divide(&xs, &ys, table.as_slice());
        for i in 0..LANES {
            pairs += 1;
            wrong += (protected_div(xs[i], ys[i]) != q[i]) as usize + (gathered[i] != q[i]) as usize;
        }
    }
    let t = start.elapsed();
    check(pairs == 256 && wrong == 0 && t < Duration::from_secs(1), format!("256/256 pairs exact in {t:?}"), format!("{pairs} pairs, {wrong} mismatches, {t:?}"))
}

fn random_program<R: Rng>(rng: &mut R) -> Program {
    let reg = |rng: &mut R| Reg::new(rng.gen_range(0..NUM_REGS as u8)).unwrap();
    let instructions: Vec<Instruction> = (0..4)
        .map(|_| {
            let op = Opcode::ALL[rng.gen_range(0..4)];
            let (d, a) = (reg(rng), reg(rng));
            let b = if rng.gen_bool(0.5) { Operand::Reg(reg(rng)) } else { Operand::Const(rng.gen()) };
            Instruction::new(op, d, a, b)
        })
        .collect();
    let x = reg(rng);
    let y = loop {
        let r = reg(rng);
        if r != x {
            break r;
        }
    };
    let out = instructions[3].dst;
    Program::new(instructions, [x, y], out)
}

fn c2_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let table = DivisionTable::shared();
    let mut rng = rng_from_seed(2);
    let mut mismatches = 0usize;
    for _ in 0..10_000 {
        let p = random_program(&mut rng);
        let cases: Vec<(u8, u8)> = (0..LANES).map(|_| (rng.gen(), rng.gen())).collect();
        let scalar = expected_registers(&p, &cases, table);
        for w in [LaneWidth::W8, LaneWidth::W16, LaneWidth::W32] {
            let b = interpret_batch(&p, &cases, table, w);
            mismatches += scalar.iter().enumerate().filter(|(c, s)| b.column(*c) != s.regs).count();
        }
    }
    let t = start.elapsed();
    check(mismatches == 0 && t < Duration::from_secs(60), format!("10^4 programs x 64 cases x 3 widths, 0 mismatches in {t:?}"), format!("{mismatches} mismatches in {t:?}"))
}

fn c3_division_table() -> Verdict {
    let table = DivisionTable::build();
    let mut wrong = 0;
    for x in 0..=255u8 {
        for y in 0..=255u8 {
            let expect = if y == 0 { 0 } else { x / y };
            wrong += (table.get(x, y) != expect as u32 || protected_div(x, y) != expect) as usize;
        }
    }
    let bytes = table.byte_len();
    check(wrong == 0 && bytes == 64 * 4096 && table.as_slice().len() == 65536, format!("65536 entries exact, {bytes} bytes = 64 x 4096"), format!("{wrong} wrong entries, {bytes} bytes"))
}

fn c4_input_distribution() -> Verdict {
    let n = 100_000;
    let inputs = gen_division_inputs(&mut rng_from_seed(4), n).map_err(|e| e.to_string())?;
    let frac = |kind: InputCategory| inputs.iter().filter(|d| d.category.kind() == kind).count() as f64 / n as f64;
    let invalid = inputs.iter().filter(|d| protected_div(d.x, d.y) != d.category.target()).count();
    let zero_y = inputs.iter().filter(|d| d.y == 0).count() as f64 / n as f64;
    let edges = [InputCategory::QuotientZero, InputCategory::QuotientOne, InputCategory::QuotientMax, InputCategory::QuotientAny(0)].map(frac);
    let mid = frac(InputCategory::QuotientMid(0));
    let ok = invalid == 0 && (zero_y - 0.5).abs() <= 0.02 && edges.iter().all(|f| (f - 0.0625).abs() <= 0.01) && (mid - 0.25).abs() <= 0.02;
    let detail = format!("y=0 {zero_y:.4}, edges {:.4} {:.4} {:.4} {:.4}, uniform {mid:.4}, {invalid} off-target", edges[0], edges[1], edges[2], edges[3]);
    check(ok, detail.clone(), detail)
}

fn c5_fault_injection() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = dir.path().join("suite.txt");
    std::fs::write(&suite, fixture::suite(DivisionTable::shared()).to_text()).map_err(|e| e.to_string())?;
    let limits = Limits { timeout: Duration::from_secs(30), counter: CounterChoice::Require(Provider::Model) };
    let probes = [
        ("regs-minus-one", StatusCode::Sigsegv),
        ("regs-past-end", StatusCode::Sigsegv),
        ("write-lut", StatusCode::Sigsegv),
        ("write-prog", StatusCode::Sigsegv),
        ("padding", StatusCode::PaddingOverwritten),
        ("unused-register", StatusCode::RegistersCorrupted),
    ];
    let mut detected = 0;
    let mut seen = Vec::new();
    for (probe, want) in probes {
        let args: Vec<OsString> = ["run", "--suite", suite.to_str().unwrap(), "--native", "--probe", probe].map(OsString::from).to_vec();
        let r = run_mutant(Path::new(env!("CARGO_BIN_EXE_gi-sandbox")), &args, &limits);
        detected += (r.status.code == want) as usize;
        seen.push(format!("{probe}={}", r.status.code.name()));
    }
    check(detected == 6, format!("6/6 detections ({})", seen.join(", ")), format!("{detected}/6 ({})", seen.join(", ")))
}

fn c6_fitness_ordering() -> Verdict {
    let e = seeded().evaluator().map_err(|e| e.to_string())?.without_cache();
    let sampler = EditSampler::new(e.trees(), &EditWeights::default());
    let mut rng = rng_from_seed(6);
    let (mut good, mut bad) = (Vec::new(), Vec::new());
    let mut tries = 0;
    while (good.len() < 100 || bad.len() < 100) && tries < 20_000 {
        tries += 1;
        let len = rng.gen_range(1..=3);
        let patch = Patch { edits: (0..len).filter_map(|_| sampler.sample(&mut rng)).collect(), ..Patch::default() };
        let (ev, _) = e.evaluate(&patch);
        match ev.outcome {
            Outcome::AllTestsPassed if good.len() < 100 => good.push(ev.fitness()),
            Outcome::RuntimeError | Outcome::Timeout if bad.len() < 100 && ev.record.is_some() => bad.push(ev.fitness()),
            _ => {}
        }
    }
    let worst_good = good.iter().max().copied().unwrap_or(u64::MAX);
    let best_bad = bad.iter().min().copied().unwrap_or(0);
    let violations = good.iter().map(|g| bad.iter().filter(|b| *b <= g).count()).sum::<usize>();
    check(
        good.len() == 100 && bad.len() == 100 && violations == 0,
        format!("100 correct (max {worst_good}) < 100 erroneous (min {best_bad}), 0 violations"),
        format!("{} correct, {} erroneous, {violations} violations", good.len(), bad.len()),
    )
}

/// Edit `k` of `patch` lands on a mask constant (set to 0) or turns the
/// division arm's `==` into `>=`, judged on the tree it is applied to.
fn hits_seeded_defect(e: &Evaluator, patch: &Patch) -> Option<String> {
    let mut trees = e.trees().clone();
    for edit in &patch.edits {
        let target = trees.tree(&edit.target.file).and_then(|t| t.find(&edit.target.tag, edit.target.index)).map(|n| n.text());
        let literal = match &edit.payload {
            Payload::Literal(l) => l.as_str(),
            _ => "",
        };
        let before = trees.clone();
        let applied = trees.apply_edit(edit);
        match (&edit.kind, target.as_deref()) {
            (EditKind::NumericSetting, Some("65280")) if applied && literal == "0" => return Some(edit.to_string()),
            (EditKind::ComparisonOperatorSetting, Some("==")) if applied && literal == ">=" => {
                let was = before.targets[0].render();
                let now = trees.targets[0].render();
                if was.contains("op == DIV") && now.contains("op >= DIV") {
                    return Some(edit.to_string());
                }
            }
            _ => {}
        }
    }
    None
}

fn c7_seeded_defect_search() -> Verdict {
    let scenario = seeded();
    let mut improved = 0;
    let mut hits = Vec::new();
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let e = scenario.evaluator().map_err(|e| e.to_string())?;
        let r = local_search(&e, &scenario.search, &mut rng_from_seed(seed));
        let fresh = scenario.evaluator().map_err(|e| e.to_string())?.without_cache();
        let (check_eval, _) = fresh.evaluate(&r.best);
        let passes = check_eval.outcome == Outcome::AllTestsPassed && check_eval.record.as_ref().is_some_and(|rec| rec.error_sum == 0);
        if passes && r.best_fitness < r.baseline {
            improved += 1;
        }
        if let Some(h) = hits_seeded_defect(&e, &r.best) {
            hits.push(format!("seed {seed}: {h}"));
        }
        lines.push(format!("seed {seed} {} -> {}", r.baseline, r.best_fitness));
    }
    let detail = format!("{improved}/5 improved [{}]; defect edits: {}", lines.join(", "), if hits.is_empty() { "none".into() } else { hits.join("; ") });
    check(improved >= 4 && !hits.is_empty(), detail.clone(), detail)
}

fn c8_equivalent_mutants() -> Verdict {
    let e = seeded().evaluator().map_err(|e| e.to_string())?;
    let t = &e.trees().targets[0];
    let first = t.find("number", 0).unwrap().text();
    let identity = Patch::parse(&format!("SrcmlNumericSetting(('interp.toy.xml', 'number', 0), '{first}')")).unwrap();
    // the last 255 sits in a branch that only exists at width 32
    let dead = (0..t.count("number")).rev().find(|&i| t.find("number", i).unwrap().text() == "255").unwrap();
    let dead = Patch::parse(&format!("SrcmlNumericSetting(('interp.toy.xml', 'number', {dead}), '7')")).unwrap();
    let outcomes = [e.evaluate(&identity).0.outcome, e.evaluate(&dead).0.outcome];
    let n = outcomes.iter().filter(|o| **o == Outcome::ObjectUnchanged).count();
    check(n == 2, "2/2 object_unchanged".into(), format!("{n}/2: {outcomes:?}"))
}

fn c9_cache(search: &SearchResult) -> Verdict {
    let e = seeded().evaluator().map_err(|e| e.to_string())?;
    let sampler = EditSampler::new(e.trees(), &EditWeights::default());
    let mut rng = rng_from_seed(9);
    let mut seen: Vec<(Patch, Evaluation)> = Vec::new();
    while seen.len() < 1000 {
        let len = rng.gen_range(1..=3);
        let patch = Patch { edits: (0..len).filter_map(|_| sampler.sample(&mut rng)).collect(), ..Patch::default() };
        if seen.iter().any(|(p, _)| *p == patch) {
            continue;
        }
        let (ev, _) = e.evaluate(&patch);
        seen.push((patch, ev));
    }
    let builds = e.builds();
    let mut differ = 0;
    let mut misses = 0;
    for (p, ev) in &seen {
        let (again, hit) = e.evaluate(p);
        misses += (!hit) as usize;
        differ += (again != *ev) as usize;
    }
    let extra = e.builds() - builds;
    let frac = search.log.cache_hit_fraction();
    let detail = format!("1000 re-evaluations: {extra} builds, {misses} misses, {differ} differing; 10^4-step search hit fraction {:.1}%", 100.0 * frac);
    check(extra == 0 && misses == 0 && differ == 0 && frac > 0.05, detail.clone(), detail)
}

fn c10_entropy() -> Verdict {
    let uniform = value_entropy(&[1u64; 256]).map_err(|e| e.to_string())?;
    let constant = value_entropy(&[64]).map_err(|e| e.to_string())?;
    let table = DivisionTable::shared();
    let programs = fixture::programs();
    let report = trace_distributions(&programs[1], &fixture::cases(1), table);
    let sub_step = report.steps.iter().find(|s| s.step == Step::Instruction(2)).map(|s| s.entropy).unwrap_or(f64::NAN);
    let listing = programs[1].instructions[2].to_string();

    let mut reports = Vec::new();
    for seed in 0..100 {
        let suite = gen_suite(seed, &ProgramShape::default(), LANES, table).map_err(|e| e.to_string())?;
        reports.extend(trace_suite(&suite, table));
    }
    let by_op = entropy_loss_by_opcode(&reports);
    let pooled = |ops: [Opcode; 2]| {
        let (sum, n) = ops.iter().fold((0.0, 0), |(s, n), o| {
            let (m, k) = by_op[o.code() as usize];
            (s + m.unwrap_or(0.0) * k as f64, n + k)
        });
        sum / n as f64
    };
    let add_sub = pooled([Opcode::Add, Opcode::Sub]);
    let mul_div = pooled([Opcode::Mul, Opcode::Div]);
    let ok = (uniform - 8.0).abs() <= 1e-9 && constant == 0.0 && listing == "R5=R4-R4" && sub_step == 0.0 && add_sub <= mul_div;
    let detail = format!("H(uniform)={uniform:.12}, H(const)={constant}, H({listing})={sub_step}, loss add/sub {add_sub:.4} <= mul/div {mul_div:.4}");
    check(ok, detail.clone(), detail)
}

fn c11_report_shapes(search: &SearchResult, warmup: usize, budget: usize) -> Verdict {
    let outcomes = report::outcomes_csv(&search.log);
    let total: usize = outcomes.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    let lengths = report::lengths_csv(&search.log, report::LENGTH_WINDOW);
    let mut rows = lengths.lines();
    let header_ok = rows.next() == Some("window_start,window_end,pass_mean,fail_mean,diff");
    let mut diffs_ok = true;
    let mut n = 0;
    for row in rows {
        n += 1;
        let f: Vec<&str> = row.split(',').collect();
        let (p, fl, d): (f64, f64, f64) = (f[2].parse().unwrap_or(f64::NAN), f[3].parse().unwrap_or(f64::NAN), f[4].parse().unwrap_or(f64::NAN));
        diffs_ok &= (fl - p - d).abs() < 1e-3;
    }
    let ok = total == budget + warmup && header_ok && n == budget / report::LENGTH_WINDOW && diffs_ok;
    check(
        ok,
        format!("outcome counts sum to {total} = {budget} + {warmup}; {n} length windows with fail-pass diff"),
        format!("sum {total} vs {}, header {header_ok}, {n} windows, diffs {diffs_ok}", budget + warmup),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &v {
        Ok(d) => println!("criterion {n:>2} PASS  {name}: {d} [{secs:.1}s]"),
        Err(d) => println!("criterion {n:>2} FAIL  {name}: {d} [{secs:.1}s]"),
    }
    v.is_ok()
}

fn main() {
    let scenario = seeded();
    let long = SearchConfig { budget: 10_000, ..scenario.search.clone() };
    let search = scenario.evaluator().map(|e| local_search(&e, &long, &mut rng_from_seed(11)));

    let mut ok = true;
    ok &= run(1, "division rows", c1_division_rows);
    ok &= run(2, "oracle equivalence", c2_oracle_equivalence);
    ok &= run(3, "division table", c3_division_table);
    ok &= run(4, "input distribution", c4_input_distribution);
    ok &= run(5, "sandbox fault injection", c5_fault_injection);
    ok &= run(6, "fitness ordering", c6_fitness_ordering);
    ok &= run(7, "seeded-defect search", c7_seeded_defect_search);
    ok &= run(8, "equivalent mutants", c8_equivalent_mutants);
    match &search {
        Ok(s) => {
            ok &= run(9, "cache behavior", || c9_cache(s));
            ok &= run(10, "entropy diagnostics", c10_entropy);
            ok &= run(11, "report shapes", || c11_report_shapes(s, long.warmup, long.budget));
        }
        Err(e) => {
            println!("criterion  9 FAIL  cache behavior: {e}");
            run(10, "entropy diagnostics", c10_entropy);
            println!("criterion 11 FAIL  report shapes: {e}");
            ok = false;
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
