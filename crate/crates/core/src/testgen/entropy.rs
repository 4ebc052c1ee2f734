use std::collections::HashMap;

use thiserror::Error;

use crate::lgp::{apply_opcode, DivisionTable, Opcode, Operand, Program, NUM_REGS, PADDING};

use super::TestSuite;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntropyError {
    #[error("histogram has no samples")]
    Empty,
}

/// Shannon entropy in bits of a histogram given as raw counts.
pub fn value_entropy(counts: &[u64]) -> Result<f64, EntropyError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(EntropyError::Empty);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Clone, PartialEq, Eq)]
pub struct Histogram(pub [u64; 256]);

impl Histogram {
    pub fn of(values: impl IntoIterator<Item = u8>) -> Histogram {
        let mut h = [0u64; 256];
        for v in values {
            h[v as usize] += 1;
        }
        Histogram(h)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn entropy(&self) -> Result<f64, EntropyError> {
        value_entropy(&self.0)
    }
}

impl std::fmt::Debug for Histogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let nz: Vec<(usize, u64)> = self.0.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, c)| (i, *c)).collect();
        f.debug_tuple("Histogram").field(&nz).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    InputX,
    InputY,
    Instruction(usize),
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Step::InputX => f.write_str("x"),
            Step::InputY => f.write_str("y"),
            Step::Instruction(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub step: Step,
    pub op: Option<Opcode>,
    pub histogram: Histogram,
    /// Per-case values in case order.
    pub values: Vec<u8>,
    pub entropy: f64,
    /// Entropy of the joint operand values feeding an instruction step.
    pub operand_entropy: Option<f64>,
}

impl StepDistribution {
    /// Information destroyed by the step; never negative since the output
    /// is a function of the operands.
    pub fn entropy_loss(&self) -> Option<f64> {
        self.operand_entropy.map(|h| h - self.entropy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub program: usize,
    pub steps: Vec<StepDistribution>,
}

/// Value distributions of the inputs and of each instruction's result over
/// all cases.
pub fn trace_distributions(program: &Program, cases: &[(u8, u8)], table: &DivisionTable) -> DistributionReport {
    let mut regs: Vec<[u8; NUM_REGS]> = cases
        .iter()
        .map(|&(x, y)| {
            let mut r = [PADDING; NUM_REGS];
            r[program.inputs[0].index()] = x;
            r[program.inputs[1].index()] = y;
            r
        })
        .collect();
    let dist = |step, values: Vec<u8>| {
        let histogram = Histogram::of(values.iter().copied());
        let entropy = histogram.entropy().unwrap_or(0.0);
        StepDistribution { step, op: None, histogram, values, entropy, operand_entropy: None }
    };
    let mut steps = vec![
        dist(Step::InputX, cases.iter().map(|c| c.0).collect()),
        dist(Step::InputY, cases.iter().map(|c| c.1).collect()),
    ];
    for (k, instr) in program.instructions.iter().enumerate() {
        let mut joint: HashMap<(u8, u8), u64> = HashMap::new();
        let mut out = Vec::with_capacity(cases.len());
        for r in regs.iter_mut() {
            let a = r[instr.src1.index()];
            let b = match instr.src2 {
                Operand::Reg(s) => r[s.index()],
                Operand::Const(c) => c,
            };
            *joint.entry((a, b)).or_default() += 1;
            let v = apply_opcode(instr.op, a, b, table);
            r[instr.dst.index()] = v;
            out.push(v);
        }
        let counts: Vec<u64> = joint.into_values().collect();
        let mut d = dist(Step::Instruction(k), out);
        d.op = Some(instr.op);
        d.operand_entropy = value_entropy(&counts).ok();
        steps.push(d);
    }
    DistributionReport { program: 0, steps }
}

pub fn trace_suite(suite: &TestSuite, table: &DivisionTable) -> Vec<DistributionReport> {
    suite
        .programs
        .iter()
        .zip(&suite.inputs)
        .enumerate()
        .map(|(i, (p, c))| DistributionReport { program: i + 1, ..trace_distributions(p, c, table) })
        .collect()
}

/// Mean entropy loss per opcode (indexed by opcode code) and the number of
/// steps averaged; `None` where an opcode never occurs.
pub fn entropy_loss_by_opcode(reports: &[DistributionReport]) -> [(Option<f64>, usize); 4] {
    let mut sums = [(0.0f64, 0usize); 4];
    for s in reports.iter().flat_map(|r| &r.steps) {
        if let (Some(op), Some(loss)) = (s.op, s.entropy_loss()) {
            let e = &mut sums[op.code() as usize];
            e.0 += loss;
            e.1 += 1;
        }
    }
    sums.map(|(sum, n)| ((n > 0).then(|| sum / n as f64), n))
}

/// `program,step,bin,count` for every bin of every step.
pub fn histogram_csv(reports: &[DistributionReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["program", "step", "bin", "count"]).unwrap();
    for r in reports {
        for s in &r.steps {
            for (bin, count) in s.histogram.0.iter().enumerate() {
                w.write_record([r.program.to_string(), s.step.to_string(), bin.to_string(), count.to_string()]).unwrap();
            }
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// `program,step,op,entropy,entropy_loss,values` with the per-case values
/// space-separated.
pub fn trace_csv(reports: &[DistributionReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["program", "step", "op", "entropy", "entropy_loss", "values"]).unwrap();
    for r in reports {
        for s in &r.steps {
            let op = s.op.map(|o| o.symbol().to_string()).unwrap_or_default();
            let loss = s.entropy_loss().map(|l| format!("{l:.6}")).unwrap_or_default();
            let values: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
            w.write_record([r.program.to_string(), s.step.to_string(), op, format!("{:.6}", s.entropy), loss, values.join(" ")]).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// `program,step,entropy`.
pub fn entropy_csv(reports: &[DistributionReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["program", "step", "entropy"]).unwrap();
    for r in reports {
        for s in &r.steps {
            w.write_record([r.program.to_string(), s.step.to_string(), format!("{:.6}", s.entropy)]).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgen::{fixture, gen_suite, ProgramShape};

    #[test]
    fn textbook_values() {
        assert_eq!(value_entropy(&[1u64; 256]).unwrap(), 8.0);
        assert_eq!(value_entropy(&[0, 64, 0]).unwrap(), 0.0);
        assert_eq!(value_entropy(&[5, 5]).unwrap(), 1.0);
        assert_eq!(value_entropy(&[0; 256]), Err(EntropyError::Empty));
        let distinct = Histogram::of(0..64u8);
        assert!((distinct.entropy().unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn self_subtraction_step_is_constant() {
        let t = DivisionTable::build();
        let r = trace_distributions(&fixture::programs()[1], &fixture::cases(1), &t);
        let step2 = r.steps.iter().find(|s| s.step == Step::Instruction(2)).unwrap();
        assert_eq!(step2.entropy, 0.0);
        assert_eq!(step2.histogram.0[0], 64);
    }

    #[test]
    fn step_zero_is_the_quotient_row() {
        let t = DivisionTable::build();
        for p in 0..4 {
            let r = trace_distributions(&fixture::programs()[p], &fixture::cases(p), &t);
            assert_eq!(r.steps[2].histogram, Histogram::of(fixture::quotients(p).iter().copied()));
        }
    }

    #[test]
    fn bins_sum_to_case_count_and_bounds_hold() {
        let t = DivisionTable::build();
        let s = gen_suite(5, &ProgramShape::default(), 64, &t).unwrap();
        for r in trace_suite(&s, &t) {
            for st in &r.steps {
                assert_eq!(st.histogram.total(), 64);
                assert!((0.0..=6.0 + 1e-12).contains(&st.entropy));
                if let Some(l) = st.entropy_loss() {
                    assert!(l > -1e-9);
                }
            }
        }
    }

    #[test]
    fn csv_shapes() {
        let t = DivisionTable::build();
        let reports = trace_suite(&fixture::suite(&t), &t);
        let h = histogram_csv(&reports);
        assert_eq!(h.lines().count(), 1 + 4 * 6 * 256);
        let e = entropy_csv(&reports);
        assert!(e.starts_with("program,step,entropy\n"));
        assert_eq!(e.lines().count(), 1 + 4 * 6);
    }
}
