use std::fmt::Write as _;

use thiserror::Error;

use crate::lgp::{expected_registers, protected_div, DivisionTable, Opcode, Program, Reg, RegisterState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseSuiteError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("program {program}: {msg}")]
    Invalid { program: usize, msg: String },
    #[error("suite holds no programs")]
    Empty,
}

/// Programs, their input pairs and the oracle's expected registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub programs: Vec<Program>,
    pub inputs: Vec<Vec<(u8, u8)>>,
    pub expected: Vec<Vec<RegisterState>>,
    pub seed: Option<u64>,
}

impl TestSuite {
    pub fn new(programs: Vec<Program>, inputs: Vec<Vec<(u8, u8)>>, seed: Option<u64>, table: &DivisionTable) -> TestSuite {
        assert_eq!(programs.len(), inputs.len(), "one input batch per program");
        let expected = programs.iter().zip(&inputs).map(|(p, c)| expected_registers(p, c, table)).collect();
        TestSuite { programs, inputs, expected, seed }
    }

    pub fn total_cases(&self) -> usize {
        self.inputs.iter().map(Vec::len).sum()
    }

    /// Text form: a `seed` line, then per program a header, its listing and
    /// a `cases` block of `x y x/y` triples.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# lgpgi test suite\n");
        match self.seed {
            Some(s) => writeln!(out, "seed {s}").unwrap(),
            None => out.push_str("seed none\n"),
        }
        for (i, (p, cases)) in self.programs.iter().zip(&self.inputs).enumerate() {
            writeln!(out, "\nprogram {} inputs {} {} output {}", i + 1, p.inputs[0], p.inputs[1], p.output).unwrap();
            out.push_str(&p.listing());
            writeln!(out, "cases {}", cases.len()).unwrap();
            for &(x, y) in cases {
                writeln!(out, "{x} {y} {}", protected_div(x, y)).unwrap();
            }
        }
        out
    }

    /// Parses the text form and recomputes expected registers. Each triple's
    /// third value must equal x/y under protected division.
    pub fn parse(text: &str, table: &DivisionTable) -> Result<TestSuite, ParseSuiteError> {
        let mut seed = None;
        let mut programs = Vec::new();
        let mut inputs: Vec<Vec<(u8, u8)>> = Vec::new();
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .peekable();
        let syntax = |line: usize, msg: &str| ParseSuiteError::Syntax { line, msg: msg.to_string() };

        while let Some((n, line)) = lines.next() {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["seed", "none"] => seed = None,
                ["seed", s] => seed = Some(s.parse().map_err(|_| syntax(n, "bad seed"))?),
                ["program", _, "inputs", x, y, "output", o] => {
                    let reg = |s: &str| {
                        s.strip_prefix('R')
                            .and_then(|d| d.parse::<u8>().ok())
                            .and_then(Reg::new)
                            .ok_or_else(|| syntax(n, "bad register"))
                    };
                    let (x, y, o) = (reg(x)?, reg(y)?, reg(o)?);
                    let mut instructions = Vec::new();
                    while let Some(&(m, l)) = lines.peek() {
                        if l.starts_with("cases") {
                            break;
                        }
                        instructions.push(l.parse().map_err(|e| syntax(m, &format!("{e}")))?);
                        lines.next();
                    }
                    let (m, l) = lines.next().ok_or_else(|| syntax(n, "missing cases block"))?;
                    let count: usize = l
                        .strip_prefix("cases")
                        .and_then(|c| c.trim().parse().ok())
                        .ok_or_else(|| syntax(m, "bad cases line"))?;
                    let mut cases = Vec::with_capacity(count);
                    for _ in 0..count {
                        let (m, l) = lines.next().ok_or_else(|| syntax(m, "truncated cases block"))?;
                        let v: Vec<u8> = l
                            .split_whitespace()
                            .map(str::parse)
                            .collect::<Result<_, _>>()
                            .map_err(|_| syntax(m, "case values must be bytes"))?;
                        let [x, y, q] = v[..] else {
                            return Err(syntax(m, "expected `x y x/y`"));
                        };
                        if protected_div(x, y) != q {
                            return Err(syntax(m, &format!("{x}/{y} is {}, not {q}", protected_div(x, y))));
                        }
                        cases.push((x, y));
                    }
                    programs.push(Program::new(instructions, [x, y], o));
                    inputs.push(cases);
                }
                _ => return Err(syntax(n, "unrecognised line")),
            }
        }
        if programs.is_empty() {
            return Err(ParseSuiteError::Empty);
        }
        let suite = TestSuite::new(programs, inputs, seed, table);
        suite.validate()?;
        Ok(suite)
    }

    /// Structural checks: distinct input registers, a leading division of
    /// x by y, valid instructions and at least one case.
    pub fn validate(&self) -> Result<(), ParseSuiteError> {
        for (i, (p, cases)) in self.programs.iter().zip(&self.inputs).enumerate() {
            let bad = |msg: &str| Err(ParseSuiteError::Invalid { program: i + 1, msg: msg.to_string() });
            if p.inputs[0] == p.inputs[1] {
                return bad("input registers must differ");
            }
            match p.instructions.first() {
                Some(first) if first.op == Opcode::Div => {}
                _ => return bad("first instruction must be a division"),
            }
            if !p.instructions.iter().all(|i| i.is_valid()) {
                return bad("invalid instruction");
            }
            if cases.is_empty() {
                return bad("no cases");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgen::{fixture, gen_suite, ProgramShape};

    #[test]
    fn text_round_trip() {
        let t = DivisionTable::build();
        let s = gen_suite(9, &ProgramShape::default(), 64, &t).unwrap();
        let text = s.to_text();
        assert_eq!(TestSuite::parse(&text, &t).unwrap(), s);
        let f = fixture::suite(&t);
        assert_eq!(TestSuite::parse(&f.to_text(), &t).unwrap(), f);
        assert_eq!(f.total_cases(), 256);
    }

    #[test]
    fn rejects_wrong_quotient() {
        let t = DivisionTable::build();
        let text = fixture::suite(&t).to_text().replacen("221 5 44", "221 5 45", 1);
        assert!(matches!(TestSuite::parse(&text, &t), Err(ParseSuiteError::Syntax { .. })));
    }

    #[test]
    fn rejects_structural_problems() {
        let t = DivisionTable::build();
        let text = "seed 1\nprogram 1 inputs R0 R0 output R1\nR1=R0/R0\ncases 1\n4 2 2\n";
        assert!(matches!(TestSuite::parse(text, &t), Err(ParseSuiteError::Invalid { .. })));
        let text = "seed 1\nprogram 1 inputs R0 R2 output R1\nR1=R0+R2\ncases 1\n4 2 2\n";
        assert!(matches!(TestSuite::parse(text, &t), Err(ParseSuiteError::Invalid { .. })));
        assert_eq!(TestSuite::parse("seed 3\n", &t), Err(ParseSuiteError::Empty));
    }
}
