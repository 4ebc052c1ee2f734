//! Lane-parallel interpreter: one program over 64 test cases at once.
//!
//! Registers are stored as an 8 x 64 byte matrix (one row per register, one
//! column per test case). Each opcode is computed on whole rows in a chosen
//! internal lane width, emulating 512-bit vectors:
//!
//! | width | lanes per vector | vectors per row |
//! |-------|------------------|-----------------|
//! | `W8`  | 64               | 1               |
//! | `W16` | 32               | 2               |
//! | `W32` | 16               | 4               |
//!
//! Case `c` always lives in lane `c` of the row (vector `c / lanes`, element
//! `c % lanes`). Multiplication is always done on widened 16 or 32-bit lanes
//! and narrowed back to bytes; protected division gathers 32-bit table
//! entries sixteen lanes at a time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lgp::{DivisionTable, Instruction, Opcode, Operand, Program, RegSet, NUM_REGS, PADDING, TABLE_ENTRIES};

/// Test cases evaluated per call.
pub const LANES: usize = 64;

/// Bytes in the register matrix.
pub const MATRIX_BYTES: usize = NUM_REGS * LANES;

/// Lanes fetched per gather instruction (16 x 32-bit indices).
const GATHER_LANES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LaneWidth {
    #[default]
    W8,
    W16,
    W32,
}

impl LaneWidth {
    pub const ALL: [LaneWidth; 3] = [LaneWidth::W8, LaneWidth::W16, LaneWidth::W32];

    pub fn bits(self) -> u32 {
        match self {
            LaneWidth::W8 => 8,
            LaneWidth::W16 => 16,
            LaneWidth::W32 => 32,
        }
    }

    pub fn lanes_per_vector(self) -> usize {
        512 / self.bits() as usize
    }

    pub fn vectors_per_row(self) -> usize {
        LANES / self.lanes_per_vector()
    }

    pub fn from_bits(bits: u32) -> Option<LaneWidth> {
        LaneWidth::ALL.into_iter().find(|w| w.bits() == bits)
    }
}

impl std::fmt::Display for LaneWidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.bits())
    }
}

impl std::str::FromStr for LaneWidth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().trim_start_matches(['W', 'w']);
        s.parse::<u32>()
            .ok()
            .and_then(LaneWidth::from_bits)
            .ok_or_else(|| format!("lane width must be 8, 16 or 32, got {s:?}"))
    }
}

/// How the last arm of the opcode dispatch chain recognises division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispatchCompare {
    #[default]
    Equal,
    AtLeast,
}

impl DispatchCompare {
    #[inline]
    fn is_div(self, code: u8) -> bool {
        match self {
            DispatchCompare::Equal => code == Opcode::Div.code(),
            DispatchCompare::AtLeast => code >= Opcode::Div.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub width: LaneWidth,
    /// Clear the upper byte of sign-extended multiply operands. The product
    /// is narrowed to a byte anyway, so this step never changes a result.
    pub redundant_mask: bool,
    pub dispatch: DispatchCompare,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { width: LaneWidth::W8, redundant_mask: true, dispatch: DispatchCompare::Equal }
    }
}

impl BatchOptions {
    pub fn with_width(width: LaneWidth) -> Self {
        BatchOptions { width, ..Default::default() }
    }
}

/// Deterministic operation count used when no hardware counter is available.
pub mod cost {
    pub const DISPATCH: u64 = 1;
    pub const FETCH: u64 = 1;
    pub const ARITH: u64 = 1;
    pub const DIV: u64 = 2;
    pub const MASK: u64 = 1;
    pub const NARROW: u64 = 1;
    /// Charged once per program run regardless of length.
    pub const SETUP: u64 = 8;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostMeter {
    pub count: u64,
}

impl CostMeter {
    fn charge(&mut self, groups: usize, per_group: u64) {
        self.count += groups as u64 * per_group;
    }
}

/// 8 x 64 register matrix plus the set of registers written so far.
#[derive(Clone, PartialEq, Eq)]
pub struct RegisterFileBatch {
    cells: [u8; MATRIX_BYTES],
    pub written: RegSet,
}

impl RegisterFileBatch {
    /// All cells at the padding byte except the two input rows.
    pub fn preloaded(program: &Program, cases: &[(u8, u8)]) -> RegisterFileBatch {
        assert_eq!(cases.len(), LANES, "batch interpreter takes exactly {LANES} cases");
        let mut cells = [PADDING; MATRIX_BYTES];
        preload_inputs(&mut cells, program, cases);
        RegisterFileBatch { cells, written: RegSet::empty() }
    }

    pub fn from_cells(cells: [u8; MATRIX_BYTES], written: RegSet) -> RegisterFileBatch {
        RegisterFileBatch { cells, written }
    }

    pub fn cells(&self) -> &[u8; MATRIX_BYTES] {
        &self.cells
    }

    pub fn row(&self, reg: usize) -> &[u8; LANES] {
        self.cells[reg * LANES..(reg + 1) * LANES].try_into().unwrap()
    }

    pub fn column(&self, case: usize) -> [u8; NUM_REGS] {
        std::array::from_fn(|r| self.cells[r * LANES + case])
    }

    /// 8 lines of 64 comma-separated values, one line per register.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..NUM_REGS {
            let row: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

impl std::fmt::Debug for RegisterFileBatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut d = f.debug_struct("RegisterFileBatch");
        for r in 0..NUM_REGS {
            d.field(&format!("R{r}"), &&self.row(r)[..]);
        }
        d.field("written", &self.written).finish()
    }
}

/// Writes x into the first input row and y into the second. When both
/// inputs name one register y wins, as in the scalar interpreter.
pub fn preload_inputs(cells: &mut [u8; MATRIX_BYTES], program: &Program, cases: &[(u8, u8)]) {
    let (xr, yr) = (program.inputs[0].index(), program.inputs[1].index());
    for (c, &(x, y)) in cases.iter().enumerate().take(LANES) {
        cells[xr * LANES + c] = x;
        cells[yr * LANES + c] = y;
    }
}

/// Operand row widened to the interpreter's lane type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LaneRow {
    W8([u8; LANES]),
    W16([u16; LANES]),
    W32([u32; LANES]),
}

impl LaneRow {
    pub fn width(&self) -> LaneWidth {
        match self {
            LaneRow::W8(_) => LaneWidth::W8,
            LaneRow::W16(_) => LaneWidth::W16,
            LaneRow::W32(_) => LaneWidth::W32,
        }
    }

    pub fn lane(&self, i: usize) -> u32 {
        match self {
            LaneRow::W8(v) => v[i] as u32,
            LaneRow::W16(v) => v[i] as u32,
            LaneRow::W32(v) => v[i] as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    First,
    Second,
}

trait Lane: Copy + Default {
    fn zext(b: u8) -> Self;
    /// Sign extension, as a byte-to-wider vector conversion would do.
    fn sext(b: u8) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn clear_upper(self) -> Self;
    fn low_byte(self) -> u8;
}

impl Lane for u8 {
    fn zext(b: u8) -> Self {
        b
    }
    fn sext(b: u8) -> Self {
        b
    }
    fn add(self, o: Self) -> Self {
        self.wrapping_add(o)
    }
    fn sub(self, o: Self) -> Self {
        self.wrapping_sub(o)
    }
    fn mul(self, o: Self) -> Self {
        self.wrapping_mul(o)
    }
    fn clear_upper(self) -> Self {
        self
    }
    fn low_byte(self) -> u8 {
        self
    }
}

macro_rules! wide_lane {
    ($t:ty, $s:ty) => {
        impl Lane for $t {
            fn zext(b: u8) -> Self {
                b as $t
            }
            fn sext(b: u8) -> Self {
                b as i8 as $s as $t
            }
            fn add(self, o: Self) -> Self {
                self.wrapping_add(o)
            }
            fn sub(self, o: Self) -> Self {
                self.wrapping_sub(o)
            }
            fn mul(self, o: Self) -> Self {
                self.wrapping_mul(o)
            }
            fn clear_upper(self) -> Self {
                self & 0xff
            }
            fn low_byte(self) -> u8 {
                self as u8
            }
        }
    };
}
wide_lane!(u16, i16);
wide_lane!(u32, i32);

fn operand_row(instr: &Instruction, which: Which, cells: &[u8; MATRIX_BYTES]) -> [u8; LANES] {
    let reg = match (which, instr.src2) {
        (Which::First, _) => instr.src1,
        (Which::Second, Operand::Reg(r)) => r,
        (Which::Second, Operand::Const(c)) => return [c; LANES],
    };
    cells[reg.index() * LANES..(reg.index() + 1) * LANES].try_into().unwrap()
}

fn widen<L: Lane>(row: &[u8; LANES]) -> [L; LANES] {
    std::array::from_fn(|i| L::zext(row[i]))
}

/// Operand bytes for `instr`, zero-extended to `width` lanes. Constants are
/// broadcast to every lane.
pub fn fetch_operand(instr: &Instruction, which: Which, batch: &RegisterFileBatch, width: LaneWidth) -> LaneRow {
    let row = operand_row(instr, which, &batch.cells);
    match width {
        LaneWidth::W8 => LaneRow::W8(row),
        LaneWidth::W16 => LaneRow::W16(widen(&row)),
        LaneWidth::W32 => LaneRow::W32(widen(&row)),
    }
}

/// Multiply support routine: sign-extends (the only widening conversion the
/// vector unit offers), then optionally blends the upper byte back to zero.
fn fetch_mul_operand<L: Lane>(row: &[u8; LANES], redundant_mask: bool) -> [L; LANES] {
    std::array::from_fn(|i| {
        let v = L::sext(row[i]);
        if redundant_mask {
            v.clear_upper()
        } else {
            v
        }
    })
}

/// Sixty-four protected divisions via four 16-lane gathers of 32-bit table
/// entries at index `x * 256 + y`.
pub fn gather_divide(xs: &[u8; LANES], ys: &[u8; LANES], lut: &[u32]) -> [u8; LANES] {
    assert_eq!(lut.len(), TABLE_ENTRIES, "division table must hold 65536 entries");
    let mut out = [0u8; LANES];
    for ((o, x), y) in out.chunks_exact_mut(GATHER_LANES).zip(xs.chunks_exact(GATHER_LANES)).zip(ys.chunks_exact(GATHER_LANES)) {
        let idx: [u32; GATHER_LANES] = std::array::from_fn(|i| (x[i] as u32) << 8 | y[i] as u32);
        for (lane, &ix) in o.iter_mut().zip(idx.iter()) {
            *lane = lut[ix as usize] as u8;
        }
    }
    out
}

fn lanewise<L: Lane>(a: &[L; LANES], b: &[L; LANES], f: impl Fn(L, L) -> L) -> [u8; LANES] {
    std::array::from_fn(|i| f(a[i], b[i]).low_byte())
}

fn add_sub<L: Lane>(a: &[u8; LANES], b: &[u8; LANES], sub: bool) -> [u8; LANES] {
    let (a, b) = (widen::<L>(a), widen::<L>(b));
    if sub {
        lanewise(&a, &b, L::sub)
    } else {
        lanewise(&a, &b, L::add)
    }
}

fn multiply<L: Lane>(a: &[u8; LANES], b: &[u8; LANES], mask: bool) -> [u8; LANES] {
    let (a, b) = (fetch_mul_operand::<L>(a, mask), fetch_mul_operand::<L>(b, mask));
    lanewise(&a, &b, L::mul)
}

/// Runs `instructions` over a register matrix in place and returns the set
/// of registers written. `lut` is the 65536-entry division table (possibly a
/// view into sandbox memory).
pub fn execute_in_place(
    instructions: &[Instruction],
    cells: &mut [u8; MATRIX_BYTES],
    lut: &[u32],
    opts: &BatchOptions,
    meter: &mut CostMeter,
) -> RegSet {
    use cost::*;
    let width = opts.width;
    let groups = width.vectors_per_row();
    // multiplies run on 16-bit lanes at W8/W16 and 32-bit lanes at W32
    let mul_groups = groups.max(2);
    let narrow = if width == LaneWidth::W8 { 0 } else { NARROW };
    let mut written = RegSet::empty();
    meter.count += SETUP;

    for instr in instructions {
        let a = operand_row(instr, Which::First, cells);
        let b = operand_row(instr, Which::Second, cells);
        let code = instr.op.code();
        let add_sub_at = |sub: bool| match width {
            LaneWidth::W8 => add_sub::<u8>(&a, &b, sub),
            LaneWidth::W16 => add_sub::<u16>(&a, &b, sub),
            LaneWidth::W32 => add_sub::<u32>(&a, &b, sub),
        };
        let result = if code == Opcode::Add.code() {
            meter.charge(groups, DISPATCH + 2 * FETCH + ARITH + narrow);
            add_sub_at(false)
        } else if code == Opcode::Sub.code() {
            meter.charge(groups, DISPATCH + 2 * FETCH + ARITH + narrow);
            add_sub_at(true)
        } else if code == Opcode::Mul.code() {
            let mask = if opts.redundant_mask { 2 * MASK } else { 0 };
            meter.charge(mul_groups, DISPATCH + 2 * FETCH + mask + ARITH + NARROW);
            match width {
                LaneWidth::W8 | LaneWidth::W16 => multiply::<u16>(&a, &b, opts.redundant_mask),
                LaneWidth::W32 => multiply::<u32>(&a, &b, opts.redundant_mask),
            }
        } else if opts.dispatch.is_div(code) {
            meter.charge(LANES / GATHER_LANES, DISPATCH + 2 * FETCH + DIV);
            gather_divide(&a, &b, lut)
        } else {
            unreachable!("opcode {code} outside the instruction set")
        };
        let d = instr.dst.index();
        cells[d * LANES..(d + 1) * LANES].copy_from_slice(&result);
        written.insert(instr.dst);
    }
    written
}

/// Evaluates `program` on exactly 64 cases with default options at `width`.
pub fn interpret_batch(program: &Program, cases: &[(u8, u8)], table: &DivisionTable, width: LaneWidth) -> RegisterFileBatch {
    interpret_batch_with(program, cases, table, &BatchOptions::with_width(width), &mut CostMeter::default())
}

pub fn interpret_batch_with(
    program: &Program,
    cases: &[(u8, u8)],
    table: &DivisionTable,
    opts: &BatchOptions,
    meter: &mut CostMeter,
) -> RegisterFileBatch {
    let mut batch = RegisterFileBatch::preloaded(program, cases);
    batch.written = execute_in_place(&program.instructions, &mut batch.cells, table.as_slice(), opts, meter);
    batch
}

/// Cost-model count for one run of `program` (independent of inputs).
pub fn model_cost(program: &Program, opts: &BatchOptions) -> u64 {
    let cases = [(0u8, 0u8); LANES];
    let mut meter = CostMeter::default();
    interpret_batch_with(program, &cases, DivisionTable::shared(), opts, &mut meter);
    meter.count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgp::{interpret_scalar, protected_div, Reg};

    fn program(lines: &str, inputs: [u8; 2]) -> Program {
        let instructions = Program::parse_listing(lines).unwrap();
        let out = instructions.last().map(|i| i.dst).unwrap_or(Reg::new(0).unwrap());
        Program::new(instructions, [Reg::new(inputs[0]).unwrap(), Reg::new(inputs[1]).unwrap()], out)
    }

    fn cases() -> Vec<(u8, u8)> {
        (0..64u32).map(|i| ((i * 37 + 11) as u8, (i * 101 % 7) as u8)).collect()
    }

    #[test]
    fn constant_operand_broadcasts() {
        let p = program("R6=R4/126", [0, 4]);
        let b = RegisterFileBatch::preloaded(&p, &cases());
        for w in LaneWidth::ALL {
            let row = fetch_operand(&p.instructions[0], Which::Second, &b, w);
            assert!((0..LANES).all(|i| row.lane(i) == 126));
            assert_eq!(row.width(), w);
        }
    }

    #[test]
    fn register_operand_reads_columns() {
        let p = program("R6=R4/126", [0, 4]);
        let cs = cases();
        let b = RegisterFileBatch::preloaded(&p, &cs);
        let row = fetch_operand(&p.instructions[0], Which::First, &b, LaneWidth::W32);
        for (c, &(_, y)) in cs.iter().enumerate() {
            assert_eq!(row.lane(c), y as u32);
        }
    }

    #[test]
    fn widening_is_zero_extension_for_every_byte() {
        let p = program("R1=R0+R0", [0, 2]);
        for v in 0..=255u8 {
            let b = RegisterFileBatch::preloaded(&p, &[(v, 0); 64]);
            let i = &p.instructions[0];
            match fetch_operand(i, Which::First, &b, LaneWidth::W16) {
                LaneRow::W16(l) => assert!(l.iter().all(|&x| x == v as u16)),
                other => panic!("{other:?}"),
            }
            match fetch_operand(i, Which::First, &b, LaneWidth::W32) {
                LaneRow::W32(l) => assert!(l.iter().all(|&x| x == v as u32)),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn sign_extension_is_cleared_by_mask() {
        let row = [0xaau8; LANES];
        let masked = fetch_mul_operand::<u16>(&row, true);
        let raw = fetch_mul_operand::<u16>(&row, false);
        assert_eq!(masked[0], 0x00aa);
        assert_eq!(raw[0], 0xffaa);
    }

    #[test]
    fn gather_of_zero_divisors_is_zero() {
        let t = DivisionTable::build();
        let xs: [u8; 64] = std::array::from_fn(|i| i as u8 * 3);
        assert_eq!(gather_divide(&xs, &[0; 64], t.as_slice()), [0; 64]);
    }

    #[test]
    fn gather_matches_scalar_over_full_sweep() {
        let t = DivisionTable::build();
        let pairs: Vec<(u8, u8)> = (0..=255u8).flat_map(|x| (0..=255u8).map(move |y| (x, y))).collect();
        for chunk in pairs.chunks_exact(64) {
            let xs: [u8; 64] = std::array::from_fn(|i| chunk[i].0);
            let ys: [u8; 64] = std::array::from_fn(|i| chunk[i].1);
            let out = gather_divide(&xs, &ys, t.as_slice());
            for i in 0..64 {
                assert_eq!(out[i], protected_div(xs[i], ys[i]));
            }
        }
    }

    #[test]
    fn empty_program_leaves_padding() {
        let p = Program::new(vec![], [Reg::new(1).unwrap(), Reg::new(3).unwrap()], Reg::new(1).unwrap());
        let cs = cases();
        let b = interpret_batch(&p, &cs, &DivisionTable::build(), LaneWidth::W16);
        for r in [0, 2, 4, 5, 6, 7] {
            assert!(b.row(r).iter().all(|&v| v == PADDING));
        }
        assert_eq!(b.row(1)[5], cs[5].0);
        assert_eq!(b.row(3)[5], cs[5].1);
    }

    #[test]
    fn mask_and_dispatch_variants_agree_with_scalar() {
        let t = DivisionTable::build();
        let p = program("R2=R0/R1\nR3=R2*R0\nR4=R3*77\nR5=R4-R2\nR6=R5+R3\nR7=R6/R2", [0, 1]);
        let cs: Vec<(u8, u8)> = (0..64u32).map(|i| ((200 + i * 3) as u8, (i % 9) as u8)).collect();
        for width in LaneWidth::ALL {
            for redundant_mask in [true, false] {
                for dispatch in [DispatchCompare::Equal, DispatchCompare::AtLeast] {
                    let opts = BatchOptions { width, redundant_mask, dispatch };
                    let b = interpret_batch_with(&p, &cs, &t, &opts, &mut CostMeter::default());
                    for (c, &case) in cs.iter().enumerate() {
                        assert_eq!(b.column(c), interpret_scalar(&p, case, &t).regs);
                    }
                }
            }
        }
    }

    #[test]
    fn cost_model_orders_configurations() {
        let p = program("R2=R0*R1\nR3=R2+1", [0, 1]);
        let masked = model_cost(&p, &BatchOptions::default());
        let unmasked = model_cost(&p, &BatchOptions { redundant_mask: false, ..Default::default() });
        assert!(unmasked < masked);
        let w8 = model_cost(&p, &BatchOptions::with_width(LaneWidth::W8));
        let w16 = model_cost(&p, &BatchOptions::with_width(LaneWidth::W16));
        let w32 = model_cost(&p, &BatchOptions::with_width(LaneWidth::W32));
        assert!(w8 < w16 && w16 < w32);
        let empty = Program::new(vec![], p.inputs, p.output);
        assert_eq!(model_cost(&empty, &BatchOptions::default()), cost::SETUP);
    }

    #[test]
    fn csv_has_eight_rows_of_sixty_four() {
        let p = program("R2=R0+R1", [0, 1]);
        let b = interpret_batch(&p, &cases(), &DivisionTable::build(), LaneWidth::W8);
        let csv = b.to_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().all(|l| l.split(',').count() == 64));
    }

    #[test]
    fn lane_width_parse() {
        assert_eq!("16".parse::<LaneWidth>().unwrap(), LaneWidth::W16);
        assert_eq!("W32".parse::<LaneWidth>().unwrap(), LaneWidth::W32);
        assert!("12".parse::<LaneWidth>().is_err());
    }
}
