//! The four example programs and 256 input pairs used as the regression
//! suite. These are fixed data, independent of the random generator.

use crate::lgp::{DivisionTable, Program, Reg};

use super::TestSuite;

/// Program listings, one string per program.
pub const PROGRAMS: [&str; 4] = [
    "R5=R0/R4\nR6=R4/126\nR6=R0*128\nR1=R5/118\n",
    "R4=R2/R5\nR5=R5-101\nR5=R4-R4\nR1=R4/R4\n",
    "R6=R1/R5\nR4=R1+119\nR6=R5+60\nR7=R5-61\n",
    "R3=R3/R6\nR6=R3*R3\nR1=R6*65\nR0=R3-112\n",
];

/// Input registers (x, y) for each program, read off the first instruction.
pub const INPUT_REGS: [[u8; 2]; 4] = [[0, 4], [2, 5], [1, 5], [3, 6]];

/// Output register of each program (destination of its last instruction).
pub const OUTPUT_REGS: [u8; 4] = [1, 1, 7, 0];

const TABLE_X: [[u8; 64]; 4] = [
    [
        170, 255, 243, 221, 150, 130, 255, 154, 4, 200, 96, 17, 232, 202, 99, 213,
        111, 255, 53, 20, 28, 216, 20, 169, 116, 63, 160, 248, 217, 82, 255, 255,
        166, 118, 130, 125, 255, 250, 255, 205, 198, 11, 224, 191, 246, 130, 91, 240,
        232, 28, 130, 216, 12, 231, 227, 196, 115, 186, 151, 161, 219, 204, 57, 185,
    ],
    [
        247, 124, 91, 137, 51, 176, 240, 200, 221, 196, 141, 196, 97, 118, 132, 247,
        134, 42, 198, 123, 96, 184, 244, 53, 227, 48, 255, 29, 178, 202, 255, 81,
        185, 55, 48, 93, 33, 255, 203, 255, 225, 247, 110, 63, 103, 7, 122, 255,
        186, 17, 188, 48, 222, 120, 163, 155, 26, 125, 22, 32, 57, 159, 14, 92,
    ],
    [
        105, 76, 30, 209, 231, 72, 94, 58, 254, 116, 174, 80, 48, 124, 63, 194,
        249, 18, 26, 248, 199, 140, 149, 57, 213, 131, 240, 131, 28, 22, 181, 242,
        42, 241, 163, 183, 156, 175, 136, 233, 108, 48, 1, 201, 152, 23, 5, 134,
        144, 38, 203, 66, 179, 255, 194, 107, 23, 221, 229, 225, 148, 101, 38, 121,
    ],
    [
        72, 254, 209, 201, 218, 229, 7, 187, 218, 223, 255, 255, 40, 184, 41, 160,
        212, 185, 189, 152, 127, 15, 221, 152, 45, 25, 111, 173, 226, 217, 125, 103,
        25, 206, 80, 139, 57, 249, 208, 206, 127, 250, 94, 219, 212, 118, 40, 89,
        162, 177, 245, 176, 238, 174, 228, 99, 255, 111, 3, 154, 13, 0, 255, 181,
    ],
];

const TABLE_Y: [[u8; 64]; 4] = [
    [
        0, 1, 1, 5, 2, 0, 1, 1, 40, 0, 122, 0, 1, 0, 0, 0,
        0, 1, 0, 189, 127, 2, 79, 1, 0, 0, 2, 236, 8, 0, 1, 1,
        0, 0, 1, 112, 1, 3, 1, 0, 1, 0, 3, 25, 128, 3, 0, 2,
        0, 54, 1, 2, 171, 2, 2, 125, 0, 1, 0, 0, 0, 0, 32, 2,
    ],
    [
        6, 0, 1, 4, 254, 0, 232, 1, 0, 0, 2, 1, 0, 1, 247, 236,
        1, 0, 0, 62, 0, 1, 2, 0, 0, 26, 1, 0, 2, 0, 1, 0,
        0, 0, 0, 1, 0, 1, 0, 1, 190, 0, 0, 3, 128, 0, 0, 1,
        3, 0, 0, 91, 2, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0,
    ],
    [
        1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 34, 0,
        12, 0, 0, 3, 0, 0, 0, 0, 0, 1, 0, 0, 0, 35, 0, 0,
        98, 2, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 80, 0, 0, 0,
        1, 0, 0, 0, 0, 1, 0, 125, 0, 10, 2, 0, 0, 0, 0, 0,
    ],
    [
        0, 4, 1, 0, 0, 0, 164, 154, 0, 4, 1, 1, 0, 0, 0, 0,
        1, 1, 1, 2, 1, 0, 1, 0, 0, 0, 0, 0, 209, 1, 0, 0,
        0, 0, 0, 0, 0, 2, 2, 2, 2, 4, 0, 2, 5, 4, 0, 45,
        0, 168, 0, 0, 0, 162, 3, 202, 1, 2, 0, 0, 13, 0, 1, 2,
    ],
];

const TABLE_QUOTIENT: [[u8; 64]; 4] = [
    [
        0, 255, 243, 44, 75, 0, 255, 154, 0, 0, 0, 0, 232, 0, 0, 0,
        0, 255, 0, 0, 0, 108, 0, 169, 0, 0, 80, 1, 27, 0, 255, 255,
        0, 0, 130, 1, 255, 83, 255, 0, 198, 0, 74, 7, 1, 43, 0, 120,
        0, 0, 130, 108, 0, 115, 113, 1, 0, 186, 0, 0, 0, 0, 1, 92,
    ],
    [
        41, 0, 91, 34, 0, 0, 1, 200, 0, 0, 70, 196, 0, 118, 0, 1,
        134, 0, 0, 1, 0, 184, 122, 0, 0, 1, 255, 0, 89, 0, 255, 0,
        0, 0, 0, 93, 0, 255, 0, 255, 1, 0, 0, 21, 0, 0, 0, 255,
        62, 0, 0, 0, 111, 120, 0, 155, 0, 0, 0, 0, 0, 0, 0, 0,
    ],
    [
        105, 0, 0, 0, 0, 72, 94, 0, 0, 0, 174, 80, 0, 0, 1, 0,
        20, 0, 0, 82, 0, 0, 0, 0, 0, 131, 0, 0, 0, 0, 0, 0,
        0, 120, 163, 183, 156, 175, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0,
        144, 0, 0, 0, 0, 255, 0, 0, 0, 22, 114, 0, 0, 0, 0, 0,
    ],
    [
        0, 63, 209, 0, 0, 0, 0, 1, 0, 55, 255, 255, 0, 0, 0, 0,
        212, 185, 189, 76, 127, 0, 221, 0, 0, 0, 0, 0, 1, 217, 0, 0,
        0, 0, 0, 0, 0, 124, 104, 103, 63, 62, 0, 109, 42, 29, 0, 1,
        0, 1, 0, 0, 0, 1, 76, 0, 255, 55, 0, 0, 1, 0, 255, 90,
    ],
];

pub fn programs() -> Vec<Program> {
    (0..4)
        .map(|p| {
            let instructions = Program::parse_listing(PROGRAMS[p]).expect("fixture listing parses");
            let [x, y] = INPUT_REGS[p].map(|r| Reg::new(r).unwrap());
            Program::new(instructions, [x, y], Reg::new(OUTPUT_REGS[p]).unwrap())
        })
        .collect()
}

/// Input pairs of program `p` (0-based) in table order.
pub fn cases(p: usize) -> Vec<(u8, u8)> {
    TABLE_X[p].iter().copied().zip(TABLE_Y[p].iter().copied()).collect()
}

/// The quotient row printed under each program's inputs.
pub fn quotients(p: usize) -> &'static [u8; 64] {
    &TABLE_QUOTIENT[p]
}

pub fn suite(table: &DivisionTable) -> TestSuite {
    TestSuite::new(programs(), (0..4).map(cases).collect(), None, table)
}
