/// Number of entries in the division table (every byte pair).
pub const TABLE_ENTRIES: usize = 256 * 256;

/// Storage footprint of the table: 32-bit entries, 64 pages of 4 KiB.
pub const TABLE_BYTES: usize = TABLE_ENTRIES * 4;

/// Division that is total on bytes: anything divided by zero is zero.
pub fn protected_div(x: u8, y: u8) -> u8 {
    if y == 0 {
        0
    } else {
        x / y
    }
}

/// All 65536 protected quotients, stored as 32-bit words so vector gathers
/// can fetch them directly. Entry `x * 256 + y` holds `protected_div(x, y)`.
#[derive(Clone)]
pub struct DivisionTable {
    entries: Box<[u32]>,
}

impl DivisionTable {
    pub fn build() -> DivisionTable {
        let mut entries = vec![0u32; TABLE_ENTRIES].into_boxed_slice();
        for x in 0..=255u8 {
            for y in 0..=255u8 {
                entries[Self::index(x, y)] = protected_div(x, y) as u32;
            }
        }
        DivisionTable { entries }
    }

    /// Process-wide table, built on first use.
    pub fn shared() -> &'static DivisionTable {
        static TABLE: std::sync::OnceLock<DivisionTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(DivisionTable::build)
    }

    #[inline]
    pub fn index(x: u8, y: u8) -> usize {
        (x as usize) << 8 | y as usize
    }

    #[inline]
    pub fn get(&self, x: u8, y: u8) -> u32 {
        self.entries[Self::index(x, y)]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.entries
    }

    pub fn byte_len(&self) -> usize {
        std::mem::size_of_val(&*self.entries)
    }
}

impl std::fmt::Debug for DivisionTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DivisionTable").field("entries", &self.entries.len()).finish()
    }
}

impl Default for DivisionTable {
    fn default() -> Self {
        Self::build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotients_from_table_one() {
        assert_eq!(protected_div(221, 5), 44);
        assert_eq!(protected_div(170, 0), 0);
        assert_eq!(protected_div(255, 1), 255);
        assert_eq!(protected_div(217, 8), 27);
    }

    #[test]
    fn table_matches_division_everywhere() {
        let t = DivisionTable::build();
        for x in 0..=255u8 {
            assert_eq!(t.get(x, 0), 0);
            for y in 0..=255u8 {
                let e = t.get(x, y);
                assert_eq!(e, protected_div(x, y) as u32);
                assert_eq!(e >> 8, 0);
            }
        }
        assert_eq!(t.get(243, 1), 243);
        assert_eq!(t.get(248, 236), 1);
        assert_eq!(t.byte_len(), 262_144);
        assert_eq!(t.byte_len(), 64 * 4096);
    }
}
