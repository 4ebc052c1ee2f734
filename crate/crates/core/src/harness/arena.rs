//! Sandbox memory: `[guard][registers][guard][division table][guard][program][guard]`,
//! every block page-aligned. The register page is writable, the table and
//! program pages read-only, guard pages inaccessible.

use std::io;
use std::ops::Range;
use std::ptr::NonNull;

use thiserror::Error;

use crate::batch::MATRIX_BYTES;
use crate::lgp::{DivisionTable, PADDING, TABLE_BYTES, TABLE_ENTRIES};
use crate::toy::hir::Array;
use crate::toy::{ArrayMemory, Trap};

pub const PAGE_SIZE: usize = 4096;
pub const LUT_PAGES: usize = TABLE_BYTES / PAGE_SIZE;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("page size is {0} bytes, the sandbox layout needs {PAGE_SIZE}")]
    PageSize(usize),
    #[error("mmap failed: {0}")]
    Map(io::Error),
    #[error("mprotect failed: {0}")]
    Protect(io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Registers,
    Table,
    Program,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    None,
    Read,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub registers: usize,
    pub table: usize,
    pub program: usize,
    pub program_pages: usize,
    pub total: usize,
}

impl Layout {
    /// Layout with enough program pages for `program_bytes` (at least one).
    pub fn new(program_bytes: usize) -> Layout {
        let program_pages = program_bytes.div_ceil(PAGE_SIZE).max(1);
        let registers = PAGE_SIZE;
        let table = registers + 2 * PAGE_SIZE;
        let program = table + TABLE_BYTES + PAGE_SIZE;
        let total = program + (program_pages + 1) * PAGE_SIZE;
        Layout { registers, table, program, program_pages, total }
    }

    pub fn block(&self, b: Block) -> Range<usize> {
        match b {
            Block::Registers => self.registers..self.registers + PAGE_SIZE,
            Block::Table => self.table..self.table + TABLE_BYTES,
            Block::Program => self.program..self.program + self.program_pages * PAGE_SIZE,
        }
    }

    pub fn access(&self, offset: usize) -> Access {
        if self.block(Block::Registers).contains(&offset) {
            Access::ReadWrite
        } else if self.block(Block::Table).contains(&offset) || self.block(Block::Program).contains(&offset) {
            Access::Read
        } else {
            Access::None
        }
    }

    /// The first byte before and the first byte after each block; all six
    /// lie in guard pages.
    pub fn boundaries(&self) -> [(Block, i64); 6] {
        let mut out = [(Block::Registers, 0i64); 6];
        for (i, b) in [Block::Registers, Block::Table, Block::Program].into_iter().enumerate() {
            let r = self.block(b);
            out[2 * i] = (b, r.start as i64 - 1);
            out[2 * i + 1] = (b, r.end as i64);
        }
        out
    }

    fn array_offset(&self, array: Array, index: i64) -> i64 {
        match array {
            Array::Regs => self.registers as i64 + index,
            Array::Prog => self.program as i64 + index,
            Array::Lut => (self.table as i64).wrapping_add(index.wrapping_mul(4)),
        }
    }
}

/// Sandbox memory as seen by the harness and by candidates. Offsets are
/// relative to the start of the arena; accesses outside it fault.
pub trait Memory {
    fn layout(&self) -> &Layout;
    fn read_byte(&mut self, offset: i64) -> Result<u8, Trap>;
    fn write_byte(&mut self, offset: i64, value: u8) -> Result<(), Trap>;
    fn read_word(&mut self, offset: i64) -> Result<u32, Trap>;

    /// The whole register page, for the harness to reset and inspect.
    fn registers(&mut self) -> &mut [u8];
    /// Replaces the program block contents (padding the remainder).
    fn load_program(&mut self, bytes: &[u8]) -> Result<(), ArenaError>;
    /// Register matrix and division table for the native candidate.
    fn native_views(&mut self) -> (&mut [u8; MATRIX_BYTES], &[u32]);
}

/// Adapts any [`Memory`] to the toy VM's array interface.
pub struct Arrays<'a, M: Memory>(pub &'a mut M);

impl<M: Memory> ArrayMemory for Arrays<'_, M> {
    fn load(&mut self, array: Array, index: i64) -> Result<i64, Trap> {
        let off = self.0.layout().array_offset(array, index);
        match array {
            Array::Lut => self.0.read_word(off).map(|v| v as i64),
            _ => self.0.read_byte(off).map(|v| v as i64),
        }
    }

    fn store(&mut self, array: Array, index: i64, value: i64) -> Result<(), Trap> {
        let off = self.0.layout().array_offset(array, index);
        self.0.write_byte(off, value as u8)
    }
}

fn fill_initial(bytes: &mut [u8], layout: &Layout, table: &DivisionTable) {
    bytes[layout.block(Block::Registers)].fill(PADDING);
    bytes[layout.block(Block::Program)].fill(PADDING);
    for (chunk, e) in bytes[layout.block(Block::Table)].chunks_exact_mut(4).zip(table.as_slice()) {
        chunk.copy_from_slice(&e.to_ne_bytes());
    }
}

/// Real memory protected with `mprotect`. Touching a guard page, or
/// writing a read-only page, raises SIGSEGV in this process, so this arena
/// belongs in a sandbox child.
pub struct GuardedArena {
    base: NonNull<u8>,
    layout: Layout,
}

// The mapping is owned exclusively by this value.
unsafe impl Send for GuardedArena {}

impl GuardedArena {
    pub fn new(table: &DivisionTable, program_bytes: usize) -> Result<GuardedArena, ArenaError> {
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) } as usize;
        if page != PAGE_SIZE {
            return Err(ArenaError::PageSize(page));
        }
        let layout = Layout::new(program_bytes);
        let ptr = unsafe {
            libc::mmap(
                std::ptr::null_mut(),
                layout.total,
                libc::PROT_READ | libc::PROT_WRITE,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS,
                -1,
                0,
            )
        };
        if ptr == libc::MAP_FAILED {
            return Err(ArenaError::Map(io::Error::last_os_error()));
        }
        let arena = GuardedArena { base: NonNull::new(ptr as *mut u8).unwrap(), layout };
        let bytes = unsafe { std::slice::from_raw_parts_mut(arena.base.as_ptr(), layout.total) };
        fill_initial(bytes, &layout, table);
        arena.protect(0..layout.registers, libc::PROT_NONE)?;
        arena.protect(layout.registers + PAGE_SIZE..layout.table, libc::PROT_NONE)?;
        arena.protect(layout.block(Block::Table), libc::PROT_READ)?;
        arena.protect(layout.table + TABLE_BYTES..layout.program, libc::PROT_NONE)?;
        arena.protect(layout.block(Block::Program), libc::PROT_READ)?;
        arena.protect(layout.block(Block::Program).end..layout.total, libc::PROT_NONE)?;
        Ok(arena)
    }

    fn protect(&self, range: Range<usize>, prot: libc::c_int) -> Result<(), ArenaError> {
        let rc = unsafe { libc::mprotect(self.base.as_ptr().add(range.start) as *mut libc::c_void, range.len(), prot) };
        if rc != 0 {
            return Err(ArenaError::Protect(io::Error::last_os_error()));
        }
        Ok(())
    }

    fn ptr(&self, offset: i64, len: usize) -> Result<*mut u8, Trap> {
        // only addresses inside the mapping are dereferenced; beyond it lies
        // unrelated process memory, so fault deliberately
        if offset < 0 || offset as usize + len > self.layout.total {
            return Err(Trap::Segv);
        }
        Ok(unsafe { self.base.as_ptr().add(offset as usize) })
    }
}

impl Memory for GuardedArena {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn read_byte(&mut self, offset: i64) -> Result<u8, Trap> {
        let p = self.ptr(offset, 1)?;
        Ok(unsafe { p.read_volatile() })
    }

    fn write_byte(&mut self, offset: i64, value: u8) -> Result<(), Trap> {
        let p = self.ptr(offset, 1)?;
        unsafe { p.write_volatile(value) };
        Ok(())
    }

    fn read_word(&mut self, offset: i64) -> Result<u32, Trap> {
        let p = self.ptr(offset, 4)?;
        Ok(u32::from_ne_bytes(unsafe { (p as *const [u8; 4]).read_volatile() }))
    }

    fn registers(&mut self) -> &mut [u8] {
        unsafe { std::slice::from_raw_parts_mut(self.base.as_ptr().add(self.layout.registers), PAGE_SIZE) }
    }

    fn load_program(&mut self, bytes: &[u8]) -> Result<(), ArenaError> {
        let block = self.layout.block(Block::Program);
        assert!(bytes.len() <= block.len(), "program larger than its block");
        self.protect(block.clone(), libc::PROT_READ | libc::PROT_WRITE)?;
        let dst = unsafe { std::slice::from_raw_parts_mut(self.base.as_ptr().add(block.start), block.len()) };
        dst.fill(PADDING);
        dst[..bytes.len()].copy_from_slice(bytes);
        self.protect(block, libc::PROT_READ)
    }

    fn native_views(&mut self) -> (&mut [u8; MATRIX_BYTES], &[u32]) {
        // the two views cover disjoint, page-aligned blocks
        unsafe {
            let regs = &mut *(self.base.as_ptr().add(self.layout.registers) as *mut [u8; MATRIX_BYTES]);
            let lut = std::slice::from_raw_parts(self.base.as_ptr().add(self.layout.table) as *const u32, TABLE_ENTRIES);
            (regs, lut)
        }
    }
}

impl Drop for GuardedArena {
    fn drop(&mut self) {
        unsafe {
            libc::munmap(self.base.as_ptr() as *mut libc::c_void, self.layout.total);
        }
    }
}

/// Same layout in ordinary heap memory; protections are checked in
/// software and violations come back as [`Trap::Segv`] instead of signals.
pub struct EmulatedArena {
    words: Box<[u32]>,
    layout: Layout,
}

impl EmulatedArena {
    pub fn new(table: &DivisionTable, program_bytes: usize) -> EmulatedArena {
        let layout = Layout::new(program_bytes);
        let mut arena = EmulatedArena { words: vec![0u32; layout.total / 4].into_boxed_slice(), layout };
        let bytes = arena.bytes_mut();
        fill_initial(bytes, &layout, table);
        arena
    }

    fn bytes_mut(&mut self) -> &mut [u8] {
        let len = self.words.len() * 4;
        unsafe { std::slice::from_raw_parts_mut(self.words.as_mut_ptr() as *mut u8, len) }
    }

    fn check(&self, offset: i64, len: usize, write: bool) -> Result<usize, Trap> {
        if offset < 0 || offset as usize + len > self.layout.total {
            return Err(Trap::Segv);
        }
        let off = offset as usize;
        for o in [off, off + len - 1] {
            match (self.layout.access(o), write) {
                (Access::ReadWrite, _) | (Access::Read, false) => {}
                _ => return Err(Trap::Segv),
            }
        }
        Ok(off)
    }
}

impl Memory for EmulatedArena {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn read_byte(&mut self, offset: i64) -> Result<u8, Trap> {
        let off = self.check(offset, 1, false)?;
        Ok(self.bytes_mut()[off])
    }

    fn write_byte(&mut self, offset: i64, value: u8) -> Result<(), Trap> {
        let off = self.check(offset, 1, true)?;
        self.bytes_mut()[off] = value;
        Ok(())
    }

    fn read_word(&mut self, offset: i64) -> Result<u32, Trap> {
        let off = self.check(offset, 4, false)?;
        Ok(u32::from_ne_bytes(self.bytes_mut()[off..off + 4].try_into().unwrap()))
    }

    fn registers(&mut self) -> &mut [u8] {
        let r = self.layout.block(Block::Registers);
        &mut self.bytes_mut()[r]
    }

    fn load_program(&mut self, bytes: &[u8]) -> Result<(), ArenaError> {
        let block = self.layout.block(Block::Program);
        assert!(bytes.len() <= block.len(), "program larger than its block");
        let dst = &mut self.bytes_mut()[block];
        dst.fill(PADDING);
        dst[..bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    fn native_views(&mut self) -> (&mut [u8; MATRIX_BYTES], &[u32]) {
        let (r, t) = (self.layout.registers / 4, self.layout.table / 4);
        let (head, tail) = self.words.split_at_mut(t);
        let regs_words = &mut head[r..r + MATRIX_BYTES / 4];
        let regs = unsafe { &mut *(regs_words.as_mut_ptr() as *mut [u8; MATRIX_BYTES]) };
        (regs, &tail[..TABLE_ENTRIES])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_page_aligned() {
        let l = Layout::new(16);
        for b in [Block::Registers, Block::Table, Block::Program] {
            assert_eq!(l.block(b).start % PAGE_SIZE, 0);
            assert_eq!(l.block(b).len() % PAGE_SIZE, 0);
        }
        assert_eq!(l.block(Block::Table).len(), 64 * PAGE_SIZE);
        assert_eq!(Layout::new(PAGE_SIZE + 1).program_pages, 2);
        for (_, off) in l.boundaries() {
            assert_eq!(l.access(off as usize), Access::None);
        }
    }

    fn check_fresh<M: Memory>(m: &mut M) {
        let regs = m.registers();
        assert!(regs.iter().all(|&b| b == PADDING));
        let t = DivisionTable::shared();
        let (_, lut) = m.native_views();
        assert_eq!(lut, t.as_slice());
        let l = *m.layout();
        let idx = DivisionTable::index(221, 5) as i64;
        assert_eq!(m.read_word(l.table as i64 + 4 * idx).unwrap(), 44);
    }

    #[test]
    fn fresh_arenas_hold_padding_and_table() {
        let t = DivisionTable::shared();
        check_fresh(&mut EmulatedArena::new(t, 16));
        check_fresh(&mut GuardedArena::new(t, 16).unwrap());
    }

    #[test]
    fn emulated_protection() {
        let mut m = EmulatedArena::new(DivisionTable::shared(), 16);
        let l = *m.layout();
        for (_, off) in l.boundaries() {
            assert_eq!(m.read_byte(off), Err(Trap::Segv));
            assert_eq!(m.write_byte(off, 1), Err(Trap::Segv));
        }
        assert_eq!(m.write_byte(l.table as i64, 1), Err(Trap::Segv));
        assert_eq!(m.write_byte(l.program as i64, 1), Err(Trap::Segv));
        assert!(m.read_byte(l.program as i64).is_ok());
        assert!(m.write_byte(l.registers as i64 + 4095, 1).is_ok());
        assert_eq!(m.read_byte(-1), Err(Trap::Segv));
        assert_eq!(m.read_byte(l.total as i64), Err(Trap::Segv));
    }

    #[test]
    fn program_reload_pads() {
        for m in [&mut EmulatedArena::new(DivisionTable::shared(), 8) as &mut dyn Memory] {
            m.load_program(&[1, 2, 3]).unwrap();
            let p = m.layout().program as i64;
            assert_eq!(m.read_byte(p + 2).unwrap(), 3);
            assert_eq!(m.read_byte(p + 3).unwrap(), PADDING);
        }
        let mut g = GuardedArena::new(DivisionTable::shared(), 8).unwrap();
        g.load_program(&[9; 8]).unwrap();
        let p = g.layout().program as i64;
        assert_eq!(g.read_byte(p + 7).unwrap(), 9);
        assert_eq!(g.read_byte(p + 8).unwrap(), PADDING);
    }
}
