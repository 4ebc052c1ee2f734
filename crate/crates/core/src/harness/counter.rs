//! Instruction counting: the kernel's retired-instruction counter when it
//! is accessible, otherwise the deterministic cost model.

use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provider {
    #[serde(rename = "hw")]
    Hardware,
    #[serde(rename = "model")]
    Model,
}

impl Provider {
    pub fn name(self) -> &'static str {
        match self {
            Provider::Hardware => "hw",
            Provider::Model => "model",
        }
    }

    pub fn parse(s: &str) -> Option<Provider> {
        match s {
            "hw" => Some(Provider::Hardware),
            "model" => Some(Provider::Model),
            _ => None,
        }
    }
}

impl std::fmt::Display for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Requested provider. `Auto` prefers the hardware counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CounterChoice {
    #[default]
    Auto,
    Require(Provider),
}

impl CounterChoice {
    pub fn parse(s: &str) -> Option<CounterChoice> {
        match s {
            "" | "auto" => Some(CounterChoice::Auto),
            other => Provider::parse(other).map(CounterChoice::Require),
        }
    }

    /// Reads `GI_COUNTER`; unset means `Auto`.
    pub fn from_env() -> Result<CounterChoice, String> {
        match std::env::var(super::COUNTER_ENV) {
            Err(_) => Ok(CounterChoice::Auto),
            Ok(v) => CounterChoice::parse(&v).ok_or_else(|| format!("{}={v:?}: expected hw or model", super::COUNTER_ENV)),
        }
    }

    pub fn env_value(self) -> &'static str {
        match self {
            CounterChoice::Auto => "auto",
            CounterChoice::Require(p) => p.name(),
        }
    }
}

/// `struct perf_event_attr`, first published revision (64 bytes).
#[repr(C)]
#[derive(Default)]
struct PerfEventAttr {
    kind: u32,
    size: u32,
    config: u64,
    sample_period: u64,
    sample_type: u64,
    read_format: u64,
    flags: u64,
    wakeup_events: u32,
    bp_type: u32,
    config1: u64,
}

const PERF_TYPE_HARDWARE: u32 = 0;
const PERF_COUNT_HW_INSTRUCTIONS: u64 = 1;
const FLAG_DISABLED: u64 = 1 << 0;
const FLAG_EXCLUDE_KERNEL: u64 = 1 << 5;
const FLAG_EXCLUDE_HV: u64 = 1 << 6;
const IOC_ENABLE: libc::c_ulong = 0x2400;
const IOC_DISABLE: libc::c_ulong = 0x2401;
const IOC_RESET: libc::c_ulong = 0x2403;

/// User-space retired instructions of the calling thread.
pub struct HwCounter {
    fd: OwnedFd,
}

impl HwCounter {
    pub fn open() -> io::Result<HwCounter> {
        let attr = PerfEventAttr {
            kind: PERF_TYPE_HARDWARE,
            size: std::mem::size_of::<PerfEventAttr>() as u32,
            config: PERF_COUNT_HW_INSTRUCTIONS,
            flags: FLAG_DISABLED | FLAG_EXCLUDE_KERNEL | FLAG_EXCLUDE_HV,
            ..Default::default()
        };
        let fd = unsafe { libc::syscall(libc::SYS_perf_event_open, &attr as *const PerfEventAttr, 0, -1, -1, 0u64) };
        if fd < 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(HwCounter { fd: unsafe { OwnedFd::from_raw_fd(fd as i32) } })
    }

    fn ioctl(&self, req: libc::c_ulong) -> io::Result<()> {
        if unsafe { libc::ioctl(self.fd.as_raw_fd(), req as _, 0) } < 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(())
    }

    pub fn start(&mut self) -> io::Result<()> {
        self.ioctl(IOC_RESET)?;
        self.ioctl(IOC_ENABLE)
    }

    /// Stops counting and returns the count since `start`.
    pub fn stop(&mut self) -> io::Result<u64> {
        self.ioctl(IOC_DISABLE)?;
        let mut buf = [0u8; 8];
        let n = unsafe { libc::read(self.fd.as_raw_fd(), buf.as_mut_ptr() as *mut libc::c_void, 8) };
        if n != 8 {
            return Err(io::Error::last_os_error());
        }
        Ok(u64::from_ne_bytes(buf))
    }
}

pub fn hardware_counter_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        HwCounter::open().and_then(|mut c| {
            c.start()?;
            c.stop()
        })
        .is_ok()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_is_first_revision_size() {
        assert_eq!(std::mem::size_of::<PerfEventAttr>(), 64);
    }

    #[test]
    fn choice_parsing() {
        assert_eq!(CounterChoice::parse("hw"), Some(CounterChoice::Require(Provider::Hardware)));
        assert_eq!(CounterChoice::parse("model"), Some(CounterChoice::Require(Provider::Model)));
        assert_eq!(CounterChoice::parse("auto"), Some(CounterChoice::Auto));
        assert_eq!(CounterChoice::parse("tsc"), None);
    }

    #[test]
    fn hardware_counter_counts_when_present() {
        if !hardware_counter_available() {
            eprintln!("hardware counter unavailable; skipping");
            return;
        }
        let mut c = HwCounter::open().unwrap();
        c.start().unwrap();
        let mut x = 0u64;
        for i in 0..10_000u64 {
            x = std::hint::black_box(x.wrapping_add(i));
        }
        assert!(c.stop().unwrap() > 10_000);
    }
}
