//! Logging to standard error, gated by the `MINISTRA_LOG` environment
//! variable: `quiet` suppresses everything, `info` (default) shows warnings
//! and progress, `debug` adds per-stage detail.

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::atomic::AtomicU64;

pub const QUIET: u8 = 0;
pub const INFO: u8 = 1;
pub const DEBUG: u8 = 2;

static LEVEL: AtomicU8 = AtomicU8::new(u8::MAX);
static WARN_COUNT: AtomicU64 = AtomicU64::new(0);

fn init_from_env() -> u8 {
    let lvl = match std::env::var("MINISTRA_LOG").as_deref() {
        Ok("quiet") => QUIET,
        Ok("debug") => DEBUG,
        _ => INFO,
    };
    LEVEL.store(lvl, Ordering::Relaxed);
    lvl
}

pub fn level() -> u8 {
    let l = LEVEL.load(Ordering::Relaxed);
    if l == u8::MAX {
        init_from_env()
    } else {
        l
    }
}

/// Override the level programmatically (used by embedders and tests).
pub fn set_level(l: u8) {
    LEVEL.store(l, Ordering::Relaxed);
}

pub fn bump_warn() {
    WARN_COUNT.fetch_add(1, Ordering::Relaxed);
}

pub fn warn_count() -> u64 {
    WARN_COUNT.load(Ordering::Relaxed)
}

#[macro_export]
macro_rules! log_info {
    ($($arg:tt)*) => {
        if $crate::log::level() >= $crate::log::INFO {
            eprintln!("[ministra] {}", format!($($arg)*));
        }
    };
}

#[macro_export]
macro_rules! log_debug {
    ($($arg:tt)*) => {
        if $crate::log::level() >= $crate::log::DEBUG {
            eprintln!("[ministra:debug] {}", format!($($arg)*));
        }
    };
}

#[macro_export]
macro_rules! log_warn {
    ($($arg:tt)*) => {{
        $crate::log::bump_warn();
        if $crate::log::level() >= $crate::log::INFO {
            eprintln!("[ministra:warn] {}", format!($($arg)*));
        }
    }};
}
