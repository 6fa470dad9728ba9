//! Minimal stderr logger gated by the `PTF_LOG` environment variable
//! (`error` | `info` | `debug`; default `error`).

use std::sync::OnceLock;

#[derive(PartialEq, PartialOrd, Clone, Copy)]
pub enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn init() {
    let level = match std::env::var("PTF_LOG").as_deref() {
        Ok("debug") => Level::Debug,
        Ok("info") => Level::Info,
        _ => Level::Error,
    };
    let _ = LEVEL.set(level);
}

fn enabled(level: Level) -> bool {
    LEVEL.get().copied().unwrap_or(Level::Error) >= level
}

pub fn info(msg: &str) {
    if enabled(Level::Info) {
        eprintln!("[info] {msg}");
    }
}

#[allow(dead_code)]
pub fn debug(msg: &str) {
    if enabled(Level::Debug) {
        eprintln!("[debug] {msg}");
    }
}
