use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

/// Warnings go to stderr; everything at info and above is appended to the
/// run log.
struct RunLog {
    file: Option<Mutex<File>>,
    verbose: bool,
}

impl Log for RunLog {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Info
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = format!("[{}] {}", record.level(), record.args());
        if record.level() <= Level::Warn || self.verbose {
            eprintln!("{line}");
        }
        if let Some(f) = &self.file {
            if let Ok(mut f) = f.lock() {
                let _ = writeln!(f, "{line}");
            }
        }
    }

    fn flush(&self) {
        if let Some(f) = &self.file {
            if let Ok(mut f) = f.lock() {
                let _ = f.flush();
            }
        }
    }
}

pub fn init(path: Option<&Path>, verbose: bool) -> std::io::Result<()> {
    let file = match path {
        Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    // a second init in the same process (tests) keeps the first logger
    if log::set_boxed_logger(Box::new(RunLog { file, verbose })).is_ok() {
        log::set_max_level(LevelFilter::Info);
    }
    Ok(())
}
