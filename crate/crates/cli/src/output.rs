use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use conformal::betting::MartingaleState;
use serde::Serialize;

/// Raw capital; `"inf"` once it no longer fits in an `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Capital {
    Value(f64),
    Marker(&'static str),
}

impl Capital {
    pub fn of(state: &MartingaleState) -> Self {
        let s = state.capital();
        if s.is_finite() {
            Capital::Value(s)
        } else {
            Capital::Marker("inf")
        }
    }
}

/// `log10 S`, or `None` when the capital is zero.
pub fn log10_capital(state: &MartingaleState) -> Option<f64> {
    let l = state.log10_capital();
    l.is_finite().then_some(l)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub n: usize,
    pub p: f64,
    #[serde(rename = "S")]
    pub s: Capital,
    #[serde(rename = "log10_S")]
    pub log10_s: Option<f64>,
    #[serde(rename = "R_or_W")]
    pub r_or_w: Option<f64>,
    pub alarm: bool,
}

pub fn writer(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

pub fn write_jsonl(path: &Path, records: &[RunRecord]) -> io::Result<()> {
    let mut w = writer(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "n,log10_S")?;
    for r in records {
        match r.log10_s {
            Some(l) => writeln!(w, "{},{l}", r.n)?,
            None => writeln!(w, "{},-inf", r.n)?,
        }
    }
    w.flush()
}

/// Pretty-prints to standard output; a closed pipe is not an error.
pub fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("serializable summary");
    let _ = writeln!(io::stdout().lock(), "{text}");
}
