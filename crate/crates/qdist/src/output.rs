//! Result files: comma-separated tables and the run record.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Rounding to 12 digits can carry into the next decade, so take the
    // exponent from the rounded scientific form.
    let sci = format!("{:.11e}", x);
    let (mantissa, e) = sci.split_once('e').expect("exponent present");
    let e: i32 = e.parse().expect("integer exponent");
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A table of string cells with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }
}

/// Key/value summary table.
pub fn summary_table(pairs: &[(&str, String)]) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in pairs {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_table(dir: &Path, name: &str, table: &Table) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, &table.to_csv()?)?;
    Ok(path)
}

/// FNV-1a over the canonical config echo, as 16 hex digits.
pub fn run_id(cfg: &ExperimentConfig) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in cfg.echo().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Run record: identification and timestamps as comment lines, followed by
/// the config echo, so the whole file loads as a configuration.
pub fn record_text(cfg: &ExperimentConfig, files: &[PathBuf], started: u64, finished: u64) -> String {
    let mut s = String::new();
    s.push_str(&format!("# run_id = {}\n", run_id(cfg)));
    s.push_str(&format!("# started_unix = {started}\n# finished_unix = {finished}\n"));
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("?");
        s.push_str(&format!("# metrics = {name}\n"));
    }
    s.push('\n');
    s.push_str(&cfg.echo());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(0.25), "0.25");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(fmt_float(123456.0), "123456");
        assert_eq!(fmt_float(1e-7), "1e-07");
        assert_eq!(fmt_float(1.23456789012345e20), "1.23456789012e+20");
        assert_eq!(fmt_float(0.99999999999999), "1");
        assert_eq!(fmt_float(12.5), "12.5");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), fmt_float(0.5)]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1,0.5\n");
    }

    #[test]
    fn record_reparses_as_the_config() {
        let cfg = ExperimentConfig {
            seed: 99,
            ..ExperimentConfig::default()
        };
        let text = record_text(&cfg, &[PathBuf::from("/x/metrics.csv")], 1, 2);
        assert_eq!(ExperimentConfig::parse(&text, None).unwrap(), cfg);
        assert!(text.starts_with(&format!("# run_id = {}", run_id(&cfg))));
    }
}
