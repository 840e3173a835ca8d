//! CSV run reports: a `#` metadata block followed by fixed columns
//! `strategy,replicate,n,log_value,rel_var,flag,seed`.

use std::io::{BufRead, Write};

use crate::error::CliError;

pub const COLUMNS: [&str; 7] = [
    "strategy",
    "replicate",
    "n",
    "log_value",
    "rel_var",
    "flag",
    "seed",
];
pub const FORMAT_VERSION: &str = "1";

/// Header keys whose values change between otherwise identical runs.
pub const TIMING_KEYS: [&str; 3] = ["timing_total_s", "timing_t_pairs_s", "timing_t_pf_s"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub strategy: String,
    pub replicate: usize,
    pub n: usize,
    pub log_value: f64,
    pub rel_var: Option<f64>,
    pub flag: String,
    /// Stream id the row's randomness came from.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    /// Ordered `(key, value)` metadata; values are single-line.
    pub header: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl RunReport {
    pub fn push_header(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!value.contains('\n'));
        self.header.push((key.to_string(), value));
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Orders rows by `(strategy, replicate, n)`.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.strategy.as_str(), a.replicate, a.n).cmp(&(b.strategy.as_str(), b.replicate, b.n))
        });
    }

    pub fn rows_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.strategy == strategy)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        for (k, v) in &self.header {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.strategy.clone(),
                r.replicate.to_string(),
                r.n.to_string(),
                format_f64(r.log_value),
                r.rel_var.map(format_f64).unwrap_or_default(),
                r.flag.clone(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("report is UTF-8")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, CliError> {
        let mut header = Vec::new();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(meta) if body.is_empty() => {
                    let (k, v) = meta
                        .split_once(": ")
                        .ok_or_else(|| CliError::Report(format!("bad header line {line:?}")))?;
                    header.push((k.to_string(), v.to_string()));
                }
                _ => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let columns = reader.headers().map_err(csv_err)?.clone();
        if columns.iter().ne(COLUMNS) {
            return Err(CliError::Report(format!("unexpected columns {columns:?}")));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let rec = record.map_err(csv_err)?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            rows.push(Row {
                strategy: field(0).to_string(),
                replicate: parse(field(1), "replicate")?,
                n: parse(field(2), "n")?,
                log_value: parse(field(3), "log_value")?,
                rel_var: match field(4) {
                    "" => None,
                    s => Some(parse(s, "rel_var")?),
                },
                flag: field(5).to_string(),
                seed: parse(field(6), "seed")?,
            });
        }
        Ok(Self { header, rows })
    }

    /// The CSV text with timing header lines removed, for byte comparisons
    /// between runs.
    pub fn without_timings(&self) -> Self {
        Self {
            header: self
                .header
                .iter()
                .filter(|(k, _)| !TIMING_KEYS.contains(&k.as_str()))
                .cloned()
                .collect(),
            rows: self.rows.clone(),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.parse()
        .map_err(|_| CliError::Report(format!("cannot parse {what} from {s:?}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Report(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::default();
        r.push_header("format_version", FORMAT_VERSION);
        r.push_header("config", "n_steps = 3");
        r.push_header("timing_total_s", 0.25);
        for (strategy, rel) in [("pairs", Some(-1.5e-3)), ("mc", None)] {
            for n in 0..3 {
                r.rows.push(Row {
                    strategy: strategy.into(),
                    replicate: 1,
                    n,
                    log_value: -(n as f64) * std::f64::consts::PI,
                    rel_var: rel,
                    flag: if rel.is_some_and(|v| v < 0.0) {
                        "negative".into()
                    } else {
                        String::new()
                    },
                    seed: (1 << 62) | 1,
                });
            }
        }
        r
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let text = r.to_csv_string();
        assert!(text.starts_with("# format_version: 1\n"));
        assert!(text.contains("strategy,replicate,n,log_value,rel_var,flag,seed\n"));
        let back = RunReport::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        for v in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            123456.789e200,
            f64::MIN_POSITIVE,
            -0.0,
            f64::NEG_INFINITY,
        ] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn sorting_and_timing_filter() {
        let mut r = sample();
        r.sort_rows();
        assert_eq!(r.rows[0].strategy, "mc");
        assert!(r.without_timings().header_value("timing_total_s").is_none());
        assert_eq!(r.header_value("config"), Some("n_steps = 3"));
    }

    #[test]
    fn rejects_unknown_columns() {
        assert!(RunReport::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
