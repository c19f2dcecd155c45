use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampling::CircularSample;

/// How records map to the circle `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    /// Values already in `[0, 1)`.
    Unit,
    /// Time of day `H:MM` or `HH:MM`, mapped to `(60H + M)/1440`.
    Hhmm,
    /// Angles in `[0, 360)`, mapped to `d/360`.
    Degrees,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(RecordFormat::Unit),
            "hhmm" => Ok(RecordFormat::Hhmm),
            "degrees" => Ok(RecordFormat::Degrees),
            _ => Err(Error::InvalidParameter(format!("unknown record format '{s}'"))),
        }
    }
}

/// Largest tolerated fraction of unparseable records.
pub const MAX_FAILURE_RATE: f64 = 0.01;

pub fn parse_record(field: &str, format: RecordFormat) -> std::result::Result<f64, String> {
    let t = field.trim().trim_matches('"').trim();
    match format {
        RecordFormat::Unit => {
            let v: f64 = t.parse().map_err(|_| format!("'{t}' is not a number"))?;
            if (0.0..1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("{v} is outside [0, 1)"))
            }
        }
        RecordFormat::Degrees => {
            let v: f64 = t.parse().map_err(|_| format!("'{t}' is not a number"))?;
            if (0.0..360.0).contains(&v) {
                Ok(v / 360.0)
            } else {
                Err(format!("{v} is outside [0, 360)"))
            }
        }
        RecordFormat::Hhmm => {
            let (h, m) = t.split_once(':').ok_or_else(|| format!("'{t}' is not HH:MM"))?;
            if h.is_empty() || h.len() > 2 || m.len() != 2 {
                return Err(format!("'{t}' is not HH:MM"));
            }
            let h: u32 = h.parse().map_err(|_| format!("bad hour in '{t}'"))?;
            let m: u32 = m.parse().map_err(|_| format!("bad minute in '{t}'"))?;
            if h > 23 || m > 59 {
                return Err(format!("'{t}' is not a valid time of day"));
            }
            Ok((60 * h + m) as f64 / 1440.0)
        }
    }
}

/// A parsed data set and the records that were dropped.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: CircularSample,
    /// `(line number, message)` for each dropped record.
    pub rejected: Vec<(usize, String)>,
}

/// Parses one record per line, using the first comma-separated field.
/// Blank lines and lines starting with `#` are skipped, as is a leading
/// non-numeric header line. Aborts when more than 1% of records fail.
pub fn ingest_reader<R: BufRead>(r: R, format: RecordFormat, source: &str) -> Result<Ingested> {
    let mut values = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_data = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let field = t.split(',').next().unwrap_or_default();
        match parse_record(field, format) {
            Ok(v) => values.push(v),
            Err(_) if !seen_data && field.chars().any(|c| c.is_ascii_alphabetic()) => {}
            Err(e) => rejected.push((i + 1, e)),
        }
        seen_data = true;
    }
    let total = values.len() + rejected.len();
    if total == 0 {
        return Err(Error::Ingest { failed: 0, total: 0, details: "no records".into() });
    }
    if rejected.len() as f64 > MAX_FAILURE_RATE * total as f64 || values.is_empty() {
        let details = rejected
            .iter()
            .take(5)
            .map(|(l, e)| format!("line {l}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Ingest { failed: rejected.len(), total, details });
    }
    Ok(Ingested {
        sample: CircularSample::from_values(values, source)?,
        rejected,
    })
}

pub fn ingest_circular_data(path: &Path, format: RecordFormat) -> Result<Ingested> {
    let f = File::open(path)?;
    ingest_reader(BufReader::new(f), format, &format!("external-data:{}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_examples() {
        assert_eq!(parse_record("12:00", RecordFormat::Hhmm).unwrap(), 0.5);
        assert_eq!(parse_record("23:59", RecordFormat::Hhmm).unwrap(), 1439.0 / 1440.0);
        assert_eq!(parse_record("7:30", RecordFormat::Hhmm).unwrap(), 450.0 / 1440.0);
        assert_eq!(parse_record("90", RecordFormat::Degrees).unwrap(), 0.25);
        assert!(parse_record("24:00", RecordFormat::Hhmm).is_err());
        assert!(parse_record("12:5", RecordFormat::Hhmm).is_err());
        assert!(parse_record("360", RecordFormat::Degrees).is_err());
        assert!(parse_record("1.0", RecordFormat::Unit).is_err());
        assert_eq!(parse_record(" \"0.25\" ", RecordFormat::Unit).unwrap(), 0.25);
    }

    #[test]
    fn header_comments_and_fields() {
        let text = "# births\ntime,count\n00:00,3\n\n06:00,1\n";
        let out = ingest_reader(text.as_bytes(), RecordFormat::Hhmm, "t").unwrap();
        assert_eq!(out.sample.values(), &[0.0, 0.25]);
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn failure_budget() {
        let mut text: String = (0..199).map(|i| format!("{}\n", i as f64 / 200.0)).collect();
        text.push_str("oops\n");
        let out = ingest_reader(text.as_bytes(), RecordFormat::Unit, "t").unwrap();
        assert_eq!(out.rejected, vec![(200, "'oops' is not a number".to_string())]);
        text.push_str("1.5\n2.5\n");
        match ingest_reader(text.as_bytes(), RecordFormat::Unit, "t") {
            Err(Error::Ingest { failed: 3, total: 202, details }) => assert!(details.contains("line 200")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
