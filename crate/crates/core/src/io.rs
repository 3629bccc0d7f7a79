//! File formats.
//!
//! CSV files start with `# key=value` metadata lines (always including
//! `schema_version`), then one header row and the data rows. Floats are
//! written with 17 significant digits so they read back bit-exact; infinity
//! is written as `inf`.
//!
//! Binary event files are little-endian:
//!
//! ```text
//! magic    8 bytes  "CPMGEVT\0"
//! schema   u32
//! kernel   u8 (0 = minus-C, 1 = plus-C), 3 bytes padding
//! alpha    f64
//! seed     u64
//! stream   u64
//! count    u64
//! rows     count × 6 × f64   (n⁺x n⁺y n⁺z n⁻x n⁻y n⁻z)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ObservableEstimate;
use crate::montecarlo::{Event, EventSample, KernelSign};
use crate::spinstate::PhaseAngle;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const EVENT_MAGIC: &[u8; 8] = b"CPMGEVT\0";
const EVENT_HEADER_LEN: usize = 8 + 4 + 4 + 8 * 4;
const EVENT_COLUMNS: [&str; 6] = [
    "n_plus_x",
    "n_plus_y",
    "n_plus_z",
    "n_minus_x",
    "n_minus_y",
    "n_minus_z",
];

/// 17 significant digits, `inf`/`-inf`/`nan` for non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}

/// Serde adapter writing non-finite floats as strings in JSON.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::fmt_f64(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => s.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

/// In-memory CSV table with metadata lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            meta: vec![("schema_version".into(), SCHEMA_VERSION.to_string())],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = CsvTable::default();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad metadata line '{line}'")))?;
                table.meta.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
                break;
            }
        }
        if table.columns.is_empty() {
            return Err(Error::Parse("missing header row".into()));
        }
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if row.len() != table.columns.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Binary,
}

impl EventFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Binary,
        }
    }
}

fn kernel_code(k: KernelSign) -> u8 {
    match k {
        KernelSign::MinusC => 0,
        KernelSign::PlusC => 1,
    }
}

pub fn write_events(path: &Path, sample: &EventSample, format: EventFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        EventFormat::Binary => write_events_binary(&mut w, sample),
        EventFormat::Csv => write_events_csv(&mut w, sample),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_events_binary<W: Write>(w: &mut W, s: &EventSample) -> std::io::Result<()> {
    w.write_all(EVENT_MAGIC)?;
    w.write_all(&SCHEMA_VERSION.to_le_bytes())?;
    w.write_all(&[kernel_code(s.kernel), 0, 0, 0])?;
    w.write_all(&s.alpha_true.radians().to_le_bytes())?;
    w.write_all(&s.seed.to_le_bytes())?;
    w.write_all(&s.stream_id.to_le_bytes())?;
    w.write_all(&(s.count() as u64).to_le_bytes())?;
    for e in &s.events {
        for x in e.n_plus.iter().chain(e.n_minus.iter()) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_events_csv<W: Write>(w: &mut W, s: &EventSample) -> std::io::Result<()> {
    writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(w, "# alpha_true={}", fmt_f64(s.alpha_true.radians()))?;
    writeln!(w, "# seed={}", s.seed)?;
    writeln!(w, "# stream_id={}", s.stream_id)?;
    writeln!(w, "# count={}", s.count())?;
    writeln!(w, "# kernel={}", s.kernel.tag())?;
    writeln!(w, "{}", EVENT_COLUMNS.join(","))?;
    for e in &s.events {
        let p = &e.n_plus;
        let m = &e.n_minus;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(p.z),
            fmt_f64(m.x),
            fmt_f64(m.y),
            fmt_f64(m.z)
        )?;
    }
    Ok(())
}

pub fn read_events(path: &Path) -> Result<EventSample> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EVENT_MAGIC) {
        read_events_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse("event file is neither binary nor UTF-8 CSV".into()))?;
        read_events_csv(&text)
    }
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "schema version {found} does not match {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn read_events_binary(b: &[u8]) -> Result<EventSample> {
    if b.len() < EVENT_HEADER_LEN {
        return Err(Error::Parse("truncated event header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    check_schema(u32_at(8))?;
    let kernel = match b[12] {
        0 => KernelSign::MinusC,
        1 => KernelSign::PlusC,
        k => return Err(Error::Parse(format!("unknown kernel code {k}"))),
    };
    let alpha = f64_at(16);
    let seed = u64_at(24);
    let stream_id = u64_at(32);
    let count = u64_at(40) as usize;
    let body = &b[EVENT_HEADER_LEN..];
    if body.len() != count * 48 {
        return Err(Error::Parse(format!(
            "event body has {} bytes, expected {}",
            body.len(),
            count * 48
        )));
    }
    let events = body
        .chunks_exact(48)
        .map(|r| {
            let x: [f64; 6] = std::array::from_fn(|k| f64::from_le_bytes(r[8 * k..8 * k + 8].try_into().unwrap()));
            Event {
                n_plus: Vector3::new(x[0], x[1], x[2]),
                n_minus: Vector3::new(x[3], x[4], x[5]),
            }
        })
        .collect();
    Ok(EventSample {
        events,
        alpha_true: PhaseAngle::new(alpha),
        seed,
        stream_id,
        kernel,
    })
}

fn read_events_csv(text: &str) -> Result<EventSample> {
    let t = CsvTable::parse(text)?;
    let meta = |k: &str| {
        t.meta_value(k)
            .ok_or_else(|| Error::Parse(format!("event file lacks '{k}' metadata")))
    };
    let schema: u32 = meta("schema_version")?
        .parse()
        .map_err(|_| Error::Parse("bad schema_version".into()))?;
    check_schema(schema)?;
    if t.columns != EVENT_COLUMNS {
        return Err(Error::Parse(format!("unexpected event columns {:?}", t.columns)));
    }
    let parse_u64 = |k: &str| -> Result<u64> {
        meta(k)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad '{k}' metadata")))
    };
    let count = parse_u64("count")? as usize;
    if count != t.rows.len() {
        return Err(Error::Parse(format!(
            "count metadata {count} but {} rows",
            t.rows.len()
        )));
    }
    let events = t
        .rows
        .iter()
        .map(|r| {
            let x = r.iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
            Ok(Event {
                n_plus: Vector3::new(x[0], x[1], x[2]),
                n_minus: Vector3::new(x[3], x[4], x[5]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventSample {
        events,
        alpha_true: PhaseAngle::new(parse_f64(meta("alpha_true")?)?),
        seed: parse_u64("seed")?,
        stream_id: parse_u64("stream_id")?,
        kernel: meta("kernel")?.parse()?,
    })
}

/// JSON record of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub schema_version: u32,
    pub observable_id: String,
    pub value: f64,
    pub std_error: f64,
    pub n_events: usize,
    pub alpha_true: f64,
    pub seed: u64,
    pub raw_value: f64,
    pub clamped: bool,
    /// Sample size the band is quoted at.
    pub band_events: usize,
    /// ±1σ half-width at `band_events`.
    pub band: f64,
}

impl EstimateRecord {
    pub fn new(est: &ObservableEstimate, alpha_true: PhaseAngle, seed: u64, band_events: usize) -> Self {
        EstimateRecord {
            schema_version: SCHEMA_VERSION,
            observable_id: est.observable.id().to_string(),
            value: est.value,
            std_error: est.std_error,
            n_events: est.n_events,
            alpha_true: alpha_true.radians(),
            seed,
            raw_value: est.raw_value,
            clamped: est.clamped,
            band_events,
            band: est.std_error * (est.n_events as f64 / band_events as f64).sqrt(),
        }
    }
}
