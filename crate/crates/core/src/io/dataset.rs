//! CSV and JSON dataset files.
//!
//! CSV files hold a single header line and one row per record, LF line
//! endings, numbers in their shortest round-trip decimal form and `-0`
//! written as `0`. JSON files wrap the same rows with a schema version and an
//! echo of the run configuration.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{BifurcationEvent, Direction, PitchforkTrace};
use crate::error::{Error, Result};
use crate::sweep::{GSweepPoint, SweepPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown format '{s}'"))),
        }
    }
}

/// Shortest decimal that parses back to `x`; zero of either sign is `0`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// A fixed-column table row.
pub trait Record: Sized + Clone + Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];
    const KIND: &'static str;

    fn fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self>;
}

fn num<T: std::str::FromStr>(s: &str, col: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value '{s}' in column {col}")))
}

impl Record for SweepPoint {
    const COLUMNS: &'static [&'static str] = &["q", "p", "eigen_index", "re", "im"];
    const KIND: &'static str = "flux";

    fn fields(&self) -> Vec<String> {
        vec![
            self.q.to_string(),
            self.p.to_string(),
            self.eigen_index.to_string(),
            format_f64(self.re),
            format_f64(self.im),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(SweepPoint {
            q: num(f[0], "q")?,
            p: num(f[1], "p")?,
            eigen_index: num(f[2], "eigen_index")?,
            re: num(f[3], "re")?,
            im: num(f[4], "im")?,
        })
    }
}

impl Record for GSweepPoint {
    const COLUMNS: &'static [&'static str] = &["g", "q", "p", "eigen_index", "re", "im"];
    const KIND: &'static str = "g-sweep";

    fn fields(&self) -> Vec<String> {
        vec![
            format_f64(self.g),
            self.q.to_string(),
            self.p.to_string(),
            self.eigen_index.to_string(),
            format_f64(self.re),
            format_f64(self.im),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(GSweepPoint {
            g: num(f[0], "g")?,
            q: num(f[1], "q")?,
            p: num(f[2], "p")?,
            eigen_index: num(f[3], "eigen_index")?,
            re: num(f[4], "re")?,
            im: num(f[5], "im")?,
        })
    }
}

/// One point of one pitchfork track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub g: f64,
    pub track: usize,
    pub re: f64,
    pub im: f64,
}

impl Record for TrackPoint {
    const COLUMNS: &'static [&'static str] = &["g", "track", "re", "im"];
    const KIND: &'static str = "pitchfork";

    fn fields(&self) -> Vec<String> {
        vec![
            format_f64(self.g),
            self.track.to_string(),
            format_f64(self.re),
            format_f64(self.im),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        Ok(TrackPoint {
            g: num(f[0], "g")?,
            track: num(f[1], "track")?,
            re: num(f[2], "re")?,
            im: num(f[3], "im")?,
        })
    }
}

/// Rows ordered by `(g, track)`.
pub fn track_points(trace: &PitchforkTrace) -> Vec<TrackPoint> {
    let mut out = Vec::with_capacity(4 * trace.g_grid.len());
    for (i, &g) in trace.g_grid.iter().enumerate() {
        for (track, z) in trace.at(i).iter().enumerate() {
            out.push(TrackPoint {
                g,
                track,
                re: z.re,
                im: z.im,
            });
        }
    }
    out
}

/// Flattened [`BifurcationEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub g_lo: f64,
    pub g_hi: f64,
    pub g_critical: f64,
    pub count_before: usize,
    pub count_after: usize,
    pub direction: Direction,
    pub seed_re: f64,
    pub seed_im: f64,
    pub seed_p: usize,
    pub resolved: bool,
}

impl From<&BifurcationEvent> for EventRow {
    fn from(e: &BifurcationEvent) -> Self {
        EventRow {
            g_lo: e.g_lo,
            g_hi: e.g_hi,
            g_critical: e.g_critical,
            count_before: e.count_before,
            count_after: e.count_after,
            direction: e.direction(),
            seed_re: e.seed_eigenvalue.re,
            seed_im: e.seed_eigenvalue.im,
            seed_p: e.seed_momentum,
            resolved: e.resolved,
        }
    }
}

impl Record for EventRow {
    const COLUMNS: &'static [&'static str] = &[
        "g_lo",
        "g_hi",
        "g_critical",
        "count_before",
        "count_after",
        "direction",
        "seed_re",
        "seed_im",
        "seed_p",
        "resolved",
    ];
    const KIND: &'static str = "events";

    fn fields(&self) -> Vec<String> {
        vec![
            format_f64(self.g_lo),
            format_f64(self.g_hi),
            format_f64(self.g_critical),
            self.count_before.to_string(),
            self.count_after.to_string(),
            match self.direction {
                Direction::Complexifying => "complexifying".into(),
                Direction::Realifying => "realifying".into(),
            },
            format_f64(self.seed_re),
            format_f64(self.seed_im),
            self.seed_p.to_string(),
            self.resolved.to_string(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        let direction = match f[5].trim() {
            "complexifying" => Direction::Complexifying,
            "realifying" => Direction::Realifying,
            other => return Err(Error::Parse(format!("bad direction '{other}'"))),
        };
        Ok(EventRow {
            g_lo: num(f[0], "g_lo")?,
            g_hi: num(f[1], "g_hi")?,
            g_critical: num(f[2], "g_critical")?,
            count_before: num(f[3], "count_before")?,
            count_after: num(f[4], "count_after")?,
            direction,
            seed_re: num(f[6], "seed_re")?,
            seed_im: num(f[7], "seed_im")?,
            seed_p: num(f[8], "seed_p")?,
            resolved: num(f[9], "resolved")?,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn to_csv<R: Record>(rows: &[R]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(R::COLUMNS).expect("write to memory");
    for r in rows {
        w.write_record(r.fields()).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("ascii output")
}

pub fn from_csv<R: Record>(text: &str) -> Result<Vec<R>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(R::COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected columns {}, got {}",
            R::COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let fields: Vec<&str> = rec.iter().collect();
            R::from_fields(&fields)
        })
        .collect()
}

/// JSON file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile<R> {
    pub schema_version: u32,
    pub artifact_version: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<R>,
}

impl<R: Record> DatasetFile<R> {
    pub fn new(rows: Vec<R>, config: &impl Serialize) -> Self {
        DatasetFile {
            schema_version: SCHEMA_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: R::KIND.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            columns: R::COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }
}

pub fn to_json<R: Record>(rows: &[R], config: &impl Serialize) -> String {
    let file = DatasetFile::new(rows.to_vec(), config);
    let mut s = serde_json::to_string_pretty(&file).expect("plain data serialises");
    s.push('\n');
    s
}

pub fn from_json<R: Record>(text: &str) -> Result<DatasetFile<R>> {
    let file: DatasetFile<R> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported schema version {}", file.schema_version)));
    }
    if file.kind != R::KIND {
        return Err(Error::Parse(format!("expected a {} dataset, got {}", R::KIND, file.kind)));
    }
    Ok(file)
}

/// Rows in the requested format.
pub fn serialize_dataset<R: Record>(rows: &[R], format: Format, config: &impl Serialize) -> String {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(q: usize, p: usize, i: usize, re: f64, im: f64) -> SweepPoint {
        SweepPoint {
            q,
            p,
            eigen_index: i,
            re,
            im,
        }
    }

    #[test]
    fn one_point_csv() {
        let rows = [pt(0, 0, 0, -4.0, 0.0)];
        assert_eq!(to_csv(&rows), "q,p,eigen_index,re,im\n0,0,0,-4,0\n");
        assert_eq!(to_csv(&[pt(0, 0, 0, -4.0, -0.0)]), "q,p,eigen_index,re,im\n0,0,0,-4,0\n");
    }

    #[test]
    fn one_point_json() {
        let rows = [pt(0, 0, 0, -4.0, 0.0)];
        let text = to_json(&rows, &serde_json::json!({"L": 3}));
        let back: DatasetFile<SweepPoint> = from_json(&text).unwrap();
        assert_eq!(back.rows[0].re, -4.0);
        assert_eq!(back.config["L"], 3);
        assert_eq!(back.columns, vec!["q", "p", "eigen_index", "re", "im"]);
        assert!(from_json::<GSweepPoint>(&text).is_err());
    }

    #[test]
    fn shortest_decimals() {
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(-0.0), "0");
        assert_eq!(format_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(format_f64(2.5e-300).parse::<f64>().unwrap(), 2.5e-300);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(from_csv::<SweepPoint>("q,p,re,im\n0,0,1,2\n").is_err());
        assert!(from_csv::<SweepPoint>("q,p,eigen_index,re,im\n0,0,x,1,2\n").is_err());
    }

    #[test]
    fn event_rows_round_trip() {
        let row = EventRow {
            g_lo: 0.1,
            g_hi: 0.1000001,
            g_critical: 0.10000005,
            count_before: 0,
            count_after: 4,
            direction: Direction::Complexifying,
            seed_re: 0.07,
            seed_im: 3e-6,
            seed_p: 0,
            resolved: true,
        };
        let text = to_csv(std::slice::from_ref(&row));
        assert_eq!(from_csv::<EventRow>(&text).unwrap(), vec![row]);
    }
}
