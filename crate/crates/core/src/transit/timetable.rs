use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{GeoPoint, ZoneGrid, ZoneId};

use super::TransitError;

pub type StationId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub id: StationId,
    pub point: GeoPoint,
    pub zone: ZoneId,
}

/// A line served in both directions over an ordered station list.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub stations: Vec<StationId>,
    /// `segment_seconds[i]` is the ride from `stations[i]` to `stations[i + 1]`.
    pub segment_seconds: Vec<f64>,
}

/// Minimum time to change lines between two stations (possibly the same one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub a: StationId,
    pub b: StationId,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timetable {
    pub stations: Vec<Station>,
    pub lines: Vec<Line>,
    pub transfers: Vec<Transfer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StationRow {
    id: StationId,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    line_id: String,
    seq: usize,
    station_id: StationId,
    segment_seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransferRow {
    a: StationId,
    b: StationId,
    seconds: f64,
}

const SECTIONS: [&str; 3] = ["stations", "lines", "transfers"];

impl Timetable {
    pub fn station_index(&self, id: StationId) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// Checks references, duplicate ids and segment times.
    pub fn validate(&self) -> Result<(), TransitError> {
        let mut ids = HashSet::new();
        for s in &self.stations {
            if !ids.insert(s.id) {
                return Err(TransitError::Build(format!("duplicate station id {}", s.id)));
            }
        }
        let mut line_ids = HashSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id.as_str()) {
                return Err(TransitError::Build(format!("duplicate line id {}", l.id)));
            }
            if l.stations.len() < 2 {
                return Err(TransitError::Build(format!("line {} needs at least two stations", l.id)));
            }
            if l.segment_seconds.len() + 1 != l.stations.len() {
                return Err(TransitError::Build(format!("line {} segment count mismatch", l.id)));
            }
            if let Some(s) = l.stations.iter().find(|s| !ids.contains(*s)) {
                return Err(TransitError::Build(format!("line {} references unknown station {s}", l.id)));
            }
            let mut seen = HashSet::new();
            if let Some(s) = l.stations.iter().find(|s| !seen.insert(**s)) {
                return Err(TransitError::Build(format!("line {} visits station {s} twice", l.id)));
            }
            if let Some(t) = l.segment_seconds.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return Err(TransitError::Build(format!("line {} has segment time {t}", l.id)));
            }
        }
        for t in &self.transfers {
            for s in [t.a, t.b] {
                if !ids.contains(&s) {
                    return Err(TransitError::Build(format!("transfer references unknown station {s}")));
                }
            }
            if !(t.seconds.is_finite() && t.seconds >= 0.0) {
                return Err(TransitError::Build(format!("transfer {}-{} has time {}", t.a, t.b, t.seconds)));
            }
        }
        Ok(())
    }

    /// Parses the sectioned CSV format (`# stations`, `# lines`,
    /// `# transfers`), placing stations on `grid`.
    pub fn parse(text: &str, grid: &ZoneGrid) -> Result<Self, TransitError> {
        let mut bodies: [String; 3] = Default::default();
        let mut numbers: [Vec<usize>; 3] = Default::default();
        let mut current: Option<usize> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('#') {
                let name = name.trim();
                current = Some(SECTIONS.iter().position(|s| *s == name).ok_or_else(|| TransitError::Parse {
                    line: n + 1,
                    msg: format!("unknown section {name:?}"),
                })?);
                continue;
            }
            let Some(sec) = current else {
                return Err(TransitError::Parse { line: n + 1, msg: "data before first section".into() });
            };
            bodies[sec].push_str(line);
            bodies[sec].push('\n');
            numbers[sec].push(n + 1);
        }

        let mut tt = Timetable::default();
        for row in read_rows::<StationRow>(&bodies[0], &numbers[0])? {
            let point = GeoPoint::new(row.lat, row.lon);
            let zone = grid
                .zone_of(point)
                .map_err(|_| TransitError::Build(format!("station {} lies outside the zone grid", row.id)))?;
            tt.stations.push(Station { id: row.id, point, zone });
        }

        let mut rows = read_rows::<LineRow>(&bodies[1], &numbers[1])?;
        rows.sort_by(|a, b| a.line_id.cmp(&b.line_id).then(a.seq.cmp(&b.seq)));
        for row in rows {
            let fresh = tt.lines.last().map_or(true, |l| l.id != row.line_id);
            if fresh {
                if row.seq != 0 {
                    return Err(TransitError::Build(format!("line {} does not start at seq 0", row.line_id)));
                }
                tt.lines.push(Line { id: row.line_id, stations: vec![row.station_id], segment_seconds: Vec::new() });
            } else {
                let l = tt.lines.last_mut().unwrap();
                if row.seq != l.stations.len() {
                    return Err(TransitError::Build(format!("line {} has a gap or repeat at seq {}", l.id, row.seq)));
                }
                l.stations.push(row.station_id);
                l.segment_seconds.push(row.segment_seconds);
            }
        }

        for row in read_rows::<TransferRow>(&bodies[2], &numbers[2])? {
            tt.transfers.push(Transfer { a: row.a, b: row.b, seconds: row.seconds });
        }
        tt.validate()?;
        Ok(tt)
    }

    /// Inverse of [`Timetable::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# stations\nid,lat,lon\n");
        for s in &self.stations {
            let _ = writeln!(out, "{},{},{}", s.id, s.point.lat, s.point.lon);
        }
        out.push_str("# lines\nline_id,seq,station_id,segment_seconds\n");
        for l in &self.lines {
            for (i, s) in l.stations.iter().enumerate() {
                let secs = if i == 0 { 0.0 } else { l.segment_seconds[i - 1] };
                let _ = writeln!(out, "{},{i},{s},{secs}", l.id);
            }
        }
        out.push_str("# transfers\na,b,seconds\n");
        for t in &self.transfers {
            let _ = writeln!(out, "{},{},{}", t.a, t.b, t.seconds);
        }
        out
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(body: &str, numbers: &[usize]) -> Result<Vec<T>, TransitError> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            // numbers[0] is the section's header row
            r.map_err(|e| TransitError::Parse { line: numbers.get(i + 1).copied().unwrap_or(0), msg: e.to_string() })
        })
        .collect()
}
