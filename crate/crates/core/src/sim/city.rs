use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::model::{euclidean_km, GeoPoint, ZoneGrid, ZoneId};
use crate::transit::{Line, Station, Timetable, Transfer};

use super::SimError;

/// One transit line as a chain of grid cells `[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: String,
    pub cells: Vec<[u32; 2]>,
}

/// A desk-scale city: grid, transit lines and Poisson demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCitySpec {
    pub grid: ZoneGrid,
    pub lines: Vec<LineSpec>,
    /// Running speed of every line between stations.
    pub transit_kmh: f64,
    /// Time to change lines at a shared station.
    pub transfer_seconds: f64,
    /// Mean orders per minute over the whole city.
    pub orders_per_min: f64,
    /// Relative origin intensity per zone (zone 1 first); empty means uniform.
    pub zone_weights: Vec<f64>,
    /// Destination zones are drawn with weight `exp(-distance / trip_decay_km)`.
    pub trip_decay_km: f64,
}

impl Default for SyntheticCitySpec {
    fn default() -> Self {
        let grid = ZoneGrid { origin: GeoPoint::new(40.7144, -74.0174), cell_size_m: 800.0, rows: 5, cols: 5 };
        let row = |id: &str, r: u32| LineSpec { id: id.into(), cells: (0..5).map(|c| [r, c]).collect() };
        let col = |id: &str, c: u32| LineSpec { id: id.into(), cells: (0..5).map(|r| [r, c]).collect() };
        Self {
            grid,
            lines: vec![row("east_west_1", 1), row("east_west_3", 3), col("north_south_1", 1), col("north_south_3", 3)],
            transit_kmh: 40.0,
            transfer_seconds: 120.0,
            orders_per_min: 35.0,
            zone_weights: Vec::new(),
            trip_decay_km: 2.0,
        }
    }
}

impl SyntheticCitySpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.grid.validate().map_err(SimError::Model)?;
        if self.lines.is_empty() {
            return bad("city.lines needs at least one transit line".into());
        }
        for l in &self.lines {
            if l.cells.len() < 2 {
                return bad(format!("city.lines: line {} needs at least two cells", l.id));
            }
            if let Some(c) = l.cells.iter().find(|c| c[0] >= self.grid.rows || c[1] >= self.grid.cols) {
                return bad(format!("city.lines: line {} cell {c:?} is outside the grid", l.id));
            }
        }
        if !(self.transit_kmh.is_finite() && self.transit_kmh > 0.0) {
            return bad(format!("city.transit_kmh must be positive, got {}", self.transit_kmh));
        }
        if !(self.transfer_seconds.is_finite() && self.transfer_seconds >= 0.0) {
            return bad(format!("city.transfer_seconds must be non-negative, got {}", self.transfer_seconds));
        }
        if !(self.orders_per_min.is_finite() && self.orders_per_min >= 0.0) {
            return bad(format!("city.orders_per_min must be non-negative, got {}", self.orders_per_min));
        }
        if !self.zone_weights.is_empty() {
            if self.zone_weights.len() != self.grid.zone_count() as usize {
                return bad(format!(
                    "city.zone_weights has {} entries for {} zones",
                    self.zone_weights.len(),
                    self.grid.zone_count()
                ));
            }
            if self.zone_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return bad("city.zone_weights must be non-negative".into());
            }
        }
        if !(self.trip_decay_km.is_finite() && self.trip_decay_km > 0.0) {
            return bad(format!("city.trip_decay_km must be positive, got {}", self.trip_decay_km));
        }
        Ok(())
    }

    /// Orders per minute originating in each zone (index 0 is zone 1).
    pub fn zone_intensities(&self) -> Vec<f64> {
        let z = self.grid.zone_count() as usize;
        let w = if self.zone_weights.is_empty() { vec![1.0; z] } else { self.zone_weights.clone() };
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return vec![0.0; z];
        }
        w.iter().map(|x| self.orders_per_min * x / total).collect()
    }

    /// Stations at the centres of line cells (one per distinct cell, in
    /// order of first use), lines with distance-proportional segments and
    /// transfers at stations shared by several lines.
    pub fn timetable(&self) -> Result<Timetable, SimError> {
        self.validate()?;
        let mut tt = Timetable::default();
        let mut cell_station: Vec<([u32; 2], u32)> = Vec::new();
        let mut uses: Vec<usize> = Vec::new();
        for l in &self.lines {
            let mut stations = Vec::with_capacity(l.cells.len());
            for cell in &l.cells {
                let id = match cell_station.iter().find(|(c, _)| c == cell) {
                    Some(&(_, id)) => {
                        uses[id as usize - 1] += 1;
                        id
                    }
                    None => {
                        let id = cell_station.len() as u32 + 1;
                        let zone = self.grid.zone_at(cell[0], cell[1]);
                        let point = self.grid.zone_center(zone).map_err(SimError::Model)?;
                        tt.stations.push(Station { id, point, zone });
                        cell_station.push((*cell, id));
                        uses.push(1);
                        id
                    }
                };
                stations.push(id);
            }
            let segment_seconds = stations
                .windows(2)
                .map(|w| {
                    let a = tt.stations[w[0] as usize - 1].point;
                    let b = tt.stations[w[1] as usize - 1].point;
                    euclidean_km(a, b) / self.transit_kmh * 3600.0
                })
                .collect();
            tt.lines.push(Line { id: l.id.clone(), stations, segment_seconds });
        }
        for (i, &n) in uses.iter().enumerate() {
            if n > 1 {
                let id = i as u32 + 1;
                tt.transfers.push(Transfer { a: id, b: id, seconds: self.transfer_seconds });
            }
        }
        tt.validate().map_err(SimError::Transit)?;
        Ok(tt)
    }

    /// Poisson arrivals per zone and minute over `[start_min, end_min)`,
    /// each at a whole second within its minute; destinations favour
    /// nearby zones.
    pub fn generate_orders<R: Rng + ?Sized>(
        &self,
        start_min: f64,
        end_min: f64,
        rng: &mut R,
    ) -> Result<Vec<Order>, SimError> {
        self.validate()?;
        let grid = &self.grid;
        let z = grid.zone_count();
        let centers: Vec<GeoPoint> = (1..=z).map(|k| grid.zone_center(k).expect("real zone")).collect();
        // cumulative destination weights per origin zone, excluding the origin
        let cumulative: Vec<Vec<f64>> = (0..z as usize)
            .map(|o| {
                let mut acc = 0.0;
                (0..z as usize)
                    .map(|d| {
                        if d != o {
                            acc += (-euclidean_km(centers[o], centers[d]) / self.trip_decay_km).exp();
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let rates = self.zone_intensities();
        let mut orders = Vec::new();
        let minutes = (end_min - start_min).max(0.0).ceil() as u64;
        for m in 0..minutes {
            for (oz, &rate) in rates.iter().enumerate() {
                if rate <= 0.0 {
                    continue;
                }
                let n = Poisson::new(rate).expect("positive rate").sample(rng) as u64;
                for _ in 0..n {
                    let second: u32 = rng.gen_range(0..60);
                    let request_min = start_min + m as f64 + second as f64 / 60.0;
                    if request_min >= end_min {
                        continue;
                    }
                    let cum = &cumulative[oz];
                    let pick = rng.gen::<f64>() * cum[cum.len() - 1];
                    let dz = cum.iter().position(|&c| c > pick).unwrap_or(cum.len() - 1);
                    let origin_zone = oz as ZoneId + 1;
                    let dest_zone = dz as ZoneId + 1;
                    let origin = grid.point_in_zone(origin_zone, rng.gen(), rng.gen()).map_err(SimError::Model)?;
                    let destination = grid.point_in_zone(dest_zone, rng.gen(), rng.gen()).map_err(SimError::Model)?;
                    // zones are recomputed so edge points follow the grid's own rule
                    orders.push(Order {
                        id: 0,
                        request_min,
                        origin,
                        destination,
                        origin_zone: grid.zone_of(origin).map_err(SimError::Model)?,
                        dest_zone: grid.zone_of(destination).map_err(SimError::Model)?,
                        pooling_only: false,
                    });
                }
            }
        }
        orders.sort_by(|a, b| a.request_min.total_cmp(&b.request_min));
        for (i, o) in orders.iter_mut().enumerate() {
            o.id = i as u64;
        }
        Ok(orders)
    }
}

/// A ride request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub id: u64,
    /// Clock minute of the request.
    pub request_min: f64,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub origin_zone: ZoneId,
    pub dest_zone: ZoneId,
    /// Rider accepts door-to-door service only.
    pub pooling_only: bool,
}

/// Column names of the order file.
pub const ORDER_HEADER: [&str; 7] =
    ["request_time", "origin_lat", "origin_lon", "dest_lat", "dest_lon", "origin_zone", "dest_zone"];

/// Formats a clock minute as `HH:MM:SS`.
pub fn format_clock(minute: f64) -> String {
    let secs = (minute * 60.0).round() as i64;
    format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60)
}

/// Parses `H:MM`, `H:MM:SS`, optionally followed by `am` or `pm`.
pub fn parse_clock(text: &str) -> Option<f64> {
    let t = text.trim().to_ascii_lowercase();
    let (body, meridiem) = if let Some(b) = t.strip_suffix("am") {
        (b.trim_end(), Some(false))
    } else if let Some(b) = t.strip_suffix("pm") {
        (b.trim_end(), Some(true))
    } else {
        (t.as_str(), None)
    };
    let parts: Vec<&str> = body.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let nums: Vec<u32> = parts.iter().map(|p| p.parse().ok()).collect::<Option<_>>()?;
    let (mut h, m, s) = (nums[0], nums[1], nums.get(2).copied().unwrap_or(0));
    if m >= 60 || s >= 60 {
        return None;
    }
    match meridiem {
        Some(pm) => {
            if h == 0 || h > 12 {
                return None;
            }
            h = h % 12 + if pm { 12 } else { 0 };
        }
        None if h >= 24 => return None,
        None => {}
    }
    Some(h as f64 * 60.0 + m as f64 + s as f64 / 60.0)
}

pub fn write_orders<W: Write>(writer: W, orders: &[Order]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ORDER_HEADER)?;
    for o in orders {
        w.write_record([
            format_clock(o.request_min),
            o.origin.lat.to_string(),
            o.origin.lon.to_string(),
            o.destination.lat.to_string(),
            o.destination.lon.to_string(),
            o.origin_zone.to_string(),
            o.dest_zone.to_string(),
        ])?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}

/// Reads an order file, sorted by request time with ids in that order.
///
/// Listed zones are checked against the grid; on disagreement the
/// recomputed zone is kept and a warning logged.
pub fn load_orders<R: Read>(reader: R, grid: &ZoneGrid) -> Result<Vec<Order>, SimError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header != ORDER_HEADER {
        return Err(SimError::Parse { line: 1, msg: format!("expected header {}", ORDER_HEADER.join(",")) });
    }
    let mut orders = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| SimError::Parse { line, msg: e.to_string() })?;
        let bad = |msg: String| SimError::Parse { line, msg };
        let request_min = parse_clock(&rec[0]).ok_or_else(|| bad(format!("bad request time {:?}", &rec[0])))?;
        let num = |k: usize| -> Result<f64, SimError> {
            rec[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(format!("{} is not a number", ORDER_HEADER[k])))
        };
        let zone = |k: usize| -> Result<ZoneId, SimError> {
            rec[k].parse::<ZoneId>().map_err(|_| bad(format!("{} is not a zone id", ORDER_HEADER[k])))
        };
        let origin = GeoPoint::new(num(1)?, num(2)?);
        let destination = GeoPoint::new(num(3)?, num(4)?);
        let locate = |p: GeoPoint, listed: ZoneId, what: &str| -> Result<ZoneId, SimError> {
            let z = grid.zone_of(p).map_err(|_| bad(format!("{what} ({}, {}) lies outside the zone grid", p.lat, p.lon)))?;
            if z != listed {
                log::warn!("order line {line}: {what} zone listed as {listed}, grid says {z}; using {z}");
            }
            Ok(z)
        };
        let origin_zone = locate(origin, zone(5)?, "origin")?;
        let dest_zone = locate(destination, zone(6)?, "destination")?;
        orders.push(Order { id: 0, request_min, origin, destination, origin_zone, dest_zone, pooling_only: false });
    }
    orders.sort_by(|a, b| a.request_min.total_cmp(&b.request_min));
    for (i, o) in orders.iter_mut().enumerate() {
        o.id = i as u64;
    }
    Ok(orders)
}
