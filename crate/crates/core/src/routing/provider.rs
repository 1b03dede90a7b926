use std::collections::HashMap;
use std::io::Read;

use crate::model::{km_per_degree, GeoPoint, ZoneGrid, ZoneId};

use super::RoutingError;

/// Road travel times between points, in minutes.
///
/// A non-finite return value means the leg is unreachable. Implementations
/// must return 0 for identical points; the triangle inequality is not
/// assumed anywhere.
pub trait TravelTimeProvider: Send + Sync {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64;
}

impl<T: TravelTimeProvider + ?Sized> TravelTimeProvider for &T {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        (**self).travel_time(a, b)
    }
}

impl<T: TravelTimeProvider + ?Sized> TravelTimeProvider for Box<T> {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        (**self).travel_time(a, b)
    }
}

impl<T: TravelTimeProvider + ?Sized> TravelTimeProvider for std::sync::Arc<T> {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        (**self).travel_time(a, b)
    }
}

/// Rectilinear distance on the local projection at a fixed speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRouter {
    pub speed_kmh: f64,
}

impl GridRouter {
    pub const DEFAULT_SPEED_KMH: f64 = 20.0;

    pub fn new(speed_kmh: f64) -> Result<Self, RoutingError> {
        if !(speed_kmh.is_finite() && speed_kmh > 0.0) {
            return Err(RoutingError::Config(format!("speed must be positive, got {speed_kmh}")));
        }
        Ok(Self { speed_kmh })
    }

    /// L1 distance in km between two points.
    pub fn rectilinear_km(a: GeoPoint, b: GeoPoint) -> f64 {
        let k = km_per_degree();
        let mean_lat = (0.5 * (a.lat + b.lat)).to_radians();
        let dx = (b.lon - a.lon) * k * mean_lat.cos();
        let dy = (b.lat - a.lat) * k;
        dx.abs() + dy.abs()
    }
}

impl Default for GridRouter {
    fn default() -> Self {
        Self { speed_kmh: Self::DEFAULT_SPEED_KMH }
    }
}

impl TravelTimeProvider for GridRouter {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        Self::rectilinear_km(a, b) / self.speed_kmh * 60.0
    }
}

/// Zone-to-zone travel-time matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRouter {
    grid: ZoneGrid,
    minutes: Vec<f64>,
}

impl TableRouter {
    /// `minutes[(i-1)*Z + (j-1)]` is the time from zone `i` to zone `j`.
    pub fn new(grid: ZoneGrid, minutes: Vec<f64>) -> Result<Self, RoutingError> {
        let z = grid.zone_count() as usize;
        if minutes.len() != z * z {
            return Err(RoutingError::Table(format!("expected {} entries for {z} zones, got {}", z * z, minutes.len())));
        }
        if let Some(bad) = minutes.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(RoutingError::Table(format!("travel time {bad} is not a non-negative number")));
        }
        Ok(Self { grid, minutes })
    }

    /// Reads a CSV matrix: header `zone,1,2,..,Z`, then one row per origin zone.
    pub fn from_csv<R: Read>(grid: ZoneGrid, reader: R) -> Result<Self, RoutingError> {
        let z = grid.zone_count() as usize;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().skip(1).collect();
        let expected: Vec<String> = (1..=z).map(|i| i.to_string()).collect();
        if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(RoutingError::Table(format!("header must list zones 1..{z} in order")));
        }
        let mut minutes = vec![f64::NAN; z * z];
        let mut seen = vec![false; z];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = line + 2;
            let origin: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .filter(|&o| (1..=z).contains(&o))
                .ok_or_else(|| RoutingError::Table(format!("line {line}: bad origin zone")))?;
            if rec.len() != z + 1 {
                return Err(RoutingError::Table(format!("line {line}: expected {} fields, got {}", z + 1, rec.len())));
            }
            if std::mem::replace(&mut seen[origin - 1], true) {
                return Err(RoutingError::Table(format!("line {line}: zone {origin} listed twice")));
            }
            for j in 0..z {
                minutes[(origin - 1) * z + j] = rec[j + 1]
                    .parse()
                    .map_err(|_| RoutingError::Table(format!("line {line}: field {} is not a number", j + 2)))?;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(RoutingError::Table(format!("no row for zone {}", missing + 1)));
        }
        Self::new(grid, minutes)
    }

    pub fn zone_time(&self, from: ZoneId, to: ZoneId) -> f64 {
        let z = self.grid.zone_count() as usize;
        self.minutes[(from as usize - 1) * z + (to as usize - 1)]
    }
}

impl TravelTimeProvider for TableRouter {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        match (self.grid.zone_of(a), self.grid.zone_of(b)) {
            (Ok(za), Ok(zb)) => self.zone_time(za, zb),
            _ => f64::INFINITY,
        }
    }
}

fn point_key(p: GeoPoint) -> (u64, u64) {
    (p.lat.to_bits(), p.lon.to_bits())
}

/// Scripted leg times keyed by exact endpoints; unscripted legs take
/// `fallback` minutes.
#[derive(Debug, Clone, Default)]
pub struct MockRouter {
    legs: HashMap<((u64, u64), (u64, u64)), f64>,
    pub fallback: f64,
}

impl MockRouter {
    pub fn new(fallback: f64) -> Self {
        Self { legs: HashMap::new(), fallback }
    }

    /// Scripts the directed leg `a -> b`.
    pub fn set(&mut self, a: GeoPoint, b: GeoPoint, minutes: f64) -> &mut Self {
        self.legs.insert((point_key(a), point_key(b)), minutes);
        self
    }

    /// Scripts both directions.
    pub fn set_both(&mut self, a: GeoPoint, b: GeoPoint, minutes: f64) -> &mut Self {
        self.set(a, b, minutes).set(b, a, minutes)
    }
}

impl TravelTimeProvider for MockRouter {
    fn travel_time(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        if a == b {
            return 0.0;
        }
        self.legs.get(&(point_key(a), point_key(b))).copied().unwrap_or(self.fallback)
    }
}
