use serde::{Deserialize, Serialize};

use super::ModelError;

/// Mean Earth radius used by the equirectangular projection.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Kilometres per degree of latitude.
pub fn km_per_degree() -> f64 {
    EARTH_RADIUS_KM * std::f64::consts::PI / 180.0
}

/// Zone identifier. `0` is the door-to-door action sentinel, `1..=Z` are
/// real zones and `Z + 1` is the dummy zone.
pub type ZoneId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Point on the straight segment from `self` to `other`.
    pub fn lerp(self, other: GeoPoint, fraction: f64) -> GeoPoint {
        GeoPoint {
            lat: self.lat + (other.lat - self.lat) * fraction,
            lon: self.lon + (other.lon - self.lon) * fraction,
        }
    }
}

/// Euclidean distance between two points after an equirectangular
/// projection centred on their mean latitude.
pub fn euclidean_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let k = km_per_degree();
    let mean_lat = 0.5 * (a.lat + b.lat);
    let dx = (b.lon - a.lon) * mean_lat.to_radians().cos() * k;
    let dy = (b.lat - a.lat) * k;
    dx.hypot(dy)
}

/// Rectangular partition of the study area into square cells.
///
/// Zones are numbered row-major starting at the south-west corner:
/// `id = row * cols + col + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneGrid {
    /// South-west corner of the grid.
    pub origin: GeoPoint,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    pub rows: u32,
    pub cols: u32,
}

fn default_cell_size() -> f64 {
    800.0
}

impl ZoneGrid {
    pub fn new(origin: GeoPoint, cell_size_m: f64, rows: u32, cols: u32) -> Result<Self, ModelError> {
        let grid = Self { origin, cell_size_m, rows, cols };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ModelError::InvalidGrid("rows and cols must be positive".into()));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(ModelError::InvalidGrid("cell_size_m must be positive".into()));
        }
        if !(self.origin.lat.is_finite() && self.origin.lon.is_finite()) || self.origin.lat.abs() >= 89.0 {
            return Err(ModelError::InvalidGrid("origin must be a finite non-polar point".into()));
        }
        Ok(())
    }

    /// Number of real zones `Z`.
    pub fn zone_count(&self) -> u32 {
        self.rows * self.cols
    }

    /// The dummy zone `Z + 1`.
    pub fn dummy_zone(&self) -> ZoneId {
        self.zone_count() + 1
    }

    /// Size of the action space, `Z + 1`.
    pub fn action_count(&self) -> usize {
        self.zone_count() as usize + 1
    }

    fn cell_km(&self) -> f64 {
        self.cell_size_m / 1000.0
    }

    fn cos_ref(&self) -> f64 {
        self.origin.lat.to_radians().cos()
    }

    /// Projects a point to grid-local kilometres (east, north) from the origin.
    pub fn to_local_km(&self, p: GeoPoint) -> (f64, f64) {
        let k = km_per_degree();
        ((p.lon - self.origin.lon) * self.cos_ref() * k, (p.lat - self.origin.lat) * k)
    }

    pub fn from_local_km(&self, x_km: f64, y_km: f64) -> GeoPoint {
        let k = km_per_degree();
        GeoPoint {
            lat: self.origin.lat + y_km / k,
            lon: self.origin.lon + x_km / (self.cos_ref() * k),
        }
    }

    pub fn width_km(&self) -> f64 {
        self.cols as f64 * self.cell_km()
    }

    pub fn height_km(&self) -> f64 {
        self.rows as f64 * self.cell_km()
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        let (x, y) = self.to_local_km(p);
        let eps = 1e-9;
        x >= -eps && y >= -eps && x <= self.width_km() + eps && y <= self.height_km() + eps
    }

    /// Zone of a point; points on the outer north/east edge belong to the
    /// last row/column.
    pub fn zone_of(&self, p: GeoPoint) -> Result<ZoneId, ModelError> {
        if !self.contains(p) {
            return Err(ModelError::OutOfBounds { lat: p.lat, lon: p.lon });
        }
        let (x, y) = self.to_local_km(p);
        let col = ((x / self.cell_km()).floor().max(0.0) as u32).min(self.cols - 1);
        let row = ((y / self.cell_km()).floor().max(0.0) as u32).min(self.rows - 1);
        Ok(self.zone_at(row, col))
    }

    pub fn zone_at(&self, row: u32, col: u32) -> ZoneId {
        row * self.cols + col + 1
    }

    /// `(row, col)` of a real zone.
    pub fn cell_of(&self, zone: ZoneId) -> Result<(u32, u32), ModelError> {
        if zone == 0 || zone > self.zone_count() {
            return Err(ModelError::ZoneOutOfRange { zone, max: self.zone_count() });
        }
        let idx = zone - 1;
        Ok((idx / self.cols, idx % self.cols))
    }

    pub fn zone_center(&self, zone: ZoneId) -> Result<GeoPoint, ModelError> {
        let (row, col) = self.cell_of(zone)?;
        let c = self.cell_km();
        Ok(self.from_local_km((col as f64 + 0.5) * c, (row as f64 + 0.5) * c))
    }

    /// Point at fractional offsets (`fx`, `fy` in `[0, 1)`) inside a zone.
    pub fn point_in_zone(&self, zone: ZoneId, fx: f64, fy: f64) -> Result<GeoPoint, ModelError> {
        let (row, col) = self.cell_of(zone)?;
        let c = self.cell_km();
        Ok(self.from_local_km((col as f64 + fx) * c, (row as f64 + fy) * c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ZoneGrid {
        ZoneGrid::new(GeoPoint::new(40.70, -74.02), 800.0, 5, 5).unwrap()
    }

    #[test]
    fn zone_numbering_is_row_major_from_south_west() {
        let g = grid();
        assert_eq!(g.zone_of(g.from_local_km(0.1, 0.1)).unwrap(), 1);
        assert_eq!(g.zone_of(g.from_local_km(0.9, 0.1)).unwrap(), 2);
        assert_eq!(g.zone_of(g.from_local_km(0.1, 0.9)).unwrap(), 6);
        assert_eq!(g.zone_of(g.from_local_km(4.0, 4.0)).unwrap(), 25);
        assert_eq!(g.dummy_zone(), 26);
        assert_eq!(g.action_count(), 26);
    }

    #[test]
    fn outside_points_are_rejected() {
        let g = grid();
        assert!(g.zone_of(g.from_local_km(-0.1, 1.0)).is_err());
        assert!(g.zone_of(g.from_local_km(1.0, 4.1)).is_err());
    }

    #[test]
    fn centers_round_trip() {
        let g = grid();
        for z in 1..=g.zone_count() {
            assert_eq!(g.zone_of(g.zone_center(z).unwrap()).unwrap(), z);
        }
        assert!(g.zone_center(0).is_err());
        assert!(g.zone_center(26).is_err());
    }

    #[test]
    fn distance_basics() {
        let g = grid();
        let a = g.origin;
        assert_eq!(euclidean_km(a, a), 0.0);
        let b = g.from_local_km(0.8, 0.0);
        let d = euclidean_km(a, b);
        assert!((d - 0.8).abs() < 0.008, "{d}");
        let c = g.from_local_km(2.3, 3.1);
        assert_eq!(euclidean_km(a, c), euclidean_km(c, a));
    }
}
