use serde::{Deserialize, Serialize};

use crate::model::{euclidean_km, GeoPoint, ZoneId};

use super::{Station, StationId, Timetable, TransitError, TransitGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitParams {
    #[serde(default = "default_walk_kmh")]
    pub walk_kmh: f64,
    /// Entry/exit stations considered per door-to-door query; `None` for all.
    #[serde(default = "default_nearest")]
    pub nearest_stations: Option<usize>,
}

fn default_walk_kmh() -> f64 {
    3.6
}

fn default_nearest() -> Option<usize> {
    Some(5)
}

impl Default for TransitParams {
    fn default() -> Self {
        Self { walk_kmh: default_walk_kmh(), nearest_stations: default_nearest() }
    }
}

impl TransitParams {
    pub fn validate(&self) -> Result<(), TransitError> {
        if !(self.walk_kmh.is_finite() && self.walk_kmh > 0.0) {
            return Err(TransitError::Config(format!("transit.walk_kmh must be positive, got {}", self.walk_kmh)));
        }
        if self.nearest_stations == Some(0) {
            return Err(TransitError::Config("transit.nearest_stations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Best drop-off station for a destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationChoice {
    pub station: StationId,
    pub point: GeoPoint,
    /// Transit plus final walk, in minutes.
    pub post_minutes: f64,
}

/// Timetable graph with all-pairs station times and walking.
#[derive(Debug, Clone)]
pub struct TransitNetwork {
    timetable: Timetable,
    graph: TransitGraph,
    /// Station-to-station minutes, row-major over timetable order.
    minutes: Vec<f64>,
    /// Station indices per zone (index 0 unused).
    zone_stations: Vec<Vec<usize>>,
    params: TransitParams,
}

impl TransitNetwork {
    pub fn new(timetable: Timetable, zone_count: u32, params: TransitParams) -> Result<Self, TransitError> {
        params.validate()?;
        let graph = TransitGraph::build(&timetable)?;
        let s = timetable.stations.len();
        let mut minutes = vec![f64::INFINITY; s * s];
        for i in 0..s {
            let (dist, _) = graph.shortest_from(i);
            for j in 0..s {
                minutes[i * s + j] = dist[j] / 60.0;
            }
        }
        let mut zone_stations = vec![Vec::new(); zone_count as usize + 1];
        for (i, st) in timetable.stations.iter().enumerate() {
            let z = st.zone as usize;
            if z == 0 || z > zone_count as usize {
                return Err(TransitError::Build(format!("station {} has zone {} outside 1..={zone_count}", st.id, st.zone)));
            }
            zone_stations[z].push(i);
        }
        Ok(Self { timetable, graph, minutes, zone_stations, params })
    }

    pub fn timetable(&self) -> &Timetable {
        &self.timetable
    }

    pub fn graph(&self) -> &TransitGraph {
        &self.graph
    }

    pub fn params(&self) -> &TransitParams {
        &self.params
    }

    pub fn stations(&self) -> &[Station] {
        &self.timetable.stations
    }

    pub fn zone_count(&self) -> u32 {
        (self.zone_stations.len() - 1) as u32
    }

    pub fn zone_has_station(&self, zone: ZoneId) -> bool {
        self.zone_stations.get(zone as usize).is_some_and(|v| !v.is_empty())
    }

    /// Minutes between two stations by index; infinite when unreachable.
    pub fn station_minutes(&self, from: usize, to: usize) -> f64 {
        self.minutes[from * self.timetable.stations.len() + to]
    }

    pub fn walk_minutes(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        euclidean_km(a, b) / self.params.walk_kmh * 60.0
    }

    fn nearest(&self, p: GeoPoint) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.timetable.stations.len()).collect();
        let d: Vec<f64> = self.timetable.stations.iter().map(|s| euclidean_km(p, s.point)).collect();
        idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        if let Some(k) = self.params.nearest_stations {
            idx.truncate(k);
        }
        idx
    }

    /// Fastest trip from `dropoff` to `dest` by walking and transit.
    pub fn door_to_door_eta(&self, dropoff: GeoPoint, dest: GeoPoint) -> f64 {
        let mut best = self.walk_minutes(dropoff, dest);
        let exits = self.nearest(dest);
        let exit_walk: Vec<f64> = exits.iter().map(|&e| self.walk_minutes(self.timetable.stations[e].point, dest)).collect();
        for entry in self.nearest(dropoff) {
            let first = self.walk_minutes(dropoff, self.timetable.stations[entry].point);
            for (k, &exit) in exits.iter().enumerate() {
                best = best.min(first + self.station_minutes(entry, exit) + exit_walk[k]);
            }
        }
        best
    }

    /// Per-station time to `dest`: ride to any exit station then walk.
    fn onward_minutes(&self, dest: GeoPoint) -> Vec<f64> {
        let s = self.timetable.stations.len();
        let walk: Vec<f64> = self.timetable.stations.iter().map(|st| self.walk_minutes(st.point, dest)).collect();
        (0..s)
            .map(|i| (0..s).map(|e| self.station_minutes(i, e) + walk[e]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    fn best_of(&self, zone: ZoneId, onward: &[f64]) -> Option<StationChoice> {
        let mut best: Option<(usize, f64)> = None;
        for &i in self.zone_stations.get(zone as usize)? {
            if best.map_or(true, |(_, m)| onward[i] < m) {
                best = Some((i, onward[i]));
            }
        }
        best.map(|(i, m)| {
            let st = &self.timetable.stations[i];
            StationChoice { station: st.id, point: st.point, post_minutes: m }
        })
    }

    /// The station in `zone` with the fastest onward trip to `dest`
    /// (ties to the earlier station); `None` for stationless zones.
    pub fn best_station_in_zone(&self, zone: ZoneId, dest: GeoPoint) -> Option<StationChoice> {
        if !self.zone_has_station(zone) {
            return None;
        }
        self.best_of(zone, &self.onward_minutes(dest))
    }

    /// Best station of every zone for one destination, computed once.
    pub fn destination_table(&self, dest: GeoPoint) -> DestinationTable {
        let onward = self.onward_minutes(dest);
        DestinationTable { choices: (0..self.zone_stations.len() as u32).map(|z| self.best_of(z, &onward)).collect() }
    }
}

/// Per-zone drop-off stations for one destination.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationTable {
    choices: Vec<Option<StationChoice>>,
}

impl DestinationTable {
    pub fn get(&self, zone: ZoneId) -> Option<&StationChoice> {
        self.choices.get(zone as usize).and_then(Option::as_ref)
    }

    /// Zones with a station, ascending.
    pub fn zones(&self) -> impl Iterator<Item = (ZoneId, &StationChoice)> {
        self.choices.iter().enumerate().filter_map(|(z, c)| c.as_ref().map(|c| (z as ZoneId, c)))
    }
}
