use std::io::{Read, Write};

use rand::Rng;

use crate::model::{Action, EncodedState, STATE_DIM};

use super::LearnerError;

/// One `(s, a, r, s', done)` transition; `r` is in raw reward units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: EncodedState,
    pub action: Action,
    pub reward: f64,
    pub next_state: EncodedState,
    pub done: bool,
}

/// Ring buffer of experiences plus an optional pinned set that is never
/// evicted (used to keep offline data alongside online experience).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    ring: Vec<Experience>,
    next: usize,
    pinned: Vec<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, ring: Vec::with_capacity(capacity.min(1 << 16)), next: 0, pinned: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Online experiences currently held.
    pub fn ring_len(&self) -> usize {
        self.ring.len()
    }

    pub fn len(&self) -> usize {
        self.ring.len() + self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The ring has reached capacity.
    pub fn is_full(&self) -> bool {
        self.capacity > 0 && self.ring.len() == self.capacity
    }

    pub fn pin(&mut self, data: &[Experience]) {
        self.pinned.extend_from_slice(data);
    }

    /// Appends, evicting the oldest online experience when full.
    pub fn push(&mut self, e: Experience) {
        if self.capacity == 0 {
            return;
        }
        if self.ring.len() < self.capacity {
            self.ring.push(e);
        } else {
            self.ring[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Index `i` covers pinned entries first, then the ring in storage order.
    pub fn get(&self, i: usize) -> &Experience {
        if i < self.pinned.len() {
            &self.pinned[i]
        } else {
            &self.ring[i - self.pinned.len()]
        }
    }

    /// Online experiences from oldest to newest.
    pub fn ordered(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.ring.len() < self.capacity { 0 } else { self.next };
        self.ring[split..].iter().chain(&self.ring[..split])
    }

    /// `m` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..m).map(|_| rng.gen_range(0..self.len())).collect()
    }
}

/// Column names of the transition file.
pub fn dataset_header() -> Vec<String> {
    let mut h: Vec<String> = (0..STATE_DIM).map(|i| format!("s{i}")).collect();
    h.push("a".into());
    h.push("r".into());
    h.extend((0..STATE_DIM).map(|i| format!("s'{i}")));
    h.push("done".into());
    h
}

pub fn write_dataset<W: Write>(writer: W, data: &[Experience]) -> Result<(), LearnerError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header())?;
    let mut row: Vec<String> = Vec::with_capacity(2 * STATE_DIM + 3);
    for e in data {
        row.clear();
        row.extend(e.state.iter().map(|x| x.to_string()));
        row.push(e.action.0.to_string());
        row.push(e.reward.to_string());
        row.extend(e.next_state.iter().map(|x| x.to_string()));
        row.push(u8::from(e.done).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| LearnerError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<Experience>, LearnerError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != dataset_header() {
        return Err(LearnerError::Dataset { line: 1, msg: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |msg: &str| LearnerError::Dataset { line, msg: msg.to_string() };
        let num = |k: usize| -> Result<f64, LearnerError> {
            rec[k].trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(&format!("column {} is not a number", k + 1)))
        };
        // states parse straight to f32 so written values round-trip exactly
        let feature = |k: usize| -> Result<f32, LearnerError> {
            rec[k].trim().parse::<f32>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(&format!("column {} is not a number", k + 1)))
        };
        let mut state = [0f32; STATE_DIM];
        let mut next_state = [0f32; STATE_DIM];
        for k in 0..STATE_DIM {
            state[k] = feature(k)?;
            next_state[k] = feature(STATE_DIM + 2 + k)?;
        }
        let action: u16 = rec[STATE_DIM].trim().parse().map_err(|_| bad("action is not an integer"))?;
        let done = match rec[2 * STATE_DIM + 2].trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad("done must be 0 or 1")),
        };
        out.push(Experience { state, action: Action(action), reward: num(STATE_DIM + 1)?, next_state, done });
    }
    Ok(out)
}
