use std::path::Path;

use serde::Deserialize;

use super::{EnvError, Environment, MomdpSpec, State, Transition};
use crate::mo::ValueVector;

/// The bundled convex Deep Sea Treasure layout.
pub const DEFAULT_DST_MAP: &str = include_str!("../../data/dst_convex.toml");

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Treasure {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
struct RawMap {
    #[serde(default)]
    name: Option<String>,
    grid: Vec<String>,
    #[serde(default)]
    treasures: Vec<Treasure>,
}

/// Grid layout with blocked cells, a start cell and a treasure table.
#[derive(Debug, Clone, PartialEq)]
pub struct DstMap {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    blocked: Vec<bool>,
    pub start: (usize, usize),
    pub treasures: Vec<Treasure>,
}

impl DstMap {
    pub fn parse(text: &str) -> Result<DstMap, EnvError> {
        let raw: RawMap = toml::from_str(text).map_err(|e| EnvError::InvalidMap(e.to_string()))?;
        let rows = raw.grid.len();
        if rows == 0 {
            return Err(EnvError::InvalidMap("grid has no rows".into()));
        }
        let cols = raw.grid[0].chars().count();
        if cols == 0 {
            return Err(EnvError::InvalidMap("grid has no columns".into()));
        }
        let mut blocked = vec![false; rows * cols];
        let mut start = None;
        for (r, line) in raw.grid.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(EnvError::InvalidMap(format!(
                    "row {r} has {} cells, expected {cols}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => blocked[r * cols + c] = true,
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(EnvError::InvalidMap("more than one start cell".into()));
                        }
                    }
                    other => return Err(EnvError::InvalidMap(format!("unknown cell '{other}' at ({r}, {c})"))),
                }
            }
        }
        let start = start.ok_or_else(|| EnvError::InvalidMap("no start cell".into()))?;
        let map = DstMap { name: raw.name.unwrap_or_else(|| "custom".into()), rows, cols, blocked, start, treasures: raw.treasures };
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<DstMap, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::InvalidMap(format!("{}: {e}", path.display())))?;
        DstMap::parse(&text)
    }

    pub fn bundled() -> DstMap {
        DstMap::parse(DEFAULT_DST_MAP).expect("bundled map is valid")
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.treasures.is_empty() {
            return Err(EnvError::InvalidMap("no treasures".into()));
        }
        for (i, t) in self.treasures.iter().enumerate() {
            if t.row >= self.rows || t.col >= self.cols {
                return Err(EnvError::InvalidMap(format!("treasure {i} at ({}, {}) is off the grid", t.row, t.col)));
            }
            if self.is_blocked(t.row, t.col) {
                return Err(EnvError::InvalidMap(format!("treasure {i} sits on a blocked cell")));
            }
            if (t.row, t.col) == self.start {
                return Err(EnvError::InvalidMap("start cell holds a treasure".into()));
            }
            if !t.value.is_finite() {
                return Err(EnvError::InvalidMap(format!("treasure {i} value is not finite")));
            }
            if self.treasures[..i].iter().any(|o| (o.row, o.col) == (t.row, t.col)) {
                return Err(EnvError::InvalidMap(format!("duplicate treasure at ({}, {})", t.row, t.col)));
            }
        }
        let mut ordered: Vec<&Treasure> = self.treasures.iter().collect();
        ordered.sort_by_key(|t| (t.row, t.col));
        if ordered.windows(2).any(|p| p[1].value <= p[0].value) {
            return Err(EnvError::InvalidMap("treasure values must strictly increase with depth".into()));
        }
        Ok(())
    }

    pub fn is_blocked(&self, row: usize, col: usize) -> bool {
        self.blocked[row * self.cols + col]
    }

    pub fn treasure_at(&self, row: usize, col: usize) -> Option<f64> {
        self.treasures.iter().find(|t| t.row == row && t.col == col).map(|t| t.value)
    }

    /// Cell reached by `action`; moves off the grid or into the floor stay put.
    pub fn neighbour(&self, (row, col): (usize, usize), action: usize) -> (usize, usize) {
        let (r, c) = (row as isize, col as isize);
        let (nr, nc) = match action {
            UP => (r - 1, c),
            DOWN => (r + 1, c),
            LEFT => (r, c - 1),
            _ => (r, c + 1),
        };
        if nr < 0 || nc < 0 || nr as usize >= self.rows || nc as usize >= self.cols {
            return (row, col);
        }
        let (nr, nc) = (nr as usize, nc as usize);
        if self.is_blocked(nr, nc) {
            (row, col)
        } else {
            (nr, nc)
        }
    }
}

/// Deep Sea Treasure: reward `[treasure, -1]` per step, four moves.
#[derive(Debug, Clone)]
pub struct DstEnv {
    map: DstMap,
    spec: MomdpSpec,
    pos: (usize, usize),
    steps: usize,
    done: bool,
}

impl DstEnv {
    pub fn new(map: DstMap, horizon: usize, gamma: f64) -> Result<DstEnv, EnvError> {
        map.validate()?;
        let id = format!("dst:{}:h{}", map.name, horizon);
        let spec = MomdpSpec::new(id, map.rows * map.cols, 4, 2, horizon, gamma)?;
        let pos = map.start;
        Ok(DstEnv { map, spec, pos, steps: 0, done: false })
    }

    pub fn map(&self) -> &DstMap {
        &self.map
    }

    pub fn encode(&self, (row, col): (usize, usize)) -> State {
        (row * self.map.cols + col) as State
    }

    pub fn decode(&self, s: State) -> (usize, usize) {
        let s = s as usize;
        (s / self.map.cols, s % self.map.cols)
    }
}

impl Environment for DstEnv {
    fn spec(&self) -> &MomdpSpec {
        &self.spec
    }

    fn reset(&mut self) -> State {
        self.pos = self.map.start;
        self.steps = 0;
        self.done = false;
        self.encode(self.pos)
    }

    fn step(&mut self, action: usize) -> Result<Transition, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 4 {
            return Err(EnvError::InvalidAction { action, count: 4 });
        }
        let state = self.encode(self.pos);
        let next = self.map.neighbour(self.pos, action);
        let treasure = self.map.treasure_at(next.0, next.1);
        let step_index = self.steps;
        self.pos = next;
        self.steps += 1;
        let timeout = self.steps >= self.spec.horizon;
        self.done = treasure.is_some() || timeout;
        Ok(Transition {
            state,
            action,
            next_state: self.encode(next),
            reward: ValueVector::new(vec![treasure.unwrap_or(0.0), -1.0]).expect("finite reward"),
            terminal: self.done,
            truncated: treasure.is_none() && timeout,
            step_index,
        })
    }
}
