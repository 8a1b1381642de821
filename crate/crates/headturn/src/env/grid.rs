//! Angular grid geometry: cells, actions, orientation deviation.
//!
//! Azimuth runs -90..+90 in 15 degree steps (signed index -6..6), elevation
//! takes the five values {-45, -20, 0, +20, +45} (signed index -2..2). The
//! desk profile is the centered 7x3 sub-grid. Note the elevation values are
//! not uniformly spaced, so degree math always goes through the lookup.

use serde::{Deserialize, Serialize};

/// Elevation degrees by `el_index + 2`.
const EL_DEG: [i32; 5] = [-45, -20, 0, 20, 45];
/// Azimuth step in degrees per index.
const AZ_STEP_DEG: i32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub az_index: i8,
    pub el_index: i8,
}

impl GridCell {
    pub const CENTER: GridCell = GridCell { az_index: 0, el_index: 0 };

    pub fn new(az_index: i8, el_index: i8) -> Self {
        Self { az_index, el_index }
    }

    pub fn az_deg(&self) -> i32 {
        AZ_STEP_DEG * self.az_index as i32
    }

    pub fn el_deg(&self) -> i32 {
        EL_DEG[(self.el_index + 2) as usize]
    }

    /// Chebyshev index distance from the center cell.
    pub fn chebyshev_from_center(&self) -> u32 {
        (self.az_index.unsigned_abs() as u32).max(self.el_index.unsigned_abs() as u32)
    }
}

/// The 8 head rotations, one azimuth and/or elevation index step each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    E = 0,
    W = 1,
    N = 2,
    S = 3,
    NE = 4,
    NW = 5,
    SE = 6,
    SW = 7,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::E,
        Action::W,
        Action::N,
        Action::S,
        Action::NE,
        Action::NW,
        Action::SE,
        Action::SW,
    ];

    /// (azimuth index step, elevation index step).
    pub fn delta(&self) -> (i8, i8) {
        match self {
            Action::E => (1, 0),
            Action::W => (-1, 0),
            Action::N => (0, 1),
            Action::S => (0, -1),
            Action::NE => (1, 1),
            Action::NW => (-1, 1),
            Action::SE => (1, -1),
            Action::SW => (-1, -1),
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

/// Rectangular index box of head orientations / talker locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngularGrid {
    /// Azimuth indices span [-az_half, az_half].
    pub az_half: i8,
    /// Elevation indices span [-el_half, el_half].
    pub el_half: i8,
}

impl AngularGrid {
    /// 13 azimuths x 5 elevations = 65 cells.
    pub fn full() -> Self {
        Self { az_half: 6, el_half: 2 }
    }

    /// Reduced 7x3 grid: azimuth -45..+45, elevation -20..+20.
    pub fn desk() -> Self {
        Self { az_half: 3, el_half: 1 }
    }

    pub fn n_az(&self) -> usize {
        2 * self.az_half as usize + 1
    }

    pub fn n_el(&self) -> usize {
        2 * self.el_half as usize + 1
    }

    pub fn n_cells(&self) -> usize {
        self.n_az() * self.n_el()
    }

    pub fn contains(&self, c: GridCell) -> bool {
        c.az_index.abs() <= self.az_half && c.el_index.abs() <= self.el_half
    }

    pub fn clamp(&self, c: GridCell) -> GridCell {
        GridCell::new(
            c.az_index.clamp(-self.az_half, self.az_half),
            c.el_index.clamp(-self.el_half, self.el_half),
        )
    }

    /// Row-major cells, azimuth fastest, both axes ascending.
    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        let (a, e) = (self.az_half, self.el_half);
        (-e..=e).flat_map(move |el| (-a..=a).map(move |az| GridCell::new(az, el)))
    }

    /// Talker start cells: every cell except the center.
    pub fn start_cells(&self) -> Vec<GridCell> {
        self.cells().filter(|c| *c != GridCell::CENTER).collect()
    }

    /// Dense index of a cell in `cells()` order.
    pub fn flat_index(&self, c: GridCell) -> usize {
        debug_assert!(self.contains(c));
        (c.el_index + self.el_half) as usize * self.n_az() + (c.az_index + self.az_half) as usize
    }

    /// Head cell after an action, per-axis clamped to the grid bounds.
    pub fn apply(&self, head: GridCell, action: Action) -> GridCell {
        let (da, de) = action.delta();
        self.clamp(GridCell::new(head.az_index + da, head.el_index + de))
    }
}

/// Squared orientation deviation in integer degrees, exact for comparisons.
pub fn od2_deg(talker: GridCell, head: GridCell) -> i64 {
    let daz = (talker.az_deg() - head.az_deg()) as i64;
    let del = (talker.el_deg() - head.el_deg()) as i64;
    daz * daz + del * del
}

/// Orientation deviation: Euclidean distance in degrees between the talker
/// direction and the head direction, per-axis.
pub fn orientation_deviation(talker: GridCell, head: GridCell) -> f64 {
    (od2_deg(talker, head) as f64).sqrt()
}

/// Minimal number of actions to move the head from center onto `talker`.
pub fn shortest_path_length(talker: GridCell) -> u32 {
    talker.chebyshev_from_center()
}

/// Index-space Chebyshev distance; the remaining actions to reach `b` from
/// `a` with diagonal moves allowed.
pub fn chebyshev(a: GridCell, b: GridCell) -> u32 {
    let daz = (a.az_index as i32 - b.az_index as i32).unsigned_abs();
    let del = (a.el_index as i32 - b.el_index as i32).unsigned_abs();
    daz.max(del)
}
