//! Semi-dense step reward over orientation deviation.
//!
//! A move earns +0.1 when it lands on the minimal deviation achievable from
//! the previous head cell (all ties rewarded), -0.2 when the deviation
//! strictly grew, 0 otherwise. Reaching deviation zero replaces the step
//! reward with the terminal +1 (an additive variant is available for
//! ablation).

use serde::{Deserialize, Serialize};

use super::grid::{od2_deg, Action, AngularGrid, GridCell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub step_optimal: f64,
    pub step_worse: f64,
    pub step_other: f64,
    pub r_target: f64,
    pub max_steps: usize,
    /// When set, reaching the target adds `r_target` on top of the step
    /// reward instead of replacing it.
    pub terminal_additive: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            step_optimal: 0.1,
            step_worse: -0.2,
            step_other: 0.0,
            r_target: 1.0,
            max_steps: 20,
            terminal_additive: false,
        }
    }
}

/// Head cells reachable in one action, with the action that produces each.
/// Clamping may collapse several actions onto the same cell.
pub fn reachable_states(grid: &AngularGrid, head: GridCell) -> [(Action, GridCell); 8] {
    Action::ALL.map(|a| (a, grid.apply(head, a)))
}

/// Smallest squared deviation achievable from `head` in one action.
pub fn min_reachable_od2(grid: &AngularGrid, talker: GridCell, head: GridCell) -> i64 {
    reachable_states(grid, head)
        .iter()
        .map(|(_, next)| od2_deg(talker, *next))
        .min()
        .expect("eight actions")
}

/// Reward for the transition `head_before` -> `head_after` produced by one
/// action under `grid` clamping.
pub fn step_reward(
    grid: &AngularGrid,
    cfg: &RewardConfig,
    talker: GridCell,
    head_before: GridCell,
    head_after: GridCell,
) -> f64 {
    let od2_after = od2_deg(talker, head_after);
    let step = if od2_after == min_reachable_od2(grid, talker, head_before) {
        cfg.step_optimal
    } else if od2_after > od2_deg(talker, head_before) {
        cfg.step_worse
    } else {
        cfg.step_other
    };
    if od2_after == 0 {
        if cfg.terminal_additive {
            step + cfg.r_target
        } else {
            cfg.r_target
        }
    } else {
        step
    }
}
