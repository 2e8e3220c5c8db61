//! The growth-interface picture: a configuration on `N` sites is a staircase
//! of `N + 1` lattice points anchored on the upper diagonal, with an `e1`
//! step per empty site and a `-e2` step per particle. Corner growth in the
//! slab environment evolves the staircase exactly like the open-boundary
//! dynamics: the cell at an inner corner point `v` completes at
//! `C(v) = T(G0, v) + omega(v)` and replaces `v` by `v + (1,1)`. The corner
//! at the anchor is the entry event (an upper-diagonal cell, rate alpha),
//! the corner at the tail is the exit event (lower-diagonal, rate beta), and
//! interior corners are bulk hops.
//!
//! Completion of the cell `(i, j)` is the event in which the particle with
//! label `j + 1` moves from site `i - j` to `i - j + 1`, where the k-th
//! particle to enter carries label `k` and a particle initially at site `s`
//! carries label `1 - s`. Site 0 -> 1 is entry; site N -> N+1 is exit.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Point;
use crate::tasep::Configuration;

use super::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    /// `e1`; the site is empty.
    Right,
    /// `-e2`; the site holds a particle.
    Down,
}

/// Staircase `g^0..g^N` anchored at `p_{anchor_x}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthInterface {
    pub anchor_x: i64,
    pub steps: Vec<Step>,
}

impl GrowthInterface {
    pub fn n(&self) -> usize {
        self.steps.len()
    }

    /// The `N + 1` staircase points in order.
    pub fn points(&self) -> Vec<Point> {
        let mut pts = Vec::with_capacity(self.n() + 1);
        let mut at = Point::new(self.anchor_x, self.anchor_x);
        pts.push(at);
        for s in &self.steps {
            at = match s {
                Step::Right => Point::new(at.x + 1, at.y),
                Step::Down => Point::new(at.x, at.y - 1),
            };
            pts.push(at);
        }
        pts
    }
}

/// Encodes a configuration as its staircase: empty site -> `e1`,
/// particle -> `-e2`.
pub fn interface_from_config(eta: &Configuration, anchor_x: i64) -> GrowthInterface {
    GrowthInterface {
        anchor_x,
        steps: eta
            .0
            .iter()
            .map(|v| if *v == 0 { Step::Right } else { Step::Down })
            .collect(),
    }
}

/// Decodes the staircase back to its configuration.
pub fn config_from_interface(g: &GrowthInterface) -> Configuration {
    Configuration(
        g.steps
            .iter()
            .map(|s| match s {
                Step::Right => 0,
                Step::Down => 1,
            })
            .collect(),
    )
}

/// One corner completion. `index` is the staircase index (0 = entry,
/// N = exit, otherwise the hop site), `cell` the consumed lattice cell,
/// `label` the moving particle, `site_from` its position before the move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub time: f64,
    pub cell: Point,
    pub index: usize,
    pub label: i64,
    pub site_from: usize,
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub interface: GrowthInterface,
    pub events: Option<Vec<GrowthEvent>>,
    pub event_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueuedCorner {
    time: f64,
    index: usize,
}

impl Eq for QueuedCorner {}

impl Ord for QueuedCorner {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for QueuedCorner {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct CornerGrowth {
    points: Vec<Point>,
    steps: Vec<Step>,
    labels: Vec<i64>, // per site 1..=N at [site]; i64::MIN means empty
    next_label: i64,
    heap: BinaryHeap<Reverse<QueuedCorner>>,
}

impl CornerGrowth {
    fn n(&self) -> usize {
        self.steps.len()
    }

    /// Entry corner needs site 1 empty, exit corner site N occupied, and an
    /// interior corner at index k the hoppable pattern (particle at k, hole
    /// at k+1).
    fn corner_enabled(&self, k: usize) -> bool {
        let n = self.n();
        if k == 0 {
            self.steps[0] == Step::Right
        } else if k == n {
            self.steps[n - 1] == Step::Down
        } else {
            self.steps[k - 1] == Step::Down && self.steps[k] == Step::Right
        }
    }

    fn push(&mut self, env: &Environment, k: usize, enabled_at: f64) {
        let w = env.weight_unchecked(self.points[k]);
        self.heap.push(Reverse(QueuedCorner {
            time: enabled_at + w,
            index: k,
        }));
    }

    /// Applies the completion at index `k`; returns (label, site_from) and
    /// the indices that may have become corners.
    fn fire(&mut self, k: usize) -> (i64, usize, [Option<usize>; 2]) {
        let n = self.n();
        debug_assert!(self.corner_enabled(k));
        let (label, site_from) = if k == 0 {
            self.steps[0] = Step::Down;
            let label = self.next_label;
            self.next_label += 1;
            self.labels[1] = label;
            (label, 0)
        } else if k == n {
            self.steps[n - 1] = Step::Right;
            let label = self.labels[n];
            self.labels[n] = i64::MIN;
            (label, n)
        } else {
            self.steps[k - 1] = Step::Right;
            self.steps[k] = Step::Down;
            let label = self.labels[k];
            self.labels[k] = i64::MIN;
            self.labels[k + 1] = label;
            (label, k)
        };
        self.points[k] = Point::new(self.points[k].x + 1, self.points[k].y + 1);
        let left = (k >= 1).then(|| k - 1);
        let right = (k < n).then(|| k + 1);
        (label, site_from, [left, right])
    }
}

/// Evolves the interface to time `t` by filling growth corners in completion
/// order; exact and deterministic given the environment.
pub fn evolve_interface(
    env: &Environment,
    g0: &GrowthInterface,
    t: f64,
    record: bool,
) -> Result<EvolveResult> {
    let Some(slab) = env.slab() else {
        return Err(Error::InvalidParameter(
            "interface evolution requires slab mode".into(),
        ));
    };
    if slab.n != g0.n() as i64 {
        return Err(Error::ConfigurationLength {
            got: g0.n(),
            expected: slab.n as usize,
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative horizon {t}")));
    }
    let n = g0.n();
    let mut labels = vec![i64::MIN; n + 1];
    for (site, step) in g0.steps.iter().enumerate() {
        if *step == Step::Down {
            // A particle initially at site s carries pseudo-label 1 - s.
            labels[site + 1] = 1 - (site as i64 + 1);
        }
    }
    let mut cg = CornerGrowth {
        points: g0.points(),
        steps: g0.steps.clone(),
        labels,
        next_label: 1,
        heap: BinaryHeap::new(),
    };
    for k in 0..=n {
        if cg.corner_enabled(k) {
            cg.push(env, k, 0.0);
        }
    }

    let mut events = record.then(Vec::new);
    let mut count = 0u64;
    while let Some(Reverse(top)) = cg.heap.peek().copied() {
        if top.time > t {
            break;
        }
        cg.heap.pop();
        let cell = cg.points[top.index];
        let (label, site_from, candidates) = cg.fire(top.index);
        count += 1;
        if let Some(log) = events.as_mut() {
            log.push(GrowthEvent {
                time: top.time,
                cell,
                index: top.index,
                label,
                site_from,
            });
        }
        for k in candidates.into_iter().flatten() {
            // A neighbor index can only have become a corner through this
            // completion, so its clock starts now.
            if cg.corner_enabled(k) && was_just_enabled(&cg, top.index, k) {
                cg.push(env, k, top.time);
            }
        }
    }

    Ok(EvolveResult {
        interface: GrowthInterface {
            anchor_x: cg.points[0].x,
            steps: cg.steps,
        },
        events,
        event_count: count,
    })
}

/// Whether the corner at `k` was created by the completion at `fired`;
/// corners are never destroyed except by their own completion, so "enabled
/// now and adjacent to the fired index with the toggled step on the shared
/// side" is exactly "newly enabled".
fn was_just_enabled(cg: &CornerGrowth, fired: usize, k: usize) -> bool {
    debug_assert!(cg.corner_enabled(k));
    let n = cg.n();
    if k + 1 == fired {
        // fired toggled steps[k] (or steps[n-1] for the exit candidate).
        true
    } else if k == fired + 1 {
        true
    } else {
        debug_assert!(false, "candidate {k} not adjacent to fired {fired} (n={n})");
        false
    }
}
