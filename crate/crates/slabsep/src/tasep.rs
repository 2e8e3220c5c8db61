//! Exact event-driven simulation of the TASEP with open boundaries, the
//! basic coupling of two copies under shared clocks, and the disagreement
//! process with second-class particles.
//!
//! The single-copy simulator keeps the set of enabled transitions (hoppable
//! bulk pairs plus boundary events) and samples the next event from the
//! total-rate exponential; memorylessness makes this exactly the continuous
//! time chain, with no discretization anywhere. The coupled simulator rings
//! one rate-1 clock per bulk bond and one clock per boundary, applying each
//! ring to both copies regardless of occupancy, which is the canonical
//! coupling and preserves the componentwise order pathwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive, BoundaryParams, Phase};
use crate::rng::Pcg64;

/// Occupancy sequence over sites `1..=N`; `occ[i]` is site `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration(pub Vec<u8>);

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration(vec![0; n])
    }

    pub fn full(n: usize) -> Self {
        Configuration(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Site occupancy, 1-based.
    pub fn site(&self, x: usize) -> u8 {
        self.0[x - 1]
    }

    pub fn particles(&self) -> usize {
        self.0.iter().map(|v| *v as usize).sum()
    }

    /// Componentwise domination `self >= other`.
    pub fn dominates(&self, other: &Configuration) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// Bit encoding with bit `i` = occupancy of site `i + 1`; matches the
    /// oracle's state indexing.
    pub fn to_bits(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, v)| acc | (*v as usize) << i)
    }

    pub fn from_bits(state: usize, n: usize) -> Self {
        Configuration((0..n).map(|i| (state >> i & 1) as u8).collect())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::ConfigurationLength {
                got: self.len(),
                expected: n,
            });
        }
        if self.0.iter().any(|v| *v > 1) {
            return Err(Error::InvalidParameter("occupancy entries must be 0/1".into()));
        }
        Ok(())
    }
}

/// Three-valued sequence of the disagreement process: 1 where both coupled
/// copies hold a particle, 2 where they disagree, 0 where both are empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementState(pub Vec<u8>);

impl DisagreementState {
    pub fn second_class_count(&self) -> usize {
        self.0.iter().filter(|v| **v == 2).count()
    }

    /// Upper copy: occupied wherever the state is nonzero.
    pub fn eta(&self) -> Configuration {
        Configuration(self.0.iter().map(|v| (*v >= 1) as u8).collect())
    }

    /// Lower copy: occupied only at first-class sites.
    pub fn zeta(&self) -> Configuration {
        Configuration(self.0.iter().map(|v| (*v == 1) as u8).collect())
    }
}

/// `xi(x) = 1{eta(x) = zeta(x) = 1} + 2 * 1{eta(x) != zeta(x)}`; rejects
/// pairs that are not componentwise ordered.
pub fn disagreement(eta: &Configuration, zeta: &Configuration) -> Result<DisagreementState> {
    if !eta.dominates(zeta) {
        return Err(Error::UnorderedPair);
    }
    Ok(DisagreementState(
        eta.0
            .iter()
            .zip(&zeta.0)
            .map(|(e, z)| if e != z { 2 } else { *e })
            .collect(),
    ))
}

/// An effective transition of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Enter,
    Exit,
    /// Hop from `site` to `site + 1` (1-based).
    Hop(usize),
}

/// Ordered event log with optional sampled snapshots. Replaying the log from
/// `eta0` reproduces each snapshot exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub eta0: Configuration,
    pub events: Vec<(f64, EventKind)>,
    pub snapshots: Vec<(f64, Configuration)>,
}

impl Trajectory {
    /// Applies the event log to `eta0` and returns the state at each
    /// recorded snapshot time.
    pub fn replay(&self) -> Result<Vec<(f64, Configuration)>> {
        let mut eta = self.eta0.clone();
        let mut out = Vec::with_capacity(self.snapshots.len());
        let mut snap_iter = self.snapshots.iter().peekable();
        let mut last_t = 0.0;
        for &(t, kind) in &self.events {
            if t < last_t {
                return Err(Error::InvalidParameter("event times not increasing".into()));
            }
            while let Some((st, _)) = snap_iter.peek() {
                if *st < t {
                    out.push((*st, eta.clone()));
                    snap_iter.next();
                } else {
                    break;
                }
            }
            apply_event(&mut eta, kind)?;
            last_t = t;
        }
        for (st, _) in snap_iter {
            out.push((*st, eta.clone()));
        }
        Ok(out)
    }
}

fn apply_event(eta: &mut Configuration, kind: EventKind) -> Result<()> {
    let n = eta.len();
    let ok = match kind {
        EventKind::Enter => {
            let ok = eta.0[0] == 0;
            eta.0[0] = 1;
            ok
        }
        EventKind::Exit => {
            let ok = eta.0[n - 1] == 1;
            eta.0[n - 1] = 0;
            ok
        }
        EventKind::Hop(x) => {
            let ok = x >= 1 && x < n && eta.0[x - 1] == 1 && eta.0[x] == 0;
            if ok {
                eta.0[x - 1] = 0;
                eta.0[x] = 1;
            }
            ok
        }
    };
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "inapplicable event {kind:?}"
        )));
    }
    Ok(())
}

/// What [`simulate`] should record beyond the final state.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub record_events: bool,
    /// Sorted times at which to snapshot the configuration.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug)]
pub struct SimResult {
    pub eta: Configuration,
    pub trajectory: Option<Trajectory>,
    pub events: u64,
}

/// Indexed set of hoppable pairs for O(1) insert/remove/uniform-sample.
struct PairSet {
    members: Vec<usize>,
    slot: Vec<usize>, // site -> index in members, or usize::MAX
}

impl PairSet {
    fn new(n: usize) -> Self {
        PairSet {
            members: Vec::with_capacity(n),
            slot: vec![usize::MAX; n + 1],
        }
    }

    fn contains(&self, x: usize) -> bool {
        self.slot[x] != usize::MAX
    }

    fn insert(&mut self, x: usize) {
        if !self.contains(x) {
            self.slot[x] = self.members.len();
            self.members.push(x);
        }
    }

    fn remove(&mut self, x: usize) {
        let i = self.slot[x];
        if i == usize::MAX {
            return;
        }
        let last = *self.members.last().unwrap();
        self.members.swap_remove(i);
        self.slot[last] = if last == x { usize::MAX } else { i };
        if last != x {
            self.slot[x] = usize::MAX;
        }
    }

    fn len(&self) -> usize {
        self.members.len()
    }
}

struct Kmc {
    eta: Configuration,
    pairs: PairSet,
    alpha: f64,
    beta: f64,
}

impl Kmc {
    fn new(eta: Configuration, params: BoundaryParams) -> Self {
        let n = eta.len();
        let mut pairs = PairSet::new(n);
        for x in 1..n {
            if eta.0[x - 1] == 1 && eta.0[x] == 0 {
                pairs.insert(x);
            }
        }
        Kmc {
            eta,
            pairs,
            alpha: params.alpha,
            beta: params.beta,
        }
    }

    fn n(&self) -> usize {
        self.eta.len()
    }

    fn entry_enabled(&self) -> bool {
        self.eta.0[0] == 0
    }

    fn exit_enabled(&self) -> bool {
        self.eta.0[self.n() - 1] == 1
    }

    fn total_rate(&self) -> f64 {
        self.pairs.len() as f64
            + if self.entry_enabled() { self.alpha } else { 0.0 }
            + if self.exit_enabled() { self.beta } else { 0.0 }
    }

    fn refresh_pair(&mut self, x: usize) {
        if x < 1 || x >= self.n() {
            return;
        }
        if self.eta.0[x - 1] == 1 && self.eta.0[x] == 0 {
            self.pairs.insert(x);
        } else {
            self.pairs.remove(x);
        }
    }

    /// Samples and applies the next event; returns its kind.
    fn step(&mut self, rng: &mut Pcg64) -> EventKind {
        let n = self.n();
        let l = self.pairs.len() as f64;
        let total = self.total_rate();
        debug_assert!(total > 0.0, "TASEP with open boundaries never stalls");
        let r = rng.open01() * total;
        let kind = if r < l {
            EventKind::Hop(self.pairs.members[rng.below(self.pairs.len())])
        } else if self.entry_enabled() && r < l + self.alpha {
            EventKind::Enter
        } else {
            EventKind::Exit
        };
        match kind {
            EventKind::Enter => {
                self.eta.0[0] = 1;
                self.refresh_pair(1);
                self.refresh_pair(2);
            }
            EventKind::Exit => {
                self.eta.0[n - 1] = 0;
                self.refresh_pair(n - 1);
            }
            EventKind::Hop(x) => {
                self.eta.0[x - 1] = 0;
                self.eta.0[x] = 1;
                self.refresh_pair(x - 1);
                self.refresh_pair(x);
                self.refresh_pair(x + 1);
            }
        }
        kind
    }
}

/// Evolves `eta0` to time `t_end`; exact given the seed, deterministic given
/// `(inputs, seed)`.
pub fn simulate(
    eta0: &Configuration,
    params: BoundaryParams,
    t_end: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimResult> {
    eta0.check_len(eta0.len())?;
    if eta0.is_empty() {
        return Err(Error::InvalidParameter("empty configuration".into()));
    }
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative horizon {t_end}")));
    }
    let mut rng = Pcg64::seed_from(seed);
    let mut kmc = Kmc::new(eta0.clone(), params);
    let mut t = 0.0;
    let mut events: Vec<(f64, EventKind)> = Vec::new();
    let mut snapshots: Vec<(f64, Configuration)> = Vec::new();
    let mut snap_idx = 0usize;
    let mut count = 0u64;
    loop {
        let dt = rng.exp(kmc.total_rate());
        let t_next = t + dt;
        while snap_idx < opts.snapshot_times.len() && opts.snapshot_times[snap_idx] <= t_next.min(t_end)
        {
            snapshots.push((opts.snapshot_times[snap_idx], kmc.eta.clone()));
            snap_idx += 1;
        }
        if t_next > t_end {
            break;
        }
        t = t_next;
        let kind = kmc.step(&mut rng);
        count += 1;
        if opts.record_events {
            events.push((t, kind));
        }
    }
    let trajectory = (opts.record_events || !opts.snapshot_times.is_empty()).then(|| Trajectory {
        n: eta0.len(),
        eta0: eta0.clone(),
        events,
        snapshots,
    });
    Ok(SimResult {
        eta: kmc.eta,
        trajectory,
        events: count,
    })
}

/// Time-averaged occupancy per site over `[burn, t_end]`.
pub fn time_averaged_density(
    eta0: &Configuration,
    params: BoundaryParams,
    t_end: f64,
    burn: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = eta0.len();
    let mut rng = Pcg64::seed_from(seed);
    let mut kmc = Kmc::new(eta0.clone(), params);
    let mut t = 0.0;
    let mut acc = vec![0.0f64; n];
    loop {
        let dt = rng.exp(kmc.total_rate());
        let t_next = (t + dt).min(t_end);
        let lo = t.max(burn);
        if t_next > lo {
            let w = t_next - lo;
            for (a, v) in acc.iter_mut().zip(&kmc.eta.0) {
                *a += w * *v as f64;
            }
        }
        if t + dt > t_end {
            break;
        }
        t += dt;
        kmc.step(&mut rng);
    }
    let span = t_end - burn;
    Ok(acc.into_iter().map(|a| a / span).collect())
}

/// Time-averaged distribution over the `2^N` states after an eventburn-in;
/// the Monte Carlo side of the stationary-law comparison. Runs until
/// `measure_events` post-burn-in events have been consumed.
pub fn stationary_state_histogram(
    eta0: &Configuration,
    params: BoundaryParams,
    burn_events: u64,
    measure_events: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = eta0.len();
    if n > 25 {
        return Err(Error::InvalidParameter(
            "state histogram limited to n <= 25".into(),
        ));
    }
    let mut rng = Pcg64::seed_from(seed);
    let mut kmc = Kmc::new(eta0.clone(), params);
    let mut state = kmc.eta.to_bits();
    let mut acc = vec![0.0f64; 1 << n];
    let mut total = 0.0;
    for i in 0..burn_events + measure_events {
        let dt = rng.exp(kmc.total_rate());
        if i >= burn_events {
            acc[state] += dt;
            total += dt;
        }
        kmc.step(&mut rng);
        state = kmc.eta.to_bits();
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// A ring of one of the coupled clocks. `Bulk(x)` moves a particle from `x`
/// to `x + 1` in each copy where that is legal; `Entry` sets site 1 occupied
/// and `Exit` sets site N empty in both copies unconditionally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClockEvent {
    Bulk(usize),
    Entry,
    Exit,
}

/// Raw clock log of a coupled run; replaying it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub n: usize,
    pub eta0: Configuration,
    pub zeta0: Configuration,
    pub events: Vec<(f64, ClockEvent)>,
}

#[derive(Debug, Clone, Default)]
pub struct CoupledOptions {
    pub record_events: bool,
    /// Sample the number of second-class particles at these times.
    pub trace_times: Vec<f64>,
    /// Keep simulating to the horizon even after coalescence.
    pub run_full_horizon: bool,
}

#[derive(Debug, Clone)]
pub struct CouplingResult {
    /// First time the disagreement state holds no second-class particles,
    /// `None` if that never happened before the horizon.
    pub tau: Option<f64>,
    pub eta: Configuration,
    pub zeta: Configuration,
    pub second_class_trace: Option<Vec<(f64, usize)>>,
    pub trajectory: Option<CoupledTrajectory>,
}

pub fn apply_clock_event(eta: &mut Configuration, kind: ClockEvent) -> bool {
    let n = eta.len();
    match kind {
        ClockEvent::Entry => {
            let changed = eta.0[0] == 0;
            eta.0[0] = 1;
            changed
        }
        ClockEvent::Exit => {
            let changed = eta.0[n - 1] == 1;
            eta.0[n - 1] = 0;
            changed
        }
        ClockEvent::Bulk(x) => {
            if eta.0[x - 1] == 1 && eta.0[x] == 0 {
                eta.0[x - 1] = 0;
                eta.0[x] = 1;
                true
            } else {
                false
            }
        }
    }
}

/// Basic coupling of two copies started from an ordered pair, run to the
/// first of coalescence or `horizon`.
pub fn coupled_simulate(
    eta0: &Configuration,
    zeta0: &Configuration,
    params: BoundaryParams,
    horizon: f64,
    seed: u64,
    opts: &CoupledOptions,
) -> Result<CouplingResult> {
    if !eta0.dominates(zeta0) {
        return Err(Error::UnorderedPair);
    }
    let n = eta0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty configuration".into()));
    }
    let mut rng = Pcg64::seed_from(seed);
    let mut eta = eta0.clone();
    let mut zeta = zeta0.clone();
    let mut disagree = eta
        .0
        .iter()
        .zip(&zeta.0)
        .filter(|(a, b)| a != b)
        .count();
    let mut tau = (disagree == 0).then_some(0.0);

    let lambda = (n as f64 - 1.0) + params.alpha + params.beta;
    let mut t = 0.0;
    let mut events: Vec<(f64, ClockEvent)> = Vec::new();
    let mut trace: Vec<(f64, usize)> = Vec::new();
    let mut trace_idx = 0usize;

    loop {
        if tau.is_some() && !opts.run_full_horizon {
            break;
        }
        let dt = rng.exp(lambda);
        let t_next = t + dt;
        while trace_idx < opts.trace_times.len() && opts.trace_times[trace_idx] <= t_next.min(horizon)
        {
            trace.push((opts.trace_times[trace_idx], disagree));
            trace_idx += 1;
        }
        if t_next > horizon {
            break;
        }
        t = t_next;
        let r = rng.open01() * lambda;
        let kind = if n > 1 && r < n as f64 - 1.0 {
            ClockEvent::Bulk(rng.below(n - 1) + 1)
        } else if r < n as f64 - 1.0 + params.alpha {
            ClockEvent::Entry
        } else {
            ClockEvent::Exit
        };
        // Affected sites before/after to keep the disagreement count O(1);
        // index 0 marks an unused slot.
        let span: [usize; 2] = match kind {
            ClockEvent::Bulk(x) => [x, x + 1],
            ClockEvent::Entry => [1, 0],
            ClockEvent::Exit => [n, 0],
        };
        let count = |eta: &Configuration, zeta: &Configuration| {
            span.iter()
                .filter(|&&x| x >= 1 && eta.0[x - 1] != zeta.0[x - 1])
                .count()
        };
        let before = count(&eta, &zeta);
        apply_clock_event(&mut eta, kind);
        apply_clock_event(&mut zeta, kind);
        let after = count(&eta, &zeta);
        disagree = disagree + after - before;
        if opts.record_events {
            events.push((t, kind));
        }
        if disagree == 0 && tau.is_none() {
            tau = Some(t);
        }
    }

    Ok(CouplingResult {
        tau,
        eta,
        zeta,
        second_class_trace: (!opts.trace_times.is_empty()).then_some(trace),
        trajectory: opts.record_events.then(|| CoupledTrajectory {
            n,
            eta0: eta0.clone(),
            zeta0: zeta0.clone(),
            events,
        }),
    })
}

/// Conservative default horizon: an order of magnitude above the predicted
/// mixing scale of the phase, so timeouts signal bugs rather than bad luck.
pub fn default_horizon(params: BoundaryParams, n: usize) -> f64 {
    let d = derive(params);
    let n_f = n as f64;
    match d.phase {
        Phase::HighDensity => 20.0 * d.c_high.unwrap() * n_f,
        Phase::LowDensity => 20.0 * d.c_low.unwrap() * n_f,
        _ => 50.0 * n_f * n_f / d.rho_alpha,
    }
}

#[derive(Debug, Clone)]
pub struct MixingUpperEstimate {
    /// Empirical (1 - epsilon)-quantile of the coalescence time from the
    /// extremal pair; estimates an upper bound for `t_mix(epsilon)`.
    pub s: f64,
    /// Order-statistic confidence interval (central ~95%).
    pub ci: (f64, f64),
    pub taus: Vec<f64>,
    pub timed_out: usize,
    pub horizon: f64,
}

/// Runs `replicas` couplings from the extremal pair (all-ones, all-zeros)
/// and returns the empirical `(1 - epsilon)`-quantile of the coalescence
/// time with a binomial order-statistic interval. Fails when more than an
/// `epsilon` fraction timed out, since then the quantile is unresolved.
pub fn mixing_upper_estimate(
    params: BoundaryParams,
    n: usize,
    epsilon: f64,
    replicas: usize,
    seed: u64,
    horizon: Option<f64>,
) -> Result<MixingUpperEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    if replicas == 0 {
        return Err(Error::InvalidParameter("no replicas".into()));
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(params, n));
    let full = Configuration::full(n);
    let empty = Configuration::empty(n);
    let mut taus = Vec::with_capacity(replicas);
    let mut timed_out = 0usize;
    for r in 0..replicas {
        let out = coupled_simulate(
            &full,
            &empty,
            params,
            horizon,
            crate::rng::replica_seed(seed, r as u64),
            &CoupledOptions::default(),
        )?;
        match out.tau {
            Some(tau) => taus.push(tau),
            None => timed_out += 1,
        }
    }
    let frac = timed_out as f64 / replicas as f64;
    if frac > epsilon {
        return Err(Error::TimeoutFractionExceeded {
            fraction: frac,
            epsilon,
            horizon,
        });
    }
    let mut sorted = taus.clone();
    sorted.sort_by(f64::total_cmp);
    // Timed-out replicas sit above every finite tau; account for them when
    // ranking the quantile.
    let total = replicas;
    let rank = ((1.0 - epsilon) * total as f64).ceil() as usize;
    let rank = rank.clamp(1, total);
    let q = |k: usize| -> f64 {
        if k > sorted.len() {
            horizon
        } else {
            sorted[k - 1]
        }
    };
    let s = q(rank);
    let half = 1.96 * (total as f64 * epsilon * (1.0 - epsilon)).sqrt();
    let lo_rank = ((rank as f64 - half).floor().max(1.0)) as usize;
    let hi_rank = ((rank as f64 + half).ceil() as usize).clamp(1, total);
    let ci = (q(lo_rank), q(hi_rank));
    Ok(MixingUpperEstimate {
        s,
        ci,
        taus,
        timed_out,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn params(alpha: f64, beta: f64) -> BoundaryParams {
        BoundaryParams::new(alpha, beta).unwrap()
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let eta0 = Configuration::from_bits(0b1011, 4);
        let out = simulate(&eta0, params(0.5, 0.5), 0.0, 1, &SimOptions::default()).unwrap();
        assert_eq!(out.eta, eta0);
        assert_eq!(out.events, 0);
    }

    #[test]
    fn single_site_occupation_frequency() {
        // N = 1 is a two-state chain: long-run occupation of site 1 is
        // alpha / (alpha + beta).
        let (a, b) = (0.7, 0.3);
        let dens = time_averaged_density(
            &Configuration::empty(1),
            params(a, b),
            20_000.0,
            100.0,
            7,
        )
        .unwrap();
        assert!((dens[0] - a / (a + b)).abs() < 0.01, "{dens:?}");
    }

    #[test]
    fn n2_state_frequencies_match_oracle_stationary() {
        let p = params(1.0, 1.0);
        let hist =
            stationary_state_histogram(&Configuration::empty(2), p, 50_000, 1_000_000, 3).unwrap();
        let exact = oracle::stationary_exact(p, 2, 12).unwrap();
        // Balance solve gives (0.2, 0.4, 0.2, 0.2) in bit order; the MC
        // estimate must sit on top of it.
        for (h, e) in hist.iter().zip([0.2, 0.4, 0.2, 0.2]) {
            assert!((h - e).abs() < 0.01, "{hist:?}");
        }
        assert!(oracle::tv_distance(&hist, &exact.probs) < 0.01);
    }

    #[test]
    fn trajectory_replay_reproduces_snapshots() {
        let eta0 = Configuration::empty(5);
        let opts = SimOptions {
            record_events: true,
            snapshot_times: vec![0.5, 1.5, 4.0, 9.0],
        };
        let out = simulate(&eta0, params(0.6, 0.2), 10.0, 99, &opts).unwrap();
        let traj = out.trajectory.unwrap();
        let replayed = traj.replay().unwrap();
        assert_eq!(replayed.len(), traj.snapshots.len());
        for (a, b) in replayed.iter().zip(&traj.snapshots) {
            assert_eq!(a, b);
        }
        for w in traj.events.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn identical_seed_gives_identical_trajectory_bytes() {
        let eta0 = Configuration::full(6);
        let opts = SimOptions {
            record_events: true,
            snapshot_times: vec![1.0, 2.0],
        };
        let a = simulate(&eta0, params(0.4, 0.8), 25.0, 1234, &opts).unwrap();
        let b = simulate(&eta0, params(0.4, 0.8), 25.0, 1234, &opts).unwrap();
        let ja = serde_json::to_vec(&a.trajectory).unwrap();
        let jb = serde_json::to_vec(&b.trajectory).unwrap();
        assert_eq!(ja, jb);
        let c = simulate(&eta0, params(0.4, 0.8), 25.0, 1235, &opts).unwrap();
        assert_ne!(ja, serde_json::to_vec(&c.trajectory).unwrap());
    }

    #[test]
    fn disagreement_formula_and_precondition() {
        let eta = Configuration(vec![1, 1, 0]);
        let zeta = Configuration(vec![1, 0, 0]);
        let xi = disagreement(&eta, &zeta).unwrap();
        assert_eq!(xi.0, vec![1, 2, 0]);
        assert_eq!(xi.eta(), eta);
        assert_eq!(xi.zeta(), zeta);

        let same = disagreement(&eta, &eta).unwrap();
        assert_eq!(same.second_class_count(), 0);

        let r = disagreement(&Configuration(vec![0, 1]), &Configuration(vec![1, 0]));
        assert!(matches!(r, Err(Error::UnorderedPair)));
    }

    #[test]
    fn coupling_equal_starts_coalesce_immediately() {
        let eta = Configuration::from_bits(0b101, 3);
        let out = coupled_simulate(
            &eta,
            &eta,
            params(0.5, 0.5),
            10.0,
            5,
            &CoupledOptions::default(),
        )
        .unwrap();
        assert_eq!(out.tau, Some(0.0));
    }

    #[test]
    fn coupling_n1_mean_tau_is_boundary_race() {
        // From (1, 0) at N = 1 the pair coalesces at the first boundary
        // ring: mean 1 / (alpha + beta).
        let (a, b) = (0.3, 0.9);
        let reps = 4000;
        let mut sum = 0.0;
        for r in 0..reps {
            let out = coupled_simulate(
                &Configuration::full(1),
                &Configuration::empty(1),
                params(a, b),
                1e6,
                crate::rng::replica_seed(11, r),
                &CoupledOptions::default(),
            )
            .unwrap();
            sum += out.tau.unwrap();
        }
        let mean = sum / reps as f64;
        let expect = 1.0 / (a + b);
        // tau is Exp(a+b): sd = mean; 4 standard errors.
        assert!(
            (mean - expect).abs() < 4.0 * expect / (reps as f64).sqrt(),
            "{mean} vs {expect}"
        );
    }

    #[test]
    fn coupling_n3_mean_tau_matches_absorption_solve() {
        let p = params(1.0, 1.0);
        let exact = oracle::coupled_absorption_expect(p, 3, 0b111, 0, 12).unwrap();
        let reps = 4000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in 0..reps {
            let out = coupled_simulate(
                &Configuration::full(3),
                &Configuration::empty(3),
                p,
                1e6,
                crate::rng::replica_seed(77, r),
                &CoupledOptions::default(),
            )
            .unwrap();
            let tau = out.tau.unwrap();
            sum += tau;
            sumsq += tau * tau;
        }
        let mean = sum / reps as f64;
        let sd = ((sumsq / reps as f64 - mean * mean).max(0.0)).sqrt();
        let half = 1.96 * sd / (reps as f64).sqrt();
        assert!(
            (mean - exact).abs() < half + 0.02 * exact,
            "mean {mean} vs exact {exact} (ci half-width {half})"
        );
    }

    #[test]
    fn ordering_preserved_along_coupled_runs() {
        // Random ordered pairs, checked at every event via a replay.
        let mut rng = crate::rng::Pcg64::seed_from(2024);
        for rep in 0..300 {
            let n = 2 + rng.below(5);
            let mut eta = Configuration::empty(n);
            let mut zeta = Configuration::empty(n);
            for i in 0..n {
                let r = rng.below(4);
                eta.0[i] = (r >= 1) as u8;
                zeta.0[i] = (r >= 3) as u8;
            }
            let out = coupled_simulate(
                &eta,
                &zeta,
                params(0.45, 0.65),
                8.0,
                crate::rng::replica_seed(31, rep),
                &CoupledOptions {
                    record_events: true,
                    run_full_horizon: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let traj = out.trajectory.unwrap();
            let mut e = eta.clone();
            let mut z = zeta.clone();
            for &(_, kind) in &traj.events {
                apply_clock_event(&mut e, kind);
                apply_clock_event(&mut z, kind);
                assert!(e.dominates(&z), "ordering broke at rep {rep}");
            }
            assert_eq!(e, out.eta);
            assert_eq!(z, out.zeta);
        }
    }

    #[test]
    fn unordered_initial_pair_rejected() {
        let r = coupled_simulate(
            &Configuration(vec![0, 1]),
            &Configuration(vec![1, 0]),
            params(0.5, 0.5),
            1.0,
            1,
            &CoupledOptions::default(),
        );
        assert!(matches!(r, Err(Error::UnorderedPair)));
    }

    #[test]
    fn mixing_estimate_n1_exponential_quantile() {
        // alpha = beta = 1: tau ~ Exp(2), so the 3/4-quantile is ln(4)/2.
        let est = mixing_upper_estimate(params(1.0, 1.0), 1, 0.25, 8000, 5, None).unwrap();
        let expect = (4.0f64).ln() / 2.0;
        assert!((est.s - expect).abs() < 0.05, "{} vs {expect}", est.s);
        assert!(est.ci.0 <= est.s && est.s <= est.ci.1);
        assert_eq!(est.timed_out, 0);
    }

    #[test]
    fn mixing_estimate_quantile_definition() {
        // If every replica coalesced by time t*, the estimate is at most t*.
        let est = mixing_upper_estimate(params(0.9, 0.9), 2, 0.25, 400, 9, None).unwrap();
        let t_star = est.taus.iter().cloned().fold(0.0, f64::max);
        assert!(est.s <= t_star);
    }

    #[test]
    fn mixing_estimate_dominates_exact_mixing_time() {
        // Coupling gives an upper bound; against the exact oracle at N = 8
        // the estimate should land above it in essentially every run.
        let p = params(0.6, 0.2);
        let exact = oracle::mixing_time_exact(p, 8, 0.25, 12).unwrap().t_mix;
        let mut wins = 0;
        let runs = 20;
        for k in 0..runs {
            let est = mixing_upper_estimate(p, 8, 0.25, 500, 1000 + k, None).unwrap();
            if est.s >= exact {
                wins += 1;
            }
        }
        assert!(wins >= 19, "upper estimate beat the oracle only {wins}/{runs} times");
    }

    #[test]
    fn generator_fidelity_small_n() {
        // Empirical jump counts out of each state over a long run against
        // rate * holding time, within 4 Poisson standard errors.
        let n = 4;
        let p = params(0.55, 0.45);
        let gen = oracle::generator(p, n, 12).unwrap();
        let opts = SimOptions {
            record_events: true,
            snapshot_times: vec![],
        };
        let out = simulate(&Configuration::empty(n), p, 40_000.0, 17, &opts).unwrap();
        let traj = out.trajectory.unwrap();
        let m = 1usize << n;
        let mut hold = vec![0.0f64; m];
        let mut jumps = vec![std::collections::HashMap::<usize, u64>::new(); m];
        let mut eta = Configuration::empty(n);
        let mut t_prev = 0.0;
        for &(t, kind) in &traj.events {
            let s = eta.to_bits();
            hold[s] += t - t_prev;
            apply_event(&mut eta, kind).unwrap();
            *jumps[s].entry(eta.to_bits()).or_insert(0) += 1;
            t_prev = t;
        }
        for s in 0..m {
            if hold[s] < 100.0 {
                continue;
            }
            for &(tgt, rate) in &gen.rates[s] {
                let expect = rate * hold[s];
                let got = *jumps[s].get(&tgt).unwrap_or(&0) as f64;
                assert!(
                    (got - expect).abs() <= 4.0 * expect.sqrt() + 1.0,
                    "state {s:#b} -> {tgt:#b}: {got} vs {expect}"
                );
            }
            // No transitions outside the generator's support.
            for (tgt, _) in &jumps[s] {
                assert!(gen.rates[s].iter().any(|(x, _)| x == tgt));
            }
        }
    }
}
