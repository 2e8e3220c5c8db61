//! Exact small-instance ground truth: the generator over `{0,1}^N`, its
//! stationary distribution by direct linear algebra, transient laws by
//! uniformization, exact epsilon-mixing times, absorption times of the
//! coupled pair chain, and brute-force last-passage times by path
//! enumeration.
//!
//! State indexing: state `s` encodes the configuration with bit `i` equal to
//! the occupancy of site `i + 1` (so `s = 1` is the configuration `10...0`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lpp::Environment;
use crate::model::{BoundaryParams, Point};

/// Default cap on the segment length; 2^12 = 4096 states keeps dense solves
/// fast. Raise explicitly if you can pay for it (memory grows as 4^N for the
/// matrix routines, and `mixing_time_exact` multiplies 2^N x 2^N matrices).
pub const DEFAULT_STATE_CAP: usize = 12;

/// Uniformization truncation: the Poisson tail mass left out of every
/// transient evaluation is below this.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

/// Sparse conservative rate matrix: `rates[s]` lists `(target, rate)` with
/// positive rates; the diagonal is minus the row sum.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub n_sites: usize,
    pub rates: Vec<Vec<(usize, f64)>>,
}

impl RateMatrix {
    pub fn n_states(&self) -> usize {
        self.rates.len()
    }

    pub fn exit_rate(&self, s: usize) -> f64 {
        self.rates[s].iter().map(|&(_, r)| r).sum()
    }

    /// Largest exit rate; any `Lambda >= this` uniformizes the chain.
    pub fn uniformization_rate(&self) -> f64 {
        (0..self.n_states())
            .map(|s| self.exit_rate(s))
            .fold(0.0, f64::max)
    }

    fn dense(&self) -> DMatrix<f64> {
        let m = self.n_states();
        let mut q = DMatrix::zeros(m, m);
        for (s, row) in self.rates.iter().enumerate() {
            for &(t, r) in row {
                q[(s, t)] += r;
                q[(s, s)] -= r;
            }
        }
        q
    }
}

/// Probability vector over the state space, indexed as documented above.
#[derive(Debug, Clone)]
pub struct DistributionVector {
    pub n_sites: usize,
    pub probs: Vec<f64>,
    /// Residual of the defining linear system (stationary solves) or the
    /// uniformization tail bound (transients).
    pub residual: f64,
}

impl DistributionVector {
    pub fn point_mass(n_sites: usize, state: usize) -> Self {
        let mut probs = vec![0.0; 1 << n_sites];
        probs[state] = 1.0;
        DistributionVector {
            n_sites,
            probs,
            residual: 0.0,
        }
    }

    pub fn check_normalized(&self) -> bool {
        let sum: f64 = self.probs.iter().sum();
        (sum - 1.0).abs() < 1e-12 && self.probs.iter().all(|p| *p >= -1e-15)
    }
}

/// Total variation distance, half the L1 distance.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("segment length is zero".into()));
    }
    if n > cap {
        return Err(Error::StateCapExceeded { n, cap });
    }
    Ok(())
}

/// Builds the generator: bulk hops `eta -> eta^{x,x+1}` at rate 1 when site x
/// is occupied and x+1 empty, entry `eta -> eta^1` at rate alpha when site 1
/// is empty, exit `eta -> eta^N` at rate beta when site N is occupied.
pub fn generator(params: BoundaryParams, n: usize, cap: usize) -> Result<RateMatrix> {
    check_cap(n, cap)?;
    let m = 1usize << n;
    let mut rates = Vec::with_capacity(m);
    for s in 0..m {
        let mut row = Vec::new();
        if s & 1 == 0 {
            row.push((s | 1, params.alpha));
        }
        if s >> (n - 1) & 1 == 1 {
            row.push((s & !(1 << (n - 1)), params.beta));
        }
        for x in 0..n - 1 {
            if s >> x & 1 == 1 && s >> (x + 1) & 1 == 0 {
                row.push((s & !(1 << x) | 1 << (x + 1), 1.0));
            }
        }
        rates.push(row);
    }
    Ok(RateMatrix { n_sites: n, rates })
}

/// Solves `pi Q = 0`, `sum pi = 1` by dense LU. The chain is irreducible, so
/// the system has a unique solution; the reported residual is `max |pi Q|`.
pub fn stationary_exact(params: BoundaryParams, n: usize, cap: usize) -> Result<DistributionVector> {
    let q = generator(params, n, cap)?;
    let m = q.n_states();
    // Unknown pi as a column vector: solve Q^T pi = 0 with the last equation
    // replaced by the normalization.
    let mut a = q.dense().transpose();
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(m);
    b[m - 1] = 1.0;
    let lu = a.lu();
    let pi = lu
        .solve(&b)
        .ok_or_else(|| Error::InvalidParameter("stationary solve: singular system".into()))?;

    let dense_q = q.dense();
    let resid = (pi.transpose() * &dense_q).abs().max();
    Ok(DistributionVector {
        n_sites: n,
        probs: pi.iter().copied().collect(),
        residual: resid,
    })
}

/// Number of uniformized jump terms needed for tail mass below `tail`.
fn poisson_terms(lambda_t: f64, tail: f64) -> usize {
    if lambda_t <= 0.0 {
        return 0;
    }
    // Walk the Poisson pmf until the accumulated mass covers 1 - tail.
    let mut k = 0usize;
    let mut log_p = -lambda_t; // log pmf at k = 0
    let mut acc = log_p.exp();
    let target = 1.0 - tail;
    while acc < target {
        k += 1;
        log_p += lambda_t.ln() - (k as f64).ln();
        acc += log_p.exp();
        if k > 100_000_000 {
            break;
        }
    }
    k
}

/// Exact transient law at time `t` from the initial state, by uniformization
/// with `Lambda = (N-1) + alpha + beta` and truncation below
/// [`UNIFORMIZATION_TAIL`].
pub fn transient(
    params: BoundaryParams,
    n: usize,
    eta0: usize,
    t: f64,
    cap: usize,
) -> Result<DistributionVector> {
    let q = generator(params, n, cap)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    let lambda = (n as f64 - 1.0) + params.alpha + params.beta;
    let m = q.n_states();
    let mut v = vec![0.0; m];
    v[eta0] = 1.0;

    let k_max = poisson_terms(lambda * t, UNIFORMIZATION_TAIL);
    let mut out = vec![0.0; m];
    let mut log_w = -lambda * t;
    let mut tail_covered = log_w.exp();
    axpy(&mut out, log_w.exp(), &v);
    let mut next = vec![0.0; m];
    for k in 1..=k_max {
        // One uniformized step: v <- v P with P = I + Q / Lambda.
        next.copy_from_slice(&v);
        for (s, row) in q.rates.iter().enumerate() {
            let vs = v[s];
            if vs == 0.0 {
                continue;
            }
            for &(tgt, r) in row {
                let p = r / lambda;
                next[tgt] += vs * p;
                next[s] -= vs * p;
            }
        }
        std::mem::swap(&mut v, &mut next);
        log_w += (lambda * t).ln() - (k as f64).ln();
        let w = log_w.exp();
        tail_covered += w;
        axpy(&mut out, w, &v);
    }
    Ok(DistributionVector {
        n_sites: n,
        probs: out,
        residual: (1.0 - tail_covered).max(0.0),
    })
}

fn axpy(acc: &mut [f64], w: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += w * x;
    }
}

/// Result of the exact mixing-time computation.
#[derive(Debug, Clone)]
pub struct MixingTimeExact {
    pub t_mix: f64,
    pub epsilon: f64,
    /// Initial state attaining the worst-case total variation at `t_mix`.
    pub maximizing_state: usize,
    pub bracket: (f64, f64),
}

/// Dense transition matrices at dyadic multiples of a base step, built once
/// and combined by binary powering so arbitrary times cost one matrix product
/// per bisection step instead of a fresh uniformization sum.
struct DyadicPropagator {
    base_dt: f64,
    ladder: Vec<DMatrix<f64>>,
}

impl DyadicPropagator {
    fn build(q: &RateMatrix, lambda: f64, horizon: f64) -> Self {
        let m = q.n_states();
        // Base step short enough that the uniformization sum stays small.
        let base_dt = (1.0 / lambda).min(horizon);
        let k_max = poisson_terms(lambda * base_dt, UNIFORMIZATION_TAIL);
        // P = I + Q/Lambda as a dense matrix.
        let mut p = DMatrix::identity(m, m);
        for (s, row) in q.rates.iter().enumerate() {
            for &(t, r) in row {
                p[(s, t)] += r / lambda;
                p[(s, s)] -= r / lambda;
            }
        }
        let mut base = DMatrix::zeros(m, m);
        let mut term = DMatrix::identity(m, m);
        let mut log_w = -lambda * base_dt;
        base += &term * log_w.exp();
        for k in 1..=k_max {
            term = &term * &p;
            log_w += (lambda * base_dt).ln() - (k as f64).ln();
            base += &term * log_w.exp();
        }
        let mut ladder = vec![base];
        let levels = (horizon / base_dt).log2().ceil().max(0.0) as usize + 1;
        for _ in 0..levels {
            let top = ladder.last().unwrap();
            ladder.push(top * top);
        }
        DyadicPropagator { base_dt, ladder }
    }

    /// Transition matrix at `t`, assembled from the dyadic ladder. `t` is
    /// rounded to the base-step grid; with the base step at most `1/Lambda`
    /// and the bisection tolerance relative, the rounding is harmless.
    fn at(&self, t: f64) -> DMatrix<f64> {
        let m = self.ladder[0].nrows();
        let mut steps = (t / self.base_dt).round() as u64;
        let mut out = DMatrix::identity(m, m);
        let mut level = 0usize;
        while steps > 0 {
            if steps & 1 == 1 {
                out = &out * &self.ladder[level.min(self.ladder.len() - 1)];
            }
            steps >>= 1;
            level += 1;
        }
        out
    }
}

fn worst_tv(p_t: &DMatrix<f64>, pi: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for s in 0..p_t.nrows() {
        let mut acc = 0.0;
        for j in 0..p_t.ncols() {
            acc += (p_t[(s, j)] - pi[j]).abs();
        }
        let tv = 0.5 * acc;
        if tv > best.0 {
            best = (tv, s);
        }
    }
    best
}

/// Exact epsilon-mixing time: the first `t` at which the total variation to
/// stationarity, maximized over all `2^N` initial states, drops below
/// epsilon. Located by bisection to relative tolerance 1e-6; the bracket
/// `[0, 10 N^2 / min(rho_alpha, rho_beta)]` grows automatically if the chain
/// has not mixed by its top.
pub fn mixing_time_exact(
    params: BoundaryParams,
    n: usize,
    epsilon: f64,
    cap: usize,
) -> Result<MixingTimeExact> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    let q = generator(params, n, cap)?;
    let pi = stationary_exact(params, n, cap)?;
    let lambda = (n as f64 - 1.0) + params.alpha + params.beta;

    let rho_a = params.alpha * (1.0 - params.alpha);
    let rho_b = params.beta * (1.0 - params.beta);
    let rho = rho_a.min(rho_b).max(1e-3);
    let mut hi = 10.0 * (n * n) as f64 / rho;

    let mut prop = DyadicPropagator::build(&q, lambda, hi);
    let mut grow_guard = 0;
    while worst_tv(&prop.at(hi), &pi.probs).0 >= epsilon {
        hi *= 2.0;
        prop = DyadicPropagator::build(&q, lambda, hi);
        grow_guard += 1;
        if grow_guard > 20 {
            return Err(Error::InvalidParameter(
                "mixing-time bracket failed to capture the crossing".into(),
            ));
        }
    }

    let mut lo = 0.0f64;
    let mut witness = 0usize;
    // Bisection on the dyadic grid; stops at relative width 1e-6.
    while hi - lo > 1e-6 * hi.max(1.0) && hi - lo > prop.base_dt {
        let mid = 0.5 * (lo + hi);
        let (tv, state) = worst_tv(&prop.at(mid), &pi.probs);
        if tv < epsilon {
            hi = mid;
        } else {
            lo = mid;
            witness = state;
        }
    }
    // Witness at the crossing: the maximizer just below t_mix.
    if lo == 0.0 {
        witness = worst_tv(&prop.at(0.5 * hi), &pi.probs).1;
    }
    Ok(MixingTimeExact {
        t_mix: hi,
        epsilon,
        maximizing_state: witness,
        bracket: (lo, hi),
    })
}

/// Worst-case (over all initial states) total variation to stationarity at a
/// single time; used to assert monotonicity of the computed curve.
pub fn worst_case_tv_at(params: BoundaryParams, n: usize, t: f64, cap: usize) -> Result<(f64, usize)> {
    let pi = stationary_exact(params, n, cap)?;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for s in 0..(1usize << n) {
        let law = transient(params, n, s, t, cap)?;
        let tv = tv_distance(&law.probs, &pi.probs);
        if tv > best.0 {
            best = (tv, s);
        }
    }
    Ok(best)
}

/// Expected coalescence time of the basic coupling started from `(eta, zeta)`,
/// by a direct absorption-time solve on the product chain over all `4^N`
/// ordered pairs. Diagonal states are absorbing; shared clocks per the
/// coupling: one rate-1 clock per bulk bond applied to both copies, one
/// rate-alpha entry clock and one rate-beta exit clock applied to both.
pub fn coupled_absorption_expect(
    params: BoundaryParams,
    n: usize,
    eta0: usize,
    zeta0: usize,
    cap: usize,
) -> Result<f64> {
    check_cap(2 * n, 2 * cap)?;
    let m = 1usize << n;
    let pair = |e: usize, z: usize| e * m + z;
    let nm = m * m;

    // Transient (non-diagonal) states get equations; diagonal absorbs.
    let mut index = vec![usize::MAX; nm];
    let mut states = Vec::new();
    for e in 0..m {
        for z in 0..m {
            if e != z {
                index[pair(e, z)] = states.len();
                states.push((e, z));
            }
        }
    }
    let dim = states.len();
    let mut a = DMatrix::zeros(dim, dim);
    let b = nalgebra::DVector::from_element(dim, -1.0);

    let hop = |s: usize, x: usize| -> usize {
        if s >> x & 1 == 1 && s >> (x + 1) & 1 == 0 {
            s & !(1 << x) | 1 << (x + 1)
        } else {
            s
        }
    };
    for (row, &(e, z)) in states.iter().enumerate() {
        let add = |rate: f64, e2: usize, z2: usize, a: &mut DMatrix<f64>| {
            a[(row, row)] -= rate;
            if e2 != z2 {
                a[(row, index[pair(e2, z2)])] += rate;
            }
        };
        for x in 0..n - 1 {
            add(1.0, hop(e, x), hop(z, x), &mut a);
        }
        add(params.alpha, e | 1, z | 1, &mut a);
        add(
            params.beta,
            e & !(1 << (n - 1)),
            z & !(1 << (n - 1)),
            &mut a,
        );
    }
    let u = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidParameter("absorption solve: singular system".into()))?;
    if eta0 == zeta0 {
        return Ok(0.0);
    }
    Ok(u[index[pair(eta0, zeta0)]])
}

/// Brute-force last-passage time by exhaustive enumeration of admissible
/// up-right paths, endpoint weight excluded, partial sums folded left to
/// match the dynamic program bit for bit.
pub fn lpp_bruteforce(env: &Environment, u: Point, v: Point, budget: u64) -> Result<f64> {
    if !env.contains(u) {
        return Err(Error::OutOfRegion { x: u.x, y: u.y });
    }
    if !env.contains(v) {
        return Err(Error::OutOfRegion { x: v.x, y: v.y });
    }
    if !u.le(&v) {
        return Err(Error::Unreachable { x: v.x, y: v.y });
    }
    let mut paths: u64 = 0;
    let mut best = f64::NEG_INFINITY;
    // Iterative DFS over path prefixes; `sum` excludes the weight at `at`.
    let mut stack = vec![(u, 0.0f64)];
    while let Some((at, sum)) = stack.pop() {
        if at == v {
            paths += 1;
            if paths > budget {
                return Err(Error::PathBudgetExceeded { budget });
            }
            if sum > best {
                best = sum;
            }
            continue;
        }
        let here = sum + env.weight(at)?;
        for step in [Point::new(at.x + 1, at.y), Point::new(at.x, at.y + 1)] {
            if step.le(&v) && env.contains(step) {
                stack.push((step, here));
            }
        }
    }
    if paths == 0 {
        return Err(Error::Unreachable { x: v.x, y: v.y });
    }
    Ok(best)
}

/// Number of admissible paths, same traversal as [`lpp_bruteforce`].
pub fn lpp_path_count(env: &Environment, u: Point, v: Point, budget: u64) -> Result<u64> {
    let mut paths: u64 = 0;
    let mut stack = vec![u];
    while let Some(at) = stack.pop() {
        if at == v {
            paths += 1;
            if paths > budget {
                return Err(Error::PathBudgetExceeded { budget });
            }
            continue;
        }
        for step in [Point::new(at.x + 1, at.y), Point::new(at.x, at.y + 1)] {
            if step.le(&v) && env.contains(step) {
                stack.push(step);
            }
        }
    }
    Ok(paths)
}
