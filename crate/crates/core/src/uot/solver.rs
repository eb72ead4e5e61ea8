use alloc::vec::Vec;

use super::cost::{c_transform, CostMatrix, Side};
use super::divergence::{dual_objective, primal_objective};
use super::plan::{DualPotentials, TransportPlan};
use crate::error::{Error, Result};
use crate::math;
use crate::measures::DiscreteMeasure;

/// Scaling iterations are re-stabilized once a potential drifts this many
/// multiples of `eps` away from the values absorbed into the kernel.
const ABSORB_THRESHOLD: f64 = 50.0;
/// Plan entries below this are flushed to zero.
const PLAN_FLUSH: f64 = 1e-300;
/// See [`Blocks`].
const BLOCK_LINK: f64 = 100.0;
const MAX_BLOCKS: usize = 64;
/// Sweeps into a level before looking for blocks.
const BLOCK_SEARCH_AFTER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps_init: f64,
    pub eps_final: f64,
    pub eps_decay: f64,
    pub max_iters_per_eps: usize,
    pub fixed_point_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_init: 1.0,
            eps_final: 1e-3,
            eps_decay: 0.5,
            max_iters_per_eps: 2000,
            fixed_point_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn with_eps_final(mut self, eps_final: f64) -> Self {
        self.eps_final = eps_final;
        if self.eps_init < eps_final {
            self.eps_init = eps_final;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if !(self.eps_final > 0.0 && self.eps_final.is_finite()) {
            return bad("eps_final", "must be positive");
        }
        if !(self.eps_init >= self.eps_final && self.eps_init.is_finite()) {
            return bad("eps_init", "must be at least eps_final");
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return bad("eps_decay", "must lie in (0, 1)");
        }
        if self.max_iters_per_eps == 0 {
            return bad("max_iters_per_eps", "must be positive");
        }
        if !(self.fixed_point_tol > 0.0) {
            return bad("fixed_point_tol", "must be positive");
        }
        Ok(())
    }

    /// The annealing schedule `eps_init * eps_decay^k`, truncated at `eps_final`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut levels = Vec::new();
        let mut eps = self.eps_init;
        while eps > self.eps_final * (1.0 + 1e-12) {
            levels.push(eps);
            eps *= self.eps_decay;
        }
        levels.push(self.eps_final);
        levels
    }
}

#[derive(Debug, Clone)]
pub struct UotSolution {
    pub plan: TransportPlan,
    /// Potentials after c-transform tightening; exactly dual feasible.
    pub potentials: DualPotentials,
    /// Entropic potentials at `eps_final` from which `plan` is built.
    pub raw_potentials: DualPotentials,
    pub cost: CostMatrix,
    pub primal_value: f64,
    pub dual_value: f64,
    pub eps_final: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `(eps, sweeps)` for every annealing level
    pub level_iterations: Vec<(f64, usize)>,
}

/// Solves the KL-penalized problem
/// `min_gamma <C, gamma> + KL(gamma_0 | mu) + KL(gamma_1 | nu)` by annealed
/// log-domain unbalanced scaling.
///
/// At each level the entropic problem with reference `mu x nu` is solved by
/// alternating exact maximization of its dual: the `phi` update is
/// `phi_i = -eps/(1+eps) log sum_j exp((psi_j - C_ij)/eps) nu_j`, the `psi`
/// update is symmetric, and each sweep ends with the closed-form optimal
/// translation `(phi + t, psi - t)`.
pub fn solve_discrete_uot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
) -> Result<UotSolution> {
    config.validate()?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let cost = CostMatrix::between(mu.points(), nu.points())?;
    let mut state = ScalingState::new(&cost, mu.weights(), nu.weights());

    let levels = config.schedule();
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(levels.len());
    let mut residual = f64::INFINITY;
    for (k, &eps) in levels.iter().enumerate() {
        let (res, iters) = state.run_level(eps, config.max_iters_per_eps, config.fixed_point_tol);
        iterations += iters;
        trace.push((eps, iters));
        residual = res;
        let last = k + 1 == levels.len();
        if last && !(res < config.fixed_point_tol) {
            return Err(Error::NonConvergence {
                eps,
                residual: res,
                iterations: iters,
            });
        }
    }

    let eps = config.eps_final;
    let (n, m) = (cost.rows(), cost.cols());
    let mut gamma = Vec::with_capacity(n * m);
    for i in 0..n {
        let base = state.f[i] + eps * state.log_mu[i];
        for (j, c) in cost.row(i).iter().enumerate() {
            let v = math::exp((base + state.g[j] - c) / eps + state.log_nu[j]);
            gamma.push(if v < PLAN_FLUSH { 0.0 } else { v });
        }
    }
    let plan = TransportPlan::new(n, m, gamma)?;
    let raw_potentials = DualPotentials::new(state.f, state.g);
    let potentials = tighten_potentials(&raw_potentials, &cost, mu, nu);
    let primal_value = primal_objective(&plan, &cost, mu, nu)?;
    let dual_value = dual_objective(&potentials, mu, nu);
    Ok(UotSolution {
        plan,
        potentials,
        raw_potentials,
        cost,
        primal_value,
        dual_value,
        eps_final: eps,
        residual,
        iterations,
        level_iterations: trace,
    })
}

/// Restores exact dual feasibility by a double c-transform.
///
/// Both orders (`phi -> phi^c -> phi^cc` and `psi -> psi^c -> psi^cc`) are
/// tried, each followed by the optimal constant shift `(phi + t, psi - t)`,
/// and the pair with the larger dual objective is kept (first on ties).
pub fn tighten_potentials(
    raw: &DualPotentials,
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> DualPotentials {
    let psi_a = c_transform(&raw.phi, cost, Side::Rows);
    let phi_a = c_transform(&psi_a, cost, Side::Cols);
    let a = best_shift(DualPotentials::new(phi_a, psi_a), mu, nu);

    let phi_b = c_transform(&raw.psi, cost, Side::Cols);
    let psi_b = c_transform(&phi_b, cost, Side::Rows);
    let b = best_shift(DualPotentials::new(phi_b, psi_b), mu, nu);

    if dual_objective(&b, mu, nu) > dual_objective(&a, mu, nu) {
        b
    } else {
        a
    }
}

fn best_shift(p: DualPotentials, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> DualPotentials {
    let t = optimal_translation(&p.phi, &p.psi, mu.weights(), nu.weights());
    if t.is_finite() {
        p.shifted(t)
    } else {
        p
    }
}

fn log_weights(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&x| math::ln(x)).collect()
}

/// `t = 1/2 log(sum mu e^{-phi} / sum nu e^{-psi})` maximizes the dual along
/// `(phi + t, psi - t)`.
fn optimal_translation(phi: &[f64], psi: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let a = math::log_sum_exp(phi.iter().zip(mu).map(|(p, w)| math::ln(*w) - p));
    let b = math::log_sum_exp(psi.iter().zip(nu).map(|(q, w)| math::ln(*w) - q));
    0.5 * (a - b)
}

/// Over-relaxation of the scaling updates. The first sweeps of a level run
/// plain (`omega = 1`) to estimate the linear rate `theta` of the residual;
/// afterwards `omega = 2 / (1 + sqrt(1 - theta))`. If the residual grows far
/// above its value at the switch, the level falls back to plain sweeps.
struct Relaxation {
    omega: f64,
    history: Vec<f64>,
    at_switch: f64,
    locked: bool,
}

const RELAX_WARMUP: usize = 20;
const RELAX_SPAN: usize = 10;
const RELAX_MAX: f64 = 1.9;

impl Relaxation {
    fn new() -> Self {
        Self {
            omega: 1.0,
            history: Vec::with_capacity(RELAX_WARMUP),
            at_switch: f64::INFINITY,
            locked: false,
        }
    }

    fn observe(&mut self, residual: f64) {
        if self.locked {
            return;
        }
        if self.omega > 1.0 {
            if !(residual < 10.0 * self.at_switch) {
                self.omega = 1.0;
                self.locked = true;
            }
            return;
        }
        self.history.push(residual);
        if self.history.len() < RELAX_WARMUP {
            return;
        }
        let k = self.history.len();
        let (old, new) = (self.history[k - 1 - RELAX_SPAN], self.history[k - 1]);
        self.locked = true;
        if old > 0.0 && new > 0.0 && new < old {
            let theta = math::pow(new / old, 1.0 / RELAX_SPAN as f64);
            self.omega = (2.0 / (1.0 + math::sqrt(1.0 - theta))).min(RELAX_MAX);
            self.at_switch = new;
            self.locked = false;
        }
    }
}

struct ScalingState<'a> {
    cost: &'a CostMatrix,
    mu: &'a [f64],
    nu: &'a [f64],
    log_mu: Vec<f64>,
    log_nu: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    // potentials absorbed into `kernel`
    f_bar: Vec<f64>,
    g_bar: Vec<f64>,
    kernel: Vec<f64>,
}

impl<'a> ScalingState<'a> {
    fn new(cost: &'a CostMatrix, mu: &'a [f64], nu: &'a [f64]) -> Self {
        let (n, m) = (cost.rows(), cost.cols());
        Self {
            cost,
            mu,
            nu,
            log_mu: log_weights(mu),
            log_nu: log_weights(nu),
            f: alloc::vec![0.0; n],
            g: alloc::vec![0.0; m],
            f_bar: alloc::vec![0.0; n],
            g_bar: alloc::vec![0.0; m],
            kernel: alloc::vec![0.0; n * m],
        }
    }

    fn absorb(&mut self, eps: f64) {
        self.f_bar.copy_from_slice(&self.f);
        self.g_bar.copy_from_slice(&self.g);
        let m = self.cost.cols();
        for (i, row) in self.kernel.chunks_exact_mut(m).enumerate() {
            let fi = self.f_bar[i];
            for ((k, c), gj) in row.iter_mut().zip(self.cost.row(i)).zip(&self.g_bar) {
                *k = math::exp((fi + gj - c) / eps);
            }
        }
    }

    fn drift(&self, eps: f64) -> f64 {
        let df = self
            .f
            .iter()
            .zip(&self.f_bar)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let dg = self
            .g
            .iter()
            .zip(&self.g_bar)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        df.max(dg) / eps
    }

    /// Returns the last sweep's max potential change and the sweep count.
    fn run_level(&mut self, eps: f64, max_iters: usize, tol: f64) -> (f64, usize) {
        let (n, m) = (self.cost.rows(), self.cost.cols());
        let shrink = 1.0 / (1.0 + eps);
        self.absorb(eps);
        let mut weights_g = alloc::vec![0.0; m];
        let mut weights_f = alloc::vec![0.0; n];
        let mut col_acc = alloc::vec![0.0; m];
        let mut f_new = alloc::vec![0.0; n];
        let mut g_new = alloc::vec![0.0; m];
        let mut residual = f64::INFINITY;
        let mut relax = Relaxation::new();
        let mut blocks: Option<Blocks> = None;

        for it in 0..max_iters {
            let omega = relax.omega;
            // phi update
            for j in 0..m {
                weights_g[j] = self.nu[j] * math::exp((self.g[j] - self.g_bar[j]) / eps);
            }
            for i in 0..n {
                let acc = math::dot(&self.kernel[i * m..(i + 1) * m], &weights_g);
                f_new[i] = if acc > 0.0 && acc.is_finite() {
                    (self.f_bar[i] - eps * math::ln(acc)) * shrink
                } else {
                    let lse = math::log_sum_exp(
                        self.cost
                            .row(i)
                            .iter()
                            .zip(&self.g)
                            .zip(&self.log_nu)
                            .map(|((c, gj), ln_nu)| (gj - c) / eps + ln_nu),
                    );
                    -eps * lse * shrink
                };
            }

            if omega != 1.0 {
                for (fn_, f) in f_new.iter_mut().zip(&self.f) {
                    *fn_ = (1.0 - omega) * f + omega * *fn_;
                }
            }
            // psi update
            for i in 0..n {
                weights_f[i] = self.mu[i] * math::exp((f_new[i] - self.f_bar[i]) / eps);
            }
            col_acc.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..n {
                let w = weights_f[i];
                if w == 0.0 {
                    continue;
                }
                let row = &self.kernel[i * m..(i + 1) * m];
                for (a, k) in col_acc.iter_mut().zip(row) {
                    *a += k * w;
                }
            }
            for j in 0..m {
                let acc = col_acc[j];
                g_new[j] = if acc > 0.0 && acc.is_finite() {
                    (self.g_bar[j] - eps * math::ln(acc)) * shrink
                } else {
                    let lse = math::log_sum_exp(
                        (0..n).map(|i| (f_new[i] - self.cost.get(i, j)) / eps + self.log_mu[i]),
                    );
                    -eps * lse * shrink
                };
            }

            if omega != 1.0 {
                for (gn, g) in g_new.iter_mut().zip(&self.g) {
                    *gn = (1.0 - omega) * g + omega * *gn;
                }
            }
            let mut change = 0.0f64;
            match &blocks {
                None => {
                    let t = optimal_translation(&f_new, &g_new, self.mu, self.nu);
                    for (f, fn_) in self.f.iter_mut().zip(&f_new) {
                        let v = fn_ + t;
                        change = change.max((v - *f).abs());
                        *f = v;
                    }
                    for (g, gn) in self.g.iter_mut().zip(&g_new) {
                        let v = gn - t;
                        change = change.max((v - *g).abs());
                        *g = v;
                    }
                }
                Some(b) => {
                    let t = b.translations(self, &f_new, &g_new, eps);
                    for (i, (f, fn_)) in self.f.iter_mut().zip(&f_new).enumerate() {
                        let v = fn_ + t[b.label[i]];
                        change = change.max((v - *f).abs());
                        *f = v;
                    }
                    for (j, (g, gn)) in self.g.iter_mut().zip(&g_new).enumerate() {
                        let v = gn - t[b.label[n + j]];
                        change = change.max((v - *g).abs());
                        *g = v;
                    }
                }
            }
            residual = change;
            relax.observe(residual);
            if residual < tol {
                return (residual, it + 1);
            }
            if !residual.is_finite() {
                return (residual, it + 1);
            }
            if self.drift(eps) > ABSORB_THRESHOLD {
                self.absorb(eps);
            }
            if it + 1 == BLOCK_SEARCH_AFTER {
                blocks = Blocks::find(self, eps);
            }
        }
        (residual, max_iters)
    }
}

/// Groups of rows and columns such that every row and every column sends at
/// most a fraction `BLOCK_LINK * eps` of its plan mass outside its group.
/// Rows are nodes `0..n`, columns `n..n + m`. Mass exchanged between groups
/// moves slowly under plain sweeps, so each group also gets its own
/// translation.
struct Blocks {
    label: Vec<usize>,
    count: usize,
}

impl Blocks {
    /// `None` when everything is one group, when `eps` is too large for the
    /// grouping to matter, or when there are more than `MAX_BLOCKS` groups.
    fn find(state: &ScalingState<'_>, eps: f64) -> Option<Self> {
        let leak = BLOCK_LINK * eps;
        if leak >= 0.5 {
            return None;
        }
        let (n, m) = (state.cost.rows(), state.cost.cols());
        let mut plan = Vec::with_capacity(n * m);
        for i in 0..n {
            let base = (state.f[i] / eps) + state.log_mu[i];
            for (j, c) in state.cost.row(i).iter().enumerate() {
                plan.push(math::exp(base + (state.g[j] - c) / eps + state.log_nu[j]));
            }
        }
        let mut parent: Vec<usize> = (0..n + m).collect();
        fn root(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        // links a node to its largest entries until a `1 - leak` share of its
        // mass is covered
        let mut link = |entries: &mut Vec<(f64, usize)>, node: usize, offset: usize| {
            let total: f64 = entries.iter().map(|e| e.0).sum();
            // every entry the cover needs is at least this large
            let cut = leak * total / entries.len() as f64;
            entries.retain(|e| e.0 >= cut);
            entries.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
            let mut covered = 0.0;
            for &(v, k) in entries.iter() {
                if covered >= (1.0 - leak) * total {
                    break;
                }
                covered += v;
                let (a, b) = (root(&mut parent, node), root(&mut parent, offset + k));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        };
        let mut entries: Vec<(f64, usize)> = Vec::with_capacity(n.max(m));
        for i in 0..n {
            entries.clear();
            entries.extend(plan[i * m..(i + 1) * m].iter().copied().zip(0..m));
            link(&mut entries, i, n);
        }
        for j in 0..m {
            entries.clear();
            entries.extend((0..n).map(|i| (plan[i * m + j], i)));
            link(&mut entries, n + j, 0);
        }
        let mut label = alloc::vec![usize::MAX; n + m];
        let mut count = 0;
        for k in 0..n + m {
            let r = root(&mut parent, k);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            label[k] = label[r];
        }
        if count == 1 || count > MAX_BLOCKS {
            return None;
        }
        Some(Self { label, count })
    }

    /// Block shifts `t_B` applied as `(phi_B + t_B, psi_B - t_B)`, one exact
    /// line search of the entropic dual per block in label order, each seeing
    /// the shifts already chosen for earlier blocks.
    fn translations(
        &self,
        state: &ScalingState<'_>,
        phi: &[f64],
        psi: &[f64],
        eps: f64,
    ) -> Vec<f64> {
        let (n, m) = (phi.len(), psi.len());
        let k = self.count;
        let mut a = alloc::vec![Vec::new(); k];
        let mut b = alloc::vec![Vec::new(); k];
        for (i, (p, w)) in phi.iter().zip(state.mu).enumerate() {
            a[self.label[i]].push(math::ln(*w) - p);
        }
        for (j, (q, w)) in psi.iter().zip(state.nu).enumerate() {
            b[self.label[n + j]].push(math::ln(*w) - q);
        }
        // cross[B * k + C]: plan mass from rows of block B to columns of block C
        let mut cross = alloc::vec![0.0; k * k];
        let wg: Vec<f64> = (0..m)
            .map(|j| state.nu[j] * math::exp((psi[j] - state.g_bar[j]) / eps))
            .collect();
        for i in 0..n {
            let wf = state.mu[i] * math::exp((phi[i] - state.f_bar[i]) / eps);
            let bi = self.label[i];
            let row = &state.kernel[i * m..(i + 1) * m];
            for (j, kij) in row.iter().enumerate() {
                let bj = self.label[n + j];
                if bj != bi {
                    cross[bi * k + bj] += kij * wf * wg[j];
                }
            }
        }
        let mut shifts = alloc::vec![0.0; k];
        for blk in 0..k {
            let la = math::log_sum_exp(a[blk].iter().copied());
            let lb = math::log_sum_exp(b[blk].iter().copied());
            let (mut out, mut inc) = (0.0, 0.0);
            for c in 0..k {
                if c != blk {
                    out += cross[blk * k + c];
                    inc += cross[c * k + blk];
                }
            }
            let t = block_shift(la, lb, out, inc, eps);
            for c in 0..k {
                if c != blk {
                    cross[blk * k + c] *= math::exp(t / eps);
                    cross[c * k + blk] *= math::exp(-t / eps);
                }
            }
            shifts[blk] = t;
        }
        shifts
    }
}

/// Root of `e^{la - t} - e^{lb + t} - out e^{t/eps} + inc e^{-t/eps}`, the
/// derivative of the entropic dual along one block's translation. The
/// function is strictly decreasing, so a bracketed Newton iteration is safe.
fn block_shift(la: f64, lb: f64, out: f64, inc: f64, eps: f64) -> f64 {
    let h = |t: f64| {
        math::exp(la - t) - math::exp(lb + t) - out * math::exp(t / eps) + inc * math::exp(-t / eps)
    };
    let dh = |t: f64| {
        -math::exp(la - t)
            - math::exp(lb + t)
            - out / eps * math::exp(t / eps)
            - inc / eps * math::exp(-t / eps)
    };
    let mut t = 0.5 * (la - lb);
    if out == 0.0 && inc == 0.0 {
        return if t.is_finite() { t } else { 0.0 };
    }
    if !t.is_finite() {
        t = 0.0;
    }
    let (mut lo, mut hi) = (t, t);
    let mut step = eps;
    let mut expansions = 0;
    let rising = h(t) > 0.0;
    while (rising && h(hi) > 0.0) || (!rising && h(lo) < 0.0) {
        expansions += 1;
        if expansions > 100 {
            return 0.0;
        }
        if rising {
            lo = hi;
            hi += step;
        } else {
            hi = lo;
            lo -= step;
        }
        step *= 2.0;
    }
    // Newton with bisection whenever a step leaves the bracket or fails to
    // halve the step before last (the stiff exponential terms otherwise make
    // Newton crawl in steps of about `eps`)
    t = 0.5 * (lo + hi);
    let (mut dx, mut dx_old) = (hi - lo, hi - lo);
    for _ in 0..400 {
        let v = h(t);
        if v == 0.0 {
            return t;
        }
        if v > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = dh(t);
        let newton = t - v / slope;
        let usable = v.is_finite() && slope.is_finite() && newton > lo && newton < hi;
        if usable && (2.0 * v).abs() <= (dx_old * slope).abs() {
            dx_old = dx;
            dx = t - newton;
            t = newton;
        } else {
            dx_old = dx;
            dx = 0.5 * (hi - lo);
            t = lo + dx;
        }
        if dx.abs() <= 1e-15 * (1.0 + t.abs()) {
            return t;
        }
    }
    t
}
