//! Minimum Wasserstein deconvolution over a finite grid.
//!
//! The estimator minimizes `w ↦ W_2²(K w, π̂)` over the probability simplex,
//! where column `j` of `K` is the law of `Π_A(α_j + ξ)` for the `j`-th
//! feasible grid atom `α_j ∈ [-V, V]`. The map is convex (a supremum of
//! linear functions of `K w`), and the first-marginal Kantorovich potential
//! `φ` of the monotone coupling gives the subgradient `Kᵀ φ`.
//!
//! The solver is Frank–Wolfe: the linear minimization oracle over the simplex
//! is the vertex with the smallest subgradient entry, and the duality gap
//! `⟨g, w - e_s⟩` bounds the suboptimality of every iterate.

use crate::error::{invalid_input, invalid_parameter, Result};
use crate::isotonic::{round_to_isotonic, support_slack, DesignPoints, IsotonicFn};
use crate::measures::{
    monotone_coupling_with_potentials, normalized_cumulative, DiscreteMeasure, EmpiricalMeasure,
    GridMeasure,
};
use crate::noise::{cell_probabilities, Grid, NoiseModel};

/// Step size rule of the Frank–Wolfe iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `γ_t = 2 / (t + 2)`.
    Classic,
    /// Golden-section minimization of the objective on the segment.
    #[default]
    ExactLineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub max_iterations: usize,
    /// Stop once the Frank–Wolfe gap falls to this value. `None` means
    /// `1e-6 · (V + σ)²`.
    pub fw_gap_tolerance: Option<f64>,
    pub step_rule: StepRule,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            fw_gap_tolerance: None,
            step_rule: StepRule::ExactLineSearch,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid_parameter("max_iterations must be at least 1"));
        }
        if let Some(tol) = self.fw_gap_tolerance {
            if !(tol >= 0.0) {
                return Err(invalid_parameter("fw_gap_tolerance must be nonnegative"));
            }
        }
        Ok(())
    }

    fn tolerance_for(&self, scale: f64) -> f64 {
        self.fw_gap_tolerance.unwrap_or(1e-6 * scale * scale)
    }
}

/// The quantization grid together with the atoms allowed to carry mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleGrid {
    pub grid: Grid,
    /// Indices of the grid atoms lying in `[-V, V]`, increasing.
    pub feasible: Vec<usize>,
    pub v: f64,
    pub sigma: f64,
}

impl FeasibleGrid {
    pub fn feasible_atoms(&self) -> Vec<f64> {
        self.feasible.iter().map(|&i| self.grid.atom(i)).collect()
    }
}

/// Grid for sample size `n`, bound `V` and noise ψ₁ bound `sigma`.
pub fn build_grid(v: f64, sigma: f64, n: usize) -> Result<FeasibleGrid> {
    let grid = Grid::quantization(v, sigma, n)?;
    let slack = support_slack(v);
    let feasible: Vec<usize> = (0..grid.n_atoms())
        .filter(|&i| grid.atom(i).abs() <= v + slack)
        .collect();
    if feasible.is_empty() {
        return Err(invalid_parameter(format!(
            "no grid atom falls in [-{v}, {v}] for n = {n}, sigma = {sigma}"
        )));
    }
    Ok(FeasibleGrid {
        grid,
        feasible,
        v,
        sigma,
    })
}

/// Column `j` holds the cell probabilities of feasible atom `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionKernel {
    grid: Grid,
    /// `V + σ`, the unit of the default gap tolerance.
    scale: f64,
    feasible_atoms: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl ConvolutionKernel {
    pub fn new(noise: &NoiseModel, feasible: &FeasibleGrid) -> Self {
        let feasible_atoms = feasible.feasible_atoms();
        let columns = feasible_atoms
            .iter()
            .map(|&a| cell_probabilities(noise, a, &feasible.grid))
            .collect();
        Self {
            grid: feasible.grid,
            scale: feasible.v + feasible.sigma,
            feasible_atoms,
            columns,
        }
    }

    /// Kernel with explicitly given columns over the atoms of `grid`; `scale`
    /// plays the role of `V + σ` for the default gap tolerance.
    pub fn from_columns(grid: Grid, feasible_atoms: Vec<f64>, columns: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if feasible_atoms.is_empty() || feasible_atoms.len() != columns.len() {
            return Err(invalid_input("kernel needs one column per feasible atom"));
        }
        if columns.iter().any(|c| c.len() != grid.n_atoms()) {
            return Err(invalid_input("kernel columns must cover every grid atom"));
        }
        Ok(Self {
            grid,
            scale,
            feasible_atoms,
            columns,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn feasible_atoms(&self) -> &[f64] {
        &self.feasible_atoms
    }

    pub fn n_feasible(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Cell weights `K w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_atoms()];
        for (col, &wj) in self.columns.iter().zip(w) {
            if wj != 0.0 {
                out.iter_mut().zip(col).for_each(|(o, k)| *o += wj * k);
            }
        }
        out
    }

    /// `Kᵀ φ`.
    pub fn transpose_apply(&self, phi: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().zip(phi).map(|(k, f)| k * f).sum())
            .collect()
    }

    fn cell_measure(&self, cells: Vec<f64>) -> Result<GridMeasure> {
        GridMeasure::normalized(self.grid.atoms(), cells)
    }
}

const SIMPLEX_TOLERANCE: f64 = 1e-9;

fn check_simplex(w: &[f64], kernel: &ConvolutionKernel) -> Result<()> {
    if w.len() != kernel.n_feasible() {
        return Err(invalid_input(format!(
            "{} weights for {} feasible atoms",
            w.len(),
            kernel.n_feasible()
        )));
    }
    let total: f64 = w.iter().sum();
    if w.iter().any(|&x| !(x >= -SIMPLEX_TOLERANCE)) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(invalid_input("weights are not in the probability simplex"));
    }
    Ok(())
}

/// `W_2²(K w, π̂)` and the subgradient `Kᵀ φ`.
pub fn objective_and_subgradient(
    w: &[f64],
    kernel: &ConvolutionKernel,
    pi_hat: &EmpiricalMeasure,
) -> Result<(f64, Vec<f64>)> {
    check_simplex(w, kernel)?;
    let clipped: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    cell_objective_and_subgradient(kernel.apply(&clipped), kernel, pi_hat)
}

fn cell_objective_and_subgradient(
    cells: Vec<f64>,
    kernel: &ConvolutionKernel,
    pi_hat: &EmpiricalMeasure,
) -> Result<(f64, Vec<f64>)> {
    let q = kernel.cell_measure(cells)?;
    let coupling = monotone_coupling_with_potentials(&q, pi_hat, 2.0)?;
    let objective = coupling.primal_cost(q.atoms(), pi_hat.atoms());
    Ok((objective, kernel.transpose_apply(&coupling.phi)))
}

/// `W_2²(·, π̂)` for measures on a fixed set of atoms, evaluated in
/// `O(#atoms)` from prefix sums of the sorted sample.
///
/// With `G_r(u) = ∫₀ᵘ Q_π̂(s)^r ds`, the cost of sending the quantile block
/// `(c_{k-1}, c_k]` to atom `α_k` is
/// `α_k² Δc - 2 α_k ΔG_1 + ΔG_2`.
#[derive(Debug, Clone)]
struct SortedSampleCost {
    sample: Vec<f64>,
    prefix1: Vec<f64>,
    prefix2: Vec<f64>,
}

impl SortedSampleCost {
    fn new(pi_hat: &EmpiricalMeasure) -> Self {
        let sample = pi_hat.atoms().to_vec();
        let mut prefix1 = Vec::with_capacity(sample.len() + 1);
        let mut prefix2 = Vec::with_capacity(sample.len() + 1);
        let (mut s1, mut s2) = (0.0, 0.0);
        prefix1.push(0.0);
        prefix2.push(0.0);
        for &y in &sample {
            s1 += y;
            s2 += y * y;
            prefix1.push(s1);
            prefix2.push(s2);
        }
        Self {
            sample,
            prefix1,
            prefix2,
        }
    }

    /// `(G_1(u), G_2(u))`.
    fn partial_integrals(&self, u: f64) -> (f64, f64) {
        let n = self.sample.len();
        let nf = n as f64;
        let t = (u * nf).clamp(0.0, nf);
        let m = (t.floor() as usize).min(n);
        if m == n {
            return (self.prefix1[n] / nf, self.prefix2[n] / nf);
        }
        let frac = t - m as f64;
        let y = self.sample[m];
        ((self.prefix1[m] + frac * y) / nf, (self.prefix2[m] + frac * y * y) / nf)
    }

    fn cost(&self, atoms: &[f64], weights: &[f64]) -> f64 {
        let cum = normalized_cumulative(weights);
        let mut prev = (0.0, 0.0, 0.0);
        let mut total = 0.0;
        for (&a, &c) in atoms.iter().zip(&cum) {
            if c <= prev.0 {
                continue;
            }
            let (g1, g2) = self.partial_integrals(c);
            let piece = a * a * (c - prev.0) - 2.0 * a * (g1 - prev.1) + (g2 - prev.2);
            total += piece.max(0.0);
            prev = (c, g1, g2);
        }
        total
    }
}

/// One Frank–Wolfe iteration's record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    pub fw_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The Frank–Wolfe gap reached the tolerance.
    Gap,
    /// The iteration budget ran out.
    Iterations,
    /// The line search could not decrease the objective along the
    /// Frank–Wolfe direction.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    /// Weights on the feasible atoms.
    pub weights: Vec<f64>,
    pub mu_hat: GridMeasure,
    pub trace: Vec<TraceEntry>,
    pub terminated_by: Termination,
}

impl SimplexSolution {
    pub fn final_gap(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |t| t.fw_gap)
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |t| t.objective)
    }
}

const GOLDEN_SECTION_STEPS: usize = 64;

/// Minimizes a convex function on `[0, 1]`, returning `(γ, f(γ))`. The
/// endpoints are always candidates, and ties go to the smaller step.
fn golden_section(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_SECTION_STEPS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(0.0, f(0.0)), (mid, f(mid)), (c, fc), (d, fd), (1.0, f(1.0))];
    candidates
        .into_iter()
        .fold((0.0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Cells after a step toward vertex `to`: the Frank–Wolfe move
/// `(1-γ) q + γ K e_to` when `from` is `None`, otherwise the transfer of
/// mass `γ` from atom `from` to atom `to`.
fn mix_toward(
    cells: &[f64],
    kernel: &ConvolutionKernel,
    from: Option<usize>,
    to: usize,
    gamma: f64,
    out: &mut [f64],
) {
    let target = kernel.column(to);
    match from {
        None => out
            .iter_mut()
            .zip(cells.iter().zip(target))
            .for_each(|(o, (q, kt))| *o = (1.0 - gamma) * q + gamma * kt),
        Some(a) => out
            .iter_mut()
            .zip(cells.iter().zip(target.iter().zip(kernel.column(a))))
            .for_each(|(o, (q, (kt, ka)))| *o = (q + gamma * (kt - ka)).max(0.0)),
    }
}

/// Exact line search over `γ ∈ [0, max_step]`, returning `(γ, objective)`.
#[allow(clippy::too_many_arguments)]
fn line_search_toward(
    fast: &SortedSampleCost,
    cell_atoms: &[f64],
    cells: &[f64],
    kernel: &ConvolutionKernel,
    from: Option<usize>,
    to: usize,
    max_step: f64,
    scratch: &mut [f64],
) -> (f64, f64) {
    let scratch = std::cell::RefCell::new(scratch);
    let (u, value) = golden_section(|u| {
        let mut buf = scratch.borrow_mut();
        mix_toward(cells, kernel, from, to, u * max_step, &mut buf);
        fast.cost(cell_atoms, &buf)
    });
    (u * max_step, value)
}

/// Frank–Wolfe over the simplex of feasible-atom weights, started from the
/// uniform distribution.
///
/// With exact line search each iteration takes the better of the
/// Frank–Wolfe step and the pairwise step that moves mass from the active
/// atom with the largest subgradient entry to the oracle vertex. The
/// objective is only piecewise smooth, so when neither decreases it every
/// pairwise transfer is tried before declaring a stall. The recorded gap
/// bounds the suboptimality for any subgradient.
pub fn solve_simplex(
    kernel: &ConvolutionKernel,
    pi_hat: &EmpiricalMeasure,
    config: &EstimatorConfig,
) -> Result<SimplexSolution> {
    config.validate()?;
    let tol = config.tolerance_for(kernel.scale);
    let k = kernel.n_feasible();
    let fast = SortedSampleCost::new(pi_hat);
    let cell_atoms = kernel.grid().atoms();
    let mut w = vec![1.0 / k as f64; k];
    let mut cells = kernel.apply(&w);
    let mut objective = fast.cost(&cell_atoms, &cells);
    let mut trace = Vec::new();
    let mut best = (objective, w.clone());
    let mut terminated_by = Termination::Iterations;
    let mut mixed = vec![0.0; cells.len()];

    for t in 0..config.max_iterations {
        let (_, grad) = cell_objective_and_subgradient(cells.clone(), kernel, pi_hat)?;
        let s = grad
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least one feasible atom");
        let inner: f64 = grad.iter().zip(&w).map(|(g, x)| g * x).sum();
        // W_2² >= 0, so the objective itself also bounds the suboptimality
        let gap = (inner - grad[s]).max(0.0).min(objective.max(0.0));
        trace.push(TraceEntry {
            objective,
            fw_gap: gap,
        });
        if gap <= tol {
            terminated_by = Termination::Gap;
            break;
        }
        let step = match config.step_rule {
            StepRule::ExactLineSearch => {
                let fw = line_search_toward(&fast, &cell_atoms, &cells, kernel, None, s, 1.0, &mut mixed);
                let away = (0..k)
                    .filter(|&i| w[i] > 0.0 && i != s)
                    .max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
                let pairwise = away.map(|a| {
                    let r = line_search_toward(&fast, &cell_atoms, &cells, kernel, Some(a), s, w[a], &mut mixed);
                    (r, Some(a), s)
                });
                let mut best_step = ((fw, None, s), objective);
                for cand in std::iter::once((fw, None, s)).chain(pairwise) {
                    if cand.0 .1 < best_step.1 {
                        best_step = (cand, cand.0 .1);
                    }
                }
                if best_step.1 >= objective {
                    // At a kink the chosen subgradient need not give a descent
                    // direction; fall back to every mass transfer between atoms.
                    for a in (0..k).filter(|&i| w[i] > 0.0) {
                        for j in (0..k).filter(|&j| j != a) {
                            let r = line_search_toward(&fast, &cell_atoms, &cells, kernel, Some(a), j, w[a], &mut mixed);
                            if r.1 < best_step.1 {
                                best_step = ((r, Some(a), j), r.1);
                            }
                        }
                    }
                }
                let ((gamma_value, from, to), _) = best_step;
                (gamma_value.0, gamma_value.1, from, to)
            }
            StepRule::Classic => {
                let gamma = 2.0 / (t as f64 + 2.0);
                mix_toward(&cells, kernel, None, s, gamma, &mut mixed);
                (gamma, fast.cost(&cell_atoms, &mixed), None, s)
            }
        };
        let (gamma, value, from, to) = step;
        let decreased = value < objective || config.step_rule == StepRule::Classic;
        if gamma == 0.0 || !decreased {
            terminated_by = Termination::Stalled;
            break;
        }
        mix_toward(&cells, kernel, from, to, gamma, &mut mixed);
        std::mem::swap(&mut cells, &mut mixed);
        match from {
            None => {
                w.iter_mut().for_each(|x| *x *= 1.0 - gamma);
                w[to] += gamma;
            }
            Some(a) => {
                let moved = gamma.min(w[a]);
                w[a] -= moved;
                w[to] += moved;
            }
        }
        objective = value;
        if objective < best.0 {
            best = (objective, w.clone());
        }
    }

    let weights = match config.step_rule {
        StepRule::ExactLineSearch => w,
        StepRule::Classic => best.1,
    };
    let mu_hat = GridMeasure::normalized(kernel.feasible_atoms().to_vec(), weights.clone())?;
    Ok(SimplexSolution {
        weights,
        mu_hat,
        trace,
        terminated_by,
    })
}

/// Output of the end-to-end estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvResult {
    pub mu_hat: GridMeasure,
    pub g_hat: IsotonicFn,
    pub trace: Vec<TraceEntry>,
    pub terminated_by: Termination,
    pub grid: FeasibleGrid,
}

/// Estimates the regression function at the design points from the
/// unordered responses.
pub fn estimate(
    x: &DesignPoints,
    y: &[f64],
    noise: &NoiseModel,
    v: f64,
    config: &EstimatorConfig,
) -> Result<DeconvResult> {
    if y.len() != x.len() {
        return Err(invalid_input(format!("{} responses for {} design points", y.len(), x.len())));
    }
    config.validate()?;
    let grid = build_grid(v, noise.sigma(), y.len())?;
    let pi_hat = EmpiricalMeasure::from_samples(y.to_vec())?;
    let kernel = ConvolutionKernel::new(noise, &grid);
    let solution = solve_simplex(&kernel, &pi_hat, config)?;
    let g_hat = round_to_isotonic(&solution.mu_hat, x, v)?;
    Ok(DeconvResult {
        mu_hat: solution.mu_hat,
        g_hat,
        trace: solution.trace,
        terminated_by: solution.terminated_by,
        grid,
    })
}
