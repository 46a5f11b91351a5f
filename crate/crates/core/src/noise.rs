//! Known noise laws and the quantization grid.
//!
//! A [`NoiseModel`] carries its analytic CDF, density, quantile function and
//! moments together with `sigma`, an upper bound on its Orlicz ψ₁ norm
//! `inf{t > 0 : E exp(|ξ|/t) <= 2}`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid_input, invalid_parameter, Result};
use crate::measures::{DiscreteMeasure, EmpiricalMeasure, GridMeasure};
use crate::quadrature::{gauss_legendre, integrate};

/// Parametric family of a centered noise law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian { sd: f64 },
    Laplace { scale: f64 },
    Uniform { half_width: f64 },
    PointMass,
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::Laplace { .. } => "laplace",
            NoiseFamily::Uniform { .. } => "uniform",
            NoiseFamily::PointMass => "point-mass",
        }
    }
}

/// A known centered noise distribution with its ψ₁ bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    family: NoiseFamily,
    sigma: f64,
}

/// Bisection and quadrature tolerance for numerically computed ψ₁ norms.
const PSI1_TOLERANCE: f64 = 1e-10;

/// Builds a noise model and computes its ψ₁ bound.
pub fn make_noise(family: NoiseFamily) -> Result<NoiseModel> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(invalid_parameter(format!("{name} = {v} must be positive and finite")))
        }
    };
    let sigma = match family {
        NoiseFamily::Gaussian { sd } => {
            positive("sd", sd)?;
            psi1_by_bisection(&family, sd)
        }
        NoiseFamily::Laplace { scale } => {
            positive("scale", scale)?;
            psi1_by_bisection(&family, scale)
        }
        NoiseFamily::Uniform { half_width } => {
            positive("half-width", half_width)?;
            2.0 * half_width
        }
        NoiseFamily::PointMass => 0.0,
    };
    Ok(NoiseModel { family, sigma })
}

/// `E exp(|ξ|/t)` for the unbounded families, by quadrature.
fn psi1_expectation(family: &NoiseFamily, t: f64) -> f64 {
    match *family {
        NoiseFamily::Gaussian { sd } => {
            // 2 ∫₀^∞ e^{x/t} φ_sd(x) dx; the integrand peaks at sd²/t
            let upper = sd * sd / t + 40.0 * sd;
            let c = 2.0 / (sd * (2.0 * PI).sqrt());
            let f = |x: f64| c * (x / t - 0.5 * (x / sd) * (x / sd)).exp();
            integrate(f, 0.0, upper, PSI1_TOLERANCE, PSI1_TOLERANCE).value
        }
        NoiseFamily::Laplace { scale } => {
            let rate = 1.0 / scale - 1.0 / t;
            if rate <= 0.0 {
                return f64::INFINITY;
            }
            let f = |x: f64| (-x * rate).exp() / scale;
            integrate(f, 0.0, 60.0 / rate, PSI1_TOLERANCE, PSI1_TOLERANCE).value
        }
        NoiseFamily::Uniform { half_width } => {
            let r = half_width / t;
            r.exp_m1() / r
        }
        NoiseFamily::PointMass => 1.0,
    }
}

/// Smallest `t` with `E exp(|ξ|/t) <= 2`, rounded up so the result stays an
/// upper bound on the ψ₁ norm.
fn psi1_by_bisection(family: &NoiseFamily, scale: f64) -> f64 {
    let above = |t: f64| psi1_expectation(family, t) > 2.0;
    let (mut lo, mut hi) = (0.5 * scale, 4.0 * scale);
    while !above(lo) {
        lo *= 0.5;
    }
    while above(hi) {
        hi *= 2.0;
    }
    while hi - lo > PSI1_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi * (1.0 + 1e-8)
}

impl NoiseModel {
    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    /// Upper bound on `‖ξ‖_{ψ₁}`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `P(ξ <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => 0.5 * erfc(-t / (sd * SQRT_2)),
            NoiseFamily::Laplace { scale } => {
                if t < 0.0 {
                    0.5 * (t / scale).exp()
                } else {
                    1.0 - 0.5 * (-t / scale).exp()
                }
            }
            NoiseFamily::Uniform { half_width } => ((t + half_width) / (2.0 * half_width)).clamp(0.0, 1.0),
            NoiseFamily::PointMass => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(ξ > t)`, computed without cancellation in the upper tail.
    pub fn sf(&self, t: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => 0.5 * erfc(t / (sd * SQRT_2)),
            NoiseFamily::Laplace { scale } => {
                if t > 0.0 {
                    0.5 * (-t / scale).exp()
                } else {
                    1.0 - 0.5 * (t / scale).exp()
                }
            }
            NoiseFamily::Uniform { .. } | NoiseFamily::PointMass => 1.0 - self.cdf(t),
        }
    }

    /// Density; zero everywhere for the point mass, whose law has no density.
    pub fn density(&self, t: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => {
                let z = t / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            NoiseFamily::Laplace { scale } => (-t.abs() / scale).exp() / (2.0 * scale),
            NoiseFamily::Uniform { half_width } => {
                if t.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            NoiseFamily::PointMass => 0.0,
        }
    }

    /// Quantile function on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => {
                // erfc_inv is good to ~1e-11; one Newton step restores full precision
                let x = -sd * SQRT_2 * erfc_inv(2.0 * u);
                let d = self.density(x);
                if d > 0.0 {
                    x - (self.cdf(x) - u) / d
                } else {
                    x
                }
            }
            NoiseFamily::Laplace { scale } => {
                if u < 0.5 {
                    scale * (2.0 * u).ln()
                } else {
                    -scale * (2.0 * (1.0 - u)).ln()
                }
            }
            NoiseFamily::Uniform { half_width } => half_width * (2.0 * u - 1.0),
            NoiseFamily::PointMass => 0.0,
        }
    }

    /// `P(lo <= ξ < hi)`; either end may be infinite.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match self.family {
            NoiseFamily::PointMass => {
                if lo <= 0.0 && 0.0 < hi {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                let m = if lo >= 0.0 {
                    self.sf(lo) - self.sf(hi)
                } else {
                    self.cdf(hi) - self.cdf(lo)
                };
                m.max(0.0)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => Normal::new(0.0, sd).expect("sd > 0").sample(rng),
            NoiseFamily::Laplace { .. } => {
                let u: f64 = rng.random();
                // u ∈ [0, 1); map 0 to the smallest positive level
                self.quantile(u.max(f64::MIN_POSITIVE))
            }
            NoiseFamily::Uniform { half_width } => rng.random_range(-half_width..half_width),
            NoiseFamily::PointMass => 0.0,
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// `E ξ^m`.
    pub fn raw_moment(&self, m: u32) -> f64 {
        if m == 0 {
            return 1.0;
        }
        if m % 2 == 1 {
            return 0.0;
        }
        let mi = m as i32;
        match self.family {
            NoiseFamily::Gaussian { sd } => {
                let double_factorial: f64 = (1..m).step_by(2).map(|k| k as f64).product();
                sd.powi(mi) * double_factorial
            }
            NoiseFamily::Laplace { scale } => scale.powi(mi) * (1..=m).map(|k| k as f64).product::<f64>(),
            NoiseFamily::Uniform { half_width } => half_width.powi(mi) / (m as f64 + 1.0),
            NoiseFamily::PointMass => 0.0,
        }
    }

    /// `E |ξ|^p` for real `p >= 0`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => {
                sd.powf(p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
            }
            NoiseFamily::Laplace { scale } => scale.powf(p) * gamma(p + 1.0),
            NoiseFamily::Uniform { half_width } => half_width.powf(p) / (p + 1.0),
            NoiseFamily::PointMass => {
                if p == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E exp(|ξ|/t)`; the ψ₁ norm is the smallest `t` where this is `<= 2`.
    pub fn psi1_expectation(&self, t: f64) -> f64 {
        psi1_expectation(&self.family, t)
    }

    /// `W_2²` between the noise law itself and an empirical sample,
    /// `Σ_i ∫_{(i-1)/n}^{i/n} (Q(u) - x_(i))² du`, each cell by 16-point
    /// Gauss–Legendre quadrature.
    pub fn w2_sq_to_sample(&self, sample: &EmpiricalMeasure) -> f64 {
        let (nodes, weights) = gauss_legendre(16);
        let atoms = sample.atoms();
        let n = atoms.len() as f64;
        let half = 0.5 / n;
        atoms
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let center = (i as f64 + 0.5) / n;
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&t, &w)| {
                        let d = self.quantile(center + half * t) - x;
                        w * d * d
                    })
                    .sum::<f64>()
                    * half
            })
            .sum()
    }
}

/// The quantization `α_i = α_0 + i·spacing`, `0 <= i <= N`, stored
/// implicitly so every atom is recomputed from the same formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    alpha0: f64,
    spacing: f64,
    n_cells: usize,
}

impl Grid {
    pub fn new(alpha0: f64, spacing: f64, n_cells: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() || !alpha0.is_finite() {
            return Err(invalid_parameter("grid needs a finite origin and positive spacing"));
        }
        if n_cells == 0 {
            return Err(invalid_parameter("grid needs at least one cell"));
        }
        Ok(Self {
            alpha0,
            spacing,
            n_cells,
        })
    }

    /// `α_0 = -(V+σ) log n`, spacing `(V+σ)/n^{1/4}`, `N = ⌈2 n^{1/4} log n⌉`.
    pub fn quantization(v: f64, sigma: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid_parameter(format!("sample size n = {n} must be at least 3")));
        }
        if !(v > 0.0) || !(sigma >= 0.0) {
            return Err(invalid_parameter("V must be positive and sigma nonnegative"));
        }
        let nf = n as f64;
        let scale = v + sigma;
        let root4 = nf.powf(0.25);
        let log_n = nf.ln();
        Self::new(-scale * log_n, scale / root4, (2.0 * root4 * log_n).ceil() as usize)
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `N`; the grid has `N + 1` atoms.
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_atoms(&self) -> usize {
        self.n_cells + 1
    }

    pub fn atom(&self, i: usize) -> f64 {
        self.alpha0 + i as f64 * self.spacing
    }

    pub fn atoms(&self) -> Vec<f64> {
        (0..self.n_atoms()).map(|i| self.atom(i)).collect()
    }

    /// Index of `Π_A(x)`: `0` below `α_1`, `i` on `[α_i, α_{i+1})`, `N` from `α_N` on.
    pub fn project_index(&self, x: f64) -> usize {
        if x < self.atom(1) {
            return 0;
        }
        if x >= self.atom(self.n_cells) {
            return self.n_cells;
        }
        let mut k = (((x - self.alpha0) / self.spacing).floor().max(0.0) as usize).min(self.n_cells);
        while k > 0 && x < self.atom(k) {
            k -= 1;
        }
        while k < self.n_cells && x >= self.atom(k + 1) {
            k += 1;
        }
        k
    }

    pub fn project(&self, x: f64) -> f64 {
        self.atom(self.project_index(x))
    }

    /// Index of the grid atom equal to `a` (up to rounding), if any.
    pub fn index_of(&self, a: f64) -> Option<usize> {
        let k = ((a - self.alpha0) / self.spacing).round();
        if k < 0.0 || k > self.n_cells as f64 {
            return None;
        }
        let k = k as usize;
        ((self.atom(k) - a).abs() <= 1e-9 * self.spacing).then_some(k)
    }
}

/// Law of `Π_A(a + ξ)` over the grid atoms.
pub fn cell_probabilities(noise: &NoiseModel, a: f64, grid: &Grid) -> Vec<f64> {
    let n = grid.n_cells();
    let mut w = Vec::with_capacity(n + 1);
    w.push(noise.mass_between(f64::NEG_INFINITY, grid.atom(1) - a));
    for k in 1..n {
        w.push(noise.mass_between(grid.atom(k) - a, grid.atom(k + 1) - a));
    }
    if n >= 1 {
        w.push(noise.mass_between(grid.atom(n) - a, f64::INFINITY));
    }
    w
}

/// `(Π_A)_♯(μ * D)` for `μ` supported on grid atoms.
pub fn convolve_pushforward(mu: &GridMeasure, noise: &NoiseModel, grid: &Grid) -> Result<GridMeasure> {
    let mut out = vec![0.0; grid.n_atoms()];
    for (i, &a) in mu.atoms().iter().enumerate() {
        let w = mu.weight(i);
        if grid.index_of(a).is_none() {
            return Err(invalid_input(format!("atom {a} is not on the grid")));
        }
        if w == 0.0 {
            continue;
        }
        for (o, c) in out.iter_mut().zip(cell_probabilities(noise, a, grid)) {
            *o += w * c;
        }
    }
    GridMeasure::new(grid.atoms(), out)
}

/// Atoms kept after merging a measure into equal-width bins.
const CONVOLUTION_BINS: usize = 1024;
/// Points at which the mixture distribution functions are tabulated.
const CDF_TABLE_POINTS: usize = 4096;
/// Quantile levels compared by the midpoint rule.
const QUANTILE_LEVELS: usize = 4096;
/// Noise mass ignored in each tail.
const TAIL_MASS: f64 = 1e-13;

/// `W_2(μ * D, ν * D)` for discrete `μ, ν`.
///
/// Each measure is first merged into at most 1024 bins (moving mass to the
/// bin's mean, which changes `W_2` by at most one bin width); the mixture
/// distribution functions are then tabulated, inverted by linear
/// interpolation and compared by the midpoint rule on the quantile scale.
pub fn convolved_w2<M, N>(mu: &M, nu: &N, noise: &NoiseModel) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if mu.is_empty() || nu.is_empty() {
        return Err(invalid_input("measures must be nonempty"));
    }
    if let NoiseFamily::PointMass = noise.family {
        return crate::measures::wasserstein_p(mu, nu, 2.0);
    }
    let (a, b) = (binned(mu), binned(nu));
    let (qlo, qhi) = (noise.quantile(TAIL_MASS), noise.quantile(1.0 - TAIL_MASS));
    let lo = a.atoms()[0].min(b.atoms()[0]) + qlo;
    let hi = a.atoms()[a.len() - 1].max(b.atoms()[b.len() - 1]) + qhi;
    let step = (hi - lo) / (CDF_TABLE_POINTS - 1) as f64;
    let ts: Vec<f64> = (0..CDF_TABLE_POINTS).map(|i| lo + i as f64 * step).collect();
    let (fa, fb) = (mixture_cdf(&a, noise, &ts), mixture_cdf(&b, noise, &ts));
    let m = QUANTILE_LEVELS as f64;
    let sq: f64 = (0..QUANTILE_LEVELS)
        .map(|k| {
            let u = (k as f64 + 0.5) / m;
            let d = tabulated_quantile(&ts, &fa, u) - tabulated_quantile(&ts, &fb, u);
            d * d
        })
        .sum();
    Ok((sq / m).sqrt())
}

fn binned<M: DiscreteMeasure + ?Sized>(mu: &M) -> GridMeasure {
    let atoms = mu.atoms();
    let (first, last) = (atoms[0], atoms[atoms.len() - 1]);
    let width = (last - first) / CONVOLUTION_BINS as f64;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<(usize, f64, f64)> = None;
    for (i, &x) in atoms.iter().enumerate() {
        let w = mu.weight(i);
        if w <= 0.0 {
            continue;
        }
        let bin = if width > 0.0 {
            (((x - first) / width) as usize).min(CONVOLUTION_BINS - 1)
        } else {
            0
        };
        match current {
            Some((b, mass, moment)) if b == bin => current = Some((b, mass + w, moment + w * x)),
            _ => {
                if let Some((_, mass, moment)) = current {
                    merged.push((moment / mass, mass));
                }
                current = Some((bin, w, w * x));
            }
        }
    }
    if let Some((_, mass, moment)) = current {
        merged.push((moment / mass, mass));
    }
    let (xs, ws): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
    GridMeasure::normalized(xs, ws).expect("bin means are increasing")
}

fn mixture_cdf(mu: &GridMeasure, noise: &NoiseModel, ts: &[f64]) -> Vec<f64> {
    let atoms = mu.atoms();
    let cum = mu.cumulative();
    ts.iter()
        .map(|&t| {
            let values: f64 = atoms
                .iter()
                .zip(mu.weights_slice())
                .map(|(&a, &w)| w * noise.cdf(t - a))
                .sum();
            values.clamp(0.0, cum[cum.len() - 1])
        })
        .collect()
}

/// Generalized inverse of a tabulated nondecreasing distribution function.
fn tabulated_quantile(ts: &[f64], cdf: &[f64], u: f64) -> f64 {
    let k = cdf.partition_point(|&c| c < u);
    if k == 0 {
        return ts[0];
    }
    if k == cdf.len() {
        return ts[ts.len() - 1];
    }
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    if c1 <= c0 {
        return ts[k];
    }
    ts[k - 1] + (u - c0) / (c1 - c0) * (ts[k] - ts[k - 1])
}
