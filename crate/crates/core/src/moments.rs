//! Moment gaps between measures and numerical checks of the inequalities
//! that tie them to Wasserstein distances.
//!
//! Everything here works on discrete measures with exact moment sums; the
//! noise enters only through its analytic moments. The sinc-type kernel
//! `f_m(t) = C_m (sin(t/4em) / (t/4em))^{2m}` and its derivative bounds are
//! checked by finite differences.

use std::f64::consts::{E, PI};

use crate::error::{invalid_input, invalid_parameter, Error, Result};
use crate::measures::{wasserstein_p, DiscreteMeasure, GridMeasure};
use crate::noise::{NoiseFamily, NoiseModel};
use crate::quadrature::{gauss_legendre, integrate};

/// `|E X^l - E Y^l|`, the gap `Δ_l^l`.
pub fn moment_gap<M, N>(mu: &M, nu: &N, l: u32) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if l < 1 {
        return Err(invalid_parameter("moment order must be at least 1"));
    }
    Ok((mu.raw_moment(l) - nu.raw_moment(l)).abs())
}

/// `Δ_l(μ, ν) = |E X^l - E Y^l|^{1/l}`.
pub fn delta_l<M, N>(mu: &M, nu: &N, l: u32) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    Ok(moment_gap(mu, nu, l)?.powf(1.0 / l as f64))
}

/// `p · max_{1 <= l <= lmax} Δ_l / l`: the moment bound on `W_p` without its
/// unspecified universal constant.
pub fn wasserstein_moment_surrogate<M, N>(mu: &M, nu: &N, p: f64, lmax: u32) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if lmax < 1 {
        return Err(invalid_parameter("lmax must be at least 1"));
    }
    let mut best = 0.0f64;
    for l in 1..=lmax {
        best = best.max(delta_l(mu, nu, l)? / l as f64);
    }
    Ok(p * best)
}

/// `(2l)^l · bound^{l-1} · W_2(μ, ν)`, an upper bound on `Δ_l^l` whenever
/// `bound` dominates both ψ₁ norms.
pub fn w2_to_moments_rhs<M, N>(mu: &M, nu: &N, l: u32, psi1_bound: f64) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if l < 1 {
        return Err(invalid_parameter("moment order must be at least 1"));
    }
    if !(psi1_bound >= 0.0) {
        return Err(invalid_parameter("psi1 bound must be nonnegative"));
    }
    let lf = l as f64;
    Ok((2.0 * lf).powi(l as i32) * psi1_bound.powi(l as i32 - 1) * wasserstein_p(mu, nu, 2.0)?)
}

/// ψ₁ norm of a discrete measure: the root of `Σ w_i e^{|a_i|/t} = 2`.
pub fn psi1_norm<M: DiscreteMeasure + ?Sized>(mu: &M) -> f64 {
    let amax = mu.atoms().iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if amax == 0.0 {
        return 0.0;
    }
    let excess = |t: f64| {
        (0..mu.len())
            .map(|i| mu.weight(i) * (mu.atoms()[i].abs() / t).exp())
            .sum::<f64>()
            > 2.0
    };
    // E e^{|X|/t} <= e^{amax/t} <= 2 once t >= amax / ln 2
    let (mut lo, mut hi) = (amax * 1e-3, amax / 2f64.ln());
    while excess(hi) {
        hi *= 2.0;
    }
    while !excess(lo) {
        lo *= 0.5;
        if lo < 1e-300 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E (X + ξ)^m = Σ_j C(m, j) E X^j E ξ^{m-j}` for `X ~ μ`, `ξ ~ D` independent.
pub fn convolved_moment<M: DiscreteMeasure + ?Sized>(mu: &M, noise: &NoiseModel, m: u32) -> f64 {
    (0..=m)
        .map(|j| {
            let xj = if j == 0 { 1.0 } else { mu.raw_moment(j) };
            binomial(m, j) * xj * noise.raw_moment(m - j)
        })
        .sum()
}

/// `(4 l σ)^l · max_{m <= l} Δ_m^m(μ * D, ν * D)`, an upper bound on
/// `Δ_l^l(μ, ν)` with `σ` the noise ψ₁ bound.
pub fn deconv_moment_rhs<M, N>(mu: &M, nu: &N, noise: &NoiseModel, l: u32) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if l < 1 {
        return Err(invalid_parameter("moment order must be at least 1"));
    }
    if let NoiseFamily::PointMass = noise.family() {
        return Err(invalid_parameter(
            "the deconvolution bound needs noise with a positive psi1 norm",
        ));
    }
    let sigma = noise.sigma();
    if !(sigma > 0.0) {
        return Err(Error::UnsupportedFamily(noise.family().name().to_string()));
    }
    let sup = (1..=l)
        .map(|m| (convolved_moment(mu, noise, m) - convolved_moment(nu, noise, m)).abs())
        .fold(0.0f64, f64::max);
    Ok((4.0 * l as f64 * sigma).powi(l as i32) * sup)
}

/// The density `f_m` of the sinc-type smoothing kernel with its normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincKernel {
    m: u32,
    normalizer: f64,
}

impl SincKernel {
    pub fn new(m: u32) -> Result<Self> {
        if m < 1 {
            return Err(invalid_parameter("kernel order m must be at least 1"));
        }
        Ok(Self {
            m,
            normalizer: sinc_normalizer(m)?,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `C_m`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn density(&self, t: f64) -> f64 {
        self.normalizer * sinc_power(self.m, t)
    }

    /// `(8em)^{2m} / ((2e)^n (4em + |t|)^{2m})`, the bound on `|f_m^{(n)}(t)|`.
    pub fn derivative_bound(&self, order: u32, t: f64) -> f64 {
        let m = self.m as f64;
        let width = 4.0 * E * m;
        let two_m = 2 * self.m as i32;
        (2.0 * width / (width + t.abs())).powi(two_m) / (2.0 * E).powi(order as i32)
    }
}

/// `(sin(t/4em) / (t/4em))^{2m}`, equal to 1 at the origin.
fn sinc_power(m: u32, t: f64) -> f64 {
    let s = t / (4.0 * E * m as f64);
    sinc(s).powi(2 * m as i32)
}

/// `sin t / t` with the removable singularity filled in.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

/// Periods of `sin` integrated by quadrature before the tail takes over.
const SINC_PERIODS: usize = 2000;

/// `∫_ℝ (sin(t/4em)/(t/4em))^{2m} dt = 4em · ∫_ℝ (sin u / u)^{2m} du`.
///
/// The integral over `[0, Kπ]` is summed period by period with adaptive
/// Gauss–Kronrod; beyond it, `sin^{2m}` is replaced by its mean
/// `C(2m, m)/4^m`, leaving an oscillatory remainder of order
/// `(Kπ)^{-2m-1}`.
fn sinc_power_integral(m: u32) -> f64 {
    let two_m = 2 * m as i32;
    let f = |u: f64| sinc(u).powi(two_m);
    let mut body = 0.0;
    for k in 0..SINC_PERIODS {
        let (a, b) = (k as f64 * PI, (k + 1) as f64 * PI);
        body += integrate(f, a, b, 1e-16, 1e-13).value;
    }
    let big_l = SINC_PERIODS as f64 * PI;
    let mean_sin = binomial(2 * m, m) / 4f64.powi(m as i32);
    let tail = mean_sin * big_l.powi(1 - two_m) / (two_m as f64 - 1.0);
    2.0 * 4.0 * E * m as f64 * (body + tail)
}

/// `∫_ℝ (sin x / x)^{2m} dx` from the classical finite sum
/// `π / (2^{2m-1} (2m-1)!) · Σ_{k<m} (-1)^k C(2m, k) (2m - 2k)^{2m-1}`.
///
/// Alternating, so only accurate for small `m` (fine up to `m = 10`).
pub fn sinc_power_integral_exact(m: u32) -> f64 {
    let n = 2 * m;
    let fact: f64 = (1..n).map(|i| i as f64).product();
    let sum: f64 = (0..m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n, k) * ((n - 2 * k) as f64).powi(n as i32 - 1)
        })
        .sum();
    2.0 * PI / (2f64.powi(n as i32) * fact) * sum
}

/// `C_m`, the constant making `f_m` a probability density.
pub fn sinc_normalizer(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(invalid_parameter("kernel order m must be at least 1"));
    }
    Ok(1.0 / sinc_power_integral(m))
}

/// `f_m(t)`.
pub fn sinc_density(m: u32, t: f64) -> Result<f64> {
    Ok(SincKernel::new(m)?.density(t))
}

/// `n`-th derivative by central differences with two rounds of Richardson
/// extrapolation (error `O(h^6)`).
pub fn central_derivative(f: impl Fn(f64) -> f64, t: f64, order: u32, h: f64) -> f64 {
    let raw = |h: f64| {
        let n = order as i32;
        let mut acc = 0.0;
        for k in 0..=order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let offset = (n as f64 / 2.0 - k as f64) * h;
            acc += sign * binomial(order, k) * f(t + offset);
        }
        acc / h.powi(n)
    };
    let (d1, d2, d3) = (raw(h), raw(h / 2.0), raw(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Relative slack allowed on finite-difference derivative checks.
pub const DERIVATIVE_SLACK: f64 = 0.05;

/// Whether `|f_m^{(n)}(t)|`, estimated by finite differences, respects the
/// kernel derivative bound with 5% slack.
pub fn sinc_derivative_check(kernel: &SincKernel, order: u32, t: f64) -> Result<bool> {
    if order > 5 || kernel.m() > 3 {
        return Err(invalid_parameter(
            "finite-difference checks support order <= 5 and m <= 3",
        ));
    }
    let est = estimate_kernel_derivative(kernel, order, t);
    Ok(est.abs() <= (1.0 + DERIVATIVE_SLACK) * kernel.derivative_bound(order, t))
}

pub fn estimate_kernel_derivative(kernel: &SincKernel, order: u32, t: f64) -> f64 {
    if order == 0 {
        return kernel.density(t);
    }
    let h = 4.0 * E * kernel.m() as f64 / 8.0;
    central_derivative(|s| kernel.density(s), t, order, h)
}

/// Whether `|dⁿ/dtⁿ sin t / t| <= 2 / (1 + |t|)` holds at `t` with 5% slack.
pub fn sinc_base_check(order: u32, t: f64) -> Result<bool> {
    if order > 5 {
        return Err(invalid_parameter("finite-difference checks support order <= 5"));
    }
    let est = estimate_sinc_derivative(order, t);
    Ok(est.abs() <= (1.0 + DERIVATIVE_SLACK) * 2.0 / (1.0 + t.abs()))
}

pub fn estimate_sinc_derivative(order: u32, t: f64) -> f64 {
    if order == 0 {
        return sinc(t);
    }
    central_derivative(sinc, t, order, 0.125)
}

/// Number of atoms in the reference discretization of the uniform law.
pub const REFERENCE_ATOMS: usize = 4096;

/// Two centered measures on `[-V, V]` whose first `2k - 1` moments agree:
/// the `k`-node Gauss–Legendre rule for the uniform law on `[-V, V]`, and a
/// `4096`-node Gauss–Legendre discretization of the same uniform law.
pub fn moment_matched_pair(k: usize, v: f64) -> Result<(GridMeasure, GridMeasure)> {
    if k < 1 {
        return Err(invalid_parameter("k must be at least 1"));
    }
    if !(v > 0.0) {
        return Err(invalid_parameter("V must be positive"));
    }
    Ok((uniform_quadrature_measure(k, v), uniform_quadrature_measure(REFERENCE_ATOMS, v)))
}

fn uniform_quadrature_measure(k: usize, v: f64) -> GridMeasure {
    let (nodes, weights) = gauss_legendre(k);
    let atoms = nodes.iter().map(|x| v * x).collect();
    let weights = weights.iter().map(|w| 0.5 * w).collect();
    GridMeasure::normalized(atoms, weights).expect("Gauss-Legendre nodes are distinct with positive weights")
}

/// Tolerance on moment gaps treated as zero.
pub const MOMENT_MATCH_TOLERANCE: f64 = 1e-8;

/// Numerical `χ²` and total-variation figures for Gaussian location
/// mixtures of two moment-matched measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareCheck {
    /// `χ²(P * N(0,1), Q * N(0,1))` by adaptive quadrature.
    pub chi_square: f64,
    /// `e^{5V²/2} (2V²)^k / k!`.
    pub chi_square_bound: f64,
    /// Single-sample total variation distance.
    pub tv: f64,
    /// `(1 + χ²)^n - 1`, which dominates the squared `n`-sample TV.
    pub tv_sq_product: f64,
    /// `(1 + e^{5V²/2} (2V²)^k / k!)^n - 1`.
    pub tv_sq_bound: f64,
    /// Quadrature error estimate plus a bound on the truncated tails.
    pub error: f64,
}

impl ChiSquareCheck {
    pub fn holds(&self) -> bool {
        self.chi_square <= self.chi_square_bound && self.tv_sq_product <= self.tv_sq_bound
    }
}

/// Half-width added to `V` for the χ² integration window.
const MIXTURE_WINDOW: f64 = 10.0;

/// Checks the χ² bound for Gaussian mixtures of `P` and `Q`.
pub fn chi2_tv_bound(p: &GridMeasure, q: &GridMeasure, n: usize, v: f64, k: u32) -> Result<ChiSquareCheck> {
    if !(v > 0.0) || k < 1 {
        return Err(invalid_parameter("need V > 0 and k >= 1"));
    }
    let slack = 1e-12 * v.max(1.0);
    for mu in [p, q] {
        if mu.atoms().iter().any(|a| a.abs() > v + slack) {
            return Err(invalid_input(format!("measure leaves [-{v}, {v}]")));
        }
        if mu.mean().abs() > MOMENT_MATCH_TOLERANCE {
            return Err(invalid_input("measures must be centered"));
        }
    }
    for l in 1..k {
        let gap = moment_gap(p, q, l)?;
        if gap > MOMENT_MATCH_TOLERANCE {
            return Err(invalid_input(format!("moment {l} differs by {gap:e}")));
        }
    }

    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mixture = |mu: &GridMeasure, x: f64| -> f64 {
        mu.atoms()
            .iter()
            .zip(mu.weights_slice())
            .map(|(&a, &w)| w * phi(x - a))
            .sum()
    };
    let lo = -v - MIXTURE_WINDOW;
    let hi = v + MIXTURE_WINDOW;
    let chi = integrate(
        |x| {
            let (fp, fq) = (mixture(p, x), mixture(q, x));
            if fq > 0.0 {
                (fp - fq).powi(2) / fq
            } else {
                0.0
            }
        },
        lo,
        hi,
        1e-10,
        1e-8,
    );
    let tv = integrate(|x| 0.5 * (mixture(p, x) - mixture(q, x)).abs(), lo, hi, 1e-10, 1e-8);
    // Outside the window p/q <= e^{2V|x|}, so (p - q)²/q <= p·e^{2V|x|} + q,
    // and ∫_L^∞ φ(x - V) e^{2Vx} dx = e^{4V²} Φ̄(L - 3V).
    let upper_tail = |shift: f64| 0.5 * statrs::function::erf::erfc((MIXTURE_WINDOW + v - shift) / 2f64.sqrt());
    let tail = 2.0 * ((4.0 * v * v).exp() * upper_tail(3.0 * v) + upper_tail(v));

    let kf = k as f64;
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    let chi_square_bound = (2.5 * v * v).exp() * (2.0 * v * v).powf(kf) / factorial;
    let nf = n as f64;
    Ok(ChiSquareCheck {
        chi_square: chi.value,
        chi_square_bound,
        tv: tv.value,
        tv_sq_product: (nf * chi.value.ln_1p()).exp_m1(),
        tv_sq_bound: (nf * chi_square_bound.ln_1p()).exp_m1(),
        error: chi.error + tail,
    })
}
