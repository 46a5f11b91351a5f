//! Numerical verification sweeps over the core inequalities, reported as
//! one pass/fail line per check plus the constants observed on the way.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uir_core::isotonic::{empirical_lp, pushforward, round_to_isotonic, DesignPoints, IsotonicFn};
use uir_core::measures::{wasserstein_p, DiscreteMeasure, EmpiricalMeasure, GridMeasure};
use uir_core::moments::{
    chi2_tv_bound, deconv_moment_rhs, moment_gap, moment_matched_pair, sinc_base_check, sinc_derivative_check,
    sinc_normalizer, sinc_power_integral_exact, w2_to_moments_rhs, wasserstein_moment_surrogate, SincKernel,
    MOMENT_MATCH_TOLERANCE,
};
use uir_core::noise::{make_noise, Grid, NoiseFamily};

use crate::error::CliResult;

/// Deliberate corruption used to confirm that a check can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Shift the low-order measure of every moment-matched pair by this
    /// amount, so its first moment no longer matches.
    MomentGap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnoseOptions {
    pub seed: u64,
    pub perturbation: Option<Perturbation>,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub observed: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `key = value` lines: `<check>.status` then `<check>.<observed>`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}.status = {}", c.name, if c.passed { "pass" } else { "fail" });
            for (key, value) in &c.observed {
                let _ = writeln!(out, "{}.{} = {:e}", c.name, key, value);
            }
        }
        let _ = writeln!(out, "overall.status = {}", if self.all_passed() { "pass" } else { "fail" });
        out
    }
}

pub fn diagnose(options: &DiagnoseOptions) -> CliResult<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let checks = vec![
        subexponential_moments()?,
        isometry(&mut rng)?,
        round_close(&mut rng)?,
        empirical_w2(&mut rng)?,
        proj_close(&mut rng)?,
        w2_to_moments(&mut rng)?,
        moments_deconvolution(&mut rng)?,
        moment_matching_wp(&mut rng)?,
        sinc_normalizers()?,
        kernel_derivatives()?,
        sinc_base()?,
        priors(options.perturbation)?,
        chi_square()?,
    ];
    Ok(Report { checks })
}

/// Random measure with up to 7 atoms in `[-bound, bound]`.
pub fn random_bounded_measure(rng: &mut impl Rng, bound: f64) -> GridMeasure {
    let k = rng.random_range(1..8);
    let mut atoms: Vec<f64> = (0..k).map(|_| rng.random_range(-bound..=bound)).collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    let weights = atoms.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    GridMeasure::normalized(atoms, weights).expect("sorted distinct atoms")
}

fn random_monotone(rng: &mut impl Rng, design: &DesignPoints, bound: f64) -> CliResult<IsotonicFn> {
    let mut v: Vec<f64> = (0..design.len()).map(|_| rng.random_range(-bound..=bound)).collect();
    v.sort_by(f64::total_cmp);
    Ok(IsotonicFn::new(design.clone(), v, bound)?)
}

fn subexponential_moments() -> CliResult<Check> {
    let mut worst = 0.0f64;
    for fam in [
        NoiseFamily::Gaussian { sd: 1.0 },
        NoiseFamily::Laplace { scale: 1.0 },
        NoiseFamily::Uniform { half_width: 1.0 },
    ] {
        let noise = make_noise(fam)?;
        for p in 1..=8 {
            let p = p as f64;
            worst = worst.max(noise.abs_moment(p).powf(1.0 / p) / (p * noise.sigma()));
        }
    }
    Ok(Check {
        name: "subexponential_moments",
        passed: worst <= 1.0,
        observed: vec![("max_ratio", worst)],
    })
}

fn isometry(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let design = DesignPoints::equispaced(200)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (f, g) = (random_monotone(rng, &design, 2.0)?, random_monotone(rng, &design, 2.0)?);
        for p in [1.0, 2.0, 3.0] {
            let lp = empirical_lp(&f, &g, p)?;
            let w = wasserstein_p(&pushforward(&f), &pushforward(&g), p)?;
            worst = worst.max((lp - w).abs());
        }
    }
    Ok(Check {
        name: "isometry",
        passed: worst <= 1e-10,
        observed: vec![("max_abs_difference", worst)],
    })
}

fn round_close(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for n in [16usize, 256, 4096] {
        let design = DesignPoints::equispaced(n)?;
        for _ in 0..100 {
            let mu = random_bounded_measure(rng, 1.0);
            let g = round_to_isotonic(&mu, &design, 1.0)?;
            let w = wasserstein_p(&mu, &pushforward(&g), 2.0)?;
            worst = worst.max(w / (2.0 / (n as f64).sqrt()));
        }
    }
    Ok(Check {
        name: "round_close",
        passed: worst <= 1.0,
        observed: vec![("max_ratio_to_bound", worst)],
    })
}

fn empirical_w2(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let noise = make_noise(NoiseFamily::Gaussian { sd: 1.0 })?;
    let k = noise.sigma();
    let mut worst = 0.0f64;
    for n in [64usize, 256, 1024] {
        let reps = 200;
        let mut total = 0.0;
        for _ in 0..reps {
            let sample = EmpiricalMeasure::from_samples(noise.sample_n(n, rng))?;
            total += noise.w2_sq_to_sample(&sample);
        }
        let mean = total / reps as f64;
        worst = worst.max(mean / (16.0 * k * k / (n as f64).sqrt()));
    }
    Ok(Check {
        name: "empirical_w2",
        passed: worst <= 1.0,
        observed: vec![("max_ratio_to_bound", worst)],
    })
}

fn proj_close(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let noise = make_noise(NoiseFamily::Gaussian { sd: 0.3 })?;
    let v = 1.0;
    let scale = v + noise.sigma();
    let mut worst = 0.0f64;
    for n in [100usize, 1000, 10_000] {
        let grid = Grid::quantization(v, noise.sigma(), n)?;
        let draws = 20_000;
        let mse: f64 = (0..draws)
            .map(|_| {
                let z = rng.random_range(-v..=v) + noise.sample(rng);
                (grid.project(z) - z).powi(2)
            })
            .sum::<f64>()
            / draws as f64;
        worst = worst.max(mse / (8.0 * scale * scale / (n as f64).sqrt()));
    }
    Ok(Check {
        name: "proj_close",
        passed: worst <= 1.0,
        observed: vec![("max_ratio_to_bound", worst)],
    })
}

fn w2_to_moments(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (mu, nu) = (random_bounded_measure(rng, 1.0), random_bounded_measure(rng, 1.0));
        for l in 1..=6 {
            let lhs = moment_gap(&mu, &nu, l)?;
            let rhs = w2_to_moments_rhs(&mu, &nu, l, 2.0)?;
            if lhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
        }
    }
    Ok(Check {
        name: "w2_to_moments",
        passed: worst <= 1.0 + 1e-8,
        observed: vec![("max_ratio", worst)],
    })
}

fn moments_deconvolution(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let noise = make_noise(NoiseFamily::Gaussian { sd: 1.0 })?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (mu, nu) = (random_bounded_measure(rng, 1.0), random_bounded_measure(rng, 1.0));
        for l in 1..=6 {
            let lhs = moment_gap(&mu, &nu, l)?;
            let rhs = deconv_moment_rhs(&mu, &nu, &noise, l)?;
            if lhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
        }
    }
    Ok(Check {
        name: "moments_deconvolution",
        passed: worst <= 1.0 + 1e-8,
        observed: vec![("max_ratio", worst)],
    })
}

/// Ceiling on `W_p / surrogate` over the random sweep.
pub const SURROGATE_RATIO_CEILING: f64 = 10.0;

fn moment_matching_wp(rng: &mut ChaCha8Rng) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (mu, nu) = (random_bounded_measure(rng, 1.0), random_bounded_measure(rng, 1.0));
        for p in [1.0, 2.0] {
            let surrogate = wasserstein_moment_surrogate(&mu, &nu, p, 8)?;
            if surrogate > 0.0 {
                worst = worst.max(wasserstein_p(&mu, &nu, p)? / surrogate);
            }
        }
    }
    Ok(Check {
        name: "moment_matching_wp",
        passed: worst <= SURROGATE_RATIO_CEILING,
        observed: vec![("max_ratio", worst)],
    })
}

fn sinc_normalizers() -> CliResult<Check> {
    let (mut worst_mass, mut largest) = (0.0f64, 0.0f64);
    for m in 1..=6 {
        let c = sinc_normalizer(m)?;
        let mass = c * 4.0 * std::f64::consts::E * m as f64 * sinc_power_integral_exact(m);
        worst_mass = worst_mass.max((mass - 1.0).abs());
        largest = largest.max(c);
    }
    Ok(Check {
        name: "sinc_normalizer",
        passed: worst_mass <= 1e-6 && largest <= 1.0,
        observed: vec![("max_mass_error", worst_mass), ("max_normalizer", largest)],
    })
}

fn kernel_derivatives() -> CliResult<Check> {
    let mut failures = 0usize;
    for m in 1..=3 {
        let kernel = SincKernel::new(m)?;
        for order in 0..=4 {
            for i in -100..=100 {
                if !sinc_derivative_check(&kernel, order, i as f64 * 0.5)? {
                    failures += 1;
                }
            }
        }
    }
    Ok(Check {
        name: "kernel_derivative_bound",
        passed: failures == 0,
        observed: vec![("violations", failures as f64)],
    })
}

fn sinc_base() -> CliResult<Check> {
    let mut failures = 0usize;
    for order in 0..=4 {
        for i in -100..=100 {
            if !sinc_base_check(order, i as f64 * 0.5)? {
                failures += 1;
            }
        }
    }
    Ok(Check {
        name: "sinc_derivative_bound",
        passed: failures == 0,
        observed: vec![("violations", failures as f64)],
    })
}

/// `W_1(P_k, Q_k) ≥ PRIORS_W1_CONSTANT · V / k` for the quadrature pairs.
pub const PRIORS_W1_CONSTANT: f64 = 0.05;

fn priors(perturbation: Option<Perturbation>) -> CliResult<Check> {
    let v = 1.0;
    let (mut worst_gap, mut min_scaled, mut max_scaled) = (0.0f64, f64::INFINITY, 0.0f64);
    for k in 1..=8usize {
        let (mut p, q) = moment_matched_pair(k, v)?;
        if let Some(Perturbation::MomentGap(eps)) = perturbation {
            let atoms = p.atoms().iter().map(|a| a + eps).collect();
            p = GridMeasure::new(atoms, p.weights_slice().to_vec())?;
        }
        for l in 1..=(2 * k as u32 - 1) {
            worst_gap = worst_gap.max(moment_gap(&p, &q, l)?);
        }
        let scaled = wasserstein_p(&p, &q, 1.0)? * k as f64 / v;
        min_scaled = min_scaled.min(scaled);
        max_scaled = max_scaled.max(scaled);
    }
    Ok(Check {
        name: "priors",
        passed: worst_gap <= MOMENT_MATCH_TOLERANCE && min_scaled >= PRIORS_W1_CONSTANT && max_scaled <= 4.0,
        observed: vec![
            ("max_moment_gap", worst_gap),
            ("min_k_w1_over_v", min_scaled),
            ("max_k_w1_over_v", max_scaled),
        ],
    })
}

fn chi_square() -> CliResult<Check> {
    let mut passed = true;
    let mut worst = 0.0f64;
    for (k, v) in [(2usize, 0.5), (3, 1.0), (4, 1.0)] {
        let (p, q) = moment_matched_pair(k, v)?;
        let c = chi2_tv_bound(&p, &q, 100, v, k as u32)?;
        passed &= c.holds();
        worst = worst.max(c.chi_square / c.chi_square_bound);
    }
    Ok(Check {
        name: "chi_square",
        passed,
        observed: vec![("max_ratio_to_bound", worst)],
    })
}
