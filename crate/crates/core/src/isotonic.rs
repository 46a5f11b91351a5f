//! Monotone regression functions observed at design points.

use std::sync::Arc;

use crate::error::{invalid_input, invalid_parameter, Result};
use crate::measures::{quantile_index, DiscreteMeasure, EmpiricalMeasure, GridMeasure, MASS_TOLERANCE};

/// Strictly increasing design points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoints {
    x: Arc<[f64]>,
}

impl DesignPoints {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid_input("design needs at least one point"));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid_input("design points must lie in [0, 1]"));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid_input("design points must be strictly increasing"));
        }
        Ok(Self { x: x.into() })
    }

    /// Sorts unordered design points. Duplicates are rejected.
    pub fn from_unordered(mut x: Vec<f64>) -> Result<Self> {
        x.sort_by(f64::total_cmp);
        Self::new(x)
    }

    /// `x_i = i/n` for `i = 1..=n`.
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid_parameter("design needs at least one point"));
        }
        Self::new((1..=n).map(|i| i as f64 / n as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// A nondecreasing function known through its values at the design points,
/// bounded in absolute value by `bound` (which may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFn {
    design: DesignPoints,
    values: Vec<f64>,
    bound: f64,
}

impl IsotonicFn {
    pub fn new(design: DesignPoints, values: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(invalid_parameter(format!("bound V = {bound} must be positive")));
        }
        if values.len() != design.len() {
            return Err(invalid_input(format!(
                "{} values for {} design points",
                values.len(),
                design.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("function values must be finite"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid_input("function values must be nondecreasing"));
        }
        if values.iter().any(|v| v.abs() > bound) {
            return Err(invalid_input(format!("function values exceed the bound {bound}")));
        }
        Ok(Self { design, values, bound })
    }

    /// Samples a nondecreasing closure at the design points.
    pub fn from_fn(design: DesignPoints, bound: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = design.as_slice().iter().map(|&x| f(x)).collect();
        Self::new(design, values, bound)
    }

    pub fn design(&self) -> &DesignPoints {
        &self.design
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Piecewise-constant, right-continuous extension off the design points.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.design.as_slice().partition_point(|&xi| xi <= x);
        self.values[k.saturating_sub(1)]
    }
}

/// `π_f = (1/n) Σ δ_{f(x_i)}`.
pub fn pushforward(f: &IsotonicFn) -> EmpiricalMeasure {
    EmpiricalMeasure::new(f.values.clone()).expect("isotonic values are sorted and finite")
}

/// `((1/n) Σ |f(x_i) - g(x_i)|^p)^{1/p}`.
pub fn empirical_lp(f: &IsotonicFn, g: &IsotonicFn, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid_parameter(format!("p = {p} must be >= 1")));
    }
    if f.design != g.design {
        return Err(invalid_input("functions are observed on different design points"));
    }
    lp_distance(&f.values, &g.values, p)
}

/// Empirical ℓ_p distance between two equal-length value vectors.
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid_input("value vectors must be nonempty and of equal length"));
    }
    let n = a.len() as f64;
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if p == 1.0 {
                d
            } else if p == 2.0 {
                d * d
            } else {
                d.powf(p)
            }
        })
        .sum();
    Ok((s / n).powf(1.0 / p))
}

/// Least-squares isotonic fit of coupled responses by pool-adjacent-violators.
///
/// With `bound = Some(V)` the fit is clipped to `[-V, V]`; otherwise the
/// returned function carries an infinite bound.
pub fn pava(x: &DesignPoints, y: &[f64], bound: Option<f64>) -> Result<IsotonicFn> {
    if y.len() != x.len() {
        return Err(invalid_input(format!("{} responses for {} design points", y.len(), x.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("responses must be finite"));
    }
    // Blocks of (sum, count); merging keeps block means increasing.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        let mut cur = (v, 1usize);
        while let Some(&(s, c)) = blocks.last() {
            if s / c as f64 >= cur.0 / cur.1 as f64 {
                blocks.pop();
                cur = (cur.0 + s, cur.1 + c);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut values = Vec::with_capacity(y.len());
    for (s, c) in blocks {
        let mean = s / c as f64;
        values.extend(std::iter::repeat_n(mean, c));
    }
    let bound = match bound {
        Some(v) => {
            values.iter_mut().for_each(|t| *t = t.clamp(-v, v));
            v
        }
        None => f64::INFINITY,
    };
    IsotonicFn::new(x.clone(), values, bound)
}

/// Pairs the `i`-th smallest response with the `i`-th design point.
pub fn naive_sorted(x: &DesignPoints, y: &[f64]) -> Result<IsotonicFn> {
    if y.len() != x.len() {
        return Err(invalid_input(format!("{} responses for {} design points", y.len(), x.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("responses must be finite"));
    }
    let mut values = y.to_vec();
    values.sort_by(f64::total_cmp);
    IsotonicFn::new(x.clone(), values, f64::INFINITY)
}

/// Slack allowed when checking that a measure lives in `[-V, V]`.
pub(crate) fn support_slack(v: f64) -> f64 {
    1e-12 * v.max(1.0)
}

/// Rounds a measure on `[-V, V]` to a monotone function via
/// `ĝ(x_i) = Q_μ(i/n)`.
pub fn round_to_isotonic(mu: &GridMeasure, design: &DesignPoints, v: f64) -> Result<IsotonicFn> {
    if !(v > 0.0) {
        return Err(invalid_parameter(format!("bound V = {v} must be positive")));
    }
    let slack = support_slack(v);
    let support = mu.support();
    if support.atoms().iter().any(|a| a.abs() > v + slack) {
        return Err(invalid_input(format!("measure support leaves [-{v}, {v}]")));
    }
    let cum = mu.cumulative();
    let n = design.len();
    let values = (1..=n)
        .map(|i| {
            // a cumulative weight within rounding of i/n counts as reaching it;
            // otherwise an ulp of summation error can skip to the next atom
            let u = i as f64 / n as f64 - MASS_TOLERANCE;
            mu.atoms()[quantile_index(&cum, u)].clamp(-v, v)
        })
        .collect();
    IsotonicFn::new(design.clone(), values, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::wasserstein_p;
    use proptest::prelude::*;

    fn design(x: &[f64]) -> DesignPoints {
        DesignPoints::new(x.to_vec()).unwrap()
    }

    #[test]
    fn pushforward_examples() {
        let d = DesignPoints::equispaced(5).unwrap();
        let f = IsotonicFn::from_fn(d, 1.0, |_| 0.3).unwrap();
        let pi = pushforward(&f);
        assert_eq!(pi.len(), 5);
        assert!(pi.atoms().iter().all(|&a| a == 0.3));
        let f = IsotonicFn::new(design(&[0.0, 0.5, 1.0]), vec![0.0, 0.5, 1.0], 1.0).unwrap();
        assert_eq!(pushforward(&f).atoms(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn empirical_lp_examples() {
        let d = DesignPoints::equispaced(6).unwrap();
        let f = IsotonicFn::from_fn(d.clone(), 5.0, |x| 2.0 * x).unwrap();
        let g = IsotonicFn::from_fn(d, 5.0, |x| 2.0 * x - 0.7).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(empirical_lp(&f, &f, p).unwrap(), 0.0);
            assert!((empirical_lp(&f, &g, p).unwrap() - 0.7).abs() < 1e-12);
        }
        let other = IsotonicFn::from_fn(DesignPoints::equispaced(5).unwrap(), 5.0, |x| x).unwrap();
        assert!(matches!(empirical_lp(&f, &other, 1.0), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn isotonic_fn_invariants() {
        let d = design(&[0.1, 0.2]);
        assert!(IsotonicFn::new(d.clone(), vec![1.0, 0.0], 2.0).is_err());
        assert!(IsotonicFn::new(d.clone(), vec![0.0, 3.0], 2.0).is_err());
        assert!(IsotonicFn::new(d.clone(), vec![0.0], 2.0).is_err());
        assert!(IsotonicFn::new(d, vec![0.0, 1.0], 0.0).is_err());
        assert!(DesignPoints::new(vec![0.2, 0.1]).is_err());
        assert!(DesignPoints::new(vec![0.2, 1.1]).is_err());
    }

    #[test]
    fn right_continuous_extension() {
        let f = IsotonicFn::new(design(&[0.2, 0.5, 0.8]), vec![-1.0, 0.0, 2.0], 2.0).unwrap();
        assert_eq!(f.eval(0.0), -1.0);
        assert_eq!(f.eval(0.2), -1.0);
        assert_eq!(f.eval(0.49), -1.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.0), 2.0);
    }

    #[test]
    fn pava_examples() {
        let d = design(&[0.1, 0.2, 0.3]);
        assert_eq!(pava(&d, &[-1.0, 0.0, 2.0], None).unwrap().values(), &[-1.0, 0.0, 2.0]);
        assert_eq!(pava(&d, &[1.0, 0.0, 2.0], None).unwrap().values(), &[0.5, 0.5, 2.0]);
        assert_eq!(pava(&design(&[0.1, 0.2]), &[1.0, 0.0], None).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(pava(&d, &[1.0, 0.0, 2.0], Some(1.0)).unwrap().values(), &[0.5, 0.5, 1.0]);
    }

    /// Brute force over nondecreasing sequences on a value grid.
    fn brute_isotonic_sse(y: &[f64], grid: &[f64]) -> f64 {
        fn rec(y: &[f64], grid: &[f64], start: usize, acc: f64, best: &mut f64) {
            if y.is_empty() {
                *best = best.min(acc);
                return;
            }
            for k in start..grid.len() {
                rec(&y[1..], grid, k, acc + (y[0] - grid[k]).powi(2), best);
            }
        }
        let mut best = f64::INFINITY;
        rec(y, grid, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn pava_minimizes_squared_error_against_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // multiples of 1/8 in [-2, 2]; the optimum (a block mean of such
        // responses with block size <= 4) then lies on a 1/96 grid
        let grid: Vec<f64> = (-192..=192).map(|k| k as f64 / 96.0).collect();
        for _ in 0..30 {
            let n = rng.random_range(1..=4);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-16..=16) as f64 / 8.0).collect();
            let d = DesignPoints::equispaced(n).unwrap();
            let fit = pava(&d, &y, None).unwrap();
            let sse: f64 = fit.values().iter().zip(&y).map(|(v, t)| (v - t).powi(2)).sum();
            let brute = brute_isotonic_sse(&y, &grid);
            assert!((sse - brute).abs() < 1e-12, "y={y:?}: pava {sse} vs brute {brute}");
        }
    }

    #[test]
    fn naive_sorted_examples() {
        let d = design(&[0.1, 0.2]);
        assert_eq!(naive_sorted(&d, &[3.0, -1.0]).unwrap().values(), &[-1.0, 3.0]);
        let d = DesignPoints::equispaced(50).unwrap();
        let f = IsotonicFn::from_fn(d.clone(), 1.0, |x| (3.0 * x).tanh()).unwrap();
        let mut y = f.values().to_vec();
        y.reverse();
        y.swap(3, 17);
        assert_eq!(naive_sorted(&d, &y).unwrap().values(), f.values());
    }

    #[test]
    fn rounding_examples() {
        let d = DesignPoints::equispaced(4).unwrap();
        let g = round_to_isotonic(&GridMeasure::dirac(0.25), &d, 1.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.25));
        let mu = GridMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let g = round_to_isotonic(&mu, &d, 1.0).unwrap();
        assert_eq!(g.values(), &[-1.0, -1.0, 1.0, 1.0]);
        let wide = GridMeasure::new(vec![-2.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(round_to_isotonic(&wide, &d, 1.0), Err(crate::Error::InvalidInput(_))));
    }

    fn monotone_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, n).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
    }

    proptest! {
        #[test]
        fn isometry_between_lp_and_wasserstein(f in monotone_values(40), g in monotone_values(40), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
            let d = DesignPoints::equispaced(40).unwrap();
            let f = IsotonicFn::new(d.clone(), f, 3.0).unwrap();
            let g = IsotonicFn::new(d, g, 3.0).unwrap();
            let lp = empirical_lp(&f, &g, p).unwrap();
            let w = wasserstein_p(&pushforward(&f), &pushforward(&g), p).unwrap();
            prop_assert!((lp - w).abs() <= 1e-10);
        }

        #[test]
        fn rounding_stays_close(weights in prop::collection::vec(0.0f64..1.0, 2..20), n in 1usize..300) {
            let k = weights.len();
            let atoms: Vec<f64> = (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect();
            prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let mu = GridMeasure::normalized(atoms, weights).unwrap();
            let d = DesignPoints::equispaced(n).unwrap();
            let g = round_to_isotonic(&mu, &d, 1.0).unwrap();
            let w2 = wasserstein_p(&mu, &pushforward(&g), 2.0).unwrap();
            prop_assert!(w2 <= 2.0 / (n as f64).sqrt());
        }
    }
    #[test]
    fn rounding_ignores_summation_error_in_weights() {
        // 0.24900000000000005 + 0.24999999999999983 falls one ulp short of 0.499
        let mu = GridMeasure::new(
            vec![-0.9, -0.3, 0.0, 0.4],
            vec![0.24900000000000005, 0.24999999999999983, 2e-16, 0.501 - 2e-16],
        )
        .unwrap();
        let design = DesignPoints::equispaced(1000).unwrap();
        let g = round_to_isotonic(&mu, &design, 1.0).unwrap();
        assert_eq!(g.values()[498], -0.3);
        assert_eq!(g.values()[499], 0.4);
    }
}
