//! Univariate discrete probability measures and exact one-dimensional
//! optimal transport.
//!
//! On the real line the optimal coupling for any convex cost `|a - b|^p` is
//! the monotone (quantile) coupling, so every distance here is computed by a
//! single merged sweep over the two cumulative weight partitions of `[0, 1]`.

use crate::error::{invalid_input, invalid_parameter, Result};

/// Read access shared by every discrete measure in the crate.
pub trait DiscreteMeasure {
    /// Atoms in nondecreasing order.
    fn atoms(&self) -> &[f64];

    /// Mass carried by atom `i`.
    fn weight(&self, i: usize) -> f64;

    fn len(&self) -> usize {
        self.atoms().len()
    }

    fn is_empty(&self) -> bool {
        self.atoms().is_empty()
    }

    fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Cumulative mass through each atom, normalized so the last entry is
    /// exactly `1.0`.
    fn cumulative(&self) -> Vec<f64>;

    /// `E X^l`, summed directly over the atoms.
    fn raw_moment(&self, l: u32) -> f64 {
        self.atoms()
            .iter()
            .enumerate()
            .map(|(i, &a)| self.weight(i) * a.powi(l as i32))
            .sum()
    }

    fn mean(&self) -> f64 {
        self.raw_moment(1)
    }
}

/// Uniform weights `1/n` on a sorted list of atoms (repeats allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Wraps atoms that are already sorted.
    pub fn new(atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid_input("empirical measure needs at least one atom"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(invalid_input("empirical measure atoms must be finite"));
        }
        if atoms.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid_input("empirical measure atoms must be nondecreasing"));
        }
        Ok(Self { atoms })
    }

    /// Sorts an arbitrary sample and wraps it.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|a| !a.is_finite()) {
            return Err(invalid_input("empirical measure atoms must be finite"));
        }
        samples.sort_by(f64::total_cmp);
        Self::new(samples)
    }

    pub fn into_atoms(self) -> Vec<f64> {
        self.atoms
    }
}

impl DiscreteMeasure for EmpiricalMeasure {
    fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    fn weight(&self, _i: usize) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    fn cumulative(&self) -> Vec<f64> {
        let n = self.atoms.len() as f64;
        (1..=self.atoms.len()).map(|i| i as f64 / n).collect()
    }
}

/// Tolerance on the total mass of a [`GridMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Nonnegative weights on strictly increasing atoms, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        validate_grid(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid_input(format!(
                "grid measure weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Like [`GridMeasure::new`] but rescales the weights to unit mass.
    pub fn normalized(atoms: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        validate_grid(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid_input("grid measure has zero total mass"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { atoms, weights })
    }

    pub fn dirac(at: f64) -> Self {
        Self {
            atoms: vec![at],
            weights: vec![1.0],
        }
    }

    pub fn weights_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Drops atoms with zero weight.
    pub fn support(&self) -> Self {
        let (atoms, weights) = self
            .atoms
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&a, &w)| (a, w))
            .unzip();
        Self { atoms, weights }
    }
}

fn validate_grid(atoms: &[f64], weights: &[f64]) -> Result<()> {
    if atoms.is_empty() {
        return Err(invalid_input("grid measure needs at least one atom"));
    }
    if atoms.len() != weights.len() {
        return Err(invalid_input("grid measure atoms and weights differ in length"));
    }
    if atoms.iter().any(|a| !a.is_finite()) {
        return Err(invalid_input("grid measure atoms must be finite"));
    }
    if atoms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid_input("grid measure atoms must be strictly increasing"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid_input("grid measure weights must be finite and nonnegative"));
    }
    Ok(())
}

impl DiscreteMeasure for GridMeasure {
    fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    fn cumulative(&self) -> Vec<f64> {
        normalized_cumulative(&self.weights)
    }
}

pub(crate) fn normalized_cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cum: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    let total = acc;
    cum.iter_mut().for_each(|c| *c = (*c / total).min(1.0));
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    cum
}

/// Left-continuous generalized inverse of the CDF: `inf{t : F(t) >= u}`.
pub fn quantile<M: DiscreteMeasure + ?Sized>(mu: &M, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(invalid_parameter(format!("quantile level {u} outside (0, 1]")));
    }
    if mu.is_empty() {
        return Err(invalid_input("quantile of an empty measure"));
    }
    let cum = mu.cumulative();
    Ok(mu.atoms()[quantile_index(&cum, u)])
}

/// Index of the first atom whose cumulative mass reaches `u`.
pub(crate) fn quantile_index(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

#[inline]
pub(crate) fn transport_cost(a: f64, b: f64, p: f64) -> f64 {
    let d = (a - b).abs();
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

fn check_pair<M, N>(mu: &M, nu: &N, p: f64) -> Result<()>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid_parameter(format!("cost exponent p = {p} must be >= 1")));
    }
    if mu.is_empty() || nu.is_empty() {
        return Err(invalid_input("transport between empty measures"));
    }
    Ok(())
}

/// One step of the merged sweep: the cell `(i, j)` of the monotone coupling
/// and the mass it carries (possibly zero).
#[derive(Debug, Clone, Copy)]
struct SweepCell {
    i: usize,
    j: usize,
    mass: f64,
}

/// Walks the north-west corner staircase of the two cumulative partitions.
/// Every row and every column is visited at least once, in order.
fn merged_sweep(cum_a: &[f64], cum_b: &[f64], mut visit: impl FnMut(SweepCell)) {
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0_f64;
    loop {
        let next = cum_a[i].min(cum_b[j]);
        visit(SweepCell {
            i,
            j,
            mass: (next - prev).max(0.0),
        });
        prev = prev.max(next);
        let last_i = i + 1 == cum_a.len();
        let last_j = j + 1 == cum_b.len();
        if last_i && last_j {
            break;
        }
        let advance_i = !last_i && (cum_a[i] <= next || last_j);
        let advance_j = !last_j && (cum_b[j] <= next || last_i);
        if advance_i {
            i += 1;
        }
        if advance_j {
            j += 1;
        }
    }
}

/// `W_p^p(μ, ν) = ∫₀¹ |Q_μ(u) - Q_ν(u)|^p du`, computed exactly.
pub fn wasserstein_pp<M, N>(mu: &M, nu: &N, p: f64) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    check_pair(mu, nu, p)?;
    let (a, b) = (mu.atoms(), nu.atoms());
    let mut total = 0.0;
    merged_sweep(&mu.cumulative(), &nu.cumulative(), |cell| {
        if cell.mass > 0.0 {
            total += cell.mass * transport_cost(a[cell.i], b[cell.j], p);
        }
    });
    Ok(total)
}

/// Wasserstein-p distance between two discrete measures on the line.
pub fn wasserstein_p<M, N>(mu: &M, nu: &N, p: f64) -> Result<f64>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    Ok(wasserstein_pp(mu, nu, p)?.powf(1.0 / p))
}

/// The monotone coupling together with a pair of Kantorovich potentials.
///
/// `phi[i] + psi[j] <= |a_i - b_j|^p` everywhere, with equality on `pairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingWithPotentials {
    /// `(i, j, mass)` with strictly positive mass, in quantile order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub p: f64,
}

impl CouplingWithPotentials {
    /// Transport cost `Σ mass · |a_i - b_j|^p` of the primal plan.
    pub fn primal_cost(&self, a: &[f64], b: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, m)| m * transport_cost(a[i], b[j], self.p))
            .sum()
    }

    /// Dual objective `Σ φ_i w_i + Σ ψ_j v_j`.
    pub fn dual_value(&self, w: &[f64], v: &[f64]) -> f64 {
        let first: f64 = self.phi.iter().zip(w).map(|(f, w)| f * w).sum();
        let second: f64 = self.psi.iter().zip(v).map(|(g, v)| g * v).sum();
        first + second
    }
}

/// Monotone coupling of `mu` and `nu` with dual potentials anchored at
/// `phi[0] = 0`.
///
/// Potentials are propagated along the staircase of the coupling so that
/// they are tight on every coupled pair. Atoms carrying no mass receive the
/// c-transform of the opposite potential, the largest value that keeps the
/// pair dual feasible.
pub fn monotone_coupling_with_potentials<M, N>(
    mu: &M,
    nu: &N,
    p: f64,
) -> Result<CouplingWithPotentials>
where
    M: DiscreteMeasure + ?Sized,
    N: DiscreteMeasure + ?Sized,
{
    check_pair(mu, nu, p)?;
    let (a, b) = (mu.atoms(), nu.atoms());
    let mut phi = vec![0.0; a.len()];
    let mut psi = vec![0.0; b.len()];
    let mut pairs = Vec::with_capacity(a.len() + b.len());
    let mut last: Option<(usize, usize)> = None;

    merged_sweep(&mu.cumulative(), &nu.cumulative(), |cell| {
        let SweepCell { i, j, mass } = cell;
        match last {
            None => {
                phi[i] = 0.0;
                psi[j] = transport_cost(a[i], b[j], p);
            }
            Some((pi, pj)) => {
                if i != pi {
                    // (i, pj) is a zero-mass corner of the staircase.
                    phi[i] = transport_cost(a[i], b[pj], p) - psi[pj];
                }
                if j != pj {
                    psi[j] = transport_cost(a[i], b[j], p) - phi[i];
                }
            }
        }
        if mass > 0.0 {
            pairs.push((i, j, mass));
        }
        last = Some((i, j));
    });

    let empty_rows: Vec<usize> = (0..a.len()).filter(|&i| mu.weight(i) <= 0.0).collect();
    if !empty_rows.is_empty() {
        let tight = c_transform(a, &empty_rows, b, &psi, p);
        for (&i, v) in empty_rows.iter().zip(tight) {
            phi[i] = v;
        }
    }
    let empty_cols: Vec<usize> = (0..b.len()).filter(|&j| nu.weight(j) <= 0.0).collect();
    if !empty_cols.is_empty() {
        let tight = c_transform(b, &empty_cols, a, &phi, p);
        for (&j, v) in empty_cols.iter().zip(tight) {
            psi[j] = v;
        }
    }
    // Re-anchor in case atom 0 carried no mass and was tightened.
    let shift = phi[0];
    if shift != 0.0 {
        phi.iter_mut().for_each(|f| *f -= shift);
        psi.iter_mut().for_each(|g| *g += shift);
    }

    Ok(CouplingWithPotentials { pairs, phi, psi, p })
}

/// `min_j |x_i - y_j|^p - pot_j` for each requested `i`.
fn c_transform(x: &[f64], rows: &[usize], y: &[f64], pot: &[f64], p: f64) -> Vec<f64> {
    if p == 2.0 {
        return quadratic_c_transform(x, rows, y, pot);
    }
    rows.iter()
        .map(|&i| {
            y.iter()
                .zip(pot)
                .map(|(&yj, &pj)| transport_cost(x[i], yj, p) - pj)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Quadratic cost: `(x - y_j)² - pot_j = x² + (-2 y_j) x + (y_j² - pot_j)`, so
/// the transform is `x²` plus the lower envelope of lines with slopes
/// decreasing in `j`. Queries arrive in increasing `x`.
fn quadratic_c_transform(x: &[f64], rows: &[usize], y: &[f64], pot: &[f64]) -> Vec<f64> {
    let lines: Vec<(f64, f64)> = y.iter().zip(pot).map(|(&yj, &pj)| (-2.0 * yj, yj * yj - pj)).collect();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for &(m, c) in &lines {
        if let Some(&(lm, lc)) = hull.last() {
            if lm == m {
                if c >= lc {
                    continue;
                }
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let (m1, c1) = hull[hull.len() - 2];
            let (m2, c2) = hull[hull.len() - 1];
            // Line 2 is useless if line 3 overtakes line 1 before line 2 does.
            if (c - c1) * (m1 - m2) <= (c2 - c1) * (m1 - m) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((m, c));
    }
    let mut k = 0;
    rows.iter()
        .map(|&i| {
            let xi = x[i];
            while k + 1 < hull.len() && hull[k + 1].0 * xi + hull[k + 1].1 <= hull[k].0 * xi + hull[k].1 {
                k += 1;
            }
            xi * xi + hull[k].0 * xi + hull[k].1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(atoms: &[f64], weights: &[f64]) -> GridMeasure {
        GridMeasure::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn dirac_distance() {
        let d = wasserstein_p(&GridMeasure::dirac(0.0), &GridMeasure::dirac(1.0), 2.0).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let mu = grid(&[-1.0, 0.3, 2.0], &[0.2, 0.5, 0.3]);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(wasserstein_p(&mu, &mu, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_point_uniforms_match_permutation_brute_force() {
        let mu = EmpiricalMeasure::new(vec![0.0, 2.0]).unwrap();
        let nu = EmpiricalMeasure::new(vec![1.0, 3.0]).unwrap();
        // identity: (|0-1| + |2-3|)/2 = 1, swap: (|0-3| + |2-1|)/2 = 2
        let brute = f64::min(1.0, 2.0);
        assert!((wasserstein_p(&mu, &nu, 1.0).unwrap() - brute).abs() < 1e-15);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        let mu = GridMeasure::dirac(0.0);
        assert!(matches!(
            wasserstein_p(&mu, &mu, 0.5),
            Err(crate::Error::InvalidParameter(_))
        ));
        assert!(matches!(EmpiricalMeasure::new(vec![]), Err(crate::Error::InvalidInput(_))));
        assert!(GridMeasure::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(GridMeasure::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(GridMeasure::new(vec![0.0, 1.0], vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn quantile_convention_is_left_continuous() {
        let mu = grid(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(quantile(&mu, 0.25).unwrap(), -1.0);
        assert_eq!(quantile(&mu, 0.5).unwrap(), -1.0);
        assert_eq!(quantile(&mu, 0.75).unwrap(), 1.0);
        assert_eq!(quantile(&mu, 1.0).unwrap(), 1.0);
        assert!(quantile(&mu, 0.0).is_err());
        assert!(quantile(&mu, 1.5).is_err());
    }

    #[test]
    fn quantile_skips_empty_atoms() {
        let mu = grid(&[-1.0, 0.0, 1.0], &[0.5, 0.0, 0.5]);
        assert_eq!(quantile(&mu, 0.5).unwrap(), -1.0);
        assert_eq!(quantile(&mu, 0.500001).unwrap(), 1.0);
    }

    #[test]
    fn coupling_of_diracs() {
        let c = monotone_coupling_with_potentials(&GridMeasure::dirac(0.0), &GridMeasure::dirac(1.0), 2.0)
            .unwrap();
        assert_eq!(c.pairs, vec![(0, 0, 1.0)]);
        assert_eq!(c.phi, vec![0.0]);
        assert_eq!(c.psi, vec![1.0]);
    }

    #[test]
    fn self_coupling_is_diagonal_with_zero_dual_value() {
        let mu = grid(&[-1.0, 0.5, 2.0], &[0.25, 0.25, 0.5]);
        let c = monotone_coupling_with_potentials(&mu, &mu, 2.0).unwrap();
        assert_eq!(c.pairs, vec![(0, 0, 0.25), (1, 1, 0.25), (2, 2, 0.5)]);
        // potentials are not unique on a degenerate path; the dual value is
        assert!(c.dual_value(mu.weights_slice(), mu.weights_slice()).abs() < 1e-14);
        assert_potentials_valid(&mu, &mu, 2.0);
    }

    /// Exhaustive vertex enumeration of the transport polytope: every vertex
    /// is determined by `rows + cols - 1` cells, so try every such subset.
    fn transport_lp_by_vertices(w: &[f64], v: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
        let (r, c) = (w.len(), v.len());
        let cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
        let basis = r + c - 1;
        let mut best = f64::INFINITY;
        let mut chosen = Vec::with_capacity(basis);
        fn recurse(
            start: usize,
            chosen: &mut Vec<usize>,
            basis: usize,
            cells: &[(usize, usize)],
            f: &mut dyn FnMut(&[usize]),
        ) {
            if chosen.len() == basis {
                f(chosen);
                return;
            }
            for k in start..cells.len() {
                chosen.push(k);
                recurse(k + 1, chosen, basis, cells, f);
                chosen.pop();
            }
        }
        let mut eval = |subset: &[usize]| {
            // constraints: all row sums, all column sums but the last
            let m = basis;
            let mut mat = vec![vec![0.0; m + 1]; m];
            for (col, &k) in subset.iter().enumerate() {
                let (i, j) = cells[k];
                mat[i][col] = 1.0;
                if j + 1 < c {
                    mat[r + j][col] = 1.0;
                }
            }
            for i in 0..r {
                mat[i][m] = w[i];
            }
            for j in 0..c - 1 {
                mat[r + j][m] = v[j];
            }
            // Gauss-Jordan with partial pivoting
            for col in 0..m {
                let piv = (col..m).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs())).unwrap();
                if mat[piv][col].abs() < 1e-12 {
                    return;
                }
                mat.swap(col, piv);
                let d = mat[col][col];
                for k in col..=m {
                    mat[col][k] /= d;
                }
                for row in 0..m {
                    if row != col {
                        let f = mat[row][col];
                        if f != 0.0 {
                            for k in col..=m {
                                mat[row][k] -= f * mat[col][k];
                            }
                        }
                    }
                }
            }
            let x: Vec<f64> = (0..m).map(|k| mat[k][m]).collect();
            if x.iter().any(|&t| t < -1e-12) {
                return;
            }
            let total: f64 = subset.iter().zip(&x).map(|(&k, &t)| t * cost(cells[k].0, cells[k].1)).sum();
            best = best.min(total);
        };
        recurse(0, &mut chosen, basis, &cells, &mut eval);
        best
    }

    #[test]
    fn coupling_matches_vertex_enumeration_lp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut a: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            let mu = GridMeasure::normalized(a.clone(), w).unwrap();
            let nu = GridMeasure::normalized(b.clone(), v).unwrap();
            for p in [1.0, 2.0, 3.0] {
                let c = monotone_coupling_with_potentials(&mu, &nu, p).unwrap();
                let lp = transport_lp_by_vertices(mu.weights_slice(), nu.weights_slice(), &|i, j| {
                    transport_cost(a[i], b[j], p)
                });
                let primal = c.primal_cost(&a, &b);
                assert!((primal - lp).abs() < 1e-10, "p={p}: sweep {primal} vs lp {lp}");
            }
        }
    }

    fn assert_potentials_valid<M: DiscreteMeasure, N: DiscreteMeasure>(mu: &M, nu: &N, p: f64) {
        let c = monotone_coupling_with_potentials(mu, nu, p).unwrap();
        let (a, b) = (mu.atoms(), nu.atoms());
        let scale = 1.0 + c.phi.iter().chain(&c.psi).fold(0.0_f64, |m, x| m.max(x.abs()));
        assert_eq!(c.phi[0], 0.0);
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                let slack = transport_cost(ai, bj, p) - c.phi[i] - c.psi[j];
                assert!(slack >= -1e-9 * scale, "infeasible at ({i},{j}): {slack}");
            }
        }
        let mut row = vec![0.0; a.len()];
        let mut col = vec![0.0; b.len()];
        for &(i, j, m) in &c.pairs {
            assert!(m > 0.0);
            row[i] += m;
            col[j] += m;
            let slack = transport_cost(a[i], b[j], p) - c.phi[i] - c.psi[j];
            assert!(slack.abs() <= 1e-9 * scale, "not tight on support ({i},{j}): {slack}");
        }
        for (i, r) in row.iter().enumerate() {
            assert!((r - mu.weight(i)).abs() < 1e-10);
        }
        for (j, r) in col.iter().enumerate() {
            assert!((r - nu.weight(j)).abs() < 1e-10);
        }
        // monotone support
        for w in c.pairs.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        let primal = c.primal_cost(a, b);
        let dual = c.dual_value(&mu.weights(), &nu.weights());
        assert!((primal - dual).abs() < 1e-9 * scale);
        assert!((primal - wasserstein_pp(mu, nu, p).unwrap()).abs() < 1e-10 * scale);
    }

    #[test]
    fn potentials_handle_zero_weight_atoms() {
        let mu = grid(&[-3.0, -1.0, 0.0, 0.5, 4.0], &[0.0, 0.4, 0.0, 0.6, 0.0]);
        let nu = EmpiricalMeasure::new(vec![-2.0, -0.5, -0.5, 1.0, 2.5]).unwrap();
        for p in [1.0, 2.0, 2.5] {
            assert_potentials_valid(&mu, &nu, p);
            assert_potentials_valid(&nu, &mu, p);
        }
    }

    #[test]
    fn zero_weight_potentials_are_c_transforms() {
        let mu = grid(&[-3.0, -1.0, 0.0, 0.5, 4.0], &[0.0, 0.4, 0.0, 0.6, 0.0]);
        let nu = EmpiricalMeasure::new(vec![-2.0, -0.5, 1.0, 2.5]).unwrap();
        let c = monotone_coupling_with_potentials(&mu, &nu, 2.0).unwrap();
        for i in [0usize, 2, 4] {
            let brute = nu
                .atoms()
                .iter()
                .zip(&c.psi)
                .map(|(&b, &g)| (mu.atoms()[i] - b).powi(2) - g)
                .fold(f64::INFINITY, f64::min);
            assert!((c.phi[i] - brute).abs() < 1e-12);
        }
    }

    fn measure_strategy(max_len: usize) -> impl Strategy<Value = GridMeasure> {
        prop::collection::vec((-5.0f64..5.0, 0.0f64..1.0), 1..max_len).prop_filter_map(
            "needs distinct atoms and mass",
            |mut pts| {
                pts.sort_by(|x, y| x.0.total_cmp(&y.0));
                pts.dedup_by(|x, y| x.0 == y.0);
                let (atoms, weights): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                GridMeasure::normalized(atoms, weights).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn triangle_inequality(mu in measure_strategy(8), nu in measure_strategy(8), la in measure_strategy(8), p in 1.0f64..4.0) {
            let d_ml = wasserstein_p(&mu, &la, p).unwrap();
            let d_mn = wasserstein_p(&mu, &nu, p).unwrap();
            let d_nl = wasserstein_p(&nu, &la, p).unwrap();
            prop_assert!(d_ml <= d_mn + d_nl + 1e-10);
        }

        #[test]
        fn symmetric_and_monotone_in_p(mu in measure_strategy(10), nu in measure_strategy(10), q in 1.0f64..3.0, dp in 0.0f64..3.0) {
            let p = q + dp;
            let wq = wasserstein_p(&mu, &nu, q).unwrap();
            let wp = wasserstein_p(&mu, &nu, p).unwrap();
            prop_assert!(wq <= wp + 1e-10);
            prop_assert!((wp - wasserstein_p(&nu, &mu, p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn potentials_certify_optimality(mu in measure_strategy(10), nu in measure_strategy(10), p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
            assert_potentials_valid(&mu, &nu, p);
        }

        #[test]
        fn quantile_is_nondecreasing(mu in measure_strategy(10), u in 0.001f64..1.0, du in 0.0f64..0.5) {
            let v = (u + du).min(1.0);
            prop_assert!(quantile(&mu, u).unwrap() <= quantile(&mu, v).unwrap());
        }
    }
}
