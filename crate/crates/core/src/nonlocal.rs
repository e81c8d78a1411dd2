//! The non-local double-sum energy, covering nets, overlap counts and annulus
//! estimates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::grid::{AssembledForms, Grid};
use crate::solver::LinearSolver;
use crate::spectral::{poincare_spectrum, quadratic_functional_multi, QuadratureGrid};
use crate::sum::CompensatedSum;
use crate::weight::WeightSpec;

/// Node ceiling for `O(N²)` pair sums.
pub const PAIR_CEILING: usize = 4_000;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(alloc::format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(())
}

/// CC distances of all unordered node pairs `i < j`, packed row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    n: usize,
    distances: Vec<f64>,
}

impl PairDistances {
    pub fn new(grid: &Grid) -> Result<Self> {
        let n = grid.len();
        if n > PAIR_CEILING {
            return Err(Error::Ceiling {
                what: "non-local pair sum",
                size: n,
                ceiling: PAIR_CEILING,
            });
        }
        let group = grid.instance();
        let mut distances = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                distances.push(group.distance_coords(grid.node(i), grid.node(j))?);
            }
        }
        Ok(PairDistances { n, distances })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `(i, j, d)` for `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .zip(self.distances.iter())
            .map(|((i, j), &d)| (i, j, d))
    }
}

/// Symmetrized kernel `w² (M_i + M_j) / (V(d) d^α)` on unordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalKernel {
    pub alpha: f64,
    n: usize,
    values: Vec<f64>,
}

impl NonlocalKernel {
    pub fn new(grid: &Grid, weight_diag: &[f64], pairs: &PairDistances, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let group = grid.instance();
        let w = grid.node_measure();
        let mut values = Vec::with_capacity(pairs.distances.len());
        for (i, j, d) in pairs.iter() {
            let v = group.ball_volume(d)?;
            values.push(w * w * (weight_diag[i] + weight_diag[j]) / (v * d.powf(alpha)));
        }
        Ok(NonlocalKernel {
            alpha,
            n: pairs.n,
            values,
        })
    }

    /// `Σ_{x≠y} |f(x) − f(y)|² w M(y) w / (V(d) d^α)` over ordered pairs.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = CompensatedSum::new();
        let mut idx = 0;
        for i in 0..n {
            let fi = f[i];
            let mut row = CompensatedSum::new();
            for &fj in &f[i + 1..n] {
                let diff = fi - fj;
                row.add(self.values[idx] * diff * diff);
                idx += 1;
            }
            acc.merge(row);
        }
        acc.value()
    }
}

fn weight_nodes(grid: &Grid, weight: &WeightSpec) -> Vec<f64> {
    grid.nodes().map(|p| weight.weight(p)).collect()
}

/// The non-local energy of `f`.
pub fn nonlocal_energy(grid: &Grid, weight: &WeightSpec, f: &[f64], alpha: f64) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    let pairs = PairDistances::new(grid)?;
    Ok(NonlocalKernel::new(grid, &weight_nodes(grid, weight), &pairs, alpha)?.energy(f))
}

/// `Σ f² (1 + Σ|X_i v|²) M w`.
pub fn weighted_mass(grid: &Grid, weight: &WeightSpec, f: &[f64]) -> f64 {
    let group = grid.instance();
    let w = grid.node_measure();
    crate::sum::sum(
        grid.nodes()
            .zip(f)
            .map(|(p, &fk)| fk * fk * weight.mu(group, p) * weight.weight(p) * w),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub label: String,
    pub values: Vec<f64>,
}

/// Number of random bumps in the shipped family.
pub const BUMP_COUNT: usize = 20;
/// Number of eigenvectors in the shipped family.
pub const EIGENVECTOR_COUNT: usize = 10;

/// Smooth bump `exp(−|x − c|² / (2s²))` in coordinates.
pub fn bump(grid: &Grid, center: &[f64], width: f64) -> Vec<f64> {
    grid.sample(|p| {
        let r2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * r2 / (width * width)).exp()
    })
}

/// `count` seeded bumps with centers in the middle half of the box and widths
/// between 0.1 and 0.35 of the smallest half-extent.
pub fn random_bumps(grid: &Grid, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let half: Vec<f64> = (0..dim).map(|j| 0.5 * (grid.upper()[j] - grid.lower()[j])).collect();
    let mid: Vec<f64> = (0..dim).map(|j| 0.5 * (grid.upper()[j] + grid.lower()[j])).collect();
    let scale = half.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..count)
        .map(|k| {
            let center: Vec<f64> = (0..dim)
                .map(|j| mid[j] + half[j] * 0.5 * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let width = scale * (0.1 + 0.25 * rng.random::<f64>());
            TestFunction {
                label: alloc::format!("bump_{k}"),
                values: bump(grid, &center, width),
            }
        })
        .collect()
}

/// Eigenvectors of `(D, B)`, coordinate functions and seeded bumps.
pub fn shipped_test_family(grid: &Grid, forms: &AssembledForms, seed: u64) -> Result<Vec<TestFunction>> {
    let count = EIGENVECTOR_COUNT.min(grid.len().saturating_sub(2));
    let eig = poincare_spectrum(forms, count, &EigenOptions::default())?;
    let mut family: Vec<TestFunction> = eig
        .vectors
        .into_iter()
        .enumerate()
        .map(|(k, v)| TestFunction {
            label: alloc::format!("eigenvector_{}", k + 1),
            values: v,
        })
        .collect();
    for j in 0..grid.dim() {
        family.push(TestFunction {
            label: alloc::format!("coordinate_{j}"),
            values: grid.sample(|p| p[j]),
        });
    }
    family.extend(random_bumps(grid, BUMP_COUNT, seed));
    Ok(family)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalRow {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalReport {
    pub alpha: f64,
    /// Energy of the minimizing test function.
    pub lhs: f64,
    /// Weighted mass of the minimizing test function.
    pub rhs: f64,
    /// Minimum of `lhs/rhs` over the family. An upper bound for the best
    /// constant, since the family is finite.
    pub lambda_alpha_estimate: f64,
    pub minimizer: String,
    pub rows: Vec<NonlocalRow>,
}

/// `B`-weighted mean-zero projection with `B = M w` at the nodes.
fn project_mu_mean_zero(grid: &Grid, weight_diag: &[f64], f: &[f64]) -> Vec<f64> {
    let w = grid.node_measure();
    let mass = crate::sum::sum(weight_diag.iter().map(|m| m * w));
    let mean = crate::sum::sum(f.iter().zip(weight_diag).map(|(a, m)| a * m * w)) / mass;
    f.iter().map(|a| a - mean).collect()
}

/// Evaluates `lhs/rhs` on the mean-zero projection of every test function,
/// for each `α`, sharing the pair distances.
pub fn lambda_alpha_estimates(
    grid: &Grid,
    weight: &WeightSpec,
    alphas: &[f64],
    family: &[TestFunction],
) -> Result<Vec<NonlocalReport>> {
    let weight_diag = weight_nodes(grid, weight);
    let pairs = PairDistances::new(grid)?;
    let projected: Vec<Vec<f64>> = family
        .iter()
        .map(|tf| project_mu_mean_zero(grid, &weight_diag, &tf.values))
        .collect();
    let masses: Vec<f64> = projected.iter().map(|f| weighted_mass(grid, weight, f)).collect();
    let mut reports = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let kernel = NonlocalKernel::new(grid, &weight_diag, &pairs, alpha)?;
        let mut rows = Vec::with_capacity(family.len());
        let mut best: Option<usize> = None;
        for (k, tf) in family.iter().enumerate() {
            let rhs = masses[k];
            if !(rhs > 0.0) {
                rows.push(NonlocalRow {
                    label: tf.label.clone(),
                    lhs: 0.0,
                    rhs,
                    ratio: None,
                    note: Some("skipped: zero weighted mass after projection".into()),
                });
                continue;
            }
            let lhs = kernel.energy(&projected[k]);
            let ratio = lhs / rhs;
            if best.is_none_or(|b| ratio < rows[b].ratio.unwrap_or(f64::INFINITY)) {
                best = Some(rows.len());
            }
            rows.push(NonlocalRow {
                label: tf.label.clone(),
                lhs,
                rhs,
                ratio: Some(ratio),
                note: None,
            });
        }
        let b = best.ok_or_else(|| Error::Precondition("every test function was degenerate".into()))?;
        reports.push(NonlocalReport {
            alpha,
            lhs: rows[b].lhs,
            rhs: rows[b].rhs,
            lambda_alpha_estimate: rows[b].ratio.unwrap_or(f64::NAN),
            minimizer: rows[b].label.clone(),
            rows,
        });
    }
    Ok(reports)
}

pub fn lambda_alpha_estimate(
    grid: &Grid,
    weight: &WeightSpec,
    alpha: f64,
    family: &[TestFunction],
) -> Result<NonlocalReport> {
    Ok(lambda_alpha_estimates(grid, weight, &[alpha], family)?.remove(0))
}

/// Greedy separated net over the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringNet {
    pub t: f64,
    /// Node indices of the centers, in acceptance order.
    pub centers: Vec<usize>,
    pub center_coords: Vec<Vec<f64>>,
    /// Centers are pairwise at distance at least `√t`, so balls of radius
    /// `√t/2` are disjoint.
    pub separation: f64,
    /// `2√t`; every node lies in a ball of this radius about a center.
    pub cover_radius: f64,
    /// Largest distance from a node to its nearest center.
    pub max_cover_distance: f64,
    /// Smallest distance between two centers.
    pub min_center_distance: f64,
    /// Every non-center is closer than `√t` to some center.
    pub maximal: bool,
    /// `[node][center]` distances.
    #[serde(skip)]
    pub distances: Vec<Vec<f64>>,
}

/// Scans nodes in index order and accepts a node iff it is at distance at
/// least `√t` from every accepted center, then verifies the covering.
pub fn build_net(grid: &Grid, t: f64) -> Result<CoveringNet> {
    if !(t > 0.0) {
        return Err(Error::Domain(alloc::format!("t must be positive, got {t}")));
    }
    let s = t.sqrt();
    if s < 2.0 * grid.max_spacing() - 1e-12 {
        return Err(Error::Precondition(alloc::format!(
            "√t = {s} is below twice the grid spacing {}",
            grid.max_spacing()
        )));
    }
    let group = grid.instance();
    let n = grid.len();
    let mut centers: Vec<usize> = Vec::new();
    for k in 0..n {
        let p = grid.node(k);
        let mut ok = true;
        for &c in &centers {
            if group.distance_coords(p, grid.node(c))? < s {
                ok = false;
                break;
            }
        }
        if ok {
            centers.push(k);
        }
    }
    let mut distances = Vec::with_capacity(n);
    let mut max_cover_distance = 0.0f64;
    let mut maximal = true;
    for k in 0..n {
        let row: Vec<f64> = centers
            .iter()
            .map(|&c| group.distance_coords(grid.node(k), grid.node(c)))
            .collect::<Result<_>>()?;
        let nearest = row.iter().cloned().fold(f64::INFINITY, f64::min);
        max_cover_distance = max_cover_distance.max(nearest);
        if !centers.contains(&k) && !(nearest < s) {
            maximal = false;
        }
        distances.push(row);
    }
    let mut min_center_distance = f64::INFINITY;
    for a in 0..centers.len() {
        for &cb in &centers[a + 1..] {
            min_center_distance = min_center_distance.min(distances[cb][a]);
        }
    }
    if max_cover_distance > 2.0 * s {
        return Err(Error::Contract(alloc::format!(
            "a node is at distance {max_cover_distance} from every center, beyond 2√t = {}",
            2.0 * s
        )));
    }
    Ok(CoveringNet {
        t,
        center_coords: centers.iter().map(|&c| grid.node(c).to_vec()).collect(),
        centers,
        separation: s,
        cover_radius: 2.0 * s,
        max_cover_distance,
        min_center_distance,
        maximal,
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStat {
    pub theta: f64,
    /// `max_x #{j : d(x, x_j) ≤ θ√t}`.
    pub max_count: usize,
    /// `max_count / θ^{2κ}`.
    pub ratio: f64,
}

/// Overlap counts for every `θ`; the fitted constant is the largest ratio.
pub fn overlap_bound_check(net: &CoveringNet, kappa: f64, thetas: &[f64]) -> Vec<OverlapStat> {
    thetas
        .iter()
        .map(|&theta| {
            let r = theta * net.separation;
            let max_count = net
                .distances
                .iter()
                .map(|row| row.iter().filter(|&&d| d <= r).count())
                .max()
                .unwrap_or(0);
            OverlapStat {
                theta,
                max_count,
                ratio: max_count as f64 / theta.powf(2.0 * kappa),
            }
        })
        .collect()
}

/// Largest `max_count / θ^{2κ}` over the statistics.
pub fn overlap_constant(stats: &[OverlapStat]) -> f64 {
    stats.iter().map(|s| s.ratio).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRow {
    pub center: usize,
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// The annulus contains no node.
    pub skipped: bool,
}

/// `C_0 = B(4√t)`, `C_k = B(2^{k+2}√t) \ B(2^{k+1}√t)`.
pub fn in_annulus(d: f64, k: u32, t: f64) -> bool {
    let s = t.sqrt();
    let outer = (1u64 << (k + 2)) as f64 * s;
    if k == 0 {
        d < outer
    } else {
        let inner = (1u64 << (k + 1)) as f64 * s;
        d >= inner && d < outer
    }
}

/// `g = f − m` with `m` the Haar mean of `f` over `B(x_j, 2√t)`.
pub fn centered_by_ball_mean(f: &[f64], dist: &[f64], t: f64) -> Vec<f64> {
    let r = 2.0 * t.sqrt();
    let mut num = CompensatedSum::new();
    let mut den = 0usize;
    for (fk, &d) in f.iter().zip(dist) {
        if d < r {
            num.add(*fk);
            den += 1;
        }
    }
    // Equal node measures cancel in the Haar mean.
    let m = if den > 0 { num.value() / den as f64 } else { 0.0 };
    f.iter().map(|x| x - m).collect()
}

/// `Σ_{x,y ∈ S} a_x b_y (f_x − f_y)²` in linear time.
pub fn double_difference_sum(f: &[f64], a: &[f64], b: &[f64], members: &[usize]) -> f64 {
    let mut sa = CompensatedSum::new();
    let mut saf = CompensatedSum::new();
    let mut saf2 = CompensatedSum::new();
    let mut sb = CompensatedSum::new();
    let mut sbf = CompensatedSum::new();
    let mut sbf2 = CompensatedSum::new();
    for &k in members {
        let fk = f[k];
        sa.add(a[k]);
        saf.add(a[k] * fk);
        saf2.add(a[k] * fk * fk);
        sb.add(b[k]);
        sbf.add(b[k] * fk);
        sbf2.add(b[k] * fk * fk);
    }
    let v = saf2.value() * sb.value() - 2.0 * saf.value() * sbf.value() + sa.value() * sbf2.value();
    v.max(0.0)
}

/// Lemma-style annulus estimate for center `j` and annulus `k`.
pub fn annulus_check(
    grid: &Grid,
    weight_diag: &[f64],
    net: &CoveringNet,
    f: &[f64],
    j: usize,
    k: u32,
) -> Result<AnnulusRow> {
    let n = grid.len();
    if f.len() != n || weight_diag.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if j >= net.centers.len() {
        return Err(Error::Domain(alloc::format!("center {j} out of range")));
    }
    let t = net.t;
    let dist: Vec<f64> = net.distances.iter().map(|row| row[j]).collect();
    let w = grid.node_measure();
    let annulus: Vec<usize> = (0..n).filter(|&x| in_annulus(dist[x], k, t)).collect();
    if annulus.is_empty() {
        return Ok(AnnulusRow {
            center: j,
            k,
            lhs: 0.0,
            rhs: 0.0,
            ratio: 0.0,
            skipped: true,
        });
    }
    let outer = (1u64 << (k + 2)) as f64 * t.sqrt();
    let ball: Vec<usize> = (0..n).filter(|&x| dist[x] < outer).collect();
    let big: Vec<usize> = (0..n).filter(|&x| dist[x] < outer.max(2.0 * t.sqrt())).collect();
    let constant = big.iter().all(|&x| f[x] == f[big[0]]);
    let (lhs, rhs) = if constant {
        (0.0, 0.0)
    } else {
        let g = centered_by_ball_mean(f, &dist, t);
        let lhs = crate::sum::sum(annulus.iter().map(|&x| g[x] * g[x] * weight_diag[x] * w));
        let a: Vec<f64> = weight_diag.iter().map(|m| m * w).collect();
        let b = vec![w; n];
        let v = grid.instance().ball_volume((1u64 << k) as f64 * t.sqrt())?;
        (lhs, double_difference_sum(&g, &a, &b, &ball) / v)
    };
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AnnulusRow {
        center: j,
        k,
        lhs,
        rhs,
        ratio,
        skipped: false,
    })
}

/// Every center and every `k ≤ k_max`.
pub fn annulus_table(
    grid: &Grid,
    weight_diag: &[f64],
    net: &CoveringNet,
    f: &[f64],
    k_max: u32,
) -> Result<Vec<AnnulusRow>> {
    let mut rows = Vec::new();
    for j in 0..net.centers.len() {
        for k in 0..=k_max {
            rows.push(annulus_check(grid, weight_diag, net, f, j, k)?);
        }
    }
    Ok(rows)
}

/// Largest ratio over the non-skipped rows.
pub fn annulus_constant(rows: &[AnnulusRow]) -> f64 {
    rows.iter().filter(|r| !r.skipped).map(|r| r.ratio).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub lhs_integral: f64,
    pub rhs_energy: f64,
    pub ratio: f64,
}

/// Quadratic functional against non-local energy for each `f`.
pub fn controllalpha_check(
    forms: &AssembledForms,
    grid: &Grid,
    weight: &WeightSpec,
    fs: &[Vec<f64>],
    alpha: f64,
    t_grid: &QuadratureGrid,
) -> Result<Vec<ControlRow>> {
    check_alpha(alpha)?;
    let q = quadratic_functional_multi(forms, fs, &[alpha], t_grid, LinearSolver::Auto)?;
    let pairs = PairDistances::new(grid)?;
    let kernel = NonlocalKernel::new(grid, &weight_nodes(grid, weight), &pairs, alpha)?;
    Ok(fs
        .iter()
        .zip(q)
        .map(|(f, qv)| {
            let lhs = qv[0].value;
            let rhs = kernel.energy(f);
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            ControlRow {
                lhs_integral: lhs,
                rhs_energy: rhs,
                ratio,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_grid_with, GridSpec, TailPolicy};
    use crate::group::GroupInstance;
    use crate::weight;

    #[test]
    fn three_node_energy_by_hand() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::flat(&g);
        let mut spec = GridSpec::symmetric(1, 8, 1.0);
        spec.lower = vec![0.0];
        spec.upper = vec![7.0];
        spec.tail_policy = TailPolicy::Record;
        let grid = build_grid_with(&g, &w, &spec).unwrap();
        let mut f = vec![0.0; 8];
        f[1] = 1.0;
        let alpha = 1.0;
        // Pairs (1, j): distance |1 − j|, V(d) = 2d, ordered pairs count twice.
        let mut exact = 0.0;
        for j in [0usize, 2, 3, 4, 5, 6, 7] {
            let d = (j as f64 - 1.0).abs();
            exact += 2.0 / (2.0 * d * d.powf(alpha));
        }
        let e = nonlocal_energy(&grid, &w, &f, alpha).unwrap();
        assert!((e - exact).abs() < 1e-14 * exact);
        let e2 = nonlocal_energy(&grid, &w, &f.iter().map(|x| 2.0 * x).collect::<Vec<_>>(), alpha).unwrap();
        assert!((e2 - 4.0 * e).abs() < 1e-13 * e);
    }

    #[test]
    fn net_on_the_line() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::gaussian(&g);
        let grid = build_grid(&g, &w, 65, 8.0).unwrap();
        let net = build_net(&grid, 1.0).unwrap();
        assert_eq!(net.centers.len(), 17);
        assert!(net.maximal);
        assert!(net.max_cover_distance <= net.separation);
        assert!(net.min_center_distance >= net.separation);
        let big = build_net(&grid, 400.0).unwrap();
        assert_eq!(big.centers.len(), 1);
        let stats = overlap_bound_check(&big, 1.0, &[1.0, 2.0, 8.0]);
        assert!(stats.iter().all(|s| s.max_count == 1));
        assert!(build_net(&grid, 0.01).is_err());
    }

    #[test]
    fn linear_double_sum_matches_brute_force() {
        let f = [0.3, -1.2, 2.5, 0.0, 4.0];
        let a = [1.0, 0.5, 0.25, 2.0, 1.5];
        let b = [0.7, 0.7, 0.7, 0.7, 0.1];
        let members = [0usize, 1, 3, 4];
        let mut brute = 0.0;
        for &x in &members {
            for &y in &members {
                brute += a[x] * b[y] * (f[x] - f[y]) * (f[x] - f[y]);
            }
        }
        let fast = double_difference_sum(&f, &a, &b, &members);
        assert!((fast - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn annulus_constants() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::gaussian(&g);
        let grid = build_grid(&g, &w, 65, 8.0).unwrap();
        let net = build_net(&grid, 1.0).unwrap();
        let m = grid.sample(|p| w.weight(p));
        let c = vec![3.0; grid.len()];
        let row = annulus_check(&grid, &m, &net, &c, 4, 0).unwrap();
        assert_eq!((row.lhs, row.rhs, row.ratio), (0.0, 0.0, 0.0));
        let x = grid.sample(|p| p[0]);
        let shifted: Vec<f64> = x.iter().map(|v| v + 5.0).collect();
        let a = annulus_check(&grid, &m, &net, &x, 8, 1).unwrap();
        let b = annulus_check(&grid, &m, &net, &shifted, 8, 1).unwrap();
        assert!((a.lhs - b.lhs).abs() < 1e-12 * a.lhs);
        assert!((a.rhs - b.rhs).abs() < 1e-12 * a.rhs);
    }
}
