//! The verification pipelines. Each returns a serializable section with a
//! `holds` flag plus the CSV tables it produced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sublap_core::eigen::EigenOptions;
use sublap_core::grid::{apply_lm, assemble, build_grid_with, AssembledForms, Grid, Resolvent};
use sublap_core::group::GroupInstance;
use sublap_core::nonlocal::{
    annulus_constant, annulus_table, build_net, controllalpha_check, lambda_alpha_estimates, overlap_bound_check,
    overlap_constant, random_bumps, shipped_test_family, ControlRow, NonlocalReport, OverlapStat, PAIR_CEILING,
};
use sublap_core::solver::LinearSolver;
use sublap_core::spectral::{
    functional_calculus_check, improved_spectrum, lempoinc_check, offdiag_experiment, poincare_spectrum,
    quadratic_constant, quadratic_functional_multi, DenseSpectrum, FunctionalCalculusCheck, OffdiagResult,
    QuadraticRow, QuadratureGrid, SpectralReport, DENSE_CEILING,
};
use sublap_core::weight::lyapunov::{
    build_lyapunov, improved_condition_infimum, verify_lyapunov, Infimum, LyapunovCertificate, LyapunovCheck,
    LyapunovFunction, Shell,
};
use sublap_core::weight::WeightSpec;
use sublap_core::Error as CoreError;

use crate::config::ExperimentConfig;
use crate::error::LabError;
use crate::formats::Table;

/// Largest allowed `max (−L_M W + θW − b 1_B)` of a verified certificate.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-9;
/// Relative tolerance of `‖(I + tL)⁻¹f‖ ≤ ‖f‖`.
pub const CONTRACTION_TOLERANCE: f64 = 1e-12;
/// Relative tolerance of `tL(I + tL)⁻¹f = f − (I + tL)⁻¹f`.
pub const SPLITTING_TOLERANCE: f64 = 1e-10;
/// `t` values of the resolvent identity checks.
pub const RESOLVENT_T_LIST: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
/// Random functions of the resolvent identity checks.
pub const RESOLVENT_FUNCTIONS: usize = 50;

/// One discretized problem: grid, forms and, on demand, the dense spectrum.
pub struct Problem {
    pub grid: Grid,
    pub forms: AssembledForms,
    dense: Option<DenseSpectrum>,
}

impl Problem {
    pub fn build(
        cfg: &ExperimentConfig,
        group: &GroupInstance,
        weight: &WeightSpec,
        resolution: usize,
    ) -> Result<Self, LabError> {
        let grid = build_grid_with(group, weight, &cfg.grid_spec(resolution))?;
        let forms = assemble(&grid, weight)?;
        Ok(Problem {
            grid,
            forms,
            dense: None,
        })
    }

    pub fn resolution(&self) -> usize {
        self.grid.shape()[0]
    }

    /// The dense spectrum, computed on first use, with the forms it came from.
    pub fn dense(&mut self) -> Result<(&DenseSpectrum, &AssembledForms), LabError> {
        if self.dense.is_none() {
            self.dense = Some(DenseSpectrum::new(&self.forms)?);
        }
        Ok((self.dense.as_ref().unwrap(), &self.forms))
    }
}

/// Everything the pipelines share.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub group: GroupInstance,
    pub weight: WeightSpec,
    pub main: Problem,
    lambda1: Option<f64>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, seed: u64) -> Result<Self, LabError> {
        let group = cfg.group_instance()?;
        let weight = cfg.weight_spec(&group)?;
        let main = Problem::build(&cfg, &group, &weight, cfg.grid.resolution)?;
        Ok(Context {
            cfg,
            seed,
            group,
            weight,
            main,
            lambda1: None,
        })
    }

    fn problem_at(&self, resolution: usize) -> Result<Problem, LabError> {
        Problem::build(&self.cfg, &self.group, &self.weight, resolution)
    }

    fn eigen_options(&self, count: usize) -> EigenOptions {
        EigenOptions {
            count,
            seed: self.seed,
            ..EigenOptions::default()
        }
    }

    fn lambda1(&mut self) -> Result<f64, LabError> {
        if let Some(l) = self.lambda1 {
            return Ok(l);
        }
        let l = poincare_spectrum(&self.main.forms, 1, &self.eigen_options(1))?.values[0];
        self.lambda1 = Some(l);
        Ok(l)
    }
}

/// Seeded i.i.d. uniform node values on `[−1, 1]`.
pub fn random_field(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn core_refusal(e: CoreError) -> Result<(String, Option<Vec<f64>>), LabError> {
    match e {
        CoreError::CertificateRefused { reason, witness } => Ok((reason, witness)),
        other => Err(other.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refusal {
    pub reason: String,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub samples: usize,
    pub failures: usize,
    /// Largest `(lhs − rhs) / rhs` over the samples.
    pub worst_excess: f64,
    pub worst_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSection {
    pub shell_points: usize,
    pub certificate: Option<LyapunovCertificate>,
    pub refused: Option<Refusal>,
    pub check: Option<LyapunovCheck>,
    pub tolerance: f64,
    pub lemma: Option<LemmaSummary>,
    pub holds: bool,
}

pub fn check_lyapunov(ctx: &mut Context) -> Result<LyapunovSection, LabError> {
    let lc = ctx
        .cfg
        .lyapunov
        .clone()
        .ok_or_else(|| LabError::Config("check-lyapunov needs a [lyapunov] section".into()))?;
    let outer = lc.shell_radius.unwrap_or(ctx.cfg.grid.domain_radius);
    let shell = Shell::sample(
        &ctx.group,
        lc.radius,
        outer,
        lc.shell_samples,
        ctx.seed,
        Some(&ctx.main.grid),
    )?;
    let mut section = LyapunovSection {
        shell_points: shell.len(),
        certificate: None,
        refused: None,
        check: None,
        tolerance: LYAPUNOV_TOLERANCE,
        lemma: None,
        holds: false,
    };
    let cert = match build_lyapunov(&ctx.weight, &ctx.main.grid, lc.a, lc.c, &shell) {
        Ok(c) => c,
        Err(e) => {
            let (reason, witness) = core_refusal(e)?;
            section.refused = Some(Refusal { reason, witness });
            return Ok(section);
        }
    };
    let check = verify_lyapunov(&cert, &ctx.weight, &ctx.main.grid)?;
    let lyap = cert.lyapunov(&ctx.weight);
    let w: Vec<f64> = ctx.main.grid.nodes().map(|p| lyap.eval(p)).collect();
    let n = ctx.main.grid.len();
    let mut lemma = LemmaSummary {
        samples: lc.lemma_samples,
        failures: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_sample: 0,
    };
    // Noise alone makes the energy side dominate; odd samples are smooth.
    for k in 0..lc.lemma_samples {
        let f = if k % 2 == 0 {
            random_field(n, ctx.seed, 1_000 + k as u64)
        } else {
            let mut f = vec![0.0; n];
            for b in random_bumps(&ctx.main.grid, 2, ctx.seed ^ (0x1e_5500 + k as u64)) {
                for (a, v) in f.iter_mut().zip(b.values) {
                    *a += v;
                }
            }
            f
        };
        let ineq = lempoinc_check(&ctx.main.forms, &w, &f)?;
        if !ineq.holds {
            lemma.failures += 1;
        }
        let excess = (ineq.lhs - ineq.rhs) / ineq.rhs.abs().max(f64::MIN_POSITIVE);
        if excess > lemma.worst_excess {
            lemma.worst_excess = excess;
            lemma.worst_sample = k;
        }
    }
    section.holds = check.max_violation <= LYAPUNOV_TOLERANCE && lemma.failures == 0;
    section.certificate = Some(cert);
    section.check = Some(check);
    section.lemma = Some(lemma);
    Ok(section)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedGap {
    pub resolution: usize,
    pub lambda1: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub resolution: usize,
    pub nodes: usize,
    pub lambda1: f64,
    pub poincare_constant: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub refined: Option<RefinedGap>,
    pub holds: bool,
}

pub fn poincare_gap(ctx: &mut Context) -> Result<PoincareSection, LabError> {
    let count = ctx.cfg.spectral.eigen_count;
    let eig = poincare_spectrum(&ctx.main.forms, count, &ctx.eigen_options(count))?;
    let lambda1 = eig.values[0];
    ctx.lambda1 = Some(lambda1);
    let refined = match ctx.cfg.grid.refined_resolution {
        Some(r) => {
            let p = ctx.problem_at(r)?;
            let l = poincare_spectrum(&p.forms, 1, &ctx.eigen_options(1))?.values[0];
            Some(RefinedGap {
                resolution: r,
                lambda1: l,
                relative_change: relative_change(lambda1, l),
            })
        }
        None => None,
    };
    Ok(PoincareSection {
        resolution: ctx.main.resolution(),
        nodes: ctx.main.grid.len(),
        lambda1,
        poincare_constant: 1.0 / lambda1,
        holds: lambda1 > 0.0 && lambda1.is_finite(),
        eigenvalues: eig.values,
        residuals: eig.residuals,
        iterations: eig.iterations,
        refined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovedSection {
    pub epsilon: f64,
    pub radius: f64,
    pub condition: Infimum,
    pub lambda_weighted: f64,
    pub calculus: Vec<FunctionalCalculusCheck>,
    pub calculus_skipped: Option<String>,
    pub holds: bool,
}

pub fn improved_gap(ctx: &mut Context) -> Result<ImprovedSection, LabError> {
    let ic = ctx
        .cfg
        .improved
        .clone()
        .ok_or_else(|| LabError::Config("improved-gap needs an [improved] section".into()))?;
    let outer = ic.shell_radius.unwrap_or(ctx.cfg.grid.domain_radius);
    let shell = Shell::sample(
        &ctx.group,
        ic.radius,
        outer,
        ic.shell_samples,
        ctx.seed,
        Some(&ctx.main.grid),
    )?;
    let condition = improved_condition_infimum(&ctx.group, &ctx.weight, ic.epsilon, &shell)?;
    let lambda_weighted = improved_spectrum(&ctx.main.forms, 1, &ctx.eigen_options(1))?.values[0];
    let mut calculus = Vec::new();
    let mut calculus_skipped = None;
    if ctx.main.grid.len() <= DENSE_CEILING {
        let (spectrum, forms) = ctx.main.dense()?;
        for &alpha in &ic.calculus_alphas {
            calculus.push(functional_calculus_check(spectrum, forms, lambda_weighted, alpha)?);
        }
    } else {
        calculus_skipped = Some(format!(
            "{} nodes exceed the dense ceiling {DENSE_CEILING}",
            ctx.main.grid.len()
        ));
    }
    let holds =
        condition.value > 0.0 && lambda_weighted > 0.0 && calculus.iter().filter(|c| c.assessable).all(|c| c.holds);
    Ok(ImprovedSection {
        epsilon: ic.epsilon,
        radius: ic.radius,
        condition,
        lambda_weighted,
        calculus,
        calculus_skipped,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffdiagSection {
    pub e_nodes: usize,
    pub f_nodes: usize,
    pub result: OffdiagResult,
    pub holds: bool,
}

fn box_mask(grid: &Grid, lower: &[f64], upper: &[f64]) -> Vec<bool> {
    let slack = 1e-9 * grid.max_spacing();
    grid.nodes()
        .map(|p| {
            p.iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| *x >= l - slack && *x <= u + slack)
        })
        .collect()
}

pub fn offdiag(ctx: &mut Context) -> Result<(OffdiagSection, Vec<Table>), LabError> {
    let oc = ctx
        .cfg
        .offdiag
        .clone()
        .ok_or_else(|| LabError::Config("offdiag needs an [offdiag] section".into()))?;
    let e = box_mask(&ctx.main.grid, &oc.e_lower, &oc.e_upper);
    let f = box_mask(&ctx.main.grid, &oc.f_lower, &oc.f_upper);
    let result = offdiag_experiment(&ctx.main.grid, &ctx.main.forms, &e, &f, &oc.t_list, oc.r_squared_min)?;
    let mut table = Table::new("offdiag.csv", &["t", "r1", "r2", "bound"]);
    for s in &result.samples {
        table.push(vec![s.t, s.r1, s.r2, s.bound]);
    }
    Ok((
        OffdiagSection {
            e_nodes: e.iter().filter(|x| **x).count(),
            f_nodes: f.iter().filter(|x| **x).count(),
            holds: result.holds,
            result,
        },
        vec![table],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSummary {
    pub t_list: Vec<f64>,
    pub functions: usize,
    /// Largest `‖(I + tL)⁻¹f‖_B / ‖f‖_B − 1`.
    pub max_contraction_excess: f64,
    /// Largest `‖tL(I + tL)⁻¹f − (f − (I + tL)⁻¹f)‖_B / ‖f‖_B`.
    pub max_splitting_error: f64,
    pub holds: bool,
}

/// Contraction and splitting identities of the resolvent.
pub fn resolvent_identities(
    forms: &AssembledForms,
    seed: u64,
    functions: usize,
    t_list: &[f64],
) -> Result<ResolventSummary, LabError> {
    let n = forms.len();
    let fs: Vec<Vec<f64>> = (0..functions)
        .map(|k| random_field(n, seed, 2_000 + k as u64))
        .collect();
    let mut max_contraction_excess = f64::NEG_INFINITY;
    let mut max_splitting_error = 0.0f64;
    for &t in t_list {
        let res = Resolvent::new(forms, t, LinearSolver::Auto)?;
        for f in &fs {
            let u = res.apply(f)?;
            let nf = forms.norm(f);
            max_contraction_excess = max_contraction_excess.max(forms.norm(&u) / nf - 1.0);
            let lu = apply_lm(forms, &u);
            let diff: Vec<f64> = (0..n).map(|k| t * lu[k] - (f[k] - u[k])).collect();
            max_splitting_error = max_splitting_error.max(forms.norm(&diff) / nf);
        }
    }
    Ok(ResolventSummary {
        t_list: t_list.to_vec(),
        functions,
        holds: max_contraction_excess <= CONTRACTION_TOLERANCE && max_splitting_error <= SPLITTING_TOLERANCE,
        max_contraction_excess,
        max_splitting_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticIdRow {
    pub function: usize,
    pub alpha: f64,
    pub lhs: f64,
    /// `‖L^{α/4} f‖²_B`; absent above the dense ceiling.
    pub power_norm: Option<f64>,
    pub ratio: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSection {
    pub functions: usize,
    pub t_nodes: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub targets: Vec<QuadraticRow>,
    pub rows: Vec<QuadraticIdRow>,
    pub max_relative_error: Option<f64>,
    pub tolerance: f64,
    pub identity_skipped: Option<String>,
    /// Absolute eigenvalue error of the dense reference decomposition.
    pub dense_error_bound: Option<f64>,
    pub resolvent: ResolventSummary,
    pub spectral: SpectralReport,
    pub holds: bool,
}

/// Quadrature grid covering the spectrum of the main problem.
fn spanning_grid(ctx: &mut Context, count: usize) -> Result<QuadratureGrid, LabError> {
    let lmin = ctx.lambda1()?;
    let lmax = ctx.main.forms.spectral_upper_bound();
    Ok(QuadratureGrid::spanning(lmin, lmax, count)?)
}

pub fn quadratic_id(ctx: &mut Context, config_hash: &str) -> Result<(QuadraticSection, Vec<Table>), LabError> {
    let sc = ctx.cfg.spectral.clone();
    let n = ctx.main.grid.len();
    let fs: Vec<Vec<f64>> = (0..sc.random_functions)
        .map(|k| {
            ctx.main
                .forms
                .project_mean_zero(&random_field(n, ctx.seed, 3_000 + k as u64))
        })
        .collect();
    let t_grid = spanning_grid(ctx, sc.quadrature_nodes)?;
    let q = quadratic_functional_multi(&ctx.main.forms, &fs, &sc.alpha_list, &t_grid, LinearSolver::Auto)?;
    let dense = if n <= DENSE_CEILING {
        Some(ctx.main.dense()?.0)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut max_err: Option<f64> = None;
    let mut table = Table::new("quadratic.csv", &["function", "alpha", "lhs", "power_norm", "ratio"]);
    for (j, f) in fs.iter().enumerate() {
        for (a, &alpha) in sc.alpha_list.iter().enumerate() {
            let lhs = q[j][a].value;
            let power_norm = dense.map(|d| d.power_norm_squared(f, 0.5 * alpha));
            let ratio = power_norm.map(|p| lhs / p);
            let relative_error = ratio.map(|r| (r / quadratic_constant(alpha) - 1.0).abs());
            if let Some(e) = relative_error {
                max_err = Some(max_err.map_or(e, |m: f64| m.max(e)));
            }
            table.push(vec![
                j as f64,
                alpha,
                lhs,
                power_norm.unwrap_or(f64::NAN),
                ratio.unwrap_or(f64::NAN),
            ]);
            rows.push(QuadraticIdRow {
                function: j,
                alpha,
                lhs,
                power_norm,
                ratio,
                relative_error,
            });
        }
    }
    let targets: Vec<QuadraticRow> = sc
        .alpha_list
        .iter()
        .map(|&alpha| {
            let sel: Vec<&QuadraticIdRow> = rows.iter().filter(|r| r.alpha == alpha).collect();
            let lhs = sel.iter().map(|r| r.lhs).sum::<f64>();
            let rhs = sel.iter().filter_map(|r| r.power_norm).sum::<f64>();
            QuadraticRow {
                alpha,
                lhs,
                rhs,
                ratio: if rhs > 0.0 { lhs / rhs } else { f64::NAN },
            }
        })
        .collect();
    let dense_error_bound = dense.map(|d| d.error_bound);
    let identity_skipped = dense
        .is_none()
        .then(|| format!("{n} nodes exceed the dense ceiling {DENSE_CEILING}"));
    let resolvent = resolvent_identities(&ctx.main.forms, ctx.seed, RESOLVENT_FUNCTIONS, &RESOLVENT_T_LIST)?;
    let lambda1 = ctx.lambda1()?;
    let spectral = SpectralReport {
        lambda1: Some(lambda1),
        poincare_constant: Some(1.0 / lambda1),
        eigenvalues: Vec::new(),
        lambda_weighted: None,
        offdiag_fit: None,
        quadratic_values: targets.clone(),
        config_hash: config_hash.to_string(),
    };
    let holds = resolvent.holds && max_err.is_none_or(|e| e <= sc.quadratic_tolerance);
    Ok((
        QuadraticSection {
            functions: fs.len(),
            t_nodes: t_grid.nodes.len(),
            t_min: t_grid.t_min(),
            t_max: t_grid.t_max(),
            targets,
            rows,
            max_relative_error: max_err,
            tolerance: sc.quadratic_tolerance,
            identity_skipped,
            dense_error_bound,
            resolvent,
            spectral,
            holds,
        },
        vec![table],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalAgreement {
    pub resolution: usize,
    pub estimates: Vec<f64>,
    pub relative_changes: Vec<f64>,
    pub max_relative_change: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSection {
    pub alpha: f64,
    pub rows: Vec<ControlRow>,
    pub c_fit: f64,
    pub refined_c_fit: Option<f64>,
    pub relative_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalSection {
    pub resolution: usize,
    pub nodes: usize,
    /// The estimates are minima over a finite family and so upper bounds of
    /// the infimum.
    pub upper_bound_only: bool,
    pub reports: Vec<NonlocalReport>,
    pub refined: Option<NonlocalAgreement>,
    pub control: ControlSection,
    pub holds: bool,
}

fn nonlocal_problem(ctx: &Context, resolution: usize) -> Result<Problem, LabError> {
    let nodes = resolution.pow(ctx.cfg.dim() as u32);
    if nodes > PAIR_CEILING {
        return Err(CoreError::Ceiling {
            what: "non-local pair sum",
            size: nodes,
            ceiling: PAIR_CEILING,
        }
        .into());
    }
    ctx.problem_at(resolution)
}

fn control_functions(ctx: &Context, p: &Problem, count: usize) -> Vec<Vec<f64>> {
    random_bumps(&p.grid, count, ctx.seed ^ 0xc0_7701)
        .into_iter()
        .map(|tf| p.forms.project_mean_zero(&tf.values))
        .collect()
}

fn control_c_fit(
    ctx: &Context,
    p: &Problem,
    alpha: f64,
    count: usize,
    nodes: usize,
) -> Result<Vec<ControlRow>, LabError> {
    let fs = control_functions(ctx, p, count);
    let lmin = poincare_spectrum(&p.forms, 1, &ctx.eigen_options(1))?.values[0];
    let t_grid = QuadratureGrid::spanning(lmin, p.forms.spectral_upper_bound(), nodes)?;
    Ok(controllalpha_check(
        &p.forms,
        &p.grid,
        &ctx.weight,
        &fs,
        alpha,
        &t_grid,
    )?)
}

fn max_ratio(rows: &[ControlRow]) -> f64 {
    rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
}

pub fn nonlocal(ctx: &mut Context) -> Result<NonlocalSection, LabError> {
    let nc = ctx
        .cfg
        .nonlocal
        .clone()
        .ok_or_else(|| LabError::Config("nonlocal needs a [nonlocal] section".into()))?;
    let resolution = nc.resolution.unwrap_or(ctx.cfg.grid.resolution);
    let p = nonlocal_problem(ctx, resolution)?;
    let family = shipped_test_family(&p.grid, &p.forms, ctx.seed)?;
    let reports = lambda_alpha_estimates(&p.grid, &ctx.weight, &nc.alpha_list, &family)?;
    let quad_nodes = ctx.cfg.spectral.quadrature_nodes;
    let rows = control_c_fit(ctx, &p, nc.control_alpha, nc.control_functions, quad_nodes)?;
    let c_fit = max_ratio(&rows);
    let nodes = p.grid.len();
    drop(p);

    let mut refined = None;
    let mut refined_c_fit = None;
    if let Some(r) = nc.refined_resolution {
        let q = nonlocal_problem(ctx, r)?;
        let fam = shipped_test_family(&q.grid, &q.forms, ctx.seed)?;
        let est: Vec<f64> = lambda_alpha_estimates(&q.grid, &ctx.weight, &nc.alpha_list, &fam)?
            .iter()
            .map(|x| x.lambda_alpha_estimate)
            .collect();
        let changes: Vec<f64> = reports
            .iter()
            .zip(&est)
            .map(|(a, b)| relative_change(a.lambda_alpha_estimate, *b))
            .collect();
        refined = Some(NonlocalAgreement {
            resolution: r,
            max_relative_change: changes.iter().cloned().fold(0.0, f64::max),
            estimates: est,
            relative_changes: changes,
            tolerance: nc.agreement,
        });
        refined_c_fit = Some(max_ratio(&control_c_fit(
            ctx,
            &q,
            nc.control_alpha,
            nc.control_functions,
            quad_nodes,
        )?));
    }
    let positive = reports
        .iter()
        .all(|r| r.lambda_alpha_estimate > 0.0 && r.lambda_alpha_estimate.is_finite());
    let agrees = refined.as_ref().is_none_or(|a| a.max_relative_change <= a.tolerance);
    let bounded = c_fit.is_finite()
        && rows
            .iter()
            .all(|r| r.lhs_integral <= c_fit * r.rhs_energy * (1.0 + 1e-12) + 1e-300);
    Ok(NonlocalSection {
        resolution,
        nodes,
        upper_bound_only: true,
        reports,
        refined,
        control: ControlSection {
            alpha: nc.control_alpha,
            relative_change: refined_c_fit.map(|r| relative_change(c_fit, r)),
            rows,
            c_fit,
            refined_c_fit,
        },
        holds: positive && agrees && bounded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSummary {
    pub t: f64,
    pub centers: usize,
    pub separation: f64,
    pub cover_radius: f64,
    pub max_cover_distance: f64,
    pub min_center_distance: f64,
    pub maximal: bool,
    pub overlap: Vec<OverlapStat>,
    pub c_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetStability {
    pub resolution: usize,
    pub c_tilde: f64,
    /// Per-`t` constants at the refined resolution.
    pub per_t: Vec<f64>,
    /// `relative_change(C̃, refined C̃)`; the asserted stability figure.
    pub relative_change: f64,
    /// Per-`t` changes, informational.
    pub relative_changes: Vec<f64>,
    pub max_relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSummary {
    pub t: f64,
    pub k_max: u32,
    pub rows: usize,
    pub skipped: usize,
    pub c_bar: f64,
    pub refined_c_bar: Option<f64>,
    pub relative_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringSection {
    pub resolution: usize,
    pub kappa: f64,
    pub nets: Vec<NetSummary>,
    /// Largest overlap ratio over every `t` and `θ`.
    pub c_tilde: f64,
    pub refined: Option<NetStability>,
    pub annulus: AnnulusSummary,
    pub stability: f64,
    pub holds: bool,
}

fn net_summaries(
    p: &Problem,
    kappa: f64,
    t_list: &[f64],
    thetas: &[f64],
    tables: Option<&mut Vec<Table>>,
) -> Result<Vec<NetSummary>, LabError> {
    let dim = p.grid.dim();
    let mut header: Vec<String> = vec!["t".into(), "center".into()];
    header.extend((0..dim).map(|j| format!("x{j}")));
    let mut net_table = Table {
        file_name: "nets.csv".into(),
        header,
        rows: Vec::new(),
    };
    let mut overlap_table = Table::new("overlap.csv", &["t", "theta", "max_count", "ratio"]);
    let mut out = Vec::new();
    for &t in t_list {
        let net = build_net(&p.grid, t)?;
        let overlap = overlap_bound_check(&net, kappa, thetas);
        for (k, c) in net.center_coords.iter().enumerate() {
            let mut row = vec![t, k as f64];
            row.extend_from_slice(c);
            net_table.push(row);
        }
        for s in &overlap {
            overlap_table.push(vec![t, s.theta, s.max_count as f64, s.ratio]);
        }
        out.push(NetSummary {
            t,
            centers: net.centers.len(),
            separation: net.separation,
            cover_radius: net.cover_radius,
            max_cover_distance: net.max_cover_distance,
            min_center_distance: net.min_center_distance,
            maximal: net.maximal,
            c_tilde: overlap_constant(&overlap),
            overlap,
        });
    }
    if let Some(tables) = tables {
        tables.push(net_table);
        tables.push(overlap_table);
    }
    Ok(out)
}

fn annulus_rows(
    ctx: &Context,
    p: &Problem,
    t: f64,
    k_max: u32,
) -> Result<Vec<sublap_core::nonlocal::AnnulusRow>, LabError> {
    let net = build_net(&p.grid, t)?;
    let f = annulus_function(ctx, p);
    Ok(annulus_table(&p.grid, &p.forms.weight_diag, &net, &f, k_max)?)
}

/// Sum of three seeded bumps, defined in coordinates so it is the same
/// function at every resolution.
fn annulus_function(ctx: &Context, p: &Problem) -> Vec<f64> {
    let bumps = random_bumps(&p.grid, 3, ctx.seed ^ 0xa22_0105);
    let mut f = vec![0.0; p.grid.len()];
    for b in bumps {
        for (a, v) in f.iter_mut().zip(b.values) {
            *a += v;
        }
    }
    f
}

pub fn covering(ctx: &mut Context) -> Result<(CoveringSection, Vec<Table>), LabError> {
    let cc = ctx
        .cfg
        .covering
        .clone()
        .ok_or_else(|| LabError::Config("covering needs a [covering] section".into()))?;
    let kappa = ctx.group.growth_exponents().kappa;
    let resolution = cc.resolution.unwrap_or(ctx.cfg.grid.resolution);
    let p = if resolution == ctx.main.resolution() {
        None
    } else {
        Some(ctx.problem_at(resolution)?)
    };
    let p_ref = p.as_ref().unwrap_or(&ctx.main);
    let mut tables = Vec::new();
    let nets = net_summaries(p_ref, kappa, &cc.t_list, &cc.theta_list, Some(&mut tables))?;
    let annulus_t = cc.annulus_t.unwrap_or(cc.t_list[0]);
    let arows = annulus_rows(ctx, p_ref, annulus_t, cc.k_max)?;
    let mut atable = Table::new("annulus.csv", &["center", "k", "lhs", "rhs", "ratio", "skipped"]);
    for r in &arows {
        atable.push(vec![
            r.center as f64,
            r.k as f64,
            r.lhs,
            r.rhs,
            r.ratio,
            if r.skipped { 1.0 } else { 0.0 },
        ]);
    }
    tables.push(atable);
    let c_bar = annulus_constant(&arows);
    let c_tilde = nets.iter().map(|s| s.c_tilde).fold(0.0, f64::max);
    drop(p);

    let mut refined = None;
    let mut refined_c_bar = None;
    if let Some(r) = cc.refined_resolution {
        let q = ctx.problem_at(r)?;
        let rn = net_summaries(&q, kappa, &cc.t_list, &cc.theta_list, None)?;
        let c: Vec<f64> = rn.iter().map(|s| s.c_tilde).collect();
        let changes: Vec<f64> = nets
            .iter()
            .zip(&c)
            .map(|(a, b)| relative_change(a.c_tilde, *b))
            .collect();
        let refined_c = c.iter().cloned().fold(0.0, f64::max);
        refined = Some(NetStability {
            resolution: r,
            c_tilde: refined_c,
            relative_change: relative_change(c_tilde, refined_c),
            max_relative_change: changes.iter().cloned().fold(0.0, f64::max),
            per_t: c,
            relative_changes: changes,
        });
        refined_c_bar = Some(annulus_constant(&annulus_rows(ctx, &q, annulus_t, cc.k_max)?));
    }
    let covered = nets.iter().all(|s| s.maximal && s.max_cover_distance <= s.cover_radius);
    let stable = refined.as_ref().is_none_or(|s| s.relative_change <= cc.stability);
    let relative = refined_c_bar.map(|r| relative_change(c_bar, r));
    let annulus_ok = c_bar.is_finite() && relative.is_none_or(|r| r <= cc.stability);
    Ok((
        CoveringSection {
            resolution,
            kappa,
            nets,
            c_tilde,
            refined,
            annulus: AnnulusSummary {
                t: annulus_t,
                k_max: cc.k_max,
                rows: arows.len(),
                skipped: arows.iter().filter(|r| r.skipped).count(),
                c_bar,
                refined_c_bar,
                relative_change: relative,
            },
            stability: cc.stability,
            holds: covered && stable && annulus_ok,
        },
        tables,
    ))
}
