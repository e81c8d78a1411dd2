//! Orchestration of one run: config in, report files out.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::LabError;
use crate::formats::{write_diagonal_triplets, write_triplets, Table};
use crate::pipelines::{self, Context};
use crate::report::{config_hash, Assertion, GridInfo, RunMeta, RunReport, Timing, ToolInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    CheckLyapunov,
    PoincareGap,
    ImprovedGap,
    Offdiag,
    QuadraticId,
    Nonlocal,
    Covering,
    All,
    ExportForms,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::CheckLyapunov => "check-lyapunov",
            Pipeline::PoincareGap => "poincare-gap",
            Pipeline::ImprovedGap => "improved-gap",
            Pipeline::Offdiag => "offdiag",
            Pipeline::QuadraticId => "quadratic-id",
            Pipeline::Nonlocal => "nonlocal",
            Pipeline::Covering => "covering",
            Pipeline::All => "all",
            Pipeline::ExportForms => "export-forms",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub meta: RunMeta,
}

impl RunOutcome {
    /// 0 if every asserted inequality holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_hold {
            0
        } else {
            2
        }
    }
}

/// Parses, validates and applies the seed override.
pub fn load_config(opts: &RunOptions) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(s) = opts.seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sublap-out"))
}

fn export_forms(ctx: &Context, dir: &Path) -> Result<(), LabError> {
    let f = &ctx.main.forms;
    let write = |name: &str, res: &dyn Fn(std::fs::File) -> std::io::Result<()>| -> Result<(), LabError> {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
        res(file).map_err(|e| LabError::io(&path, e))
    };
    write("dirichlet.triplets", &|w| {
        write_triplets(&f.dirichlet, std::io::BufWriter::new(w))
    })?;
    write("mass.triplets", &|w| {
        write_diagonal_triplets(&f.mass, std::io::BufWriter::new(w))
    })?;
    write("weighted_mass.triplets", &|w| {
        write_diagonal_triplets(&f.weighted_mass, std::io::BufWriter::new(w))
    })?;
    Ok(())
}

/// Runs `pipeline` and writes the report, metadata and tables.
pub fn execute(pipeline: Pipeline, opts: &RunOptions) -> Result<RunOutcome, LabError> {
    let started = Instant::now();
    let started_unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let cfg = load_config(opts)?;
    let out_dir = output_dir(&cfg, opts);
    std::fs::create_dir_all(&out_dir).map_err(|e| LabError::io(&out_dir, e))?;
    let hash = config_hash(&cfg);
    let seed = cfg.run.seed;

    let mut timings = Vec::new();
    let t0 = Instant::now();
    let mut ctx = Context::new(cfg.clone(), seed)?;
    timings.push(Timing {
        pipeline: "setup".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    let grid = &ctx.main.grid;
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        subcommand: pipeline.name().to_string(),
        config_hash: hash.clone(),
        seed,
        threads: opts.threads,
        config: cfg.clone(),
        grid: GridInfo {
            shape: grid.shape().to_vec(),
            nodes: grid.len(),
            lower: grid.lower().to_vec(),
            upper: grid.upper().to_vec(),
            spacing: grid.spacing().to_vec(),
            tail_estimate: Some(grid.tail_estimate()).filter(|t| t.is_finite()),
            volume_constant: ctx.group.volume_constant(),
        },
        lyapunov: None,
        poincare_gap: None,
        improved_gap: None,
        offdiag: None,
        quadratic_id: None,
        nonlocal: None,
        covering: None,
        assertions: Vec::new(),
        all_hold: true,
    };
    let mut tables: Vec<Table> = Vec::new();
    let all = pipeline == Pipeline::All;
    let wants = |p: Pipeline, present: bool| pipeline == p || (all && present);

    macro_rules! timed {
        ($name:expr, $body:expr) => {{
            let t = Instant::now();
            let r = $body;
            timings.push(Timing {
                pipeline: $name.into(),
                seconds: t.elapsed().as_secs_f64(),
            });
            r
        }};
    }

    if pipeline == Pipeline::ExportForms {
        timed!("export-forms", export_forms(&ctx, &out_dir))?;
    }
    if wants(Pipeline::CheckLyapunov, cfg.lyapunov.is_some()) {
        let s = timed!("check-lyapunov", pipelines::check_lyapunov(&mut ctx))?;
        report.assertions.push(Assertion {
            pipeline: "check-lyapunov".into(),
            holds: s.holds,
        });
        report.lyapunov = Some(s);
    }
    if wants(Pipeline::PoincareGap, true) {
        let s = timed!("poincare-gap", pipelines::poincare_gap(&mut ctx))?;
        let mut table = crate::formats::Table::new("eigenvalues.csv", &["k", "eigenvalue", "residual"]);
        for (k, (v, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
            table.push(vec![(k + 1) as f64, *v, *r]);
        }
        tables.push(table);
        report.assertions.push(Assertion {
            pipeline: "poincare-gap".into(),
            holds: s.holds,
        });
        report.poincare_gap = Some(s);
    }
    if wants(Pipeline::ImprovedGap, cfg.improved.is_some()) {
        let s = timed!("improved-gap", pipelines::improved_gap(&mut ctx))?;
        report.assertions.push(Assertion {
            pipeline: "improved-gap".into(),
            holds: s.holds,
        });
        report.improved_gap = Some(s);
    }
    if wants(Pipeline::Offdiag, cfg.offdiag.is_some()) {
        let (s, t) = timed!("offdiag", pipelines::offdiag(&mut ctx))?;
        tables.extend(t);
        report.assertions.push(Assertion {
            pipeline: "offdiag".into(),
            holds: s.holds,
        });
        report.offdiag = Some(s);
    }
    if wants(Pipeline::QuadraticId, true) {
        let (s, t) = timed!("quadratic-id", pipelines::quadratic_id(&mut ctx, &hash))?;
        tables.extend(t);
        report.assertions.push(Assertion {
            pipeline: "quadratic-id".into(),
            holds: s.holds,
        });
        report.quadratic_id = Some(s);
    }
    if wants(Pipeline::Nonlocal, cfg.nonlocal.is_some()) {
        let s = timed!("nonlocal", pipelines::nonlocal(&mut ctx))?;
        report.assertions.push(Assertion {
            pipeline: "nonlocal".into(),
            holds: s.holds,
        });
        report.nonlocal = Some(s);
    }
    if wants(Pipeline::Covering, cfg.covering.is_some()) {
        let (s, t) = timed!("covering", pipelines::covering(&mut ctx))?;
        tables.extend(t);
        report.assertions.push(Assertion {
            pipeline: "covering".into(),
            holds: s.holds,
        });
        report.covering = Some(s);
    }
    report.all_hold = report.assertions.iter().all(|a| a.holds);

    report.write(&out_dir)?;
    for t in &tables {
        t.write(&out_dir)?;
    }
    let meta = RunMeta {
        tool: ToolInfo::current(),
        config_hash: hash,
        started_unix_seconds,
        threads: opts.threads,
        timings,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    meta.write(&out_dir)?;
    Ok(RunOutcome { report, out_dir, meta })
}
