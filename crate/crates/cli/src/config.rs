//! Run configuration: the file schema, flag overrides and validation into a
//! [`Job`]. Nothing is computed until a whole config has been validated.

use std::path::{Path, PathBuf};

use qpt_core::analysis::{ClassifyOptions, ExtremumKind, Grid, PairSpec, SolverConfig};
use qpt_core::eigensolver::DEFAULT_SEED;
use qpt_core::lattice::Lattice;
use qpt_core::models::{Family, ModelSpec};
use qpt_core::observables::OperatorTag;
use serde::{Deserialize, Serialize};

use crate::args::RunArgs;
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_leg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_rung: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

impl ModelSection {
    fn params(&self) -> [(&'static str, Option<f64>); 10] {
        [
            ("delta", self.delta),
            ("j1", self.j1),
            ("j2", self.j2),
            ("lambda", self.lambda),
            ("j_leg", self.j_leg),
            ("j_rung", self.j_rung),
            ("jx", self.jx),
            ("jy", self.jy),
            ("jz", self.jz),
            ("h", self.h),
        ]
    }

    fn slot(&mut self, name: &str) -> &mut Option<f64> {
        match name {
            "delta" => &mut self.delta,
            "j1" => &mut self.j1,
            "j2" => &mut self.j2,
            "lambda" => &mut self.lambda,
            "j_leg" => &mut self.j_leg,
            "j_rung" => &mut self.j_rung,
            "jx" => &mut self.jx,
            "jy" => &mut self.jy,
            "jz" => &mut self.jz,
            "h" => &mut self.h,
            _ => unreachable!("unknown parameter slot {name}"),
        }
    }

    fn is_empty(&self) -> bool {
        self.family.is_none() && self.params().iter().all(|(_, v)| v.is_none())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    /// Total site count; a ladder of `r` rungs has `2r` sites.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Hexadecimal, with or without `0x`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremum: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Spectrum,
    Sweep,
    Classify,
    SumRule,
    Scaling,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Sweep => "sweep",
            CommandKind::Classify => "classify",
            CommandKind::SumRule => "sumrule",
            CommandKind::Scaling => "scaling",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            CommandKind::Spectrum,
            CommandKind::Sweep,
            CommandKind::Classify,
            CommandKind::SumRule,
            CommandKind::Scaling,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: CommandKind,
    /// Absent only for presets.
    pub model: Option<ModelSpec>,
    pub lattice: Option<Lattice>,
    pub grid: Option<Grid>,
    pub solver: SolverConfig,
    pub pairs: Vec<PairSpec>,
    pub operators: Vec<OperatorTag>,
    pub sizes: Vec<usize>,
    pub order: usize,
    pub extremum: ExtremumKind,
    pub classify: ClassifyOptions,
    pub preset: Option<Preset>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub timing: bool,
    pub threads: Option<usize>,
    /// The resolved configuration; feeding it back reproduces the run.
    pub echo: RunConfig,
}

fn bad<T>(field: &str, msg: impl std::fmt::Display) -> Result<T, CliError> {
    Err(CliError::Config(format!("{field}: {msg}")))
}

pub fn load_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.trim_end())))
}

/// Applies command-line flags on top of `cfg`.
pub fn overlay(mut cfg: RunConfig, a: &RunArgs) -> Result<RunConfig, CliError> {
    if let Some(spec) = &a.sweep {
        cfg.grid = Some(parse_sweep_flag(spec)?);
    }
    let model = cfg.model.get_or_insert_with(Default::default);
    if let Some(m) = &a.model {
        model.family = Some(m.clone());
    }
    for (name, value) in [
        ("delta", a.delta),
        ("j1", a.j1),
        ("j2", a.j2),
        ("lambda", a.lambda),
        ("j_leg", a.j_leg),
        ("j_rung", a.j_rung),
        ("jx", a.jx),
        ("jy", a.jy),
        ("jz", a.jz),
        ("h", a.h),
    ] {
        if value.is_some() {
            *model.slot(name) = value;
        }
    }
    if let Some(n) = a.sites {
        cfg.lattice.get_or_insert_with(Default::default).sites = Some(n);
    }
    let solver = cfg.solver.get_or_insert_with(Default::default);
    solver.levels = a.levels.or(solver.levels);
    solver.tol = a.tol.or(solver.tol);
    solver.seed = a.seed.clone().or(solver.seed.take());
    solver.dense_cap = a.dense_cap.or(solver.dense_cap);
    solver.max_iter = a.max_iter.or(solver.max_iter);
    solver.threads = a.threads.or(solver.threads);
    let an = cfg.analysis.get_or_insert_with(Default::default);
    an.pairs = a.pairs.clone().or(an.pairs.take());
    an.operators = a.operator.clone().or(an.operators.take());
    an.sizes = a.sizes.clone().or(an.sizes.take());
    an.order = a.order.or(an.order);
    an.extremum = a.extremum.clone().or(an.extremum.take());
    an.jump_tol = a.jump_tol.or(an.jump_tol);
    if a.raw {
        an.raw = Some(true);
    }
    an.preset = a.preset.clone().or(an.preset.take());
    let out = cfg.output.get_or_insert_with(Default::default);
    out.format = a.format.clone().or(out.format.take());
    out.path = a.out.clone().or(out.path.take());
    if a.no_timing {
        out.timing = Some(false);
    }
    Ok(cfg)
}

/// Parses `name:min:max:step` into a grid section.
pub fn parse_sweep_flag(spec: &str) -> Result<GridSection, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return bad("--sweep", format!("expected name:min:max:step, got {spec:?}"));
    }
    let num = |s: &str, what: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .or_else(|_| bad("--sweep", format!("{what} {s:?} is not a number")))
    };
    Ok(GridSection {
        parameter: Some(parts[0].trim().to_string()),
        min: Some(num(parts[1], "min")?),
        max: Some(num(parts[2], "max")?),
        step: Some(num(parts[3], "step")?),
    })
}

pub fn parse_seed(s: &str) -> Result<u64, CliError> {
    let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(digits, 16).or_else(|_| bad("solver.seed", format!("{s:?} is not a hexadecimal u64")))
}

fn canonical_parameter(family: Family, name: &str) -> String {
    match (family, name) {
        (Family::Ladder, "j") => "j_rung".into(),
        _ => name.into(),
    }
}

fn unused(field: &str, command: CommandKind, present: bool) -> Result<(), CliError> {
    if present {
        return bad(field, format!("not used by {}", command.name()));
    }
    Ok(())
}

fn core_err(field: &str) -> impl Fn(qpt_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{field}: {e}"))
}

fn resolve_model(section: &ModelSection) -> Result<ModelSpec, CliError> {
    let Some(name) = &section.family else {
        return bad("model.family", "missing (use --model)");
    };
    let family: Family = name.parse().map_err(core_err("model.family"))?;
    let mut model = family.default_model();
    for (name, value) in section.params() {
        if let Some(v) = value {
            model = model
                .with_parameter(name, v)
                .map_err(core_err(&format!("model.{name}")))?;
        }
    }
    model.validate().map_err(core_err("model"))?;
    Ok(model)
}

fn model_echo(model: &ModelSpec) -> ModelSection {
    let mut s = ModelSection {
        family: Some(model.family().name().to_string()),
        ..Default::default()
    };
    for (name, v) in model.parameters() {
        *s.slot(name) = Some(v);
    }
    s
}

fn resolve_grid(section: &GridSection, model: &ModelSpec) -> Result<Grid, CliError> {
    let Some(name) = &section.parameter else {
        return bad("grid.parameter", "missing (use --sweep name:min:max:step)");
    };
    let name = canonical_parameter(model.family(), name);
    let need = |v: Option<f64>, f: &str| v.map_or_else(|| bad(&format!("grid.{f}"), "missing"), Ok);
    let grid = Grid::new(
        name.clone(),
        need(section.min, "min")?,
        need(section.max, "max")?,
        need(section.step, "step")?,
    )
    .map_err(core_err("grid"))?;
    for end in [grid.min, grid.max] {
        model
            .with_parameter(&name, end)
            .and_then(|m| m.validate())
            .map_err(core_err("grid.parameter"))?;
    }
    Ok(grid)
}

fn resolve_lattice(model: &ModelSpec, sites: usize, field: &str) -> Result<Lattice, CliError> {
    let lattice = Lattice::new(model.family().geometry(), sites).map_err(core_err(field))?;
    model.check_lattice(&lattice).map_err(core_err(field))?;
    Ok(lattice)
}

fn resolve_pairs(names: &[String], lattices: &[Lattice]) -> Result<Vec<PairSpec>, CliError> {
    if names.is_empty() {
        return bad("analysis.pairs", "empty list");
    }
    let mut pairs = Vec::new();
    for n in names {
        let p: PairSpec = n.parse().map_err(core_err("analysis.pairs"))?;
        for l in lattices {
            p.resolve(l).map_err(core_err("analysis.pairs"))?;
        }
        pairs.push(p);
    }
    Ok(pairs)
}

/// Validates `cfg` for `command` and resolves every default.
pub fn resolve(command: CommandKind, cfg: &RunConfig) -> Result<Job, CliError> {
    use CommandKind::*;
    if let Some(c) = &cfg.command {
        match CommandKind::parse(c) {
            Some(k) if k == command => {}
            Some(_) => return bad("command", format!("config is for {c:?}, not {:?}", command.name())),
            None => return bad("command", format!("unknown command {c:?}")),
        }
    }
    let model_s = cfg.model.clone().unwrap_or_default();
    let sites = cfg.lattice.as_ref().and_then(|l| l.sites);
    let grid_s = cfg.grid.clone().unwrap_or_default();
    let grid_given = grid_s != GridSection::default();
    let solver_s = cfg.solver.clone().unwrap_or_default();
    let an = cfg.analysis.clone().unwrap_or_default();
    let out_s = cfg.output.clone().unwrap_or_default();

    let preset = match an.preset.as_deref() {
        None => None,
        Some("table1") if command == Classify => Some(Preset::Table1),
        Some(p) if command == Classify => return bad("analysis.preset", format!("unknown preset {p:?}; known: table1")),
        Some(_) => return bad("analysis.preset", format!("not used by {}", command.name())),
    };

    let format = match out_s.format.as_deref().unwrap_or("json") {
        "json" => Format::Json,
        "csv" if command == Sweep => Format::Csv,
        "csv" => return bad("output.format", format!("csv is only available for sweep, not {}", command.name())),
        f => return bad("output.format", format!("unknown format {f:?}; use json or csv")),
    };

    // field usage
    unused("analysis.operators", command, command != SumRule && an.operators.is_some())?;
    for (f, v) in [
        ("analysis.sizes", an.sizes.is_some()),
        ("analysis.order", an.order.is_some()),
        ("analysis.extremum", an.extremum.is_some()),
    ] {
        unused(f, command, command != Scaling && v)?;
    }
    unused("analysis.jump_tol", command, command != Classify && an.jump_tol.is_some())?;
    unused("analysis.raw", command, command != Classify && an.raw.is_some())?;
    unused("analysis.pairs", command, matches!(command, Spectrum | SumRule) && an.pairs.is_some())?;
    unused("grid", command, matches!(command, Spectrum | SumRule) && grid_given)?;
    unused("lattice.sites", command, command == Scaling && sites.is_some())?;
    if command == SumRule {
        for (f, v) in [
            ("solver.levels", solver_s.levels.is_some()),
            ("solver.tol", solver_s.tol.is_some()),
            ("solver.seed", solver_s.seed.is_some()),
            ("solver.max_iter", solver_s.max_iter.is_some()),
        ] {
            unused(f, command, v)?;
        }
    }
    if preset.is_some() {
        unused("model", command, !model_s.is_empty())?;
        unused("grid", command, grid_given)?;
        unused("analysis.pairs", command, an.pairs.is_some())?;
        unused("analysis.raw", command, an.raw.is_some())?;
    }

    let mut solver = SolverConfig::default();
    let min_levels = if command == Classify { 3 } else { 1 };
    if let Some(k) = solver_s.levels {
        if k < min_levels {
            return bad("solver.levels", format!("{} needs at least {min_levels}", command.name()));
        }
        solver.levels = k;
    }
    if let Some(t) = solver_s.tol {
        if !(t.is_finite() && t > 0.0) {
            return bad("solver.tol", format!("must be positive, got {t}"));
        }
        solver.lanczos.tol = t;
    }
    let seed = match &solver_s.seed {
        Some(s) => parse_seed(s)?,
        None => DEFAULT_SEED,
    };
    solver.lanczos.seed = seed;
    if let Some(c) = solver_s.dense_cap {
        if c == 0 {
            return bad("solver.dense_cap", "must be positive");
        }
        solver.dense_cap = c;
    }
    if let Some(m) = solver_s.max_iter {
        if m == 0 {
            return bad("solver.max_iter", "must be positive");
        }
        solver.lanczos.max_iter = m;
    }
    if solver_s.threads == Some(0) {
        return bad("solver.threads", "must be positive");
    }

    let mut job = Job {
        command,
        model: None,
        lattice: None,
        grid: None,
        solver,
        pairs: vec![],
        operators: vec![],
        sizes: vec![],
        order: 1,
        extremum: ExtremumKind::Min,
        classify: ClassifyOptions {
            jump_tol: an.jump_tol,
            raw: an.raw.unwrap_or(false),
            ..Default::default()
        },
        preset,
        format,
        out: out_s.path.clone(),
        timing: out_s.timing.unwrap_or(true),
        threads: solver_s.threads,
        echo: RunConfig::default(),
    };
    if let Some(t) = an.jump_tol {
        if !(t.is_finite() && t > 0.0) {
            return bad("analysis.jump_tol", format!("must be positive, got {t}"));
        }
    }

    let mut echo = RunConfig {
        command: Some(command.name().into()),
        ..Default::default()
    };
    let mut an_echo = AnalysisSection::default();

    if preset.is_none() {
        let model = resolve_model(&model_s)?;
        echo.model = Some(model_echo(&model));
        if command != Scaling {
            let Some(n) = sites else {
                return bad("lattice.sites", "missing (use --sites)");
            };
            let lattice = resolve_lattice(&model, n, "lattice.sites")?;
            job.lattice = Some(lattice);
            echo.lattice = Some(LatticeSection { sites: Some(n) });
        }
        if matches!(command, Sweep | Classify | Scaling) {
            let grid = resolve_grid(&grid_s, &model)?;
            echo.grid = Some(GridSection {
                parameter: Some(grid.parameter.clone()),
                min: Some(grid.min),
                max: Some(grid.max),
                step: Some(grid.step),
            });
            job.grid = Some(grid);
        }
        job.model = Some(model);
    } else {
        let n = sites.unwrap_or(8);
        if n < 4 || !n.is_multiple_of(2) || n > 16 {
            return bad("lattice.sites", format!("table1 runs on an even size between 4 and 16, got {n}"));
        }
        echo.lattice = Some(LatticeSection { sites: Some(n) });
        an_echo.preset = Some("table1".into());
        job.lattice = None;
        job.sizes = vec![n];
    }

    match command {
        Sweep | Classify if preset.is_none() => {
            let model = job.model.unwrap();
            let lattice = job.lattice.unwrap();
            job.pairs = match &an.pairs {
                Some(names) => resolve_pairs(names, &[lattice])?,
                None => PairSpec::defaults(model.family().geometry()),
            };
            an_echo.pairs = Some(job.pairs.iter().map(|p| p.label()).collect());
            if command == Classify {
                an_echo.jump_tol = an.jump_tol;
                an_echo.raw = Some(job.classify.raw);
            }
        }
        SumRule => {
            let model = job.model.unwrap();
            let lattice = job.lattice.unwrap();
            let dim = lattice.full_dimension();
            if dim > solver.dense_cap {
                return bad(
                    "lattice.sites",
                    format!("sum rules need the full {dim}-dimensional spectrum, above the dense cap {}", solver.dense_cap),
                );
            }
            job.operators = match &an.operators {
                Some(names) if names.is_empty() => return bad("analysis.operators", "empty list"),
                Some(names) => names
                    .iter()
                    .map(|n| n.parse::<OperatorTag>().map_err(core_err("analysis.operators")))
                    .collect::<Result<_, _>>()?,
                None => qpt_core::observables::natural_operators(&model).to_vec(),
            };
            an_echo.operators = Some(job.operators.iter().map(|o| o.name().to_string()).collect());
        }
        Scaling => {
            let model = job.model.unwrap();
            let Some(sizes) = &an.sizes else {
                return bad("analysis.sizes", "missing (use --sizes)");
            };
            if sizes.is_empty() {
                return bad("analysis.sizes", "empty list");
            }
            let lattices = sizes
                .iter()
                .map(|&n| resolve_lattice(&model, n, "analysis.sizes"))
                .collect::<Result<Vec<_>, _>>()?;
            job.sizes = sizes.clone();
            job.pairs = match &an.pairs {
                Some(names) if names.len() != 1 => return bad("analysis.pairs", "scaling follows exactly one pair"),
                Some(names) => resolve_pairs(names, &lattices)?,
                None => PairSpec::defaults(model.family().geometry())[..1].to_vec(),
            };
            job.order = an.order.unwrap_or(1);
            if job.order == 0 {
                return bad("analysis.order", "must be at least 1");
            }
            job.extremum = match an.extremum.as_deref().unwrap_or("min") {
                "min" => ExtremumKind::Min,
                "max" => ExtremumKind::Max,
                e => return bad("analysis.extremum", format!("{e:?} is neither min nor max")),
            };
            an_echo.pairs = Some(job.pairs.iter().map(|p| p.label()).collect());
            an_echo.sizes = Some(job.sizes.clone());
            an_echo.order = Some(job.order);
            an_echo.extremum = Some(if job.extremum == ExtremumKind::Min { "min" } else { "max" }.into());
        }
        _ => {}
    }
    if command == Classify && preset.is_some() {
        an_echo.jump_tol = an.jump_tol;
    }

    let lanczos = command != SumRule;
    echo.solver = Some(SolverSection {
        levels: lanczos.then_some(job.solver.levels),
        tol: lanczos.then_some(job.solver.lanczos.tol),
        seed: lanczos.then(|| format!("{seed:#x}")),
        dense_cap: Some(job.solver.dense_cap),
        max_iter: lanczos.then_some(job.solver.lanczos.max_iter),
        threads: job.threads,
    });
    if an_echo != AnalysisSection::default() {
        echo.analysis = Some(an_echo);
    }
    echo.output = Some(OutputSection {
        format: Some(if format == Format::Csv { "csv" } else { "json" }.into()),
        path: job.out.clone(),
        timing: Some(job.timing),
    });
    job.echo = echo;
    Ok(job)
}
