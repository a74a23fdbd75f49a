//! Parameter sweeps, level crossings, concurrence derivatives, finite-size
//! scaling and the three-way classification of transitions.
//!
//! A *level* is a cluster of degenerate eigenstates. Levels are tracked along a
//! sweep by a symmetry key (multiplicity, `S^z` content, traces of `S^2`,
//! parity, translation and leg exchange over the cluster). Traces over a
//! cluster do not depend on how a degenerate eigenbasis was chosen, so the
//! key is stable even where the solver mixes degenerate states.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigensolver::{dense_spectrum, lanczos_lowest_k, EigenSolution, LanczosOptions, StateLabels, TotalSpin};
use crate::entanglement::wootters_concurrence;
use crate::error::{invalid, Error, Result};
use crate::lattice::{Geometry, Lattice, SectorBasis};
use crate::models::{coupling_graph, CouplingGraph, Family, ModelSpec, SectorOperator, DEFAULT_DENSE_CAP};
use crate::observables::{
    leg_swap_expectation, parity_expectation, parity_from_expectation, s_squared, sector_parity, spin_from_s_squared,
    translation_expectation, two_site_rdm, SpinAxis, QUANTIZATION_TOL,
};

/// Symmetry labels of two levels are compared with this absolute tolerance.
const KEY_TOL: f64 = 1e-4;
/// Bisection stops once the bracket is this narrow.
const REFINE_WIDTH: f64 = 1e-7;
/// A refined crossing is a true crossing when the gap closes below this.
const CROSSING_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorPolicy {
    /// Every `S^z` sector; needed for level crossings between sectors.
    All,
    /// Only the sector with the smallest `|S^z|`; enough for ground states of
    /// antiferromagnets and much cheaper at large `N`.
    LowestAbsSz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Eigenstates reported per point.
    pub levels: usize,
    pub lanczos: LanczosOptions,
    /// Sectors up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    pub dense_cap: usize,
    pub sectors: SectorPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            lanczos: LanczosOptions::default(),
            dense_threshold: 100,
            dense_cap: DEFAULT_DENSE_CAP,
            sectors: SectorPolicy::All,
        }
    }
}

/// One solved eigenstate of a point spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRecord {
    pub energy: f64,
    #[serde(skip)]
    pub sector: usize,
    #[serde(skip)]
    pub index: usize,
    pub labels: StateLabels,
    pub translation: f64,
    pub leg_swap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelKey {
    pub multiplicity: usize,
    pub sz_twice: Vec<i32>,
    pub s_squared: Option<f64>,
    pub parity: Option<f64>,
    pub translation: f64,
    pub leg_swap: Option<f64>,
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= KEY_TOL,
        (None, None) => true,
        _ => false,
    }
}

impl LevelKey {
    pub fn matches(&self, other: &LevelKey) -> bool {
        self.multiplicity == other.multiplicity
            && self.sz_twice == other.sz_twice
            && close_opt(self.s_squared, other.s_squared)
            && close_opt(self.parity, other.parity)
            && (self.translation - other.translation).abs() <= KEY_TOL
            && close_opt(self.leg_swap, other.leg_swap)
    }

    /// False when a conserved label fails to quantize (solver mixing or a
    /// cluster split by the degeneracy tolerance).
    pub fn resolved(&self) -> bool {
        let m = self.multiplicity as f64;
        let spin_ok = self.s_squared.is_none_or(|t| {
            matches!(spin_from_s_squared(t / m, QUANTIZATION_TOL), TotalSpin::Quantized { .. })
        });
        let parity_ok = self.parity.is_none_or(|p| (p - p.round()).abs() <= QUANTIZATION_TOL);
        spin_ok && parity_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    /// Indices into `PointSpectrum::states`.
    pub members: Vec<usize>,
    pub key: LevelKey,
}

/// Low-lying spectrum of one Hamiltonian, merged across the solved sectors.
#[derive(Debug, Clone)]
pub struct PointSpectrum {
    pub model: ModelSpec,
    pub lattice: Lattice,
    pub bases: Vec<SectorBasis>,
    pub solutions: Vec<EigenSolution>,
    /// Complete states only (no unresolved degenerate partner can be
    /// missing), ascending in energy.
    pub states: Vec<StateRecord>,
    /// Absolute degeneracy tolerance.
    pub degeneracy: f64,
}

/// Upper bound of the operator norm, used as the spectral scale.
fn norm_bound(graph: &CouplingGraph) -> f64 {
    let bonds: f64 = graph
        .bonds
        .iter()
        .map(|b| (b.jx.abs() + b.jy.abs() + b.jz.abs()) / 4.0)
        .sum();
    let fields: f64 = graph.fields.iter().map(|f| f.strength.abs() / 2.0).sum();
    (bonds + fields).max(1e-300)
}

fn mirror(from: &SectorBasis, to: &SectorBasis, v: &[f64]) -> Vec<f64> {
    let mask = from.lattice().mask();
    let mut out = vec![0.0; to.dimension()];
    for (k, &c) in to.configs().iter().enumerate() {
        out[k] = v[from.find(!c & mask).expect("mirror sector")];
    }
    out
}

fn solve_sector(op: &SectorOperator, k: usize, cfg: &SolverConfig) -> Result<(EigenSolution, f64)> {
    let dim = op.dimension();
    if dim <= cfg.dense_threshold.min(cfg.dense_cap) {
        let mut full = dense_spectrum(&op.dense(cfg.dense_cap)?)?;
        let cutoff = if k < dim { full.energies[k] } else { f64::INFINITY };
        full.energies.truncate(k);
        full.vectors.truncate(k);
        full.labels.truncate(k);
        full.residuals.truncate(k);
        Ok((full, cutoff))
    } else {
        let apply = |x: &[f64], y: &mut [f64]| op.apply_into(x, y);
        let sol = lanczos_lowest_k(&apply, dim, k, &cfg.lanczos)?;
        let cutoff = if k < dim { sol.energies[k - 1] } else { f64::INFINITY };
        Ok((sol, cutoff))
    }
}

/// Solves every relevant sector of `model` and labels the states.
pub fn solve_point(model: &ModelSpec, lattice: &Lattice, cfg: &SolverConfig) -> Result<PointSpectrum> {
    if cfg.levels == 0 {
        return invalid("at least one level is required");
    }
    let graph = coupling_graph(model, lattice)?;
    let sym = model.symmetries();
    let n = lattice.n_sites() as i32;
    let sectors: Vec<Option<i32>> = if sym.sz_conserved {
        let all: Vec<i32> = (-n..=n).step_by(2).collect();
        match cfg.sectors {
            SectorPolicy::All => all.into_iter().map(Some).collect(),
            SectorPolicy::LowestAbsSz => vec![Some(n % 2)],
        }
    } else {
        vec![None]
    };
    let bases = sectors
        .iter()
        .map(|&s| SectorBasis::enumerate(*lattice, s))
        .collect::<Result<Vec<_>>>()?;
    let scale = norm_bound(&graph);
    let degeneracy = cfg.lanczos.degeneracy_tol * scale;

    let mut solutions: Vec<Option<EigenSolution>> = vec![None; bases.len()];
    let mut cutoffs = vec![f64::INFINITY; bases.len()];
    for (s, basis) in bases.iter().enumerate() {
        let sz = sectors[s];
        // spin inversion maps sector -m onto +m
        if sym.spin_inversion && sz.is_some_and(|m| m < 0) {
            continue;
        }
        let op = SectorOperator::new(&graph, basis)?;
        let k = (cfg.levels + 2).min(basis.dimension());
        let (sol, cutoff) = solve_sector(&op, k, cfg)?;
        solutions[s] = Some(sol);
        cutoffs[s] = cutoff;
    }
    for s in 0..bases.len() {
        if solutions[s].is_none() {
            let m = sectors[s].expect("mirrored sectors have Sz");
            let t = sectors.iter().position(|&x| x == Some(-m)).expect("mirror sector");
            let src = solutions[t].clone().expect("solved");
            let vectors = src.vectors.iter().map(|v| mirror(&bases[t], &bases[s], v)).collect();
            solutions[s] = Some(EigenSolution { vectors, ..src });
            cutoffs[s] = cutoffs[t];
        }
    }
    let mut solutions: Vec<EigenSolution> = solutions.into_iter().map(|s| s.expect("solved")).collect();
    let cutoff = cutoffs.iter().copied().fold(f64::INFINITY, f64::min);

    let mut states = Vec::new();
    for (s, (basis, sol)) in bases.iter().zip(solutions.iter_mut()).enumerate() {
        for (index, (&energy, v)) in sol.energies.iter().zip(&sol.vectors).enumerate() {
            let s2 = s_squared(basis, v);
            let labels = StateLabels {
                sz_twice: basis.sz_twice(),
                total_spin: Some(spin_from_s_squared(s2, QUANTIZATION_TOL)),
                s_squared: Some(s2),
                parity: Some(match basis.sz_twice() {
                    Some(m) => sector_parity(lattice.n_sites(), m),
                    None => parity_from_expectation(parity_expectation(basis, v)),
                }),
            };
            sol.labels[index] = labels;
            if energy < cutoff - degeneracy {
                states.push(StateRecord {
                    energy,
                    sector: s,
                    index,
                    labels,
                    translation: translation_expectation(basis, v),
                    leg_swap: leg_swap_expectation(basis, v),
                });
            }
        }
    }
    states.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.sector.cmp(&b.sector))
            .then(a.index.cmp(&b.index))
    });
    Ok(PointSpectrum {
        model: *model,
        lattice: *lattice,
        bases,
        solutions,
        states,
        degeneracy,
    })
}

fn key_uses_spin(model: &ModelSpec) -> bool {
    matches!(model.family(), Family::J1J2 | Family::Ladder)
}

impl PointSpectrum {
    pub fn state_vector(&self, state: &StateRecord) -> (&SectorBasis, &[f64]) {
        (&self.bases[state.sector], &self.solutions[state.sector].vectors[state.index])
    }

    /// Degenerate clusters of the complete states, ascending.
    pub fn levels(&self) -> Vec<Level> {
        let sym = self.model.symmetries();
        let mut levels: Vec<Level> = Vec::new();
        for (i, st) in self.states.iter().enumerate() {
            match levels.last_mut() {
                Some(l) if st.energy - l.energy <= self.degeneracy => l.members.push(i),
                _ => levels.push(Level {
                    energy: st.energy,
                    members: vec![i],
                    key: LevelKey {
                        multiplicity: 0,
                        sz_twice: vec![],
                        s_squared: None,
                        parity: None,
                        translation: 0.0,
                        leg_swap: None,
                    },
                }),
            }
        }
        for l in &mut levels {
            let members: Vec<&StateRecord> = l.members.iter().map(|&i| &self.states[i]).collect();
            let mut sz: Vec<i32> = members.iter().filter_map(|s| s.labels.sz_twice).collect();
            sz.sort_unstable();
            let sum = |f: &dyn Fn(&StateRecord) -> f64| members.iter().map(|s| f(s)).sum::<f64>();
            l.key = LevelKey {
                multiplicity: members.len(),
                sz_twice: sz,
                s_squared: key_uses_spin(&self.model).then(|| sum(&|s| s.labels.s_squared.unwrap_or(f64::NAN))),
                parity: (!sym.sz_conserved).then(|| {
                    sum(&|s| {
                        let (b, v) = self.state_vector(s);
                        parity_expectation(b, v)
                    })
                }),
                translation: sum(&|s| s.translation),
                leg_swap: members
                    .iter()
                    .map(|s| s.leg_swap)
                    .sum::<Option<f64>>(),
            };
        }
        levels
    }
}

/// Site pair whose entanglement is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSpec {
    /// Nearest neighbours: `(0, 1)` on a chain, the leg pair `(0, 2)` on a ladder.
    Nn,
    Leg,
    Rung,
    Sites(usize, usize),
}

impl PairSpec {
    pub fn resolve(self, lattice: &Lattice) -> Result<(usize, usize)> {
        let n = lattice.n_sites();
        let pair = match (self, lattice.geometry()) {
            (PairSpec::Nn, Geometry::Chain) => (0, 1),
            (PairSpec::Nn | PairSpec::Leg, Geometry::Ladder) => (0, 2),
            (PairSpec::Rung, Geometry::Ladder) => (0, 1),
            (PairSpec::Leg | PairSpec::Rung, Geometry::Chain) => {
                return invalid("leg and rung pairs need a ladder lattice")
            }
            (PairSpec::Sites(i, j), _) => (i, j),
        };
        if pair.0 >= n || pair.1 >= n || pair.0 == pair.1 {
            return invalid(format!("site pair {pair:?} is not valid on {n} sites"));
        }
        Ok(pair)
    }

    pub fn label(self) -> String {
        match self {
            PairSpec::Nn => "nn".into(),
            PairSpec::Leg => "leg".into(),
            PairSpec::Rung => "rung".into(),
            PairSpec::Sites(i, j) => format!("{i}-{j}"),
        }
    }

    pub fn defaults(geometry: Geometry) -> Vec<PairSpec> {
        match geometry {
            Geometry::Chain => vec![PairSpec::Nn],
            Geometry::Ladder => vec![PairSpec::Leg, PairSpec::Rung],
        }
    }
}

impl std::str::FromStr for PairSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(PairSpec::Nn),
            "leg" => Ok(PairSpec::Leg),
            "rung" => Ok(PairSpec::Rung),
            _ => {
                let parsed = s
                    .split_once('-')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                parsed
                    .map(|(i, j)| PairSpec::Sites(i, j))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown pair {s:?}; use nn, leg, rung or i-j")))
            }
        }
    }
}

/// Uniform grid `min, min + step, ..., <= max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Rounds to 12 decimals so that grid points such as `1.0` are hit exactly.
fn snap(x: f64) -> f64 {
    let y = (x * 1e12).round() / 1e12;
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

impl Grid {
    pub fn new(parameter: impl Into<String>, min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return invalid("grid bounds must be finite");
        }
        if step <= 0.0 {
            return invalid(format!("grid step must be positive, got {step}"));
        }
        if max < min {
            return invalid(format!("grid maximum {max} is below the minimum {min}"));
        }
        if (max - min) / step > 1e6 {
            return invalid("grid has more than a million points");
        }
        Ok(Self {
            parameter: parameter.into(),
            min,
            max,
            step,
        })
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| snap(self.min + i as f64 * self.step)).collect()
    }

    pub fn halved(&self) -> Self {
        Self {
            step: self.step / 2.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub cxx: f64,
    pub cyy: f64,
    pub czz: f64,
    pub concurrence_raw: f64,
    pub concurrence: f64,
}

impl PairRecord {
    fn unassigned() -> Self {
        Self {
            cxx: f64::NAN,
            cyy: f64::NAN,
            czz: f64::NAN,
            concurrence_raw: f64::NAN,
            concurrence: f64::NAN,
        }
    }
}

/// Compact description of a level, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub energy: f64,
    pub key: LevelKey,
    pub total_spin: Option<f64>,
    pub parity: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub g: f64,
    pub energies: Vec<f64>,
    pub labels: Vec<StateLabels>,
    pub pairs: Vec<PairRecord>,
    /// `None` for a clean record; otherwise why values are missing.
    pub flag: Option<String>,
    #[serde(skip)]
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub model: ModelSpec,
    pub lattice: Lattice,
    pub grid: Grid,
    pub pairs: Vec<PairSpec>,
    pub solver: SolverConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn grid_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.g).collect()
    }

    /// Clamped (or raw) concurrence of pair `pair` at every point.
    pub fn concurrence(&self, pair: usize, raw: bool) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let r = &p.pairs[pair];
                if raw {
                    r.concurrence_raw
                } else {
                    r.concurrence
                }
            })
            .collect()
    }

    pub fn flagged(&self) -> usize {
        self.points.iter().filter(|p| p.flag.is_some()).count()
    }
}

fn summarize(spec: &PointSpectrum, level: &Level) -> LevelSummary {
    let first = &spec.states[level.members[0]];
    LevelSummary {
        energy: level.energy,
        key: level.key.clone(),
        total_spin: first.labels.total_spin.and_then(|s| s.value()),
        parity: first.labels.parity.and_then(|p| p.sign()),
    }
}

/// Index (into `states`) of the state used for ground-state observables, or a
/// reason why none is assigned.
fn ground_state(spec: &PointSpectrum, levels: &[Level]) -> std::result::Result<usize, String> {
    let first = levels.first().ok_or_else(|| "no_complete_level".to_string())?;
    match first.members.as_slice() {
        [one] => Ok(*one),
        [a, b] => {
            let (sa, sb) = (spec.states[*a].labels.sz_twice, spec.states[*b].labels.sz_twice);
            match (sa, sb) {
                (Some(x), Some(y)) if x == -y && x != 0 => Ok(if x > 0 { *a } else { *b }),
                _ => Err("degenerate_ground".into()),
            }
        }
        _ => Err("degenerate_ground".into()),
    }
}

fn pair_record(basis: &SectorBasis, v: &[f64], pair: (usize, usize)) -> Result<PairRecord> {
    let rdm = two_site_rdm(basis, v, pair.0, pair.1)?;
    let c = wootters_concurrence(&rdm)?;
    Ok(PairRecord {
        cxx: rdm.correlator(SpinAxis::X),
        cyy: rdm.correlator(SpinAxis::Y),
        czz: rdm.correlator(SpinAxis::Z),
        concurrence_raw: c.raw,
        concurrence: c.value,
    })
}

fn flagged_point(g: f64, levels: usize, pairs: usize, flag: String) -> SweepPoint {
    SweepPoint {
        g,
        energies: vec![f64::NAN; levels],
        labels: vec![StateLabels::default(); levels],
        pairs: vec![PairRecord::unassigned(); pairs],
        flag: Some(flag),
        levels: vec![],
    }
}

fn sweep_point(model: &ModelSpec, lattice: &Lattice, cfg: &SolverConfig, pairs: &[(usize, usize)], g: f64) -> SweepPoint {
    let empty = |flag: String| flagged_point(g, cfg.levels, pairs.len(), flag);
    let spec = match solve_point(model, lattice, cfg) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("solve failed at g = {g}: {e}");
            return empty(format!("solver_error: {e}"));
        }
    };
    let levels = spec.levels();
    let mut flag = None;
    let mut energies: Vec<f64> = spec.states.iter().take(cfg.levels).map(|s| s.energy).collect();
    let mut labels: Vec<StateLabels> = spec.states.iter().take(cfg.levels).map(|s| s.labels).collect();
    if energies.len() < cfg.levels {
        flag = Some("incomplete_levels".to_string());
        energies.resize(cfg.levels, f64::NAN);
        labels.resize(cfg.levels, StateLabels::default());
    }
    let records = match ground_state(&spec, &levels) {
        Ok(i) => {
            let (basis, v) = spec.state_vector(&spec.states[i]);
            pairs
                .iter()
                .map(|&p| pair_record(basis, v, p))
                .collect::<Result<Vec<_>>>()
                .unwrap_or_else(|e| {
                    flag = Some(format!("observable_error: {e}"));
                    vec![PairRecord::unassigned(); pairs.len()]
                })
        }
        Err(reason) => {
            flag = Some(reason);
            vec![PairRecord::unassigned(); pairs.len()]
        }
    };
    SweepPoint {
        g,
        energies,
        labels,
        pairs: records,
        flag,
        levels: levels.iter().map(|l| summarize(&spec, l)).collect(),
    }
}

/// Solves every grid point (in parallel on the current rayon pool) and
/// records energies, labels, correlators and concurrences in grid order.
pub fn sweep(model: &ModelSpec, grid: &Grid, lattice: &Lattice, solver: &SolverConfig, pairs: &[PairSpec]) -> Result<SweepResult> {
    model.with_parameter(&grid.parameter, grid.min)?.validate()?;
    model.check_lattice(lattice)?;
    if solver.levels == 0 {
        return invalid("at least one level is required");
    }
    let resolved = pairs.iter().map(|p| p.resolve(lattice)).collect::<Result<Vec<_>>>()?;
    let values = grid.points();
    let points: Vec<SweepPoint> = values
        .par_iter()
        .map(|&g| match model.with_parameter(&grid.parameter, g) {
            Ok(m) => sweep_point(&m, lattice, solver, &resolved, g),
            Err(e) => flagged_point(g, solver.levels, resolved.len(), format!("invalid_parameter: {e}")),
        })
        .collect();
    let flagged = points.iter().filter(|p| p.flag.is_some()).count();
    if flagged > 0 {
        log::warn!("{flagged} of {} sweep points are flagged", points.len());
    }
    Ok(SweepResult {
        model: *model,
        lattice: *lattice,
        grid: grid.clone(),
        pairs: pairs.to_vec(),
        solver: *solver,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    TrueCrossing,
    Avoided,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub level_pair: (usize, usize),
    pub location: f64,
    /// Grid interval in which the gap changed sign.
    pub bracket: (f64, f64),
    /// Final bisection bracket.
    pub refined_bracket: (f64, f64),
    /// `|E_a - E_b|` at `location`.
    pub gap: f64,
    pub labels_below: [LevelSummary; 2],
    pub labels_above: [LevelSummary; 2],
    pub kind: CrossingKind,
}

/// A level identified by its symmetry key and its rank among the levels that
/// share that key. Levels of equal symmetry do not cross, so the rank is stable.
#[derive(Debug, Clone)]
struct Tracked {
    key: LevelKey,
    rank: usize,
}

impl Tracked {
    fn at(levels: &[LevelSummary], position: usize) -> Self {
        let key = levels[position].key.clone();
        let rank = levels[..position].iter().filter(|l| l.key.matches(&key)).count();
        Self { key, rank }
    }

    fn find<'a>(&self, levels: &'a [LevelSummary]) -> Option<&'a LevelSummary> {
        levels.iter().filter(|l| l.key.matches(&self.key)).nth(self.rank)
    }
}

struct Refiner<'a> {
    sweep: &'a SweepResult,
}

impl Refiner<'_> {
    fn levels_at(&self, g: f64) -> Result<Vec<LevelSummary>> {
        let model = self.sweep.model.with_parameter(&self.sweep.grid.parameter, g)?;
        let cfg = SolverConfig {
            sectors: SectorPolicy::All,
            ..self.sweep.solver
        };
        let spec = solve_point(&model, &self.sweep.lattice, &cfg)?;
        Ok(spec.levels().iter().map(|l| summarize(&spec, l)).collect())
    }

    /// `E_x - E_y` at `g`, or `None` when either level is absent (merged).
    fn gap(&self, g: f64, x: &Tracked, y: &Tracked) -> Result<Option<f64>> {
        let levels = self.levels_at(g)?;
        Ok(match (x.find(&levels), y.find(&levels)) {
            (Some(a), Some(b)) => Some(a.energy - b.energy),
            _ => None,
        })
    }
}

/// Every sign change of `E_a - E_b` between adjacent grid points, following
/// the two levels by their symmetry keys, refined by bisection with fresh solves.
pub fn detect_crossings(sweep: &SweepResult, a: usize, b: usize) -> Result<Vec<CrossingEvent>> {
    if a == b {
        return invalid("a crossing needs two distinct levels");
    }
    let pts = &sweep.points;
    let refiner = Refiner { sweep };
    let mut events = Vec::new();
    for i in 0..pts.len().saturating_sub(1) {
        let here = &pts[i].levels;
        if here.len() <= a.max(b) {
            continue;
        }
        let (x, y) = (&here[a], &here[b]);
        let (tx, ty) = (Tracked::at(here, a), Tracked::at(here, b));
        let d0 = x.energy - y.energy;
        // next point where both levels are present and distinct
        let Some((j, x1, y1)) = (i + 1..pts.len())
            .take(3)
            .find_map(|j| Some((j, tx.find(&pts[j].levels)?, ty.find(&pts[j].levels)?)))
        else {
            continue;
        };
        let d1 = x1.energy - y1.energy;
        if d0.signum() == d1.signum() || d0 == 0.0 || d1 == 0.0 {
            continue;
        }
        // a crossing inside (g_i, g_j) is found once, from its left neighbour
        if j > i + 1 && events.iter().any(|e: &CrossingEvent| e.bracket.1 == pts[j].g) {
            continue;
        }
        let (mut lo, mut hi) = (pts[i].g, pts[j].g);
        let (mut flo, mut fhi) = (d0, d1);
        let mut location = None;
        while hi - lo > REFINE_WIDTH {
            let mid = 0.5 * (lo + hi);
            match refiner.gap(mid, &tx, &ty)? {
                None => {
                    location = Some(mid);
                    break;
                }
                Some(0.0) => {
                    location = Some(mid);
                    break;
                }
                Some(f) if f.signum() == flo.signum() => {
                    lo = mid;
                    flo = f;
                }
                Some(f) => {
                    hi = mid;
                    fhi = f;
                }
            }
        }
        let location = location.unwrap_or_else(|| lo - flo * (hi - lo) / (fhi - flo));
        let gap = refiner.gap(location, &tx, &ty)?.map_or(0.0, f64::abs);
        let kind = if !(x.key.resolved() && y.key.resolved() && x1.key.resolved() && y1.key.resolved()) {
            log::warn!("crossing near {location} involves a level with mixed labels");
            CrossingKind::Unresolved
        } else if gap <= CROSSING_GAP {
            CrossingKind::TrueCrossing
        } else {
            CrossingKind::Avoided
        };
        events.push(CrossingEvent {
            level_pair: (a, b),
            location,
            bracket: (pts[i].g, pts[j].g),
            refined_bracket: (lo, hi),
            gap,
            labels_below: [x.clone(), y.clone()],
            labels_above: [x1.clone(), y1.clone()],
            kind,
        });
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return invalid("a series needs at least two points");
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return invalid("grid must be strictly increasing");
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-8 * h.abs().max(1e-300) {
            return invalid("grid is not uniform");
        }
    }
    Ok(h)
}

/// Iterated three-point central differences; each order drops one point per side.
/// Order 0 returns the series unchanged.
pub fn derivative(grid: &[f64], values: &[f64], order: usize) -> Result<Series> {
    if grid.len() != values.len() {
        return invalid("grid and values differ in length");
    }
    if order > 4 {
        return invalid(format!("derivative order {order} above 4"));
    }
    if grid.len() <= 2 * order {
        return invalid(format!("{} points are too few for order {order}", grid.len()));
    }
    let h = uniform_step(grid)?;
    let mut g = grid.to_vec();
    let mut v = values.to_vec();
    for _ in 0..order {
        v = v.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect();
        g = g[1..g.len() - 1].to_vec();
    }
    Ok(Series { grid: g, values: v })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub location: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Strict interior extrema, refined by the vertex of the parabola through the
/// three neighbouring points.
pub fn locate_extrema(grid: &[f64], values: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
        let kind = if y1 > y0 && y1 > y2 {
            ExtremumKind::Max
        } else if y1 < y0 && y1 < y2 {
            ExtremumKind::Min
        } else {
            continue;
        };
        let h = grid[i + 1] - grid[i];
        let curv = y0 - 2.0 * y1 + y2;
        let off = 0.5 * (y0 - y2) / curv;
        out.push(Extremum {
            location: grid[i] + off * h,
            value: y1 - 0.25 * (y0 - y2) * off,
            kind,
        });
    }
    out
}

/// Maximal runs of finite values not interrupted by a ground-level change.
fn smooth_segments(sweep: &SweepResult, values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let pts = &sweep.points;
    let mut segments = Vec::new();
    let mut start = None;
    for i in 0..values.len() {
        let ok = values[i].is_finite();
        let breaks = i > 0 && {
            let (p, q) = (&pts[i - 1].levels, &pts[i].levels);
            match (p.first(), q.first()) {
                (Some(a), Some(b)) => !a.key.matches(&b.key),
                _ => true,
            }
        };
        if breaks || !ok {
            if let Some(s) = start.take() {
                segments.push(s..i);
            }
        }
        if ok && start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        segments.push(s..values.len());
    }
    segments
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeExtrema {
    pub order: usize,
    pub extrema: Vec<Extremum>,
}

/// Extrema of the `order`-th derivative of `values`, taken separately on each
/// smooth segment of the sweep.
pub fn segment_extrema(sweep: &SweepResult, values: &[f64], order: usize) -> Result<Vec<Extremum>> {
    let grid = sweep.grid_values();
    let mut out = Vec::new();
    for seg in smooth_segments(sweep, values) {
        if seg.len() <= 2 * order + 2 {
            continue;
        }
        let d = derivative(&grid[seg.clone()], &values[seg], order)?;
        out.extend(locate_extrema(&d.grid, &d.values));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionType {
    I,
    II,
    III,
    #[serde(rename = "none")]
    None,
}

impl TransitionType {
    pub fn name(self) -> &'static str {
        match self {
            TransitionType::I => "I",
            TransitionType::II => "II",
            TransitionType::III => "III",
            TransitionType::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "evidence", rename_all = "snake_case")]
pub enum Evidence {
    Crossing(CrossingEvent),
    ConcurrenceJump {
        location: f64,
        left: f64,
        right: f64,
        jump: f64,
        jump_tol: f64,
    },
    ConcurrenceMaximum {
        location: f64,
        value: f64,
    },
    DerivativeExtremum {
        order: usize,
        location: f64,
        value: f64,
        kind: ExtremumKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyOptions {
    /// Concurrence jump that counts as a discontinuity; `None` means ten
    /// times the median adjacent-point change.
    pub jump_tol: Option<f64>,
    pub max_derivative_order: usize,
    /// Which configured pair to analyse.
    pub pair: usize,
    /// Differentiate the unclamped concurrence.
    pub raw: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            jump_tol: None,
            max_derivative_order: 4,
            pair: 0,
            raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionReport {
    #[serde(rename = "type")]
    pub transition_type: TransitionType,
    pub location: Option<f64>,
    pub ground_state_crossing: bool,
    pub excited_state_crossing: bool,
    pub concurrence_behavior: String,
    pub derivative_order: Option<usize>,
    pub jump_tol: f64,
    pub evidence: Vec<Evidence>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn argmax(grid: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    grid.iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(f64, f64)>, (&g, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((g, v)),
        })
}

/// Applies the three-type decision procedure to a sweep.
pub fn classify(sweep: &SweepResult, opts: &ClassifyOptions) -> Result<TransitionReport> {
    if sweep.solver.levels < 3 {
        return invalid("classification needs at least three levels per point");
    }
    if opts.pair >= sweep.pairs.len() {
        return invalid("classification pair index out of range");
    }
    let grid = sweep.grid_values();
    let c = sweep.concurrence(opts.pair, opts.raw);
    let adjacent: Vec<f64> = c
        .windows(2)
        .filter(|w| w[0].is_finite() && w[1].is_finite())
        .map(|w| (w[1] - w[0]).abs())
        .collect();
    let jump_tol = opts.jump_tol.unwrap_or_else(|| 10.0 * median(adjacent));
    let step = sweep.grid.step;

    let gs: Vec<CrossingEvent> = detect_crossings(sweep, 0, 1)?
        .into_iter()
        .filter(|e| e.kind == CrossingKind::TrueCrossing)
        .collect();
    let es: Vec<CrossingEvent> = detect_crossings(sweep, 1, 2)?
        .into_iter()
        .filter(|e| e.kind == CrossingKind::TrueCrossing)
        .collect();
    let mut evidence: Vec<Evidence> = gs.iter().chain(&es).cloned().map(Evidence::Crossing).collect();
    let mut report = TransitionReport {
        transition_type: TransitionType::None,
        location: None,
        ground_state_crossing: !gs.is_empty(),
        excited_state_crossing: !es.is_empty(),
        concurrence_behavior: "smooth".into(),
        derivative_order: None,
        jump_tol,
        evidence: vec![],
    };

    for e in &gs {
        // nearest finite values on either side of the crossing
        let left = (0..grid.len()).rev().find(|&i| grid[i] < e.location && c[i].is_finite());
        let right = (0..grid.len()).find(|&i| grid[i] > e.location && c[i].is_finite());
        if let (Some(l), Some(r)) = (left, right) {
            let jump = (c[r] - c[l]).abs();
            evidence.push(Evidence::ConcurrenceJump {
                location: e.location,
                left: c[l],
                right: c[r],
                jump,
                jump_tol,
            });
            if jump > jump_tol && report.transition_type == TransitionType::None {
                report.transition_type = TransitionType::I;
                report.location = Some(e.location);
                report.concurrence_behavior = "discontinuous".into();
            }
        }
    }

    let peak = argmax(&grid, &c);
    if let Some((location, value)) = peak {
        evidence.push(Evidence::ConcurrenceMaximum { location, value });
    }
    if report.transition_type == TransitionType::None && gs.is_empty() {
        if let Some((at, _)) = peak {
            if let Some(e) = es.iter().find(|e| (e.location - at).abs() <= 2.0 * step + 1e-12) {
                report.transition_type = TransitionType::II;
                report.location = Some(e.location);
                report.concurrence_behavior = "maximum".into();
            }
        }
    }

    for order in 1..=opts.max_derivative_order {
        let ext = segment_extrema(sweep, &c, order)?;
        for x in &ext {
            evidence.push(Evidence::DerivativeExtremum {
                order,
                location: x.location,
                value: x.value,
                kind: x.kind,
            });
        }
        // excited-state crossings away from the concurrence maximum do not rule out type III
        if report.transition_type == TransitionType::None && gs.is_empty() {
            // the deepest extremum of the lowest order that has one
            if let Some(x) = ext.iter().max_by(|a, b| a.value.abs().total_cmp(&b.value.abs())) {
                report.transition_type = TransitionType::III;
                report.location = Some(x.location);
                report.derivative_order = Some(order);
                report.concurrence_behavior = format!("extremum in derivative of order {order}");
            }
        }
    }
    report.evidence = evidence;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Least-squares fit `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Some(LinearFit {
        intercept,
        slope,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeExtremum {
    pub n_sites: usize,
    pub location: Option<f64>,
    pub value: Option<f64>,
    /// Every extremum of the requested kind found for this size.
    pub candidates: Vec<Extremum>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub derivative_order: usize,
    pub kind: ExtremumKind,
    pub per_size: Vec<SizeExtremum>,
    /// `location = intercept + slope / N`
    pub fit: Option<LinearFit>,
}

impl ScalingResult {
    pub fn locations(&self) -> Vec<f64> {
        self.per_size.iter().filter_map(|s| s.location).collect()
    }

    pub fn is_monotone(&self) -> bool {
        let l = self.locations();
        l.windows(2).all(|w| w[1] > w[0]) || l.windows(2).all(|w| w[1] < w[0])
    }
}

/// Dominant extremum of the `order`-th derivative for each size, then the 1/N fit.
/// `series` holds `(N, grid, values)`; every size is split at non-finite values.
pub fn scaling_from_series(series: &[(usize, Vec<f64>, Vec<f64>)], order: usize, kind: ExtremumKind) -> Result<ScalingResult> {
    let mut per_size = Vec::new();
    for (n, grid, values) in series {
        let mut candidates = Vec::new();
        let mut start = 0;
        for end in 0..=values.len() {
            if end == values.len() || !values[end].is_finite() {
                if end - start > 2 * order + 2 {
                    let d = derivative(&grid[start..end], &values[start..end], order)?;
                    candidates.extend(locate_extrema(&d.grid, &d.values).into_iter().filter(|x| x.kind == kind));
                }
                start = end + 1;
            }
        }
        per_size.push(size_extremum(*n, candidates, kind));
    }
    Ok(finish_scaling(per_size, order, kind))
}

fn size_extremum(n_sites: usize, candidates: Vec<Extremum>, kind: ExtremumKind) -> SizeExtremum {
    let best = candidates.iter().copied().reduce(|a, b| match kind {
        ExtremumKind::Min if b.value < a.value => b,
        ExtremumKind::Max if b.value > a.value => b,
        _ => a,
    });
    SizeExtremum {
        n_sites,
        location: best.map(|b| b.location),
        value: best.map(|b| b.value),
        flag: best.is_none().then(|| "no_extremum".to_string()),
        candidates,
    }
}

fn finish_scaling(per_size: Vec<SizeExtremum>, order: usize, kind: ExtremumKind) -> ScalingResult {
    let (x, y): (Vec<f64>, Vec<f64>) = per_size
        .iter()
        .filter_map(|s| s.location.map(|l| (1.0 / s.n_sites as f64, l)))
        .unzip();
    ScalingResult {
        derivative_order: order,
        kind,
        fit: linear_fit(&x, &y),
        per_size,
    }
}

/// Sweeps each size (ground states only), differentiates the concurrence of
/// the first pair on smooth segments and tracks the dominant extremum.
pub fn scaling_study(
    model: &ModelSpec,
    grid: &Grid,
    sizes: &[usize],
    pair: PairSpec,
    order: usize,
    kind: ExtremumKind,
    solver: &SolverConfig,
) -> Result<ScalingResult> {
    if sizes.is_empty() {
        return invalid("scaling needs at least one size");
    }
    let geometry = model.family().geometry();
    let mut per_size = Vec::new();
    for &n in sizes {
        let lattice = Lattice::new(geometry, n)?;
        let cfg = SolverConfig {
            levels: solver.levels.max(2),
            sectors: SectorPolicy::LowestAbsSz,
            ..*solver
        };
        let result = sweep(model, grid, &lattice, &cfg, &[pair])?;
        let c = result.concurrence(0, false);
        let ext: Vec<Extremum> = segment_extrema(&result, &c, order)?
            .into_iter()
            .filter(|x| x.kind == kind)
            .collect();
        per_size.push(size_extremum(n, ext, kind));
    }
    Ok(finish_scaling(per_size, order, kind))
}
