//! Reduced density matrices, correlators, quantum-number labels, collective
//! spin operators and the sum-rule identity.
//!
//! The `s^y` collective operators are purely imaginary in the `s^z` basis.
//! They are represented by the real vector `w` with `A psi = i w`; every
//! quantity computed here (norms, overlaps, commutator expectations) is
//! invariant under that common phase.

use serde::{Deserialize, Serialize};

use crate::eigensolver::{dense_spectrum, EigenSolution, Parity, TotalSpin};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Geometry, Lattice, SectorBasis};
use crate::models::{coupling_graph, dot, ModelSpec, SectorOperator};

pub const QUANTIZATION_TOL: f64 = 1e-6;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];
}

/// Momentum of a collective operator: `q = 0` (uniform) or `q = pi` (staggered).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Momentum {
    Zero,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    StaggeredX,
    StaggeredY,
    StaggeredZ,
    UniformX,
    UniformY,
    UniformZ,
}

impl OperatorTag {
    pub const ALL: [OperatorTag; 6] = [
        OperatorTag::StaggeredX,
        OperatorTag::StaggeredY,
        OperatorTag::StaggeredZ,
        OperatorTag::UniformX,
        OperatorTag::UniformY,
        OperatorTag::UniformZ,
    ];

    pub fn new(axis: SpinAxis, momentum: Momentum) -> Self {
        match (momentum, axis) {
            (Momentum::Pi, SpinAxis::X) => OperatorTag::StaggeredX,
            (Momentum::Pi, SpinAxis::Y) => OperatorTag::StaggeredY,
            (Momentum::Pi, SpinAxis::Z) => OperatorTag::StaggeredZ,
            (Momentum::Zero, SpinAxis::X) => OperatorTag::UniformX,
            (Momentum::Zero, SpinAxis::Y) => OperatorTag::UniformY,
            (Momentum::Zero, SpinAxis::Z) => OperatorTag::UniformZ,
        }
    }

    pub fn axis(self) -> SpinAxis {
        match self {
            OperatorTag::StaggeredX | OperatorTag::UniformX => SpinAxis::X,
            OperatorTag::StaggeredY | OperatorTag::UniformY => SpinAxis::Y,
            OperatorTag::StaggeredZ | OperatorTag::UniformZ => SpinAxis::Z,
        }
    }

    pub fn momentum(self) -> Momentum {
        match self {
            OperatorTag::StaggeredX | OperatorTag::StaggeredY | OperatorTag::StaggeredZ => Momentum::Pi,
            _ => Momentum::Zero,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorTag::StaggeredX => "staggered_x",
            OperatorTag::StaggeredY => "staggered_y",
            OperatorTag::StaggeredZ => "staggered_z",
            OperatorTag::UniformX => "uniform_x",
            OperatorTag::UniformY => "uniform_y",
            OperatorTag::UniformZ => "uniform_z",
        }
    }
}

impl std::str::FromStr for OperatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown operator {s:?}")))
    }
}

/// Two-site reduced density matrix over `(uu, ud, du, dd)`, first site first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSiteRdm {
    pub entries: [[f64; 4]; 4],
}

impl TwoSiteRdm {
    pub fn trace(&self) -> f64 {
        (0..4).map(|a| self.entries[a][a]).sum()
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let m = nalgebra::Matrix4::from_fn(|a, b| self.entries[a][b]);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Unit trace, exact symmetry and positivity within the given tolerances.
    pub fn validate(&self, trace_tol: f64, psd_tol: f64) -> Result<()> {
        if (self.trace() - 1.0).abs() > trace_tol {
            return invalid(format!("density matrix trace is {}", self.trace()));
        }
        for a in 0..4 {
            for b in 0..a {
                if self.entries[a][b] != self.entries[b][a] {
                    return invalid("density matrix is not symmetric");
                }
            }
        }
        let min = self.min_eigenvalue();
        if min < -psd_tol {
            return invalid(format!("density matrix has eigenvalue {min}"));
        }
        Ok(())
    }

    /// `<s^a_i s^a_j>` for the pair.
    pub fn correlator(&self, axis: SpinAxis) -> f64 {
        let r = &self.entries;
        match axis {
            SpinAxis::Z => (r[0][0] - r[1][1] - r[2][2] + r[3][3]) / 4.0,
            SpinAxis::X => (r[0][3] + r[1][2] + r[2][1] + r[3][0]) / 4.0,
            SpinAxis::Y => (-r[0][3] + r[1][2] + r[2][1] - r[3][0]) / 4.0,
        }
    }
}

fn check_state(basis: &SectorBasis, state: &[f64]) -> Result<()> {
    if state.len() != basis.dimension() {
        return invalid(format!(
            "state has {} amplitudes, basis has dimension {}",
            state.len(),
            basis.dimension()
        ));
    }
    let norm = dot(state, state);
    if (norm - 1.0).abs() > NORM_TOL {
        return invalid(format!("state is not normalized (norm^2 = {norm})"));
    }
    Ok(())
}

fn check_sites(basis: &SectorBasis, i: usize, j: usize) -> Result<()> {
    let n = basis.lattice().n_sites();
    if i >= n || j >= n {
        return invalid(format!("site pair ({i}, {j}) outside a lattice of {n} sites"));
    }
    if i == j {
        return invalid("a site pair needs two distinct sites");
    }
    Ok(())
}

/// Partial trace of `|psi><psi|` onto sites `i` and `j`.
pub fn two_site_rdm(basis: &SectorBasis, state: &[f64], i: usize, j: usize) -> Result<TwoSiteRdm> {
    check_state(basis, state)?;
    check_sites(basis, i, j)?;
    let (mi, mj) = (1u64 << i, 1u64 << j);
    // index in (uu, ud, du, dd): up is 0
    let local = |c: u64| (((c & mi) == 0) as usize) * 2 + ((c & mj) == 0) as usize;
    let with_local = |rest: u64, idx: usize| {
        let mut c = rest;
        if idx & 2 == 0 {
            c |= mi;
        }
        if idx & 1 == 0 {
            c |= mj;
        }
        c
    };
    let mut rho = [[0.0; 4]; 4];
    for (&c, &a) in basis.configs().iter().zip(state) {
        if a == 0.0 {
            continue;
        }
        let row = local(c);
        let rest = c & !(mi | mj);
        for col in 0..4 {
            if let Some(k) = basis.find(with_local(rest, col)) {
                rho[row][col] += a * state[k];
            }
        }
    }
    // symmetric by construction up to summation order
    for a in 0..4 {
        for b in 0..a {
            let s = 0.5 * (rho[a][b] + rho[b][a]);
            rho[a][b] = s;
            rho[b][a] = s;
        }
    }
    Ok(TwoSiteRdm { entries: rho })
}

pub fn correlator(basis: &SectorBasis, state: &[f64], axis: SpinAxis, i: usize, j: usize) -> Result<f64> {
    Ok(two_site_rdm(basis, state, i, j)?.correlator(axis))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinLabel {
    pub total_spin: TotalSpin,
    pub s_squared: f64,
}

/// `<psi| S^2 |psi>` with `S` the total spin.
pub fn s_squared(basis: &SectorBasis, state: &[f64]) -> f64 {
    let n = basis.lattice().n_sites();
    let mut total = 0.75 * n as f64;
    for (&c, &a) in basis.configs().iter().zip(state) {
        if a == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in i + 1..n {
                let (bi, bj) = (c >> i & 1, c >> j & 1);
                if bi == bj {
                    total += 2.0 * 0.25 * a * a;
                } else {
                    total -= 2.0 * 0.25 * a * a;
                    if let Some(k) = basis.find(c ^ (1 << i | 1 << j)) {
                        total += 2.0 * 0.5 * a * state[k];
                    }
                }
            }
        }
    }
    total
}

/// Total-spin label; `Mixed` when `S(S+1)` is not quantized within `tol`.
pub fn spin_from_s_squared(s2: f64, tol: f64) -> TotalSpin {
    let s = 0.5 * (-1.0 + (1.0 + 4.0 * s2.max(0.0)).sqrt());
    let twice = (2.0 * s).round();
    let sq = twice / 2.0;
    if (sq * (sq + 1.0) - s2).abs() <= tol {
        TotalSpin::Quantized {
            twice_s: twice as u32,
        }
    } else {
        TotalSpin::Mixed
    }
}

pub fn total_spin(basis: &SectorBasis, state: &[f64]) -> Result<SpinLabel> {
    check_state(basis, state)?;
    let s2 = s_squared(basis, state);
    Ok(SpinLabel {
        total_spin: spin_from_s_squared(s2, QUANTIZATION_TOL),
        s_squared: s2,
    })
}

/// `<prod_i 2 s^z_i>` over the full basis.
pub fn parity_expectation(basis: &SectorBasis, state: &[f64]) -> f64 {
    let n = basis.lattice().n_sites() as u32;
    basis
        .configs()
        .iter()
        .zip(state)
        .map(|(&c, &a)| if (n - c.count_ones()).is_multiple_of(2) { a * a } else { -a * a })
        .sum()
}

pub fn parity_from_expectation(p: f64) -> Parity {
    if p > 1.0 - QUANTIZATION_TOL {
        Parity::Even
    } else if p < -(1.0 - QUANTIZATION_TOL) {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

/// Eigenvalue of `prod_i 2 s^z_i` for a state given in the full basis.
pub fn parity(basis: &SectorBasis, state: &[f64]) -> Result<Parity> {
    if !basis.is_full() {
        return invalid("parity labels need a state in the full basis");
    }
    check_state(basis, state)?;
    Ok(parity_from_expectation(parity_expectation(basis, state)))
}

/// Parity shared by every configuration of a fixed-`S^z` sector.
pub fn sector_parity(n_sites: usize, sz_twice: i32) -> Parity {
    let n_down = (n_sites as i32 - sz_twice) / 2;
    if n_down % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// `<psi| T |psi>` for the translation by one unit cell.
pub fn translation_expectation(basis: &SectorBasis, state: &[f64]) -> f64 {
    let lattice = basis.lattice();
    basis
        .configs()
        .iter()
        .zip(state)
        .map(|(&c, &a)| basis.find(lattice.translate(c)).map_or(0.0, |k| a * state[k]))
        .sum()
}

/// `<psi| X |psi>` for the leg exchange of a ladder; `None` on chains.
pub fn leg_swap_expectation(basis: &SectorBasis, state: &[f64]) -> Option<f64> {
    let lattice = basis.lattice();
    lattice.swap_legs(0)?;
    Some(
        basis
            .configs()
            .iter()
            .zip(state)
            .map(|(&c, &a)| {
                let img = lattice.swap_legs(c).expect("ladder");
                basis.find(img).map_or(0.0, |k| a * state[k])
            })
            .sum(),
    )
}

/// Phase of site `j` in a momentum-`pi` operator. On ladders this is the
/// antiferromagnetic pattern `(-1)^(rung + leg)`.
pub fn staggered_sign(lattice: &Lattice, site: usize) -> f64 {
    let parity = match lattice.geometry() {
        Geometry::Chain => site,
        Geometry::Ladder => site / 2 + site % 2,
    };
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `A psi` for `A = sum_j phase_j s^axis_j`, returned in the full basis.
/// For the `y` axis the returned real vector `w` satisfies `A psi = i w`.
pub fn collective_apply(basis: &SectorBasis, state: &[f64], axis: SpinAxis, momentum: Momentum) -> Vec<f64> {
    let lattice = basis.lattice();
    let n = lattice.n_sites();
    let phases: Vec<f64> = (0..n)
        .map(|j| match momentum {
            Momentum::Zero => 1.0,
            Momentum::Pi => staggered_sign(lattice, j),
        })
        .collect();
    let mut out = vec![0.0; lattice.full_dimension()];
    for (&c, &a) in basis.configs().iter().zip(state) {
        if a == 0.0 {
            continue;
        }
        for (j, &ph) in phases.iter().enumerate() {
            let up = c >> j & 1 == 1;
            match axis {
                SpinAxis::Z => out[c as usize] += ph * if up { 0.5 } else { -0.5 } * a,
                SpinAxis::X => out[(c ^ 1 << j) as usize] += ph * 0.5 * a,
                // s^y |up> = (i/2)|down>, s^y |down> = (-i/2)|up>
                SpinAxis::Y => out[(c ^ 1 << j) as usize] += ph * if up { 0.5 } else { -0.5 } * a,
            }
        }
    }
    out
}

/// `(1/N) |A psi|^2`.
pub fn structure_factor(basis: &SectorBasis, state: &[f64], axis: SpinAxis, momentum: Momentum) -> f64 {
    let v = collective_apply(basis, state, axis, momentum);
    dot(&v, &v) / basis.lattice().n_sites() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionWeights {
    pub operator: OperatorTag,
    /// `(E_n - E_0, |<n|A|0>|^2)` for every eigenstate.
    pub rows: Vec<(f64, f64)>,
}

impl TransitionWeights {
    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.1).sum()
    }

    /// `2 sum_n (E_n - E_0) |<n|A|0>|^2`
    pub fn commutator_sum(&self) -> f64 {
        2.0 * self.rows.iter().map(|(de, w)| de * w).sum::<f64>()
    }
}

/// Weights of `A|ground>` on every eigenstate of `solution`, which must be the
/// complete spectrum of the full basis `basis`.
pub fn transition_weights(
    basis: &SectorBasis,
    ground: &[f64],
    ground_energy: f64,
    solution: &EigenSolution,
    operator: OperatorTag,
) -> Result<TransitionWeights> {
    if !basis.is_full() {
        return invalid("transition weights need the full basis");
    }
    if solution.len() != basis.dimension() || solution.dimension() != basis.dimension() {
        return invalid(format!(
            "spectrum has {} of {} states",
            solution.len(),
            basis.dimension()
        ));
    }
    let a0 = collective_apply(basis, ground, operator.axis(), operator.momentum());
    let rows = solution
        .energies
        .iter()
        .zip(&solution.vectors)
        .map(|(e, v)| (e - ground_energy, dot(v, &a0).powi(2)))
        .collect();
    Ok(TransitionWeights { operator, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRuleRow {
    pub operator: OperatorTag,
    /// `<0|[A,[H,A]]|0>` from operator applications.
    pub lhs: f64,
    /// `2 sum_n (E_n - E_0) |<n|A|0>|^2`
    pub rhs: f64,
    pub residual: f64,
    /// `|A|0>|^2 - sum_n weights`
    pub completeness: f64,
}

/// The identity rearranged into correlators on one side and the ground
/// energy plus excitation weights on the other.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatorSumRule {
    pub form: String,
    pub coupling: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRuleTable {
    pub ground_energy: f64,
    pub rows: Vec<SumRuleRow>,
    pub correlator_form: Option<CorrelatorSumRule>,
}

impl SumRuleTable {
    pub fn max_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual)
            .chain(self.correlator_form.as_ref().map(|c| c.residual))
            .fold(0.0, f64::max)
    }
}

/// Collective operators natural to a model: staggered for antiferromagnets,
/// uniform for the ferromagnetic Ising chain.
pub fn natural_operators(model: &ModelSpec) -> [OperatorTag; 3] {
    match model {
        ModelSpec::TransverseIsing { .. } => [OperatorTag::UniformX, OperatorTag::UniformY, OperatorTag::UniformZ],
        _ => [OperatorTag::StaggeredX, OperatorTag::StaggeredY, OperatorTag::StaggeredZ],
    }
}

/// Checks the commutator identity for each operator on the full-basis ground
/// state, plus the correlator form for the XXZ chain (`J = 2 + delta`,
/// staggered operators) and the Ising chain (`J = -lambda`, uniform operators).
pub fn sum_rules(model: &ModelSpec, lattice: &Lattice, operators: &[OperatorTag], dense_cap: usize) -> Result<SumRuleTable> {
    let basis = SectorBasis::full(*lattice)?;
    if basis.dimension() > dense_cap {
        return Err(Error::Resource(format!(
            "sum rules need the full spectrum of dimension {} above the dense cap {dense_cap}",
            basis.dimension()
        )));
    }
    let graph = coupling_graph(model, lattice)?;
    let op = SectorOperator::new(&graph, &basis)?;
    let spectrum = dense_spectrum(&op.dense(dense_cap)?)?;
    let ground = &spectrum.vectors[0];
    let e0 = spectrum.energies[0];
    let h_ground = op.apply(ground);

    let mut rows = Vec::new();
    let mut weighted = std::collections::HashMap::new();
    for &tag in operators {
        let (axis, q) = (tag.axis(), tag.momentum());
        let a0 = collective_apply(&basis, ground, axis, q);
        let ha0 = op.apply(&a0);
        let ah0 = collective_apply(&basis, &h_ground, axis, q);
        // <0|A H A|0> * 2 - <0|A A H|0> - <0|H A A|0>, with A Hermitian
        let lhs = 2.0 * dot(&a0, &ha0) - 2.0 * dot(&a0, &ah0);
        let weights = transition_weights(&basis, ground, e0, &spectrum, tag)?;
        let rhs = weights.commutator_sum();
        weighted.insert(tag, rhs / 2.0);
        rows.push(SumRuleRow {
            operator: tag,
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            completeness: (dot(&a0, &a0) - weights.total_weight()).abs(),
        });
    }

    let n = lattice.n_sites() as f64;
    let corr = |axis| correlator(&basis, ground, axis, 0, 1);
    let weight_sum = |tags: [OperatorTag; 3]| -> Option<f64> { tags.iter().map(|t| weighted.get(t).copied()).sum() };
    let correlator_form = match *model {
        ModelSpec::Xxz { delta } => {
            let tags = [OperatorTag::StaggeredX, OperatorTag::StaggeredY, OperatorTag::StaggeredZ];
            match weight_sum(tags) {
                Some(w) if 2.0 + delta != 0.0 => {
                    let j = 2.0 + delta;
                    let lhs = -(corr(SpinAxis::X)? + corr(SpinAxis::Y)? + corr(SpinAxis::Z)?);
                    let rhs = e0 / (j * n) + w / (j * n);
                    Some(CorrelatorSumRule {
                        form: "-sum_a <s^a_j s^a_j+1> = E0/(J N) + sum_a sum_n (En-E0)|<n|s_pi^a|0>|^2/(J N), J = 2 + delta".into(),
                        coupling: j,
                        lhs,
                        rhs,
                        residual: (lhs - rhs).abs(),
                    })
                }
                _ => None,
            }
        }
        ModelSpec::TransverseIsing { lambda } => {
            let tags = [OperatorTag::UniformX, OperatorTag::UniformY, OperatorTag::UniformZ];
            weight_sum(tags).map(|w| -> Result<CorrelatorSumRule> {
                let j = -lambda;
                let lhs = corr(SpinAxis::X)? - corr(SpinAxis::Y)? - corr(SpinAxis::Z)?;
                let rhs = -e0 / (j * n) - w / (j * n);
                Ok(CorrelatorSumRule {
                    form: "<sx sx> - <sy sy> - <sz sz> = -E0/(J N) - sum_a sum_n (En-E0)|<n|s_0^a|0>|^2/(J N), J = -lambda".into(),
                    coupling: j,
                    lhs,
                    rhs,
                    residual: (lhs - rhs).abs(),
                })
            }).transpose()?
        }
        _ => None,
    };

    Ok(SumRuleTable {
        ground_energy: e0,
        rows,
        correlator_form,
    })
}
