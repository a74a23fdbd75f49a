//! Spin-1/2 Hamiltonians and their matrix-free action on sector bases.
//!
//! Conventions: `s^a = sigma^a / 2`, periodic boundaries, and every sum over
//! sites is taken literally, so on short rings a pair may appear more than once
//! (for example the next-nearest-neighbour bonds of a four-site ring).
//! All five families are real symmetric in the `s^z` product basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Geometry, Lattice, SectorBasis};

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `sum_i J1 s_i.s_{i+1} + J2 s_i.s_{i+2}`
    J1J2 { j1: f64, j2: f64 },
    /// `sum_i s^x s^x + s^y s^y + delta s^z s^z` on nearest neighbours
    Xxz { delta: f64 },
    /// `-sum_i (lambda s^x_i s^x_{i+1} + s^z_i / 2)`
    TransverseIsing { lambda: f64 },
    /// Isotropic Heisenberg couplings along the legs and on the rungs.
    Ladder { j_leg: f64, j_rung: f64 },
    /// `sum_i (jx s^x s^x + jy s^y s^y + jz s^z s^z) + h sum_i s^z_i`
    GeneralXyz { jx: f64, jy: f64, jz: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    J1J2,
    Xxz,
    TransverseIsing,
    Ladder,
    GeneralXyz,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::J1J2 => "j1j2",
            Family::Xxz => "xxz",
            Family::TransverseIsing => "ising",
            Family::Ladder => "ladder",
            Family::GeneralXyz => "xyz",
        }
    }

    pub fn geometry(self) -> Geometry {
        match self {
            Family::Ladder => Geometry::Ladder,
            _ => Geometry::Chain,
        }
    }

    /// The family with its customary default couplings.
    pub fn default_model(self) -> ModelSpec {
        match self {
            Family::J1J2 => ModelSpec::J1J2 { j1: 1.0, j2: 0.0 },
            Family::Xxz => ModelSpec::Xxz { delta: 1.0 },
            Family::TransverseIsing => ModelSpec::TransverseIsing { lambda: 1.0 },
            Family::Ladder => ModelSpec::Ladder {
                j_leg: 1.0,
                j_rung: 1.0,
            },
            Family::GeneralXyz => ModelSpec::GeneralXyz {
                jx: 1.0,
                jy: 1.0,
                jz: 1.0,
                h: 0.0,
            },
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "j1j2" | "j1-j2" => Ok(Family::J1J2),
            "xxz" => Ok(Family::Xxz),
            "ising" | "tfim" | "transverse_ising" => Ok(Family::TransverseIsing),
            "ladder" => Ok(Family::Ladder),
            "xyz" | "general_xyz" => Ok(Family::GeneralXyz),
            other => invalid(format!("unknown model family {other:?}")),
        }
    }
}

/// Symmetries of a Hamiltonian that the toolkit knows how to exploit or label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Symmetries {
    pub sz_conserved: bool,
    /// `prod_i 2 s^z_i`
    pub parity_conserved: bool,
    /// Full spin-rotation invariance, so total `S` is a good quantum number.
    pub su2: bool,
    /// Invariance under flipping every spin.
    pub spin_inversion: bool,
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::J1J2 { .. } => Family::J1J2,
            ModelSpec::Xxz { .. } => Family::Xxz,
            ModelSpec::TransverseIsing { .. } => Family::TransverseIsing,
            ModelSpec::Ladder { .. } => Family::Ladder,
            ModelSpec::GeneralXyz { .. } => Family::GeneralXyz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.parameters();
        if let Some((name, _)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return invalid(format!("parameter {name} must be finite"));
        }
        if let ModelSpec::TransverseIsing { lambda } = self {
            if *lambda <= 0.0 {
                return invalid(format!("the Ising coupling lambda must be positive, got {lambda}"));
            }
        }
        Ok(())
    }

    /// Parameter names and values, in a fixed order.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ModelSpec::J1J2 { j1, j2 } => vec![("j1", j1), ("j2", j2)],
            ModelSpec::Xxz { delta } => vec![("delta", delta)],
            ModelSpec::TransverseIsing { lambda } => vec![("lambda", lambda)],
            ModelSpec::Ladder { j_leg, j_rung } => vec![("j_leg", j_leg), ("j_rung", j_rung)],
            ModelSpec::GeneralXyz { jx, jy, jz, h } => {
                vec![("jx", jx), ("jy", jy), ("jz", jz), ("h", h)]
            }
        }
    }

    pub fn parameter(&self, name: &str) -> Result<f64> {
        self.parameters()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "model {} has no parameter {name:?}",
                    self.family().name()
                ))
            })
    }

    pub fn with_parameter(mut self, name: &str, value: f64) -> Result<Self> {
        let slot = match (&mut self, name) {
            (ModelSpec::J1J2 { j1, .. }, "j1") => j1,
            (ModelSpec::J1J2 { j2, .. }, "j2") => j2,
            (ModelSpec::Xxz { delta }, "delta") => delta,
            (ModelSpec::TransverseIsing { lambda }, "lambda") => lambda,
            (ModelSpec::Ladder { j_leg, .. }, "j_leg") => j_leg,
            (ModelSpec::Ladder { j_rung, .. }, "j_rung" | "j") => j_rung,
            (ModelSpec::GeneralXyz { jx, .. }, "jx") => jx,
            (ModelSpec::GeneralXyz { jy, .. }, "jy") => jy,
            (ModelSpec::GeneralXyz { jz, .. }, "jz") => jz,
            (ModelSpec::GeneralXyz { h, .. }, "h") => h,
            _ => {
                return invalid(format!(
                    "model {} has no parameter {name:?}",
                    self.family().name()
                ))
            }
        };
        *slot = value;
        Ok(self)
    }

    pub fn symmetries(&self) -> Symmetries {
        conserved_quantities(self)
    }

    pub fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        let want = self.family().geometry();
        if lattice.geometry() != want {
            return invalid(format!(
                "model {} needs a {:?} lattice, got {:?}",
                self.family().name(),
                want,
                lattice.geometry()
            ));
        }
        if self.family() == Family::J1J2 && lattice.n_sites() < 3 {
            return invalid("the J1-J2 chain needs at least 3 sites");
        }
        Ok(())
    }
}

pub fn conserved_quantities(model: &ModelSpec) -> Symmetries {
    match *model {
        ModelSpec::J1J2 { .. } | ModelSpec::Ladder { .. } => Symmetries {
            sz_conserved: true,
            parity_conserved: true,
            su2: true,
            spin_inversion: true,
        },
        ModelSpec::Xxz { delta } => Symmetries {
            sz_conserved: true,
            parity_conserved: true,
            su2: delta == 1.0,
            spin_inversion: true,
        },
        ModelSpec::TransverseIsing { .. } => Symmetries {
            sz_conserved: false,
            parity_conserved: true,
            su2: false,
            spin_inversion: false,
        },
        ModelSpec::GeneralXyz { jx, jy, jz, h } => Symmetries {
            sz_conserved: jx == jy,
            parity_conserved: true,
            su2: jx == jy && jy == jz && h == 0.0,
            spin_inversion: h == 0.0,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondKind {
    Nn,
    Nnn,
    Leg,
    Rung,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// A two-spin term `jx s^x_i s^x_j + jy s^y_i s^y_j + jz s^z_i s^z_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub kind: BondKind,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

/// A single-site term `strength * s^axis_site`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Field {
    pub site: usize,
    pub axis: Axis,
    pub strength: f64,
}

/// Literal term list of a Hamiltonian, one entry per summand. Coefficients
/// carry their signs, so the Ising bonds hold `-lambda` and its fields `-1/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingGraph {
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    pub fields: Vec<Field>,
}

impl CouplingGraph {
    pub fn empty(n_sites: usize) -> Self {
        Self {
            n_sites,
            bonds: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn conserves_sz(&self) -> bool {
        self.bonds.iter().all(|b| b.jx == b.jy) && self.fields.iter().all(|f| f.axis == Axis::Z)
    }

    fn validate(&self) -> Result<()> {
        for b in &self.bonds {
            if b.i >= self.n_sites || b.j >= self.n_sites || b.i == b.j {
                return invalid(format!("bond ({}, {}) is not a valid site pair", b.i, b.j));
            }
        }
        for f in &self.fields {
            if f.site >= self.n_sites {
                return invalid(format!("field on site {} is out of range", f.site));
            }
            if f.axis == Axis::Y && f.strength != 0.0 {
                return invalid("a transverse y field would make the Hamiltonian complex");
            }
        }
        Ok(())
    }
}

pub fn coupling_graph(model: &ModelSpec, lattice: &Lattice) -> Result<CouplingGraph> {
    model.validate()?;
    model.check_lattice(lattice)?;
    let n = lattice.n_sites();
    let mut g = CouplingGraph::empty(n);
    let iso = |i, j, kind, c: f64| Bond {
        i,
        j,
        kind,
        jx: c,
        jy: c,
        jz: c,
    };
    match *model {
        ModelSpec::J1J2 { j1, j2 } => {
            for i in 0..n {
                g.bonds.push(iso(i, (i + 1) % n, BondKind::Nn, j1));
            }
            for i in 0..n {
                g.bonds.push(iso(i, (i + 2) % n, BondKind::Nnn, j2));
            }
        }
        ModelSpec::Xxz { delta } => {
            for i in 0..n {
                g.bonds.push(Bond {
                    i,
                    j: (i + 1) % n,
                    kind: BondKind::Nn,
                    jx: 1.0,
                    jy: 1.0,
                    jz: delta,
                });
            }
        }
        ModelSpec::TransverseIsing { lambda } => {
            for i in 0..n {
                g.bonds.push(Bond {
                    i,
                    j: (i + 1) % n,
                    kind: BondKind::Nn,
                    jx: -lambda,
                    jy: 0.0,
                    jz: 0.0,
                });
            }
            for site in 0..n {
                g.fields.push(Field {
                    site,
                    axis: Axis::Z,
                    strength: -0.5,
                });
            }
        }
        ModelSpec::Ladder { j_leg, j_rung } => {
            for k in 0..n / 2 {
                let (a, b) = (2 * k, 2 * k + 1);
                g.bonds.push(iso(a, (a + 2) % n, BondKind::Leg, j_leg));
                g.bonds.push(iso(b, (b + 2) % n, BondKind::Leg, j_leg));
            }
            for k in 0..n / 2 {
                g.bonds.push(iso(2 * k, 2 * k + 1, BondKind::Rung, j_rung));
            }
        }
        ModelSpec::GeneralXyz { jx, jy, jz, h } => {
            for i in 0..n {
                g.bonds.push(Bond {
                    i,
                    j: (i + 1) % n,
                    kind: BondKind::Nn,
                    jx,
                    jy,
                    jz,
                });
            }
            if h != 0.0 {
                for site in 0..n {
                    g.fields.push(Field {
                        site,
                        axis: Axis::Z,
                        strength: h,
                    });
                }
            }
        }
    }
    Ok(g)
}

struct FlipTerm {
    mask: u64,
    /// Matrix element when the two spins are antiparallel: `(jx + jy) / 4`.
    antiparallel: f64,
    /// Matrix element when the two spins are parallel: `(jx - jy) / 4`.
    parallel: f64,
}

/// A coupling graph bound to a basis, ready for repeated products.
pub struct SectorOperator<'a> {
    basis: &'a SectorBasis,
    diagonal: Vec<f64>,
    // Off-diagonal entries by column, compressed: column k owns
    // rows[start[k]..start[k + 1]].
    start: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl<'a> SectorOperator<'a> {
    pub fn new(graph: &CouplingGraph, basis: &'a SectorBasis) -> Result<Self> {
        graph.validate()?;
        if graph.n_sites != basis.lattice().n_sites() {
            return invalid("coupling graph and basis have different sizes");
        }
        if !basis.is_full() && !graph.conserves_sz() {
            return invalid("an Sz-sector basis was given for an operator that does not conserve Sz");
        }
        let mut zz: Vec<(u64, u64, f64)> = Vec::new();
        let mut flips: Vec<FlipTerm> = Vec::new();
        for b in &graph.bonds {
            if b.jz != 0.0 {
                zz.push((1 << b.i, 1 << b.j, b.jz * 0.25));
            }
            if b.jx != 0.0 || b.jy != 0.0 {
                flips.push(FlipTerm {
                    mask: (1 << b.i) | (1 << b.j),
                    antiparallel: 0.25 * (b.jx + b.jy),
                    parallel: 0.25 * (b.jx - b.jy),
                });
            }
        }
        let mut z_fields = vec![0.0; graph.n_sites];
        let mut single = Vec::new();
        for f in &graph.fields {
            match f.axis {
                Axis::Z => z_fields[f.site] += f.strength,
                Axis::X if f.strength != 0.0 => single.push((1u64 << f.site, 0.5 * f.strength)),
                _ => {}
            }
        }
        let diagonal = basis
            .configs()
            .iter()
            .map(|&c| {
                let mut d = 0.0;
                for &(mi, mj, coef) in &zz {
                    let same = (c & mi != 0) == (c & mj != 0);
                    d += if same { coef } else { -coef };
                }
                for (site, &h) in z_fields.iter().enumerate() {
                    if h != 0.0 {
                        d += if c >> site & 1 == 1 { 0.5 * h } else { -0.5 * h };
                    }
                }
                d
            })
            .collect();
        let dim = basis.dimension();
        let mut start = Vec::with_capacity(dim + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        start.push(0);
        for &c in basis.configs() {
            for t in &flips {
                let anti = (c & t.mask).count_ones() == 1;
                let amp = if anti { t.antiparallel } else { t.parallel };
                if amp != 0.0 {
                    if let Some(row) = basis.find(c ^ t.mask) {
                        rows.push(row as u32);
                        values.push(amp);
                    }
                }
            }
            for &(mask, amp) in &single {
                if let Some(row) = basis.find(c ^ mask) {
                    rows.push(row as u32);
                    values.push(amp);
                }
            }
            start.push(rows.len());
        }
        Ok(Self {
            basis,
            diagonal,
            start,
            rows,
            values,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn basis(&self) -> &SectorBasis {
        self.basis
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Calls `emit(row, value)` for every nonzero entry of column `k`.
    #[inline]
    fn column(&self, k: usize, mut emit: impl FnMut(usize, f64)) {
        emit(k, self.diagonal[k]);
        let range = self.start[k]..self.start[k + 1];
        for (&row, &v) in self.rows[range.clone()].iter().zip(&self.values[range]) {
            emit(row as usize, v);
        }
    }

    /// `y = H x`. The matrix is symmetric, so row `k` is read as column `k`
    /// and every output entry is a fixed-order sum.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dimension());
        assert_eq!(y.len(), self.dimension());
        for (k, yk) in y.iter_mut().enumerate() {
            let mut acc = self.diagonal[k] * x[k];
            let range = self.start[k]..self.start[k + 1];
            for (&row, &v) in self.rows[range.clone()].iter().zip(&self.values[range]) {
                acc += v * x[row as usize];
            }
            *yk = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Real symmetric dense matrix with `M e_k = H e_k`.
    pub fn dense(&self, cap: usize) -> Result<DMatrix<f64>> {
        let dim = self.dimension();
        if dim > cap {
            return Err(Error::Resource(format!(
                "dense matrix of dimension {dim} exceeds the cap of {cap}"
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            self.column(k, |row, v| m[(row, k)] += v);
        }
        Ok(m)
    }

    /// `<x|H|y>`
    pub fn expectation(&self, x: &[f64], y: &[f64]) -> f64 {
        let hy = self.apply(y);
        dot(x, &hy)
    }
}

/// `H v` for `model` on `basis`.
pub fn apply_hamiltonian(model: &ModelSpec, basis: &SectorBasis, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != basis.dimension() {
        return invalid(format!(
            "vector length {} does not match basis dimension {}",
            v.len(),
            basis.dimension()
        ));
    }
    let graph = coupling_graph(model, basis.lattice())?;
    if !basis.is_full() && !model.symmetries().sz_conserved {
        return invalid(format!(
            "model {} does not conserve Sz; use the full basis",
            model.family().name()
        ));
    }
    let op = SectorOperator::new(&graph, basis)?;
    Ok(op.apply(v))
}

pub fn hamiltonian_dense(model: &ModelSpec, basis: &SectorBasis, cap: usize) -> Result<DMatrix<f64>> {
    let graph = coupling_graph(model, basis.lattice())?;
    if !basis.is_full() && !model.symmetries().sz_conserved {
        return invalid(format!(
            "model {} does not conserve Sz; use the full basis",
            model.family().name()
        ));
    }
    SectorOperator::new(&graph, basis)?.dense(cap)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
