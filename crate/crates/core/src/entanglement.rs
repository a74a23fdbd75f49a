//! Pairwise concurrence: the general Wootters measure and two closed forms in
//! terms of nearest-neighbour correlators.

use nalgebra::{ComplexField, Matrix4};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::observables::TwoSiteRdm;

pub use nalgebra::Complex;

const RDM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcurrenceMethod {
    Wootters,
    XxzClosed,
    IsingClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcurrenceValue {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    /// Before clamping; may be negative.
    pub raw: f64,
    pub method: ConcurrenceMethod,
}

impl ConcurrenceValue {
    fn new(raw: f64, method: ConcurrenceMethod) -> Self {
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
            method,
        }
    }
}

// sigma^y (x) sigma^y in the (uu, ud, du, dd) basis is the permutation
// 0<->3, 1<->2 with signs (-1, 1, 1, -1).
const FLIP_PERM: [usize; 4] = [3, 2, 1, 0];
const FLIP_SIGN: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// `(sigma^y (x) sigma^y) rho* (sigma^y (x) sigma^y)` for a real matrix.
pub fn spin_flip(rdm: &TwoSiteRdm) -> TwoSiteRdm {
    let r = &rdm.entries;
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = FLIP_SIGN[a] * FLIP_SIGN[b] * r[FLIP_PERM[a]][FLIP_PERM[b]];
        }
    }
    TwoSiteRdm { entries: out }
}

fn flip_generic<T: ComplexField<RealField = f64> + Copy>(rho: &Matrix4<T>) -> Matrix4<T> {
    Matrix4::from_fn(|a, b| {
        rho[(FLIP_PERM[a], FLIP_PERM[b])].conjugate() * T::from_real(FLIP_SIGN[a] * FLIP_SIGN[b])
    })
}

/// `lambda_1 - lambda_2 - lambda_3 - lambda_4`, with `lambda_i^2` the
/// eigenvalues of `sqrt(rho) rho~ sqrt(rho)` in descending order.
fn wootters_raw<T: ComplexField<RealField = f64> + Copy>(rho: &Matrix4<T>) -> f64 {
    let eig = rho.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let sqrt_rho = v * Matrix4::from_diagonal(&roots.map(T::from_real)) * v.adjoint();
    let m = sqrt_rho * flip_generic(rho) * sqrt_rho;
    let m = (m + m.adjoint()) * T::from_real(0.5);
    let mut lam: Vec<f64> = m.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    lam[0] - lam[1] - lam[2] - lam[3]
}

pub fn wootters_concurrence(rdm: &TwoSiteRdm) -> Result<ConcurrenceValue> {
    rdm.validate(RDM_TOL, RDM_TOL)?;
    let rho = Matrix4::from_fn(|a, b| rdm.entries[a][b]);
    Ok(ConcurrenceValue::new(wootters_raw(&rho), ConcurrenceMethod::Wootters))
}

/// Wootters concurrence of a general (complex Hermitian) two-qubit density matrix.
pub fn wootters_concurrence_complex(rho: &Matrix4<Complex<f64>>) -> Result<ConcurrenceValue> {
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > RDM_TOL || trace.im.abs() > RDM_TOL {
        return invalid(format!("density matrix trace is {trace}"));
    }
    if (rho - rho.adjoint()).camax() > RDM_TOL {
        return invalid("density matrix is not Hermitian");
    }
    let min = rho.symmetric_eigenvalues().min();
    if min < -RDM_TOL {
        return invalid(format!("density matrix has eigenvalue {min}"));
    }
    Ok(ConcurrenceValue::new(wootters_raw(rho), ConcurrenceMethod::Wootters))
}

/// `C = -2 sum_a <s^a_j s^a_{j+1}> - 1/2`, valid for XXZ-symmetric states.
pub fn xxz_closed_form(sum_of_correlators: f64) -> ConcurrenceValue {
    ConcurrenceValue::new(-2.0 * sum_of_correlators - 0.5, ConcurrenceMethod::XxzClosed)
}

/// `C = 2 (<sx sx> - <sy sy> - <sz sz>) - 1/2` for the transverse Ising chain.
pub fn ising_closed_form(cxx: f64, cyy: f64, czz: f64) -> ConcurrenceValue {
    ConcurrenceValue::new(2.0 * (cxx - cyy - czz) - 0.5, ConcurrenceMethod::IsingClosed)
}
