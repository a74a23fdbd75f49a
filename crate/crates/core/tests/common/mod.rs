// Invariant checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{Complex, Matrix2, Matrix4};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpt_core::eigensolver::{dense_spectrum, lanczos_lowest_k, lowest_ritz_history, LanczosOptions};
use qpt_core::entanglement::{wootters_concurrence, wootters_concurrence_complex};
use qpt_core::lattice::{binomial, Lattice, SectorBasis};
use qpt_core::models::{apply_hamiltonian, coupling_graph, hamiltonian_dense, ModelSpec, SectorOperator};
use qpt_core::observables::{two_site_rdm, SpinAxis, TwoSiteRdm};

pub type Check = Result<(), TestCaseError>;

pub fn model_on_lattice() -> impl Strategy<Value = (ModelSpec, Lattice)> {
    let p = -2.0f64..2.0;
    (0usize..5, prop::sample::select(vec![4usize, 6, 8]), p.clone(), p.clone(), p.clone(), p).prop_map(
        |(family, n, a, b, c, d)| {
            let chain = Lattice::chain(n).unwrap();
            match family {
                0 => (ModelSpec::J1J2 { j1: a, j2: b }, chain),
                1 => (ModelSpec::Xxz { delta: a }, chain),
                2 => (ModelSpec::TransverseIsing { lambda: 0.05 + a.abs() }, chain),
                3 => (ModelSpec::Ladder { j_leg: a, j_rung: b }, Lattice::ladder(n / 2).unwrap()),
                _ => (ModelSpec::GeneralXyz { jx: a, jy: b, jz: c, h: d }, chain),
            }
        },
    )
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v = random_vector(rng, dim);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sector_dimensions(n: usize) -> Check {
    let lattice = Lattice::chain(n).unwrap();
    let mut total = 0;
    for up in 0..=n {
        let m = 2 * up as i32 - n as i32;
        let basis = SectorBasis::enumerate(lattice, Some(m)).unwrap();
        prop_assert_eq!(basis.dimension() as u64, binomial(n as u64, up as u64));
        for (k, &c) in basis.configs().iter().enumerate() {
            prop_assert_eq!(c.count_ones() as usize, up);
            prop_assert_eq!(basis.find(c), Some(k));
        }
        prop_assert!(basis.configs().windows(2).all(|w| w[0] < w[1]));
        total += basis.dimension();
    }
    prop_assert_eq!(total, 1usize << n);
    Ok(())
}

/// Symmetry and linearity of the matrix-free product on the full basis.
pub fn hermitian_and_linear(model: &ModelSpec, lattice: &Lattice, seed: u64) -> Check {
    let basis = SectorBasis::full(*lattice).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = basis.dimension();
    let (x, y) = (random_vector(&mut rng, dim), random_vector(&mut rng, dim));
    let hx = apply_hamiltonian(model, &basis, &x).unwrap();
    let hy = apply_hamiltonian(model, &basis, &y).unwrap();
    let scale = 1.0 + dot(&hx, &hx).sqrt() * dot(&y, &y).sqrt();
    prop_assert!((dot(&x, &hy) - dot(&hx, &y)).abs() <= 1e-12 * scale);

    let (a, b) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    let h_combo = apply_hamiltonian(model, &basis, &combo).unwrap();
    for ((h, p), q) in h_combo.iter().zip(&hx).zip(&hy) {
        prop_assert!((h - (a * p + b * q)).abs() <= 1e-12 * scale);
    }
    Ok(())
}

/// Sz sectors (when conserved) and spin-flip parity are never left.
pub fn sectors_preserved(model: &ModelSpec, lattice: &Lattice, seed: u64) -> Check {
    let n = lattice.n_sites();
    let full = SectorBasis::full(*lattice).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = coupling_graph(model, lattice).unwrap();
    if graph.conserves_sz() {
        let up = rng.random_range(0..=n);
        let m = 2 * up as i32 - n as i32;
        let sector = SectorBasis::enumerate(*lattice, Some(m)).unwrap();
        let v = sector.lift(&random_vector(&mut rng, sector.dimension()));
        let hv = apply_hamiltonian(model, &full, &v).unwrap();
        for (c, x) in full.configs().iter().zip(&hv) {
            if c.count_ones() as usize != up {
                prop_assert_eq!(*x, 0.0);
            }
        }
    }
    let even = rng.random::<bool>();
    let mut v = random_vector(&mut rng, full.dimension());
    for (c, x) in full.configs().iter().zip(v.iter_mut()) {
        if (c.count_zeros() as usize - (64 - n)).is_multiple_of(2) != even {
            *x = 0.0;
        }
    }
    let hv = apply_hamiltonian(model, &full, &v).unwrap();
    for (c, x) in full.configs().iter().zip(&hv) {
        if (c.count_zeros() as usize - (64 - n)).is_multiple_of(2) != even {
            prop_assert_eq!(*x, 0.0);
        }
    }
    Ok(())
}

/// Every family equals the general XYZ chain with matching couplings.
pub fn general_xyz_reductions(a: f64, b: f64, n: usize, seed: u64) -> Check {
    let lattice = Lattice::chain(n).unwrap();
    let basis = SectorBasis::full(lattice).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_vector(&mut rng, basis.dimension());
    let lambda = 0.05 + a.abs();
    let pairs = [
        (ModelSpec::Xxz { delta: a }, ModelSpec::GeneralXyz { jx: 1.0, jy: 1.0, jz: a, h: 0.0 }),
        (
            ModelSpec::TransverseIsing { lambda },
            ModelSpec::GeneralXyz { jx: -lambda, jy: 0.0, jz: 0.0, h: -0.5 },
        ),
        (ModelSpec::J1J2 { j1: b, j2: 0.0 }, ModelSpec::GeneralXyz { jx: b, jy: b, jz: b, h: 0.0 }),
    ];
    for (m, g) in pairs {
        let x = apply_hamiltonian(&m, &basis, &v).unwrap();
        let y = apply_hamiltonian(&g, &basis, &v).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-12, "{:?} vs {:?}", m, g);
        }
    }
    Ok(())
}

/// Trace, positivity, correlator bounds and concurrence range for the reduced
/// state of a random pure state.
pub fn rdm_bounds(n: usize, i: usize, j: usize, seed: u64) -> Check {
    let basis = SectorBasis::full(Lattice::chain(n).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = random_state(&mut rng, basis.dimension());
    let rdm = two_site_rdm(&basis, &psi, i, j).unwrap();
    prop_assert!((rdm.trace() - 1.0).abs() <= 1e-12);
    prop_assert!(rdm.min_eigenvalue() >= -1e-12);
    for a in 0..4 {
        for b in 0..4 {
            prop_assert_eq!(rdm.entries[a][b], rdm.entries[b][a]);
        }
    }
    for axis in SpinAxis::ALL {
        prop_assert!(rdm.correlator(axis).abs() <= 0.25 + 1e-12);
    }
    let c = wootters_concurrence(&rdm).unwrap();
    prop_assert!((0.0..=1.0).contains(&c.value));
    prop_assert!(c.raw <= 1.0 + 1e-10);
    Ok(())
}

fn random_unitary(rng: &mut ChaCha8Rng) -> Matrix2<Complex<f64>> {
    // exp(-i t n.sigma) = cos t - i sin t n.sigma, times a global phase
    let mut n = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(1e-12);
    n.iter_mut().for_each(|x| *x /= len);
    let t = rng.random::<f64>() * std::f64::consts::TAU;
    let (c, s) = (t.cos(), t.sin());
    let phase = Complex::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
    Matrix2::new(
        Complex::new(c, -s * n[2]),
        Complex::new(-s * n[1], -s * n[0]),
        Complex::new(s * n[1], -s * n[0]),
        Complex::new(c, s * n[2]),
    ) * phase
}

fn kron(a: &Matrix2<Complex<f64>>, b: &Matrix2<Complex<f64>>) -> Matrix4<Complex<f64>> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

fn random_density(rng: &mut ChaCha8Rng, rank: usize) -> Matrix4<Complex<f64>> {
    let mut rho = Matrix4::<Complex<f64>>::zeros();
    for _ in 0..rank {
        let v = nalgebra::Vector4::from_fn(|_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        rho += v * v.adjoint() * Complex::new(rng.random::<f64>(), 0.0);
    }
    let t = rho.trace();
    rho / t
}

/// Concurrence lies in [0, 1] and is unchanged by local unitaries.
pub fn concurrence_local_invariance(seed: u64, rank: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_density(&mut rng, rank);
    let u = kron(&random_unitary(&mut rng), &random_unitary(&mut rng));
    let rotated = u * rho * u.adjoint();
    let rotated = (rotated + rotated.adjoint()) * Complex::new(0.5, 0.0);
    let c0 = wootters_concurrence_complex(&rho).unwrap();
    let c1 = wootters_concurrence_complex(&rotated).unwrap();
    prop_assert!((0.0..=1.0).contains(&c0.value));
    // The lambda_i are square roots of eigenvalues, so roundoff of order eps
    // on a rank-deficient state moves them by sqrt(eps).
    let p_min = rho.symmetric_eigenvalues().min();
    let tol = if p_min > 1e-6 { 1e-10 } else { 2e-7 };
    prop_assert!((c0.raw - c1.raw).abs() <= tol, "{} vs {}", c0.raw, c1.raw);

    // Real rotations about y keep a real matrix real.
    let real = TwoSiteRdm {
        entries: std::array::from_fn(|a| std::array::from_fn(|b| rho[(a, b)].re)),
    };
    if real.min_eigenvalue() >= 0.0 {
        let ry = |t: f64| Matrix2::new((t / 2.0).cos(), -(t / 2.0).sin(), (t / 2.0).sin(), (t / 2.0).cos());
        let (r1, r2) = (ry(rng.random::<f64>() * 6.0), ry(rng.random::<f64>() * 6.0));
        let r = Matrix4::from_fn(|a, b| r1[(a / 2, b / 2)] * r2[(a % 2, b % 2)]);
        let m = Matrix4::from_fn(|a, b| real.entries[a][b]);
        let turned = r * m * r.transpose();
        let turned = TwoSiteRdm {
            entries: std::array::from_fn(|a| std::array::from_fn(|b| 0.5 * (turned[(a, b)] + turned[(b, a)]))),
        };
        let a = wootters_concurrence(&real).unwrap();
        let b = wootters_concurrence(&turned).unwrap();
        let tol = if real.min_eigenvalue() > 1e-6 { 1e-10 } else { 2e-7 };
        prop_assert!((a.raw - b.raw).abs() <= tol);
    }
    Ok(())
}

/// Lanczos against dense diagonalization, plus orthonormality, monotone Ritz
/// values and bitwise reproducibility under a fixed seed.
pub fn lanczos_matches_dense(model: &ModelSpec, lattice: &Lattice, k: usize, seed: u64) -> Check {
    let graph = coupling_graph(model, lattice).unwrap();
    let basis = if graph.conserves_sz() {
        SectorBasis::enumerate(*lattice, Some(0)).unwrap()
    } else {
        SectorBasis::full(*lattice).unwrap()
    };
    let op = SectorOperator::new(&graph, &basis).unwrap();
    let dim = basis.dimension();
    let k = k.min(dim);
    let dense = dense_spectrum(&hamiltonian_dense(model, &basis, 4096).unwrap()).unwrap();
    let opts = LanczosOptions {
        seed,
        ..LanczosOptions::default()
    };
    let apply = |x: &[f64], y: &mut [f64]| op.apply_into(x, y);
    let lz = lanczos_lowest_k(&apply, dim, k, &opts).unwrap();
    for (a, b) in lz.energies.iter().zip(&dense.energies) {
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }
    prop_assert!(lz.orthonormality_error() <= 1e-10);
    let again = lanczos_lowest_k(&apply, dim, k, &opts).unwrap();
    prop_assert_eq!(&lz.energies, &again.energies);
    prop_assert_eq!(&lz.vectors, &again.vectors);

    let history = lowest_ritz_history(&apply, dim, 40, seed);
    prop_assert!(history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    prop_assert!(history.last().unwrap() >= &(dense.energies[0] - 1e-9));
    Ok(())
}
