//! Shared helpers for the integration tests: seeded random objects and a
//! dense complex linear solver used as an independent oracle for CG.
//! Each test target compiles this module separately and uses a subset.
#![allow(dead_code)]

use ksadapt_core::operators::{adjoint_apply, normal_apply};
use ksadapt_core::{CineSeries, CoilSensitivities, MultiCoilKSpace, SamplingMask};
use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cine(nx: usize, ny: usize, nt: usize, seed: u64) -> CineSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CineSeries::new(Array3::from_shape_fn((nx, ny, nt), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }))
    .unwrap()
}

pub fn random_kspace(nx: usize, ny: usize, nt: usize, nc: usize, seed: u64) -> MultiCoilKSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MultiCoilKSpace::new(Array4::from_shape_fn((nx, ny, nt, nc), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }))
    .unwrap()
}

pub fn random_sens(nx: usize, ny: usize, nc: usize, seed: u64) -> CoilSensitivities {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CoilSensitivities::new(
        Array3::from_shape_fn((nx, ny, nc), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }),
        false,
    )
    .unwrap()
}

/// Random mask keeping `budget` lines (always at least one), no ACS.
pub fn random_mask(ny: usize, budget: usize, seed: u64) -> SamplingMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..ny).collect();
    for i in 0..budget {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    SamplingMask::new(ny, pool[..budget].to_vec(), vec![]).unwrap()
}

/// Dense complex linear solve by LU with partial pivoting. Straight-line
/// oracle code, independent of the CG path it checks.
pub fn lu_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].norm() > a[pivot][col].norm() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.norm() > 1e-14, "oracle matrix is singular");
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let bv = b[col];
            b[row] -= factor * bv;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Builds the dense matrix of `(A^H A + lambda I)` by applying the normal
/// operator to every basis vector, then solves the normal equations
/// directly.
pub fn dense_normal_solve(
    y: &MultiCoilKSpace,
    s: &CoilSensitivities,
    m: &SamplingMask,
    z: &CineSeries,
    lambda: f64,
) -> CineSeries {
    let (nx, ny, nt) = (y.nx(), y.ny(), y.nt());
    let n = nx * ny * nt;

    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for k in 0..n {
        let mut basis = Array3::zeros((nx, ny, nt));
        let (i, rem) = (k / (ny * nt), k % (ny * nt));
        let (j, t) = (rem / nt, rem % nt);
        basis[[i, j, t]] = Complex64::new(1.0, 0.0);
        let col = normal_apply(&CineSeries::new(basis).unwrap(), s, m, lambda).unwrap();
        for (row, v) in col.data().iter().enumerate() {
            matrix[row][k] = *v;
        }
    }

    let mut rhs: Vec<Complex64> = adjoint_apply(y, s, m)
        .unwrap()
        .data()
        .iter()
        .copied()
        .collect();
    for (r, zv) in rhs.iter_mut().zip(z.data().iter()) {
        *r += zv * lambda;
    }

    let sol = lu_solve(matrix, rhs);
    CineSeries::new(Array3::from_shape_vec((nx, ny, nt), sol).unwrap()).unwrap()
}

pub fn rel_diff(a: &CineSeries, b: &CineSeries) -> f64 {
    let num: f64 = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
