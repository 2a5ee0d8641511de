//! Seeded generators for states, unitaries, observables and instruments.
//!
//! Pure states are normalized complex Gaussian vectors. Mixed states take a
//! normalized squared-Gaussian spectrum in a Haar-random basis, so they are
//! full rank with probability one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::instrument::{Instrument, StateFamily};
use crate::matrix::ComplexMatrix;
use crate::observable::{OutcomeSpace, SharpObservable};
use crate::state::DensityOperator;
use crate::superop::Superoperator;

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    loop {
        let psi = gaussian_vector(dim, rng);
        if let Ok(rho) = DensityOperator::pure(&psi) {
            return rho;
        }
    }
}

pub fn mixed_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let u = unitary(dim, rng);
    let mut spectrum: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * g + 1e-3
        })
        .collect();
    let total: f64 = spectrum.iter().sum();
    spectrum.iter_mut().for_each(|s| *s /= total);
    let m = &(&u * &ComplexMatrix::from_diagonal(&spectrum)) * &u.adjoint();
    DensityOperator::new(m).expect("conjugated spectrum is a state")
}

/// Haar-distributed unitary from the phase-corrected QR of a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g: DMatrix<Complex64> = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..dim {
            u[(row, k)] *= phase;
        }
    }
    ComplexMatrix::from_inner(u)
}

/// Observable whose projection for outcome `k` has rank `ranks[k]`, in a random basis.
///
/// Panics unless the ranks sum to `dim`.
pub fn observable<R: Rng + ?Sized>(dim: usize, ranks: &[usize], rng: &mut R) -> SharpObservable {
    assert_eq!(ranks.iter().sum::<usize>(), dim, "ranks must sum to the dimension");
    let u = unitary(dim, rng);
    let mut next = 0;
    let projections = ranks
        .iter()
        .map(|&rank| {
            let mut p = ComplexMatrix::zeros(dim, dim);
            for k in next..next + rank {
                let col: Vec<_> = (0..dim).map(|r| u[(r, k)]).collect();
                p = &p + &ComplexMatrix::outer(&col);
            }
            next += rank;
            p
        })
        .collect();
    SharpObservable::new(dim, OutcomeSpace::numbered(ranks.len()).expect("nonempty"), projections)
        .expect("columns of a unitary give a valid observable")
}

/// Random rank assignment of `dim` basis vectors to `outcomes` outcomes.
///
/// With `nondegenerate` every rank is at most one (some outcomes may be
/// null when `outcomes > dim`); requires `outcomes ≥ dim` in that case.
pub fn ranks<R: Rng + ?Sized>(dim: usize, outcomes: usize, nondegenerate: bool, rng: &mut R) -> Vec<usize> {
    let mut ranks = vec![0; outcomes];
    if nondegenerate {
        assert!(outcomes >= dim, "nondegenerate observable needs at least dim outcomes");
        let mut slots: Vec<usize> = (0..outcomes).collect();
        for k in 0..dim {
            let pick = rng.random_range(k..outcomes);
            slots.swap(k, pick);
            ranks[slots[k]] = 1;
        }
    } else {
        for _ in 0..dim {
            ranks[rng.random_range(0..outcomes)] += 1;
        }
    }
    ranks
}

/// Random completely positive trace-preserving map with `kraus_count` operators.
pub fn channel<R: Rng + ?Sized>(dim: usize, kraus_count: usize, rng: &mut R) -> Superoperator {
    let ops = normalized_kraus(dim, &[kraus_count], rng).remove(0);
    Superoperator::from_kraus(&ops).expect("nonempty Kraus set")
}

/// Random completely positive instrument; outcome `x` gets `kraus_counts[x]` operators.
pub fn cp_instrument<R: Rng + ?Sized>(dim: usize, kraus_counts: &[usize], rng: &mut R) -> Result<Instrument> {
    let groups = normalized_kraus(dim, kraus_counts, rng);
    Instrument::from_kraus(OutcomeSpace::numbered(kraus_counts.len())?, groups)
}

pub fn state_family<R: Rng + ?Sized>(outcomes: &OutcomeSpace, dim: usize, rng: &mut R) -> StateFamily {
    let states = (0..outcomes.len())
        .map(|k| if k % 2 == 0 { mixed_state(dim, rng) } else { pure_state(dim, rng) })
        .collect();
    StateFamily::new(outcomes.clone(), states).expect("matching outcome count")
}

/// Gaussian Kraus operators rescaled by `S^{-1/2}`, `S = Σ K†K`, so they sum to a channel.
fn normalized_kraus<R: Rng + ?Sized>(dim: usize, counts: &[usize], rng: &mut R) -> Vec<Vec<ComplexMatrix>> {
    let raw: Vec<Vec<ComplexMatrix>> = counts
        .iter()
        .map(|&n| (0..n).map(|_| gaussian_matrix(dim, dim, rng)).collect())
        .collect();
    let mut s = ComplexMatrix::zeros(dim, dim);
    for k in raw.iter().flatten() {
        s = &s + &(&k.adjoint() * k);
    }
    let eig = s.hermitian_eigen(1e-9).expect("K†K sums are Hermitian");
    let inv_sqrt: Vec<f64> = eig.values.iter().map(|v| 1.0 / v.sqrt()).collect();
    let s_inv_sqrt = &(&eig.vectors * &ComplexMatrix::from_diagonal(&inv_sqrt)) * &eig.vectors.adjoint();
    raw.into_iter()
        .map(|group| {
            let mut group: Vec<ComplexMatrix> = group.iter().map(|k| k * &s_inv_sqrt).collect();
            if group.is_empty() {
                group.push(ComplexMatrix::zeros(dim, dim));
            }
            group
        })
        .collect()
}
