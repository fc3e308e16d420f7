//! Seeded random operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{FloatMatrix, Matrix};
use crate::scalar::{Scalar, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> FloatMatrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> FloatMatrix {
    let qr = ginibre(n, n, rng).to_nalgebra().qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = Matrix::from_nalgebra(&q);
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Density matrix `G G* / tr(G G*)` from a square Ginibre matrix; almost
/// surely full rank.
pub fn random_density(n: usize, rng: &mut impl Rng) -> FloatMatrix {
    let g = ginibre(n, n, rng);
    let m = &g * &g.adjoint();
    let t = m.trace();
    let h = m.scale(&(C64::new(1.0, 0.0) / t));
    // symmetrize away rounding
    (&h + &h.adjoint()).scale(&C64::new(0.5, 0.0))
}

/// `U diag(1,…,1,0,…,0) U*` with a Haar unitary `U`.
pub fn random_projection(n: usize, rank: usize, rng: &mut impl Rng) -> FloatMatrix {
    let u = random_unitary(n, rng);
    let d: Vec<C64> = (0..n).map(|i| if i < rank { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect();
    let p = &(&u * &Matrix::diagonal(&d)) * &u.adjoint();
    (&p + &p.adjoint()).scale(&C64::new(0.5, 0.0))
}

/// Cayley transform `(I − K)(I + K)⁻¹` of a random skew-Hermitian `K` with
/// Gaussian-integer entries bounded by `max_entry`: a unitary with entries in
/// `Q(i)`, so it is exact in exact mode.
pub fn cayley_unitary<T: Scalar>(n: usize, max_entry: i64, rng: &mut impl Rng) -> Matrix<T> {
    let mut k = Matrix::<T>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = T::i() * T::from_i64(rng.random_range(-max_entry..=max_entry));
        for j in i + 1..n {
            let z = T::from_i64(rng.random_range(-max_entry..=max_entry)) + T::i() * T::from_i64(rng.random_range(-max_entry..=max_entry));
            k[(i, j)] = z.clone();
            k[(j, i)] = -z.conj();
        }
    }
    let id = Matrix::<T>::identity(n);
    // I + K is invertible: K has purely imaginary spectrum
    let inv = (&id + &k).inverse(1e-12).expect("I + K is invertible for skew-Hermitian K");
    &(&id - &k) * &inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn unitaries_are_unitary() {
        let mut rng = seeded(3);
        for n in 1..6 {
            let u = random_unitary(n, &mut rng);
            assert!((&u.adjoint() * &u).near(&Matrix::identity(n), 1e-12));
            let c: Matrix<Exact> = cayley_unitary(n, 3, &mut rng);
            assert_eq!(&c.adjoint() * &c, Matrix::identity(n));
        }
    }

    #[test]
    fn densities_are_states() {
        let mut rng = seeded(11);
        let rho = random_density(4, &mut rng);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(rho.is_hermitian(0.0));
        let p = random_projection(5, 2, &mut rng);
        assert!((&p * &p).near(&p, 1e-12));
        assert!((p.trace().re - 2.0).abs() < 1e-12);
    }
}
