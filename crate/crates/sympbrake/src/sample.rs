//! Seeded random samples. Every sample owns a generator derived from
//! `(seed, family, id)`, so results do not depend on scheduling.

use rand::RngExt;
use rand_pcg::Pcg64;
use sympbrake_core::linalg::{expm, symmetrize};
use sympbrake_core::sympcore::standard_j;
use sympbrake_core::Mat;

use crate::formats::PathDoc;

pub fn rng_for(seed: u64, family: u64, id: usize) -> Pcg64 {
    Pcg64::new(((seed as u128) << 64) | id as u128, family as u128)
}

pub fn symmetric(rng: &mut Pcg64, dim: usize, scale: f64) -> Mat {
    let m = Mat::from_fn(dim, dim, |_, _| rng.random_range(-scale..=scale));
    symmetrize(&m)
}

/// `exp(J S)` for a random symmetric `S`.
pub fn symplectic(rng: &mut Pcg64, k: usize, scale: f64) -> Mat {
    let s = symmetric(rng, 2 * k, scale);
    expm(&(standard_j(k).as_mat() * s))
}

/// Piecewise-constant generator path on `[0, 1]` in `Sp(2k)`.
pub fn generator_path(rng: &mut Pcg64, k: usize, pieces: usize, scale: f64) -> PathDoc {
    let mats: Vec<Mat> = (0..pieces).map(|_| symmetric(rng, 2 * k, scale)).collect();
    PathDoc::piecewise_constant(k, 1.0, &mats)
}

/// A path in `Sp(4)` ending at `(−I₂) ⋄ Q`: a half turn in the first plane
/// and a random generator in the second.
pub fn structured_path(rng: &mut Pcg64, pieces: usize, scale: f64) -> PathDoc {
    let pi = std::f64::consts::PI;
    let mats: Vec<Mat> = (0..pieces)
        .map(|_| {
            let b = symmetric(rng, 2, scale);
            let mut m = Mat::zeros(4, 4);
            m[(0, 0)] = pi;
            m[(2, 2)] = pi;
            for (i, gi) in [1, 3].into_iter().enumerate() {
                for (j, gj) in [1, 3].into_iter().enumerate() {
                    m[(gi, gj)] = b[(i, j)];
                }
            }
            m
        })
        .collect();
    PathDoc::piecewise_constant(2, 1.0, &mats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sympbrake_core::iteration::minus_i2_split;
    use sympbrake_core::sympcore::symplectic_defect;

    #[test]
    fn reproducible_streams() {
        let a = generator_path(&mut rng_for(5, 1, 3), 2, 3, 2.0);
        let b = generator_path(&mut rng_for(5, 1, 3), 2, 3, 2.0);
        let c = generator_path(&mut rng_for(5, 1, 4), 2, 3, 2.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, generator_path(&mut rng_for(5, 2, 3), 2, 3, 2.0));
    }

    #[test]
    fn samples_are_symplectic() {
        let mut rng = rng_for(1, 9, 0);
        for k in 1..=3 {
            assert!(symplectic_defect(&symplectic(&mut rng, k, 0.8)).unwrap() < 1e-10);
        }
        let p = structured_path(&mut rng, 3, 2.0).build(1e-9).unwrap();
        assert!(minus_i2_split(p.endpoint(), None).unwrap().is_some());
    }
}
