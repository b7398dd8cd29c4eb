//! Random symplectic data for unit and property tests.

use alloc::vec::Vec;

use proptest::prelude::*;

use crate::linalg::{expm, Mat};
use crate::sympcore::standard_j;

/// Symmetric `d×d` matrix from the first `d(d+1)/2` values.
pub fn symmetric_from(d: usize, vals: &[f64]) -> Mat {
    let mut s = Mat::zeros(d, d);
    let mut it = vals.iter().copied();
    for i in 0..d {
        for j in i..d {
            let v = it.next().expect("not enough values");
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// `exp(J S)` for a symmetric `S` built from `vals`.
pub fn symplectic_from(k: usize, vals: &[f64]) -> Mat {
    let s = symmetric_from(2 * k, vals);
    expm(&(standard_j(k).as_mat() * s))
}

pub fn values(k: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    let d = 2 * k;
    proptest::collection::vec(-scale..scale, d * (d + 1) / 2)
}

/// Piecewise-constant generator path on `[0, 1]` with `vals` split evenly into pieces.
pub fn generator_path(k: usize, pieces: usize, vals: &[f64]) -> crate::path::SymplecticPath {
    use crate::path::{GeneratorField, SymplecticPath};
    let d = 2 * k;
    let per = d * (d + 1) / 2;
    let mats: Vec<Mat> = (0..pieces).map(|i| symmetric_from(d, &vals[i * per..(i + 1) * per])).collect();
    let breaks = (0..=pieces).map(|i| i as f64 / pieces as f64).collect();
    SymplecticPath::from_generator(k, 1.0, GeneratorField::PiecewiseConstant { breaks, mats }, 16).unwrap()
}

pub fn path_values(k: usize, pieces: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    let d = 2 * k;
    proptest::collection::vec(-scale..scale, pieces * d * (d + 1) / 2)
}
