#![allow(dead_code)]

pub mod fuzz;

use num_complex::Complex64 as C64;
use rand_core::RngCore;
use relfacts::rng::{uniform, SplitMix64};
use relfacts::tensor::{dagger, CMatrix, CVector};

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::new(seed)
}

pub fn gauss<R: RngCore>(r: &mut R) -> f64 {
    // Box-Muller
    let u1 = 1.0 - uniform(r);
    let u2 = uniform(r);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_complex<R: RngCore>(r: &mut R) -> C64 {
    C64::new(gauss(r), gauss(r))
}

pub fn random_matrix<R: RngCore>(r: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::new(rows, cols, (0..rows * cols).map(|_| random_complex(r)).collect()).unwrap()
}

pub fn random_hermitian<R: RngCore>(r: &mut R, n: usize) -> CMatrix {
    let m = random_matrix(r, n, n);
    m.add(&dagger(&m)).unwrap().scale(C64::new(0.5, 0.0))
}

pub fn random_ket<R: RngCore>(r: &mut R, n: usize) -> CVector {
    CVector::new((0..n).map(|_| random_complex(r)).collect()).unwrap().normalized().unwrap()
}

/// ρ = M M† / tr(M M†)
pub fn random_density<R: RngCore>(r: &mut R, n: usize) -> CMatrix {
    let m = random_matrix(r, n, n);
    let p = m.matmul(&dagger(&m)).unwrap();
    let tr = p.trace().re;
    p.scale(C64::new(1.0 / tr, 0.0))
}

pub fn to_pairs(m: &CMatrix) -> Vec<Vec<(f64, f64)>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|z| (z.re, z.im)).collect()).collect()
}

pub fn ket_pairs(v: &CVector) -> Vec<(f64, f64)> {
    v.entries().iter().map(|z| (z.re, z.im)).collect()
}

pub fn max_diff_pairs(m: &CMatrix, pairs: &[Vec<(f64, f64)>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in pairs.iter().enumerate() {
        for (j, &(re, im)) in row.iter().enumerate() {
            worst = worst.max((m[(i, j)] - C64::new(re, im)).norm());
        }
    }
    worst
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn corpus() -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}
