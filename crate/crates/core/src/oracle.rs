//! Brute-force reference computations.
//!
//! Everything here works on plain `(re, im)` pairs and nested vectors with
//! explicit index loops, sharing no code with the matrix kernel, so the two
//! can be checked against each other.
#![allow(clippy::needless_range_loop)]

use serde::Deserialize;

use crate::error::{Error, Result};

pub type Cx = (f64, f64);

fn mul(a: Cx, b: Cx) -> Cx {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn add(a: Cx, b: Cx) -> Cx {
    (a.0 + b.0, a.1 + b.1)
}

fn conj(a: Cx) -> Cx {
    (a.0, -a.1)
}

fn abs2(a: Cx) -> f64 {
    a.0 * a.0 + a.1 * a.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainValues {
    pub p_unitary: f64,
    pub p_collapse: f64,
    pub deficit: f64,
    /// |Σ_{i≠j} zᵢ·conj(zⱼ)| with zᵢ = W(c,bᵢ)W(bᵢ,a).
    pub cross_terms: f64,
}

pub fn chain(w_ba: &[Cx], w_cb: &[Cx]) -> Result<ChainValues> {
    if w_ba.is_empty() || w_ba.len() != w_cb.len() {
        return Err(Error::Usage("chain needs two non-empty lists of equal length".into()));
    }
    let paths: Vec<Cx> = w_ba.iter().zip(w_cb).map(|(&a, &c)| mul(c, a)).collect();
    let mut sum = (0.0, 0.0);
    let mut p_collapse = 0.0;
    for &z in &paths {
        sum = add(sum, z);
        p_collapse += abs2(z);
    }
    let p_unitary = abs2(sum);
    let mut cross = (0.0, 0.0);
    for (i, &zi) in paths.iter().enumerate() {
        for (j, &zj) in paths.iter().enumerate() {
            if i != j {
                cross = add(cross, mul(zi, conj(zj)));
            }
        }
    }
    Ok(ChainValues { p_unitary, p_collapse, deficit: (p_unitary - p_collapse).abs(), cross_terms: abs2(cross).sqrt() })
}

pub fn density_from_ket(ket: &[Cx]) -> Vec<Vec<Cx>> {
    ket.iter().map(|&a| ket.iter().map(|&b| mul(a, conj(b))).collect()).collect()
}

fn digits_of(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

fn index_of(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

fn check_square(rho: &[Vec<Cx>], dims: &[usize]) -> Result<usize> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Usage("dims must be positive".into()));
    }
    if rho.len() != total || rho.iter().any(|r| r.len() != total) {
        return Err(Error::Usage(format!("matrix must be {total}x{total} for dims {dims:?}")));
    }
    Ok(total)
}

/// Partial trace by direct summation over every pair of global indices that
/// agree on the traced subsystems.
pub fn partial_trace(rho: &[Vec<Cx>], dims: &[usize], keep: &[usize]) -> Result<Vec<Vec<Cx>>> {
    let total = check_square(rho, dims)?;
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Usage(format!("keep index {bad} out of range")));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let side: usize = kept_dims.iter().product();
    let mut out = vec![vec![(0.0, 0.0); side]; side];
    for i in 0..total {
        let di = digits_of(i, dims);
        for j in 0..total {
            let dj = digits_of(j, dims);
            let traced_equal = (0..dims.len()).filter(|k| !keep.contains(k)).all(|k| di[k] == dj[k]);
            if !traced_equal {
                continue;
            }
            let ki: Vec<usize> = keep.iter().map(|&k| di[k]).collect();
            let kj: Vec<usize> = keep.iter().map(|&k| dj[k]).collect();
            let (r, c) = (index_of(&ki, &kept_dims), index_of(&kj, &kept_dims));
            out[r][c] = add(out[r][c], rho[i][j]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityValues {
    pub p_direct: f64,
    pub p_composed: f64,
    pub deviation: f64,
}

/// P(b) against Σᵢ P(b|aᵢ)P(aᵢ) where the aᵢ are the basis states of
/// subsystem `partition` and b is the ray through `target`.
pub fn stability(rho: &[Vec<Cx>], dims: &[usize], partition: usize, target: &[Cx]) -> Result<StabilityValues> {
    let total = check_square(rho, dims)?;
    if partition >= dims.len() {
        return Err(Error::Usage(format!("partition subsystem {partition} out of range")));
    }
    if target.len() != total {
        return Err(Error::Usage(format!("target needs {total} amplitudes")));
    }
    let norm2: f64 = target.iter().map(|&t| abs2(t)).sum();
    if norm2 == 0.0 {
        return Err(Error::Usage("target has zero norm".into()));
    }
    let t: Vec<Cx> = target.iter().map(|&x| (x.0 / norm2.sqrt(), x.1 / norm2.sqrt())).collect();
    let branch = |i: usize| digits_of(i, dims)[partition];
    let mut direct = (0.0, 0.0);
    let mut composed = 0.0;
    for k in 0..dims[partition] {
        let mut weight = 0.0;
        let mut term = (0.0, 0.0);
        for i in 0..total {
            if branch(i) == k {
                weight += rho[i][i].0;
            }
        }
        for i in 0..total {
            for j in 0..total {
                if branch(i) == k && branch(j) == k {
                    term = add(term, mul(mul(conj(t[i]), rho[i][j]), t[j]));
                }
            }
        }
        if weight >= 1e-14 {
            composed += term.0;
        }
    }
    for i in 0..total {
        for j in 0..total {
            direct = add(direct, mul(mul(conj(t[i]), rho[i][j]), t[j]));
        }
    }
    Ok(StabilityValues { p_direct: direct.0, p_composed: composed, deviation: (direct.0 - composed).abs() })
}

/// Oracle input file: a state over `dims`, given as a ket or a density
/// matrix, with entries written as `[re, im]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub ket: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub rho: Option<Vec<Vec<[f64; 2]>>>,
}

impl Fixture {
    pub fn density(&self) -> Result<Vec<Vec<Cx>>> {
        match (&self.ket, &self.rho) {
            (Some(ket), None) => Ok(density_from_ket(&ket.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())),
            (None, Some(rho)) => Ok(rho.iter().map(|r| r.iter().map(|p| (p[0], p[1])).collect()).collect()),
            _ => Err(Error::Usage("fixture needs exactly one of `ket` or `rho`".into())),
        }
    }
}

/// Parses `re`, `re+imi`, `re-imi` or `imi`.
pub fn parse_complex(text: &str) -> Result<Cx> {
    let s = text.trim();
    let bad = || Error::Usage(format!("malformed number `{text}`"));
    let real = |t: &str| t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
    let Some(body) = s.strip_suffix('i') else {
        return Ok((real(s)?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split =
        (1..bytes.len()).rev().find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let im = if k + 1 == body.len() { return Err(bad()) } else { real(&body[k..])? };
            Ok((real(&body[..k])?, im))
        }
        None if body.is_empty() || body == "+" || body == "-" => Err(bad()),
        None => Ok((0.0, real(body)?)),
    }
}

pub fn parse_complex_list(text: &str) -> Result<Vec<Cx>> {
    text.split(',').map(parse_complex).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn mach_zehnder() {
        let v = chain(&[(S, 0.0), (S, 0.0)], &[(S, 0.0), (-S, 0.0)]).unwrap();
        assert!(v.p_unitary.abs() < 1e-15);
        assert!((v.p_collapse - 0.5).abs() < 1e-15);
        assert!((v.cross_terms - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bell_trace() {
        let rho = density_from_ket(&[(S, 0.0), (0.0, 0.0), (0.0, 0.0), (S, 0.0)]);
        let r = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!((r[0][0].0 - 0.5).abs() < 1e-15 && (r[1][1].0 - 0.5).abs() < 1e-15);
        assert_eq!(r[0][1], (0.0, 0.0));
    }

    #[test]
    fn wigner_golden() {
        // 0.6|↑Φ1⟩ + 0.8|↓Φ2⟩ against the symmetric ray
        let mut ket = vec![(0.0, 0.0); 6];
        ket[1] = (0.6, 0.0);
        ket[5] = (0.8, 0.0);
        let mut t = vec![(0.0, 0.0); 6];
        t[1] = (1.0, 0.0);
        t[5] = (1.0, 0.0);
        let v = stability(&density_from_ket(&ket), &[2, 3], 1, &t).unwrap();
        assert!((v.p_direct - 0.98).abs() < 1e-15);
        assert!((v.p_composed - 0.5).abs() < 1e-15);
        assert!((v.deviation - 0.48).abs() < 1e-15);
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), (0.5, 0.0));
        assert_eq!(parse_complex("-0.5+2i").unwrap(), (-0.5, 2.0));
        assert_eq!(parse_complex("1e-3-1e-2i").unwrap(), (1e-3, -1e-2));
        assert_eq!(parse_complex("-3i").unwrap(), (0.0, -3.0));
        for bad in ["", "x", "1+i", "i", "1..2", "nan", "inf"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }
}
