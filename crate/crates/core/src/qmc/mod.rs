//! Seedable low-discrepancy and space-filling designs.
//!
//! Everything here is a pure function of its arguments: the same
//! `(dim, n, seed)` always yields the same matrix, bit for bit.

mod direction_numbers;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

use direction_numbers::{MAX_DEGREE, MAX_DIM, POLY, VINIT};

const BITS: usize = 32;
const TWO_POW_32: f64 = 4294967296.0;

/// Row-major matrix of sample points, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: values.len() });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: row.len() });
            }
            values.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    /// Applies `f` to every entry in place.
    pub fn map_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }
}

/// Streaming Sobol' generator in Gray-code order.
///
/// Scrambling is a random linear matrix scramble (lower-triangular with unit
/// diagonal) followed by a random digital shift, both keyed by the seed.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize, seed: u64, scrambled: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("sobol dimension must be at least 1".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
        }
        let mut directions: Vec<[u32; BITS]> = (0..dim).map(unscrambled_directions).collect();
        let mut state = vec![0u32; dim];
        if scrambled {
            let mut rng = seeding::rng(seeding::mix(seed, 0x5f3c_0b01));
            for (v, shift) in directions.iter_mut().zip(state.iter_mut()) {
                let rows = random_lower_triangular(&mut rng);
                for vk in v.iter_mut() {
                    *vk = apply_linear_scramble(&rows, *vk);
                }
                *shift = rng.random::<u32>();
            }
        }
        Ok(Self { dim, directions, state, index: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the next point into `out` (length `dim`).
    pub fn next_into(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for (o, s) in out.iter_mut().zip(&self.state) {
            *o = f64::from(*s) / TWO_POW_32;
        }
        let c = (!self.index).trailing_zeros() as usize;
        self.index += 1;
        if c < BITS {
            for (s, v) in self.state.iter_mut().zip(&self.directions) {
                *s ^= v[c];
            }
        }
    }

    pub fn take_matrix(&mut self, n: usize) -> SampleMatrix {
        let mut values = vec![0.0; n * self.dim];
        for row in values.chunks_mut(self.dim) {
            self.next_into(row);
        }
        SampleMatrix { rows: n, cols: self.dim, values }
    }
}

fn unscrambled_directions(d: usize) -> [u32; BITS] {
    let mut m = [0u32; BITS];
    if d == 0 {
        m = [1; BITS];
    } else {
        let poly = POLY[d];
        let degree = (32 - poly.leading_zeros() - 1) as usize;
        debug_assert!(degree <= MAX_DEGREE);
        m[..degree].copy_from_slice(&VINIT[d][..degree]);
        for k in degree..BITS {
            let mut value = m[k - degree] ^ (m[k - degree] << degree);
            for j in 1..degree {
                if (poly >> (degree - j)) & 1 == 1 {
                    value ^= m[k - j] << j;
                }
            }
            m[k] = value;
        }
    }
    let mut v = [0u32; BITS];
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = m[k] << (BITS - 1 - k);
    }
    v
}

// Row i (counting from the most significant bit) has a one on the diagonal
// and random bits to its left.
fn random_lower_triangular<R: Rng>(rng: &mut R) -> [u32; BITS] {
    let mut rows = [0u32; BITS];
    for (i, row) in rows.iter_mut().enumerate() {
        let diag = 1u32 << (BITS - 1 - i);
        let above = if i == 0 { 0 } else { !((1u32 << (BITS - i)) - 1) };
        *row = diag | (rng.random::<u32>() & above);
    }
    rows
}

fn apply_linear_scramble(rows: &[u32; BITS], v: u32) -> u32 {
    let mut out = 0u32;
    for (i, row) in rows.iter().enumerate() {
        if (row & v).count_ones() & 1 == 1 {
            out |= 1u32 << (BITS - 1 - i);
        }
    }
    out
}

/// First `n` points of the (optionally scrambled) Sobol' sequence in `[0,1)^dim`.
pub fn sobol(dim: usize, n: usize, seed: u64, scrambled: bool) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    Ok(SobolSequence::new(dim, seed, scrambled)?.take_matrix(n))
}

/// Latin hypercube: one point per stratum `[i/n, (i+1)/n)` in every column.
pub fn latin_hypercube(dim: usize, n: usize, seed: u64) -> Result<SampleMatrix> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidArgument("latin hypercube needs dim >= 1 and n >= 1".into()));
    }
    let mut rng = seeding::rng(seeding::mix(seed, 0x1a7c_4c0b));
    let mut values = vec![0.0; n * dim];
    let mut strata: Vec<usize> = (0..n).collect();
    let width = 1.0 / n as f64;
    for j in 0..dim {
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            let offset: f64 = rng.random();
            // Guard against rounding up into the next stratum.
            let v = ((s as f64 + offset) * width).min((s as f64 + 1.0) * width - f64::EPSILON * 0.5);
            values[i * dim + j] = v.max(s as f64 * width);
        }
    }
    Ok(SampleMatrix { rows: n, cols: dim, values })
}

/// Sobol' points pushed through the standard-normal quantile function.
///
/// A coordinate equal to exactly 0 is moved to `0.5 / n` first so the
/// result is always finite.
pub fn normal_sobol(dim: usize, n: usize, seed: u64, scrambled: bool) -> Result<SampleMatrix> {
    let mut m = sobol(dim, n, seed, scrambled)?;
    let midpoint = 0.5 / n as f64;
    m.map_inplace(|p| {
        let p = if p == 0.0 { midpoint } else { p };
        normal_icdf(p).expect("sobol coordinates lie in [0,1)")
    });
    Ok(m)
}

/// Standard-normal quantile function (Wichura, AS 241).
pub fn normal_icdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain(p));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        horner(&INTERMEDIATE_NUM, r) / horner(&INTERMEDIATE_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

// Coefficients ordered from the highest power down.
const CENTRAL_NUM: [f64; 8] = [
    2509.080_928_730_122_7,
    33_430.575_583_588_128,
    67_265.770_927_008_7,
    45_921.953_931_549_87,
    13_731.693_765_509_461,
    1_971.590_950_306_551_4,
    133.141_667_891_784_38,
    3.387_132_872_796_366_6,
];
const CENTRAL_DEN: [f64; 8] = [
    5_226.495_278_852_546,
    28_729.085_735_721_943,
    39_307.895_800_092_71,
    21_213.794_301_586_596,
    5_394.196_021_424_751,
    687.187_007_492_057_9,
    42.313_330_701_600_91,
    1.0,
];
const INTERMEDIATE_NUM: [f64; 8] = [
    7.745_450_142_783_414e-4,
    0.022_723_844_989_269_184,
    0.241_780_725_177_450_6,
    1.270_458_252_452_368_4,
    3.647_848_324_763_204_5,
    5.769_497_221_460_691,
    4.630_337_846_156_545,
    1.423_437_110_749_683_5,
];
const INTERMEDIATE_DEN: [f64; 8] = [
    1.050_750_071_644_416_8e-9,
    5.475_938_084_995_345e-4,
    0.015_198_666_563_616_457,
    0.148_103_976_427_480_08,
    0.689_767_334_985_1,
    1.676_384_830_183_803_8,
    2.053_191_626_637_759,
    1.0,
];
const FAR_NUM: [f64; 8] = [
    2.010_334_399_292_288e-7,
    2.711_555_568_743_487_6e-5,
    0.001_242_660_947_388_078_4,
    0.026_532_189_526_576_124,
    0.296_560_571_828_504_9,
    1.784_826_539_917_291_3,
    5.463_784_911_164_114,
    6.657_904_643_501_104,
];
const FAR_DEN: [f64; 8] = [
    2.044_263_103_389_939_7e-15,
    1.421_511_758_316_446e-7,
    1.846_318_317_510_054_8e-5,
    7.868_691_311_456_133e-4,
    0.014_875_361_290_850_615,
    0.136_929_880_922_735_8,
    0.599_832_206_555_888,
    1.0,
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard-normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard-normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Row 31 and row 19 of the first 64 unscrambled dimensions, times 32,
    // and the first 16 points of dimension 63 times 16, from scipy.stats.qmc.Sobol.
    const ROW31: [u32; 64] = [
        1, 17, 29, 31, 31, 25, 11, 17, 5, 19, 1, 11, 31, 7, 21, 27, 7, 13, 19, 23, 13, 7, 1, 9, 27,
        19, 3, 1, 13, 25, 23, 13, 5, 23, 1, 13, 3, 31, 31, 11, 27, 21, 25, 19, 19, 1, 15, 15, 11, 23,
        17, 27, 11, 29, 3, 17, 25, 11, 9, 19, 31, 23, 31, 25,
    ];
    const ROW19: [u32; 64] = [
        11, 23, 23, 13, 1, 23, 9, 19, 7, 13, 11, 5, 13, 13, 3, 25, 17, 11, 17, 25, 15, 21, 11, 11, 9,
        13, 29, 19, 31, 3, 21, 19, 27, 21, 7, 23, 17, 25, 25, 5, 21, 3, 7, 9, 9, 15, 17, 1, 1, 25, 7,
        9, 9, 15, 13, 19, 11, 21, 23, 5, 9, 25, 13, 11,
    ];
    const DIM63: [u32; 16] = [0, 8, 12, 4, 2, 10, 14, 6, 11, 3, 7, 15, 9, 1, 5, 13];

    #[test]
    fn unscrambled_matches_reference_sequence() {
        let m = sobol(64, 32, 0, false).unwrap();
        for j in 0..64 {
            assert_eq!(m.get(31, j) * 32.0, f64::from(ROW31[j]), "row 31 dim {j}");
            assert_eq!(m.get(19, j) * 32.0, f64::from(ROW19[j]), "row 19 dim {j}");
        }
        for i in 0..16 {
            assert_eq!(m.get(i, 63) * 16.0, f64::from(DIM63[i]));
        }
    }

    #[test]
    fn first_dimension_is_van_der_corput_in_gray_order() {
        let m = sobol(1, 4, 123, false).unwrap();
        assert_eq!(m.column(0), vec![0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn too_many_dimensions_is_rejected() {
        assert!(matches!(sobol(65, 4, 0, true), Err(Error::UnsupportedDimension { dim: 65, .. })));
    }

    #[test]
    fn scrambled_points_stay_in_unit_cube() {
        let m = sobol(3, 8, 7, true).unwrap();
        assert_eq!(m.values().len(), 24);
        assert!(m.values().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn scrambling_depends_on_seed() {
        let a = sobol(2, 16, 1, true).unwrap();
        let b = sobol(2, 16, 2, true).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, sobol(2, 16, 1, true).unwrap());
    }

    #[test]
    fn stream_continues_the_batch_sequence() {
        let batch = sobol(4, 20, 11, true).unwrap();
        let mut seq = SobolSequence::new(4, 11, true).unwrap();
        let first = seq.take_matrix(7);
        let rest = seq.take_matrix(13);
        assert_eq!(&batch.values()[..28], first.values());
        assert_eq!(&batch.values()[28..], rest.values());
    }

    #[test]
    fn latin_hypercube_small_cases() {
        let m = latin_hypercube(1, 1, 0).unwrap();
        assert!((0.0..1.0).contains(&m.get(0, 0)));
        assert_eq!(latin_hypercube(4, 20, 3).unwrap(), latin_hypercube(4, 20, 3).unwrap());
        let m = latin_hypercube(2, 5, 1).unwrap();
        for j in 0..2 {
            let mut strata: Vec<usize> = m.column(j).iter().map(|v| (v * 5.0) as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn icdf_reference_values() {
        assert_eq!(normal_icdf(0.5).unwrap(), 0.0);
        assert!((normal_icdf(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_icdf(0.841345).unwrap() - 1.0).abs() < 1e-5);
        assert!((normal_icdf(0.841345).unwrap() - 1.000_001_049_431_045).abs() < 1e-12);
        assert!(matches!(normal_icdf(0.0), Err(Error::ProbabilityDomain(_))));
        assert!(normal_icdf(1.0).is_err());
        assert!(normal_icdf(f64::NAN).is_err());
    }

    #[test]
    fn icdf_agrees_with_statrs_across_the_range() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::standard();
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            assert!((normal_icdf(p).unwrap() - n.inverse_cdf(p)).abs() < 1e-9, "p = {p}");
        }
        for &p in &[1e-300, 1e-100, 1e-20, 1e-10, 1e-5, 1.0 - 1e-10] {
            let z = normal_icdf(p).unwrap();
            let back = n.cdf(z);
            assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn cdf_and_pdf_reference_values() {
        let v = normal_cdf(1.0) + normal_pdf(1.0);
        assert!((v - 1.083_315_470_587_686_4).abs() < 1e-14, "{v:e}");
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn normal_sobol_moments() {
        let m = normal_sobol(2, 4, 0, false).unwrap();
        assert!(m.values().iter().all(|v| v.is_finite()));
        let m = normal_sobol(1, 1 << 10, 5, true).unwrap();
        let mean = m.values().iter().sum::<f64>() / 1024.0;
        assert!(mean.abs() < 0.05);
        let m = normal_sobol(1, 1 << 14, 9, true).unwrap();
        let n = m.rows() as f64;
        let mean = m.values().iter().sum::<f64>() / n;
        let var = m.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(var > 0.97 && var < 1.03, "variance {var}");
    }
}
