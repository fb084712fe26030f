use crate::error::{Error, Result};
use crate::qmc::{normal_cdf, normal_pdf};

const SLOPE_MERGE_TOL: f64 = 1e-12;

/// Lines `a_i + b_i·z` of a standard-normal variable `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

impl AffineFamily {
    pub fn new(intercepts: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if intercepts.is_empty() {
            return Err(Error::InvalidArgument("affine family needs at least one line".into()));
        }
        if intercepts.len() != slopes.len() {
            return Err(Error::DimensionMismatch { expected: intercepts.len(), got: slopes.len() });
        }
        if intercepts.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("affine family entries must be finite".into()));
        }
        Ok(Self { intercepts, slopes })
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.intercepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intercepts.is_empty()
    }
}

/// `E[max_i (a_i + b_i Z)]` for `Z ~ N(0, 1)`, computed exactly.
pub fn expected_max_affine(fam: &AffineFamily) -> f64 {
    let top = fam.intercepts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + expected_max_increment(&fam.intercepts, &fam.slopes, None)
}

/// `E[max_i (a_i + b_i Z)] − max_i a_i`, which is nonnegative by construction.
///
/// When `grad_slopes` is given it receives `∂/∂b_i` of the expectation:
/// `φ(c_start) − φ(c_end)` over the interval where line `i` is the maximum,
/// zero for lines never on top.
pub(crate) fn expected_max_increment(a: &[f64], b: &[f64], grad_slopes: Option<&mut [f64]>) -> f64 {
    let m = a.len();
    if m == 1 {
        if let Some(g) = grad_slopes {
            g[0] = 0.0;
        }
        return 0.0;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| b[i].total_cmp(&b[j]).then(a[i].total_cmp(&a[j])).then(i.cmp(&j)));

    // Merge (near-)equal slopes, keeping the larger intercept.
    let mut lines: Vec<usize> = Vec::with_capacity(m);
    for &i in &order {
        if let Some(&last) = lines.last() {
            if (b[i] - b[last]).abs() <= SLOPE_MERGE_TOL {
                if a[i] >= a[last] {
                    *lines.last_mut().expect("nonempty") = i;
                }
                continue;
            }
        }
        lines.push(i);
    }

    // Upper envelope with increasing slopes; `start[k]` is where line k takes over.
    let mut env: Vec<usize> = Vec::with_capacity(lines.len());
    let mut start: Vec<f64> = Vec::with_capacity(lines.len());
    for &i in &lines {
        loop {
            let Some(&top) = env.last() else {
                env.push(i);
                start.push(f64::NEG_INFINITY);
                break;
            };
            let c = (a[top] - a[i]) / (b[i] - b[top]);
            if c <= *start.last().expect("nonempty") {
                env.pop();
                start.pop();
            } else {
                env.push(i);
                start.push(c);
                break;
            }
        }
    }

    let mut inc = 0.0;
    for k in 1..env.len() {
        let c = start[k];
        inc += (b[env[k]] - b[env[k - 1]]) * upper_tail_kernel(-c.abs());
    }
    if let Some(g) = grad_slopes {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in env.iter().enumerate() {
            let lo = start[k];
            let hi = if k + 1 < env.len() { start[k + 1] } else { f64::INFINITY };
            g[i] = pdf_ext(lo) - pdf_ext(hi);
        }
    }
    inc
}

fn pdf_ext(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        normal_pdf(z)
    }
}

/// `f(z) = zΦ(z) + φ(z)`, clamped at zero against roundoff in the far tail.
fn upper_tail_kernel(z: f64) -> f64 {
    (z * normal_cdf(z) + normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ema(a: &[f64], b: &[f64]) -> f64 {
        expected_max_affine(&AffineFamily::new(a.to_vec(), b.to_vec()).unwrap())
    }

    #[test]
    fn analytic_values() {
        assert_eq!(ema(&[3.0], &[5.0]), 3.0);
        assert!((ema(&[0.0, 0.0], &[-1.0, 1.0]) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((ema(&[1.0, 0.0], &[0.0, 1.0]) - 1.083_315_470_587_686_4).abs() < 1e-14);
    }

    #[test]
    fn duplicates_and_dominated_lines() {
        let base = ema(&[0.2, -0.1, 0.4], &[0.5, -1.0, 2.0]);
        assert_eq!(ema(&[0.2, -0.1, 0.4, 0.2], &[0.5, -1.0, 2.0, 0.5]), base);
        // Parallel to an existing line but lower: dominated everywhere.
        assert_eq!(ema(&[0.2, -0.1, 0.4, 0.1], &[0.5, -1.0, 2.0, 0.5]), base);
        // Never on top: passes far below the envelope.
        let with_low = ema(&[0.2, -0.1, 0.4, -50.0], &[0.5, -1.0, 2.0, 0.7]);
        assert!((with_low - base).abs() < 1e-15);
    }

    #[test]
    fn equal_slopes_give_max_intercept() {
        assert_eq!(ema(&[0.3, 1.7, -2.0], &[0.8, 0.8, 0.8]), 1.7);
    }

    #[test]
    fn slope_gradient_matches_finite_differences() {
        let a = [0.1, 0.5, -0.3, 0.2];
        let b = [-0.7, 0.2, 1.4, 0.6];
        let mut g = [0.0; 4];
        expected_max_increment(&a, &b, Some(&mut g));
        for i in 0..4 {
            let h = 1e-6;
            let mut bp = b;
            let mut bm = b;
            bp[i] += h;
            bm[i] -= h;
            let fd = (ema(&a, &bp) - ema(&a, &bm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn rejects_bad_families() {
        assert!(AffineFamily::new(vec![], vec![]).is_err());
        assert!(AffineFamily::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(AffineFamily::new(vec![f64::NAN], vec![1.0]).is_err());
    }
}
