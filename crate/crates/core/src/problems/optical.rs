use std::f64::consts::{LN_10, TAU};

/// Combined mass of table and equipment, kg.
pub const TOTAL_MASS: f64 = 220.0;
/// Spring constant range, N/mm.
pub const SPRING_RANGE: (f64, f64) = (12.0, 50.0);
/// Damping coefficient range, N·s/mm.
pub const DAMPING_RANGE: (f64, f64) = (1.0, 10.0);
/// Floor vibration frequency range, Hz.
pub const FREQUENCY_RANGE_HZ: (f64, f64) = (1.0, 100.0);
/// Spring constant used by the first two-step phase, N/mm.
pub const SPRING_STEP1: f64 = 31.0;

/// Steady-state amplitude ratio B/A of table to floor vibration, SI units
/// (k in N/m, c in N·s/m, ω in rad/s, m in kg).
pub fn optical_table_ratio(k: f64, c: f64, omega: f64, m_total: f64) -> f64 {
    let cw2 = (c * omega).powi(2);
    let stiff = 4.0 * k - m_total * omega * omega;
    ((16.0 * k * k + cw2) / (stiff * stiff + cw2)).sqrt()
}

/// The optical-table objective −log₁₀(B/A) on the normalized cube:
/// k and c linear in their ranges, the environment linear in log₁₀ ω.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTable {
    pub mass: f64,
}

impl Default for OpticalTable {
    fn default() -> Self {
        Self { mass: TOTAL_MASS }
    }
}

fn lerp((lo, hi): (f64, f64), t: f64) -> f64 {
    lo + t * (hi - lo)
}

fn log_omega_range() -> (f64, f64) {
    ((TAU * FREQUENCY_RANGE_HZ.0).log10(), (TAU * FREQUENCY_RANGE_HZ.1).log10())
}

impl OpticalTable {
    /// Normalized (k, c, u) to SI (k N/m, c N·s/m, ω rad/s).
    pub fn to_si(&self, q: &[f64]) -> (f64, f64, f64) {
        let k = lerp(SPRING_RANGE, q[0]) * 1e3;
        let c = lerp(DAMPING_RANGE, q[1]) * 1e3;
        let omega = 10f64.powf(lerp(log_omega_range(), q[2]));
        (k, c, omega)
    }

    /// Physical coordinates (k N/mm, c N·s/mm, log₁₀ ω) of a normalized point.
    pub fn to_physical(&self, q: &[f64]) -> Vec<f64> {
        vec![lerp(SPRING_RANGE, q[0]), lerp(DAMPING_RANGE, q[1]), lerp(log_omega_range(), q[2])]
    }

    pub fn physical_bounds(&self) -> Vec<(f64, f64)> {
        vec![SPRING_RANGE, DAMPING_RANGE, log_omega_range()]
    }

    pub fn normalized_spring(k_n_per_mm: f64) -> f64 {
        (k_n_per_mm - SPRING_RANGE.0) / (SPRING_RANGE.1 - SPRING_RANGE.0)
    }

    pub fn eval(&self, q: &[f64]) -> f64 {
        let (k, c, omega) = self.to_si(q);
        -optical_table_ratio(k, c, omega, self.mass).log10()
    }

    pub fn eval_with_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let (k, c, w) = self.to_si(q);
        let m = self.mass;
        let cw2 = (c * w).powi(2);
        let stiff = 4.0 * k - m * w * w;
        let num = 16.0 * k * k + cw2;
        let den = stiff * stiff + cw2;
        // objective = −(ln num − ln den) / (2 ln 10)
        let f = -0.5 / LN_10;
        let dk = f * (32.0 * k / num - 8.0 * stiff / den);
        let dc = f * (2.0 * c * w * w / num - 2.0 * c * w * w / den);
        let dw = f * (2.0 * c * c * w / num - (-4.0 * m * w * stiff + 2.0 * c * c * w) / den);
        let (lw_lo, lw_hi) = log_omega_range();
        grad[0] = dk * (SPRING_RANGE.1 - SPRING_RANGE.0) * 1e3;
        grad[1] = dc * (DAMPING_RANGE.1 - DAMPING_RANGE.0) * 1e3;
        grad[2] = dw * w * LN_10 * (lw_hi - lw_lo);
        f * (num.ln() - den.ln())
    }
}
