//! Orbit geometry for the signed multi-bump construction.
//!
//! The ambient space splits as ℝ^N ≡ ℂ×ℂ×ℝ^(N-4). A cyclic generator
//! rotates both complex lines by 2π/m at once, and an involution swaps
//! them while flipping the sign character. The orbit of (1,0,0) is then
//! m "positive" points on the first unit circle plus m "negative" points
//! on the second, and every pair distance is known in closed form: chords
//! 2 sin(πk/m) inside a block, √2 across blocks. That collapses the sign
//! of the leading bump-bump interaction into an explicit trigonometric
//! sum S(m,N), evaluated here next to the coarser closed-form bounds that
//! are usually quoted for it.

use serde::Serialize;

use crate::error::{Error, Result};

/// One element of the order-2m symmetry group: a rotation index modulo m,
/// optionally composed with the plane swap. Rotation and swap commute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupElement {
    pub rotation: u32,
    pub swap: bool,
}

impl GroupElement {
    /// Sign character: +1 on pure rotations, −1 on swapping elements.
    pub fn phi(&self) -> f64 {
        if self.swap {
            -1.0
        } else {
            1.0
        }
    }

    /// Applies the element to a point of ℝ^N, N ≥ 5. Coordinates (0,1)
    /// and (2,3) are the two complex lines; the rest is fixed.
    pub fn apply(&self, m: u32, x: &[f64]) -> Vec<f64> {
        assert!(x.len() >= 5, "need N >= 5 coordinates");
        let theta = 2.0 * std::f64::consts::PI * self.rotation as f64 / m as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let mut out = x.to_vec();
        let rot = |a: f64, b: f64| (c * a - s * b, s * a + c * b);
        let (p0, p1) = rot(x[0], x[1]);
        let (q0, q1) = rot(x[2], x[3]);
        if self.swap {
            out[0] = q0;
            out[1] = q1;
            out[2] = p0;
            out[3] = p1;
        } else {
            out[0] = p0;
            out[1] = p1;
            out[2] = q0;
            out[3] = q1;
        }
        out
    }
}

/// All 2m group elements, rotations first.
pub fn group_elements(m: u32) -> Vec<GroupElement> {
    let mut out = Vec::with_capacity(2 * m as usize);
    for swap in [false, true] {
        for rotation in 0..m {
            out.push(GroupElement { rotation, swap });
        }
    }
    out
}

/// The 2m-point orbit of (1,0,0) with its sign character.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitConfig {
    pub m: u32,
    pub n: u32,
    /// Unit vectors in ℝ^N; entries 0..m on the first complex line,
    /// entries m..2m on the second.
    pub points: Vec<Vec<f64>>,
    /// +1 for the first block, −1 for the second.
    pub signs: Vec<f64>,
}

impl OrbitConfig {
    /// Euclidean distance between orbit points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(self.points[j].iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Closed-form pair distance: a chord of the shared circle inside a
    /// block, √2 across blocks, by orthogonality of the two planes.
    pub fn closed_form_distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let m = self.m as usize;
        if (i < m) == (j < m) {
            let k = (i % m) as i64 - (j % m) as i64;
            2.0 * (std::f64::consts::PI * k as f64 / self.m as f64).sin().abs()
        } else {
            std::f64::consts::SQRT_2
        }
    }

    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let len = self.points.len();
        (0..len)
            .map(|i| (0..len).map(|j| self.distance(i, j)).collect())
            .collect()
    }
}

/// Builds the orbit and re-verifies its geometric invariants numerically.
pub fn orbit_points(m: u32, n: u32) -> Result<OrbitConfig> {
    if m < 2 {
        return Err(Error::Domain {
            operation: "orbit_points",
            message: format!("need m >= 2 copies per block, got {m}"),
        });
    }
    if n < 5 {
        return Err(Error::Domain {
            operation: "orbit_points",
            message: format!("need ambient dimension N >= 5, got {n}"),
        });
    }
    let dim = n as usize;
    let mut points = Vec::with_capacity(2 * m as usize);
    let mut signs = Vec::with_capacity(2 * m as usize);
    for block in 0..2 {
        for i in 0..m {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            let mut p = vec![0.0; dim];
            p[2 * block] = theta.cos();
            p[2 * block + 1] = theta.sin();
            points.push(p);
            signs.push(if block == 0 { 1.0 } else { -1.0 });
        }
    }
    let config = OrbitConfig { m, n, points, signs };
    for (i, p) in config.points.iter().enumerate() {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return Err(Error::InvariantViolation {
                message: format!("orbit point {i} has norm {norm}, expected 1"),
            });
        }
    }
    for i in 0..config.points.len() {
        for j in 0..config.points.len() {
            if i == j {
                continue;
            }
            let d = config.distance(i, j);
            let expected = config.closed_form_distance(i, j);
            if (d - expected).abs() > 1e-13 {
                return Err(Error::InvariantViolation {
                    message: format!(
                        "distance ({i},{j}) = {d} deviates from closed form {expected}"
                    ),
                });
            }
        }
    }
    Ok(config)
}

/// Exact leading interaction sign quantity and its verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignCondition {
    pub value: f64,
    pub holds: bool,
}

/// S(m,N) = m Σ_{k=1}^{m−1} (2 sin(πk/m))^{2−N} − m²(√2)^{2−N}.
///
/// Positive exactly when the attracting same-sign interactions outweigh
/// the repelling cross-block ones at leading order in the separation.
pub fn sign_condition_exact(m: u32, n: u32) -> SignCondition {
    debug_assert!(m >= 2 && n >= 5);
    let e = 2 - n as i32;
    let mf = m as f64;
    let same: f64 = (1..m)
        .map(|k| (2.0 * (std::f64::consts::PI * k as f64 / mf).sin()).powi(e))
        .sum();
    let value = mf * same - mf * mf * std::f64::consts::SQRT_2.powi(e);
    SignCondition { value, holds: value > 0.0 }
}

/// The two coarser closed-form sufficient quantities, in the same units
/// as [`sign_condition_exact`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCondition {
    /// 2m(2 sin(π/m))^{2−N} − m²(√2)^{2−N}: nearest neighbors only.
    pub neighbor_value: f64,
    pub neighbor_holds: bool,
    /// m[2(2π/m)^{2−N} − m(√2)^{2−N}]: chord replaced by arc length.
    pub sin_free_value: f64,
    pub sin_free_holds: bool,
}

pub fn sign_condition_bound(m: u32, n: u32) -> BoundCondition {
    debug_assert!(m >= 2 && n >= 5);
    let e = 2 - n as i32;
    let mf = m as f64;
    let cross = mf * std::f64::consts::SQRT_2.powi(e);
    let neighbor_value =
        mf * (2.0 * (2.0 * (std::f64::consts::PI / mf).sin()).powi(e) - cross);
    let sin_free_value =
        mf * (2.0 * (2.0 * std::f64::consts::PI / mf).powi(e) - cross);
    BoundCondition {
        neighbor_value,
        neighbor_holds: neighbor_value > 0.0,
        sin_free_value,
        sin_free_holds: sin_free_value >= 0.0,
    }
}

/// ψ(N) = √2·π·(π/√2)^{1/(N−3)}, the closed-form copy-count threshold:
/// the sin-free bound holds exactly when m ≥ ψ(N).
pub fn psi_threshold(n: u32) -> Result<f64> {
    if n <= 3 {
        return Err(Error::Domain {
            operation: "psi_threshold",
            message: format!("threshold needs N >= 4, got {n}"),
        });
    }
    let base = std::f64::consts::PI / std::f64::consts::SQRT_2;
    Ok(std::f64::consts::SQRT_2 * std::f64::consts::PI * base.powf(1.0 / (n as f64 - 3.0)))
}

/// Least m with a positive exact sign condition.
pub fn m_min_exact(n: u32) -> Result<u32> {
    if n < 5 {
        return Err(Error::Domain {
            operation: "m_min_exact",
            message: format!("need N >= 5, got {n}"),
        });
    }
    for m in 2..=1000 {
        if sign_condition_exact(m, n).holds {
            return Ok(m);
        }
    }
    Err(Error::SearchFailure {
        operation: "m_min_exact",
        message: format!("no m <= 1000 satisfies the exact sign condition for N = {n}"),
    })
}

/// One row of the copy-count threshold table for dimension N.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdRow {
    pub n: u32,
    /// Least m certified by the exact condition.
    pub m_min: u32,
    /// Energy bound constant 2·m_min, as in the bound 2m·c₀.
    pub theorem_constant: u32,
    pub psi: f64,
    pub ceil_psi: u32,
    /// Set when the closed-form threshold would demand more copies than
    /// the exact condition does.
    pub discrepancy: bool,
}

pub fn threshold_row(n: u32) -> Result<ThresholdRow> {
    let m_min = m_min_exact(n)?;
    let psi = psi_threshold(n)?;
    let ceil_psi = psi.ceil() as u32;
    Ok(ThresholdRow {
        n,
        m_min,
        theorem_constant: 2 * m_min,
        psi,
        ceil_psi,
        discrepancy: ceil_psi != m_min,
    })
}
