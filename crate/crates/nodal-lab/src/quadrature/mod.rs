//! Integrals over ℝ^N of products of radial kernels, reduced by symmetry.
//!
//! Everything the energy expansion needs falls into four shapes:
//!
//! * one radial kernel: N-dim integral reduces to a weighted 1D integral,
//! * two kernels with distinct centers: axial symmetry about the line through
//!   the centers reduces to a 2D integral,
//! * three kernels: the problem is invariant under rotations fixing the plane
//!   of the centers, leaving a 3D integral with transverse weight t^(N-3),
//! * arbitrary products (no usable symmetry): seeded importance-sampled
//!   Monte Carlo in full dimension, see [`mc`].
//!
//! Kernels are radial profiles passed as closures; callers also state the
//! power-law decay exponent of each kernel so proposals and tail handling can
//! be validated. Deterministic estimates carry a quadrature error bound,
//! Monte Carlo estimates a standard error.

pub mod mc;
pub(crate) mod quad1d;

use crate::error::{Error, Result};
use quad1d::{adaptive, adaptive_real_line, adaptive_semi_infinite, QuadOpts};
use serde::Serialize;
use std::cell::Cell;
use std::f64::consts::PI;

pub use mc::{mc_full_integral, McOpts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Radial1D,
    Reduced2D,
    Reduced3D,
    MonteCarlo,
}

/// An integral value with an error bound and a cost record.
///
/// For deterministic methods `abs_error` is a quadrature error bound; for
/// Monte Carlo it is one standard error of the stratified estimator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub abs_error: f64,
    pub n_evals: u64,
    pub method: Method,
}

impl IntegralEstimate {
    pub fn scaled(&self, c: f64) -> IntegralEstimate {
        IntegralEstimate {
            value: c * self.value,
            abs_error: c.abs() * self.abs_error,
            ..*self
        }
    }
}

/// Surface area |S^(n-1)| of the unit sphere in ℝ^n.
///
/// Uses the closed form 2 π^(n/2) / Γ(n/2) with the half-integer gamma
/// recursion, exact for the integer dimensions used here.
pub fn sphere_area(n: u32) -> f64 {
    assert!(n >= 1);
    // gamma(n/2): integer or half-integer argument.
    let g = if n % 2 == 0 {
        let k = (n / 2) as usize;
        let mut acc = 1.0f64;
        for j in 1..k {
            acc *= j as f64;
        }
        acc
    } else {
        // gamma(1/2 + k) = sqrt(pi) * (2k-1)!! / 2^k
        let k = ((n - 1) / 2) as usize;
        let mut acc = PI.sqrt();
        for j in 1..=k {
            acc *= (2 * j - 1) as f64 / 2.0;
        }
        acc
    };
    2.0 * PI.powf(n as f64 / 2.0) / g
}

fn validate_decay(operation: &'static str, name: &str, decay: f64, min: f64) -> Result<()> {
    if !(decay > min) {
        return Err(Error::Domain {
            operation,
            message: format!(
                "kernel {name} decays like r^-{decay}, need exponent > {min} for convergence"
            ),
        });
    }
    Ok(())
}

/// ∫_{ℝ^N} g(|x|) dx for a radial kernel with known power-law tail.
///
/// Splits at `r_cut`: adaptive quadrature of |S^(N-1)| g(r) r^(N-1) on
/// [0, r_cut], plus the analytic tail of the pure power g(r_cut)(r/r_cut)^-e,
/// namely |S^(N-1)| g(r_cut) r_cut^N / (e - N). The cut is pushed out until
/// the tail term is below tolerance, so the power-law model only ever
/// contributes a correction-sized term.
pub fn radial_integral<G: Fn(f64) -> f64>(
    g: G,
    n: u32,
    decay_exponent: f64,
    rel_tol: f64,
) -> Result<IntegralEstimate> {
    if n < 5 {
        return Err(Error::invalid("n", n, "dimension must be >= 5"));
    }
    validate_decay("radial_integral", "g", decay_exponent, n as f64)?;
    let area = sphere_area(n);
    let nf = n as f64;

    let mut r_cut = 32.0f64;
    let mut best: Option<(QuadResultLike, f64)> = None;
    for _ in 0..8 {
        let mut evals: u64 = 0;
        let mut integrand = |r: f64| {
            evals += 1;
            g(r) * r.powi(n as i32 - 1)
        };
        let breaks = [0.0, 1.0, r_cut.sqrt(), r_cut];
        let body = adaptive(&mut integrand, &breaks, QuadOpts::rel(rel_tol * 0.5))?;
        let tail = area * g(r_cut) * r_cut.powf(nf) / (decay_exponent - nf);
        let value = area * body.value + tail;
        let ok = tail.abs() <= rel_tol * 0.5 * value.abs().max(1e-300);
        best = Some((
            QuadResultLike {
                value,
                // Tail model error is bounded by the tail itself.
                abs_error: area * body.abs_error + tail.abs(),
                n_evals: body.n_evals.max(evals),
            },
            r_cut,
        ));
        if ok {
            break;
        }
        r_cut *= 4.0;
    }
    let (r, _) = best.unwrap();
    Ok(IntegralEstimate {
        value: r.value,
        abs_error: r.abs_error,
        n_evals: r.n_evals,
        method: Method::Radial1D,
    })
}

struct QuadResultLike {
    value: f64,
    abs_error: f64,
    n_evals: u64,
}

/// ∫_{ℝ^N} gA(|x|) gB(|x - y|) dx with |y| = separation.
///
/// Axial symmetry about y reduces the integral to
///
/// ```text
///   |S^(N-2)| ∫_0^∞ gA(r) r^(N-1) [ ∫ gB(τ) w(τ; r, s) dτ ] dr,
///   w = τ {[(r+s)^2 - τ^2][τ^2 - (r-s)^2]}^((N-3)/2) / [(2rs)^(N-3) r s],
/// ```
///
/// where τ = |x - y| runs over [|r-s|, r+s]. Integrating the inner variable
/// in τ rather than the polar angle keeps the second kernel sampled on its
/// own radial scale, so a bump of width O(1) at separation 100 costs the
/// same as at separation 2. The weight is evaluated in factored form; no
/// cancellation occurs near the endpoints.
pub fn two_center_integral<GA, GB>(
    g_a: GA,
    g_b: GB,
    decay_a: f64,
    decay_b: f64,
    separation: f64,
    n: u32,
    rel_tol: f64,
) -> Result<IntegralEstimate>
where
    GA: Fn(f64) -> f64,
    GB: Fn(f64) -> f64,
{
    if n < 5 {
        return Err(Error::invalid("n", n, "dimension must be >= 5"));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::invalid("separation", separation, "must be finite and >= 0"));
    }
    let nf = n as f64;
    validate_decay("two_center_integral", "gA*gB", decay_a + decay_b, nf)?;

    if separation == 0.0 {
        // Coincident centers: plain radial integral of the product.
        let combined = decay_a + decay_b;
        return Ok(IntegralEstimate {
            method: Method::Reduced2D,
            ..radial_integral(|r| g_a(r) * g_b(r), n, combined, rel_tol)?
        });
    }

    let s = separation;
    let half_pow = (n as i32 - 3) as f64 / 2.0;
    let area = sphere_area(n - 1);
    let evals = Cell::new(0u64);
    let inner_tol = (rel_tol * 0.25).max(1e-13);

    let outer_integrand = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let lo = (r - s).abs();
        let hi = r + s;
        let width = hi - lo;
        if width <= 0.0 {
            return 0.0;
        }
        let ga = g_a(r);
        if ga == 0.0 {
            return 0.0;
        }
        let denom = (2.0 * r * s).powf(nf - 3.0) * (r * s);
        let mut f = |tau: f64| {
            evals.set(evals.get() + 1);
            let p1 = (hi - tau) * (hi + tau);
            let p2 = (tau - lo) * (tau + lo);
            if p1 <= 0.0 || p2 <= 0.0 {
                return 0.0;
            }
            g_b(tau) * (p1 * p2).powf(half_pow) * tau / denom
        };
        // Seed panels on the scale of gB (width O(1) near tau = lo) plus an
        // even split, then refine adaptively.
        let mut breaks = vec![lo];
        for step in [0.02f64, 0.2, 1.0, 5.0] {
            let b = lo + width * (step / 6.0).min(1.0);
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
        breaks.push(lo + 0.5 * width);
        breaks.push(hi);
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        breaks.dedup_by(|x, y| (*x - *y) == 0.0);
        let inner = adaptive(
            &mut f,
            &breaks,
            QuadOpts::rel(inner_tol).with_max_panels(600),
        )
        .map(|q| q.value)
        .unwrap_or(f64::NAN);
        ga * r.powi(n as i32 - 1) * inner
    };

    let mut wrapped = |r: f64| outer_integrand(r);
    let seeds = [0.5, 1.0, 0.5 * s, s - 1.0, s, s + 1.0, 2.0 * s];
    let outer = adaptive_semi_infinite(
        &mut wrapped,
        0.0,
        s.max(1.0),
        &seeds,
        QuadOpts::rel(rel_tol * 0.5).with_max_panels(2000),
    )?;
    if !outer.value.is_finite() {
        return Err(Error::QuadratureFailure {
            requested: rel_tol,
            achieved: f64::INFINITY,
            n_evals: evals.get(),
        });
    }
    Ok(IntegralEstimate {
        value: area * outer.value,
        abs_error: area * outer.abs_error * 2.0,
        n_evals: evals.get(),
        method: Method::Reduced2D,
    })
}

/// A radial kernel bundled with its stated power-law decay exponent.
pub struct Kernel<'a> {
    pub g: &'a dyn Fn(f64) -> f64,
    pub decay: f64,
}

/// ∫_{ℝ^N} g1(|x-c1|) g2(|x-c2|) g3(|x-c3|) dx.
///
/// Rotations fixing the plane of the centers reduce this to a 3D integral:
/// coordinates (u, v) in the plane and the transverse radius t with weight
/// |S^(N-3)| t^(N-3). The (u, v) integrals are adaptive on a compactified
/// line; the t integral uses a fixed composite Kronrod rule on a mapped
/// grid, which is exact enough for the smooth monotone tails that occur
/// here and keeps nested adaptivity bounded.
///
/// Kernels must be nonnegative: the nested relative error control assumes
/// no cancellation between regions. Collinear centers (degenerate plane)
/// fall back to the axial reduction, one dimension lower.
pub fn three_center_integral(
    kernels: [Kernel<'_>; 3],
    centers: [&[f64]; 3],
    n: u32,
    rel_tol: f64,
) -> Result<IntegralEstimate> {
    if n < 5 {
        return Err(Error::invalid("n", n, "dimension must be >= 5"));
    }
    let nf = n as f64;
    let total_decay: f64 = kernels.iter().map(|k| k.decay).sum();
    validate_decay("three_center_integral", "g1*g2*g3", total_decay, nf)?;
    for c in &centers {
        if c.len() != n as usize {
            return Err(Error::invalid(
                "centers",
                c.len(),
                format!("each center must have dimension {n}"),
            ));
        }
    }

    let d = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let d12 = d(centers[0], centers[1]);
    let d13 = d(centers[0], centers[2]);
    let scale = d12.max(d13).max(1.0);

    // In-plane coordinates: c1 at the origin, c2 on the u-axis.
    let (a2, a3, b3) = if d12 > 1e-12 * scale {
        let mut e1 = vec![0.0; n as usize];
        for i in 0..n as usize {
            e1[i] = (centers[1][i] - centers[0][i]) / d12;
        }
        let mut along = 0.0;
        for i in 0..n as usize {
            along += (centers[2][i] - centers[0][i]) * e1[i];
        }
        let mut perp2 = 0.0;
        for i in 0..n as usize {
            let w = (centers[2][i] - centers[0][i]) - along * e1[i];
            perp2 += w * w;
        }
        (d12, along, perp2.sqrt())
    } else {
        // c1 == c2: place c3 on the axis; always "collinear".
        (0.0, d13, 0.0)
    };

    if b3 <= 1e-9 * scale {
        // Degenerate plane: all centers on one line.
        return axial_integral(&kernels, &[0.0, a2, a3], n, rel_tol)
            .map(|e| IntegralEstimate {
                method: Method::Reduced3D,
                ..e
            });
    }

    let pu = [0.0, a2, a3];
    let pv = [0.0, 0.0, b3];
    let area = sphere_area(n - 2);
    let tpow = n as i32 - 3;
    let evals = Cell::new(0u64);
    // Progressive floor for the middle integral: once some column of the
    // integrand is known to be of size M, columns below rel_tol*1e-3*M can
    // be accepted at absolute tolerance. Deterministic because the outer
    // evaluation order is deterministic.
    let v_scale_seen = Cell::new(0.0f64);

    // Fixed mapped grid for the transverse integral; Kronrod panels supply
    // an error estimate that is folded into the quoted bound.
    let t_breaks: [f64; 9] = [0.0, 0.08, 0.18, 0.32, 0.48, 0.64, 0.78, 0.9, 1.0];
    let t_err = Cell::new(0.0f64);

    let plane_integrand = |u: f64, v: f64| -> f64 {
        let mut rho = [0.0f64; 3];
        for i in 0..3 {
            let du = u - pu[i];
            let dv = v - pv[i];
            rho[i] = (du * du + dv * dv).sqrt();
        }
        let t_scale = 1.0 + rho[0].min(rho[1]).min(rho[2]) * 0.25;
        let mut f = |tt: f64| {
            let om = 1.0 - tt;
            let t = t_scale * tt / om;
            let jac = t_scale / (om * om);
            evals.set(evals.get() + 1);
            let mut prod = t.powi(tpow) * jac;
            for i in 0..3 {
                prod *= (kernels[i].g)((rho[i] * rho[i] + t * t).sqrt());
            }
            prod
        };
        let mut val = 0.0;
        let mut err = 0.0;
        for w in t_breaks.windows(2) {
            let (v1, e1) = quad1d::gk15(&mut f, w[0], w[1]);
            val += v1;
            err += e1;
        }
        t_err.set(t_err.get().max(if val != 0.0 { err / val.abs() } else { 0.0 }));
        val
    };

    // Bracket every center: seeds on both sides keep a bump from hiding at
    // a panel edge.
    let mut u_seeds = Vec::new();
    for c in [0.0, a2, a3] {
        for d in [-1.0, 1.0, -0.1 * scale, 0.1 * scale] {
            u_seeds.push(c + d);
        }
    }
    let mut v_seeds = vec![-1.0, -0.1 * scale];
    for c in [0.0, b3] {
        for d in [-1.0, 1.0, 0.1 * scale] {
            v_seeds.push(c + d);
        }
    }
    let mid_tol = (rel_tol * 0.3).max(1e-12);
    let outer_tol = (rel_tol * 0.5).max(1e-12);

    let mut column = |u: f64| -> f64 {
        let mut f = |v: f64| plane_integrand(u, v);
        let abs_floor = v_scale_seen.get() * mid_tol * 1e-3;
        let res = adaptive_real_line(
            &mut f,
            scale,
            &v_seeds,
            QuadOpts::rel(mid_tol)
                .with_abs(abs_floor)
                .with_max_panels(500),
        )
        .map(|q| q.value)
        .unwrap_or(f64::NAN);
        if res.is_finite() && res.abs() > v_scale_seen.get() {
            v_scale_seen.set(res.abs());
        }
        res
    };

    let outer = adaptive_real_line(
        &mut column,
        scale,
        &u_seeds,
        QuadOpts::rel(outer_tol).with_max_panels(800),
    )?;
    if !outer.value.is_finite() {
        return Err(Error::QuadratureFailure {
            requested: rel_tol,
            achieved: f64::INFINITY,
            n_evals: evals.get(),
        });
    }
    let value = area * outer.value;
    let abs_error = area * outer.abs_error + value.abs() * (t_err.get() + mid_tol);
    Ok(IntegralEstimate {
        value,
        abs_error,
        n_evals: evals.get(),
        method: Method::Reduced3D,
    })
}

/// Integral of a product of radial kernels centered on a common axis.
///
/// Point x is described by r = |x| and the polar angle θ against the axis;
/// with offsets a_i the distances are sqrt(r^2 + a_i^2 - 2 r a_i cosθ) and
///
/// ```text
///   ∫ = |S^(N-2)| ∫_0^∞ ∫_{-1}^{1} Π g_i(dist_i) (1-w²)^((N-3)/2) dw r^(N-1) dr.
/// ```
fn axial_integral(
    kernels: &[Kernel<'_>],
    offsets: &[f64],
    n: u32,
    rel_tol: f64,
) -> Result<IntegralEstimate> {
    assert_eq!(kernels.len(), offsets.len());
    let half_pow = (n as i32 - 3) as f64 / 2.0;
    let area = sphere_area(n - 1);
    let evals = Cell::new(0u64);
    let inner_tol = (rel_tol * 0.25).max(1e-13);

    let span = offsets.iter().fold(1.0f64, |m, &a| m.max(a.abs()));
    let outer_integrand = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let mut f = |w: f64| {
            evals.set(evals.get() + 1);
            let sin2: f64 = 1.0 - w * w;
            if sin2 <= 0.0 {
                return 0.0;
            }
            let mut prod = sin2.powf(half_pow);
            for (k, &a) in kernels.iter().zip(offsets) {
                let dist2 = r * r + a * a - 2.0 * r * a * w;
                prod *= (k.g)(dist2.max(0.0).sqrt());
            }
            prod
        };
        let inner = adaptive(
            &mut f,
            &[-1.0, -0.5, 0.0, 0.5, 0.9, 1.0],
            QuadOpts::rel(inner_tol).with_max_panels(600),
        )
        .map(|q| q.value)
        .unwrap_or(f64::NAN);
        r.powi(n as i32 - 1) * inner
    };

    let mut wrapped = |r: f64| outer_integrand(r);
    let mut seeds = vec![0.5, 1.0];
    for &a in offsets {
        for d in [-1.0, 0.0, 1.0] {
            seeds.push(a.abs() + d);
        }
    }
    seeds.push(2.0 * span);
    let outer = adaptive_semi_infinite(
        &mut wrapped,
        0.0,
        span,
        &seeds,
        QuadOpts::rel(rel_tol * 0.5).with_max_panels(2000),
    )?;
    if !outer.value.is_finite() {
        return Err(Error::QuadratureFailure {
            requested: rel_tol,
            achieved: f64::INFINITY,
            n_evals: evals.get(),
        });
    }
    Ok(IntegralEstimate {
        value: area * outer.value,
        abs_error: area * outer.abs_error * 2.0,
        n_evals: evals.get(),
        method: Method::Reduced2D,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        // |S^4| = 8 pi^2 / 3
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
        // |S^6| = 16 pi^3 / 15
        assert_relative_eq!(sphere_area(7), 16.0 * PI.powi(3) / 15.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_radial_n5() {
        // int_{R^5} exp(-|x|^2) dx = pi^(5/2)
        let est = radial_integral(|r| (-r * r).exp(), 5, 100.0, 1e-10).unwrap();
        assert_relative_eq!(est.value, PI.powf(2.5), max_relative = 1e-9);
        assert!(est.abs_error < 1e-6 * est.value);
    }

    #[test]
    fn radial_tail_exponent_at_or_below_dimension_is_rejected() {
        let err = radial_integral(|r| (1.0 + r).powi(-4), 5, 4.0, 1e-8).unwrap_err();
        match err {
            Error::Domain { operation, .. } => assert_eq!(operation, "radial_integral"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn radial_power_law_tail_is_extrapolated() {
        // g = (1+r)^-8 in R^5: exact value |S^4| * int r^4 (1+r)^-8 dr
        //   = |S^4| * B(5, 3) = |S^4| * 4!2!/7! = |S^4| / 105.
        let est = radial_integral(|r| (1.0 + r).powi(-8), 5, 8.0, 1e-9).unwrap();
        assert_relative_eq!(est.value, sphere_area(5) / 105.0, max_relative = 1e-8);
    }

    #[test]
    fn two_center_zero_separation_gaussians() {
        // Both kernels exp(-|x|^2): product integral (pi/2)^(N/2) at sep 0.
        let est = two_center_integral(
            |r| (-r * r).exp(),
            |r| (-r * r).exp(),
            100.0,
            100.0,
            0.0,
            5,
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(est.value, (PI / 2.0).powf(2.5), max_relative = 1e-9);
    }

    #[test]
    fn two_center_gaussians_at_separation() {
        // int exp(-|x|^2) exp(-|x-y|^2) dx = (pi/2)^(N/2) exp(-s^2/2)
        for (n, s) in [(5u32, 1.5f64), (7, 2.0)] {
            let est = two_center_integral(
                |r| (-r * r).exp(),
                |r| (-r * r).exp(),
                100.0,
                100.0,
                s,
                n,
                1e-9,
            )
            .unwrap();
            let exact = (PI / 2.0).powf(n as f64 / 2.0) * (-s * s / 2.0).exp();
            assert_relative_eq!(est.value, exact, max_relative = 1e-7);
        }
    }

    #[test]
    fn two_center_constant_like_second_kernel_reduces_to_radial() {
        // gB ~ 1 on the support of gA: two-center ~ radial integral of gA.
        let ga = |r: f64| (-r * r).exp();
        let gb = |r: f64| 1.0 / (1.0 + (r / 60.0).powi(16));
        let two = two_center_integral(ga, gb, 100.0, 16.0, 0.7, 5, 1e-9).unwrap();
        let one = radial_integral(ga, 5, 100.0, 1e-10).unwrap();
        assert_relative_eq!(two.value, one.value, max_relative = 1e-6);
    }

    #[test]
    fn two_center_power_kernels_symmetric_in_order() {
        let ga = |r: f64| (1.0 + r).powi(-9);
        let gb = |r: f64| (1.0 + r).powi(-3);
        let ab = two_center_integral(ga, gb, 9.0, 3.0, 4.0, 5, 1e-9).unwrap();
        let ba = two_center_integral(gb, ga, 3.0, 9.0, 4.0, 5, 1e-9).unwrap();
        assert_relative_eq!(ab.value, ba.value, max_relative = 1e-7);
    }

    #[test]
    fn three_center_coincident_gaussians() {
        // All three at the origin: int exp(-3 r^2) = (pi/3)^(N/2).
        // Slightly perturbed to exercise the planar (non-collinear) path.
        let g = |r: f64| (-r * r).exp();
        let c1 = vec![0.0; 5];
        let mut c2 = vec![0.0; 5];
        c2[0] = 1e-6;
        let mut c3 = vec![0.0; 5];
        c3[1] = 1e-6;
        let est = three_center_integral(
            [
                Kernel { g: &g, decay: 100.0 },
                Kernel { g: &g, decay: 100.0 },
                Kernel { g: &g, decay: 100.0 },
            ],
            [&c1, &c2, &c3],
            5,
            1e-8,
        )
        .unwrap();
        assert_relative_eq!(est.value, (PI / 3.0).powf(2.5), max_relative = 1e-6);
    }

    #[test]
    fn three_center_collinear_fallback_matches_planar() {
        let g1 = |r: f64| (1.0 + r).powi(-4);
        let g2 = |r: f64| (1.0 + r).powi(-4);
        let g3 = |r: f64| (1.0 + r).powi(-3);
        let k = || {
            [
                Kernel { g: &g1, decay: 4.0 },
                Kernel { g: &g2, decay: 4.0 },
                Kernel { g: &g3, decay: 3.0 },
            ]
        };
        // Exactly collinear configuration.
        let c1 = vec![0.0; 5];
        let mut c2 = vec![0.0; 5];
        c2[0] = 3.0;
        let mut c3 = vec![0.0; 5];
        c3[0] = 6.0;
        let axial = three_center_integral(k(), [&c1, &c2, &c3], 5, 1e-7).unwrap();
        // Nearly collinear: planar path, must agree.
        let mut c3b = c3.clone();
        c3b[1] = 1e-3;
        let planar = three_center_integral(k(), [&c1, &c2, &c3b], 5, 1e-6).unwrap();
        assert_relative_eq!(axial.value, planar.value, max_relative = 1e-4);
    }

    #[test]
    fn three_center_permutation_invariance() {
        let g1 = |r: f64| (-0.7 * r * r).exp();
        let g2 = |r: f64| (1.0 + r).powi(-5);
        let g3 = |r: f64| (1.0 + r).powi(-4);
        let c1 = vec![0.0, 0.0, 0.0, 0.0, 0.0];
        let c2 = vec![2.0, 0.5, 0.0, 0.0, 0.0];
        let c3 = vec![0.5, 2.0, 0.3, 0.0, 0.0];
        let a = three_center_integral(
            [
                Kernel { g: &g1, decay: 100.0 },
                Kernel { g: &g2, decay: 5.0 },
                Kernel { g: &g3, decay: 4.0 },
            ],
            [&c1, &c2, &c3],
            5,
            1e-7,
        )
        .unwrap();
        let b = three_center_integral(
            [
                Kernel { g: &g3, decay: 4.0 },
                Kernel { g: &g1, decay: 100.0 },
                Kernel { g: &g2, decay: 5.0 },
            ],
            [&c3, &c1, &c2],
            5,
            1e-7,
        )
        .unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-5);
    }

    #[test]
    fn three_center_divergent_total_decay_rejected() {
        let g = |r: f64| (1.0 + r).powf(-1.5);
        let c = vec![0.0; 5];
        let err = three_center_integral(
            [
                Kernel { g: &g, decay: 1.5 },
                Kernel { g: &g, decay: 1.5 },
                Kernel { g: &g, decay: 1.5 },
            ],
            [&c, &c, &c],
            5,
            1e-6,
        )
        .unwrap_err();
        match err {
            Error::Domain { operation, .. } => assert_eq!(operation, "three_center_integral"),
            other => panic!("unexpected error: {other}"),
        }
    }
}
