//! The nonlinearity family and its structural diagnostics.
//!
//! The built-in family is
//!
//! ```text
//!   f(s) = |s|^(q-2) s / (1 + |s|^(q-p)),        2 < p < 2N/(N-2) < q,
//! ```
//!
//! odd, supercritical of power q-1 near 0 and subcritical of power p-1 at
//! infinity. Its antiderivative F(s) = ∫_0^s f has no elementary closed form
//! for general (p, q), so it is tabulated once on a dense logarithmic grid
//! and interpolated with quintic Hermite polynomials; f and f' are exact at
//! the nodes, which keeps the interpolant within 1e-10 absolute of direct
//! high-accuracy quadrature on |s| <= 10 (tested). Outside the table F is
//! continued by termwise integration of the asymptotic expansion
//! f(t) = t^(p-1) Σ_k (-1)^k t^(-k(q-p)), i.e. |s|^p/p plus lower-order
//! corrections; the truncation error is below the last retained term.
//!
//! `check_f1` and `check_f2` measure, on dense sample grids, the growth
//! envelope constant a1 and the superlinearity chain
//! 0 <= θ F(s) <= f(s) s < f'(s) s^2 that the energy expansion relies on.

use crate::error::{Error, Result};
use crate::quadrature::quad1d::{adaptive, QuadOpts};
use serde::Serialize;

/// Dimension and growth exponents of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    /// Hölder exponent used in the splitting estimates; f' is locally
    /// Lipschitz so any alpha <= 1 is admissible, and alpha must exceed
    /// N/(2(N-2)) for the pairwise remainders to stay below the leading
    /// interaction order.
    pub alpha: f64,
    /// Superlinearity constant: theta F(s) <= f(s) s. Equals p for the
    /// built-in family.
    pub theta: f64,
}

impl ModelParams {
    pub fn new(n: u32, p: f64, q: f64) -> Result<Self> {
        let params = ModelParams {
            n,
            p,
            q,
            alpha: 1.0,
            theta: p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_alpha(n: u32, p: f64, q: f64, alpha: f64) -> Result<Self> {
        let params = ModelParams {
            n,
            p,
            q,
            alpha,
            theta: p,
        };
        params.validate()?;
        Ok(params)
    }

    /// Critical Sobolev exponent 2* = 2N/(N-2).
    pub fn critical_exponent(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 - 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 5 {
            return Err(Error::invalid("n", self.n, "dimension must be >= 5"));
        }
        let crit = self.critical_exponent();
        if !(self.p > 2.0) {
            return Err(Error::invalid("p", self.p, "need p > 2"));
        }
        if !(self.p < crit) {
            return Err(Error::invalid(
                "p",
                self.p,
                format!("need p < 2N/(N-2) = {crit}"),
            ));
        }
        if !(self.q > crit) {
            return Err(Error::invalid(
                "q",
                self.q,
                format!("need q > 2N/(N-2) = {crit}"),
            ));
        }
        let alpha_min = self.n as f64 / (2.0 * (self.n as f64 - 2.0));
        if !(self.alpha > alpha_min && self.alpha <= 1.0) {
            return Err(Error::invalid(
                "alpha",
                self.alpha,
                format!("need N/(2(N-2)) = {alpha_min} < alpha <= 1"),
            ));
        }
        if !(self.theta > 2.0) {
            return Err(Error::invalid("theta", self.theta, "need theta > 2"));
        }
        Ok(())
    }
}

/// A scalar nonlinearity: f, its derivative, and its antiderivative.
///
/// Implemented by the built-in family and by pure-power test stubs.
pub trait Nonlin {
    fn f(&self, s: f64) -> f64;
    fn fprime(&self, s: f64) -> f64;
    /// F(s) = ∫_0^s f(t) dt.
    fn big_f(&self, s: f64) -> f64;
    /// Exponent P with f(s)·s ~ |s|^P as s → 0. Governs how fast nonlinear
    /// integrands of a polynomially decaying profile fall off, so quadrature
    /// can extrapolate their tails.
    fn small_amplitude_power(&self) -> f64;
}

const TABLE_S_LO: f64 = 1e-8;
const TABLE_S_HI: f64 = 1.2e3;
const TABLE_PER_DECADE: usize = 256;

struct FTable {
    /// log10(s) is affine in the index; nodes are s_lo * 10^(k / per_decade).
    log_s_lo: f64,
    inv_log_step: f64,
    s: Vec<f64>,
    big_f: Vec<f64>,
    f: Vec<f64>,
    fprime: Vec<f64>,
}

/// The built-in odd nonlinearity with cached antiderivative.
pub struct Nonlinearity {
    pub params: ModelParams,
    table: FTable,
}

impl Nonlinearity {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let table = build_table(&params)?;
        Ok(Nonlinearity { params, table })
    }

    fn f_mag(&self, a: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        if a <= 1.0 {
            a.powf(q - 1.0) / (1.0 + a.powf(q - p))
        } else {
            // Same value arranged so no intermediate overflows for huge a.
            a.powf(p - 1.0) / (1.0 + a.powf(p - q))
        }
    }

    fn fprime_mag(&self, a: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        if a <= 1.0 {
            let w = a.powf(q - p);
            a.powf(q - 2.0) * ((q - 1.0) + (p - 1.0) * w) / ((1.0 + w) * (1.0 + w))
        } else {
            let w = a.powf(p - q);
            a.powf(p - 2.0) * ((p - 1.0) + (q - 1.0) * w) / ((1.0 + w) * (1.0 + w))
        }
    }

    /// Leading series of F at small |s|: Σ (-1)^k s^(q + k(q-p)) / (q + k(q-p)).
    fn big_f_series_small(&self, a: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        let gap = q - p;
        let ratio = a.powf(gap);
        let mut term_pow = a.powf(q);
        let mut acc = 0.0f64;
        let mut sign = 1.0f64;
        for k in 0..200 {
            let e = q + k as f64 * gap;
            let term = sign * term_pow / e;
            acc += term;
            if term.abs() < 1e-17 * acc.abs().max(1e-300) {
                break;
            }
            term_pow *= ratio;
            sign = -sign;
        }
        acc
    }

    /// ∫_{s0}^{s1} f for s1 >= s0 >= table top, by termwise integration of
    /// the large-argument expansion. Equivalent to the |s|^p/p form plus
    /// corrections; the truncation error is below the last retained term.
    fn big_f_series_tail(&self, s0: f64, s1: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        let gap = q - p;
        let mut acc = 0.0f64;
        let mut sign = 1.0f64;
        for k in 0..400 {
            let e = p - 1.0 - k as f64 * gap;
            let term = if (e + 1.0).abs() < 1e-9 {
                (s1 / s0).ln()
            } else {
                (s1.powf(e + 1.0) - s0.powf(e + 1.0)) / (e + 1.0)
            };
            let term = sign * term;
            acc += term;
            if term.abs() < 1e-16 * acc.abs().max(1e-300) {
                return acc;
            }
            sign = -sign;
        }
        // Extremely small q-p would stall the series; integrate directly.
        let mut f = |t: f64| self.f(t);
        adaptive(&mut f, &[s0, s1], QuadOpts::rel(1e-13))
            .map(|r| r.value)
            .unwrap_or(acc)
    }
}

impl Nonlin for Nonlinearity {
    fn f(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let mag = self.f_mag(s.abs());
        mag.copysign(s)
    }

    fn small_amplitude_power(&self) -> f64 {
        self.params.q
    }

    fn fprime(&self, s: f64) -> f64 {
        self.fprime_mag(s.abs())
    }

    fn big_f(&self, s: f64) -> f64 {
        let a = s.abs();
        if a == 0.0 {
            return 0.0;
        }
        let t = &self.table;
        if a < TABLE_S_LO {
            return self.big_f_series_small(a);
        }
        if a >= *t.s.last().unwrap() {
            let top = *t.s.last().unwrap();
            return t.big_f.last().unwrap() + self.big_f_series_tail(top, a);
        }
        let mut k = (((a.log10() - t.log_s_lo) * t.inv_log_step) as usize).min(t.s.len() - 2);
        // Float fuzz in the log can be off by one node.
        while k > 0 && a < t.s[k] {
            k -= 1;
        }
        while k + 2 < t.s.len() && a >= t.s[k + 1] {
            k += 1;
        }
        let (s0, s1) = (t.s[k], t.s[k + 1]);
        let h = s1 - s0;
        let x = (a - s0) / h;
        let x2 = x * x;
        let x3 = x2 * x;
        let x4 = x3 * x;
        let x5 = x4 * x;
        // Quintic Hermite basis: value, first and second derivative at both
        // nodes; F'' = f' is known exactly.
        let h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
        let h1 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
        let h2 = 0.5 * x2 - 1.5 * x3 + 1.5 * x4 - 0.5 * x5;
        let h3 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
        let h4 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
        let h5 = 0.5 * x3 - x4 + 0.5 * x5;
        t.big_f[k] * h0
            + h * t.f[k] * h1
            + h * h * t.fprime[k] * h2
            + t.big_f[k + 1] * h3
            + h * t.f[k + 1] * h4
            + h * h * t.fprime[k + 1] * h5
    }
}

fn build_table(params: &ModelParams) -> Result<FTable> {
    let probe = Nonlinearity {
        params: *params,
        table: FTable {
            log_s_lo: 0.0,
            inv_log_step: 0.0,
            s: vec![0.0, 1.0],
            big_f: vec![0.0, 0.0],
            f: vec![0.0, 0.0],
            fprime: vec![0.0, 0.0],
        },
    };
    let decades = (TABLE_S_HI / TABLE_S_LO).log10();
    let count = (decades * TABLE_PER_DECADE as f64).ceil() as usize + 1;
    let log_lo = TABLE_S_LO.log10();
    let step = decades / (count - 1) as f64;

    let mut s = Vec::with_capacity(count);
    for k in 0..count {
        s.push(10f64.powf(log_lo + step * k as f64));
    }

    let mut big_f = Vec::with_capacity(count);
    let mut fv = Vec::with_capacity(count);
    let mut fpv = Vec::with_capacity(count);
    let mut acc = probe.big_f_series_small(s[0]);
    let mut comp = 0.0f64;
    big_f.push(acc);
    fv.push(probe.f_mag(s[0]));
    fpv.push(probe.fprime_mag(s[0]));
    for k in 1..count {
        let mut f = |t: f64| probe.f_mag(t);
        let (panel, _) = crate::quadrature::quad1d::gk15(&mut f, s[k - 1], s[k]);
        // Kahan accumulation: thousands of panels must not drift.
        let y = panel - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        big_f.push(acc);
        fv.push(probe.f_mag(s[k]));
        fpv.push(probe.fprime_mag(s[k]));
    }

    Ok(FTable {
        log_s_lo: log_lo,
        inv_log_step: 1.0 / step,
        s,
        big_f,
        f: fv,
        fprime: fpv,
    })
}

/// Pure power f(s) = |s|^(e-2) s, the comparison stub for quadrature and
/// shooting tests (critical power included).
#[derive(Debug, Clone, Copy)]
pub struct PurePower {
    pub exponent: f64,
}

impl Nonlin for PurePower {
    fn f(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(self.exponent - 1.0).copysign(s)
        }
    }

    fn fprime(&self, s: f64) -> f64 {
        (self.exponent - 1.0) * s.abs().powf(self.exponent - 2.0)
    }

    fn big_f(&self, s: f64) -> f64 {
        s.abs().powf(self.exponent) / self.exponent
    }

    fn small_amplitude_power(&self) -> f64 {
        self.exponent
    }
}

/// f identically zero; isolates the Laplacian part in integrator tests.
#[derive(Debug, Clone, Copy)]
pub struct ZeroNonlin;

impl Nonlin for ZeroNonlin {
    fn f(&self, _s: f64) -> f64 {
        0.0
    }
    fn fprime(&self, _s: f64) -> f64 {
        0.0
    }
    fn big_f(&self, _s: f64) -> f64 {
        0.0
    }
    fn small_amplitude_power(&self) -> f64 {
        // Any exponent works for an identically zero integrand; keep tail
        // validation happy in every dimension.
        1e6
    }
}

/// Growth-envelope report: the measured constant a1 such that f', f, F are
/// bounded by a1 times the p-power (|s| >= 1) resp. q-power (|s| <= 1)
/// envelopes, plus the asymptotic power-law crossover diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct F1Report {
    pub a1: f64,
    /// f(s)/s^(q-1) at s = 1e-4; tends to 1 as s -> 0.
    pub small_s_ratio: f64,
    /// f(s)/s^(p-1) at s = 1e4; tends to 1 as s -> infinity.
    pub large_s_ratio: f64,
    pub n_samples: usize,
    pub pass: bool,
}

/// Samples |s| on a dense log grid over [1e-6, 1e3] and returns the largest
/// envelope ratio over f', f, and F.
pub fn check_f1(nl: &Nonlinearity) -> F1Report {
    let (p, q) = (nl.params.p, nl.params.q);
    let per_decade = 200;
    let lo = 1e-6f64;
    let decades = 9.0;
    let count = (decades * per_decade as f64) as usize + 1;
    let mut a1 = 0.0f64;
    for k in 0..count {
        let s = lo * 10f64.powf(k as f64 / per_decade as f64);
        let (env_d, env_f, env_big) = if s >= 1.0 {
            (s.powf(p - 2.0), s.powf(p - 1.0), s.powf(p))
        } else {
            (s.powf(q - 2.0), s.powf(q - 1.0), s.powf(q))
        };
        a1 = a1
            .max(nl.fprime(s).abs() / env_d)
            .max(nl.f(s).abs() / env_f)
            .max(nl.big_f(s).abs() / env_big);
    }
    let small_s_ratio = nl.f(1e-4) / 1e-4f64.powf(q - 1.0);
    let large_s_ratio = nl.f(1e4) / 1e4f64.powf(p - 1.0);
    let pass = a1.is_finite()
        && a1 > 0.0
        && (small_s_ratio - 1.0).abs() < 0.01
        && (large_s_ratio - 1.0).abs() < 0.01;
    F1Report {
        a1,
        small_s_ratio,
        large_s_ratio,
        n_samples: count,
        pass,
    }
}

/// Superlinearity chain report for 0 <= θF(s) <= f(s)s < f'(s)s^2.
#[derive(Debug, Clone, Serialize)]
pub struct F2Report {
    /// min over the grid of (f'(s)s^2 - f(s)s) / (f(s)s); positive means the
    /// strict upper link holds with that relative margin.
    pub min_strict_margin: f64,
    /// min over the grid of (f(s)s - θF(s)) / (f(s)s); nonnegative.
    pub min_theta_margin: f64,
    /// θ F(1), frozen reference value for the default parameters.
    pub theta_f_at_one: f64,
    pub n_samples: usize,
    pub pass: bool,
}

pub fn check_f2(nl: &Nonlinearity) -> F2Report {
    let theta = nl.params.theta;
    let per_decade = 200;
    let lo = 1e-6f64;
    let decades = 9.0;
    let count = (decades * per_decade as f64) as usize + 1;
    let mut min_strict = f64::INFINITY;
    let mut min_theta = f64::INFINITY;
    for k in 0..count {
        let s = lo * 10f64.powf(k as f64 / per_decade as f64);
        let fs = nl.f(s) * s;
        let dfs2 = nl.fprime(s) * s * s;
        let big = nl.big_f(s);
        min_strict = min_strict.min((dfs2 - fs) / fs);
        min_theta = min_theta.min((fs - theta * big) / fs);
    }
    let theta_f_at_one = theta * nl.big_f(1.0);
    let pass = min_strict > 0.0 && min_theta >= -1e-12;
    F2Report {
        min_strict_margin: min_strict,
        min_theta_margin: min_theta,
        theta_f_at_one,
        n_samples: count,
        pass,
    }
}
