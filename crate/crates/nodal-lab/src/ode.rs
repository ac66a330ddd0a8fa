//! Adaptive Dormand-Prince 5(4) integration for two-component systems.
//!
//! The state is a fixed pair `[value, derivative]`, which is all the radial
//! problems need. Error control mixes the components through a shared travel
//! scale so a value passing through zero does not stall the controller, while
//! a tail where both components decay together still gets relative control.

use crate::error::{Error, Result};

pub type State = [f64; 2];

// Dormand-Prince 5(4) tableau, FSAL form.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const C: [f64; 5] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_steps: 4_000_000,
        }
    }
}

impl OdeOpts {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        OdeOpts {
            rel_tol,
            ..Self::default()
        }
    }
}

/// What to keep from the integration.
pub enum Record<'a> {
    /// Every accepted step, plus the start point and any located sign change.
    EveryStep,
    /// Exactly these abscissas (strictly increasing, inside the span). Steps
    /// are clipped so each point is hit by an accepted step, not interpolated.
    AtPoints(&'a [f64]),
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    ReachedEnd,
    /// First sign change of the value component, located inside one step by
    /// cubic Hermite interpolation. `slope` is the derivative component there.
    SignChange { r: f64, slope: f64 },
}

#[derive(Debug)]
pub struct Trajectory {
    pub points: Vec<(f64, State)>,
    pub stop: Stop,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

fn cubic_hermite(t: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * m1
}

/// Locates the root of the value component inside an accepted step.
fn locate_sign_change(
    r: f64,
    h: f64,
    y_old: State,
    y_new: State,
    k1: State,
    k7: State,
) -> (f64, f64) {
    let value = |t: f64| cubic_hermite(t, y_old[0], y_new[0], h * k1[0], h * k7[0]);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let sign_lo = value(lo) > 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (value(mid) > 0.0) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let slope = cubic_hermite(t, y_old[1], y_new[1], h * k1[1], h * k7[1]);
    (r + t * h, slope)
}

/// Integrates `y' = rhs(r, y)` from `(r0, y0)` to `r_end`.
///
/// With `stop_on_sign_change`, the run ends at the first step on which the
/// value component leaves the open sign region it started in; the crossing is
/// located inside the step and reported in [`Stop::SignChange`].
pub fn integrate<F>(
    rhs: F,
    r0: f64,
    y0: State,
    r_end: f64,
    record: Record,
    stop_on_sign_change: bool,
    opts: &OdeOpts,
) -> Result<Trajectory>
where
    F: Fn(f64, State) -> State,
{
    if !(r_end > r0) {
        return Err(Error::invalid("r_end", r_end, "must exceed the start abscissa"));
    }
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0) {
        return Err(Error::invalid("tolerance", opts.rel_tol, "must be positive"));
    }

    let mut pending: &[f64] = &[];
    let mut points = Vec::new();
    match record {
        Record::EveryStep => points.push((r0, y0)),
        Record::AtPoints(p) => {
            let mut prev = r0;
            for &x in p {
                if !(x > prev) || x > r_end * (1.0 + 1e-12) {
                    return Err(Error::invalid(
                        "record points",
                        x,
                        "must be strictly increasing inside the span",
                    ));
                }
                prev = x;
            }
            points.reserve(p.len());
            pending = p;
        }
    }

    let (rtol, atol) = (opts.rel_tol, opts.abs_tol);
    let mut r = r0;
    let mut y = y0;
    let mut k1 = rhs(r, y);

    // Starting step from the scaled size of y versus y'.
    let mut h_ctrl = {
        let sc0 = atol + rtol * y[0].abs();
        let sc1 = atol + rtol * y[1].abs();
        let d0 = (0.5 * ((y[0] / sc0).powi(2) + (y[1] / sc1).powi(2))).sqrt();
        let d1 = (0.5 * ((k1[0] / sc0).powi(2) + (k1[1] / sc1).powi(2))).sqrt();
        let guess = if d0 < 1e-8 || d1 < 1e-8 {
            1e-6 * (r_end - r0)
        } else {
            0.01 * d0 / d1
        };
        guess.min(r_end - r0)
    };

    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut stop = Stop::ReachedEnd;

    while r < r_end {
        if n_accepted + n_rejected >= opts.max_steps {
            return Err(Error::IntegrationFailure {
                r,
                message: format!("step budget {} exhausted", opts.max_steps),
            });
        }

        // Clip to the next requested point or the endpoint so both are hit
        // exactly rather than passed over. The controller's preferred step
        // h_ctrl is kept aside: a clip is not an error-control decision.
        let mut h = h_ctrl;
        let mut target: Option<f64> = None;
        let next_stop = pending.first().copied().unwrap_or(r_end).min(r_end);
        if r + h >= next_stop {
            h = next_stop - r;
            target = Some(next_stop);
        }
        // No-progress test instead of an absolute floor: starts near r = 0
        // legitimately use steps far below epsilon-relative-to-the-span.
        if r + h == r {
            return Err(Error::IntegrationFailure {
                r,
                message: "step size underflow".into(),
            });
        }

        let k2 = rhs(r + C[0] * h, add(y, h, &[(A2[0], k1)]));
        let k3 = rhs(r + C[1] * h, add(y, h, &[(A3[0], k1), (A3[1], k2)]));
        let k4 = rhs(
            r + C[2] * h,
            add(y, h, &[(A4[0], k1), (A4[1], k2), (A4[2], k3)]),
        );
        let k5 = rhs(
            r + C[3] * h,
            add(y, h, &[(A5[0], k1), (A5[1], k2), (A5[2], k3), (A5[3], k4)]),
        );
        let k6 = rhs(
            r + C[4] * h,
            add(
                y,
                h,
                &[(A6[0], k1), (A6[1], k2), (A6[2], k3), (A6[3], k4), (A6[4], k5)],
            ),
        );
        let y_new = add(
            y,
            h,
            &[(B[0], k1), (B[2], k3), (B[3], k4), (B[4], k5), (B[5], k6)],
        );
        let r_new = target.unwrap_or(r + h);
        let k7 = rhs(r_new, y_new);

        let err = {
            let e0 = h
                * (E[0] * k1[0] + E[2] * k3[0] + E[3] * k4[0] + E[4] * k5[0] + E[5] * k6[0]
                    + E[6] * k7[0]);
            let e1 = h
                * (E[0] * k1[1] + E[2] * k3[1] + E[3] * k4[1] + E[4] * k5[1] + E[5] * k6[1]
                    + E[6] * k7[1]);
            let travel = 0.5 * h.abs() * (y[1].abs() + y_new[1].abs());
            let sc0 = atol + rtol * y[0].abs().max(y_new[0].abs()).max(travel);
            let sc1 = atol + rtol * y[1].abs().max(y_new[1].abs());
            let e = (0.5 * ((e0 / sc0).powi(2) + (e1 / sc1).powi(2))).sqrt();
            if e.is_finite() && y_new[0].is_finite() && y_new[1].is_finite() {
                e
            } else {
                f64::INFINITY
            }
        };

        if err > 1.0 {
            n_rejected += 1;
            h_ctrl = h * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }

        n_accepted += 1;
        let crossed = stop_on_sign_change && y[0] != 0.0 && (y[0] > 0.0) != (y_new[0] > 0.0);
        if crossed {
            let (r_cross, slope) = locate_sign_change(r, h, y, y_new, k1, k7);
            stop = Stop::SignChange { r: r_cross, slope };
            if matches!(record, Record::EveryStep) {
                points.push((r_cross, [0.0, slope]));
            }
            break;
        }

        r = r_new;
        y = y_new;
        k1 = k7;
        match record {
            Record::EveryStep => points.push((r, y)),
            Record::AtPoints(_) => {
                if !pending.is_empty() && target == pending.first().copied() {
                    points.push((r, y));
                    pending = &pending[1..];
                }
            }
        }

        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        let grown = h * factor;
        h_ctrl = if target.is_some() { h_ctrl.max(grown) } else { grown };
    }

    Ok(Trajectory {
        points,
        stop,
        n_accepted,
        n_rejected,
    })
}

#[inline]
fn add(y: State, h: f64, terms: &[(f64, State)]) -> State {
    let mut out = [0.0_f64; 2];
    for i in 0..2 {
        let mut acc = 0.0;
        for &(c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
    out
}
