//! Seeded importance-sampled Monte Carlo in full dimension.
//!
//! The proposal is an equal-weight mixture of radial densities
//! (1 + |x − c|)^(−s), one per center, with s matched to the integrand's
//! stated decay and capped at N+2 so the proposal tail is never lighter
//! than the integrand's. Radii are drawn through the substitution
//! v = ρ/(1+ρ), which turns the radial law into Beta(N, s−N); directions
//! are uniform on the sphere.
//!
//! Determinism: sampling is stratified by mixture component, each stratum
//! is cut into fixed-size chunks, and every chunk owns a counter-derived
//! ChaCha8 stream. Chunks may be evaluated on any number of workers; the
//! partial sums are reduced in a fixed sequential order, so the result is
//! bit-identical for any worker count and across reruns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, StandardNormal};
use rayon::prelude::*;

use super::{sphere_area, IntegralEstimate, Method};
use crate::error::{Error, Result};
use crate::util::splitmix64;

const CHUNK: u64 = 8192;

#[derive(Debug, Clone, Copy)]
pub struct McOpts {
    pub n_samples: u64,
    pub seed: u64,
}

impl Default for McOpts {
    fn default() -> Self {
        McOpts { n_samples: 100_000, seed: 1 }
    }
}

/// One stratum draws from a single mixture component.
struct Stratum {
    center: usize,
    /// Mixture weight this stratum estimates (1/K, halved when K = 1).
    weight: f64,
    n: u64,
}

#[derive(Clone, Copy, Default)]
struct ChunkSums {
    sum: f64,
    sum_sq: f64,
}

fn chunk_seed(seed: u64, stratum: u64, chunk: u64) -> u64 {
    let a = splitmix64(seed ^ stratum.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    splitmix64(a ^ chunk.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// ∫_{ℝ^N} f dx by stratified mixture importance sampling.
///
/// `decay_exponent` is the caller's promise that |f(x)| ≲ |x|^(−decay) at
/// infinity; it must exceed N for the integral to converge and is used to
/// pick the proposal tail. `abs_error` of the result is one standard
/// error, estimated per stratum.
pub fn mc_full_integral<F>(
    f: F,
    centers: &[Vec<f64>],
    decay_exponent: f64,
    n: u32,
    opts: &McOpts,
) -> Result<IntegralEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::invalid("dimension", n, "need n >= 2"));
    }
    let dim = n as usize;
    if centers.is_empty() {
        return Err(Error::invalid("centers", 0, "need at least one proposal center"));
    }
    if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::invalid(
            "centers",
            bad.len(),
            "every center must have one coordinate per dimension",
        ));
    }
    if !(decay_exponent > n as f64) {
        return Err(Error::invalid(
            "decay_exponent",
            decay_exponent,
            "integrand must decay faster than the volume grows",
        ));
    }
    if opts.n_samples < 10_000 {
        return Err(Error::invalid(
            "n_samples",
            opts.n_samples,
            "too few samples for a trustworthy standard error",
        ));
    }

    let nf = n as f64;
    let s = decay_exponent.min(nf + 2.0);
    // Per-center normalizer: ∫ (1+|x|)^{-s} dx = |S^{N-1}| B(N, s−N).
    let ln_beta = libm::lgamma(nf) + libm::lgamma(s - nf) - libm::lgamma(s);
    let norm = sphere_area(n) * ln_beta.exp();
    let beta = Beta::new(nf, s - nf).map_err(|e| Error::Internal(format!("beta sampler: {e}")))?;

    let k = centers.len();
    let mixture_density = |x: &[f64]| -> f64 {
        let mut p = 0.0;
        for c in centers {
            let d2: f64 = x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            p += (1.0 + d2.sqrt()).powf(-s);
        }
        p / (k as f64 * norm)
    };

    // Strata: one per component; a single component is split in half so
    // the variance formula always sees at least two strata.
    let mut strata = Vec::new();
    let parts: Vec<(usize, f64)> = if k == 1 {
        vec![(0, 0.5), (0, 0.5)]
    } else {
        (0..k).map(|c| (c, 1.0 / k as f64)).collect()
    };
    let per = opts.n_samples / parts.len() as u64;
    let rem = opts.n_samples % parts.len() as u64;
    for (idx, (center, weight)) in parts.into_iter().enumerate() {
        let n_here = per + if (idx as u64) < rem { 1 } else { 0 };
        strata.push(Stratum { center, weight, n: n_here });
    }

    // Flatten into chunk descriptors so workers share nothing.
    let mut tasks = Vec::new();
    for (si, st) in strata.iter().enumerate() {
        let chunks = st.n.div_ceil(CHUNK);
        for c in 0..chunks {
            let count = CHUNK.min(st.n - c * CHUNK);
            tasks.push((si, c, count));
        }
    }

    let partials: Vec<ChunkSums> = tasks
        .par_iter()
        .map(|&(si, c, count)| {
            let st = &strata[si];
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(opts.seed, si as u64, c));
            let mut dir = vec![0.0f64; dim];
            let mut x = vec![0.0f64; dim];
            let mut sums = ChunkSums::default();
            for _ in 0..count {
                let inv = loop {
                    let mut sq = 0.0;
                    for d in dir.iter_mut() {
                        *d = rng.sample::<f64, _>(StandardNormal);
                        sq += *d * *d;
                    }
                    if sq > 1e-24 {
                        break sq.sqrt().recip();
                    }
                };
                let v: f64 = rng.sample(beta);
                let v = v.min(1.0 - 1e-15);
                let rho = v / (1.0 - v);
                for (xi, (ci, di)) in x
                    .iter_mut()
                    .zip(centers[st.center].iter().zip(dir.iter()))
                {
                    *xi = ci + rho * inv * di;
                }
                let w = f(&x) / mixture_density(&x);
                sums.sum += w;
                sums.sum_sq += w * w;
            }
            sums
        })
        .collect();

    // Sequential reduction in task order keeps the fp result fixed.
    let mut totals = vec![ChunkSums::default(); strata.len()];
    for (&(si, _, _), part) in tasks.iter().zip(partials.iter()) {
        totals[si].sum += part.sum;
        totals[si].sum_sq += part.sum_sq;
    }

    let mut value = 0.0;
    let mut variance = 0.0;
    for (st, tot) in strata.iter().zip(totals.iter()) {
        let nn = st.n as f64;
        let mean = tot.sum / nn;
        value += st.weight * mean;
        let sample_var = ((tot.sum_sq - tot.sum * tot.sum / nn) / (nn - 1.0)).max(0.0);
        variance += st.weight * st.weight * sample_var / nn;
    }
    if !value.is_finite() {
        return Err(Error::Internal(
            "monte carlo estimate is not finite; integrand misbehaved".into(),
        ));
    }
    Ok(IntegralEstimate {
        value,
        abs_error: variance.sqrt(),
        n_evals: opts.n_samples,
        method: Method::MonteCarlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::radial_integral;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn origin(dim: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; dim]]
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = |_: &[f64]| 1.0;
        let opts = McOpts::default();
        assert!(mc_full_integral(f, &[], 8.0, 5, &opts).is_err());
        assert!(mc_full_integral(f, &origin(5), 4.9, 5, &opts).is_err());
        assert!(mc_full_integral(f, &[vec![0.0; 4]], 8.0, 5, &opts).is_err());
        let starved = McOpts { n_samples: 100, seed: 1 };
        assert!(mc_full_integral(f, &origin(5), 8.0, 5, &starved).is_err());
    }

    #[test]
    fn sampling_its_own_density_gives_exactly_one() {
        // Every importance weight is the same expression divided by
        // itself, so the estimate must be 1 with zero spread. This pins
        // the normalization constant against the sampler.
        let n = 5u32;
        let s = 8.0f64.min(n as f64 + 2.0);
        let centers = vec![
            vec![0.0, 0.0, 0.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, -3.0, 0.0, 0.0, 1.0],
        ];
        let ln_beta =
            libm::lgamma(n as f64) + libm::lgamma(s - n as f64) - libm::lgamma(s);
        let norm = sphere_area(n) * ln_beta.exp();
        let k = centers.len() as f64;
        let centers_f = centers.clone();
        let f = move |x: &[f64]| {
            let mut p = 0.0;
            for c in &centers_f {
                let d2: f64 =
                    x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                p += (1.0 + d2.sqrt()).powf(-s);
            }
            p / (k * norm)
        };
        let opts = McOpts { n_samples: 30_000, seed: 7 };
        let est = mc_full_integral(f, &centers, 8.0, n, &opts).unwrap();
        assert_relative_eq!(est.value, 1.0, epsilon = 1e-12);
        assert!(est.abs_error < 1e-12, "stderr {}", est.abs_error);
    }

    #[test]
    fn gaussian_matches_closed_form() {
        // ∫ exp(-|x|²) over ℝ^5 = π^{5/2}, sampled from one center and
        // from an offset center.
        let truth = PI.powf(2.5);
        let f = |x: &[f64]| (-x.iter().map(|a| a * a).sum::<f64>()).exp();
        let opts = McOpts { n_samples: 200_000, seed: 42 };
        for center in [vec![0.0; 5], vec![1.5, 0.0, -0.5, 0.0, 0.0]] {
            let est = mc_full_integral(f, &[center], 12.0, 5, &opts).unwrap();
            assert!(
                (est.value - truth).abs() < 4.0 * est.abs_error,
                "value {} truth {} stderr {}",
                est.value,
                truth,
                est.abs_error
            );
            assert!(est.abs_error < 0.02 * truth);
        }
    }

    #[test]
    fn agrees_with_deterministic_radial_quadrature() {
        // A pure power kernel has a 1D reduction to compare against, and
        // the two-center mixture must not bias the answer.
        let det = radial_integral(|r| (1.0 + r).powi(-8), 5, 8.0, 1e-10).unwrap();
        let f = |x: &[f64]| {
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            (1.0 + r).powi(-8)
        };
        let centers = vec![vec![0.0; 5], vec![4.0, 0.0, 0.0, 0.0, 0.0]];
        let opts = McOpts { n_samples: 150_000, seed: 11 };
        let est = mc_full_integral(f, &centers, 8.0, 5, &opts).unwrap();
        assert!(
            (est.value - det.value).abs() < 4.0 * est.abs_error,
            "mc {} det {} stderr {}",
            est.value,
            det.value,
            est.abs_error
        );
    }

    #[test]
    fn reruns_and_worker_counts_are_bit_identical() {
        let f = |x: &[f64]| {
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            (1.0 + r).powi(-9) * (1.0 + x[0].sin())
        };
        let centers = vec![vec![0.0; 5], vec![3.0, 0.0, 0.0, 0.0, 0.0]];
        let opts = McOpts { n_samples: 40_000, seed: 5 };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| mc_full_integral(&f, &centers, 9.0, 5, &opts).unwrap())
        };
        let a = run(1);
        let b = run(2);
        let c = run(8);
        let d = run(1);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        assert_eq!(a.value.to_bits(), d.value.to_bits());
        assert_eq!(a.abs_error.to_bits(), b.abs_error.to_bits());
        assert_eq!(a.abs_error.to_bits(), c.abs_error.to_bits());
    }

    #[test]
    fn different_seeds_move_the_estimate_within_noise() {
        let f = |x: &[f64]| (-x.iter().map(|a| a * a).sum::<f64>()).exp();
        let a = mc_full_integral(
            f,
            &origin(5),
            12.0,
            5,
            &McOpts { n_samples: 50_000, seed: 1 },
        )
        .unwrap();
        let b = mc_full_integral(
            f,
            &origin(5),
            12.0,
            5,
            &McOpts { n_samples: 50_000, seed: 2 },
        )
        .unwrap();
        assert_ne!(a.value.to_bits(), b.value.to_bits());
        let sigma = (a.abs_error.powi(2) + b.abs_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 6.0 * sigma);
    }
}
