//! The evaluation protocol's statistics: Pearson correlation, percentile
//! bootstrap with 1000 resamples, and the related-sample one-tailed t-test.
//!
//! Bootstrap resampling uses ChaCha8 with the resample index as the stream
//! so results are deterministic for a given seed, independent of execution
//! order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation undefined: the {which} input is constant")]
    ConstantInput { which: &'static str },
    #[error("statistic undefined on the full sample")]
    UndefinedStatistic,
    #[error("gave up after {0} draws: resamples keep degenerating")]
    DegenerateResamples(usize),
    #[error("n_resamples must be >= 1")]
    NoResamples,
}

/// Pearson correlation coefficient. Errors when either input is constant
/// (zero denominator).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantInput { which: "first" });
    }
    if syy == 0.0 {
        return Err(StatsError::ConstantInput { which: "second" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Point estimate with a 95% percentile confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

pub const DEFAULT_N_RESAMPLES: usize = 1000;

/// p-th percentile (0..=100) by linear interpolation of the sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let rank = p / 100.0 * (m - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < m {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[m - 1]
    }
}

/// Percentile bootstrap: resamples case indices with replacement (sample
/// size = original size), computes the statistic per resample, and reports
/// the 2.5/97.5 percentiles. A resample on which the statistic is undefined
/// (stat returns None) is redrawn within the same stream, with a hard cap
/// of 10 * n_resamples draws in total.
pub fn bootstrap<T, F>(
    stat: F,
    data: &[T],
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult, StatsError>
where
    T: Clone,
    F: Fn(&[T]) -> Option<f64>,
{
    if data.is_empty() {
        return Err(StatsError::TooShort { needed: 1, got: 0 });
    }
    if n_resamples < 1 {
        return Err(StatsError::NoResamples);
    }
    let point = stat(data).ok_or(StatsError::UndefinedStatistic)?;

    let n = data.len();
    let cap = 10 * n_resamples;
    let mut draws = 0usize;
    let mut values = Vec::with_capacity(n_resamples);
    let mut sample: Vec<T> = Vec::with_capacity(n);
    for i in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        loop {
            if draws >= cap {
                return Err(StatsError::DegenerateResamples(cap));
            }
            draws += 1;
            sample.clear();
            for _ in 0..n {
                sample.push(data[rng.random_range(0..n)].clone());
            }
            if let Some(v) = stat(&sample) {
                values.push(v);
                break;
            }
        }
    }

    values.sort_by(|a, b| a.total_cmp(b));
    Ok(BootstrapResult {
        point,
        lo: percentile(&values, 2.5),
        hi: percentile(&values, 97.5),
        n_resamples,
        seed,
    })
}

/// Result of the related-sample one-tailed t-test (alternative: the first
/// list's mean is greater). `degenerate` marks zero-variance differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p_one_tailed: f64,
    pub df: usize,
    pub degenerate: bool,
}

/// Paired t-test: t = mean(d) / (std(d)/sqrt(n)) with d = a - b and the
/// n-1 sample standard deviation; p = 1 - F_t(t; n-1).
pub fn paired_t_one_tailed(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooShort { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;

    if sd == 0.0 {
        // all differences identical; the t statistic collapses
        return Ok(if mean == 0.0 {
            TTestResult { t: 0.0, p_one_tailed: 0.5, df, degenerate: true }
        } else {
            let t = if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
            let p = if mean > 0.0 { 0.0 } else { 1.0 };
            TTestResult { t, p_one_tailed: p, df, degenerate: true }
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let p = 1.0 - t_cdf(t, df);
    Ok(TTestResult { t, p_one_tailed: p, df, degenerate: false })
}

// ---------------------------------------------------------------------------
// Student-t CDF via the regularized incomplete beta function

/// Lanczos approximation (g = 7, 9 coefficients), |rel err| < 1e-13.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (Lentz's algorithm).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;

        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "t_cdf requires df >= 1");
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let v = df as f64;
    // two-sided tail probability P(|T| > |t|)
    let tail = incomplete_beta(v / 2.0, 0.5, v / (v + t * t));
    if t > 0.0 {
        1.0 - 0.5 * tail
    } else {
        0.5 * tail
    }
}
