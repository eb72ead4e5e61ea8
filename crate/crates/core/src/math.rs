//! Float helpers for `no_std`: thin wrappers over `libm` plus log-sum-exp
//! and pairwise summation.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// `e^{-x} - 1`, accurate near zero and exact `-1` at `+inf`.
#[inline]
pub fn exp_m1_neg(x: f64) -> f64 {
    libm::expm1(-x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Pairwise summation; reduction order depends only on the length.
pub fn sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        sum(&values[..mid]) + sum(&values[mid..])
    }
}

/// Inner product with eight interleaved accumulators; the reduction order
/// depends only on the length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((lanes[0] + lanes[4]) + (lanes[2] + lanes[6]))
        + ((lanes[1] + lanes[5]) + (lanes[3] + lanes[7]))
        + tail
}

/// `log(sum_k exp(terms[k]))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I>(terms: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for t in terms {
        acc += exp(t - max);
    }
    max + ln(acc)
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
