//! Numerical helpers shared by the estimators and bounds.

use std::f64::consts::PI;

use libm::erfc;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// Compensated mean of a non-empty slice.
pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Block length for [`dot`]; short enough that plain accumulation inside a
/// block loses nothing measurable.
const DOT_BLOCK: usize = 256;

/// `Σ a_i b_i` over equal-length slices. Plain four-lane sums within blocks,
/// compensated across blocks.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot of unequal lengths");
    let mut total = CompensatedSum::new();
    for (ca, cb) in a.chunks(DOT_BLOCK).zip(b.chunks(DOT_BLOCK)) {
        let mut lanes = [0.0f64; 4];
        let mut qa = ca.chunks_exact(4);
        let mut qb = cb.chunks_exact(4);
        for (x, y) in (&mut qa).zip(&mut qb) {
            for l in 0..4 {
                lanes[l] += x[l] * y[l];
            }
        }
        let mut block = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        for (x, y) in qa.remainder().iter().zip(qb.remainder()) {
            block += x * y;
        }
        total.add(block);
    }
    total.value()
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Above this point `erfc` is replaced by the asymptotic series.
const TAIL_SERIES_START: f64 = 25.0;

/// `ln(1 − Φ(z))` for the standard normal CDF `Φ`.
///
/// Stays accurate far into the tail (`z ≈ 37` gives `≈ −689`) where the
/// probability itself underflows.
pub fn ln_normal_upper_tail(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z < TAIL_SERIES_START {
        return (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln();
    }
    // Q(z) = φ(z)/z · Σ_k (−1)^k (2k−1)!! / z^{2k}
    let inv_z2 = 1.0 / (z * z);
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..40 {
        let next = -term * (2 * k - 1) as f64 * inv_z2;
        if next.abs() >= term.abs() || next.abs() < 1e-18 {
            break;
        }
        term = next;
        series += term;
    }
    -0.5 * z * z - z.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `⌊x^{1/3}⌋` for an integer `x`, exact.
pub fn integer_cbrt(x: u64) -> u64 {
    let mut r = (x as f64).cbrt().round() as u64;
    while r > 0 && r.saturating_mul(r).saturating_mul(r) > x {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1).saturating_mul(r + 1) <= x {
        r += 1;
    }
    r
}
