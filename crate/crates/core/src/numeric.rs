//! Stable exponential sums.

/// `log Σ exp(x_i)`, or `-∞` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64
where
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + it.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
