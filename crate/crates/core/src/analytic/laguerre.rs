use crate::error::{Error, Result};

/// Highest order [`laguerre`] evaluates.
pub const MAX_LAGUERRE_ORDER: usize = 500;

/// Laguerre polynomial `L_n(x) = sum_k C(n,k) (-x)^k / k!`.
///
/// For `x <= 0` every term of the sum is non-negative, so it is summed
/// directly with no cancellation. For `x > 0` the three-term recurrence
/// `(k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}` is used. On overflow the error
/// carries the term index (sum) or order (recurrence) that was reached.
pub fn laguerre(n: usize, x: f64) -> Result<f64> {
    if n > MAX_LAGUERRE_ORDER {
        return Err(Error::LaguerreOrder {
            order: n,
            max: MAX_LAGUERRE_ORDER,
        });
    }
    if x.is_nan() {
        return Err(Error::Validation {
            field: "x",
            value: x,
            reason: "Laguerre argument must be a number",
        });
    }
    if x <= 0.0 {
        let y = -x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=n {
            let kf = k as f64;
            term *= (n - k + 1) as f64 * y / (kf * kf);
            sum += term;
            if !sum.is_finite() {
                return Err(Error::LaguerreOverflow { order: k });
            }
        }
        return Ok(sum);
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        if !next.is_finite() {
            return Err(Error::LaguerreOverflow { order: k + 1 });
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}
