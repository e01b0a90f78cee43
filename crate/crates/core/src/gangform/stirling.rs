//! Size of the configuration space explored by exhaustive gang formation.

use crate::error::{Error, Result};

/// Stirling number of the second kind, `S(n, k)`: the number of ways to
/// partition `n` labelled items into `k` non-empty blocks.
///
/// Evaluated with the explicit alternating sum
/// `S(n,k) = 1/k! · Σ_{i=0..k} (-1)^i · C(k,i) · (k-i)^n`
/// in checked 128-bit arithmetic. Values of `k > n` yield zero.
pub fn stirling2(n: u32, k: u32) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let overflow = || Error::Overflow("stirling2");
    let mut sum: i128 = 0;
    let mut binom: i128 = 1;
    for i in 0..=k {
        let power = i128::from(k - i).checked_pow(n).ok_or_else(overflow)?;
        let term = binom.checked_mul(power).ok_or_else(overflow)?;
        sum = if i % 2 == 0 { sum.checked_add(term) } else { sum.checked_sub(term) }.ok_or_else(overflow)?;
        // C(k, i+1) = C(k, i) · (k-i) / (i+1), exact at every step.
        binom = binom.checked_mul(i128::from(k - i)).ok_or_else(overflow)? / i128::from(i + 1);
    }
    let factorial = (1..=i128::from(k)).try_fold(1i128, |acc, x| acc.checked_mul(x)).ok_or_else(overflow)?;
    debug_assert_eq!(sum % factorial, 0);
    Ok((sum / factorial) as u128)
}

/// Upper bound on the number of system configurations for `n` tasks on `m`
/// cores: `Σ_{k=ceil(n/m)..n} S(n, k)`. Exact when every task is
/// single-threaded and `m >= n`.
pub fn config_count_bound(n: u32, m: u32) -> Result<u128> {
    if m == 0 {
        return Err(Error::InvalidSpec("core count must be positive".into()));
    }
    let mut total: u128 = 0;
    for k in n.div_ceil(m)..=n {
        total = total.checked_add(stirling2(n, k)?).ok_or(Error::Overflow("config_count_bound"))?;
    }
    Ok(total)
}
