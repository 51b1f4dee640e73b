//! Small numeric utilities: deterministic summation, factorial helpers and
//! combination enumeration used by the permanent and coefficient kernels.

use num_complex::Complex64;

/// Sum a slice of complex values with a fixed pairwise halving tree.
///
/// The reduction order depends only on the slice length, never on thread
/// scheduling, so repeated runs produce bit-identical results.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 8 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Natural log of n! computed by direct summation.  Exact enough for the
/// scale factors used here (relative error well below 1e-13 for n <= 10^6).
pub fn ln_factorial(n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 2..=n {
        acc += (i as f64).ln();
    }
    acc
}

/// n! as an exact f64 when it is exactly representable (n <= 20), else None.
pub fn factorial_exact(n: usize) -> Option<f64> {
    if n > 20 {
        return None;
    }
    let mut acc = 1.0;
    for i in 2..=n {
        acc *= i as f64;
    }
    Some(acc)
}

/// Falling factorial n * (n-1) * ... * (n-k+1) as f64 (exact for desk-scale
/// arguments; callers switch to `ln_falling_factorial` when it overflows).
pub fn falling_factorial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64;
    }
    acc
}

/// Natural log of the falling factorial n^(k underline).
pub fn ln_falling_factorial(n: usize, k: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..k {
        acc += ((n - i) as f64).ln();
    }
    acc
}

/// Binomial coefficient C(n, k) in u128, saturating on overflow.
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Multiply before dividing keeps every intermediate an integer.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Predicted work for one coefficient order: C(n,k)^d * (k!)^(d-1) products,
/// saturating at u128::MAX.
pub fn coefficient_work(n: usize, k: usize, d: usize) -> u128 {
    let c = binomial_u128(n, k);
    let mut acc: u128 = 1;
    for _ in 0..d {
        acc = acc.saturating_mul(c);
    }
    let mut kf: u128 = 1;
    for i in 2..=k {
        kf = kf.saturating_mul(i as u128);
    }
    for _ in 0..d.saturating_sub(1) {
        acc = acc.saturating_mul(kf);
    }
    acc
}

/// Advance `combo` (0-based, strictly increasing, drawn from 0..n) to the next
/// combination in lexicographic order.  Returns false after the last one.
pub fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All k-combinations of 0..n in lexicographic order, flattened row-major.
pub fn all_combinations(n: usize, k: usize) -> Vec<usize> {
    let count = binomial_u128(n, k);
    assert!(count < u128::from(u32::MAX), "combination table too large");
    let mut out = Vec::with_capacity(count as usize * k);
    let mut combo: Vec<usize> = (0..k).collect();
    if k == 0 {
        return out;
    }
    loop {
        out.extend_from_slice(&combo);
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    out
}

/// Unrank a mixed-radix number: digit[i] in 0..radix, most significant first.
pub fn unrank_uniform_digits(mut rank: u128, radix: u128, digits: &mut [usize]) {
    for slot in digits.iter_mut().rev() {
        *slot = (rank % radix) as usize;
        rank /= radix;
    }
}
