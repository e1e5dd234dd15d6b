//! Mixed-radix flattening of trajectories.
//!
//! A length-`len` trajectory over a `base`-symbol alphabet is flattened
//! time-major: the time-1 symbol is the most significant digit, so
//! `flat = sym_1 * base^(len-1) + ... + sym_len`. Joint state-action
//! tensors are indexed by `x_flat * base_u^T + u_flat`, i.e. axis order
//! (x_1, ..., x_T, u_1, ..., u_T).

/// `base^exp` with overflow checked at desk scale.
pub fn pow(base: usize, exp: usize) -> usize {
    base.checked_pow(exp as u32).expect("index overflow")
}

/// Decode `flat` into its `len` digits, most significant (earliest time) first.
pub fn decode(flat: usize, base: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0usize; len];
    let mut rest = flat;
    for t in (0..len).rev() {
        digits[t] = rest % base;
        rest /= base;
    }
    debug_assert_eq!(rest, 0);
    digits
}

/// Flatten digits (most significant first).
pub fn encode(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// First `keep` digits of `flat` as a flat prefix index.
pub fn prefix(flat: usize, base: usize, len: usize, keep: usize) -> usize {
    debug_assert!(keep <= len);
    flat / pow(base, len - keep)
}

/// Digit at 1-based time `t` of `flat`.
pub fn digit(flat: usize, base: usize, len: usize, t: usize) -> usize {
    debug_assert!(1 <= t && t <= len);
    (flat / pow(base, len - t)) % base
}
