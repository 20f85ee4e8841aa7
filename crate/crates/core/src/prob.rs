//! Geometric-series kernel shared by the source and link models.

/// Probability of at least one success in `n` independent attempts with
/// per-attempt probability `p`, i.e. 1 − (1 − p)^n = Σ_{i<n} p(1 − p)^i.
///
/// Evaluated as −expm1(n·ln(1 − p)) so that tiny `p` keeps full precision.
pub fn at_least_one(p: f64, n: u64) -> f64 {
    if p >= 1.0 {
        return if n == 0 { 0.0 } else { 1.0 };
    }
    if n == 1 {
        return p;
    }
    -((n as f64) * (-p).ln_1p()).exp_m1()
}

/// First-order approximation n·p of [`at_least_one`].
pub fn at_least_one_linear(p: f64, n: u64) -> f64 {
    n as f64 * p
}
