use statrs::function::gamma::ln_gamma;

/// Gegenbauer polynomial `C_n^{(α)}(t)` by the three-term recurrence.
///
/// At `t = 1` the closed form `Γ(n+2α) / (Γ(2α) Γ(n+1))` is used instead.
pub fn gegenbauer(n: usize, alpha: f64, t: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    debug_assert!(t.abs() <= 1.0 + 1e-12, "gegenbauer argument {t} outside [-1, 1]");
    if t == 1.0 {
        return gegenbauer_at_one(n, alpha);
    }
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * alpha * t;
    for k in 2..=n {
        let kf = k as f64;
        let next = (2.0 * t * (kf + alpha - 1.0) * cur - (kf + 2.0 * alpha - 2.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    cur
}

/// `C_n^{(α)}(1) = Γ(n+2α) / (Γ(2α) Γ(n+1))`.
pub fn gegenbauer_at_one(n: usize, alpha: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let two_alpha = 2.0 * alpha;
    // integer 2α: exact product form avoids lgamma round-off
    if (two_alpha - two_alpha.round()).abs() == 0.0 {
        let m = two_alpha as usize;
        // binomial(n + m - 1, n)
        let mut acc = 1.0;
        for i in 1..=n {
            acc *= (m - 1 + i) as f64 / i as f64;
        }
        return acc;
    }
    (ln_gamma(n as f64 + two_alpha) - ln_gamma(two_alpha) - ln_gamma(n as f64 + 1.0)).exp()
}

/// `C_0, …, C_{out.len()-1}` at `t` in one recurrence pass.
pub fn gegenbauer_sequence(alpha: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if t == 1.0 {
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = gegenbauer_at_one(n, alpha);
        }
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 2.0 * alpha * t;
    }
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = (2.0 * t * (kf + alpha - 1.0) * out[k - 1] - (kf + 2.0 * alpha - 2.0) * out[k - 2]) / kf;
    }
}
