/// Bessel function of the first kind J_n(x), by Miller's backward recurrence
/// normalized with J_0 + 2 sum_k J_2k = 1.
///
/// Accurate to ~1e-15 absolute for moderate arguments; the recurrence start
/// index grows with `max(n, |x|)` so large arguments stay stable.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ax = x.abs();
    let scale = (n as f64).max(ax);
    let mut top = scale.ceil() as usize + 40 + (40.0 * scale).sqrt().ceil() as usize;
    top += top % 2;

    const BIG: f64 = 1e250;
    const BIG_INV: f64 = 1e-250;

    // j_next = J_{k+1}, j = J_k while walking k downward from `top`
    let mut j_next = 0.0;
    let mut j = 1e-300;
    let mut wanted = if top == n as usize { j } else { 0.0 };
    let mut norm = if top.is_multiple_of(2) { 2.0 * j } else { 0.0 };
    for k in (1..=top).rev() {
        let j_prev = 2.0 * k as f64 / ax * j - j_next;
        j_next = j;
        j = j_prev;
        let idx = k - 1;
        if idx == n as usize {
            wanted = j;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * j;
        }
        if j.abs() > BIG {
            j *= BIG_INV;
            j_next *= BIG_INV;
            wanted *= BIG_INV;
            norm *= BIG_INV;
        }
    }
    norm += j;
    let value = wanted / norm;
    if x < 0.0 && n % 2 == 1 {
        -value
    } else {
        value
    }
}
