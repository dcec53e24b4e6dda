//! Bessel functions of the first kind for integer order.
//!
//! Small arguments use the power series of the scaled function
//! `S_n(u) = J_n(u)/u^n`, which is entire and even. Larger arguments use
//! Miller's backward recurrence normalised by `J_0 + 2 Σ J_{2k} = 1`.

const SERIES_LIMIT: f64 = 4.0;

/// `J_n(u) / u^n`.
pub fn jn_scaled(n: u32, u: f64) -> f64 {
    let a = u.abs();
    if a <= SERIES_LIMIT {
        return scaled_series(n, a);
    }
    miller(n, a) / a.powi(n as i32)
}

pub fn jn(n: u32, u: f64) -> f64 {
    let a = u.abs();
    let v = if a <= SERIES_LIMIT {
        scaled_series(n, a) * a.powi(n as i32)
    } else {
        miller(n, a)
    };
    if u < 0.0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

pub fn j0(u: f64) -> f64 {
    jn(0, u)
}

pub fn j1(u: f64) -> f64 {
    jn(1, u)
}

fn scaled_series(n: u32, a: f64) -> f64 {
    let q = -0.25 * a * a;
    // leading term 1 / (2^n n!)
    let mut term = 1.0;
    for k in 1..=n {
        term /= 2.0 * k as f64;
    }
    let mut sum = term;
    for m in 1..200u32 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(n: u32, a: f64) -> f64 {
    let top = (n as f64).max(a) + 30.0 + (40.0 * a).sqrt();
    let mut m = top as usize;
    m += m % 2;
    let (mut above, mut cur) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (1..=m).rev() {
        // cur holds J_k, above holds J_{k+1}
        if k == n as usize {
            want = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let below = 2.0 * k as f64 / a * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            above *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    norm += cur;
    if n == 0 {
        want = cur;
    }
    want / norm
}
