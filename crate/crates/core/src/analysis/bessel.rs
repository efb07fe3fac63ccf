//! `J0`, `J1` and the positive zeros of `J1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest zero index served by [`bessel_j1_zero`].
pub const MAX_ZERO_INDEX: usize = 50;

const SERIES_LIMIT: f64 = 12.0;

/// Ascending series `sum (-1)^k (x/2)^(2k+n) / (k! (k+n)!)` for `n = 0, 1`.
fn series(n: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if n == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n as usize) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `(J0(x), J1(x))` by backward recurrence normalised with
/// `J0 + 2 sum J_2k = 1`. Accurate for every `x > 0`.
fn miller(x: f64) -> (f64, f64) {
    let start = 2 * ((x + 30.0 + 3.0 * x.sqrt()) as usize / 2 + 10);
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let (mut j0, mut j1) = (0.0, 0.0);
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let jm1 = 2.0 * n as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        let m = n - 1;
        if m % 2 == 0 && m > 0 {
            norm += 2.0 * j;
        }
        if m == 1 {
            j1 = j;
        }
        if m == 0 {
            j0 = j;
        }
        if j.abs() > 1e250 {
            jp1 *= 1e-250;
            j *= 1e-250;
            j1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

pub fn bessel_j0(x: f64) -> f64 {
    let a = x.abs();
    if a <= SERIES_LIMIT {
        series(0, a)
    } else {
        miller(a).0
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let a = x.abs();
    let v = if a <= SERIES_LIMIT {
        series(1, a)
    } else {
        miller(a).1
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(if flo.abs() <= f(hi).abs() { lo } else { hi })
}

fn check_index(m: usize) -> Result<()> {
    if m == 0 || m > MAX_ZERO_INDEX {
        return Err(Error::Unsupported(format!(
            "zero index must lie in 1..={MAX_ZERO_INDEX}, got {m}"
        )));
    }
    Ok(())
}

/// `m`-th positive zero of `J1`, bracketed around the McMahon estimate.
pub fn bessel_j1_zero(m: usize) -> Result<f64> {
    check_index(m)?;
    let b = (m as f64 + 0.25) * PI;
    let guess = b - 3.0 / (8.0 * b);
    bisect(bessel_j1, guess - 0.5, guess + 0.5)
}

/// `m`-th positive zero of `J0`.
pub fn bessel_j0_zero(m: usize) -> Result<f64> {
    check_index(m)?;
    let b = (m as f64 - 0.25) * PI;
    let guess = b + 1.0 / (8.0 * b);
    bisect(bessel_j0, guess - 0.5, guess + 0.5)
}

/// CSV table `m,zeta_m` for `m = 1..=count`.
pub fn j1_zero_table_csv(count: usize) -> Result<String> {
    let mut out = String::from("m,zeta_m\n");
    for m in 1..=count {
        out.push_str(&format!("{m},{:.16e}\n", bessel_j1_zero(m)?));
    }
    Ok(out)
}
