//! Rational polyphase resampling with a Kaiser-windowed sinc low-pass.

const KAISER_BETA: f64 = 8.0;
/// Sinc zero crossings on each side of the filter centre, in units of the
/// output-side cutoff period.
const ZERO_CROSSINGS: usize = 32;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced `(up, down)` factors with `to/from = up/down`; rates are resolved
/// to a millihertz grid.
pub fn rational_ratio(from_hz: f64, to_hz: f64) -> (usize, usize) {
    let a = (from_hz * 1000.0).round() as u64;
    let b = (to_hz * 1000.0).round() as u64;
    let g = gcd(a, b).max(1);
    ((b / g) as usize, (a / g) as usize)
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Low-pass prototype at the up-sampled rate, with passband gain `up`.
fn design(up: usize, down: usize) -> Vec<f64> {
    let m = up.max(down);
    let half = ZERO_CROSSINGS * m;
    let n = 2 * half + 1;
    let fc = 0.5 / m as f64;
    let denom = bessel_i0(KAISER_BETA);
    (0..n)
        .map(|i| {
            let t = i as f64 - half as f64;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let r = t / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / denom;
            up as f64 * sinc * w
        })
        .collect()
}

/// Zero-phase resampling of `signal` from `from_hz` to `to_hz`. The output
/// has `round(len * to / from)` samples; the signal is zero outside its ends.
pub fn resample(signal: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    let (up, down) = rational_ratio(from_hz, to_hz);
    if up == down {
        return signal.to_vec();
    }
    let out_len = (signal.len() as f64 * to_hz / from_hz).round() as usize;
    let h = design(up, down);
    let delay = (h.len() - 1) / 2;
    let n_in = signal.len() as i64;
    let (up_i, delay_i, taps) = (up as i64, delay as i64, h.len() as i64);
    (0..out_len)
        .map(|m| {
            // y[m] = Σ_n x[n] h[m·down + delay − n·up]
            let pos = (m * down) as i64 + delay_i;
            let n_hi = (pos / up_i).min(n_in - 1);
            let n_lo = ((pos - taps + 1 + up_i - 1).div_euclid(up_i)).max(0);
            let mut acc = 0.0;
            let mut n = n_lo;
            while n <= n_hi {
                acc += signal[n as usize] * h[(pos - n * up_i) as usize];
                n += 1;
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_reduces() {
        assert_eq!(rational_ratio(250.0, 100.0), (2, 5));
        assert_eq!(rational_ratio(256.0, 100.0), (25, 64));
        assert_eq!(rational_ratio(100.0, 100.0), (1, 1));
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-9);
    }

    #[test]
    fn same_rate_is_identity() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(resample(&x, 200.0, 200.0), x);
    }

    #[test]
    fn output_length_rounds() {
        assert_eq!(resample(&[0.0; 1001], 250.0, 100.0).len(), 400);
        assert_eq!(resample(&[0.0; 1003], 250.0, 100.0).len(), 401);
        assert_eq!(resample(&[0.0; 10], 100.0, 250.0).len(), 25);
    }

    #[test]
    fn dc_passes_with_unit_gain() {
        let y = resample(&[3.0; 5000], 250.0, 100.0);
        for &v in &y[200..1800] {
            assert!((v - 3.0).abs() < 1e-3, "{v}");
        }
    }
}
