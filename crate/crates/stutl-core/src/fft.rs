//! In-place radix-2 complex FFT with a precomputed twiddle half-table.

/// Forward DFT: X_k = sum_m x_m e^{-2 pi i m k / n}. Length must be a
/// power of two.
pub(crate) fn fft_forward(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n < 2 {
        return;
    }

    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n - 1 {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut mask = n >> 1;
        while j & mask != 0 {
            j &= !mask;
            mask >>= 1;
        }
        j |= mask;
    }

    let half = n / 2;
    let mut wr = Vec::with_capacity(half);
    let mut wi = Vec::with_capacity(half);
    for k in 0..half {
        let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        wr.push(ang.cos());
        wi.push(ang.sin());
    }

    let mut len = 2;
    while len <= n {
        let stride = n / len;
        let mut start = 0;
        while start < n {
            for k in 0..len / 2 {
                let (twr, twi) = (wr[k * stride], wi[k * stride]);
                let (a, b) = (start + k, start + k + len / 2);
                let tr = twr * re[b] - twi * im[b];
                let ti = twr * im[b] + twi * re[b];
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
            start += len;
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft_naive(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut or = vec![0.0; n];
        let mut oi = vec![0.0; n];
        for k in 0..n {
            for m in 0..n {
                let ang = -2.0 * std::f64::consts::PI * (m * k % n) as f64 / n as f64;
                let (c, s) = (ang.cos(), ang.sin());
                or[k] += re[m] * c - im[m] * s;
                oi[k] += re[m] * s + im[m] * c;
            }
        }
        (or, oi)
    }

    #[test]
    fn matches_naive_dft() {
        let n = 64;
        let mut re: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut im: Vec<f64> = (0..n).map(|i| ((i * 5 + 1) % 13) as f64 / 3.0).collect();
        let (er, ei) = dft_naive(&re, &im);
        fft_forward(&mut re, &mut im);
        for k in 0..n {
            assert!((re[k] - er[k]).abs() < 1e-9, "re[{k}]");
            assert!((im[k] - ei[k]).abs() < 1e-9, "im[{k}]");
        }
    }

    #[test]
    fn impulse_transforms_flat() {
        let mut re = vec![0.0; 16];
        let mut im = vec![0.0; 16];
        re[0] = 1.0;
        fft_forward(&mut re, &mut im);
        for k in 0..16 {
            assert!((re[k] - 1.0).abs() < 1e-12);
            assert!(im[k].abs() < 1e-12);
        }
    }
}
