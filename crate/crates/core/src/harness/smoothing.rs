use crate::error::{Error, Result};

/// Centered box filter of width `window`. Near the edges the kernel is
/// truncated and renormalized, so the output has the same length.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("smoothing window must be >= 1"));
    }
    let n = values.len();
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        prefix.push(acc);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(n - 1);
            if window == 1 {
                values[i]
            } else {
                (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
            }
        })
        .collect())
}

/// Gaussian kernel with standard deviation `sigma` (in rows), cut at four
/// standard deviations and renormalized at the edges.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    let radius = (4.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let (mut num, mut den) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                num += w * v;
                den += w;
            }
            num / den
        })
        .collect())
}

/// Mean of the last `window` values ending at each index (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("smoothing window must be >= 1"));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if i >= window {
            acc -= values[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// First index where the trailing mean of `losses` exceeds `factor` times its
/// running minimum, with the minimum clamped from below at `floor`. A
/// non-finite loss counts as a spike.
pub fn first_loss_spike(losses: &[f64], window: usize, factor: f64, floor: f64) -> Result<Option<usize>> {
    if !(factor > 1.0) {
        return Err(Error::invalid(format!("spike factor must be > 1, got {factor}")));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::invalid(format!("spike floor must be finite and >= 0, got {floor}")));
    }
    let smooth = trailing_mean(losses, window)?;
    let mut running_min = f64::INFINITY;
    for (i, s) in smooth.iter().enumerate() {
        if !s.is_finite() {
            return Ok(Some(i));
        }
        if i + 1 >= window {
            if *s > factor * running_min.max(floor) {
                return Ok(Some(i));
            }
            running_min = running_min.min(*s);
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_one_is_identity() {
        let v = vec![1.0, -2.0, 5.5, 0.25];
        assert_eq!(moving_average(&v, 1).unwrap(), v);
    }

    #[test]
    fn constant_is_preserved() {
        let v = vec![3.25; 40];
        for w in [1, 2, 7, 50, 100] {
            for x in moving_average(&v, w).unwrap() {
                assert!((x - 3.25).abs() < 1e-12);
            }
        }
        for s in [0.5, 3.0, 20.0] {
            for x in gaussian_smooth(&v, s).unwrap() {
                assert!((x - 3.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_spreads_over_window() {
        let mut v = vec![0.0; 200];
        v[100] = 1.0;
        let s = moving_average(&v, 50).unwrap();
        let nonzero: Vec<usize> = (0..200).filter(|&i| s[i] != 0.0).collect();
        assert_eq!(nonzero.len(), 50);
        for i in nonzero {
            assert!((s[i] - 0.02).abs() < 1e-15);
        }
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass_conserved_in_interior() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let s = gaussian_smooth(&v, 3.0).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[50] > s[53] && s[53] > s[56]);
        assert!((s[47] - s[53]).abs() < 1e-15);
    }

    #[test]
    fn bad_parameters() {
        assert!(moving_average(&[1.0], 0).is_err());
        assert!(gaussian_smooth(&[1.0], 0.0).is_err());
        assert!(first_loss_spike(&[1.0], 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn trailing() {
        let t = trailing_mean(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(t, vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn spikes() {
        let mut losses = vec![1.0; 100];
        assert_eq!(first_loss_spike(&losses, 10, 10.0, 0.0).unwrap(), None);
        losses.extend(vec![0.1; 50]);
        losses.extend(vec![5.0; 50]);
        let hit = first_loss_spike(&losses, 10, 10.0, 0.0).unwrap().unwrap();
        assert!(hit > 150 && hit < 160, "{hit}");
        let mut nan = vec![1.0; 20];
        nan[15] = f64::NAN;
        assert_eq!(first_loss_spike(&nan, 5, 10.0, 0.0).unwrap(), Some(15));
        assert!(first_loss_spike(&[1.0], 1, 10.0, -1.0).is_err());
    }

    #[test]
    fn floor_ignores_noise_near_zero() {
        let mut losses = vec![1e-12; 100];
        losses.extend(vec![1e-9; 100]);
        assert!(first_loss_spike(&losses, 10, 10.0, 0.0).unwrap().is_some());
        assert_eq!(first_loss_spike(&losses, 10, 10.0, 0.01).unwrap(), None);
        losses.extend(vec![0.5; 100]);
        let hit = first_loss_spike(&losses, 10, 10.0, 0.01).unwrap().unwrap();
        assert!((200..210).contains(&hit), "{hit}");
    }
}
