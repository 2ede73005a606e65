use crate::error::{check_len, Result};
use crate::image::ImageTensor;

/// `20 log10(max(reference) / sqrt(mse))` in dB; `+inf` when the images are
/// identical.
pub fn psnr(reference: &ImageTensor, image: &ImageTensor) -> Result<f64> {
    reference.ensure_same_shape(image)?;
    Ok(psnr_slices(reference.as_slice(), image.as_slice()))
}

pub(crate) fn psnr_slices(reference: &[f64], image: &[f64]) -> f64 {
    let mse = reference
        .iter()
        .zip(image)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    20.0 * (peak / mse.sqrt()).log10()
}

/// `0.9 prev + 0.1 current`.
pub fn ema_smooth(prev: &ImageTensor, current: &ImageTensor) -> Result<ImageTensor> {
    prev.ensure_same_shape(current)?;
    let mut out = prev.clone();
    ema_in_place(out.as_mut_slice(), current.as_slice())?;
    Ok(out)
}

pub(crate) fn ema_in_place(acc: &mut [f64], current: &[f64]) -> Result<()> {
    check_len(acc.len(), current.len())?;
    acc.iter_mut().zip(current).for_each(|(r, x)| *r = 0.9 * *r + 0.1 * x);
    Ok(())
}

/// Mean and sample standard deviation (`n - 1` denominator; zero for a single
/// value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    #[test]
    fn psnr_closed_forms() {
        let s = Shape::new(2, 2, 1);
        let r = ImageTensor::new(s, vec![1.0, 0.0, 0.5, 0.2]).unwrap();
        assert_eq!(psnr(&r, &r).unwrap(), f64::INFINITY);
        let shifted = r.map(|v| v + 0.1);
        assert!((psnr(&r, &shifted).unwrap() - 20.0).abs() < 1e-12);
        let far = r.map(|v| v + 1.0);
        assert!(psnr(&r, &far).unwrap().abs() < 1e-12);
        assert!(psnr(&r, &ImageTensor::zeros(Shape::new(1, 4, 1))).is_err());
    }

    #[test]
    fn ema_steps() {
        let s = Shape::new(1, 2, 1);
        let zero = ImageTensor::zeros(s);
        let one = ImageTensor::filled(s, 1.0);
        let r = ema_smooth(&zero, &one).unwrap();
        assert!(r.as_slice().iter().all(|&v| (v - 0.1).abs() < 1e-15));
        assert_eq!(ema_smooth(&one, &one).unwrap(), one);
        let mut acc = zero;
        for t in 1..=20 {
            acc = ema_smooth(&acc, &one).unwrap();
            let gap = 1.0 - acc.as_slice()[0];
            assert!((gap - 0.9f64.powi(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
