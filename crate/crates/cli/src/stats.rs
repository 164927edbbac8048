//! Summary statistics and rank correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with n - 2 dof.
    pub p_value: f64,
    pub n: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Spearman {
    assert_eq!(x.len(), y.len(), "paired samples");
    let n = x.len();
    let rho = pearson(&ranks(x), &ranks(y));
    let p_value = if n < 3 || !rho.is_finite() {
        f64::NAN
    } else if rho.abs() >= 1.0 {
        0.0
    } else {
        let dof = (n - 2) as f64;
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Spearman { rho, p_value, n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_matches_closed_form_without_ties() {
        // rho = 1 - 6 sum d^2 / (n (n^2 - 1))
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let rx = ranks(&x);
        let ry = ranks(&y);
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let n = x.len() as f64;
        let expected = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        let s = spearman(&x, &y);
        assert!((s.rho - expected).abs() < 1e-12);
        assert!(s.p_value > 0.0 && s.p_value < 1.0);
    }

    #[test]
    fn monotone_data_gives_unit_correlation() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v * v).collect();
        let s = spearman(&x, &y);
        assert_eq!(s.rho, -1.0);
        assert_eq!(s.p_value, 0.0);
    }

    #[test]
    fn t_approximation_p_value() {
        // y = x with the two halves swapped in blocks; rho from the closed form,
        // p from tabulated t quantiles: t(10) = 2.228 at p = 0.05.
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let y = [2.0, 0.0, 1.0, 5.0, 3.0, 4.0, 8.0, 6.0, 7.0, 11.0, 9.0, 10.0];
        let s = spearman(&x, &y);
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let expected = 1.0 - 6.0 * d2 / (12.0 * 143.0);
        assert!((s.rho - expected).abs() < 1e-12);
        let t = s.rho * (10.0 / (1.0 - s.rho * s.rho)).sqrt();
        assert!(t > 2.228 && s.p_value < 0.05);
        let noisy = [5.0, 0.0, 9.0, 2.0, 11.0, 4.0, 1.0, 8.0, 3.0, 10.0, 6.0, 7.0];
        let s = spearman(&x, &noisy);
        let t = s.rho * (10.0 / (1.0 - s.rho * s.rho)).sqrt();
        assert_eq!(t.abs() < 2.228, s.p_value > 0.05);
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(std_dev(&[3.0]), 0.0);
    }
}
