//! Order statistics on unsorted samples.

fn sorted(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(data: &[f64]) -> f64 {
    quantile_sorted(&sorted(data), 0.5)
}

pub fn iqr(data: &[f64]) -> f64 {
    let s = sorted(data);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Sample standard deviation with divisor n − 1.
pub fn std_dev(data: &[f64]) -> f64 {
    let m = mean(data);
    let ss: f64 = data.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (data.len() as f64 - 1.0)).sqrt()
}
