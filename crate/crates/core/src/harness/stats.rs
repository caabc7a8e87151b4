use statrs::distribution::{ContinuousCDF, Normal};

use super::HarnessError;

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Paired two-sided signed-rank test on `a - b`. Zero differences are
/// dropped before ranking; tied magnitudes share their average rank. For
/// n <= 25 the p-value counts all 2^n sign assignments; above that a normal
/// approximation with tie and continuity correction is used.
pub fn wilcoxon_paired(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, HarnessError> {
    if a.len() != b.len() {
        return Err(HarnessError::Config(format!("unpaired samples: {} vs {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(HarnessError::Config("non-finite sample".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            p_value: 1.0,
            exact: true,
        });
    }
    let (ranks2, tie_groups) = doubled_ranks(&d);
    let w2: u64 = d.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let w_plus = w2 as f64 / 2.0;
    if n <= EXACT_MAX_N {
        let counts = sign_distribution(&ranks2);
        let total = (n as f64).exp2();
        let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / total;
        let upper: f64 = counts[w2 as usize..].iter().sum::<f64>() / total;
        return Ok(WilcoxonResult {
            n,
            w_plus,
            p_value: (2.0 * lower.min(upper)).min(1.0),
            exact: true,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_groups.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        p_value,
        exact: false,
    })
}

/// Twice the average rank of each |d| (so ties stay integral), plus the
/// sizes of tie groups.
fn doubled_ranks(d: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        // ranks i+1..=j+1, doubled average = i + j + 2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        groups.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, groups)
}

/// Number of sign assignments giving each doubled positive-rank sum.
fn sign_distribution(ranks2: &[u64]) -> Vec<f64> {
    let max: u64 = ranks2.iter().sum();
    let mut counts = vec![0.0f64; max as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Benjamini-Hochberg step-up adjustment with `m` total hypotheses
/// (`m >= p.len()`; pass `p.len()` for the usual case). Output order matches
/// the input.
pub fn bh_correct(p: &[f64], m: usize) -> Result<Vec<f64>, HarnessError> {
    if m < p.len() {
        return Err(HarnessError::Config(format!("m = {m} is smaller than the {} p-values", p.len())));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(HarnessError::Config(format!("p-value {bad} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut q = vec![0.0; p.len()];
    let mut running = 1.0f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (pos + 1) as f64);
        q[i] = running;
    }
    Ok(q)
}

/// Rounds half-up to `decimals` after first cutting to 12 significant
/// digits, so `0.0585` computed as `0.05849999...` still rounds to 0.059.
pub fn round_half_up(v: f64, decimals: i32) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let cleaned: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let scale = 10f64.powi(decimals);
    let scaled: f64 = format!("{:.11e}", cleaned * scale).parse().unwrap_or(cleaned * scale);
    (scaled.abs() + 0.5).floor().copysign(scaled) / scale
}
