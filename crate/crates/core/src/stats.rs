//! Small statistical helpers: Bernoulli standard errors and a two-sample
//! chi-square homogeneity test.

/// Standard error of a Bernoulli mean `p` estimated from `n` draws.
pub fn bernoulli_std_err(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    libm::sqrt((p * (1.0 - p)).max(0.0) / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Tests whether two samples of category counts come from the same law.
///
/// Categories empty in both samples are dropped. With fewer than two
/// categories left there is nothing to compare and the p-value is 1.
pub fn chi_square_homogeneity(pairs: impl IntoIterator<Item = (u64, u64)>) -> ChiSquare {
    let cells: alloc::vec::Vec<(u64, u64)> =
        pairs.into_iter().filter(|&(a, b)| a + b > 0).collect();
    let n1: u64 = cells.iter().map(|c| c.0).sum();
    let n2: u64 = cells.iter().map(|c| c.1).sum();
    if cells.len() < 2 || n1 == 0 || n2 == 0 {
        return ChiSquare {
            statistic: 0.0,
            df: cells.len().saturating_sub(1),
            p_value: 1.0,
        };
    }
    let total = (n1 + n2) as f64;
    let mut statistic = 0.0;
    for &(a, b) in &cells {
        let row = (a + b) as f64;
        let e1 = row * n1 as f64 / total;
        let e2 = row * n2 as f64 / total;
        statistic +=
            (a as f64 - e1) * (a as f64 - e1) / e1 + (b as f64 - e2) * (b as f64 - e2) / e2;
    }
    let df = cells.len() - 1;
    ChiSquare {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
    }
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

/// Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a)) * h
}
