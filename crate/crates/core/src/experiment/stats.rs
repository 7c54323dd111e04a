//! Paired t statistics with a self-contained Student-t distribution.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
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
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Paired comparison `C - NC` across participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEffect {
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    /// Infinite when the differences have zero spread; serialized as a
    /// `"+inf"` / `"-inf"` string.
    #[serde(serialize_with = "ser_sentinel", deserialize_with = "de_sentinel")]
    pub t: f64,
    pub df: usize,
    pub p: f64,
    /// Zero standard error: `t` is a sentinel rather than a statistic.
    pub degenerate: bool,
}

/// Values sorted before summing so the result ignores input order.
pub fn order_free_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn paired_effect(differences: &[f64]) -> Result<PairedEffect> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("paired test needs at least 2 pairs, got {n}")));
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite paired difference".into()));
    }
    let estimate = order_free_mean(differences).expect("n >= 2");
    // Identical differences can still leave round-off in the mean.
    let constant = differences.iter().all(|&d| d == differences[0]);
    let squares: Vec<f64> = differences.iter().map(|d| (d - estimate).powi(2)).collect();
    let var = order_free_mean(&squares).expect("n >= 2") * n as f64 / (n - 1) as f64;
    let se = if constant { 0.0 } else { (var / n as f64).sqrt() };
    let df = n - 1;
    let (t, p, degenerate) = if se > 0.0 {
        let t = estimate / se;
        (t, t_two_sided_p(t, df as f64), false)
    } else if estimate == 0.0 {
        (0.0, 1.0, true)
    } else {
        (f64::INFINITY.copysign(estimate), 0.0, true)
    };
    Ok(PairedEffect {
        n,
        estimate,
        se,
        t,
        df,
        p,
        degenerate,
    })
}

fn ser_sentinel<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "+inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn de_sentinel<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(s) => match s.as_str() {
            "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!("bad t sentinel {other:?}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_critical_values() {
        // Two-sided 5% and 0.1% critical values of Student's t.
        for (t, df, p) in [(2.228, 10.0, 0.05), (2.201, 11.0, 0.05), (4.437, 11.0, 0.001), (1.96, 1e6, 0.05)] {
            let got = t_two_sided_p(t, df);
            assert!((got - p).abs() / p < 2e-3, "t={t} df={df}: {got}");
        }
    }

    #[test]
    fn gamma_at_integers() {
        for (n, fact) in [(1.0, 1.0), (2.0, 1.0), (5.0, 24.0), (10.0, 362_880.0)] {
            assert!((ln_gamma(n) - f64::ln(fact)).abs() < 1e-12);
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_is_degenerate() {
        let e = paired_effect(&[0.4, 0.4, 0.4]).unwrap();
        assert!(e.degenerate && e.t == f64::INFINITY && e.p == 0.0);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"t\":\"+inf\""));
        let back: PairedEffect = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        let z = paired_effect(&[0.0, 0.0]).unwrap();
        assert!(z.degenerate && z.t == 0.0 && z.p == 1.0);
    }

    #[test]
    fn order_free_mean_ignores_order() {
        let a = [0.1, 1e16, -1e16, 0.3, 0.7];
        let b = [0.7, -1e16, 0.3, 1e16, 0.1];
        assert_eq!(order_free_mean(&a), order_free_mean(&b));
    }
}
