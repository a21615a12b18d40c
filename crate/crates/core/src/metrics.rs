//! Survival evaluation: concordance index, Kaplan–Meier product-limit curves,
//! the Mantel–Haenszel log-rank test and median risk stratification.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvPoint {
    pub time: f64,
    pub event: bool,
    pub risk: f64,
}

/// Harrell's C over pairs with `t_i < t_j` and an event at `t_i`.
/// Tied risks count one half.
pub fn c_index(points: &[SurvPoint]) -> Result<f64> {
    let mut concordant = 0.0;
    let mut comparable = 0u64;
    for a in points {
        if !a.event {
            continue;
        }
        for b in points {
            if a.time < b.time {
                comparable += 1;
                if a.risk > b.risk {
                    concordant += 1.0;
                } else if a.risk == b.risk {
                    concordant += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedCIndex);
    }
    Ok(concordant / comparable as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub n: usize,
    pub steps: Vec<KmStep>,
}

impl KmCurve {
    /// Right-continuous step function; 1 before the first event.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(1.0, |s| s.survival)
    }
}

fn sorted_distinct_event_times(points: &[&SurvPoint]) -> Vec<f64> {
    let mut times: Vec<f64> = points.iter().filter(|p| p.event).map(|p| p.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Product-limit estimate. Observations censored at an event time stay in
/// the risk set for that time.
pub fn km_curve(points: &[SurvPoint]) -> KmCurve {
    let refs: Vec<&SurvPoint> = points.iter().collect();
    let mut s = 1.0;
    let steps = sorted_distinct_event_times(&refs)
        .into_iter()
        .map(|t| {
            let at_risk = points.iter().filter(|p| p.time >= t).count();
            let events = points.iter().filter(|p| p.event && p.time == t).count();
            s *= 1.0 - events as f64 / at_risk as f64;
            KmStep {
                time: t,
                survival: s,
                at_risk,
                events,
            }
        })
        .collect();
    KmCurve {
        n: points.len(),
        steps,
    }
}

/// `group,time,survival,at_risk` rows; each group starts with a time-0 row.
pub fn km_csv(curves: &[(&str, &KmCurve)]) -> String {
    let mut out = String::from("group,time,survival,at_risk\n");
    for (name, curve) in curves {
        let _ = writeln!(out, "{name},0,1,{}", curve.n);
        for s in &curve.steps {
            let _ = writeln!(out, "{name},{},{},{}", s.time, s.survival, s.at_risk);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub statistic: f64,
    pub p_value: f64,
    pub observed_a: f64,
    pub expected_a: f64,
    pub variance: f64,
}

pub fn logrank_test(group_a: &[SurvPoint], group_b: &[SurvPoint]) -> Result<LogRank> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidArgument("log-rank needs two nonempty groups".into()));
    }
    let pooled: Vec<&SurvPoint> = group_a.iter().chain(group_b).collect();
    let mut observed = 0.0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    for t in sorted_distinct_event_times(&pooled) {
        let n_a = group_a.iter().filter(|p| p.time >= t).count() as f64;
        let n_b = group_b.iter().filter(|p| p.time >= t).count() as f64;
        let d_a = group_a.iter().filter(|p| p.event && p.time == t).count() as f64;
        let d_b = group_b.iter().filter(|p| p.event && p.time == t).count() as f64;
        let n = n_a + n_b;
        let d = d_a + d_b;
        observed += d_a;
        expected += d * n_a / n;
        if n > 1.0 {
            variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1.0);
        }
    }
    if variance <= 0.0 {
        return Err(Error::DegenerateLogRank);
    }
    let statistic = (observed - expected).powi(2) / variance;
    Ok(LogRank {
        statistic,
        p_value: chi_square_sf(statistic, 1.0),
        observed_a: observed,
        expected_a: expected,
        variance,
    })
}

const GAMMA_TOL: f64 = 1e-12;
const GAMMA_MAX_ITER: usize = 10_000;

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9
    const C: [f64; 9] = [
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
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_TOL {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_TOL {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, x / 2.0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Split at the median risk: strictly above goes high, the rest low.
pub fn stratify_median(points: &[SurvPoint]) -> Result<(Vec<SurvPoint>, Vec<SurvPoint>)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("stratification needs at least 2 points".into()));
    }
    let m = median(&points.iter().map(|p| p.risk).collect::<Vec<_>>());
    let (high, low) = points.iter().partition(|p| p.risk > m);
    Ok((high, low))
}
