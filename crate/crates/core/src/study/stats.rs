//! Two-sample arm contrasts and the special functions behind them.
//!
//! The primary contrast is the pooled-variance two-sample t statistic
//! (equivalent to the slope test of a one-regressor OLS on a group
//! indicator); Welch's unpooled variant is available behind a flag.
//! P-values come from the Student-t CDF evaluated through the regularized
//! incomplete beta function, computed locally with a Lanczos log-gamma and
//! a Lentz continued fraction so results are bit-reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// How the two-group standard error is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    /// Pooled variance, df = n_c + n_t - 2.
    Pooled,
    /// Welch: unpooled variance, Satterthwaite df.
    Welch,
}

/// A two-group contrast: treatment minus control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub metric: String,
    /// mean(treatment) - mean(control).
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_control: usize,
    pub n_treatment: usize,
    pub t_stat: f64,
    pub df: f64,
    /// Zero variance in both groups: t is undefined and p is set by
    /// convention (1 when the means agree, 0 when they differ).
    pub degenerate: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("{group} group has {n} values; need at least 2")]
    GroupTooSmall { group: &'static str, n: usize },
    #[error("{group} group contains a non-finite value")]
    NonFinite { group: &'static str },
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
fn sample_variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Two-sample t contrast of `treatment` against `control`.
///
/// delta = mean_t - mean_c; the two-sided p-value is
/// I_{df/(df+t^2)}(df/2, 1/2) and the 95% CI is delta +/- t_{0.975,df} * se.
pub fn compare_arms(
    metric: &str,
    control: &[f64],
    treatment: &[f64],
    method: TestMethod,
) -> Result<EffectEstimate, StatsError> {
    if control.len() < 2 {
        return Err(StatsError::GroupTooSmall { group: "control", n: control.len() });
    }
    if treatment.len() < 2 {
        return Err(StatsError::GroupTooSmall { group: "treatment", n: treatment.len() });
    }
    if control.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { group: "control" });
    }
    if treatment.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { group: "treatment" });
    }

    let (nc, nt) = (control.len(), treatment.len());
    let (mc, mt) = (mean(control), mean(treatment));
    let (vc, vt) = (sample_variance(control, mc), sample_variance(treatment, mt));
    let delta = mt - mc;

    let (se, df) = match method {
        TestMethod::Pooled => {
            let pooled = ((nc - 1) as f64 * vc + (nt - 1) as f64 * vt) / (nc + nt - 2) as f64;
            let se = (pooled * (1.0 / nc as f64 + 1.0 / nt as f64)).sqrt();
            (se, (nc + nt - 2) as f64)
        }
        TestMethod::Welch => {
            let a = vc / nc as f64;
            let b = vt / nt as f64;
            let se = (a + b).sqrt();
            let df = (a + b).powi(2)
                / (a.powi(2) / (nc - 1) as f64 + b.powi(2) / (nt - 1) as f64);
            (se, df)
        }
    };

    if se == 0.0 {
        let equal = delta == 0.0;
        return Ok(EffectEstimate {
            metric: metric.to_string(),
            delta,
            ci_low: delta,
            ci_high: delta,
            p_value: if equal { 1.0 } else { 0.0 },
            n_control: nc,
            n_treatment: nt,
            t_stat: 0.0,
            df,
            degenerate: true,
        });
    }

    let t = delta / se;
    let p = two_sided_p(t, df);
    let t_crit = t_quantile(0.975, df);
    Ok(EffectEstimate {
        metric: metric.to_string(),
        delta,
        ci_low: delta - t_crit * se,
        ci_high: delta + t_crit * se,
        p_value: p,
        n_control: nc,
        n_treatment: nt,
        t_stat: t,
        df,
        degenerate: false,
    })
}

/// Two-sided p for a t statistic: P(|T_df| >= |t|).
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Student-t CDF via the regularized incomplete beta function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse Student-t CDF by bisection on [`t_cdf`].
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -t_quantile(1.0 - p, df);
    }
    let mut hi = 1.0f64;
    while t_cdf(hi, df) < p {
        hi *= 2.0;
        assert!(hi < 1e300, "quantile bracket diverged");
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Natural log of the gamma function (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    // canonical g = 7, n = 9 coefficient set, kept at full published precision
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction,
/// converged to 1e-12.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    assert!((0.0..=1.0).contains(&x), "x must lie in [0,1], got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fast only left of the central cut
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TOL: f64 = 1e-12;
    const FPMIN: f64 = 1e-300;
    const MAX_ITER: usize = 300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0f64;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < TOL {
            return h;
        }
    }
    h
}

/// Least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of y on x. None with fewer than two points or
/// when every x coincides.
pub fn ols(points: &[(f64, f64)]) -> Option<OlsFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(OlsFit { slope, intercept: my - slope * mx })
}

/// One question's accuracy under both materials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAccuracy {
    pub question_id: String,
    pub acc_original: f64,
    pub acc_simplified: f64,
    pub n_original: usize,
    pub n_simplified: usize,
}

impl QuestionAccuracy {
    pub fn improvement(&self) -> f64 {
        self.acc_simplified - self.acc_original
    }
}

/// Per-question accuracies with a least-squares fit of simplified on
/// original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQuestionTable {
    /// Ascending question id; only questions answered under both materials.
    pub rows: Vec<QuestionAccuracy>,
    pub fit: Option<OlsFit>,
    pub warnings: Vec<String>,
}

/// Builds the per-question accuracy table from (question_id, correct)
/// pairs for each material. Questions present on only one side are
/// excluded with a warning.
pub fn per_question_table(
    original: &[(String, bool)],
    simplified: &[(String, bool)],
) -> PerQuestionTable {
    fn tally(pairs: &[(String, bool)]) -> BTreeMap<&str, (usize, usize)> {
        let mut by_question: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (qid, correct) in pairs {
            let e = by_question.entry(qid).or_insert((0, 0));
            e.1 += 1;
            if *correct {
                e.0 += 1;
            }
        }
        by_question
    }
    let orig = tally(original);
    let simp = tally(simplified);

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (qid, (correct_o, n_o)) in &orig {
        match simp.get(qid) {
            Some((correct_s, n_s)) => rows.push(QuestionAccuracy {
                question_id: (*qid).to_string(),
                acc_original: *correct_o as f64 / *n_o as f64,
                acc_simplified: *correct_s as f64 / *n_s as f64,
                n_original: *n_o,
                n_simplified: *n_s,
            }),
            None => warnings
                .push(format!("question {qid} answered only under the original; excluded")),
        }
    }
    for qid in simp.keys() {
        if !orig.contains_key(qid) {
            warnings
                .push(format!("question {qid} answered only under the simplified; excluded"));
        }
    }
    let fit = ols(&rows.iter().map(|r| (r.acc_original, r.acc_simplified)).collect::<Vec<_>>());
    PerQuestionTable { rows, fit, warnings }
}

/// The k largest accuracy improvements, descending, ties by question id.
pub fn top_improvements(table: &PerQuestionTable, k: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> =
        table.rows.iter().map(|r| (r.question_id.clone(), r.improvement())).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}
