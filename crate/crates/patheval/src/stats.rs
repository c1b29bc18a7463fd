//! Statistical primitives used across the toolkit: Pearson/Spearman
//! correlation, Welch's two-sample t-test, Student-t tail probabilities, and
//! word error rate.
//!
//! Everything here is implemented from first principles on `f64`; p-values go
//! through the regularized incomplete beta function, so no lookup tables and
//! no external stats crates are involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Small numeric helpers shared across the crate.

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by n).
pub(crate) fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Sample variance (divide by n - 1). Requires `xs.len() >= 2`.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub(crate) fn ensure_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput { what });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Special functions.

/// Natural log of the gamma function (Lanczos approximation, g = 7).
///
/// Accurate to ~1e-14 relative error over the positive reals, which is far
/// tighter than anything the significance tests need.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    use std::f64::consts::PI;
    if x < 0.5 {
        // Reflection formula keeps the series argument in its accurate range.
        PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        h *= d * c;

        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp();
    // Use the continued fraction directly where it converges fast, and the
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) elsewhere.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df > 0` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value for a t statistic: P(|T| >= |t|).
fn two_sided_t_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t))
}

// ---------------------------------------------------------------------------
// Correlation.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub kind: CorrelationKind,
    pub coefficient: f64,
    pub p_value: f64,
    pub n: usize,
}

/// A correlation that may be unavailable because the group was too small.
///
/// Reports keep the group visible instead of dropping it, so downstream
/// consumers can tell "not significant" apart from "not computable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MaybeCorrelation {
    Computed {
        #[serde(flatten)]
        result: CorrelationResult,
    },
    NotComputable {
        n: usize,
    },
}

impl MaybeCorrelation {
    pub fn computed(&self) -> Option<&CorrelationResult> {
        match self {
            MaybeCorrelation::Computed { result } => Some(result),
            MaybeCorrelation::NotComputable { .. } => None,
        }
    }
}

/// Pearson product-moment correlation with a two-sided p-value from the
/// t distribution with n - 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "correlation inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples {
            what: "correlation pairs",
            needed: 3,
            got: x.len(),
        });
    }
    ensure_finite(x, "correlation input x")?;
    ensure_finite(y, "correlation input y")?;

    let mx = mean(x);
    let my = mean(y);
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(Error::ZeroVariance {
            what: "correlation input x",
        });
    }
    if var_y == 0.0 {
        return Err(Error::ZeroVariance {
            what: "correlation input y",
        });
    }
    let r = (cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p_value = if 1.0 - r * r <= f64::EPSILON {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        two_sided_t_p(t, df)
    };
    Ok(CorrelationResult {
        kind: CorrelationKind::Pearson,
        coefficient: r,
        p_value,
        n: x.len(),
    })
}

/// Ranks with ties replaced by the average of the ranks they span (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks, with the same
/// t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "correlation inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    ensure_finite(x, "correlation input x")?;
    ensure_finite(y, "correlation input y")?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mut out = pearson(&rx, &ry)?;
    out.kind = CorrelationKind::Spearman;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Welch's t-test.

/// Significance stars for a p-value: `***` p < .001, `**` p < .01, `*` p < .05.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "ns")]
    NotSignificant,
    #[serde(rename = "*")]
    P05,
    #[serde(rename = "**")]
    P01,
    #[serde(rename = "***")]
    P001,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Significance::P001
        } else if p < 0.01 {
            Significance::P01
        } else if p < 0.05 {
            Significance::P05
        } else {
            Significance::NotSignificant
        }
    }
}

impl std::fmt::Display for Significance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Significance::NotSignificant => "ns",
            Significance::P05 => "*",
            Significance::P01 => "**",
            Significance::P001 => "***",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub stars: Significance,
}

/// Welch's unequal-variance two-sample t-test (two-sided), with
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for (v, what) in [(a, "samples in first group"), (b, "samples in second group")] {
        if v.len() < 2 {
            return Err(Error::TooFewSamples {
                what,
                needed: 2,
                got: v.len(),
            });
        }
    }
    ensure_finite(a, "t-test group a")?;
    ensure_finite(b, "t-test group b")?;

    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let sea = sample_variance(a) / na;
    let seb = sample_variance(b) / nb;
    let se2 = sea + seb;

    if se2 == 0.0 {
        if ma == mb {
            return Err(Error::Degenerate {
                detail: "both groups have zero variance and equal means".into(),
            });
        }
        // Zero spread but distinct means: the separation is unambiguous.
        let t = if ma > mb {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        return Ok(TTestResult {
            t_statistic: t,
            degrees_of_freedom: na + nb - 2.0,
            p_value: 0.0,
            stars: Significance::P001,
        });
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    let p = two_sided_t_p(t, df);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        stars: Significance::from_p(p),
    })
}

// ---------------------------------------------------------------------------
// Word error rate.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerResult {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_reference_words: usize,
}

impl WerResult {
    pub fn total_edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer(&self) -> f64 {
        self.total_edits() as f64 / self.n_reference_words as f64
    }
}

/// Minimum-edit-distance word error rate with a substitution/deletion/
/// insertion breakdown.
///
/// The alignment is the standard Levenshtein DP; when several alignments tie,
/// the backtrace prefers substitution (or match), then deletion, then
/// insertion, so the breakdown is deterministic.
pub fn word_error_rate<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<WerResult> {
    if reference.is_empty() {
        return Err(Error::EmptyInput {
            what: "reference transcript",
        });
    }
    let r = reference.len();
    let h = hypothesis.len();
    let mut dp = vec![vec![0usize; h + 1]; r + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h {
        dp[0][j] = j;
    }
    for i in 1..=r {
        for j in 1..=h {
            let sub_cost = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            dp[i][j] = (dp[i - 1][j - 1] + sub_cost)
                .min(dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1);
        }
    }

    let (mut i, mut j) = (r, h);
    let (mut subs, mut dels, mut inss) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            if dp[i][j] == dp[i - 1][j - 1] + sub_cost {
                subs += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            dels += 1;
            i -= 1;
            continue;
        }
        // Only reachable with j > 0: at j == 0 the deletion branch always fires.
        inss += 1;
        j -= 1;
    }

    Ok(WerResult {
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        n_reference_words: r,
    })
}

// ---------------------------------------------------------------------------
