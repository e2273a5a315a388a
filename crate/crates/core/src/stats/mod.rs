//! Two-sample testing of per-pair similarity observations.
//!
//! [`hypothesis_pipeline`] records a Jarque–Bera normality check for both
//! samples, runs Levene's test and then Student's t-test when variances look
//! equal or Welch's otherwise. All tests are two-sided.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use special::{f_sf, ln_beta, ln_gamma, reg_inc_beta, reg_inc_beta_xy, t_sf};

pub const DEFAULT_GATE_ALPHA: f64 = 0.05;
pub const DEFAULT_HEADLINE_ALPHA: f64 = 0.001;
/// Jarque–Bera is asymptotic; below this size its result is only recorded
/// with a low-power flag.
pub const NORMALITY_MIN_N: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub description: String,
}

impl SamplePair {
    pub fn new(a: Vec<f64>, b: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        let pair = SamplePair {
            a,
            b,
            description: description.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() < 3 || self.b.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "{}: samples need >= 3 values (got {} and {})",
                self.description,
                self.a.len(),
                self.b.len()
            )));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{}: non-finite observation", self.description)));
        }
        Ok(())
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn check_sample(x: &[f64], min: usize, what: &str) -> Result<()> {
    if x.len() < min {
        return Err(Error::InsufficientData(format!(
            "{what} needs samples of size >= {min} (got {})",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what}: non-finite value")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    #[default]
    Mean,
    /// Brown–Forsythe variant.
    Median,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeveneResult {
    #[serde(with = "crate::float_ext")]
    pub statistic: f64,
    pub p: f64,
    pub equal_variances: bool,
    pub center: Center,
    pub alpha: f64,
}

/// Levene's test for two samples; `p` from F(1, n_a + n_b - 2).
pub fn levene_test(a: &[f64], b: &[f64], center: Center, alpha: f64) -> Result<LeveneResult> {
    check_sample(a, 3, "Levene test")?;
    check_sample(b, 3, "Levene test")?;
    let deviations = |x: &[f64]| {
        let c = match center {
            Center::Mean => mean(x),
            Center::Median => median(x),
        };
        x.iter().map(|v| (v - c).abs()).collect::<Vec<_>>()
    };
    let (za, zb) = (deviations(a), deviations(b));
    let (ma, mb) = (mean(&za), mean(&zb));
    let n = (a.len() + b.len()) as f64;
    let grand = (za.iter().sum::<f64>() + zb.iter().sum::<f64>()) / n;
    let between = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let within = za.iter().map(|z| (z - ma).powi(2)).sum::<f64>() + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    let df2 = n - 2.0;
    let (statistic, p) = if within == 0.0 {
        if between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let w = df2 * between / within;
        (w, f_sf(w, 1.0, df2))
    };
    Ok(LeveneResult {
        statistic,
        p,
        equal_variances: p >= alpha,
        center,
        alpha,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestVariant {
    Student,
    Welch,
    /// Paired differences; sensitivity mode only.
    Paired,
}

impl TestVariant {
    pub fn name(self) -> &'static str {
        match self {
            TestVariant::Student => "student",
            TestVariant::Welch => "welch",
            TestVariant::Paired => "paired",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub variant: TestVariant,
    #[serde(with = "crate::float_ext")]
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    /// Zero standard error: both samples constant.
    pub degenerate: bool,
}

fn t_from(diff: f64, se: f64, df: f64, variant: TestVariant) -> TTestResult {
    if se == 0.0 || !se.is_finite() {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return TTestResult {
            variant,
            t,
            df,
            p_two_sided: p,
            degenerate: diff != 0.0,
        };
    }
    let t = diff / se;
    TTestResult {
        variant,
        t,
        df,
        p_two_sided: t_sf(t, df),
        degenerate: false,
    }
}

/// Two-sample t-test of `mean(a) - mean(b)`.
pub fn t_test(a: &[f64], b: &[f64], variant: TestVariant) -> Result<TTestResult> {
    if variant == TestVariant::Paired {
        return paired_t_test(a, b);
    }
    check_sample(a, 2, "t-test")?;
    check_sample(b, 2, "t-test")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    let diff = mean(a) - mean(b);
    Ok(match variant {
        TestVariant::Student => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            t_from(diff, (pooled * (1.0 / na + 1.0 / nb)).sqrt(), df, variant)
        }
        _ => {
            let (sa, sb) = (va / na, vb / nb);
            let se2 = sa + sb;
            let df = if se2 == 0.0 {
                na + nb - 2.0
            } else {
                se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0))
            };
            t_from(diff, se2.sqrt(), df, variant)
        }
    })
}

/// One-sample t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired t-test needs equal sizes (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    check_sample(&d, 2, "paired t-test")?;
    let n = d.len() as f64;
    Ok(t_from(mean(&d), (variance(&d) / n).sqrt(), n - 1.0, TestVariant::Paired))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub statistic: f64,
    pub p: f64,
    pub pass: bool,
    /// `n` below [`NORMALITY_MIN_N`].
    pub low_power: bool,
    /// Constant sample; no moments to test.
    pub degenerate: bool,
}

/// Jarque–Bera test from population moments; `p = exp(-JB / 2)`.
pub fn normality_check(x: &[f64], alpha: f64) -> Result<NormalityResult> {
    check_sample(x, 3, "normality check")?;
    let n = x.len() as f64;
    let m = mean(x);
    let moment = |k: i32| x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n;
    let m2 = moment(2);
    let low_power = x.len() < NORMALITY_MIN_N;
    if m2 == 0.0 {
        return Ok(NormalityResult {
            n: x.len(),
            skewness: 0.0,
            excess_kurtosis: 0.0,
            statistic: 0.0,
            p: 0.0,
            pass: false,
            low_power,
            degenerate: true,
        });
    }
    let s = moment(3) / m2.powf(1.5);
    let k = moment(4) / (m2 * m2) - 3.0;
    let jb = n / 6.0 * (s * s + k * k / 4.0);
    let p = (-jb / 2.0).exp();
    Ok(NormalityResult {
        n: x.len(),
        skewness: s,
        excess_kurtosis: k,
        statistic: jb,
        p,
        pass: p >= alpha,
        low_power,
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Level for the normality and Levene gates.
    pub gate_alpha: f64,
    /// Level at which H0 is reported as rejected.
    pub headline_alpha: f64,
    pub center: Center,
    pub paired: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            gate_alpha: DEFAULT_GATE_ALPHA,
            headline_alpha: DEFAULT_HEADLINE_ALPHA,
            center: Center::Mean,
            paired: false,
        }
    }
}

impl PipelineOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("gate_alpha", self.gate_alpha), ("headline_alpha", self.headline_alpha)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Validation(format!("{name} must be in (0, 1), got {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub description: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub normality_a: NormalityResult,
    pub normality_b: NormalityResult,
    pub levene: LeveneResult,
    pub chosen_test: TestVariant,
    #[serde(with = "crate::float_ext")]
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub degenerate: bool,
    pub reject_h0_at: f64,
    pub reject_h0: bool,
    pub warnings: Vec<String>,
}

pub fn hypothesis_pipeline(pair: &SamplePair, opts: &PipelineOptions) -> Result<TestReport> {
    pair.validate()?;
    opts.validate()?;
    let mut warnings = Vec::new();
    let normality_a = normality_check(&pair.a, opts.gate_alpha)?;
    let normality_b = normality_check(&pair.b, opts.gate_alpha)?;
    for (name, r) in [("a", &normality_a), ("b", &normality_b)] {
        if r.degenerate {
            warnings.push(format!("sample {name} is constant; normality not testable"));
        } else if !r.pass {
            warnings.push(format!("sample {name} fails the normality check (JB p = {:.3e})", r.p));
        }
        if r.low_power {
            warnings.push(format!("sample {name} has n = {} < {NORMALITY_MIN_N}; normality check has low power", r.n));
        }
    }
    let levene = levene_test(&pair.a, &pair.b, opts.center, opts.gate_alpha)?;
    let variant = if opts.paired {
        TestVariant::Paired
    } else if levene.equal_variances {
        TestVariant::Student
    } else {
        TestVariant::Welch
    };
    let t = t_test(&pair.a, &pair.b, variant)?;
    if t.degenerate {
        warnings.push("both samples constant with different means; p reported as 0".into());
    }
    Ok(TestReport {
        description: pair.description.clone(),
        n_a: pair.a.len(),
        n_b: pair.b.len(),
        mean_a: mean(&pair.a),
        mean_b: mean(&pair.b),
        normality_a,
        normality_b,
        levene,
        chosen_test: variant,
        t: t.t,
        df: t.df,
        p_two_sided: t.p_two_sided,
        degenerate: t.degenerate,
        reject_h0_at: opts.headline_alpha,
        reject_h0: t.p_two_sided < opts.headline_alpha,
        warnings,
    })
}
