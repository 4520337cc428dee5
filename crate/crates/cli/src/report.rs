//! The posterior report and its text and JSON renderings.

use std::fmt::Write as _;

use gfinfer_core::kernel::{Digits, Rendered, Scalar};
use gfinfer_core::oracle::Estimate;
use serde::{Deserialize, Serialize};

/// A reported number. Values are decimal strings so that no precision is
/// lost in JSON; exact rationals use `p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Point(String),
    Interval {
        bounds: [String; 2],
        /// `None` for a degenerate interval.
        significant_digits: Option<u32>,
    },
    Estimate {
        value: String,
        std_error: String,
    },
}

impl Num {
    pub fn of<T: Scalar>(v: &T) -> Num {
        match v.render() {
            Rendered::Point(s) => Num::Point(s),
            Rendered::Interval { lo, hi, digits } => Num::Interval {
                bounds: [lo, hi],
                significant_digits: match digits {
                    Digits::Exact => None,
                    Digits::Count(n) => Some(n),
                },
            },
        }
    }

    pub fn estimate(e: &Estimate) -> Num {
        Num::Estimate {
            value: format!("{:?}", e.value),
            std_error: format!("{:?}", e.std_error),
        }
    }

    /// The value, or the midpoint of an interval, as an `f64`.
    pub fn approx(&self) -> Option<f64> {
        let parse = |s: &str| -> Option<f64> {
            match s.split_once('/') {
                Some((n, d)) => Some(n.parse::<f64>().ok()? / d.parse::<f64>().ok()?),
                None => s.parse().ok(),
            }
        };
        match self {
            Num::Point(s) | Num::Estimate { value: s, .. } => parse(s),
            Num::Interval { bounds, .. } => Some((parse(&bounds[0])? + parse(&bounds[1])?) / 2.0),
        }
    }

    /// Lower and upper end; a point is its own enclosure.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Num::Interval { bounds, .. } => {
                Some((bounds[0].parse().ok()?, bounds[1].parse().ok()?))
            }
            _ => self.approx().map(|v| (v, v)),
        }
    }

    /// Significant digits of an enclosure; points count as exact.
    pub fn digits(&self) -> Option<u32> {
        match self {
            Num::Interval {
                significant_digits, ..
            } => *significant_digits,
            _ => None,
        }
    }

    fn text(&self) -> String {
        match self {
            Num::Point(s) => s.clone(),
            Num::Interval {
                bounds,
                significant_digits,
            } => match significant_digits {
                Some(d) => format!("[{}, {}] ({d} digits)", bounds[0], bounds[1]),
                None => format!("[{}, {}] (exact)", bounds[0], bounds[1]),
            },
            Num::Estimate { value, std_error } => format!("{value} ± {std_error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Num,
    pub variance: Num,
    pub skewness: Option<Num>,
    pub kurtosis: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mass {
    pub k: u64,
    pub p: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Effective sample size of a simulation run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess: Option<String>,
}

/// Wall-clock milliseconds; parsing is not counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub eval_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub query: String,
    pub evidence: Num,
    pub moments: Moments,
    /// Empty for continuous query variables.
    pub masses: Vec<Mass>,
    pub cutoff: Option<u64>,
    pub tail_bound: Option<Num>,
    pub kernel: KernelInfo,
    pub timings: Timings,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Report> {
        serde_json::from_str(s)
    }

    pub fn mass(&self, k: u64) -> Option<&Num> {
        self.masses.iter().find(|m| m.k == k).map(|m| &m.p)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let undefined = || "undefined".to_string();
        let rows = [
            ("query", self.query.clone()),
            ("kernel", self.kernel_text()),
            ("evidence", self.evidence.text()),
            ("mean", self.moments.mean.text()),
            ("variance", self.moments.variance.text()),
            (
                "skewness",
                self.moments
                    .skewness
                    .as_ref()
                    .map_or_else(undefined, Num::text),
            ),
            (
                "kurtosis",
                self.moments
                    .kurtosis
                    .as_ref()
                    .map_or_else(undefined, Num::text),
            ),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<10} {v}");
        }
        if let Some(c) = self.cutoff {
            let _ = writeln!(out, "{:<10} {c}", "cutoff");
        }
        if let Some(t) = &self.tail_bound {
            let _ = writeln!(out, "{:<10} {}", "tail", t.text());
        }
        if !self.masses.is_empty() {
            let _ = writeln!(out, "\nP[{} = k]", self.query);
            let w = self.masses.last().map_or(1, |m| m.k.to_string().len());
            for m in &self.masses {
                let _ = writeln!(out, "  {:>w$}  {}", m.k, m.p.text());
            }
        }
        let _ = writeln!(
            out,
            "\neval {:.3} ms, total {:.3} ms",
            self.timings.eval_ms, self.timings.total_ms
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    fn kernel_text(&self) -> String {
        let k = &self.kernel;
        let mut s = k.name.clone();
        if let Some(b) = k.precision_bits {
            let _ = write!(s, ", {b} bits");
        }
        if let (Some(rng), Some(seed), Some(n)) = (&k.rng, k.seed, k.samples) {
            let _ = write!(s, ", {n} samples, {rng} seed {seed}");
        }
        if let Some(e) = &k.ess {
            let _ = write!(s, ", ess {e}");
        }
        s
    }
}
