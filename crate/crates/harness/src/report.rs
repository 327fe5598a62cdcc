use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Pass,
    Fail,
}

/// Which side of `tol` the metric has to be on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bound {
    /// Pass or fail was decided directly, not from the metric.
    #[default]
    Decided,
    Upper,
    Lower,
}

/// One named check with the number it was judged on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    pub status: CaseStatus,
    pub metric: f64,
    pub tol: f64,
    #[serde(skip)]
    pub bound: Bound,
}

impl Case {
    /// Passes when `metric <= tol`; a non-finite metric fails and is reported
    /// as the largest finite value so the JSON stays valid.
    pub fn at_most(name: impl Into<String>, metric: f64, tol: f64) -> Self {
        let passed = metric.is_finite() && metric <= tol;
        Case {
            bound: Bound::Upper,
            ..Case::new(name, passed, metric, tol)
        }
    }

    /// Passes when `metric >= tol`.
    pub fn at_least(name: impl Into<String>, metric: f64, tol: f64) -> Self {
        let passed = metric.is_finite() && metric >= tol;
        Case {
            bound: Bound::Lower,
            ..Case::new(name, passed, metric, tol)
        }
    }

    pub fn new(name: impl Into<String>, passed: bool, metric: f64, tol: f64) -> Self {
        let finite = |x: f64| if x.is_finite() { x } else { f64::MAX };
        Case {
            name: name.into(),
            status: if passed {
                CaseStatus::Pass
            } else {
                CaseStatus::Fail
            },
            metric: finite(metric),
            tol: finite(tol),
            bound: Bound::Decided,
        }
    }

    /// Tightens (`scale < 1`) or loosens the tolerance of a metric-based
    /// case and judges it again; decided cases are unchanged.
    pub fn rescale(&mut self, scale: f64) {
        let (tol, passed) = match self.bound {
            Bound::Decided => return,
            Bound::Upper => {
                let tol = self.tol * scale;
                (tol, self.metric <= tol && self.metric < f64::MAX)
            }
            Bound::Lower => {
                let tol = if scale > 0.0 {
                    self.tol / scale
                } else {
                    f64::MAX
                };
                (tol, self.metric >= tol && self.metric < f64::MAX)
            }
        };
        self.tol = if tol.is_finite() { tol } else { f64::MAX };
        self.status = if passed {
            CaseStatus::Pass
        } else {
            CaseStatus::Fail
        };
    }

    /// A check that could not run; the error text goes into the name.
    pub fn error(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Case::new(format!("{}: {err}", name.into()), false, f64::MAX, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.status == CaseStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: Vec<Case>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>) -> Self {
        SuiteReport {
            suite: suite.into(),
            cases: Vec::new(),
        }
    }

    pub fn push(&mut self, case: Case) {
        self.cases.push(case);
    }

    pub fn passed(&self) -> bool {
        self.cases.iter().all(Case::passed)
    }

    pub fn pass_count(&self) -> usize {
        self.cases.iter().filter(|c| c.passed()).count()
    }

    /// One report holding every case of `reports`, each name prefixed with
    /// its suite.
    pub fn merged(suite: impl Into<String>, reports: &[SuiteReport]) -> Self {
        let cases = reports
            .iter()
            .flat_map(|r| {
                r.cases.iter().map(move |c| Case {
                    name: format!("{}: {}", r.suite, c.name),
                    ..c.clone()
                })
            })
            .collect();
        SuiteReport {
            suite: suite.into(),
            cases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports hold only finite numbers")
    }
}
