//! Parameter sweeps over one or two keys on a rayon worker pool.
//!
//! Jobs are numbered in grid order (first key outermost), each owns
//! `jobs/job_NNNN/`, and the aggregate is built afterwards from the job
//! manifests alone, sorted by the varied values.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sirwave_core::c_star;
use sirwave_core::pde_sim::Outcome;

use crate::commands::{outcome_tag, prepare_out_dir, profile_summary, run_simulation, solve_profile};
use crate::config::{RunConfig, SweepTask};
use crate::error::{CliError, RunStatus};
use crate::manifest::{write_manifest, CommandKind, Derived, RunManifest};
use crate::output::{ensure_dir, fmt_f64, fmt_opt, write_csv, MANIFEST_NAME};

/// One varied key: `key=lo:hi:n`, n evenly spaced values including both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vary {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Vary {
    pub fn values(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| {
                    if k == n - 1 {
                        self.hi
                    } else {
                        self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

impl FromStr for Vary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected key=lo:hi:n, got `{s}`");
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if key.trim().is_empty() || n == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        Ok(Self {
            key: key.trim().to_string(),
            lo,
            hi,
            n,
        })
    }
}

impl fmt::Display for Vary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.key, self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub vary: Vec<Vary>,
}

impl SweepSpec {
    pub fn new(vary: Vec<Vary>, base: &RunConfig) -> Result<Self, CliError> {
        if vary.is_empty() || vary.len() > 2 {
            return Err(CliError::Config(format!(
                "a sweep varies one or two keys, got {}",
                vary.len()
            )));
        }
        if vary.len() == 2 && vary[0].key == vary[1].key {
            return Err(CliError::Config(format!("key `{}` varied twice", vary[0].key)));
        }
        for v in &vary {
            base.clone().set_numeric(&v.key, v.lo)?;
        }
        Ok(Self { vary })
    }

    /// All value combinations, first key outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for v in &self.vary {
            points = points
                .into_iter()
                .flat_map(|p| {
                    v.values().into_iter().map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Outcome tags used in the aggregate.
pub const OUTCOMES: [&str; 4] = ["wave", "extinction", "subcritical", "not_converged"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSummary {
    pub job: String,
    pub values: Vec<f64>,
    pub outcome: String,
    pub r0: Option<f64>,
    pub c_star: Option<f64>,
    pub lambda0: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub s_inf: Option<f64>,
    pub speed: Option<f64>,
    pub speed_stderr: Option<f64>,
    pub note: Option<String>,
}

impl JobSummary {
    fn new(job: &str, values: &[f64], outcome: &str) -> Self {
        Self {
            job: job.to_string(),
            values: values.to_vec(),
            outcome: outcome.to_string(),
            r0: None,
            c_star: None,
            lambda0: None,
            converged: None,
            iterations: None,
            residual: None,
            s_inf: None,
            speed: None,
            speed_stderr: None,
            note: None,
        }
    }
}

fn run_job(base: &RunConfig, spec: &SweepSpec, index: usize, values: &[f64], dir: &Path) -> Result<(), CliError> {
    let job = format!("job_{index:04}");
    ensure_dir(dir)?;
    let mut cfg = base.clone();
    for (v, &x) in spec.vary.iter().zip(values) {
        cfg.set_numeric(&v.key, x)?;
    }
    let mut s = JobSummary::new(&job, values, "not_converged");
    let (command, mut derived) = match cfg.sweep_task {
        SweepTask::Profile => (CommandKind::Profile, None),
        SweepTask::Simulate => (CommandKind::Simulate, None),
    };
    match cfg.validate() {
        Err(e) => s.note = Some(e.to_string()),
        Ok(()) => {
            let p = &cfg.params;
            s.r0 = Some(p.r_naught());
            s.c_star = c_star(p);
            let d = Derived::compute(&cfg);
            s.lambda0 = d.lambda0;
            derived = Some(d);
            match cfg.sweep_task {
                SweepTask::Profile => profile_job(&cfg, dir, &mut s),
                SweepTask::Simulate => simulate_job(&cfg, dir, &mut s, &mut derived),
            }
        }
    }
    let derived = derived.unwrap_or_else(|| Derived::compute(&cfg));
    let summary = serde_json::to_value(&s).expect("job summary serializes");
    write_manifest(dir, command, &cfg, None, derived, summary, None)?;
    Ok(())
}

fn profile_job(cfg: &RunConfig, dir: &Path, s: &mut JobSummary) {
    let p = &cfg.params;
    if p.r_naught() <= 1.0 {
        s.outcome = "extinction".into();
        s.note = Some("R0 <= 1: no traveling wave".into());
        return;
    }
    if p.d3 >= 2.0 * p.d2 {
        s.note = Some("d3 >= 2 d2: outside the wave regime".into());
        return;
    }
    if s.c_star.is_some_and(|cs| cfg.c <= cs) {
        s.outcome = "subcritical".into();
        s.note = Some("c <= c*: no traveling wave at this speed".into());
        return;
    }
    match solve_profile(cfg, dir) {
        Ok(r) => {
            let fp = r.fixed_point.as_ref();
            s.converged = Some(r.converged);
            s.iterations = fp.map(|f| f.iterations);
            s.residual = fp.map(|f| f.residual);
            s.s_inf = profile_summary(&r)["s_inf"].as_f64();
            s.outcome = if r.converged { "wave" } else { "not_converged" }.into();
        }
        Err(e) => s.note = Some(e.to_string()),
    }
}

fn simulate_job(cfg: &RunConfig, dir: &Path, s: &mut JobSummary, derived: &mut Option<Derived>) {
    match run_simulation(cfg, dir) {
        Ok(r) => {
            if let Some(d) = derived.as_mut() {
                d.dt = Some(r.dt);
            }
            s.speed = r.speed;
            s.speed_stderr = r.speed_stderr;
            s.converged = Some(!r.partial);
            s.outcome = match (r.outcome, r.partial) {
                (_, true) => "not_converged",
                (Outcome::Wave, _) => "wave",
                (Outcome::Extinction, _) => "extinction",
                (Outcome::Undetermined, _) => "not_converged",
            }
            .into();
            s.note = if r.partial {
                Some("front reached the boundary".into())
            } else if r.outcome == Outcome::Undetermined {
                Some(format!("simulation outcome {}", outcome_tag(r.outcome)))
            } else {
                None
            };
        }
        Err(e) => s.note = Some(e.to_string()),
    }
}

pub fn default_jobs() -> usize {
    std::env::var("SIRWAVE_JOBS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn job_dir(out: &Path, index: usize) -> PathBuf {
    out.join("jobs").join(format!("job_{index:04}"))
}

/// Read the completed job manifests; a missing or unreadable one still
/// yields a row.
pub fn collect(out: &Path, spec: &SweepSpec) -> Vec<JobSummary> {
    let mut rows: Vec<JobSummary> = spec
        .points()
        .iter()
        .enumerate()
        .map(|(index, values)| {
            let path = job_dir(out, index).join(MANIFEST_NAME);
            RunManifest::read(&path)
                .ok()
                .and_then(|m| serde_json::from_value(m.summary).ok())
                .unwrap_or_else(|| {
                    let mut s = JobSummary::new(&format!("job_{index:04}"), values, "not_converged");
                    s.note = Some("job manifest missing or unreadable".into());
                    s
                })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.job.cmp(&b.job))
    });
    rows
}

pub fn write_aggregate(path: &Path, spec: &SweepSpec, rows: &[JobSummary]) -> Result<(), CliError> {
    let mut header: Vec<&str> = vec!["job"];
    header.extend(spec.vary.iter().map(|v| v.key.as_str()));
    header.extend([
        "outcome",
        "r0",
        "c_star",
        "lambda0",
        "converged",
        "iterations",
        "residual",
        "s_inf",
        "speed",
        "speed_stderr",
        "note",
    ]);
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let mut row = vec![r.job.clone()];
            row.extend(r.values.iter().map(|&v| fmt_f64(v)));
            row.extend([
                r.outcome.clone(),
                fmt_opt(r.r0),
                fmt_opt(r.c_star),
                fmt_opt(r.lambda0),
                r.converged.map(|c| c.to_string()).unwrap_or_default(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                fmt_opt(r.residual),
                fmt_opt(r.s_inf),
                fmt_opt(r.speed),
                fmt_opt(r.speed_stderr),
                r.note.clone().unwrap_or_default(),
            ]);
            row
        }),
    )
}

pub fn sweep(base: &RunConfig, spec: &SweepSpec, jobs: usize, out: &Path) -> Result<RunStatus, CliError> {
    base.validate()?;
    prepare_out_dir(out)?;
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let failures: Vec<String> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .filter_map(|(index, values)| {
                run_job(base, spec, index, values, &job_dir(out, index))
                    .err()
                    .map(|e| format!("job_{index:04}: {e}"))
            })
            .collect()
    });
    for f in &failures {
        eprintln!("{f}");
    }
    let rows = collect(out, spec);
    write_aggregate(&out.join("aggregate.csv"), spec, &rows)?;
    let counts: serde_json::Map<String, serde_json::Value> = OUTCOMES
        .iter()
        .map(|o| (o.to_string(), json!(rows.iter().filter(|r| r.outcome == *o).count())))
        .collect();
    for (o, n) in &counts {
        println!("{o}: {n}");
    }
    let summary = json!({ "jobs": rows.len(), "outcomes": counts });
    write_manifest(
        out,
        CommandKind::Sweep,
        base,
        Some(spec.clone()),
        Derived::compute(base),
        summary,
        None,
    )?;
    Ok(RunStatus::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vary_parses_and_spans_both_ends() {
        let v: Vary = "c=2.1:4.0:10".parse().unwrap();
        let xs = v.values();
        assert_eq!(xs.len(), 10);
        assert_eq!((xs[0], xs[9]), (2.1, 4.0));
        assert!("c=1:2".parse::<Vary>().is_err());
        assert!("=1:2:3".parse::<Vary>().is_err());
        assert!("c=1:2:0".parse::<Vary>().is_err());
        assert_eq!(v.to_string().parse::<Vary>().unwrap(), v);
    }

    #[test]
    fn spec_limits_and_grid_order() {
        let base = RunConfig::default();
        let a: Vary = "beta=1:2:2".parse().unwrap();
        let b: Vary = "c=3:4:3".parse().unwrap();
        assert!(SweepSpec::new(vec![], &base).is_err());
        assert!(SweepSpec::new(vec![a.clone(), b.clone(), a.clone()], &base).is_err());
        assert!(SweepSpec::new(vec!["bogus=1:2:2".parse().unwrap()], &base).is_err());
        let s = SweepSpec::new(vec![a, b], &base).unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![1.0, 3.0]);
        assert_eq!(pts[3], vec![2.0, 3.0]);
    }

    #[test]
    fn threshold_jobs_are_classified_without_solving() {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig::default();
        let spec = SweepSpec::new(vec!["beta=0.5:1.0:2".parse().unwrap()], &base).unwrap();
        sweep(&base, &spec, 2, dir.path()).unwrap();
        let rows = collect(dir.path(), &spec);
        assert!(rows.iter().all(|r| r.outcome == "extinction"), "{rows:?}");
        let spec = SweepSpec::new(vec!["c=1.0:2.0:2".parse().unwrap()], &base).unwrap();
        sweep(&base, &spec, 1, dir.path()).unwrap();
        let rows = collect(dir.path(), &spec);
        assert!(rows.iter().all(|r| r.outcome == "subcritical"), "{rows:?}");
        assert!(dir.path().join("jobs/job_0001").join(MANIFEST_NAME).is_file());
    }
}
