//! Re-run a manifest and compare the content hashes of everything it lists.

use std::path::Path;

use crate::commands;
use crate::error::{CliError, RunStatus};
use crate::manifest::{CommandKind, RunManifest};
use crate::output::{inventory, FileEntry};
use crate::sweep;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileCheck {
    Match(String),
    Mismatch(String),
    Missing(String),
    Extra(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    /// Exit status of the re-run command itself.
    pub status: RunStatus,
    pub files: Vec<FileCheck>,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.files.iter().all(|f| matches!(f, FileCheck::Match(_)))
    }
}

pub fn compare(recorded: &[FileEntry], fresh: &[FileEntry]) -> Vec<FileCheck> {
    let mut out = Vec::new();
    for r in recorded {
        match fresh.iter().find(|f| f.path == r.path) {
            Some(f) if f.sha256 == r.sha256 => out.push(FileCheck::Match(r.path.clone())),
            Some(_) => out.push(FileCheck::Mismatch(r.path.clone())),
            None => out.push(FileCheck::Missing(r.path.clone())),
        }
    }
    for f in fresh {
        if !recorded.iter().any(|r| r.path == f.path) {
            out.push(FileCheck::Extra(f.path.clone()));
        }
    }
    out
}

/// Re-run the command recorded in `manifest_path` into `out`.
pub fn replay(manifest_path: &Path, out: &Path, jobs: usize) -> Result<ReplayReport, CliError> {
    let m = RunManifest::read(manifest_path)?;
    let src = manifest_path.parent().unwrap_or(Path::new("."));
    if let (Ok(a), Ok(b)) = (src.canonicalize(), out.canonicalize()) {
        if a == b {
            return Err(CliError::Config("replay needs an output directory other than the original".into()));
        }
    }
    let cfg = &m.config;
    let run = match m.command {
        CommandKind::Analyze => commands::analyze(cfg, out),
        CommandKind::Profile => commands::profile(cfg, out),
        CommandKind::Simulate => commands::simulate(cfg, out),
        CommandKind::Verify => commands::verify(cfg, out),
        CommandKind::Sweep => {
            let spec = m
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::Config("sweep manifest without a sweep block".into()))?;
            sweep::sweep(cfg, spec, jobs, out)
        }
    };
    let status = match run {
        Ok(s) => s,
        // A recorded non-convergence replays as the same failure; the
        // hashes still decide reproduction.
        Err(CliError::Numerical(_)) => RunStatus::NotConverged,
        Err(e) => return Err(e),
    };
    Ok(ReplayReport {
        status,
        files: compare(&m.outputs, &inventory(out)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(path: &str, sha: &str) -> FileEntry {
        FileEntry {
            path: path.into(),
            sha256: sha.into(),
            bytes: 0,
        }
    }

    #[test]
    fn compare_reports_every_kind() {
        let rec = [entry("a", "1"), entry("b", "2"), entry("c", "3")];
        let fresh = [entry("a", "1"), entry("b", "x"), entry("d", "4")];
        assert_eq!(
            compare(&rec, &fresh),
            vec![
                FileCheck::Match("a".into()),
                FileCheck::Mismatch("b".into()),
                FileCheck::Missing("c".into()),
                FileCheck::Extra("d".into()),
            ]
        );
    }
}
