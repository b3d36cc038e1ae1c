//! Weight-space ensembling of two checkpoints.
//!
//! Every tensor present in both inputs with the same shape and dtype is
//! replaced by the element-wise convex combination `(1 - λ)·base + λ·tuned`.
//! Swapping in a linear-probed checkpoint for the fully fine-tuned one needs
//! no special handling: the merge only looks at tensor contents.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_store::{diff_keys, save_checkpoint, Checkpoint, NamedTensor};

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MismatchPolicy {
    Error,
    TakeTuned,
    TakeBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingKeyPolicy {
    Error,
    TakePresent,
}

/// Mixing coefficient plus rules for keys that cannot be interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergePolicy {
    lambda: f64,
    pub mismatch_policy: MismatchPolicy,
    pub missing_key_policy: MissingKeyPolicy,
}

impl MergePolicy {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            mismatch_policy: MismatchPolicy::TakeTuned,
            missing_key_policy: MissingKeyPolicy::TakePresent,
        })
    }

    pub fn with_mismatch(mut self, policy: MismatchPolicy) -> Self {
        self.mismatch_policy = policy;
        self
    }

    pub fn with_missing(mut self, policy: MissingKeyPolicy) -> Self {
        self.missing_key_policy = policy;
        self
    }

    /// Same rules, different λ.
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, ..self })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self::new(DEFAULT_LAMBDA).expect("default lambda is valid")
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// Where each output key came from. Every key of either input appears in exactly one list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub lambda: f64,
    pub interpolated_count: usize,
    pub interpolated: Vec<String>,
    pub carried_from_tuned: Vec<String>,
    pub carried_from_base: Vec<String>,
    /// Keys left out of the output.
    pub skipped: Vec<String>,
}

impl MergeReport {
    fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Default::default()
        }
    }
}

fn interpolate(base: &NamedTensor, tuned: &NamedTensor, lambda: f64) -> Result<NamedTensor> {
    // The endpoints copy bytes so that -0.0, NaN payloads and infinities survive.
    if lambda == 0.0 {
        return Ok(base.clone());
    }
    if lambda == 1.0 {
        return Ok(tuned.clone());
    }
    let a = base.to_f64_vec().expect("float tensor");
    let b = tuned.to_f64_vec().expect("float tensor");
    let wa = 1.0 - lambda;
    let mixed: Vec<f32> = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| (wa * x + lambda * y) as f32)
        .collect();
    NamedTensor::from_f32(base.name(), base.shape().to_vec(), &mixed)
}

/// Interpolates `base` toward `tuned` by the policy's λ.
pub fn merge(base: &Checkpoint, tuned: &Checkpoint, policy: &MergePolicy) -> Result<(Checkpoint, MergeReport)> {
    let diff = diff_keys(base, tuned);
    if policy.missing_key_policy == MissingKeyPolicy::Error {
        if let Some(key) = diff.only_left.iter().chain(&diff.only_right).next() {
            return Err(Error::Mismatch {
                key: key.clone(),
                detail: "present in only one checkpoint".into(),
            });
        }
    }
    if policy.mismatch_policy == MismatchPolicy::Error {
        if let Some(key) = diff.shape_mismatched.iter().next() {
            let (l, r) = (base.get(key).unwrap(), tuned.get(key).unwrap());
            return Err(Error::Mismatch {
                key: key.clone(),
                detail: format!("{} {:?} vs {} {:?}", l.dtype(), l.shape(), r.dtype(), r.shape()),
            });
        }
    }

    let lambda = policy.lambda();
    let mut out = Checkpoint::new();
    let mut report = MergeReport::new(lambda);
    let keys: BTreeSet<&str> = base.names().chain(tuned.names()).collect();

    for key in keys {
        let (b, t) = (base.get(key), tuned.get(key));
        match (b, t) {
            (Some(b), None) => {
                out.insert(b.clone())?;
                report.carried_from_base.push(key.to_owned());
            }
            (None, Some(t)) => {
                out.insert(t.clone())?;
                report.carried_from_tuned.push(key.to_owned());
            }
            (Some(b), Some(t)) if diff.shape_mismatched.contains(key) => match policy.mismatch_policy {
                MismatchPolicy::TakeTuned => {
                    log::info!("`{key}`: shapes differ, keeping tuned tensor {:?}", t.shape());
                    out.insert(t.clone())?;
                    report.carried_from_tuned.push(key.to_owned());
                }
                MismatchPolicy::TakeBase => {
                    log::info!("`{key}`: shapes differ, keeping base tensor {:?}", b.shape());
                    out.insert(b.clone())?;
                    report.carried_from_base.push(key.to_owned());
                }
                MismatchPolicy::Error => unreachable!("rejected above"),
            },
            (Some(b), Some(t)) if !b.dtype().is_float() => {
                debug_assert_eq!(b.dtype(), t.dtype());
                out.insert(t.clone())?;
                report.carried_from_tuned.push(key.to_owned());
            }
            (Some(b), Some(t)) => {
                out.insert(interpolate(b, t, lambda)?)?;
                report.interpolated.push(key.to_owned());
            }
            (None, None) => unreachable!(),
        }
    }
    report.interpolated_count = report.interpolated.len();
    out.metadata_mut()
        .insert("merge.lambda".into(), format!("{lambda}"));
    Ok((out, report))
}

/// Sidecar path for a merged checkpoint's report: `x.safetensors` → `x.report.json`.
pub fn report_path(output: &Path) -> PathBuf {
    output.with_extension("report.json")
}

pub fn write_report(report: &MergeReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Merges and writes the checkpoint plus its JSON report.
pub fn merge_to_file(base: &Checkpoint, tuned: &Checkpoint, policy: &MergePolicy, out: &Path) -> Result<MergeReport> {
    let (merged, report) = merge(base, tuned, policy)?;
    save_checkpoint(&merged, out)?;
    write_report(&report, &report_path(out))?;
    Ok(report)
}

pub fn sweep_file_name(lambda: f64) -> String {
    format!("merged_lambda_{lambda:.2}.safetensors")
}

/// Writes one merged checkpoint per λ into `out_dir`. Results are in input order.
pub fn lambda_sweep(
    base: &Checkpoint,
    tuned: &Checkpoint,
    lambdas: &[f64],
    out_dir: &Path,
    template: &MergePolicy,
) -> Result<Vec<(f64, PathBuf)>> {
    let mut names = BTreeSet::new();
    for &l in lambdas {
        check_lambda(l)?;
        if !names.insert(sweep_file_name(l)) {
            return Err(Error::domain(format!("duplicate lambda {l:.2} in sweep")));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    lambdas
        .par_iter()
        .map(|&l| {
            let policy = template.with_lambda(l)?;
            let path = out_dir.join(sweep_file_name(l));
            merge_to_file(base, tuned, &policy, &path)?;
            Ok((l, path))
        })
        .collect()
}

/// Parses `start:stop:step` (inclusive of `stop`) or a comma list such as `0,0.5,1`.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::domain(format!("cannot parse lambda grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let start: f64 = start.trim().parse().map_err(|_| bad())?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
            let step: f64 = step.trim().parse().map_err(|_| bad())?;
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    for &v in &values {
        check_lambda(v)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckpt(entries: &[(&str, Vec<usize>, Vec<f32>)]) -> Checkpoint {
        let mut c = Checkpoint::new();
        for (name, shape, values) in entries {
            c.insert(NamedTensor::from_f32(*name, shape.clone(), values).unwrap()).unwrap();
        }
        c
    }

    #[test]
    fn lambda_domain() {
        assert!(MergePolicy::new(-0.01).is_err());
        assert!(MergePolicy::new(1.01).is_err());
        assert!(MergePolicy::new(f64::NAN).is_err());
        assert_eq!(MergePolicy::default().lambda(), 0.5);
        assert_eq!(MergePolicy::default().mismatch_policy, MismatchPolicy::TakeTuned);
    }

    #[test]
    fn midpoint_is_arithmetic_mean() {
        let a = ckpt(&[("w", vec![2], vec![2.0, 4.0])]);
        let b = ckpt(&[("w", vec![2], vec![4.0, 8.0])]);
        let (m, r) = merge(&a, &b, &MergePolicy::new(0.5).unwrap()).unwrap();
        assert_eq!(m.get("w").unwrap().to_f32_vec().unwrap(), vec![3.0, 6.0]);
        assert_eq!(r.interpolated, vec!["w"]);
        assert_eq!(r.interpolated_count, 1);
    }

    #[test]
    fn endpoints_copy_bits() {
        let a = ckpt(&[("w", vec![3], vec![-0.0, f32::INFINITY, 1.5])]);
        let b = ckpt(&[("w", vec![3], vec![1.0, 2.0, f32::NAN])]);
        let (m0, _) = merge(&a, &b, &MergePolicy::new(0.0).unwrap()).unwrap();
        let (m1, _) = merge(&a, &b, &MergePolicy::new(1.0).unwrap()).unwrap();
        assert_eq!(m0.get("w").unwrap().data(), a.get("w").unwrap().data());
        assert_eq!(m1.get("w").unwrap().data(), b.get("w").unwrap().data());
    }

    #[test]
    fn head_mismatch_policies() {
        let base = ckpt(&[("body", vec![1], vec![0.0]), ("head", vec![91, 2], vec![1.0; 182])]);
        let tuned = ckpt(&[("body", vec![1], vec![1.0]), ("head", vec![2, 2], vec![7.0; 4])]);

        let (m, r) = merge(&base, &tuned, &MergePolicy::default()).unwrap();
        assert_eq!(m.get("head").unwrap(), tuned.get("head").unwrap());
        assert_eq!(r.carried_from_tuned, vec!["head"]);
        assert_eq!(r.interpolated, vec!["body"]);

        let p = MergePolicy::default().with_mismatch(MismatchPolicy::TakeBase);
        let (m, r) = merge(&base, &tuned, &p).unwrap();
        assert_eq!(m.get("head").unwrap(), base.get("head").unwrap());
        assert_eq!(r.carried_from_base, vec!["head"]);

        let p = MergePolicy::default().with_mismatch(MismatchPolicy::Error);
        match merge(&base, &tuned, &p).unwrap_err() {
            Error::Mismatch { key, .. } => assert_eq!(key, "head"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn dtype_mismatch_counts_as_shape_mismatch() {
        let base = ckpt(&[("w", vec![1], vec![1.0])]);
        let mut tuned = Checkpoint::new();
        tuned.insert(NamedTensor::from_f64("w", vec![1], &[2.0]).unwrap()).unwrap();
        let p = MergePolicy::default().with_mismatch(MismatchPolicy::Error);
        assert!(matches!(merge(&base, &tuned, &p), Err(Error::Mismatch { .. })));
    }

    #[test]
    fn missing_keys() {
        let base = ckpt(&[("a", vec![1], vec![0.0]), ("only_base", vec![1], vec![5.0])]);
        let tuned = ckpt(&[("a", vec![1], vec![2.0]), ("only_tuned", vec![1], vec![6.0])]);
        let (m, r) = merge(&base, &tuned, &MergePolicy::default()).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(r.carried_from_base, vec!["only_base"]);
        assert_eq!(r.carried_from_tuned, vec!["only_tuned"]);

        let p = MergePolicy::default().with_missing(MissingKeyPolicy::Error);
        assert!(matches!(merge(&base, &tuned, &p), Err(Error::Mismatch { .. })));
    }

    #[test]
    fn integer_tensors_come_from_tuned() {
        let mut base = Checkpoint::new();
        base.insert(NamedTensor::from_i64("bn.num_batches_tracked", vec![], &[10]).unwrap())
            .unwrap();
        let mut tuned = Checkpoint::new();
        tuned
            .insert(NamedTensor::from_i64("bn.num_batches_tracked", vec![], &[99]).unwrap())
            .unwrap();
        let (m, r) = merge(&base, &tuned, &MergePolicy::default()).unwrap();
        assert_eq!(m.get("bn.num_batches_tracked").unwrap(), tuned.get("bn.num_batches_tracked").unwrap());
        assert_eq!(r.carried_from_tuned, vec!["bn.num_batches_tracked"]);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_lambda_grid("0.0:1.0:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_lambda_grid("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_lambda_grid("0:2:0.5").is_err());
        assert!(parse_lambda_grid("0:1:0").is_err());
        assert!(parse_lambda_grid("a,b").is_err());
    }

    #[test]
    fn sweep_rejects_duplicates() {
        let a = ckpt(&[("w", vec![1], vec![0.0])]);
        let dir = tempfile::tempdir().unwrap();
        let err = lambda_sweep(&a, &a, &[0.5, 0.5], dir.path(), &MergePolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(lambda_sweep(&a, &a, &[1.5], dir.path(), &MergePolicy::default()).is_err());
    }

    #[test]
    fn report_path_sits_beside_output() {
        assert_eq!(report_path(Path::new("/x/m.safetensors")), PathBuf::from("/x/m.report.json"));
    }
}
