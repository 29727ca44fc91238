//! Predefined resampling indices: JSON lines of
//! `{"resample": r, "train": [...], "test": [...]}` with 0-based indices.

use std::fs;
use std::path::Path;

use multirep_core::data::{Dataset, ResamplePlan};

use crate::error::{Error, Result};

pub fn parse_indices(text: &str, path: &Path) -> Result<Vec<ResamplePlan>> {
    let mut plans = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let plan: ResamplePlan =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, format!("bad index record: {e}")))?;
        plans.push(plan);
    }
    if plans.is_empty() {
        return Err(Error::parse(path, 0, "no index records"));
    }
    Ok(plans)
}

/// Reads and validates every record against `dataset`.
pub fn load_predefined_indices(path: &Path, dataset: &Dataset) -> Result<Vec<ResamplePlan>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let plans = parse_indices(&text, path)?;
    let mut seen = std::collections::BTreeSet::new();
    for plan in &plans {
        if !seen.insert(plan.resample) {
            return Err(Error::parse(path, 0, format!("resample {} listed twice", plan.resample)));
        }
        plan.validate(dataset)?;
    }
    Ok(plans)
}

pub fn to_jsonl(plans: &[ResamplePlan]) -> String {
    let mut out = String::new();
    for p in plans {
        out.push_str(&serde_json::to_string(p).expect("plans serialize"));
        out.push('\n');
    }
    out
}

pub fn save_indices(plans: &[ResamplePlan], path: &Path) -> Result<()> {
    crate::tsv::write_file(path, to_jsonl(plans).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use multirep_core::representations::Series;
    use multirep_core::Error as CoreError;

    fn four() -> Dataset {
        let s = (0..4).map(|i| Series::new(vec![i as f64; 4], i % 2).unwrap()).collect();
        Dataset::new("four", s).unwrap()
    }

    fn load(text: &str) -> Result<Vec<ResamplePlan>> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.jsonl");
        fs::write(&p, text).unwrap();
        load_predefined_indices(&p, &four())
    }

    #[test]
    fn valid_record() {
        let plans = load("{\"resample\":0,\"train\":[0,1],\"test\":[2,3]}\n").unwrap();
        assert_eq!(plans[0].train, vec![0, 1]);
    }

    #[test]
    fn overlap_and_bounds() {
        assert!(matches!(
            load("{\"resample\":0,\"train\":[0,1,2],\"test\":[2,3]}"),
            Err(Error::Core(CoreError::Overlap { index: 2, .. }))
        ));
        assert!(matches!(
            load("{\"resample\":0,\"train\":[0,1],\"test\":[9]}"),
            Err(Error::Core(CoreError::IndexOutOfRange { index: 9, .. }))
        ));
        assert!(matches!(load("{\"resample\":0}"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trip() {
        let plans = vec![ResamplePlan {
            resample: 2,
            train: vec![0, 1],
            test: vec![3],
        }];
        let back = parse_indices(&to_jsonl(&plans), Path::new("x")).unwrap();
        assert_eq!(back, plans);
    }
}
