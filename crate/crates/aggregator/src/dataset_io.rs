//! Feature dataset CSV: `epoch`, the 27 feature columns, then one column per
//! labelled target. An empty label cell means "not measured".

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sprayq_core::{Dataset, QualityTarget};

use crate::error::{Error, Result};
use crate::features::{feature_indices, FEATURE_COUNT, FEATURE_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub epoch: u64,
    pub features: Vec<f64>,
    pub labels: BTreeMap<QualityTarget, f64>,
}

pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let targets: Vec<QualityTarget> = QualityTarget::ALL
        .into_iter()
        .filter(|t| rows.iter().any(|r| r.labels.contains_key(t)))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["epoch".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.extend(targets.iter().map(|t| t.as_str().to_string()));
    w.write_record(&header)?;
    for r in rows {
        if r.features.len() != FEATURE_COUNT {
            return Err(Error::Config(format!(
                "epoch {} has {} features, expected {FEATURE_COUNT}",
                r.epoch,
                r.features.len()
            )));
        }
        let mut rec = vec![r.epoch.to_string()];
        rec.extend(r.features.iter().map(|v| v.to_string()));
        rec.extend(targets.iter().map(|t| r.labels.get(t).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.len() < 1 + FEATURE_COUNT
        || &header[0] != "epoch"
        || header.iter().skip(1).take(FEATURE_COUNT).ne(FEATURE_NAMES.iter().copied())
    {
        return Err(Error::Config("feature CSV header does not match the feature schema".into()));
    }
    let targets: Vec<QualityTarget> = header
        .iter()
        .skip(1 + FEATURE_COUNT)
        .map(|h| h.parse::<QualityTarget>().map_err(Error::from))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |s: &str, col: &str| {
            s.parse::<f64>().map_err(|_| Error::Config(format!("row {}: column {col}: not a number: {s:?}", i + 2)))
        };
        let epoch = rec[0]
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("row {}: bad epoch {:?}", i + 2, &rec[0])))?;
        let features = (0..FEATURE_COUNT)
            .map(|j| num(&rec[1 + j], FEATURE_NAMES[j]))
            .collect::<Result<Vec<f64>>>()?;
        let mut labels = BTreeMap::new();
        for (k, t) in targets.iter().enumerate() {
            let cell = rec.get(1 + FEATURE_COUNT + k).unwrap_or("");
            if !cell.is_empty() {
                labels.insert(*t, num(cell, t.as_str())?);
            }
        }
        rows.push(FeatureRow { epoch, features, labels });
    }
    Ok(rows)
}

/// Rows with a label for `target`, restricted to the target group's features.
pub fn to_dataset(rows: &[FeatureRow], target: QualityTarget) -> Result<Dataset> {
    let idx = feature_indices(target.group());
    let names = idx.iter().map(|&i| FEATURE_NAMES[i].to_string()).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in rows {
        if let Some(&label) = r.labels.get(&target) {
            x.push(idx.iter().map(|&i| r.features[i]).collect());
            y.push(label);
        }
    }
    Ok(Dataset::new(names, x, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprayq_core::TargetGroup;

    fn row(epoch: u64, label: Option<f64>) -> FeatureRow {
        let mut labels = BTreeMap::new();
        if let Some(v) = label {
            labels.insert(QualityTarget::CoatingHardness, v);
        }
        labels.insert(QualityTarget::ParticleVelocity, 600.5);
        FeatureRow {
            epoch,
            features: (0..FEATURE_COUNT).map(|j| j as f64 + 0.1 * epoch as f64).collect(),
            labels,
        }
    }

    #[test]
    fn round_trip_with_missing_label() {
        let rows = vec![row(0, Some(1200.25)), row(1, None)];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",particle_velocity,coating_hardness"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn dataset_uses_group_mask_and_labelled_rows() {
        let rows = vec![row(0, Some(1.0)), row(1, None), row(2, Some(3.0))];
        let d = to_dataset(&rows, QualityTarget::CoatingHardness).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 27);
        let d = to_dataset(&rows, QualityTarget::ParticleVelocity).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_names, crate::features::feature_names(TargetGroup::Pip));
        assert_eq!(d.x[0][0], rows[0].features[3]);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_feature_csv("epoch,a,b\n1,2,3\n".as_bytes()).is_err());
    }
}
