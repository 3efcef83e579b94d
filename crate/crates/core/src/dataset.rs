//! Labeled multivariate time series: CSV ingestion, cleaning, temporal
//! train/test split and min-max normalization.
//!
//! The CSV layout is `timestamp,<feature columns…>,label` with a header row.
//! Missing cells are written as an empty field or `NaN` and held in memory as
//! `NaN` until [`fill_forward`] replaces them.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EventDataset {
    pub name: String,
    pub column_names: Vec<String>,
    pub timestamps: Vec<i64>,
    /// `M×n`; `NaN` marks a missing cell.
    pub features: Tensor,
    pub labels: Vec<u8>,
}

/// Which header names carry the timestamp and the label; every other column
/// is a feature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRoles {
    pub timestamp: String,
    pub label: String,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".to_string(),
            label: "label".to_string(),
        }
    }
}

impl EventDataset {
    pub fn new(
        name: impl Into<String>,
        column_names: Vec<String>,
        timestamps: Vec<i64>,
        features: Tensor,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            column_names,
            timestamps,
            features,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.features.rows();
        if self.labels.len() != m || self.timestamps.len() != m {
            return Err(Error::Validation(format!(
                "{} feature rows, {} labels, {} timestamps",
                m,
                self.labels.len(),
                self.timestamps.len()
            )));
        }
        if self.column_names.len() != self.features.cols() {
            return Err(Error::Validation(format!(
                "{} column names for {} feature columns",
                self.column_names.len(),
                self.features.cols()
            )));
        }
        if let Some(row) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::Validation(format!(
                "label {} in row {row} is not 0 or 1",
                self.labels[row]
            )));
        }
        if let Some(row) = (1..m).find(|&i| self.timestamps[i] <= self.timestamps[i - 1]) {
            return Err(Error::Validation(format!(
                "timestamps must strictly increase; row {row} ({}) follows {}",
                self.timestamps[row],
                self.timestamps[row - 1]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn missing_count(&self) -> usize {
        self.features.data().iter().filter(|v| v.is_nan()).count()
    }

    /// Rows at the given indices, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let n = self.feature_count();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.features.row(r));
        }
        Self {
            name: self.name.clone(),
            column_names: self.column_names.clone(),
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            features: Tensor::from_vec(rows.len(), n, data).expect("row-aligned"),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Keeps the named feature columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|name| {
                self.column_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<_>>()?;
        let m = self.len();
        let mut data = Vec::with_capacity(m * idx.len());
        for r in 0..m {
            let row = self.features.row(r);
            data.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(Self {
            name: self.name.clone(),
            column_names: names.to_vec(),
            timestamps: self.timestamps.clone(),
            features: Tensor::from_vec(m, idx.len(), data)?,
            labels: self.labels.clone(),
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        self.write_csv(&mut out);
        out
    }

    fn write_csv(&self, out: &mut String) {
        use std::fmt::Write as _;
        out.push_str("timestamp");
        for c in &self.column_names {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",label\n");
        for r in 0..self.len() {
            let _ = write!(out, "{}", self.timestamps[r]);
            for v in self.features.row(r) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.labels[r]);
        }
    }

    /// Writes the dataset CSV, optionally preceded by `#` comment lines.
    pub fn save_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        let mut text = String::new();
        for c in comments {
            text.push_str("# ");
            text.push_str(c);
            text.push('\n');
        }
        self.write_csv(&mut text);
        write_atomic(path, text.as_bytes())
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse_cell(cell: &str) -> f64 {
    let t = cell.trim();
    if t.is_empty() {
        return f64::NAN;
    }
    t.parse::<f64>().unwrap_or(f64::NAN)
}

pub fn load_csv(path: &Path, roles: &ColumnRoles) -> Result<EventDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &name, roles)
}

/// Parses dataset CSV text. Lines starting with `#` before the header are
/// ignored.
pub fn parse_csv(text: &str, name: &str, roles: &ColumnRoles) -> Result<EventDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Format("missing header row".into()));
    }
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Format(
            "missing header row: first line is numeric".into(),
        ));
    }
    let find = |role: &str| -> Result<usize> {
        let hits: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == role)
            .map(|(i, _)| i)
            .collect();
        match hits.len() {
            0 => Err(Error::MissingColumn(role.to_string())),
            1 => Ok(hits[0]),
            _ => Err(Error::Format(format!("column `{role}` appears more than once"))),
        }
    };
    let ts_col = find(&roles.timestamp)?;
    let label_col = find(&roles.label)?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != ts_col && i != label_col)
        .collect();
    let column_names: Vec<String> = feature_cols.iter().map(|&i| header[i].clone()).collect();

    let mut timestamps = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        let ts = record[ts_col].trim();
        let ts: i64 = ts
            .parse()
            .map_err(|_| Error::Validation(format!("row {row}: timestamp `{ts}` is not an integer")))?;
        let label = match record[label_col].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Validation(format!(
                    "row {row}: label `{other}` is not 0 or 1"
                )))
            }
        };
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(Error::Validation(format!(
                    "timestamps must strictly increase; row {row} ({ts}) follows {prev}"
                )));
            }
        }
        timestamps.push(ts);
        labels.push(label);
        data.extend(feature_cols.iter().map(|&i| parse_cell(&record[i])));
    }
    let m = timestamps.len();
    let features = Tensor::from_vec(m, feature_cols.len(), data)?;
    EventDataset::new(name, column_names, timestamps, features, labels)
}

/// Replaces every missing cell with the nearest preceding value in its column.
pub fn fill_forward(ds: &EventDataset) -> Result<EventDataset> {
    let mut out = ds.clone();
    let n = out.feature_count();
    if out.is_empty() {
        return Ok(out);
    }
    if let Some(c) = (0..n).find(|&c| out.features.get(0, c).is_nan()) {
        return Err(Error::Unfillable {
            column: out.column_names[c].clone(),
        });
    }
    for r in 1..out.len() {
        for c in 0..n {
            if out.features.get(r, c).is_nan() {
                let prev = out.features.get(r - 1, c);
                out.features.set(r, c, prev);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

pub const REASON_EXCLUDED: &str = "manually excluded";
pub const REASON_ZERO_VARIANCE: &str = "zero variance";

/// Removes user-excluded columns and columns whose observed values never
/// change. Returns the cleaned dataset and a record of what was removed.
pub fn drop_unlearnable(
    ds: &EventDataset,
    manual_exclusions: &BTreeSet<String>,
) -> Result<(EventDataset, Vec<DroppedColumn>)> {
    if let Some(unknown) = manual_exclusions
        .iter()
        .find(|name| !ds.column_names.contains(name))
    {
        return Err(Error::MissingColumn(unknown.clone()));
    }
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (c, name) in ds.column_names.iter().enumerate() {
        if manual_exclusions.contains(name) {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: REASON_EXCLUDED.to_string(),
            });
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..ds.len() {
            let v = ds.features.get(r, c);
            if !v.is_nan() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi > lo) {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: REASON_ZERO_VARIANCE.to_string(),
            });
            continue;
        }
        keep.push(name.clone());
    }
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((ds.select_columns(&keep)?, dropped))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub preserve_order: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_ratio: 0.7,
            preserve_order: true,
        }
    }
}

/// `⌊ratio · count⌋`, tolerant of the representation error in ratios such
/// as 0.7.
pub fn floor_fraction(ratio: f64, count: usize) -> usize {
    (ratio * count as f64 + 1e-9).floor() as usize
}

/// Row indices of the training and test partitions.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(Error::Split(format!(
            "train ratio {} outside (0, 1)",
            spec.train_ratio
        )));
    }
    if !spec.preserve_order {
        return Err(Error::Split(
            "only order-preserving splits are supported".into(),
        ));
    }
    let normal: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if normal.is_empty() {
        return Err(Error::Split("dataset has no normal rows".into()));
    }
    let needed = (1.0 / (1.0 - spec.train_ratio) - 1e-9).ceil() as usize;
    if normal.len() < needed {
        return Err(Error::Split(format!(
            "ratio {} needs at least {needed} normal rows, found {}",
            spec.train_ratio,
            normal.len()
        )));
    }
    let n_train = floor_fraction(spec.train_ratio, normal.len());
    if n_train == 0 {
        return Err(Error::Split(format!(
            "ratio {} leaves the training split empty",
            spec.train_ratio
        )));
    }
    let train: Vec<usize> = normal[..n_train].to_vec();
    let cut = train[n_train - 1];
    let test: Vec<usize> = (0..labels.len())
        .filter(|&i| !(labels[i] == 0 && i <= cut))
        .collect();
    Ok((train, test))
}

/// Training split: the first `⌊ratio · #normal⌋` normal rows. Test split:
/// every other row, in time order.
pub fn split_train_test(ds: &EventDataset, spec: &SplitSpec) -> Result<(EventDataset, EventDataset)> {
    let (train, test) = split_indices(&ds.labels, spec)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Per-column min and max of the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationState {
    pub fn fit(train: &Tensor) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::Contract("cannot fit normalization on an empty split".into()));
        }
        let n = train.cols();
        let mut mins = vec![f64::INFINITY; n];
        let mut maxs = vec![f64::NEG_INFINITY; n];
        for r in 0..train.rows() {
            for (c, &v) in train.row(r).iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn feature_count(&self) -> usize {
        self.mins.len()
    }

    /// Columns whose training values are all equal; they map to 0.
    pub fn degenerate(&self) -> Vec<bool> {
        self.mins.iter().zip(&self.maxs).map(|(lo, hi)| !(hi > lo)).collect()
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.mins[c], self.maxs[c]);
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Inverse of [`NormalizationState::apply`]; degenerate columns return
    /// their constant training value.
    pub fn invert(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.mins[c], self.maxs[c]);
                *v = if hi > lo { *v * (hi - lo) + lo } else { lo };
            }
        }
        Ok(out)
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.mins.len() {
            return Err(Error::Dimension {
                expected: self.mins.len(),
                found: x.cols(),
            });
        }
        Ok(())
    }
}

/// Fits min-max scaling on `train` and applies it to both splits. Test
/// values outside the training range are not clipped.
pub fn fit_apply_normalization(
    train: &EventDataset,
    test: &EventDataset,
) -> Result<(EventDataset, EventDataset, NormalizationState)> {
    let state = NormalizationState::fit(&train.features)?;
    let mut tr = train.clone();
    let mut te = test.clone();
    tr.features = state.apply(&train.features)?;
    te.features = state.apply(&test.features)?;
    Ok((tr, te, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(i64, &[f64], u8)]) -> EventDataset {
        let n = rows[0].1.len();
        let names = (0..n).map(|i| format!("f{i}")).collect();
        let data = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        EventDataset::new(
            "t",
            names,
            rows.iter().map(|r| r.0).collect(),
            Tensor::from_vec(rows.len(), n, data).unwrap(),
            rows.iter().map(|r| r.2).collect(),
        )
        .unwrap()
    }

    #[test]
    fn parse_small_file() {
        let text = "timestamp,a,b,label\n1,0.5,2,0\n2,0.25,3,0\n3,1e3,-1,1\n";
        let d = parse_csv(text, "x", &ColumnRoles::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_count(), 2);
        assert_eq!(d.labels, vec![0, 0, 1]);
        assert_eq!(d.features.get(2, 0), 1000.0);
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let text = "label,x,timestamp\n0,1.5,10\n1,2.5,20\n";
        let d = parse_csv(text, "x", &ColumnRoles::default()).unwrap();
        assert_eq!(d.column_names, vec!["x"]);
        assert_eq!(d.timestamps, vec![10, 20]);
    }

    #[test]
    fn decreasing_timestamp_names_the_row() {
        let text = "timestamp,a,label\n0,1,0\n1,1,0\n2,1,0\n3,1,0\n4,1,0\n3,1,0\n";
        let err = parse_csv(text, "x", &ColumnRoles::default()).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("row 5"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_label_and_missing_header() {
        let text = "timestamp,a,label\n0,1,2\n";
        assert!(matches!(
            parse_csv(text, "x", &ColumnRoles::default()),
            Err(Error::Validation(_))
        ));
        let text = "0,1,0\n1,1,0\n";
        assert!(matches!(
            parse_csv(text, "x", &ColumnRoles::default()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_csv("", "x", &ColumnRoles::default()),
            Err(Error::Format(_))
        ));
        let text = "timestamp,a\n0,1\n";
        assert!(matches!(
            parse_csv(text, "x", &ColumnRoles::default()),
            Err(Error::MissingColumn(c)) if c == "label"
        ));
    }

    #[test]
    fn malformed_cells_become_missing() {
        let text = "timestamp,a,b,label\n0,1,2,0\n1,,oops,0\n2,NaN,4,0\n";
        let d = parse_csv(text, "x", &ColumnRoles::default()).unwrap();
        assert_eq!(d.missing_count(), 3);
    }

    #[test]
    fn forward_fill() {
        let nan = f64::NAN;
        let d = ds(&[(0, &[1.0], 0), (1, &[nan], 0), (2, &[nan], 0), (3, &[4.0], 0)]);
        let f = fill_forward(&d).unwrap();
        assert_eq!(f.features.data(), &[1.0, 1.0, 1.0, 4.0]);
        assert_eq!(fill_forward(&f).unwrap(), f);

        let clean = ds(&[(0, &[1.0, 2.0], 0), (1, &[3.0, 4.0], 1)]);
        assert_eq!(fill_forward(&clean).unwrap(), clean);

        let bad = ds(&[(0, &[1.0, nan], 0), (1, &[3.0, 4.0], 1)]);
        assert!(matches!(fill_forward(&bad), Err(Error::Unfillable { column }) if column == "f1"));
    }

    #[test]
    fn drop_constant_and_excluded_columns() {
        let d = ds(&[(0, &[1.0, 5.0, 0.0], 0), (1, &[2.0, 5.0, 1.0], 0), (2, &[3.0, 5.0, 2.0], 1)]);
        let (clean, dropped) = drop_unlearnable(&d, &BTreeSet::new()).unwrap();
        assert_eq!(clean.column_names, vec!["f0", "f2"]);
        assert_eq!(dropped, vec![DroppedColumn {
            name: "f1".into(),
            reason: REASON_ZERO_VARIANCE.into()
        }]);

        let d2 = ds(&[(0, &[1.0, 2.0], 0), (1, &[2.0, 3.0], 0)]);
        let (same, none) = drop_unlearnable(&d2, &BTreeSet::new()).unwrap();
        assert_eq!(same, d2);
        assert!(none.is_empty());

        let all: BTreeSet<String> = ["f0".to_string(), "f1".to_string()].into();
        assert!(matches!(drop_unlearnable(&d2, &all), Err(Error::EmptyDataset)));
        let unknown: BTreeSet<String> = ["nope".to_string()].into();
        assert!(matches!(drop_unlearnable(&d2, &unknown), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn split_ten_normal_rows() {
        let labels = vec![0u8; 10];
        let (train, test) = split_indices(&labels, &SplitSpec::default()).unwrap();
        assert_eq!(train, (0..7).collect::<Vec<_>>());
        assert_eq!(test, vec![7, 8, 9]);
    }

    #[test]
    fn split_requires_normal_rows() {
        assert!(matches!(
            split_indices(&[1, 1, 1], &SplitSpec::default()),
            Err(Error::Split(_))
        ));
        // 0.7 needs ⌈1/0.3⌉ = 4 normal rows
        assert!(split_indices(&[0, 0, 0], &SplitSpec::default()).is_err());
        assert!(split_indices(&[0, 0, 0, 0], &SplitSpec::default()).is_ok());
    }

    #[test]
    fn floor_fraction_tolerates_decimal_ratios() {
        assert_eq!(floor_fraction(0.7, 10), 7);
        assert_eq!(floor_fraction(0.7, 6070), 4249);
        assert_eq!(floor_fraction(0.7, 7), 4);
    }

    #[test]
    fn normalization() {
        let train = Tensor::from_vec(3, 2, vec![0.0, 3.0, 5.0, 3.0, 10.0, 3.0]).unwrap();
        let st = NormalizationState::fit(&train).unwrap();
        let n = st.apply(&train).unwrap();
        assert_eq!(n.data(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
        assert_eq!(st.degenerate(), vec![false, true]);
        let test = Tensor::from_vec(1, 2, vec![20.0, 7.0]).unwrap();
        assert_eq!(st.apply(&test).unwrap().data(), &[2.0, 0.0]);
        assert!(matches!(
            st.apply(&Tensor::zeros(1, 3)),
            Err(Error::Dimension { expected: 2, found: 3 })
        ));
    }
}
