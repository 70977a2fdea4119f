//! Censored samples, ordering with concomitants and top-k tail extraction.
//!
//! Ties in `z` are broken so that uncensored observations come before
//! censored ones in ascending order (events precede censorings, as in the
//! usual product-limit convention), then by original index. Continuous data
//! never hit this rule; it only matters for rounded or discretised inputs.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row} (line {line}): {message}")]
    Parse {
        row: usize,
        line: usize,
        message: String,
    },
    #[error("row {row} (line {line}): censoring indicator must be 0 or 1, got `{value}`")]
    InvalidDelta {
        row: usize,
        line: usize,
        value: String,
    },
    #[error("sample has {n} observations, need at least {min}")]
    TooSmall { n: usize, min: usize },
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("threshold Z_(n-k) is not positive")]
    DegenerateThreshold,
    #[error("observation {index}: {message}")]
    InvalidObservation { index: usize, message: String },
    #[error("covariate dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One observed triple `(z, delta, x)` with `z = min(Y, C)` and
/// `delta = 1{Y <= C}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub z: f64,
    pub delta: bool,
    pub x: Vec<f64>,
}

impl Observation {
    pub fn new(z: f64, delta: bool, x: Vec<f64>) -> Self {
        Self { z, delta, x }
    }
}

/// Column-major storage of `n` observations with covariate dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    z: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<f64>,
    m: usize,
}

impl CensoredSample {
    /// Builds a sample from observations, checking `z > 0`, a shared
    /// covariate dimension `m >= 1` and `n >= 2`.
    pub fn new(observations: Vec<Observation>) -> Result<Self, SampleError> {
        let n = observations.len();
        if n < 2 {
            return Err(SampleError::TooSmall { n, min: 2 });
        }
        let m = observations[0].x.len();
        if m == 0 {
            return Err(SampleError::InvalidObservation {
                index: 0,
                message: "covariate dimension must be at least 1".into(),
            });
        }
        let mut z = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * m);
        for (i, obs) in observations.into_iter().enumerate() {
            if !(obs.z > 0.0 && obs.z.is_finite()) {
                return Err(SampleError::InvalidObservation {
                    index: i,
                    message: format!("z must be positive and finite, got {}", obs.z),
                });
            }
            if obs.x.len() != m {
                return Err(SampleError::Dimension {
                    expected: m,
                    found: obs.x.len(),
                });
            }
            z.push(obs.z);
            delta.push(obs.delta);
            x.extend_from_slice(&obs.x);
        }
        Ok(Self { z, delta, x, m })
    }

    /// Columnar constructor; `x` is row-major with `m` entries per row.
    pub fn from_columns(
        z: Vec<f64>,
        delta: Vec<bool>,
        x: Vec<f64>,
        m: usize,
    ) -> Result<Self, SampleError> {
        let n = z.len();
        if delta.len() != n || m == 0 || x.len() != n * m {
            return Err(SampleError::Dimension {
                expected: n * m.max(1),
                found: x.len(),
            });
        }
        if n < 2 {
            return Err(SampleError::TooSmall { n, min: 2 });
        }
        if let Some(index) = z.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(SampleError::InvalidObservation {
                index,
                message: format!("z must be positive and finite, got {}", z[index]),
            });
        }
        Ok(Self { z, delta, x, m })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation::new(self.z[i], self.delta[i], self.x(i).to_vec())
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.len()).map(|i| self.observation(i))
    }

    /// Multiplies every `z` by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0);
        Self {
            z: self.z.iter().map(|z| z * c).collect(),
            ..self.clone()
        }
    }

    /// Fraction of censored observations over the whole sample.
    pub fn censored_fraction(&self) -> f64 {
        self.delta.iter().filter(|d| !**d).count() as f64 / self.len() as f64
    }
}

/// Column names used by [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub z: String,
    pub delta: String,
    pub covariates: Vec<String>,
}

impl CsvSchema {
    pub fn new(z: &str, delta: &str, covariates: &[&str]) -> Self {
        Self {
            z: z.into(),
            delta: delta.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::new("z", "delta", &["x"])
    }
}

/// Reads a comma-separated file with a header row. Extra columns are
/// ignored; rows are kept in file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CensoredSample, SampleError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<CensoredSample, SampleError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SampleError::MissingColumn(name.to_string()))
    };
    let z_col = column(&schema.z)?;
    let d_col = column(&schema.delta)?;
    let x_cols = schema
        .covariates
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>, _>>()?;
    if x_cols.is_empty() {
        return Err(SampleError::MissingColumn("<covariate>".into()));
    }

    let mut observations = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        let field = |c: usize| record.get(c).unwrap_or("");
        let parse = |c: usize, name: &str| -> Result<f64, SampleError> {
            let raw = field(c);
            raw.parse::<f64>().map_err(|_| SampleError::Parse {
                row,
                line,
                message: format!("column `{name}`: cannot parse `{raw}` as a number"),
            })
        };
        let z = parse(z_col, &schema.z)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(SampleError::Parse {
                row,
                line,
                message: format!("column `{}`: value {z} is not strictly positive", schema.z),
            });
        }
        let raw_delta = field(d_col);
        let delta = match raw_delta.parse::<f64>() {
            Ok(v) if v == 1.0 => true,
            Ok(v) if v == 0.0 => false,
            Ok(_) => {
                return Err(SampleError::InvalidDelta {
                    row,
                    line,
                    value: raw_delta.to_string(),
                })
            }
            Err(_) => {
                return Err(SampleError::Parse {
                    row,
                    line,
                    message: format!(
                        "column `{}`: cannot parse `{raw_delta}` as a number",
                        schema.delta
                    ),
                })
            }
        };
        let x = x_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&c, name)| parse(c, name))
            .collect::<Result<Vec<_>, _>>()?;
        observations.push(Observation::new(z, delta, x));
    }
    CensoredSample::new(observations)
}

/// Ascending order statistics of `z` with their concomitant indicators
/// and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    z_sorted: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<f64>,
    m: usize,
}

impl SortedSample {
    pub fn len(&self) -> usize {
        self.z_sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_sorted.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn z_sorted(&self) -> &[f64] {
        &self.z_sorted
    }

    pub fn delta_concomitants(&self) -> &[bool] {
        &self.delta
    }

    pub fn x_concomitant(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    fn check_k(&self, k: usize) -> Result<(), SampleError> {
        let max = self.len() - 1;
        if k == 0 || k > max {
            return Err(SampleError::KOutOfRange { k, max });
        }
        Ok(())
    }

    /// Top-k subsample rescaled by the threshold `Z_(n-k,n)`.
    pub fn tail(&self, k: usize) -> Result<TailSubsample, SampleError> {
        self.check_k(k)?;
        let n = self.len();
        let threshold = self.z_sorted[n - k - 1];
        if !(threshold > 0.0) {
            return Err(SampleError::DegenerateThreshold);
        }
        let mut v = Vec::with_capacity(k);
        let mut delta = Vec::with_capacity(k);
        let mut x = Vec::with_capacity(k * self.m);
        for i in 1..=k {
            let pos = n - i;
            v.push(self.z_sorted[pos] / threshold);
            delta.push(self.delta[pos]);
            x.extend_from_slice(self.x_concomitant(pos));
        }
        Ok(TailSubsample {
            k,
            threshold,
            v,
            delta,
            x,
            m: self.m,
        })
    }

    /// Share of censored observations among the top k.
    pub fn censored_proportion(&self, k: usize) -> Result<f64, SampleError> {
        self.check_k(k)?;
        let n = self.len();
        let censored = self.delta[n - k..].iter().filter(|d| !**d).count();
        Ok(censored as f64 / k as f64)
    }
}

/// Sorts by `z` ascending, carrying `delta` and `x` along.
pub fn sort_with_concomitants(sample: &CensoredSample) -> Result<SortedSample, SampleError> {
    let n = sample.len();
    if n < 2 {
        return Err(SampleError::TooSmall { n, min: 2 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    // uncensored before censored at equal z; sort_by is stable for the index rule
    order.sort_by(|&a, &b| {
        sample.z[a]
            .total_cmp(&sample.z[b])
            .then_with(|| sample.delta[b].cmp(&sample.delta[a]))
    });
    let m = sample.m;
    let mut x = Vec::with_capacity(n * m);
    for &i in &order {
        x.extend_from_slice(sample.x(i));
    }
    Ok(SortedSample {
        z_sorted: order.iter().map(|&i| sample.z[i]).collect(),
        delta: order.iter().map(|&i| sample.delta[i]).collect(),
        x,
        m,
    })
}

/// `tail_subsample(sorted, k)`: see [`SortedSample::tail`].
pub fn tail_subsample(sorted: &SortedSample, k: usize) -> Result<TailSubsample, SampleError> {
    sorted.tail(k)
}

pub fn censored_proportion(sorted: &SortedSample, k: usize) -> Result<f64, SampleError> {
    sorted.censored_proportion(k)
}

/// The k largest observations divided by `Z_(n-k,n)`, indexed from the
/// largest (`i = 0` holds `Z_(n,n) / Z_(n-k,n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct TailSubsample {
    k: usize,
    threshold: f64,
    v: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<f64>,
    m: usize,
}

impl TailSubsample {
    /// Direct constructor, mostly for tests and oracles. `v` must be
    /// non-increasing and `>= 1`.
    pub fn from_parts(
        threshold: f64,
        v: Vec<f64>,
        delta: Vec<bool>,
        x: Vec<f64>,
        m: usize,
    ) -> Result<Self, SampleError> {
        let k = v.len();
        if k == 0 {
            return Err(SampleError::KOutOfRange { k, max: 0 });
        }
        if delta.len() != k || m == 0 || x.len() != k * m {
            return Err(SampleError::Dimension {
                expected: k * m.max(1),
                found: x.len(),
            });
        }
        if !(threshold > 0.0) {
            return Err(SampleError::DegenerateThreshold);
        }
        for i in 0..k {
            let ok_order = i == 0 || v[i] <= v[i - 1];
            if !(v[i] >= 1.0) || !ok_order {
                return Err(SampleError::InvalidObservation {
                    index: i,
                    message: "rescaled values must be non-increasing and >= 1".into(),
                });
            }
        }
        Ok(Self {
            k,
            threshold,
            v,
            delta,
            x,
            m,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn x_first_coordinate(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.x(i)[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(z: &[f64], d: &[u8], x: &[f64]) -> CensoredSample {
        CensoredSample::new(
            z.iter()
                .zip(d)
                .zip(x)
                .map(|((&z, &d), &x)| Observation::new(z, d == 1, vec![x]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let data = "z,delta,x\n1.0,1,0.5\n2.0,0,1.5\n3.0,1,2.5\n";
        let s = read_csv(data.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.observation(1), Observation::new(2.0, false, vec![1.5]));
    }

    #[test]
    fn csv_extra_columns_ignored_and_order_free() {
        let data = "id,x,extra,delta,z\n1,0.5,a,1,1.0\n2,1.5,b,0,2.0\n";
        let s = read_csv(data.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(s.z(), &[1.0, 2.0]);
        assert_eq!(s.delta(), &[true, false]);
    }

    #[test]
    fn csv_bad_delta_cites_row() {
        let data = "z,delta,x\n1,1,0\n2,0,0\n3,1,0\n4,2,0\n";
        match read_csv(data.as_bytes(), &CsvSchema::default()) {
            Err(SampleError::InvalidDelta { row, line, .. }) => {
                assert_eq!(row, 4);
                assert_eq!(line, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_negative_z_is_parse_error() {
        let data = "z,delta,x\n1,1,0\n-1,0,0\n";
        assert!(matches!(
            read_csv(data.as_bytes(), &CsvSchema::default()),
            Err(SampleError::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn csv_missing_column_is_named() {
        let data = "z,status,x\n1,1,0\n2,0,0\n";
        match read_csv(data.as_bytes(), &CsvSchema::default()) {
            Err(SampleError::MissingColumn(c)) => assert_eq!(c, "delta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sort_carries_concomitants() {
        let s = sample(&[3.0, 1.0, 2.0], &[1, 0, 1], &[10.0, 20.0, 30.0]);
        let sorted = sort_with_concomitants(&s).unwrap();
        assert_eq!(sorted.z_sorted(), &[1.0, 2.0, 3.0]);
        assert_eq!(sorted.delta_concomitants(), &[false, true, true]);
        assert_eq!(sorted.x_concomitant(0), &[20.0]);
        assert_eq!(sorted.x_concomitant(1), &[30.0]);
        assert_eq!(sorted.x_concomitant(2), &[10.0]);
    }

    #[test]
    fn ties_put_events_first() {
        let s = sample(&[2.0, 2.0], &[0, 1], &[1.0, 2.0]);
        let sorted = sort_with_concomitants(&s).unwrap();
        assert_eq!(sorted.delta_concomitants(), &[true, false]);
        assert_eq!(sorted.x_concomitant(0), &[2.0]);
        // sorted input is left alone
        let s = sample(&[1.0, 2.0, 3.0], &[1, 0, 1], &[1.0, 2.0, 3.0]);
        let sorted = sort_with_concomitants(&s).unwrap();
        assert_eq!(sorted.z_sorted(), s.z());
        assert_eq!(sorted.delta_concomitants(), s.delta());
    }

    #[test]
    fn tail_ratios() {
        let s = sample(&[1.0, 2.0, 4.0, 8.0], &[1, 1, 0, 1], &[0.0; 4]);
        let t = sort_with_concomitants(&s).unwrap().tail(3).unwrap();
        assert_eq!(t.threshold(), 1.0);
        assert_eq!(t.v(), &[8.0, 4.0, 2.0]);
        assert_eq!(t.delta(), &[true, false, true]);

        let s = sample(&[1.0, 2.0], &[1, 1], &[0.0; 2]);
        let t = sort_with_concomitants(&s).unwrap().tail(1).unwrap();
        assert_eq!(t.v(), &[2.0]);

        let s = sample(&[5.0; 4], &[1; 4], &[0.0; 4]);
        let t = sort_with_concomitants(&s).unwrap().tail(3).unwrap();
        assert_eq!(t.v(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn tail_rejects_bad_k() {
        let s = sample(&[1.0, 2.0, 3.0], &[1, 1, 1], &[0.0; 3]);
        let sorted = sort_with_concomitants(&s).unwrap();
        assert!(matches!(sorted.tail(0), Err(SampleError::KOutOfRange { .. })));
        assert!(matches!(sorted.tail(3), Err(SampleError::KOutOfRange { .. })));
        assert!(sorted.censored_proportion(3).is_err());
    }

    #[test]
    fn censored_share_of_top_k() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1], &[0.0; 4]);
        let sorted = sort_with_concomitants(&s).unwrap();
        assert!((sorted.censored_proportion(3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let s = sample(&[1.0, 2.0, 3.0], &[1, 1, 1], &[0.0; 3]);
        assert_eq!(sort_with_concomitants(&s).unwrap().censored_proportion(2).unwrap(), 0.0);
        let s = sample(&[1.0, 2.0, 3.0], &[0, 0, 0], &[0.0; 3]);
        assert_eq!(sort_with_concomitants(&s).unwrap().censored_proportion(2).unwrap(), 1.0);
    }

    #[test]
    fn rejects_tiny_and_invalid_samples() {
        assert!(matches!(
            CensoredSample::new(vec![Observation::new(1.0, true, vec![0.0])]),
            Err(SampleError::TooSmall { .. })
        ));
        assert!(CensoredSample::new(vec![
            Observation::new(1.0, true, vec![0.0]),
            Observation::new(0.0, true, vec![0.0]),
        ])
        .is_err());
        assert!(matches!(
            CensoredSample::new(vec![
                Observation::new(1.0, true, vec![0.0]),
                Observation::new(2.0, true, vec![0.0, 1.0]),
            ]),
            Err(SampleError::Dimension { .. })
        ));
    }
}
