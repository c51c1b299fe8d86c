//! Multi-domain tabular datasets.
//!
//! A [`MultiDomainDataset`] is a set of labeled feature vectors partitioned
//! into named domains that share one feature space and one label space.
//! Constructors validate every invariant, so a value of these types is
//! always well formed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::{mix, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    feature_names: Vec<String>,
    class_labels: Vec<String>,
    domain_names: Vec<String>,
}

impl DatasetSchema {
    pub fn new(
        feature_names: Vec<String>,
        class_labels: Vec<String>,
        domain_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::InvalidSchema("no feature columns".into()));
        }
        if let Some(dup) = first_duplicate(&feature_names) {
            return Err(Error::InvalidSchema(format!("duplicate feature `{dup}`")));
        }
        if class_labels.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "need at least 2 classes, found {}",
                class_labels.len()
            )));
        }
        if let Some(dup) = first_duplicate(&class_labels) {
            return Err(Error::InvalidSchema(format!("duplicate class `{dup}`")));
        }
        if domain_names.is_empty() {
            return Err(Error::InvalidSchema("no domains".into()));
        }
        if let Some(dup) = first_duplicate(&domain_names) {
            return Err(Error::InvalidSchema(format!("duplicate domain `{dup}`")));
        }
        Ok(Self {
            feature_names,
            class_labels,
            domain_names,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn domain_names(&self) -> &[String] {
        &self.domain_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    /// Same features and classes, restricted to `domains`.
    fn with_domains(&self, domains: Vec<String>) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            class_labels: self.class_labels.clone(),
            domain_names: domains,
        }
    }
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = HashSet::new();
    names
        .iter()
        .find(|n| !seen.insert(n.as_str()))
        .map(String::as_str)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    name: String,
    samples: Vec<Sample>,
}

impl DomainDataset {
    /// Builds a domain; fails on an empty sample list or ragged feature vectors.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let name = name.into();
        let Some(first) = samples.first() else {
            return Err(Error::EmptyDomain(name));
        };
        let dim = first.features.len();
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
        }
        Ok(Self { name, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// The samples at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> DomainDataset {
        DomainDataset {
            name: self.name.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainDataset {
    schema: DatasetSchema,
    domains: Vec<DomainDataset>,
}

impl MultiDomainDataset {
    /// Checked constructor. `domains` may be given in any order; they are
    /// stored in the order of `schema.domain_names()`.
    pub fn new(schema: DatasetSchema, mut domains: Vec<DomainDataset>) -> Result<Self> {
        let dim = schema.feature_count();
        let classes = schema.class_count();
        let mut ordered = Vec::with_capacity(schema.domain_names.len());
        for name in &schema.domain_names {
            let pos = domains
                .iter()
                .position(|d| &d.name == name)
                .ok_or_else(|| Error::EmptyDomain(name.clone()))?;
            ordered.push(domains.swap_remove(pos));
        }
        if let Some(extra) = domains.first() {
            return Err(Error::InvalidSchema(format!(
                "domain `{}` is not listed in the schema",
                extra.name
            )));
        }
        for d in &ordered {
            for s in &d.samples {
                if s.features.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.features.len(),
                    });
                }
                if s.label >= classes {
                    return Err(Error::InvalidSchema(format!(
                        "label index {} out of range for {} classes",
                        s.label, classes
                    )));
                }
                if s.features.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSchema(format!(
                        "non-finite feature value in domain `{}`",
                        d.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            domains: ordered,
        })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn domains(&self) -> &[DomainDataset] {
        &self.domains
    }

    pub fn domain(&self, name: &str) -> Option<&DomainDataset> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn sample_count(&self) -> usize {
        self.domains.iter().map(|d| d.len()).sum()
    }

    /// Every sample of every domain, in domain order.
    pub fn pooled(&self) -> Vec<&Sample> {
        self.domains.iter().flat_map(|d| d.samples.iter()).collect()
    }

    /// Removes `target` and returns `(sources, target)`.
    pub fn split_source_target(&self, target: &str) -> Result<(MultiDomainDataset, DomainDataset)> {
        let target_domain = self
            .domain(target)
            .ok_or_else(|| Error::UnknownDomain(target.to_string()))?
            .clone();
        if self.domains.len() < 2 {
            return Err(Error::TooFewDomains {
                required: 2,
                found: self.domains.len(),
            });
        }
        let sources: Vec<DomainDataset> = self
            .domains
            .iter()
            .filter(|d| d.name != target)
            .cloned()
            .collect();
        let names = sources.iter().map(|d| d.name.clone()).collect();
        Ok((
            MultiDomainDataset {
                schema: self.schema.with_domains(names),
                domains: sources,
            },
            target_domain,
        ))
    }
}

/// Loads a CSV file with one label column, one domain column and numeric
/// features in every other column.
///
/// Class indices follow the lexicographic order of the distinct label
/// strings; domains keep their order of first appearance.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    domain_column: &str,
) -> Result<MultiDomainDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column, domain_column)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    label_column: &str,
    domain_column: &str,
) -> Result<MultiDomainDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if let Some(dup) = first_duplicate(&headers) {
        return Err(Error::DuplicateHeader(dup.to_string()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(label_column)?;
    let domain_idx = find(domain_column)?;
    if label_idx == domain_idx {
        return Err(Error::DuplicateHeader(label_column.to_string()));
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && i != domain_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidSchema("no feature columns".into()));
    }

    // (domain, label string, features)
    let mut rows: Vec<(String, String, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| -> Result<&str> {
            match record.get(i) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::MissingValue {
                    line,
                    column: headers[i].clone(),
                }),
            }
        };
        let domain = cell(domain_idx)?.to_string();
        let label = cell(label_idx)?.to_string();
        let mut features = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let raw = cell(c)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(Error::NonNumericFeature {
                        line,
                        column: headers[c].clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        rows.push((domain, label, features));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let class_labels: Vec<String> = rows
        .iter()
        .map(|r| r.1.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: HashMap<&str, usize> = class_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut domain_names: Vec<String> = Vec::new();
    let mut buckets: HashMap<String, Vec<Sample>> = HashMap::new();
    for (domain, label, features) in &rows {
        let label = class_index[label.as_str()];
        buckets
            .entry(domain.clone())
            .or_insert_with(|| {
                domain_names.push(domain.clone());
                Vec::new()
            })
            .push(Sample::new(features.clone(), label));
    }

    let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let schema = DatasetSchema::new(feature_names, class_labels, domain_names.clone())?;
    let domains = domain_names
        .iter()
        .map(|n| DomainDataset::new(n.clone(), buckets.remove(n).unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    MultiDomainDataset::new(schema, domains)
}

/// Writes the dataset as CSV: feature columns, then label, then domain.
pub fn write_csv(
    data: &MultiDomainDataset,
    path: impl AsRef<Path>,
    label_column: &str,
    domain_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(data, file, label_column, domain_column)
}

pub fn write_csv_to<W: std::io::Write>(
    data: &MultiDomainDataset,
    writer: W,
    label_column: &str,
    domain_column: &str,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data
        .schema
        .feature_names
        .iter()
        .map(String::as_str)
        .collect();
    header.push(label_column);
    header.push(domain_column);
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for d in &data.domains {
        for s in &d.samples {
            row.clear();
            // `{}` on f64 prints the shortest string that parses back exactly.
            row.extend(s.features.iter().map(|v| format!("{v}")));
            row.push(data.schema.class_labels[s.label].clone());
            row.push(d.name.clone());
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Number of rows drawn for a sampling ratio: nearest integer, at least one.
pub fn subsample_size(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    Ok(((ratio * n as f64).round() as usize).max(1))
}

/// Draws `subsample_size(n, ratio)` indices from `0..n`.
pub fn subsample_indices<R: Rng + ?Sized>(
    n: usize,
    ratio: f64,
    with_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let k = subsample_size(n, ratio)?;
    Ok(if with_replacement {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    } else {
        index::sample(rng, n, k).into_vec()
    })
}

pub fn subsample(
    domain: &DomainDataset,
    ratio: f64,
    with_replacement: bool,
    seed: u64,
) -> Result<DomainDataset> {
    let mut rng = rng_from_seed(seed);
    let idx = subsample_indices(domain.len(), ratio, with_replacement, &mut rng)?;
    Ok(domain.select(&idx))
}

/// Parameters of the synthetic domain-shift benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub domain_count: usize,
    pub class_count: usize,
    pub feature_dim: usize,
    pub samples_per_domain: usize,
    pub shift_magnitude: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            domain_count: 4,
            class_count: 3,
            feature_dim: 10,
            samples_per_domain: 300,
            shift_magnitude: 2.0,
            noise_scale: 1.0,
            seed: 7,
        }
    }
}

/// Spread of the shared class means around the origin.
const CLASS_MEAN_SCALE: f64 = 1.0;
/// Rotation angle (radians) applied per unit of shift magnitude.
const ROTATION_PER_SHIFT: f64 = 0.15;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.domain_count < 3 {
            return bad(format!(
                "domain_count = {}: meta-forests needs at least 3 domains",
                self.domain_count
            ));
        }
        if self.class_count < 2 {
            return bad(format!(
                "class_count = {}: need at least 2",
                self.class_count
            ));
        }
        if self.feature_dim < 2 {
            return bad(format!(
                "feature_dim = {}: need at least 2",
                self.feature_dim
            ));
        }
        if self.samples_per_domain == 0 {
            return bad("samples_per_domain must be positive".into());
        }
        if !(self.shift_magnitude.is_finite() && self.shift_magnitude >= 0.0) {
            return bad(format!(
                "shift_magnitude = {}: must be finite and non-negative",
                self.shift_magnitude
            ));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!(
                "noise_scale = {}: must be finite and positive",
                self.noise_scale
            ));
        }
        Ok(())
    }
}

fn padded_names(prefix: &str, n: usize) -> Vec<String> {
    let width = (n.saturating_sub(1)).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Rotation by `angle` inside the plane spanned by orthonormal `u`, `v`.
fn rotate_in_plane(x: &[f64], u: &[f64], v: &[f64], angle: f64) -> Vec<f64> {
    let (xu, xv) = (dot(x, u), dot(x, v));
    let (s, c) = angle.sin_cos();
    x.iter()
        .zip(u.iter().zip(v))
        .map(|(&xi, (&ui, &vi))| xi + s * (xu * vi - xv * ui) + (c - 1.0) * (xu * ui + xv * vi))
        .collect()
}

/// Gaussian class clusters whose means are rotated and translated per domain.
///
/// Class means are shared across domains; each domain applies a rotation in
/// a random plane by `ROTATION_PER_SHIFT * shift_magnitude` radians and a
/// translation of length `shift_magnitude` in a random direction. A zero
/// shift therefore makes all domains identically distributed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiDomainDataset> {
    spec.validate()?;
    let dim = spec.feature_dim;
    let mut rng = rng_from_seed(mix(&[spec.seed, 0x5ee0]));
    let class_means: Vec<Vec<f64>> = (0..spec.class_count)
        .map(|_| {
            gaussian_vec(&mut rng, dim)
                .into_iter()
                .map(|v| v * CLASS_MEAN_SCALE)
                .collect()
        })
        .collect();

    let domain_names = padded_names("d", spec.domain_count);
    let mut domains = Vec::with_capacity(spec.domain_count);
    for name in &domain_names {
        let mut u = gaussian_vec(&mut rng, dim);
        normalize(&mut u);
        let mut v = gaussian_vec(&mut rng, dim);
        let proj = dot(&v, &u);
        v.iter_mut().zip(&u).for_each(|(vi, ui)| *vi -= proj * ui);
        normalize(&mut v);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let angle = sign * ROTATION_PER_SHIFT * spec.shift_magnitude;
        let mut direction = gaussian_vec(&mut rng, dim);
        normalize(&mut direction);

        let means: Vec<Vec<f64>> = class_means
            .iter()
            .map(|m| {
                rotate_in_plane(m, &u, &v, angle)
                    .into_iter()
                    .zip(&direction)
                    .map(|(x, t)| x + spec.shift_magnitude * t)
                    .collect()
            })
            .collect();

        let samples = (0..spec.samples_per_domain)
            .map(|_| {
                let label = rng.random_range(0..spec.class_count);
                let features = means[label]
                    .iter()
                    .map(|&mu| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mu + spec.noise_scale * z
                    })
                    .collect();
                Sample::new(features, label)
            })
            .collect();
        domains.push(DomainDataset::new(name.clone(), samples)?);
    }

    let schema = DatasetSchema::new(
        padded_names("f", dim),
        padded_names("c", spec.class_count),
        domain_names,
    )?;
    MultiDomainDataset::new(schema, domains)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "x1,x2,label,domain\n\
                         0.5,1.0,yes,A\n\
                         1.5,2.0,no,B\n\
                         2.5,3.0,no,A\n\
                         3.5,4.0,yes,B\n";

    #[test]
    fn small_csv_partitions_rows() {
        let data = read_csv(SMALL.as_bytes(), "label", "domain").unwrap();
        assert_eq!(data.domain_count(), 2);
        assert_eq!(data.schema().class_count(), 2);
        assert_eq!(data.schema().domain_names(), ["A", "B"]);
        assert_eq!(data.schema().class_labels(), ["no", "yes"]);
        let a = data.domain("A").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.samples()[0], Sample::new(vec![0.5, 1.0], 1));
        assert_eq!(a.samples()[1], Sample::new(vec![2.5, 3.0], 0));
        assert_eq!(data.domain("B").unwrap().len(), 2);
    }

    #[test]
    fn text_in_feature_cell_is_reported() {
        let csv = "x1,x2,label,domain\n0.5,1.0,yes,A\n1.5,abc,no,B\n";
        match read_csv(csv.as_bytes(), "label", "domain") {
            Err(Error::NonNumericFeature {
                line,
                column,
                value,
            }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "x2");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_and_missing_cells_are_rejected() {
        let csv = "x1,label,domain\ninf,yes,A\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "label", "domain"),
            Err(Error::NonNumericFeature { .. })
        ));
        let csv = "x1,label,domain\n,yes,A\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "label", "domain"),
            Err(Error::MissingValue { .. })
        ));
    }

    #[test]
    fn header_errors() {
        let csv = "x1,label,domain\n1,a,A\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "class", "domain"),
            Err(Error::MissingColumn(c)) if c == "class"
        ));
        let csv = "x1,x1,label,domain\n1,2,a,A\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "label", "domain"),
            Err(Error::DuplicateHeader(c)) if c == "x1"
        ));
        let csv = "x1,label,domain\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "label", "domain"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn glucose_style_schema_is_accepted() {
        let mut csv = String::new();
        let feats: Vec<String> = (0..19).map(|i| format!("s{i}")).collect();
        csv.push_str(&feats.join(","));
        csv.push_str(",label,domain\n");
        for p in 1..=5 {
            for class in ["normal", "prediabetes", "diabetes"] {
                let row: Vec<String> = (0..19)
                    .map(|i| format!("{}", i as f64 * 0.1 + p as f64))
                    .collect();
                csv.push_str(&format!("{},{class},P{p}\n", row.join(",")));
            }
        }
        let data = read_csv(csv.as_bytes(), "label", "domain").unwrap();
        assert_eq!(data.schema().feature_count(), 19);
        assert_eq!(data.schema().class_count(), 3);
        assert_eq!(data.domain_count(), 5);
    }

    #[test]
    fn split_source_target_cases() {
        let data = read_csv(SMALL.as_bytes(), "label", "domain").unwrap();
        let (sources, target) = data.split_source_target("B").unwrap();
        assert_eq!(sources.schema().domain_names(), ["A"]);
        assert_eq!(target.name(), "B");
        assert!(sources.domain("B").is_none());
        assert!(matches!(
            data.split_source_target("Z"),
            Err(Error::UnknownDomain(_))
        ));

        let five = generate_synthetic(&SyntheticSpec {
            domain_count: 5,
            samples_per_domain: 10,
            ..Default::default()
        })
        .unwrap();
        let (sources, target) = five.split_source_target("d0").unwrap();
        assert_eq!(sources.domain_count(), 4);
        assert_eq!(target.name(), "d0");
        assert_eq!(sources.sample_count() + target.len(), five.sample_count());
    }

    #[test]
    fn subsample_sizes_and_errors() {
        let samples = (0..100).map(|i| Sample::new(vec![i as f64], 0)).collect();
        let d = DomainDataset::new("A", samples).unwrap();
        assert_eq!(subsample(&d, 0.2, true, 1).unwrap().len(), 20);
        assert_eq!(subsample(&d, 0.2, false, 1).unwrap().len(), 20);
        assert_eq!(subsample(&d, 0.001, false, 1).unwrap().len(), 1);
        assert!(matches!(
            subsample(&d, 0.0, false, 1),
            Err(Error::InvalidRatio(_))
        ));
        assert!(matches!(
            subsample(&d, 1.5, false, 1),
            Err(Error::InvalidRatio(_))
        ));
        assert!(matches!(
            subsample(&d, f64::NAN, false, 1),
            Err(Error::InvalidRatio(_))
        ));
    }

    #[test]
    fn full_subsample_without_replacement_is_a_permutation() {
        let samples = (0..50).map(|i| Sample::new(vec![i as f64], 0)).collect();
        let d = DomainDataset::new("A", samples).unwrap();
        let s = subsample(&d, 1.0, false, 9).unwrap();
        let mut got: Vec<f64> = s.samples().iter().map(|s| s.features[0]).collect();
        got.sort_by(f64::total_cmp);
        let want: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(got, want);
        assert_eq!(
            subsample(&d, 0.3, true, 4).unwrap(),
            subsample(&d, 0.3, true, 4).unwrap()
        );
    }

    #[test]
    fn synthetic_bookkeeping() {
        let spec = SyntheticSpec {
            domain_count: 4,
            class_count: 3,
            feature_dim: 10,
            samples_per_domain: 300,
            shift_magnitude: 2.0,
            noise_scale: 1.0,
            seed: 7,
        };
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.sample_count(), 1200);
        assert_eq!(data.domain_count(), 4);
        assert_eq!(data.schema().domain_names(), ["d0", "d1", "d2", "d3"]);
        assert_eq!(data, generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_spec_validation() {
        for spec in [
            SyntheticSpec {
                domain_count: 2,
                ..Default::default()
            },
            SyntheticSpec {
                class_count: 1,
                ..Default::default()
            },
            SyntheticSpec {
                feature_dim: 1,
                ..Default::default()
            },
            SyntheticSpec {
                samples_per_domain: 0,
                ..Default::default()
            },
            SyntheticSpec {
                noise_scale: 0.0,
                ..Default::default()
            },
            SyntheticSpec {
                shift_magnitude: -1.0,
                ..Default::default()
            },
        ] {
            assert!(
                matches!(generate_synthetic(&spec), Err(Error::InvalidSpec(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn padded_names_sort_like_indices() {
        let names = padded_names("c", 12);
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(names[3], "c03");
    }

    #[test]
    fn rotation_preserves_norm() {
        let u = [1.0, 0.0, 0.0];
        let v = [0.0, 1.0, 0.0];
        let r = rotate_in_plane(&[1.0, 0.0, 2.0], &u, &v, std::f64::consts::FRAC_PI_2);
        assert!((r[0]).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12 && (r[2] - 2.0).abs() < 1e-12);
    }
}
