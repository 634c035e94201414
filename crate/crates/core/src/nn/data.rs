use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Matrix;
use crate::error::{Error, Result};

/// Labelled samples, one feature row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.rows(), got: labels.len() });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::LabelOutOfRange { row, label: label as i64, num_classes });
        }
        Ok(Self { features, labels, num_classes })
    }

    /// Reads `num_features` numeric columns followed by an integer label
    /// column. Errors name the 1-based line of the offending row.
    pub fn from_csv_reader<R: Read>(
        reader: R,
        num_features: usize,
        num_classes: usize,
        has_header: bool,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(has_header).flexible(true).from_reader(reader);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != num_features + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", num_features + 1, rec.len()),
                });
            }
            for field in rec.iter().take(num_features) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad feature value `{field}`") })?;
                data.push(v);
            }
            let raw = rec[num_features].trim();
            let label: i64 =
                raw.parse().map_err(|_| Error::Parse { line, message: format!("bad label `{raw}`") })?;
            if label < 0 || label as usize >= num_classes {
                return Err(Error::LabelOutOfRange { row: line, label, num_classes });
            }
            labels.push(label as usize);
        }
        if labels.is_empty() {
            return Err(Error::InvalidConfig("dataset has no rows".into()));
        }
        let features = Matrix::new(labels.len(), num_features, data)?;
        Ok(Self { features, labels, num_classes })
    }

    pub fn from_csv_path(path: &Path, num_features: usize, num_classes: usize, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, num_features, num_classes, has_header)
    }

    /// Two well-separated Gaussian blobs in the plane.
    pub fn blobs(per_class: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.6).expect("valid sigma");
        let centers = [(-2.0, -1.0), (2.0, 1.0)];
        let mut data = Vec::with_capacity(per_class * 4);
        let mut labels = Vec::with_capacity(per_class * 2);
        for _ in 0..per_class {
            for (class, &(cx, cy)) in centers.iter().enumerate() {
                data.push(cx + noise.sample(&mut rng));
                data.push(cy + noise.sample(&mut rng));
                labels.push(class);
            }
        }
        let features = Matrix::new(labels.len(), 2, data).expect("consistent shape");
        Self { features, labels, num_classes: 2 }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.features.as_mut_slice() {
            *v *= s;
        }
    }

    pub fn subset(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let cols = self.features.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(self.features.row(i));
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (Matrix::new(idx.len(), cols, data).expect("consistent shape"), labels)
    }

    /// Shuffled split; the second part holds `round(test_fraction * len)`
    /// samples.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        let (test, train) = idx.split_at(n_test.min(self.len()));
        let make = |ids: &[usize]| {
            let (features, labels) = self.subset(ids);
            Dataset { features, labels, num_classes: self.num_classes }
        };
        (make(train), make(test))
    }

    pub fn shuffled_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        idx
    }
}
