//! SCADI-shaped synthetic data for benches, examples and shape tests.
//!
//! 29 activities with 7 one-hot codes each (203 columns) after gender and
//! age. Every class has a prototype code per activity; a row copies the
//! prototype with probability `fidelity` and otherwise draws a random code.
//! None of its numbers are comparable to results on the real file.

use std::fmt::Write as _;

use crate::dataset::{Dataset, LabelScheme, SCADI_CLASS_COUNTS};
use crate::numerics::{derive_seed, Matrix, Rng};

pub const N_ACTIVITIES: usize = 29;
pub const CODES: [u32; 7] = [0, 1, 2, 3, 4, 8, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    /// Rows are split across classes in proportion to the SCADI class counts.
    pub n_rows: usize,
    pub fidelity: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self { n_rows: 70, fidelity: 0.8 }
    }
}

pub fn feature_names() -> Vec<String> {
    let mut names = vec!["Gender".to_string(), "Age".to_string()];
    for a in 0..N_ACTIVITIES {
        for c in CODES {
            names.push(format!("d{}-{c}", 5100 + 10 * a));
        }
    }
    names
}

/// Class of each row: SCADI counts for 70 rows, otherwise largest-remainder
/// apportionment with at least one row per class when `n_rows >= 7`.
fn class_sizes(n_rows: usize) -> Vec<usize> {
    let total: usize = SCADI_CLASS_COUNTS.iter().sum();
    let mut sizes: Vec<usize> = SCADI_CLASS_COUNTS.iter().map(|&c| c * n_rows / total).collect();
    if n_rows >= SCADI_CLASS_COUNTS.len() {
        for s in sizes.iter_mut() {
            *s = (*s).max(1);
        }
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((SCADI_CLASS_COUNTS[i] * n_rows) % total));
    let mut i = 0;
    while sizes.iter().sum::<usize>() < n_rows {
        sizes[order[i % order.len()]] += 1;
        i += 1;
    }
    while sizes.iter().sum::<usize>() > n_rows {
        let big = (0..sizes.len()).max_by_key(|&j| sizes[j]).expect("classes");
        sizes[big] -= 1;
    }
    sizes
}

pub fn scadi_like(opts: &SyntheticOptions, seed: u64) -> Dataset {
    let mut proto_rng = Rng::new(derive_seed(seed, 0));
    let prototypes: Vec<Vec<usize>> =
        (0..7).map(|_| (0..N_ACTIVITIES).map(|_| proto_rng.below(CODES.len() as u64) as usize).collect()).collect();

    let mut labels = Vec::with_capacity(opts.n_rows);
    for (class, &n) in class_sizes(opts.n_rows).iter().enumerate() {
        labels.extend(std::iter::repeat_n(class, n));
    }
    let mut rng = Rng::new(derive_seed(seed, 1));
    rng.shuffle(&mut labels);

    let width = 2 + N_ACTIVITIES * CODES.len();
    let mut data = Vec::with_capacity(opts.n_rows * width);
    for &class in &labels {
        data.push(f64::from(rng.next_f64() < 0.5));
        data.push((6 + rng.below(13)) as f64);
        for &proto in &prototypes[class] {
            let code = if rng.next_f64() < opts.fidelity { proto } else { rng.below(CODES.len() as u64) as usize };
            data.extend((0..CODES.len()).map(|c| f64::from(c == code)));
        }
    }
    let features = Matrix::from_vec(opts.n_rows, width, data).expect("width by construction");
    Dataset::new(features, labels, LabelScheme::MultiClass7, feature_names()).expect("valid by construction")
}

/// CSV text in the SCADI layout (`Gender,Age,<activities>,Classes`).
pub fn to_csv(d: &Dataset) -> String {
    let mut out = d.feature_names().join(",");
    out.push_str(",Classes\n");
    for r in 0..d.n_rows() {
        for v in d.features().row(r) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "Class{}", d.labels()[r] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_matches_scadi_counts() {
        let d = scadi_like(&SyntheticOptions::default(), 1);
        assert_eq!(d.n_rows(), 70);
        assert_eq!(d.n_features(), 205);
        assert_eq!(d.class_counts(), SCADI_CLASS_COUNTS.to_vec());
    }

    #[test]
    fn smaller_sizes_keep_every_class() {
        for n in [7, 20, 35, 140] {
            let sizes = class_sizes(n);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert!(sizes.iter().all(|&s| s >= 1));
        }
    }

    #[test]
    fn one_code_per_activity() {
        let d = scadi_like(&SyntheticOptions::default(), 2);
        for r in 0..d.n_rows() {
            let row = d.features().row(r);
            for a in 0..N_ACTIVITIES {
                let block = &row[2 + 7 * a..2 + 7 * (a + 1)];
                assert_eq!(block.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn csv_round_trips_through_loader() {
        let d = scadi_like(&SyntheticOptions::default(), 3);
        let back = crate::dataset::load_scadi_from_reader(to_csv(&d).as_bytes(), &crate::dataset::ScadiSchema::full()).unwrap();
        assert_eq!(back.features(), d.features());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn deterministic() {
        let a = scadi_like(&SyntheticOptions::default(), 9);
        assert_eq!(a, scadi_like(&SyntheticOptions::default(), 9));
        assert_ne!(a, scadi_like(&SyntheticOptions::default(), 10));
    }
}
