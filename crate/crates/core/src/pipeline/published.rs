//! Reference results reported for the original study, with the table each
//! value comes from. The comparison file is generated from this table.

use crate::dataset::LabelScheme;

use super::Method;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedValue {
    pub task: LabelScheme,
    pub method: Method,
    /// "mean_cv" or "mean_auc", in percent.
    pub metric: &'static str,
    pub value: f64,
    pub citation: &'static str,
}

const fn cv(method: Method, value: f64, citation: &'static str) -> PublishedValue {
    PublishedValue { task: LabelScheme::MultiClass7, method, metric: "mean_cv", value, citation }
}

const fn bin(method: Method, metric: &'static str, value: f64) -> PublishedValue {
    PublishedValue { task: LabelScheme::Binary, method, metric, value, citation: "Table 4" }
}

const fn c2v(dim: usize, nodes: usize, layers: usize) -> Method {
    Method::Care2Vec { dim, nodes, layers }
}

const fn ann(nodes: usize) -> Method {
    Method::Ann { nodes, layers: 1 }
}

pub const PUBLISHED: &[PublishedValue] = &[
    cv(ann(30), 78.57, "Table 1"),
    cv(ann(40), 81.43, "Table 1"),
    cv(ann(50), 80.00, "Table 1"),
    cv(ann(100), 80.00, "Table 1"),
    cv(ann(300), 80.00, "Table 1"),
    cv(c2v(4, 40, 1), 72.86, "Table 2"),
    cv(c2v(4, 100, 1), 72.86, "Table 2"),
    cv(c2v(4, 300, 1), 81.43, "Table 2"),
    cv(c2v(4, 300, 2), 81.43, "Table 2"),
    cv(c2v(8, 40, 1), 82.86, "Table 2"),
    cv(c2v(8, 100, 1), 81.43, "Table 2"),
    cv(c2v(8, 300, 1), 80.00, "Table 2"),
    cv(c2v(8, 300, 2), 80.00, "Table 2"),
    cv(c2v(16, 40, 1), 80.00, "Table 2"),
    cv(c2v(16, 100, 1), 81.43, "Table 2"),
    cv(c2v(16, 300, 1), 82.86, "Table 2"),
    cv(c2v(16, 300, 2), 82.86, "Table 2"),
    cv(c2v(32, 40, 1), 82.86, "Table 2"),
    cv(c2v(32, 100, 1), 82.86, "Table 2"),
    cv(c2v(32, 300, 1), 80.00, "Table 2"),
    cv(c2v(32, 300, 2), 84.29, "Table 2"),
    cv(Method::Tree, 76.99, "Table 3"),
    bin(Method::Tree, "mean_auc", 73.59),
    bin(Method::Tree, "mean_cv", 86.79),
    bin(ann(40), "mean_auc", 94.61),
    bin(ann(40), "mean_cv", 91.43),
    bin(ann(100), "mean_auc", 93.83),
    bin(ann(100), "mean_cv", 91.43),
    bin(ann(300), "mean_auc", 94.13),
    bin(ann(300), "mean_cv", 91.43),
    bin(c2v(4, 300, 1), "mean_auc", 90.85),
    bin(c2v(4, 300, 1), "mean_cv", 81.43),
    bin(c2v(8, 300, 1), "mean_auc", 92.51),
    bin(c2v(8, 300, 1), "mean_cv", 92.86),
    bin(c2v(16, 300, 1), "mean_auc", 93.93),
    bin(c2v(16, 300, 1), "mean_cv", 90.00),
    bin(c2v(32, 300, 1), "mean_auc", 96.35),
    bin(c2v(32, 300, 1), "mean_cv", 88.57),
];

/// Published per-fold AUCs (percent) of the binary task, folds 1 to 10.
pub const PUBLISHED_FOLD_AUC: &[(Method, [f64; 10])] = &[
    (Method::Tree, [65.00, 74.24, 75.00, 38.46, 74.24, 70.83, 70.00, 95.83, 80.00, 92.31]),
    (ann(40), [92.50, 96.97, 97.50, 84.62, 90.91, 95.83, 90.00, 100.00, 97.78, 100.00]),
    (ann(100), [92.50, 96.97, 95.00, 84.62, 87.88, 95.83, 90.00, 100.00, 95.56, 100.00]),
    (ann(300), [92.50, 96.97, 95.00, 84.62, 90.91, 95.83, 90.00, 100.00, 95.56, 100.00]),
    (c2v(4, 300, 1), [92.50, 84.85, 82.50, 69.23, 96.97, 100.00, 82.50, 100.00, 100.00, 100.00]),
    (c2v(8, 300, 1), [87.50, 93.94, 100.00, 92.31, 81.82, 91.67, 100.00, 100.00, 93.33, 84.62]),
    (c2v(16, 300, 1), [92.50, 93.94, 100.00, 92.31, 87.88, 95.83, 100.00, 100.00, 100.00, 76.92]),
    (c2v(32, 300, 1), [95.00, 93.94, 100.00, 92.31, 93.94, 95.83, 92.50, 100.00, 100.00, 100.00]),
];

/// Published value for `(task, method, metric)`, if any.
pub fn lookup(task: LabelScheme, method: Method, metric: &str) -> Option<&'static PublishedValue> {
    PUBLISHED.iter().find(|p| p.task == task && p.method == method && p.metric == metric)
}
