use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{parse_libsvm_str, Dataset};
use super::fetch::Registry;

// Offline stand-ins for the two benchmark datasets. When the real files are
// unavailable (no network, empty cache) these generators produce
// deterministic LIBSVM text with the published shape of each dataset: same
// row and column counts, same sparsity, same raw label alphabet. Labels come
// from a planted weight vector so the problems are actually learnable.

const W1A_ROWS: usize = 2477;
const W1A_COLS: usize = 300;
const W1A_NNZ: usize = 28_386; // 3.82% density, matching the published 96.18% sparsity
const BC_ROWS: usize = 683;
const BC_COLS: usize = 10;

/// LIBSVM text for the named stand-in, or `None` for unknown names.
pub fn stand_in_libsvm(name: &str) -> Option<String> {
    match name {
        "w1a" => Some(w1a_text()),
        "breast-cancer" => Some(breast_cancer_text()),
        _ => None,
    }
}

/// Parsed stand-in dataset, using the registry's parse options for the name.
pub fn stand_in_dataset(name: &str) -> Option<Dataset> {
    let text = stand_in_libsvm(name)?;
    let opts = Registry::builtin().parse_options(name).expect("registry entry for stand-in");
    Some(parse_libsvm_str(&text, &opts).expect("stand-in text is well-formed"))
}

fn w1a_text() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7731_6100);
    let weight_dist = Uniform::new_inclusive(-1.0f64, 1.0);
    let planted: Vec<f64> = (0..W1A_COLS).map(|_| weight_dist.sample(&mut rng)).collect();

    let mut out = String::new();
    let mut assigned = 0usize;
    for i in 0..W1A_ROWS {
        // spread the nonzero budget evenly so every prefix stays near 3.82% density
        let target = (i + 1) * W1A_NNZ / W1A_ROWS;
        let count = target - assigned;
        assigned = target;
        let mut cols = rand::seq::index::sample(&mut rng, W1A_COLS, count).into_vec();
        cols.sort_unstable();
        // binary features, as in the real file
        let margin: f64 = cols.iter().map(|&c| planted[c]).sum();
        let label = if margin > 0.0 { "+1" } else { "-1" };
        out.push_str(label);
        for c in &cols {
            out.push_str(&format!(" {}:1", c + 1));
        }
        out.push('\n');
    }
    out
}

fn breast_cancer_text() -> String {
    const BC_MALIGNANT: usize = 239; // class sizes of the real file: 444 benign, 239 malignant

    let mut rng = ChaCha8Rng::seed_from_u64(0xbc_0683);
    let weight_dist = Uniform::new_inclusive(-1.0f64, 1.0);
    let planted: Vec<f64> = (0..BC_COLS - 1).map(|_| weight_dist.sample(&mut rng)).collect();
    let feature_dist = Uniform::new_inclusive(0.1f64, 1.0);
    // The last feature is nearly constant, like the real file's mitoses
    // column. Since every other feature is strictly positive, a classifier
    // through the origin needs such a column to absorb the labeling
    // threshold; without one no linear rule fits the data well.
    let carrier_dist = Uniform::new_inclusive(0.95f64, 1.05);

    let rows: Vec<Vec<f64>> = (0..BC_ROWS)
        .map(|_| {
            let mut row: Vec<f64> =
                (0..BC_COLS - 1).map(|_| feature_dist.sample(&mut rng)).collect();
            row.push(carrier_dist.sample(&mut rng));
            row
        })
        .collect();
    // The features are all positive, so a zero threshold would let the sign
    // of the planted weight sum sweep almost every row into one class. Cut
    // at the margin quantile that reproduces the real class sizes instead;
    // the near-constant carrier column stays out of the margin so the rule
    // remains learnable through the origin.
    let margins: Vec<f64> = rows
        .iter()
        .map(|row| row[..BC_COLS - 1].iter().zip(&planted).map(|(a, w)| a * w).sum())
        .collect();
    let mut sorted = margins.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = sorted[BC_ROWS - BC_MALIGNANT - 1];

    let mut out = String::new();
    for (row, margin) in rows.iter().zip(&margins) {
        // raw labels as in the real file: benign 2, malignant 4
        out.push_str(if *margin > threshold { "4" } else { "2" });
        for (j, v) in row.iter().enumerate() {
            out.push_str(&format!(" {}:{:.2}", j + 1, v));
        }
        out.push('\n');
    }
    out
}
