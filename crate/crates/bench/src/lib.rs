//! Shared inputs for the benchmarks under `benches/`.

use tailforge_core::{DistributionSpec, Sample};

/// A fixed-seed Burr(1, 2) sample.
pub fn burr_sample(n: usize) -> Sample {
    DistributionSpec::burr(1.0, 2.0).expect("valid").sample(n, 42).expect("sample")
}

/// One value per row with a header line, as uploaded by users.
pub fn csv_rows(n: usize) -> Vec<u8> {
    let s = burr_sample(n);
    let mut out = String::with_capacity(n * 20 + 6);
    out.push_str("claim\n");
    for v in s.values() {
        out.push_str(&format!("{v:?}\n"));
    }
    out.into_bytes()
}
