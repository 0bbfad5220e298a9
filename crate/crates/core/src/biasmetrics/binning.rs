//! Equal-width similarity bins and compensated summation.

/// Lower edges of `n` equal-width bins over [0, 1], plus the closing 1.0.
pub fn bin_edges(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Bin of `s` among `n` half-open bins `[i/n, (i+1)/n)`, the last one closed.
/// Values below 0 or NaN land in bin 0, values above 1 in the last bin.
///
/// `floor(s * n)` alone can disagree with the edges by one ulp near a
/// boundary, so the estimate is corrected against the edges themselves.
pub fn bin_index(s: f64, n: usize) -> usize {
    assert!(n > 0, "bin count must be positive");
    if s.is_nan() || s <= 0.0 {
        return 0;
    }
    if s >= 1.0 {
        return n - 1;
    }
    let edge = |i: usize| i as f64 / n as f64;
    let mut bin = ((s * n as f64).floor() as usize).min(n - 1);
    if bin > 0 && s < edge(bin) {
        bin -= 1;
    } else if bin + 1 < n && s >= edge(bin + 1) {
        bin += 1;
    }
    bin
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Per-bin counts and means of `(similarity, value)` pairs over `n` bins,
/// summed in input order. Empty bins have mean `None`.
pub fn bin_means(pairs: &[(f64, f64)], n: usize) -> (Vec<usize>, Vec<Option<f64>>) {
    let mut sums = vec![CompensatedSum::default(); n];
    let mut counts = vec![0usize; n];
    for &(s, v) in pairs {
        let b = bin_index(s, n);
        sums[b].add(v);
        counts[b] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.total() / c as f64))
        .collect();
    (counts, means)
}
