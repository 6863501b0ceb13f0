//! Histogram estimates of entropy, conditional entropy and mutual information,
//! all in bits, plus mutual-information ranking of frame positions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::beat::FrameSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: Vec<u64>,
    edges: Vec<f64>,
    n: u64,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>, edges: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::param("bins", "a histogram needs at least one bin"));
        }
        if edges.len() != counts.len() + 1 {
            return Err(Error::LengthMismatch {
                expected: counts.len() + 1,
                got: edges.len(),
            });
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("edges", "bin edges must be strictly increasing"));
        }
        let n = counts.iter().sum();
        Ok(Histogram { counts, edges, n })
    }

    /// Equal-width binning over the observed range. A zero-width range
    /// collapses to a single bin.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        let binning = Binning::fit(values, bins)?;
        let mut counts = vec![0u64; binning.bins];
        for &v in values {
            counts[binning.index(v)] += 1;
        }
        Ok(Histogram {
            counts,
            edges: binning.edges(),
            n: values.len() as u64,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn total(&self) -> u64 {
        self.n
    }
}

/// Joint counts, `counts[x][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    counts: Vec<Vec<u64>>,
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    n: u64,
}

impl JointHistogram {
    /// Builds a joint table from raw counts; edges default to unit bins.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let bx = counts.len();
        let by = counts.first().map_or(0, Vec::len);
        if bx == 0 || by == 0 {
            return Err(Error::param("bins", "a joint histogram needs at least one cell"));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != by) {
            return Err(Error::LengthMismatch {
                expected: by,
                got: row.len(),
            });
        }
        let n = counts.iter().flatten().sum();
        Ok(JointHistogram {
            counts,
            x_edges: (0..=bx).map(|i| i as f64).collect(),
            y_edges: (0..=by).map(|i| i as f64).collect(),
            n,
        })
    }

    pub fn from_pairs(xs: &[f64], ys: &[f64], bins_x: usize, bins_y: usize) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let bx = Binning::fit(xs, bins_x)?;
        let by = Binning::fit(ys, bins_y)?;
        let mut counts = vec![vec![0u64; by.bins]; bx.bins];
        for (&x, &y) in xs.iter().zip(ys) {
            counts[bx.index(x)][by.index(y)] += 1;
        }
        Ok(JointHistogram {
            counts,
            x_edges: bx.edges(),
            y_edges: by.edges(),
            n: xs.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.y_edges
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn marginal_x(&self) -> Histogram {
        Histogram {
            counts: self.counts.iter().map(|r| r.iter().sum()).collect(),
            edges: self.x_edges.clone(),
            n: self.n,
        }
    }

    pub fn marginal_y(&self) -> Histogram {
        let by = self.counts[0].len();
        Histogram {
            counts: (0..by).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect(),
            edges: self.y_edges.clone(),
            n: self.n,
        }
    }
}

struct Binning {
    lo: f64,
    width: f64,
    bins: usize,
}

impl Binning {
    fn fit(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NotEnoughData("no values to bin".into()));
        }
        if bins == 0 {
            return Err(Error::param("bins", "must be >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "histogram input must be finite"));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            Ok(Binning {
                lo,
                width: (hi - lo) / bins as f64,
                bins,
            })
        } else {
            Ok(Binning {
                lo,
                width: 1.0,
                bins: 1,
            })
        }
    }

    fn index(&self, v: f64) -> usize {
        let k = ((v - self.lo) / self.width).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = (0..=self.bins)
            .map(|i| self.lo + i as f64 * self.width)
            .collect();
        // Guard against rounding collapsing adjacent edges on tiny ranges.
        for i in 1..e.len() {
            if e[i] <= e[i - 1] {
                e[i] = e[i - 1].next_up();
            }
        }
        e
    }
}

fn entropy_of_counts(counts: impl Iterator<Item = u64>, n: u64) -> f64 {
    let n = n as f64;
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(hist: &Histogram) -> Result<f64> {
    if hist.n == 0 {
        return Err(Error::NotEnoughData("entropy of an empty histogram".into()));
    }
    Ok(entropy_of_counts(hist.counts.iter().copied(), hist.n))
}

/// `H(X | Y) = Σ_y p(y) H(X | Y = y)` in bits.
pub fn conditional_entropy(joint: &JointHistogram) -> Result<f64> {
    if joint.n == 0 {
        return Err(Error::NotEnoughData(
            "conditional entropy of an empty joint histogram".into(),
        ));
    }
    let by = joint.counts[0].len();
    let n = joint.n as f64;
    let mut h = 0.0;
    for j in 0..by {
        let col_total: u64 = joint.counts.iter().map(|r| r[j]).sum();
        if col_total == 0 {
            continue;
        }
        let inner = entropy_of_counts(joint.counts.iter().map(|r| r[j]), col_total);
        h += col_total as f64 / n * inner;
    }
    Ok(h.max(0.0))
}

/// `I(X; Y) = H(X) - H(X | Y)` from a joint histogram, clamped at zero.
pub fn mutual_information_joint(joint: &JointHistogram) -> Result<f64> {
    let hx = entropy(&joint.marginal_x())?;
    let hxy = conditional_entropy(joint)?;
    Ok((hx - hxy).max(0.0))
}

/// Mutual information in bits between two paired samples, each binned
/// equal-width over its own observed range.
pub fn mutual_information(xs: &[f64], ys: &[f64], bins_x: usize, bins_y: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "mutual information needs at least 2 pairs, got {}",
            xs.len()
        )));
    }
    mutual_information_joint(&JointHistogram::from_pairs(xs, ys, bins_x, bins_y)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub position: usize,
    pub mi_bits: f64,
}

/// Frame positions sorted by mutual information (descending), ties by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MiRanking {
    entries: Vec<RankEntry>,
}

impl MiRanking {
    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn positions(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.position).collect()
    }

    /// `position,mi_bits` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,mi_bits\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{}", e.position, e.mi_bits);
        }
        out
    }
}

pub const DEFAULT_RANK_BINS: usize = 16;
pub const DEFAULT_RANK_K: usize = 32;

/// Scores every frame position by the mutual information between its
/// amplitude and the entity label, and keeps the top `k`.
pub fn rank_features(sets: &[FrameSet], bins: usize, k: usize) -> Result<MiRanking> {
    let Some(first) = sets.first() else {
        return Err(Error::NotEnoughData("no frame sets to rank".into()));
    };
    let len = first.frame_len();
    if let Some(s) = sets.iter().find(|s| s.frame_len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            got: s.frame_len(),
        });
    }
    if k == 0 || k > len {
        return Err(Error::param("k", format!("must lie in [1, {len}], got {k}")));
    }

    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    for s in sets.iter().filter(|s| !s.is_empty()) {
        let next = labels.len();
        labels.entry(s.entity_id()).or_insert(next);
    }
    if labels.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "ranking needs frames from at least 2 entities, got {}",
            labels.len()
        )));
    }

    let tagged: Vec<(usize, &[f64])> = sets
        .iter()
        .flat_map(|s| {
            let label = labels.get(s.entity_id()).copied();
            s.frames().iter().filter_map(move |f| label.map(|l| (l, f.values())))
        })
        .collect();

    let mut column = Vec::with_capacity(tagged.len());
    let mut entries = Vec::with_capacity(len);
    for position in 0..len {
        column.clear();
        column.extend(tagged.iter().map(|(_, v)| v[position]));
        let binning = Binning::fit(&column, bins)?;
        let mut counts = vec![vec![0u64; labels.len()]; binning.bins];
        for ((label, _), &v) in tagged.iter().zip(&column) {
            counts[binning.index(v)][*label] += 1;
        }
        let mut joint = JointHistogram::from_counts(counts)?;
        joint.x_edges = binning.edges();
        entries.push(RankEntry {
            position,
            mi_bits: mutual_information_joint(&joint)?,
        });
    }

    entries.sort_by(|a, b| {
        b.mi_bits
            .total_cmp(&a.mi_bits)
            .then(a.position.cmp(&b.position))
    });
    entries.truncate(k);
    Ok(MiRanking { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beat::RrFrame;
    use proptest::prelude::*;

    fn hist(counts: &[u64]) -> Histogram {
        let edges = (0..=counts.len()).map(|i| i as f64).collect();
        Histogram::from_counts(counts.to_vec(), edges).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&hist(&[5, 5])).unwrap(), 1.0);
        assert_eq!(entropy(&hist(&[7])).unwrap(), 0.0);
        assert!((entropy(&hist(&[2, 1, 1])).unwrap() - 1.5).abs() < 1e-15);
        assert!(entropy(&hist(&[0, 0])).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let diag = JointHistogram::from_counts(vec![vec![4, 0, 0], vec![0, 3, 0], vec![0, 0, 5]])
            .unwrap();
        assert_eq!(conditional_entropy(&diag).unwrap(), 0.0);
        let uniform = JointHistogram::from_counts(vec![vec![5, 5], vec![5, 5]]).unwrap();
        assert!((conditional_entropy(&uniform).unwrap() - 1.0).abs() < 1e-15);
        let single = JointHistogram::from_counts(vec![vec![0, 0], vec![0, 9]]).unwrap();
        assert_eq!(conditional_entropy(&single).unwrap(), 0.0);
        let empty = JointHistogram::from_counts(vec![vec![0, 0]]).unwrap();
        assert!(conditional_entropy(&empty).is_err());
    }

    #[test]
    fn self_information_is_entropy() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 23) as f64 * 0.1).collect();
        let mi = mutual_information(&xs, &xs, 8, 8).unwrap();
        let h = entropy(&Histogram::from_values(&xs, 8).unwrap()).unwrap();
        assert!((mi - h).abs() < 1e-9);
    }

    #[test]
    fn mi_input_errors() {
        assert!(mutual_information(&[1.0, 2.0], &[1.0], 4, 4).is_err());
        assert!(mutual_information(&[], &[], 4, 4).is_err());
    }

    #[test]
    fn degenerate_range_is_one_bin() {
        let h = Histogram::from_values(&[3.0; 10], 16).unwrap();
        assert_eq!(h.counts(), &[10]);
        assert_eq!(entropy(&h).unwrap(), 0.0);
    }

    fn frames(id: &str, bump_at: Option<usize>, count: usize) -> FrameSet {
        let frames = (0..count)
            .map(|i| {
                let mut v: Vec<f64> = (0..40).map(|j| (j as f64 * 0.3).sin() + 0.01 * i as f64).collect();
                if let Some(p) = bump_at {
                    v[p] += 0.5;
                }
                RrFrame::from_values(v, (0, 1)).unwrap()
            })
            .collect();
        FrameSet::new(id, 40, frames).unwrap()
    }

    #[test]
    fn bump_position_ranks_first() {
        let sets = [frames("a", None, 6), frames("b", Some(10), 6)];
        let r = rank_features(&sets, 16, 5).unwrap();
        assert_eq!(r.entries()[0].position, 10);
        assert!(r.entries()[0].mi_bits > 0.9);
    }

    #[test]
    fn identical_classes_have_zero_mi_and_positional_order() {
        let a = frames("a", None, 1);
        let b = FrameSet::new("b", 40, a.frames().to_vec()).unwrap();
        let r = rank_features(&[a, b], 16, 40).unwrap();
        assert!(r.entries().iter().all(|e| e.mi_bits.abs() < 1e-9));
        assert_eq!(r.positions(), (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn rank_errors() {
        let sets = [frames("a", None, 3), frames("b", None, 3)];
        assert!(rank_features(&sets, 16, 41).is_err());
        assert!(rank_features(&sets[..1], 16, 4).is_err());
        let r = rank_features(&sets, 16, 3).unwrap();
        assert!(r.to_csv().starts_with("position,mi_bits\n"));
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    proptest! {
        #[test]
        fn mi_bounds_and_symmetry(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..300),
            bins in 1usize..12,
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let mi = mutual_information(&xs, &ys, bins, bins).unwrap();
            let hx = entropy(&Histogram::from_values(&xs, bins).unwrap()).unwrap();
            let hy = entropy(&Histogram::from_values(&ys, bins).unwrap()).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= hx.min(hy) + 1e-9);
            prop_assert!(hx <= (bins as f64).log2() + 1e-12);
            let back = mutual_information(&ys, &xs, bins, bins).unwrap();
            prop_assert!((mi - back).abs() <= 1e-9);

            let mut shuffled = pairs.clone();
            shuffled.reverse();
            shuffled.rotate_left(pairs.len() / 3);
            let sx: Vec<f64> = shuffled.iter().map(|p| p.0).collect();
            let sy: Vec<f64> = shuffled.iter().map(|p| p.1).collect();
            prop_assert_eq!(mutual_information(&sx, &sy, bins, bins).unwrap(), mi);
        }
    }
}
