//! Dice and Jaccard agreement between masks, batch means and count-weighted
//! scenario aggregation, with a CSV rendering of the result table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverlapCounts {
    pub area_a: u64,
    pub area_b: u64,
    pub intersection: u64,
    pub union: u64,
}

impl OverlapCounts {
    pub fn from_masks(a: &Mask, b: &Mask) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch { a: a.shape(), b: b.shape() });
        }
        let mut c = Self::default();
        for (&x, &y) in a.bits.iter().zip(&b.bits) {
            c.area_a += x as u64;
            c.area_b += y as u64;
            c.intersection += (x && y) as u64;
        }
        c.union = c.area_a + c.area_b - c.intersection;
        Ok(c)
    }

    /// `2|A∩B| / (|A| + |B|)`, 1.0 when both are empty.
    pub fn dice(&self) -> f64 {
        let denom = self.area_a + self.area_b;
        if denom == 0 {
            return 1.0;
        }
        2.0 * self.intersection as f64 / denom as f64
    }

    /// `|A∩B| / |A∪B|`, 1.0 when both are empty.
    pub fn jaccard(&self) -> f64 {
        if self.union == 0 {
            return 1.0;
        }
        self.intersection as f64 / self.union as f64
    }
}

pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(OverlapCounts::from_masks(a, b)?.dice())
}

pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(OverlapCounts::from_masks(a, b)?.jaccard())
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBatch {
    pub name: String,
    pub count: usize,
    pub dice: f64,
    pub jaccard: f64,
    pub avg: f64,
}

impl ScenarioBatch {
    pub fn new(name: impl Into<String>, count: usize, dice: f64, jaccard: f64) -> Self {
        Self { name: name.into(), count, dice, jaccard, avg: (dice + jaccard) / 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    /// Mean (dice, jaccard) of each consecutive batch.
    pub batches: Vec<(f64, f64)>,
    pub dice: f64,
    pub jaccard: f64,
    pub avg: f64,
}

/// Splits per-pair scores into consecutive batches of `batch_size` (the last
/// may be shorter) and averages the batch means.
pub fn batch_means(scores: &[(f64, f64)], batch_size: usize) -> Result<BatchReport> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let batches: Vec<(f64, f64)> = scores
        .chunks(batch_size)
        .map(|c| {
            let n = c.len() as f64;
            (c.iter().map(|s| s.0).sum::<f64>() / n, c.iter().map(|s| s.1).sum::<f64>() / n)
        })
        .collect();
    let n = batches.len() as f64;
    let dice = batches.iter().map(|b| b.0).sum::<f64>() / n;
    let jaccard = batches.iter().map(|b| b.1).sum::<f64>() / n;
    Ok(BatchReport { batches, dice, jaccard, avg: (dice + jaccard) / 2.0 })
}

pub fn batch_report(pairs: &[(Mask, Mask)], batch_size: usize) -> Result<BatchReport> {
    let scores = pairs
        .par_iter()
        .map(|(a, b)| OverlapCounts::from_masks(a, b).map(|c| (c.dice(), c.jaccard())))
        .collect::<Result<Vec<_>>>()?;
    batch_means(&scores, batch_size)
}

/// Count-weighted mean of the rows; `avg` is recomputed from the result.
pub fn weighted_aggregate(batches: &[ScenarioBatch]) -> Result<ScenarioBatch> {
    let total: usize = batches.iter().map(|b| b.count).sum();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let w = |f: fn(&ScenarioBatch) -> f64| {
        batches.iter().map(|b| b.count as f64 * f(b)).sum::<f64>() / total as f64
    };
    Ok(ScenarioBatch::new("all_weighted", total, w(|b| b.dice), w(|b| b.jaccard)))
}

/// `scenario,count,dice,jaccard,avg` with three decimals, weighted row last.
pub fn format_csv(rows: &[ScenarioBatch], weighted: &ScenarioBatch) -> String {
    let mut out = String::from("scenario,count,dice,jaccard,avg\n");
    for r in rows.iter().chain(std::iter::once(weighted)) {
        out.push_str(&format!("{},{},{:.3},{:.3},{:.3}\n", r.name, r.count, r.dice, r.jaccard, r.avg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(n: usize, set: impl Fn(usize) -> bool) -> Mask {
        Mask { width: n, height: 1, bits: (0..n).map(set).collect() }
    }

    #[test]
    fn hand_counted_pair() {
        // a = [0,80), b = [20,120): |a|=80, |b|=100, |a∩b|=60.
        let a = mask_from(200, |i| i < 80);
        let b = mask_from(200, |i| (20..120).contains(&i));
        let c = OverlapCounts::from_masks(&a, &b).unwrap();
        assert_eq!((c.area_a, c.area_b, c.intersection, c.union), (80, 100, 60, 120));
        assert!((dice(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn subset_and_extremes() {
        let a = mask_from(100, |i| i < 50);
        let b = mask_from(100, |_| true);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&b, &b).unwrap(), 1.0);
        let c = mask_from(100, |i| i >= 50);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        let e = Mask::new(4, 4);
        assert_eq!((dice(&e, &e).unwrap(), jaccard(&e, &e).unwrap()), (1.0, 1.0));
        assert!(matches!(dice(&e, &Mask::new(4, 5)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn batches() {
        let scores: Vec<(f64, f64)> = (0..500).map(|i| ((i % 7) as f64 / 7.0, (i % 11) as f64 / 11.0)).collect();
        let r = batch_means(&scores, 25).unwrap();
        assert_eq!(r.batches.len(), 20);
        let flat_d = scores.iter().map(|s| s.0).sum::<f64>() / 500.0;
        let flat_j = scores.iter().map(|s| s.1).sum::<f64>() / 500.0;
        assert!((r.dice - flat_d).abs() < 1e-12 && (r.jaccard - flat_j).abs() < 1e-12);
        let one = batch_means(&[(0.8, 0.6)], 5).unwrap();
        assert!((one.avg - 0.7).abs() < 1e-15);
        assert!(matches!(batch_means(&[], 5), Err(Error::EmptyEvaluation)));
        assert!(batch_means(&scores, 0).is_err());
        let m = mask_from(10, |i| i % 3 == 0);
        let r = batch_report(&vec![(m.clone(), m); 6], 4).unwrap();
        assert_eq!(r.batches, vec![(1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn aggregate_trivia_and_csv() {
        let a = ScenarioBatch::new("x", 3, 0.9, 0.8);
        assert_eq!(weighted_aggregate(&[a.clone()]).unwrap().dice, 0.9);
        let b = ScenarioBatch::new("y", 5, 0.9, 0.8);
        let w = weighted_aggregate(&[a.clone(), b]).unwrap();
        assert!((w.dice - 0.9).abs() < 1e-15 && w.count == 8);
        let csv = format_csv(&[a], &w);
        assert_eq!(csv, "scenario,count,dice,jaccard,avg\nx,3,0.900,0.800,0.850\nall_weighted,8,0.900,0.800,0.850\n");
    }

    proptest! {
        #[test]
        fn metric_relations(n in 1usize..300, sa in any::<u64>(), sb in any::<u64>()) {
            let a = mask_from(n, |i| (sa.rotate_left(i as u32 * 7) & 3) == 0);
            let b = mask_from(n, |i| (sb.rotate_left(i as u32 * 5) & 1) == 0);
            let (d, j) = (dice(&a, &b).unwrap(), jaccard(&a, &b).unwrap());
            prop_assert!((d - 2.0 * j / (1.0 + j)).abs() < 1e-12);
            prop_assert!(0.0 <= j && j <= d && d <= 1.0);
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(j, jaccard(&b, &a).unwrap());
        }
    }
}
