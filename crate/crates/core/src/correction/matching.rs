use std::collections::HashMap;

use crate::correction::assignment::{solve_assignment, LEX_EXACT_MAX};
use crate::error::{CoreError, Result};
use crate::model::{check_dim, Dataset};

/// A permutation `sigma` of `0..n`: source point `i` is paired with
/// destination point `sigma[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    permutation: Vec<usize>,
}

impl Matching {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &j in &permutation {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(CoreError::invalid("matching", "not a permutation"));
            }
        }
        Ok(Self { permutation })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn into_permutation(self) -> Vec<usize> {
        self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Total Euclidean distance travelled.
    pub fn cost(&self, src: &Dataset, dst: &Dataset) -> f64 {
        self.permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| euclidean(src.point(i), dst.point(j)))
            .sum()
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_pair(src: &Dataset, dst: &Dataset) -> Result<()> {
    if src.len() != dst.len() {
        return Err(CoreError::SizeMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.is_empty() {
        return Err(CoreError::EmptyInput);
    }
    check_dim(src.dim(), dst.dim())
}

/// Permutation minimizing the total Euclidean distance `sum_i |src_i -
/// dst_sigma(i)|`. Up to 12 points the lexicographically smallest optimal
/// permutation is returned.
pub fn match_pointwise(src: &Dataset, dst: &Dataset) -> Result<Matching> {
    check_pair(src, dst)?;
    let n = src.len();
    if n <= LEX_EXACT_MAX {
        let perm = solve_assignment(n, |i, j| euclidean(src.point(i), dst.point(j)));
        return Matching::new(perm);
    }

    // With a metric cost some optimal matching pairs every point with an
    // identical partner when one exists, so those pairs are fixed up front.
    let mut by_bits: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (j, p) in dst.iter().enumerate().rev() {
        by_bits.entry(bits(p)).or_default().push(j);
    }
    let mut perm = vec![usize::MAX; n];
    let mut free_rows = Vec::new();
    for (i, p) in src.iter().enumerate() {
        match by_bits.get_mut(&bits(p)).and_then(Vec::pop) {
            Some(j) => perm[i] = j,
            None => free_rows.push(i),
        }
    }
    let mut free_cols: Vec<usize> = by_bits.into_values().flatten().collect();
    free_cols.sort_unstable();

    let sub = solve_assignment(free_rows.len(), |a, b| {
        euclidean(src.point(free_rows[a]), dst.point(free_cols[b]))
    });
    for (a, b) in sub.into_iter().enumerate() {
        perm[free_rows[a]] = free_cols[b];
    }
    Matching::new(perm)
}

fn bits(p: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    p.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// Minimum-cost permutation under squared Euclidean cost.
pub(crate) fn match_squared(a: &Dataset, b: &Dataset) -> Result<Vec<usize>> {
    check_pair(a, b)?;
    Ok(solve_assignment(a.len(), |i, j| {
        squared_euclidean(a.point(i), b.point(j))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        // Heap-free lexicographic enumeration.
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            out.push(cur.clone());
            let Some(i) = (0..n.saturating_sub(1))
                .rev()
                .find(|&i| cur[i] < cur[i + 1])
            else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }

    #[test]
    fn two_point_example() {
        let src = Dataset::from_points(2, [[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let dst = Dataset::from_points(2, [[1.1, 0.0], [0.1, 0.0]]).unwrap();
        let m = match_pointwise(&src, &dst).unwrap();
        assert_eq!(m.permutation(), &[1, 0]);
        assert!((m.cost(&src, &dst) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_match_identity() {
        let src = Dataset::from_points(1, [[0.0], [2.0], [2.0], [-1.0], [5.0]]).unwrap();
        let m = match_pointwise(&src, &src).unwrap();
        assert_eq!(m.permutation(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn brute_force_agreement_with_duplicates() {
        // Duplicate coordinates create ties; the lexicographic rule decides.
        let src = Dataset::from_points(1, [[0.0], [0.0], [1.0], [3.0]]).unwrap();
        let dst = Dataset::from_points(1, [[1.0], [0.0], [0.0], [2.0]]).unwrap();
        let m = match_pointwise(&src, &dst).unwrap();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for p in permutations(4) {
            let c = Matching::new(p.clone()).unwrap().cost(&src, &dst);
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, p));
            }
        }
        assert_eq!(m.permutation(), best.unwrap().1.as_slice());
    }

    #[test]
    fn duplicate_reduction_keeps_optimum() {
        // n above the lexicographic limit takes the reduction path.
        let pts: Vec<[f64; 2]> = (0..30)
            .map(|i| [((i * 7) % 11) as f64 * 0.3, ((i * 5) % 13) as f64 * 0.2])
            .collect();
        let src = Dataset::from_points(2, &pts).unwrap();
        let mut moved = pts.clone();
        for p in moved.iter_mut().step_by(3) {
            p[0] += 0.7;
        }
        moved.reverse();
        let dst = Dataset::from_points(2, &moved).unwrap();
        let reduced = match_pointwise(&src, &dst).unwrap();
        let full = solve_assignment(30, |i, j| euclidean(src.point(i), dst.point(j)));
        let full_cost = Matching::new(full).unwrap().cost(&src, &dst);
        assert!((reduced.cost(&src, &dst) - full_cost).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let a = Dataset::from_points(1, [[0.0], [1.0]]).unwrap();
        let b = Dataset::from_points(1, [[0.0]]).unwrap();
        let c = Dataset::from_points(2, [[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            match_pointwise(&a, &b),
            Err(CoreError::SizeMismatch { .. })
        ));
        assert!(matches!(
            match_pointwise(&a, &c),
            Err(CoreError::DimensionMismatch { .. })
        ));
        assert!(Matching::new(vec![0, 0]).is_err());
        assert!(Matching::new(vec![1, 2]).is_err());
    }

    #[test]
    fn lexicographic_enumeration_helper() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }
}
