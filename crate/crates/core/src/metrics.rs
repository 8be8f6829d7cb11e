//! Pareto dominance, non-dominated filtering and hypervolume. All
//! objectives are maximised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::RewardVector;
use crate::error::{invalid, Result};

/// Mutually non-dominated reward vectors.
pub type Front = Vec<RewardVector>;

fn same_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// `a` is at least as good everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    same_dims(a, b)?;
    Ok(dominates_unchecked(a, b))
}

/// Maximal non-dominated subset, duplicates collapsed, first-seen order.
pub fn nondominated_filter(points: &[RewardVector]) -> Result<Front> {
    if let Some(first) = points.first() {
        for p in points {
            same_dims(first, p)?;
        }
    }
    let mut front: Front = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|q| dominates_unchecked(q, p));
        let duplicate = points[..i].iter().any(|q| q == p);
        if !dominated && !duplicate {
            front.push(p.clone());
        }
    }
    Ok(front)
}

fn contributing<'a>(front: &'a [RewardVector], reference: &[f64]) -> Result<Vec<&'a [f64]>> {
    for p in front {
        same_dims(p, reference)?;
    }
    Ok(front
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x > r))
        .map(|p| p.as_slice())
        .collect())
}

/// Exact hypervolume dominated by `front` and bounded below by
/// `reference`. Points that do not strictly dominate the reference add
/// nothing.
pub fn hypervolume(front: &[RewardVector], reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(invalid("reference point must have at least one objective"));
    }
    if reference.len() == 2 {
        hypervolume_2d(front, reference)
    } else {
        hypervolume_nd(front, reference)
    }
}

/// Sweep in descending order of the first objective.
pub fn hypervolume_2d(front: &[RewardVector], reference: &[f64]) -> Result<f64> {
    if reference.len() != 2 {
        return Err(invalid("2-D sweep needs a 2-D reference point"));
    }
    let mut pts = contributing(front, reference)?;
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut volume = 0.0;
    let mut covered = reference[1];
    for p in pts {
        if p[1] > covered {
            volume += (p[0] - reference[0]) * (p[1] - covered);
            covered = p[1];
        }
    }
    Ok(volume)
}

/// Recursive slicing along the last objective.
pub fn hypervolume_nd(front: &[RewardVector], reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(invalid("reference point must have at least one objective"));
    }
    let pts = contributing(front, reference)?;
    Ok(slice_volume(pts, reference))
}

fn slice_volume(mut pts: Vec<&[f64]>, reference: &[f64]) -> f64 {
    let d = reference.len();
    if pts.is_empty() {
        return 0.0;
    }
    if d == 1 {
        return pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) - reference[0];
    }
    let last = d - 1;
    pts.sort_by(|a, b| b[last].total_cmp(&a[last]));
    let mut volume = 0.0;
    for i in 0..pts.len() {
        let top = pts[i][last];
        let bottom = pts.get(i + 1).map_or(reference[last], |p| p[last]);
        if top > bottom {
            let section: Vec<&[f64]> = pts[..=i].iter().map(|p| &p[..last]).collect();
            volume += (top - bottom) * slice_volume(section, &reference[..last]);
        }
    }
    volume
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Monte-Carlo hypervolume: uniform samples in the box spanned by
/// `reference` and `bound`, counted when weakly dominated by a member.
pub fn mc_hypervolume(
    front: &[RewardVector],
    reference: &[f64],
    bound: &[f64],
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    same_dims(reference, bound)?;
    for p in front {
        same_dims(p, reference)?;
        if p.iter().zip(bound).any(|(x, b)| x > b) {
            return Err(invalid("bound point must dominate every front member"));
        }
    }
    if front.is_empty() || samples == 0 {
        return Ok(McEstimate { value: 0.0, stderr: 0.0 });
    }
    let box_volume: f64 = bound.iter().zip(reference).map(|(b, r)| (b - r).max(0.0)).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; reference.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for ((xi, r), b) in x.iter_mut().zip(reference).zip(bound) {
            *xi = r + (b - r) * rng.gen::<f64>();
        }
        if front.iter().any(|p| p.iter().zip(&x).all(|(pi, xi)| pi >= xi)) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    Ok(McEstimate {
        value: box_volume * f,
        stderr: box_volume * (f * (1.0 - f) / samples as f64).sqrt(),
    })
}

/// Hypervolume of each merged point set, in step order.
pub fn hv_history(merged: &[(usize, Vec<RewardVector>)], reference: &[f64]) -> Result<Vec<(usize, f64)>> {
    let mut out: Vec<(usize, f64)> = merged
        .iter()
        .map(|(step, pts)| Ok((*step, hypervolume(&nondominated_filter(pts)?, reference)?)))
        .collect::<Result<_>>()?;
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dst3() -> Front {
        vec![vec![1.0, -3.0], vec![26.25, -5.0], vec![100.0, -7.0]]
    }

    #[test]
    fn dominance_examples() {
        assert!(!dominates(&[100.0, -7.0], &[1.0, -3.0]).unwrap());
        assert!(!dominates(&[1.0, -3.0], &[100.0, -7.0]).unwrap());
        assert!(!dominates(&[1.0, -3.0], &[1.0, -3.0]).unwrap());
        assert!(dominates(&[2.0, -3.0], &[1.0, -3.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn filter_examples() {
        let mut pts = dst3();
        pts.push(vec![0.0, -10.0]);
        assert_eq!(nondominated_filter(&pts).unwrap(), dst3());
        assert_eq!(nondominated_filter(&dst3()).unwrap(), dst3());
        assert!(nondominated_filter(&[]).unwrap().is_empty());
        let dup = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(nondominated_filter(&dup).unwrap(), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn hypervolume_examples() {
        let two = vec![vec![1.0, -3.0], vec![26.25, -5.0]];
        assert_eq!(hypervolume(&two, &[0.0, -10.0]).unwrap(), 133.25);
        assert_eq!(hypervolume(&dst3(), &[0.0, -25.0]).unwrap(), 1854.5);
        assert_eq!(hypervolume_nd(&dst3(), &[0.0, -25.0]).unwrap(), 1854.5);
        let p = vec![vec![2.0, 3.0, 4.0]];
        assert_eq!(hypervolume(&p, &[1.0, 1.0, 1.0]).unwrap(), 1.0 * 2.0 * 3.0);
        assert_eq!(hypervolume(&[], &[0.0, 0.0]).unwrap(), 0.0);
        // (0, -100) does not strictly dominate the reference
        assert_eq!(hypervolume(&[vec![0.0, -100.0]], &[0.0, -25.0]).unwrap(), 0.0);
        assert!(hypervolume(&dst3(), &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn mc_matches_exact_on_dst3() {
        let est = mc_hypervolume(&dst3(), &[0.0, -25.0], &[100.0, -3.0], 200_000, 5).unwrap();
        let exact = 1854.5;
        assert!((est.value - exact).abs() < 3.0 * est.stderr, "{est:?}");
        assert_eq!(mc_hypervolume(&[], &[0.0, 0.0], &[1.0, 1.0], 10, 0).unwrap().value, 0.0);
        let full = mc_hypervolume(&[vec![2.0, 3.0]], &[0.0, 0.0], &[2.0, 3.0], 1000, 0).unwrap();
        assert_eq!(full.value, 6.0);
    }

    #[test]
    fn history_of_empty_and_full_sets() {
        let merged = vec![(2000, dst3()), (1000, vec![])];
        assert_eq!(hv_history(&merged, &[0.0, -25.0]).unwrap(), vec![(1000, 0.0), (2000, 1854.5)]);
    }

    fn points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 0..8)
    }

    proptest! {
        #[test]
        fn sweep_matches_recursion(pts in points(2)) {
            let r = [-11.0, -11.0];
            let a = hypervolume_2d(&pts, &r).unwrap();
            let b = hypervolume_nd(&pts, &r).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn permutation_and_filter_invariance(pts in points(3), seed in 0u64..1000) {
            let r = [-11.0; 3];
            let hv = hypervolume(&pts, &r).unwrap();
            let mut shuffled = pts.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.gen_range(0..=i));
            }
            prop_assert!((hypervolume(&shuffled, &r).unwrap() - hv).abs() <= 1e-9 * hv.max(1.0));
            let filtered = nondominated_filter(&pts).unwrap();
            prop_assert!((hypervolume(&filtered, &r).unwrap() - hv).abs() <= 1e-9 * hv.max(1.0));
        }

        #[test]
        fn dominated_point_adds_nothing_new_point_adds(pts in points(2).prop_filter("non-empty", |p| !p.is_empty())) {
            let r = [-11.0, -11.0];
            let hv = hypervolume(&pts, &r).unwrap();
            let mut worse = pts.clone();
            worse.push(pts[0].iter().map(|x| x - 0.5).collect());
            prop_assert!((hypervolume(&worse, &r).unwrap() - hv).abs() <= 1e-9 * hv.max(1.0));
            let mut better = pts.clone();
            let top: Vec<f64> = (0..2).map(|i| pts.iter().map(|p| p[i]).fold(f64::MIN, f64::max) + 1.0).collect();
            better.push(top);
            prop_assert!(hypervolume(&better, &r).unwrap() > hv);
        }

        #[test]
        fn dominance_is_strict_partial_order(a in prop::collection::vec(-3i32..3, 3), b in prop::collection::vec(-3i32..3, 3), c in prop::collection::vec(-3i32..3, 3)) {
            let f = |v: &Vec<i32>| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
            let (a, b, c) = (f(&a), f(&b), f(&c));
            prop_assert!(!dominates(&a, &a).unwrap());
            if dominates(&a, &b).unwrap() {
                prop_assert!(!dominates(&b, &a).unwrap());
                if dominates(&b, &c).unwrap() {
                    prop_assert!(dominates(&a, &c).unwrap());
                }
            }
        }
    }
}
