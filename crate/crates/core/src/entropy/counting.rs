use crate::convergence::{ModelMeasure, EXACT_SUPPORT_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::microstates::{rho2_sum, Gauge, Pseudometric, SqSum};
use crate::numeric::{to_f64, Rational};
use crate::rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest input handled by the exact branch-and-bound modes.
pub const EXACT_COUNT_LIMIT: usize = 25;

/// Greedy counts are bounds (lower for `N_ε`, upper for `S_ε`); exact modes
/// solve the optimization and refuse inputs above [`EXACT_COUNT_LIMIT`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountingMode {
    Greedy,
    Exact,
    /// exact when the input is small enough, greedy otherwise
    Auto,
}

/// Indices of the chosen points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountResult {
    pub indices: Vec<usize>,
    pub count: usize,
    /// whether `count` is the optimum rather than a bound
    pub exact: bool,
}

impl CountResult {
    fn new(indices: Vec<usize>, exact: bool) -> CountResult {
        CountResult { count: indices.len(), indices, exact }
    }
}

fn check_points(points: &[Vec<u32>]) -> Result<usize> {
    let Some(first) = points.first() else { return invalid("empty point list") };
    let d = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::LengthMismatch { expected: d, found: p.len() });
    }
    Ok(d)
}

fn use_exact(mode: CountingMode, n: usize) -> Result<bool> {
    match mode {
        CountingMode::Greedy => Ok(false),
        CountingMode::Auto => Ok(n <= EXACT_COUNT_LIMIT),
        CountingMode::Exact if n <= EXACT_COUNT_LIMIT => Ok(true),
        CountingMode::Exact => Err(Error::BudgetExceeded { required: format!("{n} points"), budget: EXACT_COUNT_LIMIT as u64 }),
    }
}

/// Pairwise relation matrix as bitmasks (inputs of at most 64 points).
fn relation_masks<R: Fn(SqSum) -> bool + Sync>(points: &[Vec<u32>], rho: &Pseudometric, rel: R) -> Vec<u64> {
    (0..points.len())
        .into_par_iter()
        .map(|i| (0..points.len()).filter(|&j| j != i && rel(rho2_sum(rho, &points[i], &points[j]))).fold(0u64, |m, j| m | 1 << j))
        .collect()
}

/// Whether every pair of distinct points is at `ρ_2`-distance `> ε`, by
/// a one-coordinate lower bound on distinct points.
fn all_distinct_separated(rho: &Pseudometric, eps: &Rational, d: usize) -> bool {
    match (rho.exact_scale(), rho.min_positive_sq_num()) {
        // ρ_2² ≥ m0 / (scale d) > ε²  ⟺  m0 den² > num² scale d
        (Some(scale), Some(m0)) => {
            let (num, den) = (*eps.numer() as u128, *eps.denom() as u128);
            m0 as u128 * den * den > num * num * scale as u128 * d as u128
        }
        _ => false,
    }
}

/// `N_ε`: a subset pairwise `ρ_2`-separated by more than `ε`.
///
/// Greedy keeps points in input order when they are separated from every
/// point kept so far (a maximal set); exact mode returns a maximum set.
pub fn max_separated(points: &[Vec<u32>], eps: &Rational, rho: &Pseudometric, mode: CountingMode) -> Result<CountResult> {
    let d = check_points(points)?;
    if *eps <= Rational::from_integer(0) {
        return invalid("ε must be positive");
    }
    let gauge = Gauge::new(rho, eps, d);
    if all_distinct_separated(rho, eps, d) {
        let mut seen = std::collections::HashSet::new();
        let idx: Vec<usize> = (0..points.len()).filter(|&i| seen.insert(&points[i])).collect();
        return Ok(CountResult::new(idx, true));
    }
    if use_exact(mode, points.len())? {
        let sep = relation_masks(points, rho, |s| gauge.above(s));
        let best = exact_max_separated(&sep, points.len());
        return Ok(CountResult::new(best, true));
    }
    let mut chosen: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if chosen.iter().all(|&c| gauge.above(rho2_sum(rho, p, &points[c]))) {
            chosen.push(i);
        }
    }
    let exact = chosen.len() == points.len();
    Ok(CountResult::new(chosen, exact))
}

/// Largest set of pairwise separated points (a maximum clique of `sep`).
fn exact_max_separated(sep: &[u64], n: usize) -> Vec<usize> {
    fn go(cand: u64, current: &mut Vec<usize>, best: &mut Vec<usize>, sep: &[u64]) {
        if cand == 0 {
            if current.len() > best.len() {
                *best = current.clone();
            }
            return;
        }
        if current.len() + cand.count_ones() as usize <= best.len() {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        current.push(v);
        go(cand & sep[v], current, best, sep);
        current.pop();
        go(cand & !(1 << v), current, best, sep);
    }
    let mut best = Vec::new();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    go(all, &mut Vec::new(), &mut best, sep);
    best
}

/// `S_ε`: a subset of the points whose open `ε`-balls cover all of them.
pub fn min_cover(points: &[Vec<u32>], eps: &Rational, rho: &Pseudometric, mode: CountingMode) -> Result<CountResult> {
    let d = check_points(points)?;
    if *eps <= Rational::from_integer(0) {
        return invalid("ε must be positive");
    }
    let gauge = Gauge::new(rho, eps, d);
    let n = points.len();
    if use_exact(mode, n)? {
        let near: Vec<u64> = relation_masks(points, rho, |s| gauge.below(s)).into_iter().enumerate().map(|(i, m)| m | 1 << i).collect();
        return Ok(CountResult::new(exact_min_cover(&near, n), true));
    }
    let near: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j == i || gauge.below(rho2_sum(rho, &points[i], &points[j]))).collect())
        .collect();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut chosen = Vec::new();
    while left > 0 {
        let (best, _) = (0..n)
            .map(|i| (i, near[i].iter().filter(|&&j| !covered[j]).count()))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty");
        for &j in &near[best] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        chosen.push(best);
    }
    chosen.sort();
    let exact = chosen.len() == 1;
    Ok(CountResult::new(chosen, exact))
}

/// Minimum dominating set by branching on the first uncovered point.
fn exact_min_cover(near: &[u64], n: usize) -> Vec<usize> {
    fn go(covered: u64, all: u64, current: &mut Vec<usize>, best: &mut Option<Vec<usize>>, near: &[u64]) {
        if covered == all {
            if best.as_ref().is_none_or(|b| current.len() < b.len()) {
                *best = Some(current.clone());
            }
            return;
        }
        if best.as_ref().is_some_and(|b| current.len() + 1 >= b.len()) {
            return;
        }
        let u = (!covered & all).trailing_zeros() as usize;
        // centers covering u are exactly the neighbors of u (symmetric relation)
        let mut cands = near[u];
        while cands != 0 {
            let c = cands.trailing_zeros() as usize;
            cands &= cands - 1;
            current.push(c);
            go(covered | near[c], all, current, best, near);
            current.pop();
        }
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = None;
    go(0, all, &mut Vec::new(), &mut best, near);
    let mut b = best.expect("the full set covers");
    b.sort();
    b
}

/// `S_{ε,δ}(μ)`: fewest support points whose open `ε`-neighborhoods carry
/// `μ`-mass at least `1 − δ`.
#[derive(Clone, Debug, Serialize)]
pub struct CoverCount {
    pub count: usize,
    pub covered_mass: f64,
    pub exact: bool,
    /// `singleton-balls`, `exact`, `greedy` or `sampled`
    pub method: String,
    pub support_points: usize,
}

pub fn s_eps_delta(
    mu: &ModelMeasure,
    eps: &Rational,
    delta: &Rational,
    rho: &Pseudometric,
    mode: CountingMode,
    seed: u64,
) -> Result<CoverCount> {
    if *eps <= Rational::from_integer(0) {
        return invalid("ε must be positive");
    }
    if *delta < Rational::from_integer(0) || *delta >= Rational::from_integer(1) {
        return invalid("δ must lie in [0, 1)");
    }
    let need = 1.0 - to_f64(delta) - 1e-12;
    let (support, sampled) = match mu.support(EXACT_SUPPORT_LIMIT) {
        Some(s) => (s, false),
        None => {
            let n = (100 * mu.d()).max(10_000);
            let pts: Vec<(Vec<u32>, f64)> = (0..n).map(|i| (mu.sample(&mut rng::stream(seed, &[5, i as u64])), 1.0 / n as f64)).collect();
            let mut acc = std::collections::BTreeMap::new();
            for (x, w) in pts {
                *acc.entry(x).or_insert(0.0) += w;
            }
            (acc.into_iter().collect(), true)
        }
    };
    let d = mu.d();
    let m = support.len();
    let tag = |method: &str| if sampled { "sampled".to_string() } else { method.to_string() };
    if all_distinct_separated(rho, eps, d) {
        // every open ball holds one support point: take the heaviest first
        let mut w: Vec<f64> = support.iter().map(|p| p.1).collect();
        w.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let mut mass = 0.0;
        let mut count = 0;
        for v in w {
            if mass >= need {
                break;
            }
            mass += v;
            count += 1;
        }
        return Ok(CoverCount { count, covered_mass: mass, exact: !sampled, method: tag("singleton-balls"), support_points: m });
    }
    let gauge = Gauge::new(rho, eps, d);
    let points: Vec<Vec<u32>> = support.iter().map(|p| p.0.clone()).collect();
    let weights: Vec<f64> = support.iter().map(|p| p.1).collect();
    if use_exact(mode, m)? {
        let near: Vec<u64> = relation_masks(&points, rho, |s| gauge.below(s)).into_iter().enumerate().map(|(i, b)| b | 1 << i).collect();
        let mass_of = |mask: u64| -> f64 { (0..m).filter(|&j| mask >> j & 1 == 1).map(|j| weights[j]).sum() };
        for k in 0..=m {
            let mut best: Option<(u64, f64)> = None;
            for_each_subset(m, k, &mut |set: &[usize]| {
                let cov = set.iter().fold(0u64, |acc, &c| acc | near[c]);
                let mass = mass_of(cov);
                if mass >= need && best.is_none_or(|b| mass > b.1) {
                    best = Some((cov, mass));
                }
            });
            if let Some((_, mass)) = best {
                return Ok(CoverCount { count: k, covered_mass: mass, exact: !sampled, method: tag("exact"), support_points: m });
            }
        }
        unreachable!("the whole support covers");
    }
    let near: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).filter(|&j| j == i || gauge.below(rho2_sum(rho, &points[i], &points[j]))).collect())
        .collect();
    let mut covered = vec![false; m];
    let mut mass = 0.0;
    let mut count = 0;
    while mass < need {
        let (best, gain) = (0..m)
            .map(|i| (i, near[i].iter().filter(|&&j| !covered[j]).map(|&j| weights[j]).sum::<f64>()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(b.0.cmp(&a.0)))
            .expect("nonempty");
        if gain <= 0.0 {
            break;
        }
        for &j in &near[best] {
            covered[j] = true;
        }
        mass += gain;
        count += 1;
    }
    Ok(CoverCount { count, covered_mass: mass, exact: false, method: tag("greedy"), support_points: m })
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::CompactGroupModel;
    use crate::group_core::GroupSpec;
    use proptest::prelude::*;
    use rand::Rng;
    use std::sync::Arc;

    fn discrete() -> Pseudometric {
        Pseudometric::discrete(GroupSpec::Integers.identity())
    }

    fn cube(d: usize) -> Vec<Vec<u32>> {
        (0..1u32 << d).map(|c| (0..d).map(|k| c >> k & 1).collect()).collect()
    }

    #[test]
    fn trivial_inputs() {
        let one = vec![vec![1, 2, 3]];
        assert_eq!(max_separated(&one, &Rational::new(1, 2), &discrete(), CountingMode::Exact).unwrap().count, 1);
        assert_eq!(min_cover(&one, &Rational::new(1, 2), &discrete(), CountingMode::Exact).unwrap().count, 1);
        assert!(max_separated(&[], &Rational::new(1, 2), &discrete(), CountingMode::Greedy).is_err());
        // ε above the diameter
        let c = cube(3);
        assert_eq!(min_cover(&c, &Rational::new(2, 1), &discrete(), CountingMode::Exact).unwrap().count, 1);
        assert_eq!(min_cover(&c, &Rational::new(2, 1), &discrete(), CountingMode::Greedy).unwrap().count, 1);
    }

    #[test]
    fn full_cube_is_separated() {
        for d in 1..=4 {
            let c = cube(d);
            // ε < 1/√d
            let eps = Rational::new(1, d as i64 + 1);
            let r = max_separated(&c, &eps, &discrete(), CountingMode::Exact).unwrap();
            assert_eq!(r.count, 1 << d);
        }
        // exact search (not the fast path) on the 4-cube at ε = 1/2: Hamming distance ≥ 2 codes
        let r = max_separated(&cube(4), &Rational::new(1, 2), &discrete(), CountingMode::Exact).unwrap();
        assert_eq!(r.count, 8);
        assert!(max_separated(&cube(5), &Rational::new(1, 2), &discrete(), CountingMode::Exact).is_err());
    }

    #[test]
    fn greedy_versus_exact_on_random_points() {
        let rho = Pseudometric::flat_torus(5, 1, GroupSpec::Integers.identity());
        let mut r = rng::stream(11, &[]);
        for _ in 0..10 {
            let pts: Vec<Vec<u32>> = (0..20).map(|_| (0..6).map(|_| r.gen_range(0..5)).collect()).collect();
            let eps = Rational::new(3, 10);
            let g = max_separated(&pts, &eps, &rho, CountingMode::Greedy).unwrap();
            let e = max_separated(&pts, &eps, &rho, CountingMode::Exact).unwrap();
            assert!(g.count <= e.count);
            let gc = min_cover(&pts, &eps, &rho, CountingMode::Greedy).unwrap();
            let ec = min_cover(&pts, &eps, &rho, CountingMode::Exact).unwrap();
            assert!(gc.count >= ec.count);
            // returned sets have the claimed property
            let gauge = Gauge::new(&rho, &eps, 6);
            for (a, &i) in e.indices.iter().enumerate() {
                for &j in &e.indices[a + 1..] {
                    assert!(gauge.above(rho2_sum(&rho, &pts[i], &pts[j])));
                }
            }
            for p in &pts {
                assert!(ec.indices.iter().any(|&c| gauge.below(rho2_sum(&rho, p, &pts[c]))));
            }
        }
    }

    #[test]
    fn s_eps_delta_examples() {
        let m = Arc::new(CompactGroupModel::cyclic(2));
        let u = ModelMeasure::uniform_on_set(m.clone(), 4, cube(4)).unwrap();
        let eps = Rational::new(1, 3);
        let c = s_eps_delta(&u, &eps, &Rational::new(1, 4), &discrete(), CountingMode::Auto, 0).unwrap();
        assert_eq!(c.count, 12);
        let c = s_eps_delta(&u, &eps, &Rational::from_integer(0), &discrete(), CountingMode::Auto, 0).unwrap();
        assert_eq!(c.count, 16);
        let pm = ModelMeasure::point_mass(m.clone(), vec![0, 1, 0, 1]).unwrap();
        for (e, dl) in [(Rational::new(1, 10), Rational::new(0, 1)), (Rational::new(3, 1), Rational::new(1, 2))] {
            assert_eq!(s_eps_delta(&pm, &e, &dl, &discrete(), CountingMode::Auto, 0).unwrap().count, 1);
        }
        // exact mode away from the singleton fast path: balls of radius 0.6 on the 3-cube
        let u3 = ModelMeasure::uniform_on_set(m, 3, cube(3)).unwrap();
        let c = s_eps_delta(&u3, &Rational::new(3, 5), &Rational::from_integer(0), &discrete(), CountingMode::Exact, 0).unwrap();
        // radius √(1/3) < 0.6: balls are Hamming balls of radius 1; 2 cover the cube
        assert_eq!((c.count, c.method.as_str()), (2, "exact"));
    }

    proptest! {
        #[test]
        fn separated_count_monotone_in_eps(seed in 0u64..200) {
            let mut r = rng::stream(seed, &[]);
            let pts: Vec<Vec<u32>> = (0..12).map(|_| (0..4).map(|_| r.gen_range(0..3)).collect()).collect();
            let rho = Pseudometric::discrete(GroupSpec::Integers.identity());
            let mut prev = usize::MAX;
            for k in 1..8 {
                let n = max_separated(&pts, &Rational::new(k, 8), &rho, CountingMode::Exact).unwrap().count;
                prop_assert!(n <= prev);
                prev = n;
            }
        }

        #[test]
        fn s_eps_delta_monotone(seed in 0u64..100) {
            let mut r = rng::stream(seed, &[1]);
            let pts: Vec<Vec<u32>> = (0..10).map(|_| (0..3).map(|_| r.gen_range(0..3)).collect()).collect();
            let mu = ModelMeasure::uniform_on_set(Arc::new(CompactGroupModel::cyclic(3)), 3, pts).unwrap();
            let rho = Pseudometric::flat_torus(3, 1, GroupSpec::Integers.identity());
            let count = |e: Rational, dl: Rational| s_eps_delta(&mu, &e, &dl, &rho, CountingMode::Exact, 0).unwrap().count;
            prop_assert!(count(Rational::new(1, 3), Rational::new(1, 10)) <= count(Rational::new(1, 5), Rational::new(1, 10)));
            prop_assert!(count(Rational::new(1, 3), Rational::new(1, 2)) <= count(Rational::new(1, 3), Rational::new(1, 10)));
        }
    }
}
