use super::OracleResult;
use crate::error::{Error, Result};
use crate::group_core::SoficApproximation;
use crate::microstates::{rho2_sum, Gauge, MapWindow, MicrostateSystem, Pseudometric};
use crate::numeric::{Nats, Rational};
use serde::Serialize;

/// Default cap on `|X|^d` for exhaustive scans.
pub const BRUTE_BUDGET: u64 = 1_000_000;

const SEARCH_NODES: u64 = 50_000_000;

/// Exhaustive `N_ε` over a microstate set.
#[derive(Clone, Debug, Serialize)]
pub struct BruteEntropy {
    pub map_size: usize,
    pub n_eps: usize,
    /// `(1/d) ln N_ε`, `-inf` when the set is empty
    pub per_site: Nats,
    pub result: OracleResult,
}

/// Scans every candidate in `X^d` against the defining inequalities (the
/// panel of `window` included) and computes the largest `ε`-separated subset
/// exactly by branch and bound.
pub fn brute_entropy(
    system: &MicrostateSystem,
    sigma: &SoficApproximation,
    window: &MapWindow,
    rho: &Pseudometric,
    eps: &Rational,
    budget: u64,
) -> Result<BruteEntropy> {
    let n = system.model().size();
    let d = sigma.d();
    let total = (n as u128).checked_pow(d as u32).filter(|&t| t <= budget as u128);
    let Some(total) = total else {
        return Err(Error::BudgetExceeded { required: format!("{n}^{d}"), budget });
    };
    let prep = system.prepare(sigma, &window.f_set, &window.delta, rho)?;
    let mut members = Vec::new();
    let mut x = vec![0u32; d];
    for c in 0..total as u64 {
        let mut r = c;
        for v in x.iter_mut() {
            *v = (r % n) as u32;
            r /= n;
        }
        if prep.is_top(&x) && window.empirical_ok(&x) {
            members.push(x.clone());
        }
    }
    let gauge = Gauge::new(rho, eps, d);
    let m = members.len();
    // conflict graph: pairs that are not ε-separated
    let words = m.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; m];
    for i in 0..m {
        for j in i + 1..m {
            if !gauge.above(rho2_sum(rho, &members[i], &members[j])) {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    let mut mis = Mis { adj, best: 0, nodes: 0 };
    let all: Vec<u64> = (0..words).map(|w| if (w + 1) * 64 <= m { u64::MAX } else { (1u64 << (m % 64)) - 1 }).collect();
    mis.search(all, 0)?;
    let per_site = if mis.best == 0 { Nats::NEG_INFINITY } else { Nats((mis.best as f64).ln() / d as f64) };
    Ok(BruteEntropy {
        map_size: m,
        n_eps: mis.best,
        per_site,
        result: OracleResult { value: per_site.0, error_bound: 0.0, method: "brute-force".into() },
    })
}

struct Mis {
    adj: Vec<Vec<u64>>,
    best: usize,
    nodes: u64,
}

fn count(s: &[u64]) -> usize {
    s.iter().map(|w| w.count_ones() as usize).sum()
}

fn members(s: &[u64]) -> impl Iterator<Item = usize> + '_ {
    s.iter().enumerate().flat_map(|(w, &bits)| (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b))
}

impl Mis {
    fn degree(&self, v: usize, s: &[u64]) -> usize {
        self.adj[v].iter().zip(s).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    fn without_closed(&self, v: usize, s: &[u64]) -> Vec<u64> {
        let mut t: Vec<u64> = s.iter().zip(&self.adj[v]).map(|(a, b)| a & !b).collect();
        t[v / 64] &= !(1 << (v % 64));
        t
    }

    /// Maximum independent set of the induced subgraph on `s`, added to `taken`.
    fn search(&mut self, mut s: Vec<u64>, mut taken: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > SEARCH_NODES {
            return Err(Error::BudgetExceeded { required: "separated-set search".into(), budget: SEARCH_NODES });
        }
        // vertices of degree ≤ 1 are always safe to take
        loop {
            let pick = members(&s).find(|&v| self.degree(v, &s) <= 1);
            match pick {
                Some(v) => {
                    s = self.without_closed(v, &s);
                    taken += 1;
                }
                None => break,
            }
        }
        let rest = count(&s);
        if rest == 0 {
            self.best = self.best.max(taken);
            return Ok(());
        }
        if taken + rest <= self.best {
            return Ok(());
        }
        let v = members(&s).max_by_key(|&v| self.degree(v, &s)).expect("nonempty");
        self.search(self.without_closed(v, &s), taken + 1)?;
        let mut s2 = s;
        s2[v / 64] &= !(1 << (v % 64));
        self.search(s2, taken)
    }
}
