use super::automorphism::AutomorphismAction;
use super::model::{CompactGroupModel, FiniteModel};
use super::ring::IntegerGroupMatrix;
use crate::error::{invalid, Error, Result};
use crate::group_core::{quotient_sofic, GroupElement, GroupSpec, Quotient, SoficApproximation};
use crate::linalg::{self, IntMatrix, KernelParam};
use crate::numeric::{format_rational, Rational};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Finite model of `X_f` at one sofic level: points `x ∈ ((1/q)Z/Z)^{n d}`
/// with `‖f^{(σ)} x‖_∞ ≤ tol` in `R/Z`, where
/// `(f^{(σ)} x)(l, i) = Σ_j Σ_g f_{lj}(g) x_j(σ(g)^{-1} i)`.
///
/// Coordinates: `x[i]` is a point of the torus grid `T_q^n`; site `s` of
/// `x[i]` is the variable `x_s(i)`. Rows are indexed `(i, l) ↦ i m + l`.
#[derive(Clone, Debug)]
pub struct AlgebraicActionModel {
    f: IntegerGroupMatrix,
    sigma: Arc<SoficApproximation>,
    q: u32,
    tol: Rational,
    rows: Vec<Vec<(usize, i64)>>,
    coord: Arc<CompactGroupModel>,
}

/// How to count kernel points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// `|det f^{(σ)}|` (square, nonsingular)
    ContinuousExact,
    /// exact kernel in `((1/q)Z/Z)^{nd}` via Smith normal form
    GridExact,
    /// lattice enumeration of the tolerance kernel
    GridTolerance { budget: u64 },
}

pub fn instantiate_xf(f: &IntegerGroupMatrix, sigma: &Arc<SoficApproximation>, q: u32, tol: Rational) -> Result<AlgebraicActionModel> {
    if q < 2 {
        return invalid("grid resolution q must be at least 2");
    }
    if tol < Rational::zero() || tol > Rational::new(1, 2) {
        return invalid(format!("tolerance {} outside [0, 1/2]", format_rational(&tol)));
    }
    let group = sigma.group();
    for g in f.support() {
        if !sigma.contains(&g) {
            return Err(Error::Unsupported(format!("element `{}` of f lies outside the sofic support", group.format(&g))));
        }
    }
    let (m, n, d) = (f.rows, f.cols, sigma.d());
    let coord = Arc::new(CompactGroupModel::torus_grid(q, n as u32)?);
    let mut rows = vec![];
    for i in 0..d {
        for l in 0..m {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for s in 0..n {
                for (g, c) in f.entry(l, s).terms() {
                    let j = sigma.perm_inverse(g)?.apply(i);
                    *acc.entry(j * n + s).or_insert(0) += c;
                }
            }
            let mut row: Vec<(usize, i64)> = acc.into_iter().filter(|(_, c)| *c != 0).collect();
            row.sort();
            rows.push(row);
        }
    }
    Ok(AlgebraicActionModel { f: f.clone(), sigma: sigma.clone(), q, tol, rows, coord })
}

impl AlgebraicActionModel {
    pub fn f(&self) -> &IntegerGroupMatrix {
        &self.f
    }

    pub fn sigma(&self) -> &Arc<SoficApproximation> {
        &self.sigma
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn tol(&self) -> Rational {
        self.tol
    }

    pub fn d(&self) -> usize {
        self.sigma.d()
    }

    pub fn n_vars(&self) -> usize {
        self.d() * self.f.cols
    }

    /// Model of one coordinate, `T_q^n`.
    pub fn coordinate_model(&self) -> &Arc<CompactGroupModel> {
        &self.coord
    }

    /// `floor(tol q)`: residuals are compared in units of `1/q`.
    pub fn tol_units(&self) -> i64 {
        num_integer::Integer::div_floor(&(*self.tol.numer() * self.q as i64), self.tol.denom())
    }

    /// `f^{(σ)}` as a dense integer matrix (`md × nd`).
    pub fn dense(&self) -> IntMatrix {
        let mut a = IntMatrix::zeros(self.rows.len(), self.n_vars());
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a.add_to(r, c, v);
            }
        }
        a
    }

    pub fn sparse_rows(&self) -> &[Vec<(usize, i64)>] {
        &self.rows
    }

    pub fn vars(&self, x: &[u32]) -> Vec<i64> {
        let n = self.f.cols;
        let mut v = Vec::with_capacity(x.len() * n);
        for &p in x {
            if n == 1 {
                v.push(p as i64);
            } else {
                v.extend(self.coord.coords(p).into_iter().map(|c| c as i64));
            }
        }
        v
    }

    pub fn point_from_vars(&self, vars: &[u64]) -> Vec<u32> {
        let n = self.f.cols;
        vars.chunks(n).map(|c| c.iter().rev().fold(0u32, |acc, &v| acc * self.q + v as u32)).collect()
    }

    /// Residual of each row in units of `1/q` (distance to 0 in `R/Z`).
    pub fn residual_units(&self, x: &[u32]) -> Result<Vec<i64>> {
        if x.len() != self.d() {
            return Err(Error::LengthMismatch { expected: self.d(), found: x.len() });
        }
        let v = self.vars(x);
        let q = self.q as i64;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let u = row.iter().map(|&(c, k)| k * v[c]).sum::<i64>().rem_euclid(q);
                u.min(q - u)
            })
            .collect())
    }

    /// Sup-norm residual as an exact rational.
    pub fn residual(&self, x: &[u32]) -> Result<Rational> {
        let m = self.residual_units(x)?.into_iter().max().unwrap_or(0);
        Ok(Rational::new(m, self.q as i64))
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        let t = self.tol_units();
        self.residual_units(x).map(|r| r.iter().all(|&u| u <= t)).unwrap_or(false)
    }

    /// Parametrization of the exact grid kernel.
    pub fn exact_kernel(&self) -> KernelParam {
        KernelParam::new(&self.dense(), self.q as u64)
    }

    /// Uniform sample from the exact grid kernel.
    pub fn sample_exact_kernel<R: Rng>(&self, param: &KernelParam, rng: &mut R) -> Vec<u32> {
        self.point_from_vars(&param.sample(rng))
    }

    /// All kernel points in lexicographic order, up to `budget` points.
    pub fn enumerate_kernel(&self, budget: u64) -> Result<Vec<Vec<u32>>> {
        let mut pts = if self.tol.is_zero() {
            let kp = self.exact_kernel();
            let count = kp.count();
            if count > BigUint::from(budget) {
                return Err(Error::BudgetExceeded { required: count.to_string(), budget });
            }
            kp.enumerate().iter().map(|v| self.point_from_vars(v)).collect()
        } else {
            let mut search = ToleranceSearch::new(self, budget, true);
            search.run()?;
            search.points
        };
        pts.sort();
        Ok(pts)
    }

    /// Model for `f ⊕ f` on pairs; coordinate model `T_q^{2n}`.
    pub fn doubled(&self) -> Result<AlgebraicActionModel> {
        instantiate_xf(&self.f.block_diag(&self.f), &self.sigma, self.q, self.tol)
    }
}

pub fn count_kernel_points(model: &AlgebraicActionModel, mode: CountMode) -> Result<BigUint> {
    match mode {
        CountMode::ContinuousExact => {
            if model.f.rows != model.f.cols {
                return Err(Error::Unsupported("continuous kernel count needs a square f".into()));
            }
            let det = linalg::det(&model.dense());
            if det.is_zero() {
                return Err(Error::Unsupported("f^(σ) is singular: the continuous kernel is infinite".into()));
            }
            Ok(det.abs().to_biguint().expect("non-negative"))
        }
        CountMode::GridExact => Ok(linalg::kernel_count_mod(&linalg::smith(&model.dense()), model.n_vars(), model.q as u64)),
        CountMode::GridTolerance { budget } => {
            let mut s = ToleranceSearch::new(model, budget, false);
            s.run()?;
            Ok(BigUint::from(s.count))
        }
    }
}

/// Depth-first lattice enumeration of the tolerance kernel. Variables are
/// assigned in order; a row is checked once its last variable is set, and
/// that variable is solved from the row's congruence when possible.
struct ToleranceSearch<'a> {
    model: &'a AlgebraicActionModel,
    q: i64,
    t: i64,
    var_rows: Vec<Vec<(usize, i64)>>,
    completing: Vec<Vec<(usize, i64)>>,
    partial: Vec<i64>,
    assign: Vec<u64>,
    count: u64,
    nodes: u64,
    budget: u64,
    collect: bool,
    points: Vec<Vec<u32>>,
    exceeded: bool,
}

impl<'a> ToleranceSearch<'a> {
    fn new(model: &'a AlgebraicActionModel, budget: u64, collect: bool) -> ToleranceSearch<'a> {
        let nv = model.n_vars();
        let q = model.q as i64;
        let mut var_rows = vec![vec![]; nv];
        let mut completing = vec![vec![]; nv];
        for (r, row) in model.rows.iter().enumerate() {
            for &(c, k) in row {
                var_rows[c].push((r, k.rem_euclid(q)));
            }
            if let Some(&(c, k)) = row.last() {
                completing[c].push((r, k.rem_euclid(q)));
            }
        }
        ToleranceSearch {
            model,
            q,
            t: model.tol_units(),
            var_rows,
            completing,
            partial: vec![0; model.rows.len()],
            assign: vec![0; nv],
            count: 0,
            nodes: 0,
            budget,
            collect,
            points: vec![],
            exceeded: false,
        }
    }

    fn run(&mut self) -> Result<()> {
        // rows with no variables are constant zero and always pass
        self.go(0);
        if self.exceeded {
            return Err(Error::BudgetExceeded { required: format!("more than {}", self.budget), budget: self.budget });
        }
        Ok(())
    }

    fn ok(&self, r: usize) -> bool {
        let u = self.partial[r].rem_euclid(self.q);
        u.min(self.q - u) <= self.t
    }

    fn candidates(&self, v: usize) -> Vec<u64> {
        let q = self.q;
        let solver = self.completing[v].iter().filter(|(_, k)| *k != 0).min_by_key(|(_, k)| k.gcd(&q));
        let Some(&(r, c)) = solver else { return (0..q as u64).collect() };
        if 2 * self.t + 1 >= q {
            return (0..q as u64).collect();
        }
        // partial[r] currently excludes v; solve c x ≡ res - partial (mod q)
        let g = c.gcd(&q);
        let qq = q / g;
        let inv = mod_inverse((c / g).rem_euclid(qq), qq);
        let mut seen = vec![false; q as usize];
        let mut out = vec![];
        for res in -self.t..=self.t {
            let rhs = (res - self.partial[r]).rem_euclid(q);
            if rhs % g != 0 {
                continue;
            }
            let x0 = ((rhs / g) % qq * inv).rem_euclid(qq);
            for k in 0..g {
                let x = (x0 + k * qq) as usize;
                if !std::mem::replace(&mut seen[x], true) {
                    out.push(x as u64);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn go(&mut self, v: usize) {
        if self.exceeded {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget.saturating_mul(64).max(1 << 20) {
            self.exceeded = true;
            return;
        }
        if v == self.assign.len() {
            self.count += 1;
            if self.count > self.budget {
                self.exceeded = true;
                return;
            }
            if self.collect {
                let p = self.model.point_from_vars(&self.assign);
                self.points.push(p);
            }
            return;
        }
        for x in self.candidates(v) {
            for &(r, k) in &self.var_rows[v] {
                self.partial[r] += k * x as i64;
            }
            if self.completing[v].iter().all(|&(r, _)| self.ok(r)) {
                self.assign[v] = x;
                self.go(v + 1);
            }
            for &(r, k) in &self.var_rows[v] {
                self.partial[r] -= k * x as i64;
            }
            if self.exceeded {
                return;
            }
        }
    }
}

fn mod_inverse(a: i64, m: i64) -> i64 {
    if m == 1 {
        return 0;
    }
    let e = num_integer::Integer::extended_gcd(&a, &m);
    e.x.rem_euclid(m)
}

/// `X_f` for a finite group as an explicit finite model with its action
/// `(g·x)(k) = x(k g)` on kernel vectors indexed by group elements.
#[derive(Clone, Debug)]
pub struct FiniteXf {
    pub model: Arc<CompactGroupModel>,
    pub action: AutomorphismAction,
    /// grid resolution on which the kernel is exact
    pub q: u32,
    /// residue vectors (`n |G|` entries) of the model points, by index
    pub points: Vec<Vec<u32>>,
}

pub fn xf_finite_model(f: &IntegerGroupMatrix, group: &Arc<GroupSpec>) -> Result<FiniteXf> {
    let GroupSpec::Finite(fg) = &**group else {
        return Err(Error::Unsupported("explicit X_f models need a finite group".into()));
    };
    if f.rows != f.cols {
        return Err(Error::Unsupported("explicit X_f models need a square f".into()));
    }
    let elements = group.elements().expect("finite");
    let sigma = Arc::new(quotient_sofic(group, &Quotient::Regular { copies: 1 }, &elements)?);
    let probe = instantiate_xf(f, &sigma, 2, Rational::zero())?;
    let dense = probe.dense();
    let det = linalg::det(&dense);
    if det.is_zero() {
        return Err(Error::Unsupported("λ(f) is not injective: X_f is infinite".into()));
    }
    if det.abs() > 1.into() && det.abs().to_u64().is_none_or(|v| v > 1 << 16) {
        return Err(Error::Unsupported(format!("|det λ(f)| = {} too large for an explicit model", det.abs())));
    }
    let smith = linalg::smith(&dense);
    let s_max = smith.diagonal.iter().max().and_then(|v| v.to_u32()).unwrap_or(1);
    let q = s_max.max(2);
    let model_f = instantiate_xf(f, &sigma, q, Rational::zero())?;
    let param = model_f.exact_kernel();
    let vars: Vec<Vec<u32>> = param.enumerate().into_iter().map(|v| v.into_iter().map(|x| x as u32).collect()).collect();
    let (fm, points) = FiniteModel::from_residue_vectors(&format!("X_f over {}", fg.name), q, &vars)?;
    let index: HashMap<&Vec<u32>, u32> = points.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();
    let n = f.cols;
    let maps = fg
        .generators
        .iter()
        .map(|(_, s)| {
            points
                .iter()
                .map(|x| {
                    let mut y = vec![0u32; x.len()];
                    for k in 0..fg.order {
                        let ks = fg.mul(k as u32, *s) as usize;
                        y[k * n..(k + 1) * n].copy_from_slice(&x[ks * n..(ks + 1) * n]);
                    }
                    index[&y]
                })
                .collect()
        })
        .collect();
    let model = Arc::new(CompactGroupModel::Finite(fm));
    let action = AutomorphismAction::new(group.clone(), model.clone(), maps)?;
    Ok(FiniteXf { model, action, q, points })
}

/// Haar measure of the grid kernel of the regular model (finite `G`),
/// pushed to the tuple `(χ(g))_{g ∈ W}`; `χ(g)` is the coordinate at `g^{-1}`.
pub fn regular_window_marginal(
    f: &IntegerGroupMatrix,
    group: &Arc<GroupSpec>,
    q: u32,
    window: &[GroupElement],
) -> Result<Vec<(Vec<u32>, f64)>> {
    let elements = group.elements().ok_or_else(|| Error::Unsupported("window marginals of X_f need a finite group".into()))?;
    let sigma = Arc::new(quotient_sofic(group, &Quotient::Regular { copies: 1 }, &elements)?);
    let model = instantiate_xf(f, &sigma, q, Rational::zero())?;
    let pts = model.enumerate_kernel(1 << 22)?;
    let w = 1.0 / pts.len() as f64;
    let mut acc: HashMap<Vec<u32>, f64> = HashMap::new();
    for x in &pts {
        let tuple = window
            .iter()
            .map(|g| {
                let GroupElement::Finite(e) = group.inverse(g) else { unreachable!() };
                x[e as usize]
            })
            .collect();
        *acc.entry(tuple).or_insert(0.0) += w;
    }
    let mut out: Vec<(Vec<u32>, f64)> = acc.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::parse_rational;
    use proptest::prelude::*;

    fn z_model(f: &str, d: usize, q: u32, tol: &str) -> AlgebraicActionModel {
        let g = Arc::new(GroupSpec::Integers);
        let f = IntegerGroupMatrix::parse_scalar(&g, f).unwrap();
        let sigma = Arc::new(quotient_sofic(&g, &Quotient::Cyclic { n: d }, &g.ball(3)).unwrap());
        instantiate_xf(&f, &sigma, q, parse_rational(tol).unwrap()).unwrap()
    }

    fn z2_model(f: &str, copies: usize, q: u32) -> AlgebraicActionModel {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let f = IntegerGroupMatrix::parse_scalar(&g, f).unwrap();
        let sigma = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies }, &g.elements().unwrap()).unwrap());
        instantiate_xf(&f, &sigma, q, Rational::zero()).unwrap()
    }

    /// Exhaustive count of the tolerance kernel, straight from the definition.
    fn brute_count(model: &AlgebraicActionModel) -> u64 {
        let nv = model.n_vars() as u32;
        let q = model.q() as u64;
        (0..q.pow(nv))
            .filter(|&code| {
                let x: Vec<u32> = (0..nv).map(|k| ((code / q.pow(k)) % q) as u32).collect();
                model.contains(&model.point_from_vars(&x.iter().map(|&v| v as u64).collect::<Vec<_>>()))
            })
            .count() as u64
    }

    #[test]
    fn shift_matrix_for_t_minus_two() {
        // (f x)(i) = x(i-1) - 2 x(i)
        let m = z_model("t - 2", 5, 7, "0");
        let a = m.dense();
        for i in 0..5 {
            assert_eq!(a.get(i, i), &(-2).into());
            assert_eq!(a.get(i, (i + 4) % 5), &1.into());
        }
        assert_eq!(count_kernel_points(&m, CountMode::ContinuousExact).unwrap(), BigUint::from(31u32));
    }

    #[test]
    fn continuous_count_is_det() {
        for d in 1..=12 {
            let m = z_model("t - 2", d, 2, "0");
            assert_eq!(count_kernel_points(&m, CountMode::ContinuousExact).unwrap(), BigUint::from((1u64 << d) - 1));
        }
    }

    #[test]
    fn z2_two_plus_t() {
        let m = z2_model("2 + t", 1, 3);
        let a = m.dense();
        assert_eq!(linalg::det(&a), 3.into());
        let pts = m.enumerate_kernel(100).unwrap();
        assert_eq!(pts, vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
        let big = z2_model("2 + t", 6, 3);
        assert_eq!(count_kernel_points(&big, CountMode::GridExact).unwrap(), BigUint::from(729u32));
    }

    #[test]
    fn tolerance_counts_match_brute_force() {
        for (f, d, q, tol) in [("t - 2", 3, 8, "1/8"), ("t - 2", 4, 6, "1/6"), ("t^2 - t - 1", 3, 5, "1/5"), ("2 + t", 4, 4, "0")] {
            let m = z_model(f, d, q, tol);
            let c = count_kernel_points(&m, CountMode::GridTolerance { budget: 1 << 20 }).unwrap();
            assert_eq!(c, BigUint::from(brute_count(&m)), "{f} d={d} q={q} tol={tol}");
            let pts = m.enumerate_kernel(1 << 20).unwrap();
            assert_eq!(BigUint::from(pts.len()), c);
            assert!(pts.iter().all(|x| m.contains(x)));
        }
    }

    #[test]
    fn spec_tolerance_example_counts_and_budget() {
        let m = z_model("t - 2", 8, 64, "1/16");
        let c = count_kernel_points(&m, CountMode::GridTolerance { budget: 100_000_000 }).unwrap();
        // at least the exact grid kernel (gcd(255, 64) = 1 point), far fewer than 64^8
        assert!(c > BigUint::from(1u32) && c < BigUint::from(64u64.pow(8)));
        assert!(matches!(count_kernel_points(&m, CountMode::GridTolerance { budget: 1000 }), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn rejects_unsupported_elements_and_bad_q() {
        let g = Arc::new(GroupSpec::Integers);
        let f = IntegerGroupMatrix::parse_scalar(&g, "t^5 - 1").unwrap();
        let sigma = Arc::new(quotient_sofic(&g, &Quotient::Cyclic { n: 4 }, &g.ball(2)).unwrap());
        let err = instantiate_xf(&f, &sigma, 3, Rational::zero()).unwrap_err();
        assert!(err.to_string().contains("t^5"));
        let f = IntegerGroupMatrix::parse_scalar(&g, "t - 1").unwrap();
        assert!(instantiate_xf(&f, &sigma, 1, Rational::zero()).is_err());
    }

    #[test]
    fn finite_xf_for_two_plus_t() {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        let xf = xf_finite_model(&f, &g).unwrap();
        assert_eq!(xf.model.size(), 3);
        assert_eq!(xf.q, 3);
        // X_f ≅ Z/3 with trivial action: kernel points are (a, a)
        let t = g.parse_word("t").unwrap();
        for p in 0..3 {
            assert_eq!(xf.action.act(&t, p).unwrap(), p);
            assert_eq!(xf.points[p as usize][0], xf.points[p as usize][1]);
        }
        let w = regular_window_marginal(&f, &g, 3, &[g.identity(), t]).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|(tuple, p)| tuple[0] == tuple[1] && (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn finite_xf_for_nonabelian_group() {
        let g = Arc::new(GroupSpec::Finite(crate::group_core::FiniteGroup::symmetric3()));
        let f = IntegerGroupMatrix::parse_scalar(&g, "3 + s + r").unwrap();
        let xf = xf_finite_model(&f, &g).unwrap();
        let dense = instantiate_xf(
            &f,
            &Arc::new(quotient_sofic(&g, &Quotient::Regular { copies: 1 }, &g.elements().unwrap()).unwrap()),
            2,
            Rational::zero(),
        )
        .unwrap()
        .dense();
        assert_eq!(BigUint::from(xf.model.size()), linalg::det(&dense).abs().to_biguint().unwrap());
        xf.model.check_axioms().unwrap();
    }

    proptest! {
        #[test]
        fn kernel_invariant_under_cyclic_translation(d in 2usize..7, q in 2u32..6, seed in 0u64..1000) {
            let m = z_model("t^2 - t - 1", d, q, "0");
            let pts = m.enumerate_kernel(1 << 20).unwrap();
            let g = m.sigma().group().clone();
            let t = g.parse_word("t").unwrap();
            let p = m.sigma().perm(&t).unwrap();
            let x = &pts[(seed as usize) % pts.len()];
            // x ∘ σ(t)^{-1}
            let y: Vec<u32> = (0..d).map(|j| x[p.inverse().apply(j)]).collect();
            prop_assert!(m.contains(&y));
        }

        #[test]
        fn grid_exact_matches_tolerance_zero(d in 1usize..6, q in 2u32..7) {
            let m = z_model("t^2 - 3", d, q, "0");
            let a = count_kernel_points(&m, CountMode::GridExact).unwrap();
            let b = count_kernel_points(&m, CountMode::GridTolerance { budget: 1 << 20 }).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
