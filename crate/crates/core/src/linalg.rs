//! Exact integer linear algebra: Bareiss determinants, ranks, and Smith
//! normal form with the column transform needed to parametrize kernels.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> IntMatrix {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> IntMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix");
        IntMatrix { rows: r, cols: c, data: rows.iter().flatten().map(|&v| BigInt::from(v)).collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// row[dst] -= k * row[src]
    fn row_axpy(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(src, j) * k;
            self.data[dst * self.cols + j] -= v;
        }
    }

    /// col[dst] -= k * col[src]
    fn col_axpy(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = self.get(i, src) * k;
            self.data[i * self.cols + dst] -= v;
        }
    }
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det(a: &IntMatrix) -> BigInt {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let n = a.rows;
    if n == 0 {
        return BigInt::one();
    }
    let mut m = a.clone();
    let mut sign = 1;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m.get(k, k).is_zero() {
            match (k + 1..n).find(|&i| !m.get(i, k).is_zero()) {
                Some(i) => {
                    m.swap_rows(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (m.get(i, j) * m.get(k, k) - m.get(i, k) * m.get(k, j)) / &prev;
                m.set(i, j, v);
            }
        }
        prev = m.get(k, k).clone();
    }
    let d = m.get(n - 1, n - 1).clone();
    if sign < 0 {
        -d
    } else {
        d
    }
}

/// Rank over the rationals.
pub fn rank(a: &IntMatrix) -> usize {
    let mut m = a.clone();
    let mut r = 0;
    for c in 0..m.cols {
        let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
        m.swap_rows(p, r);
        let pivot = m.get(r, c).clone();
        for i in r + 1..m.rows {
            let f = m.get(i, c).clone();
            if f.is_zero() {
                continue;
            }
            for j in c..m.cols {
                let v = m.get(i, j) * &pivot - m.get(r, j) * &f;
                m.set(i, j, v);
            }
            // keep entries small
            let g = (c..m.cols).fold(BigInt::zero(), |g, j| g.gcd(m.get(i, j)));
            if !g.is_zero() && !g.is_one() {
                for j in c..m.cols {
                    let v = m.get(i, j) / &g;
                    m.set(i, j, v);
                }
            }
        }
        r += 1;
        if r == m.rows {
            break;
        }
    }
    r
}

/// Smith normal form `S = P A Q` with `P`, `Q` unimodular. Only `Q` is kept:
/// it maps `S`-coordinates back to the original variables (`x = Q y`).
#[derive(Clone, Debug)]
pub struct SmithForm {
    /// Elementary divisors `s_1 | s_2 | ...`, length `min(rows, cols)`, zeros last.
    pub diagonal: Vec<BigInt>,
    pub col_transform: IntMatrix,
}

pub fn smith(a: &IntMatrix) -> SmithForm {
    let (r, c) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut q = IntMatrix::identity(c);
    let n = r.min(c);
    for t in 0..n {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    let v = m.get(i, j);
                    if !v.is_zero() && best.is_none_or(|(bi, bj)| v.abs() < m.get(bi, bj).abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            m.swap_rows(t, pi);
            m.swap_cols(t, pj);
            q.swap_cols(t, pj);
            let pivot = m.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..r {
                if !m.get(i, t).is_zero() {
                    let k = m.get(i, t) / &pivot;
                    m.row_axpy(i, t, &k);
                    clean &= m.get(i, t).is_zero();
                }
            }
            for j in t + 1..c {
                if !m.get(t, j).is_zero() {
                    let k = m.get(t, j) / &pivot;
                    m.col_axpy(j, t, &k);
                    q.col_axpy(j, t, &k);
                    clean &= m.get(t, j).is_zero();
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(m.get(i, j) % &pivot).is_zero()));
            match bad {
                Some(i) => {
                    let minus_one = -BigInt::one();
                    m.row_axpy(t, i, &minus_one);
                }
                None => break,
            }
        }
        if m.get(t, t).is_negative() {
            let v = -m.get(t, t);
            m.set(t, t, v);
        }
    }
    SmithForm { diagonal: (0..n).map(|i| m.get(i, i).clone()).collect(), col_transform: q }
}

/// Number of solutions of `A x = 0` over `Z/q`: `prod gcd(s_i, q)`, with `q`
/// for every zero divisor and every column beyond the row count.
pub fn kernel_count_mod(s: &SmithForm, cols: usize, q: u64) -> BigUint {
    let qb = BigInt::from(q);
    let mut count = BigUint::one();
    for i in 0..cols {
        let g = match s.diagonal.get(i) {
            Some(v) if !v.is_zero() => v.gcd(&qb),
            _ => qb.clone(),
        };
        count *= g.to_biguint().expect("gcd is positive");
    }
    count
}

/// Explicit parametrization of `ker(A mod q)`: `x = Q y` with
/// `y_i = k_i * step_i`, `0 <= k_i < choices_i`.
#[derive(Clone, Debug)]
pub struct KernelParam {
    pub q: u64,
    q_mod: Vec<u64>,
    pub steps: Vec<u64>,
    pub choices: Vec<u64>,
    n: usize,
}

impl KernelParam {
    pub fn new(a: &IntMatrix, q: u64) -> KernelParam {
        let s = smith(a);
        let n = a.cols;
        let qb = BigInt::from(q);
        let mut steps = Vec::with_capacity(n);
        let mut choices = Vec::with_capacity(n);
        for i in 0..n {
            let g = match s.diagonal.get(i) {
                Some(v) if !v.is_zero() => v.gcd(&qb).to_u64().expect("gcd fits"),
                _ => q,
            };
            steps.push(q / g);
            choices.push(g);
        }
        let q_mod = (0..n * n).map(|k| s.col_transform.data[k].mod_floor(&qb).to_u64().expect("reduced entry fits")).collect();
        KernelParam { q, q_mod, steps, choices, n }
    }

    pub fn count(&self) -> BigUint {
        self.choices.iter().fold(BigUint::one(), |acc, &g| acc * g)
    }

    pub fn point(&self, digits: &[u64]) -> Vec<u64> {
        let y: Vec<u64> = digits.iter().zip(&self.steps).map(|(k, s)| k * s % self.q).collect();
        (0..self.n)
            .map(|i| {
                let mut acc: u128 = 0;
                for (j, &yj) in y.iter().enumerate() {
                    if yj != 0 {
                        acc += self.q_mod[i * self.n + j] as u128 * yj as u128;
                    }
                }
                (acc % self.q as u128) as u64
            })
            .collect()
    }

    /// Uniform sample from the kernel.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<u64> {
        let digits: Vec<u64> = self.choices.iter().map(|&g| rng.gen_range(0..g)).collect();
        self.point(&digits)
    }

    /// All kernel points (caller checks `count()` against a budget first).
    pub fn enumerate(&self) -> Vec<Vec<u64>> {
        let total = self.count().to_usize().expect("kernel too large to enumerate");
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0u64; self.n];
        for _ in 0..total {
            out.push(self.point(&digits));
            for (k, &g) in digits.iter_mut().zip(&self.choices) {
                *k += 1;
                if *k < g {
                    break;
                }
                *k = 0;
            }
        }
        out
    }
}
