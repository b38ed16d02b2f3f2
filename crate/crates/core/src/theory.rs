//! Extreme-magnitude recursion, its closed-form bounds and the total
//! variation increase bounds built on them.

use crate::error::{MasError, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryParams<T> {
    pub lambda: T,
    pub c: T,
    /// Scale `M` of the uniform increase bound `a_i <= C M`.
    pub m: T,
    /// Increases `a_1, a_2, ...`; missing entries count as zero.
    pub a: Vec<T>,
}

impl<T: Real> TheoryParams<T> {
    pub fn new(lambda: T, c: T, m: T, a: Vec<T>) -> Result<Self> {
        if !(lambda > T::zero() && lambda < T::one()) {
            return Err(MasError::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(MasError::Domain(format!("C must be > 0, got {c}")));
        }
        if !(m > T::zero()) || !m.is_finite() {
            return Err(MasError::Domain(format!("M must be > 0, got {m}")));
        }
        if let Some(i) = a.iter().position(|&ai| !(ai >= T::zero()) || !ai.is_finite()) {
            return Err(MasError::Domain(format!("increase a_{} = {} is negative", i + 1, a[i])));
        }
        Ok(Self { lambda, c, m, a })
    }

    /// All increases at their cap `C M` for `k_max` steps.
    pub fn saturated(lambda: T, c: T, m: T, k_max: usize) -> Result<Self> {
        Self::new(lambda, c, m, vec![c * m; k_max])
    }

    /// `a_k`, 1-based.
    pub fn a_k(&self, k: usize) -> T {
        k.checked_sub(1)
            .and_then(|i| self.a.get(i))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// `lambda + 3 lambda C`.
    pub fn coupling(&self) -> T {
        self.lambda + T::lit(3.0) * self.lambda * self.c
    }

    pub fn is_coupled(&self) -> bool {
        self.coupling() < T::one()
    }

    pub fn check_coupling(&self) -> Result<()> {
        if self.is_coupled() {
            Ok(())
        } else {
            Err(MasError::Coupling(format!(
                "lambda + 3 lambda C = {} >= 1",
                self.coupling()
            )))
        }
    }

    fn check_increases_capped(&self) -> Result<()> {
        let cap = self.c * self.m;
        match self.a.iter().position(|&ai| ai > cap) {
            Some(i) => Err(MasError::Domain(format!(
                "a_{} = {} exceeds C M = {cap}",
                i + 1,
                self.a[i]
            ))),
            None => Ok(()),
        }
    }
}

/// Triangular table `E[m][k]`, `1 <= m <= k <= k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremeTable<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> ExtremeTable<T> {
    pub fn k_max(&self) -> usize {
        self.rows.len()
    }

    /// `E_m^k`; zero when the extreme does not exist yet (`m > k`).
    pub fn get(&self, m: usize, k: usize) -> T {
        assert!(m >= 1 && k >= 1 && k <= self.k_max(), "E[{m}][{k}] outside the table");
        self.rows[k - 1].get(m - 1).copied().unwrap_or_else(T::zero)
    }

    /// `E_1^k, ..., E_k^k`.
    pub fn step(&self, k: usize) -> &[T] {
        &self.rows[k - 1]
    }

    /// `sum_m E_m^k`.
    pub fn step_sum(&self, k: usize) -> T {
        self.rows[k - 1].iter().copied().fold(T::zero(), |s, e| s + e)
    }
}

fn build_table<T: Real>(p: &TheoryParams<T>, k_max: usize, growth: T) -> ExtremeTable<T> {
    let lambda = p.lambda;
    let c = p.c;
    let first_growth = T::one() + T::lit(2.0) * c;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut row = Vec::with_capacity(k);
        let prev = k.checked_sub(2).map(|i| rows[i].as_slice()).unwrap_or(&[]);
        let at = |m: usize| prev.get(m - 1).copied().unwrap_or_else(T::zero);
        row.push(lambda * (first_growth * at(1) + p.a_k(k)));
        for m in 2..=k {
            row.push(lambda * (growth * at(m) + c * at(m - 1)));
        }
        rows.push(row);
    }
    ExtremeTable { rows }
}

/// Literal recursion: `E_1^k = lambda((1 + 2C) E_1^{k-1} + a_k)` and
/// `E_m^k = lambda((1 + C) E_m^{k-1} + C E_{m-1}^{k-1})` for `m > 1`.
pub fn recursion_table<T: Real>(p: &TheoryParams<T>, k_max: usize) -> ExtremeTable<T> {
    build_table(p, k_max, T::one() + p.c)
}

/// The recursion with the growth factor of every extreme raised to `1 + 2C`.
/// It dominates [`recursion_table`] entrywise and is solved exactly by
/// [`closed_form_e`].
pub fn majorant_table<T: Real>(p: &TheoryParams<T>, k_max: usize) -> ExtremeTable<T> {
    build_table(p, k_max, T::one() + T::lit(2.0) * p.c)
}

/// `binom(n, r)` by the multiplicative recurrence.
pub fn binomial<T: Real>(n: usize, r: usize) -> Result<T> {
    if r > n {
        return Ok(T::zero());
    }
    let r = r.min(n - r);
    let mut acc = T::one();
    for t in 1..=r {
        acc = acc * T::from_count(n - r + t) / T::from_count(t);
        if !acc.is_finite() {
            return Err(MasError::Range(format!("binom({n}, {r}) overflows")));
        }
    }
    Ok(acc.round())
}

/// `lambda^m C^{m-1} sum_{l=m-1}^{k-1} binom(l, l-m+1) (lambda(1+2C))^{l-m+1} a_{k-l}`.
pub fn closed_form_e<T: Real>(p: &TheoryParams<T>, m: usize, k: usize) -> Result<T> {
    if m < 1 || m > k {
        return Err(MasError::Domain(format!("closed form needs 1 <= m <= k, got m={m}, k={k}")));
    }
    let q = p.lambda * (T::one() + T::lit(2.0) * p.c);
    let mut sum = T::zero();
    let mut power = T::one();
    for l in (m - 1)..k {
        let j = l + 1 - m;
        sum += binomial::<T>(l, j)? * power * p.a_k(k - l);
        power *= q;
    }
    let prefactor = p.lambda.powi(m as i32) * p.c.powi(m as i32 - 1);
    let out = prefactor * sum;
    if !out.is_finite() {
        return Err(MasError::Range(format!("closed form E[{m}][{k}] overflows")));
    }
    Ok(out)
}

/// `M (lambda C / (1 - lambda - 2 lambda C))^m`.
pub fn uniform_bound<T: Real>(p: &TheoryParams<T>, m: usize) -> Result<T> {
    let denom = T::one() - p.lambda - T::lit(2.0) * p.lambda * p.c;
    if !(denom > T::zero()) {
        return Err(MasError::Domain(format!("lambda + 2 lambda C = {} >= 1", T::one() - denom)));
    }
    p.check_increases_capped()?;
    Ok(p.m * (p.lambda * p.c / denom).powi(m as i32))
}

/// `M (1 - lambda - 2 lambda C) / (1 - lambda - 3 lambda C)`, bounding `sum_m E_m^k`.
pub fn extremes_sum_bound<T: Real>(p: &TheoryParams<T>) -> Result<T> {
    p.check_coupling()?;
    let two = T::lit(2.0) * p.lambda * p.c;
    let three = T::lit(3.0) * p.lambda * p.c;
    Ok(p.m * (T::one() - p.lambda - two) / (T::one() - p.lambda - three))
}

/// `B1 = 2 M (1 - lambda - 2 lambda C) / (1 - lambda - 3 lambda C)`.
pub fn tvi_bound_b1<T: Real>(p: &TheoryParams<T>) -> Result<T> {
    Ok(T::lit(2.0) * extremes_sum_bound(p)?)
}

/// `B2 = 2 lambda C M / (1 - lambda - 3 lambda C)`.
pub fn tvi_bound_b2<T: Real>(p: &TheoryParams<T>) -> Result<T> {
    p.check_coupling()?;
    Ok(T::lit(2.0) * p.lambda * p.c * p.m / (T::one() - p.coupling()))
}

/// `I_{a_m}^k = lambda (lambda + 3 lambda C)^{k-m} a_m`.
pub fn contribution<T: Real>(p: &TheoryParams<T>, m: usize, k: usize) -> Result<T> {
    if m < 1 || m > k {
        return Err(MasError::Domain(format!("contribution needs 1 <= m <= k, got m={m}, k={k}")));
    }
    Ok(p.lambda * p.coupling().powi((k - m) as i32) * p.a_k(m))
}

/// `I_tot^k = sum_{m=1}^k I_{a_m}^k`.
pub fn total_contribution<T: Real>(p: &TheoryParams<T>, k: usize) -> Result<T> {
    (1..=k).try_fold(T::zero(), |s, m| Ok(s + contribution(p, m, k)?))
}

/// `lambda C M (1 - q^k) / (1 - q)` with `q = lambda + 3 lambda C`: the total
/// contribution when every increase equals `C M`.
pub fn saturated_total_contribution<T: Real>(p: &TheoryParams<T>, k: usize) -> Result<T> {
    p.check_coupling()?;
    let q = p.coupling();
    Ok(p.lambda * p.c * p.m * (T::one() - q.powi(k as i32)) / (T::one() - q))
}

/// Total weight with which `a_1` enters the magnitudes of step `k` once
/// every new extreme is resummed: `lambda^k (1 + 3C)^{k-1}`.
pub fn first_increase_share<T: Real>(p: &TheoryParams<T>, k: usize) -> T {
    p.lambda.powi(k as i32) * (T::one() + T::lit(3.0) * p.c).powi(k as i32 - 1)
}
