use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `[lo, hi]` with `lo < e < hi`, from `Σ_{k≤terms} 1/k!` and the tail bound
/// `1/(terms!·terms)`.
pub fn e_interval(terms: u32) -> (Q, Q) {
    let terms = terms.max(2);
    let mut sum = Q::zero();
    let mut fact = BigInt::one();
    for k in 0..=terms {
        if k > 0 {
            fact *= k;
        }
        sum += Q::new(BigInt::one(), fact.clone());
    }
    let tail = Q::new(BigInt::one(), fact * terms);
    let hi = &sum + tail;
    (sum, hi)
}

/// Certified comparison of `x` with `1/e`: `Some(true)` if `x > 1/e`,
/// `Some(false)` if `x < 1/e`, `None` if the interval cannot decide.
pub fn exceeds_inv_e(x: &Q, e: &(Q, Q)) -> Option<bool> {
    let (lo, hi) = e;
    if x * lo > Q::one() {
        Some(true)
    } else if x * hi < Q::one() {
        Some(false)
    } else {
        None
    }
}

/// Certified `x >= 1/e` with a tightening interval. Exact ties are impossible
/// because `e` is irrational.
pub fn at_least_inv_e(x: &Q) -> bool {
    for terms in [30, 60, 120, 240] {
        if let Some(v) = exceeds_inv_e(x, &e_interval(terms)) {
            return v;
        }
    }
    panic!("cannot separate {x} from 1/e");
}

/// Solves `A X = B` for a square `A` and several right-hand sides by
/// Gauss-Jordan elimination. `None` if `A` is singular.
#[allow(clippy::needless_range_loop)]
pub fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Vec<Q>>) -> Option<Vec<Vec<Q>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut().skip(col) {
            *v *= &inv;
        }
        for v in b[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..n {
                let d = &factor * &a[col][c];
                a[r][c] -= d;
            }
            for c in 0..b[r].len() {
                let d = &factor * &b[col][c];
                b[r][c] -= d;
            }
        }
    }
    Some(b)
}
