//! Gaussian elimination over the field of expressions, plus a numeric rank.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::kernel::{factor_poly, gcd, is_zero_on, Domain, Expr, Poly, ZeroVerdict};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("cannot decide whether pivot candidate `{0}` vanishes")]
    Undecidable(String),
}

/// Reduced row echelon form together with the pivot decisions taken.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub rows: Vec<Vec<Expr>>,
    pub pivots: Vec<usize>,
    /// Pivot entries that are nonzero generically but not certified on the
    /// domain; the result holds where they do not vanish.
    pub assumptions: Vec<Expr>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

enum PivotChoice {
    Certified(usize),
    Generic(usize),
    None,
}

fn choose_pivot(m: &[Vec<Expr>], from: usize, col: usize, domain: &Domain, seed: u64) -> Result<PivotChoice, LinalgError> {
    let mut generic = None;
    let mut unknown = None;
    for (r, row) in m.iter().enumerate().skip(from) {
        let e = &row[col];
        if e.is_zero() {
            continue;
        }
        if domain.certified_nonzero(e) {
            return Ok(PivotChoice::Certified(r));
        }
        match is_zero_on(e, domain, seed) {
            ZeroVerdict::ProvenZero => {}
            ZeroVerdict::ProvenNonzero(_) => {
                if generic.is_none() {
                    generic = Some(r);
                }
            }
            ZeroVerdict::Unknown => {
                if unknown.is_none() {
                    unknown = Some(e.to_string());
                }
            }
        }
    }
    match (generic, unknown) {
        (Some(r), _) => Ok(PivotChoice::Generic(r)),
        (None, Some(e)) => Err(LinalgError::Undecidable(e)),
        (None, None) => Ok(PivotChoice::None),
    }
}

/// Row-reduce `m`, preferring pivots that are certified nonzero on `domain`.
pub fn rref(m: &[Vec<Expr>], domain: &Domain, seed: u64) -> Result<Echelon, LinalgError> {
    let mut a: Vec<Vec<Expr>> = m.to_vec();
    let ncols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut assumptions = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row >= a.len() {
            break;
        }
        let r = match choose_pivot(&a, row, col, domain, seed)? {
            PivotChoice::Certified(r) => r,
            PivotChoice::Generic(r) => {
                assumptions.push(a[r][col].clone());
                r
            }
            PivotChoice::None => continue,
        };
        a.swap(row, r);
        let p = a[row][col].clone();
        let inv = Expr::one().checked_div(&p).expect("pivot is nonzero");
        for c in col..ncols {
            a[row][c] = &a[row][c] * &inv;
        }
        for i in 0..a.len() {
            if i == row || a[i][col].is_zero() {
                continue;
            }
            let f = a[i][col].clone();
            for c in col..ncols {
                let t = &f * &a[row][c];
                a[i][c] = &a[i][c] - &t;
            }
        }
        pivots.push(col);
        row += 1;
    }
    Ok(Echelon { rows: a, pivots, assumptions })
}

/// Basis of the right null space, one vector per free column.
pub fn null_space(m: &[Vec<Expr>], ncols: usize, domain: &Domain, seed: u64) -> Result<(Vec<Vec<Expr>>, Echelon), LinalgError> {
    let ech = rref(m, domain, seed)?;
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !ech.pivots.contains(c)) {
        let mut v = vec![Expr::zero(); ncols];
        v[free] = Expr::one();
        for (r, &pc) in ech.pivots.iter().enumerate() {
            v[pc] = -&ech.rows[r][free];
        }
        basis.push(v);
    }
    Ok((basis, ech))
}

/// Basis of the left null space `{a : a M = 0}`.
pub fn left_null_space(m: &[Vec<Expr>], nrows: usize, domain: &Domain, seed: u64) -> Result<(Vec<Vec<Expr>>, Echelon), LinalgError> {
    let ncols = m.first().map_or(0, Vec::len);
    let t: Vec<Vec<Expr>> = (0..ncols).map(|c| (0..nrows).map(|r| m[r][c].clone()).collect()).collect();
    null_space(&t, nrows, domain, seed)
}

/// Exact determinant by elimination with exact zero decisions.
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    if n == 2 {
        return &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]);
    }
    let mut a = m.to_vec();
    let mut det = Expr::one();
    for col in 0..n {
        let Some(r) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Expr::zero();
        };
        if r != col {
            a.swap(r, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = &det * &p;
        let inv = Expr::one().checked_div(&p).expect("pivot is nonzero");
        for i in col + 1..n {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] * &inv;
            for c in col..n {
                let t = &f * &a[col][c];
                a[i][c] = &a[i][c] - &t;
            }
        }
    }
    det
}

/// Exact solution of the square system `a x = b`, when `a` is nonsingular.
pub fn solve(a: &[Vec<Expr>], b: &[Expr]) -> Option<Vec<Expr>> {
    let n = a.len();
    let mut m: Vec<Vec<Expr>> = a.iter().zip(b).map(|(r, v)| r.iter().cloned().chain([v.clone()]).collect()).collect();
    for col in 0..n {
        let r = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, r);
        let inv = Expr::one().checked_div(&m[col][col]).ok()?;
        for c in col..=n {
            m[col][c] = &m[col][c] * &inv;
        }
        for i in 0..n {
            if i != col && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for c in col..=n {
                    let t = &f * &m[col][c];
                    m[i][c] = &m[i][c] - &t;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}

/// Multiply a vector by a common denominator and strip the gcd of the
/// numerators, leaving coprime polynomial entries with a positive leading
/// entry.
pub fn clear_denominators(v: &[Expr]) -> Vec<Expr> {
    let mut lcm = Poly::one();
    for e in v {
        if e.is_zero() || e.is_polynomial() {
            continue;
        }
        let g = gcd(&lcm, e.denom());
        lcm = lcm.mul(&e.denom().div_exact(&g).expect("gcd divides"));
    }
    let scaled: Vec<Poly> = v
        .iter()
        .map(|e| {
            if e.is_zero() {
                Poly::zero()
            } else {
                let f = lcm.div_exact(e.denom()).expect("lcm is a multiple");
                e.numer().mul(&f).reduce_trig()
            }
        })
        .collect();
    let mut g = Poly::zero();
    for p in &scaled {
        if !p.is_zero() {
            g = gcd(&g, p);
            if g.is_one() {
                break;
            }
        }
    }
    if g.is_zero() {
        return v.to_vec();
    }
    let mut out: Vec<Poly> = scaled.iter().map(|p| p.div_exact(&g).expect("gcd divides")).collect();
    strip_trig_content(&mut out);
    if let Some(u) = unit_of(&out) {
        out = out.iter().map(|p| p.scale(&u)).collect();
    }
    out.into_iter().map(Expr::from_poly).collect()
}

/// Remove common factors visible only modulo `sin^2 + cos^2 = 1`: each
/// non-constant free-ring factor of an entry is tried as a divisor of all.
fn strip_trig_content(v: &mut [Poly]) {
    if !v.iter().any(|p| p.symbols().iter().any(|s| s.is_trig())) {
        return;
    }
    let mut tried: Vec<Poly> = Vec::new();
    'outer: loop {
        for p in v.iter() {
            let Ok(fac) = factor_poly(p) else { continue };
            for (f, _) in fac.factors {
                if f.is_constant() || tried.contains(&f) {
                    continue;
                }
                let q: Option<Vec<Poly>> = v.iter().map(|e| e.div_exact_trig(&f)).collect();
                match q {
                    Some(q) => {
                        v.clone_from_slice(&q);
                        continue 'outer;
                    }
                    None => tried.push(f),
                }
            }
        }
        break;
    }
}

/// Rational scaling making coefficients coprime integers with the first
/// nonzero entry's leading coefficient positive.
fn unit_of(v: &[Poly]) -> Option<num_rational::BigRational> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::{One, Signed, Zero};
    let mut den_lcm = BigInt::one();
    let mut num_gcd = BigInt::zero();
    for p in v {
        for (_, c) in p.terms() {
            den_lcm = den_lcm.lcm(c.denom());
        }
    }
    for p in v {
        for (_, c) in p.terms() {
            let scaled = (c * num_rational::BigRational::from_integer(den_lcm.clone())).to_integer();
            num_gcd = num_gcd.gcd(&scaled);
        }
    }
    if num_gcd.is_zero() {
        return None;
    }
    let first = v.iter().find(|p| !p.is_zero())?;
    let mut u = num_rational::BigRational::new(den_lcm, num_gcd);
    if first.leading_coeff().is_negative() {
        u = -u;
    }
    Some(u)
}

/// Number of singular values above `tol`.
pub fn numeric_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
    m.singular_values().iter().filter(|s| **s > tol).count()
}

/// Greedy choice of rows that are independent (numerically) at one point.
pub fn independent_rows(rows: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..rows.len() {
        let mut trial: Vec<Vec<f64>> = chosen.iter().map(|&k| rows[k].clone()).collect();
        trial.push(rows[i].clone());
        if numeric_rank(&trial, tol) == trial.len() {
            chosen.push(i);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, SymbolTable};

    fn t() -> SymbolTable {
        SymbolTable::new(&["x", "y", "z"], &[])
    }

    fn e(s: &str) -> Expr {
        parse_expr(s, &t()).unwrap()
    }

    #[test]
    fn null_space_of_first_example_fields() {
        let m = vec![vec![e("1"), e("y"), e("0")], vec![e("0"), e("1"), e("x*z")]];
        let dom = Domain { states: t().states, ..Default::default() };
        let (ns, ech) = null_space(&m, 3, &dom, 1).unwrap();
        assert_eq!(ech.rank(), 2);
        assert_eq!(ns.len(), 1);
        let v = clear_denominators(&ns[0]);
        assert_eq!(v, vec![e("x*y*z"), e("-x*z"), e("1")]);
    }

    #[test]
    fn determinant_matches_cofactor() {
        let m = vec![
            vec![e("x"), e("1"), e("0")],
            vec![e("y"), e("z"), e("1")],
            vec![e("1"), e("0"), e("x")],
        ];
        // x(zx - 0) - 1(yx - 1) + 0
        assert_eq!(determinant(&m), e("x^2*z - x*y + 1"));
    }

    #[test]
    fn numeric_rank_detects_dependence() {
        assert_eq!(numeric_rank(&[vec![1.0, 2.0], vec![2.0, 4.0]], 1e-8), 1);
        assert_eq!(independent_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]], 1e-8), vec![0, 2]);
    }
}
