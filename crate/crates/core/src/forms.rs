//! Differential forms over the coordinate coframe, with expression
//! coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{is_zero_on, Domain, Expr, Symbol, ZeroVerdict};
use crate::linalg::determinant;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormsError {
    #[error("pivot determinant `{det}` is not provably nonzero ({verdict})")]
    SingularPivot { det: String, verdict: String },
}

/// Coordinate symbols shared by every form of one system.
pub type Coords = Arc<[Symbol]>;

/// A homogeneous `k`-form: strictly increasing index tuples mapped to
/// nonzero normalized coefficients.
#[derive(Clone, Debug)]
pub struct DifferentialForm {
    coords: Coords,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

/// Sign of the permutation sorting `idx`, or `None` on a repeated index.
fn sort_sign(idx: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

impl DifferentialForm {
    pub fn zero(coords: Coords, degree: usize) -> Self {
        DifferentialForm { coords, degree, terms: BTreeMap::new() }
    }

    pub fn scalar(coords: Coords, e: Expr) -> Self {
        let mut f = DifferentialForm::zero(coords, 0);
        f.add_term(vec![], e);
        f
    }

    /// `sum_i c_i dx_i`.
    pub fn one_form(coords: Coords, coeffs: &[Expr]) -> Self {
        assert_eq!(coeffs.len(), coords.len(), "one-form arity");
        let mut f = DifferentialForm::zero(coords, 1);
        for (i, c) in coeffs.iter().enumerate() {
            f.add_term(vec![i], c.clone());
        }
        f
    }

    /// The coordinate differential `dx_i`.
    pub fn basis(coords: Coords, i: usize) -> Self {
        let mut f = DifferentialForm::zero(coords, 1);
        f.add_term(vec![i], Expr::one());
        f
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, idx: &[usize]) -> Expr {
        self.terms.get(idx).cloned().unwrap_or_else(Expr::zero)
    }

    /// Coefficients of a 1-form as a dense vector.
    pub fn one_form_coeffs(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1, "not a 1-form");
        (0..self.n()).map(|i| self.coefficient(&[i])).collect()
    }

    fn add_term(&mut self, idx: Vec<usize>, c: Expr) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(idx.len(), self.degree);
        match self.terms.get_mut(&idx) {
            Some(v) => {
                let s = &*v + &c;
                if s.is_zero() {
                    self.terms.remove(&idx);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(idx, c);
            }
        }
    }

    pub fn add(&self, other: &DifferentialForm) -> DifferentialForm {
        assert_eq!(self.degree, other.degree, "adding forms of different degree");
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &DifferentialForm) -> DifferentialForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DifferentialForm {
        self.scale(&Expr::int(-1))
    }

    pub fn scale(&self, e: &Expr) -> DifferentialForm {
        let mut out = DifferentialForm::zero(self.coords.clone(), self.degree);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * e);
        }
        out
    }

    /// Graded-antisymmetric product.
    pub fn wedge(&self, other: &DifferentialForm) -> DifferentialForm {
        let degree = self.degree + other.degree;
        let mut out = DifferentialForm::zero(self.coords.clone(), degree);
        if degree > self.n() {
            return out;
        }
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let mut idx: Vec<usize> = ka.iter().chain(kb.iter()).copied().collect();
                if let Some(sign) = sort_sign(&mut idx) {
                    let c = va * vb;
                    out.add_term(idx, if sign < 0 { -c } else { c });
                }
            }
        }
        out
    }

    /// Exterior derivative.
    pub fn d(&self) -> DifferentialForm {
        let mut out = DifferentialForm::zero(self.coords.clone(), self.degree + 1);
        if self.degree + 1 > self.n() {
            return out;
        }
        for (k, v) in &self.terms {
            for (i, sym) in self.coords.iter().enumerate() {
                if k.contains(&i) {
                    continue;
                }
                let dc = v.differentiate(sym).expect("coordinates are state variables");
                if dc.is_zero() {
                    continue;
                }
                let mut idx = Vec::with_capacity(k.len() + 1);
                idx.push(i);
                idx.extend_from_slice(k);
                let sign = sort_sign(&mut idx).expect("index not repeated");
                out.add_term(idx, if sign < 0 { -dc } else { dc });
            }
        }
        out
    }

    /// `sum_i a_i X_i` for a 1-form.
    pub fn contract(&self, x: &VectorField) -> Expr {
        assert_eq!(self.degree, 1, "contraction is defined for 1-forms");
        self.terms.iter().map(|(k, v)| v * &x.0[k[0]]).sum()
    }

    /// `d` of a scalar expression, as a 1-form.
    pub fn exact(coords: Coords, e: &Expr) -> DifferentialForm {
        DifferentialForm::scalar(coords, e.clone()).d()
    }
}

impl PartialEq for DifferentialForm {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.sub(other).is_zero()
    }
}

fn differential_name(coords: &[Symbol], idx: &[usize]) -> String {
    idx.iter().map(|&i| format!("d{}", coords[i].name())).collect::<Vec<_>>().join("∧")
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (idx, c)) in self.terms.iter().enumerate() {
            let single = c.is_polynomial() && c.numer().num_terms() == 1;
            let negative = single && c.numer().leading_coeff() < num_rational::BigRational::from_integer(0.into());
            let c = if negative { -c } else { c.clone() };
            match (k, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let cs = c.to_string();
            let dn = differential_name(&self.coords, idx);
            if idx.is_empty() {
                write!(f, "{cs}")?;
            } else if c.is_one() {
                write!(f, "{dn}")?;
            } else if single {
                write!(f, "{cs} {dn}")?;
            } else {
                write!(f, "({cs}) {dn}")?;
            }
        }
        Ok(())
    }
}

/// A vector field given by its components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField(pub Vec<Expr>);

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Self {
        VectorField(components)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Expr::is_zero)
    }

    /// Directional derivative `X(e)`.
    pub fn apply(&self, coords: &[Symbol], e: &Expr) -> Expr {
        self.0
            .iter()
            .zip(coords)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, s)| c * &e.differentiate(s).expect("state coordinate"))
            .sum()
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::dsl::vector_text(&self.0))
    }
}

/// Substitution `dx_p -> sum_f c_f dx_f` solving `theta = 0` for the pivot
/// differentials. Applying it yields the canonical representative mod `(theta)`.
#[derive(Clone, Debug)]
pub struct Reducer {
    coords: Coords,
    pivots: Vec<usize>,
    /// Image of each coordinate differential: itself for free coordinates.
    images: Vec<DifferentialForm>,
    determinant: Expr,
}

impl Reducer {
    pub fn new(theta: &[DifferentialForm], pivots: &[usize], domain: &Domain, seed: u64) -> Result<Self, FormsError> {
        let coords = theta
            .first()
            .map(|t| t.coords.clone())
            .unwrap_or_else(|| domain.states.clone().into());
        let n = coords.len();
        let s = theta.len();
        assert_eq!(pivots.len(), s, "one pivot per generator");
        let rows: Vec<Vec<Expr>> = theta.iter().map(|t| t.one_form_coeffs()).collect();
        let block: Vec<Vec<Expr>> = rows.iter().map(|r| pivots.iter().map(|&p| r[p].clone()).collect()).collect();
        let det = determinant(&block);
        let verdict = is_zero_on(&det, domain, seed);
        if !matches!(verdict, ZeroVerdict::ProvenNonzero(_)) {
            return Err(FormsError::SingularPivot { det: det.to_string(), verdict: verdict.to_string() });
        }
        // Solve block * X = rows restricted to free columns, by Gauss-Jordan.
        let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        let mut aug: Vec<Vec<Expr>> = rows
            .iter()
            .zip(&block)
            .map(|(r, b)| b.iter().cloned().chain(free.iter().map(|&f| r[f].clone())).collect())
            .collect();
        let width = s + free.len();
        for col in 0..s {
            let r = (col..s).find(|&r| !aug[r][col].is_zero()).expect("nonsingular pivot block");
            aug.swap(col, r);
            let inv = Expr::one().checked_div(&aug[col][col]).expect("nonzero");
            for c in 0..width {
                aug[col][c] = &aug[col][c] * &inv;
            }
            for i in 0..s {
                if i != col && !aug[i][col].is_zero() {
                    let fct = aug[i][col].clone();
                    for c in 0..width {
                        let t = &fct * &aug[col][c];
                        aug[i][c] = &aug[i][c] - &t;
                    }
                }
            }
        }
        let mut images: Vec<DifferentialForm> = (0..n).map(|i| DifferentialForm::basis(coords.clone(), i)).collect();
        for (row, &p) in pivots.iter().enumerate() {
            let mut img = DifferentialForm::zero(coords.clone(), 1);
            for (k, &f) in free.iter().enumerate() {
                img.add_term(vec![f], -&aug[row][s + k]);
            }
            images[p] = img;
        }
        Ok(Reducer { coords, pivots: pivots.to_vec(), images, determinant: det })
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn free(&self) -> Vec<usize> {
        (0..self.coords.len()).filter(|c| !self.pivots.contains(c)).collect()
    }

    /// Determinant of the pivot block; nonzero on the working domain.
    pub fn determinant(&self) -> &Expr {
        &self.determinant
    }

    pub fn reduce(&self, a: &DifferentialForm) -> DifferentialForm {
        let mut out = DifferentialForm::zero(self.coords.clone(), a.degree);
        for (idx, c) in &a.terms {
            if idx.iter().all(|i| !self.pivots.contains(i)) {
                out.add_term(idx.clone(), c.clone());
                continue;
            }
            let mut acc = DifferentialForm::scalar(self.coords.clone(), c.clone());
            for &i in idx {
                acc = acc.wedge(&self.images[i]);
            }
            out = out.add(&acc);
        }
        out
    }
}

/// Canonical representative of `a` modulo the algebraic ideal of `theta`.
pub fn reduce_mod(
    a: &DifferentialForm,
    theta: &[DifferentialForm],
    pivots: &[usize],
    domain: &Domain,
    seed: u64,
) -> Result<DifferentialForm, FormsError> {
    Ok(Reducer::new(theta, pivots, domain, seed)?.reduce(a))
}

pub fn wedge(a: &DifferentialForm, b: &DifferentialForm) -> DifferentialForm {
    a.wedge(b)
}

pub fn d(a: &DifferentialForm) -> DifferentialForm {
    a.d()
}

pub fn contract(a: &DifferentialForm, x: &VectorField) -> Expr {
    a.contract(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, SymbolTable};
    use crate::kernel::Sign;

    fn setup() -> (SymbolTable, Coords) {
        let t = SymbolTable::new(&["x", "y", "z"], &[]);
        let c: Coords = t.states.clone().into();
        (t, c)
    }

    fn one(t: &SymbolTable, c: &Coords, parts: &[&str]) -> DifferentialForm {
        let v: Vec<Expr> = parts.iter().map(|s| parse_expr(s, t).unwrap()).collect();
        DifferentialForm::one_form(c.clone(), &v)
    }

    #[test]
    fn display_uses_subtraction() {
        let (t, c) = setup();
        assert_eq!(one(&t, &c, &["x*y*z", "-x*z", "1"]).to_string(), "x*y*z dx - x*z dy + dz");
        assert_eq!(one(&t, &c, &["-1", "0", "x + 1"]).to_string(), "-dx + (x + 1) dz");
    }

    #[test]
    fn wedge_is_antisymmetric() {
        let (_, c) = setup();
        let dx = DifferentialForm::basis(c.clone(), 0);
        let dy = DifferentialForm::basis(c.clone(), 1);
        assert_eq!(dx.wedge(&dy), dy.wedge(&dx).neg());
        assert!(dx.wedge(&dx).is_zero());
    }

    #[test]
    fn torsion_of_first_example() {
        let (t, c) = setup();
        let theta = one(&t, &c, &["x*y*z", "-x*z", "1"]);
        let dom = Domain { states: t.states.clone(), ..Default::default() };
        let red = reduce_mod(&theta.d(), &[theta.clone()], &[2], &dom, 7).unwrap();
        assert_eq!(red.coefficient(&[0, 1]), parse_expr("-z*(1+x)", &t).unwrap());
        assert_eq!(red.terms().count(), 1);
        assert!(reduce_mod(&theta, &[theta.clone()], &[2], &dom, 7).unwrap().is_zero());
    }

    #[test]
    fn contraction_annihilates_controls() {
        let (t, c) = setup();
        let theta = one(&t, &c, &["x*y*z", "-x*z", "1"]);
        let g1 = VectorField::new(vec![Expr::one(), parse_expr("y", &t).unwrap(), Expr::zero()]);
        assert!(theta.contract(&g1).is_zero());
    }

    #[test]
    fn slanted_plane_second_generator_reduces_to_secant() {
        let t = SymbolTable::new(&["x", "y", "z", "w"], &[("a", Sign::Positive), ("b", Sign::Positive)]);
        let c: Coords = t.states.clone().into();
        let th1 = one(&t, &c, &["b", "0", "-a", "0"]);
        let th2 = one(&t, &c, &["0", "b*cos(w)", "-sin(w)", "0"]);
        let dom = Domain {
            states: t.states.clone(),
            params: t.params.clone(),
            nonzero: vec![parse_expr("cos(w)", &t).unwrap()],
        };
        let red = reduce_mod(&th2.d(), &[th1.clone(), th2.clone()], &[0, 1], &dom, 3).unwrap();
        assert_eq!(red.coefficient(&[2, 3]), parse_expr("1/cos(w)", &t).unwrap());
        assert!(th1.d().is_zero());
    }

    #[test]
    fn singular_pivot_is_rejected() {
        let (t, c) = setup();
        let theta = one(&t, &c, &["0", "1", "0"]);
        let dom = Domain { states: t.states.clone(), ..Default::default() };
        assert!(matches!(
            reduce_mod(&theta, &[theta.clone()], &[0], &dom, 1),
            Err(FormsError::SingularPivot { .. })
        ));
    }
}
