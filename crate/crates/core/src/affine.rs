//! Sparse affine functions over a column space.

use alloc::vec::Vec;

/// `sum(coef * z[col]) + constant`, with `terms` sorted by column and free of
/// duplicate columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn column(col: usize) -> Self {
        Affine { terms: alloc::vec![(col, 1.0)], constant: 0.0 }
    }

    pub fn term(col: usize, coef: f64) -> Self {
        let mut a = Affine::zero();
        a.add_term(col, coef);
        a
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, col: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => self.terms.insert(pos, (col, coef)),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Affine, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        if self.terms.is_empty() {
            self.terms = other.terms.iter().map(|&(c, v)| (c, v * scale)).collect();
            self.terms.retain(|&(_, v)| v != 0.0);
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let next = match (self.terms.get(i), other.terms.get(j)) {
                (Some(&(ca, va)), Some(&(cb, vb))) => {
                    if ca == cb {
                        i += 1;
                        j += 1;
                        (ca, va + scale * vb)
                    } else if ca < cb {
                        i += 1;
                        (ca, va)
                    } else {
                        j += 1;
                        (cb, scale * vb)
                    }
                }
                (Some(&t), None) => {
                    i += 1;
                    t
                }
                (None, Some(&(cb, vb))) => {
                    j += 1;
                    (cb, scale * vb)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                merged.push(next);
            }
        }
        self.terms = merged;
    }

    pub fn scaled(&self, s: f64) -> Affine {
        if s == 0.0 {
            return Affine::zero();
        }
        Affine {
            terms: self.terms.iter().map(|&(c, v)| (c, v * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn neg(&self) -> Affine {
        self.scaled(-1.0)
    }

    pub fn plus(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn minus(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn coef(&self, col: usize) -> f64 {
        match self.terms.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => self.terms[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(c, v)| acc + v * z[c])
    }

    /// Renumber columns through `map`; the map must be injective.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Affine {
        let mut terms: Vec<(usize, f64)> = self.terms.iter().map(|&(c, v)| (map(c), v)).collect();
        terms.sort_by_key(|&(c, _)| c);
        Affine { terms, constant: self.constant }
    }

    pub fn max_column(&self) -> Option<usize> {
        self.terms.last().map(|&(c, _)| c)
    }
}

/// Sum of `coefs[i] * items[i]`.
pub fn combination<'a>(items: impl IntoIterator<Item = (&'a Affine, f64)>) -> Affine {
    let mut out = Affine::zero();
    for (a, s) in items {
        out.add_scaled(a, s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_cancels_terms() {
        let mut a = Affine::term(3, 2.0);
        a.add_term(1, 1.0);
        let b = Affine::term(3, 1.0);
        a.add_scaled(&b, -2.0);
        assert_eq!(a.terms, alloc::vec![(1, 1.0)]);
    }

    #[test]
    fn eval_and_remap() {
        let mut a = Affine::constant(1.0);
        a.add_term(0, 2.0);
        a.add_term(2, -1.0);
        assert_eq!(a.eval(&[1.0, 5.0, 3.0]), 0.0);
        let r = a.remap(|c| 10 - c);
        assert_eq!(r.terms, alloc::vec![(8, -1.0), (10, 2.0)]);
    }
}
