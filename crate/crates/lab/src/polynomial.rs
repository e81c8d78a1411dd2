//! Parser for polynomial potentials written as sums of monomials.
//!
//! `0.5*x^2 - 3*x*y + t^2`. Heisenberg coordinates are `x, y, t`. Euclidean
//! coordinates are `x1 … xn`, with `x, y, z` accepted as aliases for `n ≤ 3`.

use sublap_core::group::GroupKind;
use sublap_core::weight::{Monomial, Polynomial};

use crate::error::LabError;

fn variable_index(name: &str, kind: GroupKind) -> Option<usize> {
    match kind {
        GroupKind::Heisenberg1 => ["x", "y", "t"].iter().position(|v| *v == name),
        GroupKind::Euclidean { n } => {
            if let Some(rest) = name.strip_prefix('x') {
                if let Ok(i) = rest.parse::<usize>() {
                    return (1..=n).contains(&i).then(|| i - 1);
                }
            }
            if n <= 3 {
                ["x", "y", "z"][..n].iter().position(|v| *v == name)
            } else {
                None
            }
        }
    }
}

fn err(text: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("cannot parse polynomial {text:?}: {msg}"))
}

pub fn parse_polynomial(text: &str, kind: GroupKind) -> Result<Polynomial, LabError> {
    let dim = match kind {
        GroupKind::Heisenberg1 => 3,
        GroupKind::Euclidean { n } => n,
    };
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(err(text, "empty expression"));
    }
    // Split into signed terms, keeping the sign of an exponent-free `e`-notation number intact.
    let mut terms: Vec<(f64, String)> = Vec::new();
    let mut sign = 1.0;
    let mut current = String::new();
    let chars: Vec<char> = compact.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let exponent_sign = i > 0 && matches!(chars[i - 1], 'e' | 'E') && i > 1 && chars[i - 2].is_ascii_digit();
        if (c == '+' || c == '-') && !exponent_sign {
            if !current.is_empty() {
                terms.push((sign, std::mem::take(&mut current)));
                sign = 1.0;
            } else if i > 0 && !matches!(chars[i - 1], '+' | '-') {
                return Err(err(text, "dangling operator"));
            }
            if c == '-' {
                sign = -sign;
            }
        } else {
            current.push(c);
        }
    }
    if current.is_empty() {
        return Err(err(text, "trailing operator"));
    }
    terms.push((sign, current));

    let mut monomials = Vec::with_capacity(terms.len());
    for (sign, term) in terms {
        let mut coefficient = sign;
        let mut powers = vec![0u32; dim];
        for factor in term.split('*') {
            if factor.is_empty() {
                return Err(err(text, "empty factor"));
            }
            let (base, exp) = match factor.split_once('^') {
                Some((b, e)) => (
                    b,
                    e.parse::<u32>().map_err(|_| err(text, format!("bad exponent {e:?}")))?,
                ),
                None => (factor, 1),
            };
            if let Ok(c) = base.parse::<f64>() {
                if !c.is_finite() {
                    return Err(err(text, "non-finite coefficient"));
                }
                coefficient *= c.powi(exp as i32);
            } else if let Some(i) = variable_index(base, kind) {
                powers[i] += exp;
            } else {
                return Err(err(text, format!("unknown variable {base:?}")));
            }
        }
        monomials.push(Monomial { coefficient, powers });
    }
    Ok(Polynomial::new(dim, monomials)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_heisenberg_terms() {
        let p = parse_polynomial("0.5*x^2 - 3*x*y + t^2 + 1e-2", GroupKind::Heisenberg1).unwrap();
        let t = p.terms();
        assert_eq!(t.len(), 4);
        assert_eq!(t[1].coefficient, -3.0);
        assert_eq!(t[1].powers, vec![1, 1, 0]);
        assert_eq!(t[3].powers, vec![0, 0, 0]);
        assert_eq!(t[3].coefficient, 0.01);
    }

    #[test]
    fn euclidean_aliases_and_indices() {
        let k = GroupKind::Euclidean { n: 2 };
        let a = parse_polynomial("x^2/1", k);
        assert!(a.is_err());
        let p = parse_polynomial("x1^2 + 2*y", k).unwrap();
        assert_eq!(p.terms()[0].powers, vec![2, 0]);
        assert_eq!(p.terms()[1].powers, vec![0, 1]);
        assert!(parse_polynomial("z", k).is_err());
        assert!(parse_polynomial("x +", k).is_err());
        assert!(parse_polynomial("--x", k).is_ok());
    }
}
