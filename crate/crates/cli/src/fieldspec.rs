//! The `name:params` field mini-language.
//!
//! ```text
//! zero
//! linear:OMEGA
//! twist:C2|C3|...          C2 (I - I0)^2 + C3 (I - I0)^3 + ...
//! lemma1:N,EPS
//! theorem2:BASE,n=N[,k=1|3]
//! ```
//!
//! `linear`, `twist` and `lemma1` may omit their parameters when they are
//! given by the `--omega`, `--c2`/`--c3`, `--n`/`--eps` flags instead.

use std::fmt;
use std::str::FromStr;

use helicity_core::constructor::theorem2_pair;
use helicity_core::fields::{lemma1_extension, linear_rotation, twist_field, zero_field, ActionProfile};
use helicity_core::{Disk, HamiltonianField, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Linear(Option<f64>),
    Twist(Option<Vec<f64>>),
    Lemma1(Option<(i64, f64)>),
    Theorem2 { base: Box<FieldSpec>, n: i64, k: u32 },
}

/// Values of the stand-alone parameter flags.
#[derive(Debug, Clone, Default)]
pub struct Defaults {
    pub omega: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub n: Option<i64>,
    pub eps: Option<f64>,
}

fn number<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("bad {what} `{s}`"))
}

impl FromStr for FieldSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        match (name, params) {
            ("zero", None) => Ok(Self::Zero),
            ("linear", None) => Ok(Self::Linear(None)),
            ("linear", Some(p)) => Ok(Self::Linear(Some(number(p, "rotation rate")?))),
            ("twist", None) => Ok(Self::Twist(None)),
            ("twist", Some(p)) => {
                let cs = p
                    .split('|')
                    .map(|c| number(c, "twist coefficient"))
                    .collect::<std::result::Result<Vec<f64>, _>>()?;
                Ok(Self::Twist(Some(cs)))
            }
            ("lemma1", None) => Ok(Self::Lemma1(None)),
            ("lemma1", Some(p)) => {
                let (n, eps) = p.split_once(',').ok_or_else(|| format!("lemma1 needs `n,eps`, got `{p}`"))?;
                Ok(Self::Lemma1(Some((number(n, "turn count")?, number(eps, "collar width")?))))
            }
            ("theorem2", Some(p)) => parse_theorem2(p),
            ("theorem2", None) => Err("theorem2 needs `BASE,n=N[,k=1|3]`".into()),
            _ => Err(format!("unknown field `{s}` (expected zero, linear, twist, lemma1 or theorem2)")),
        }
    }
}

/// Peels `key=value` options off the end; what is left is the base spec,
/// which may itself contain commas.
fn parse_theorem2(p: &str) -> std::result::Result<FieldSpec, String> {
    let mut parts: Vec<&str> = p.split(',').collect();
    let (mut n, mut k) = (None, 1u32);
    while let Some(last) = parts.last() {
        match last.split_once('=') {
            Some(("n", v)) => n = Some(number(v, "turn count")?),
            Some(("k", v)) => k = number(v, "smoothing order")?,
            Some((key, _)) => return Err(format!("unknown theorem2 option `{key}`")),
            None => break,
        }
        parts.pop();
    }
    if !matches!(k, 1 | 3) {
        return Err(format!("smoothing order must be 1 or 3, got {k}"));
    }
    let n = n.ok_or("theorem2 needs n=N")?;
    let base: FieldSpec = parts.join(",").parse()?;
    Ok(FieldSpec::Theorem2 {
        base: Box::new(base),
        n,
        k,
    })
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Linear(Some(w)) => write!(f, "linear:{w}"),
            Self::Linear(None) => write!(f, "linear"),
            Self::Twist(Some(cs)) => {
                let cs: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "twist:{}", cs.join("|"))
            }
            Self::Twist(None) => write!(f, "twist"),
            Self::Lemma1(Some((n, e))) => write!(f, "lemma1:{n},{e}"),
            Self::Lemma1(None) => write!(f, "lemma1"),
            Self::Theorem2 { base, n, k } => write!(f, "theorem2:{base},n={n},k={k}"),
        }
    }
}

impl FieldSpec {
    /// Fills parameters left out of the spec from the flags.
    pub fn resolve(&self, d: &Defaults) -> std::result::Result<FieldSpec, String> {
        Ok(match self {
            Self::Linear(None) => Self::Linear(Some(d.omega.ok_or("linear needs --omega or linear:OMEGA")?)),
            Self::Twist(None) => {
                if d.c2.is_none() && d.c3.is_none() {
                    return Err("twist needs --c2/--c3 or twist:C2|C3".into());
                }
                Self::Twist(Some(vec![d.c2.unwrap_or(0.0), d.c3.unwrap_or(0.0)]))
            }
            Self::Lemma1(None) => Self::Lemma1(Some((
                d.n.ok_or("lemma1 needs --n or lemma1:N,EPS")?,
                d.eps.ok_or("lemma1 needs --eps or lemma1:N,EPS")?,
            ))),
            Self::Theorem2 { base, n, k } => Self::Theorem2 {
                base: Box::new(base.resolve(d)?),
                n: *n,
                k: *k,
            },
            other => other.clone(),
        })
    }

    /// Builds the field on the disk `I <= i0`. Parameters must be resolved.
    pub fn build(&self, i0: f64) -> Result<HamiltonianField> {
        let disk = Disk::new(i0)?;
        let missing = || helicity_core::Error::InvalidArgument(format!("field `{self}` has unresolved parameters"));
        Ok(match self {
            Self::Zero => zero_field(disk),
            Self::Linear(w) => linear_rotation(w.ok_or_else(missing)?, disk),
            Self::Twist(cs) => {
                let mut coeffs = vec![0.0, 0.0];
                coeffs.extend(cs.as_ref().ok_or_else(missing)?);
                twist_field(ActionProfile::polynomial(i0, coeffs), disk)
            }
            Self::Lemma1(p) => {
                let (n, eps) = p.ok_or_else(missing)?;
                lemma1_extension(n, i0, eps)?
            }
            Self::Theorem2 { base, n, k } => theorem2_pair(&base.build(i0)?, *n, disk, *k)?,
        })
    }
}
