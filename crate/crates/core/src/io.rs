//! Structured output (versioned JSON) and text fixtures for initial values.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::poly::format_rational;
use crate::arith::Rational;
use crate::boundary::{BoundaryIntegral, RecursionNode};
use crate::epsexpand::{EpsExpansion, SeriesInX};
use crate::error::{Error, Result};
use crate::hyperterm::{Bound, HyperTerm, IntVar, Mode};
use crate::parse::{parse_poly, parse_ratfunc};
use crate::telescope::{Ansatz, Annihilator, Stats};
use crate::verify::QuadratureResult;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub order: usize,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarJson {
    pub name: String,
    pub lower: String,
    pub upper: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryJson {
    pub sign: i32,
    /// Parameter-only divisor of the integral.
    pub den: String,
    pub integrand: String,
    pub vars: Vec<VarJson>,
    /// Parent integration variable and the end it was evaluated at.
    pub var: String,
    pub end: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    pub integrand: String,
    pub vars: Vec<VarJson>,
    pub operator: Option<String>,
    pub telescoper: Vec<CoeffJson>,
    pub rhs: Vec<BoundaryJson>,
    pub children: Vec<TreeJson>,
    pub base_value: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub eps_order: i64,
    pub start: i64,
    pub coeffs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionJson {
    pub t: i64,
    pub u: i64,
    pub validity: usize,
    /// Power series in the parameter (continuous) or value tables from
    /// `n = start` (discrete).
    pub entries: Vec<SeriesJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsJson {
    pub tried: Vec<(usize, usize)>,
    pub prechecks: usize,
    pub precheck_hits: usize,
    pub solves: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyJson {
    pub points: Vec<String>,
    pub eps: String,
    pub residual: f64,
    /// Residual with `e_0` increased by one.
    pub perturbed_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadJson {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: String,
    pub evaluations: u64,
}

impl From<&QuadratureResult> for QuadJson {
    fn from(q: &QuadratureResult) -> Self {
        let method = match q.method {
            crate::verify::Method::Adaptive => "adaptive",
            crate::verify::Method::MonteCarlo => "monte_carlo",
        };
        QuadJson { value: q.value, abs_error_estimate: q.abs_error_estimate, method: method.into(), evaluations: q.evaluations }
    }
}

/// The structured output document. Timings are deliberately absent so that
/// identical input gives identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema: u32,
    pub command: String,
    pub mode: String,
    pub param: String,
    pub integrand: String,
    pub vars: Vec<VarJson>,
    pub ansatz: Option<String>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub operator: Option<String>,
    pub telescoper: Vec<CoeffJson>,
    pub certificate: Vec<String>,
    pub homogeneous: Option<bool>,
    pub rhs: Vec<BoundaryJson>,
    /// Why the boundary terms could not be evaluated, when they could not.
    pub boundary_error: Option<String>,
    pub tree: Option<TreeJson>,
    pub expansion: Option<ExpansionJson>,
    pub verify: Option<VerifyJson>,
    pub quadrature: Option<QuadJson>,
    pub stats: Option<StatsJson>,
}

impl Document {
    pub fn new(command: &str, term: &HyperTerm) -> Self {
        Document {
            schema: SCHEMA,
            command: command.into(),
            mode: term.mode.name().into(),
            param: term.param.clone(),
            integrand: term.to_string(),
            vars: vars_json(&term.intvars),
            ansatz: None,
            l: None,
            operator: None,
            telescoper: Vec::new(),
            certificate: Vec::new(),
            homogeneous: None,
            rhs: Vec::new(),
            boundary_error: None,
            tree: None,
            expansion: None,
            verify: None,
            quadrature: None,
            stats: None,
        }
    }

    pub fn with_annihilator(mut self, ann: &Annihilator) -> Self {
        self.ansatz = Some(ann.ansatz.name().into());
        self.l = Some(ann.l);
        self.operator = Some(ann.operator_text());
        self.telescoper = coeffs_json(ann);
        self.certificate = ann.certificate.iter().map(|r| r.to_string()).collect();
        self
    }

    pub fn with_boundary(mut self, rhs: Result<Vec<BoundaryIntegral>>, term: &HyperTerm) -> Result<Self> {
        match rhs {
            Ok(b) => {
                self.homogeneous = Some(b.is_empty());
                self.rhs = b.iter().map(|b| boundary_json(b, term)).collect();
            }
            Err(e @ Error::UnboundedBoundaryTerm(_)) => self.boundary_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        Ok(self)
    }

    pub fn with_stats(mut self, s: &Stats) -> Self {
        self.stats = Some(StatsJson {
            tried: s.tried.clone(),
            prechecks: s.prechecks,
            precheck_hits: s.precheck_hits,
            solves: s.solves,
            rejected: s.rejected,
        });
        self
    }

    pub fn with_tree(mut self, tree: &RecursionNode) -> Self {
        if let Some(a) = &tree.annihilator {
            self = self.with_annihilator(a);
        }
        self.homogeneous = Some(tree.homogeneous());
        self.rhs = tree.rhs.iter().map(|b| boundary_json(b, &tree.integral)).collect();
        self.tree = Some(tree_json(tree));
        self
    }

    pub fn with_expansion(mut self, e: &EpsExpansion) -> Self {
        self.expansion = Some(ExpansionJson {
            t: e.t,
            u: e.u(),
            validity: e.validity,
            entries: e
                .entries
                .iter()
                .enumerate()
                .map(|(i, s)| SeriesJson {
                    eps_order: e.t + i as i64,
                    start: s.start,
                    coeffs: s.coeffs.iter().map(format_rational).collect(),
                })
                .collect(),
        });
        self
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("bad document: {}", e)))
    }

    /// Reads the annihilator back, for the given term.
    pub fn annihilator(&self, term: &HyperTerm) -> Result<Annihilator> {
        let l = self.l.ok_or_else(|| Error::Input("document has no annihilator".into()))?;
        let cv = term.coeff_vars();
        let mut e = vec![crate::arith::MultiPoly::zero(&cv); l + 1];
        for c in &self.telescoper {
            if c.order > l {
                return Err(Error::Input(format!("telescoper order {} above L = {}", c.order, l)));
            }
            e[c.order] = parse_poly(&c.coeff, &cv)?;
        }
        let certificate =
            self.certificate.iter().map(|t| parse_ratfunc(t, term.vars())).collect::<Result<Vec<_>>>()?;
        let ansatz = match self.ansatz.as_deref() {
            Some("boundary_vanishing") => Ansatz::BoundaryVanishing,
            _ => Ansatz::Plain,
        };
        Ok(Annihilator { l, e, certificate, ansatz, mode: term.mode, param: term.param.clone() })
    }
}

fn bound_text(b: &Bound) -> String {
    b.to_string()
}

fn vars_json(iv: &[IntVar]) -> Vec<VarJson> {
    iv.iter()
        .map(|v| VarJson { name: v.name.clone(), lower: bound_text(&v.lower), upper: bound_text(&v.upper) })
        .collect()
}

fn coeffs_json(ann: &Annihilator) -> Vec<CoeffJson> {
    ann.e
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_zero())
        .map(|(i, e)| CoeffJson { order: i, coeff: e.to_string() })
        .collect()
}

fn boundary_json(b: &BoundaryIntegral, parent: &HyperTerm) -> BoundaryJson {
    BoundaryJson {
        sign: b.sign,
        den: b.den.to_string(),
        integrand: b.term.to_string(),
        vars: vars_json(&b.term.intvars),
        var: parent.intvars[b.origin.0].name.clone(),
        end: b.origin.1.name().into(),
    }
}

fn tree_json(n: &RecursionNode) -> TreeJson {
    TreeJson {
        integrand: n.integral.to_string(),
        vars: vars_json(&n.integral.intvars),
        operator: n.annihilator.as_ref().map(|a| a.operator_text()),
        telescoper: n.annihilator.as_ref().map(coeffs_json).unwrap_or_default(),
        rhs: n.rhs.iter().map(|b| boundary_json(b, &n.integral)).collect(),
        children: n.children.iter().map(tree_json).collect(),
        base_value: n.base_value.as_ref().map(|b| b.to_string()),
    }
}

pub fn parse_rational(text: &str) -> Result<Rational> {
    Rational::from_str(text.trim()).map_err(|_| Error::Parse { pos: 0, msg: format!("not a rational: {:?}", text) })
}

pub fn parse_bound(text: &str) -> Result<Bound> {
    match text.trim() {
        "inf" | "+inf" | "oo" => Ok(Bound::PosInf),
        "-inf" | "-oo" => Ok(Bound::NegInf),
        t => parse_rational(t).map(Bound::Finite),
    }
}

/// Initial series, one per line: `eps_order s c_s c_{s+1} …` with exact
/// rationals `p/q`. Blank lines and `#` comments are ignored.
pub fn parse_init(text: &str) -> Result<BTreeMap<i64, SeriesInX>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse { pos: lineno + 1, msg: format!("init line {}: {}", lineno + 1, msg) };
        let mut it = line.split_whitespace();
        let k: i64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("expected an integer eps order"))?;
        let s: i64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("expected an integer start"))?;
        let coeffs = it.map(parse_rational).collect::<Result<Vec<_>>>().map_err(|e| bad(&e.to_string()))?;
        if coeffs.is_empty() {
            return Err(bad("no coefficients"));
        }
        if out.insert(k, SeriesInX::new(s, coeffs)).is_some() {
            return Err(bad("eps order given twice"));
        }
    }
    Ok(out)
}

/// Text form accepted by [`parse_init`].
pub fn format_init(init: &BTreeMap<i64, SeriesInX>) -> String {
    let mut out = String::new();
    for (k, s) in init {
        let cs: Vec<String> = s.coeffs.iter().map(format_rational).collect();
        out.push_str(&format!("{} {} {}\n", k, s.start, cs.join(" ")));
    }
    out
}

pub fn mode_from_name(name: &str) -> Result<Mode> {
    match name {
        "discrete" => Ok(Mode::Discrete),
        "continuous" => Ok(Mode::Continuous),
        other => Err(Error::Input(format!("unknown mode {:?}", other))),
    }
}
