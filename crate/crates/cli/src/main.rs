use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use hyperaz_core::boundary::{boundary_terms, divide_and_conquer, RecursionNode};
use hyperaz_core::epsexpand::{expand_integral, expand_with, EpsExpansion, MomentInit, SeriesInX, Strategy};
use hyperaz_core::hyperterm::{HyperTerm, IntVar, Mode};
use hyperaz_core::io::{mode_from_name, parse_bound, parse_init, parse_rational, Document, VerifyJson};
use hyperaz_core::parse::{parse_poly, parse_term};
use hyperaz_core::par;
use hyperaz_core::telescope::{find_telescoper, perturbed, Ansatz, AnsatzConfig};
use hyperaz_core::verify::{check_annihilator_numeric, Assignment, QuadOptions, Rhs};
use hyperaz_core::Error;

/// Creative telescoping for hyperexponential multi-integrals.
#[derive(Parser, Debug)]
#[command(name = "hyperaz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recurrence in n for a discrete integrand (plain ansatz).
    Az(Common),
    /// Differential equation in the parameter (plain ansatz).
    Caz(Common),
    /// Recurrence with a certificate that vanishes at the ends.
    AzDirect(Common),
    /// Differential equation with a certificate that vanishes at the ends.
    CazDirect(Common),
    /// Recurrences down the boundary tree.
    AzIntegrate(Common),
    /// Differential equations down the boundary tree.
    CazIntegrate(Common),
    /// ε-expansion along the boundary tree.
    Expand(Common),
    /// ε-expansion from one homogeneous equation.
    ExpandDirect(Common),
    /// Numeric residual of the computed equation.
    Verify(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AnsatzArg {
    Plain,
    Vanish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Integrand, e.g. `x^n*(1-x)^n` or `exp(-x*t^2)`.
    integrand: Option<String>,
    /// Input document (JSON); flags given on the command line take precedence.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    param: Option<String>,
    /// Integration variable with its range, `name=lower:upper` (`-inf`, `inf` allowed).
    #[arg(long = "var")]
    vars: Vec<String>,
    #[arg(long, value_enum)]
    ansatz: Option<AnsatzArg>,
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long)]
    degmax: Option<usize>,
    /// Extra certificate denominators, one per integration variable (`;`-separated or repeated).
    #[arg(long = "add-factors")]
    add_factors: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// ε orders `t:u`.
    #[arg(long)]
    eps: Option<String>,
    /// Series order in the parameter (or number of table entries).
    #[arg(long)]
    order: Option<usize>,
    /// Initial series file (`eps_order start c_start c_start+1 ...` per line).
    #[arg(long)]
    init: Option<String>,
    /// Parameter values for `verify` (repeated or comma-separated).
    #[arg(long)]
    at: Vec<String>,
    /// Value of ε for `verify`.
    #[arg(long = "ep-value")]
    ep_value: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct InputBound {
    name: String,
    lower: String,
    upper: String,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct InputOptions {
    ansatz: Option<String>,
    #[serde(rename = "L_max")]
    l_max: Option<usize>,
    degree_max: Option<usize>,
    add_factors: Vec<String>,
    seed: Option<u64>,
    eps_range: Option<(i64, i64)>,
    series_order: Option<usize>,
    /// Inline series text, or a path to a file holding it.
    init: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct InputDocument {
    integrand: Option<String>,
    param: Option<String>,
    mode: Option<String>,
    bounds: Vec<InputBound>,
    options: InputOptions,
}

/// A usage problem (exit code 1).
#[derive(Debug)]
struct Usage(String);

enum Failure {
    Usage(Usage),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Input(_) | Error::IndexError { .. } => 1,
        Error::Parse { .. } | Error::NonHyperexponential(_) | Error::DegenerateTerm(_) | Error::NoIntegrationVariables => 2,
        Error::NotFound { .. } => 3,
        Error::UnboundedBoundaryTerm(_) => 4,
        Error::SingularObstruction(_) => 5,
        Error::Numeric(_) | Error::DivergentIntegral(_) => 6,
        Error::UnderdeterminedInit(_) | Error::InconsistentInit(_) | Error::RescaleRequired => 7,
        Error::Arith(_) | Error::AtNode { .. } => 8,
    }
}

/// Everything a command needs, merged from the document and the flags.
struct Job {
    term: HyperTerm,
    cfg: AnsatzConfig,
    eps: (i64, i64),
    order: usize,
    init: Option<BTreeMap<i64, SeriesInX>>,
    at: Vec<String>,
    ep_value: Option<String>,
}

fn default_mode(cmd: &Command) -> Option<Mode> {
    match cmd {
        Command::Az(_) | Command::AzDirect(_) | Command::AzIntegrate(_) => Some(Mode::Discrete),
        Command::Caz(_) | Command::CazDirect(_) | Command::CazIntegrate(_) => Some(Mode::Continuous),
        _ => None,
    }
}

fn default_ansatz(cmd: &Command) -> Ansatz {
    match cmd {
        Command::AzDirect(_) | Command::CazDirect(_) | Command::ExpandDirect(_) => Ansatz::BoundaryVanishing,
        _ => Ansatz::Plain,
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Az(c)
        | Command::Caz(c)
        | Command::AzDirect(c)
        | Command::CazDirect(c)
        | Command::AzIntegrate(c)
        | Command::CazIntegrate(c)
        | Command::Expand(c)
        | Command::ExpandDirect(c)
        | Command::Verify(c) => c,
    }
}

fn parse_var(text: &str) -> Result<(String, String, String), Usage> {
    let bad = || Usage(format!("--var expects name=lower:upper, got {:?}", text));
    let (name, range) = text.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.rsplit_once(':').ok_or_else(bad)?;
    Ok((name.trim().to_string(), lo.trim().to_string(), hi.trim().to_string()))
}

fn parse_eps(text: &str) -> Result<(i64, i64), Usage> {
    let bad = || Usage(format!("--eps expects t:u, got {:?}", text));
    let (t, u) = text.split_once(':').ok_or_else(bad)?;
    Ok((t.trim().parse().map_err(|_| bad())?, u.trim().parse().map_err(|_| bad())?))
}

fn build_job(cmd: &Command) -> Result<Job, Failure> {
    let c = common(cmd);
    let doc: InputDocument = match &c.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {}", path, e)))?;
            serde_json::from_str(&text).map_err(|e| Usage(format!("bad input document {}: {}", path, e)))?
        }
        None => InputDocument::default(),
    };
    let integrand = c
        .integrand
        .clone()
        .or(doc.integrand)
        .ok_or_else(|| Usage("no integrand given".into()))?;
    let mode = match c.mode.as_deref().or(doc.mode.as_deref()) {
        Some(m) => mode_from_name(m)?,
        None => default_mode(cmd).ok_or_else(|| Usage("--mode is required for this command".into()))?,
    };
    if let Some(m) = default_mode(cmd) {
        if m != mode {
            return Err(Usage(format!("this command works in {} mode", m.name())).into());
        }
    }
    let param = c
        .param
        .clone()
        .or(doc.param)
        .unwrap_or_else(|| if mode == Mode::Discrete { "n".into() } else { "x".into() });
    let bounds: Vec<(String, String, String)> = if c.vars.is_empty() {
        doc.bounds.into_iter().map(|b| (b.name, b.lower, b.upper)).collect()
    } else {
        c.vars.iter().map(|v| parse_var(v)).collect::<Result<_, _>>()?
    };
    if bounds.is_empty() {
        return Err(Usage("no integration variables (use --var name=lower:upper)".into()).into());
    }
    let intvars = bounds
        .iter()
        .map(|(n, lo, hi)| Ok(IntVar::new(n, parse_bound(lo)?, parse_bound(hi)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let term = parse_term(&integrand, mode, &param, intvars)?;

    let mut cfg = AnsatzConfig::new(mode);
    cfg.ansatz = match c.ansatz {
        Some(AnsatzArg::Plain) => Ansatz::Plain,
        Some(AnsatzArg::Vanish) => Ansatz::BoundaryVanishing,
        None => match doc.options.ansatz.as_deref() {
            Some("plain") => Ansatz::Plain,
            Some("vanish") | Some("boundary_vanishing") => Ansatz::BoundaryVanishing,
            Some(other) => return Err(Usage(format!("unknown ansatz {:?}", other)).into()),
            None => default_ansatz(cmd),
        },
    };
    if let Some(l) = c.lmax.or(doc.options.l_max) {
        cfg.l_max = l;
    }
    if let Some(d) = c.degmax.or(doc.options.degree_max) {
        cfg.degree_max = d;
    }
    cfg.seed = c.seed.or(doc.options.seed).unwrap_or(0);
    let factors: Vec<String> = if c.add_factors.is_empty() { doc.options.add_factors } else { c.add_factors.clone() };
    let factors: Vec<&str> = factors.iter().flat_map(|f| f.split(';')).map(str::trim).filter(|f| !f.is_empty()).collect();
    if !factors.is_empty() {
        if factors.len() != term.dim() {
            return Err(Usage(format!("{} add-factors for {} integration variables", factors.len(), term.dim())).into());
        }
        cfg.add_factors = factors.iter().map(|f| parse_poly(f, term.vars())).collect::<Result<_, _>>()?;
    }
    let eps = match &c.eps {
        Some(e) => parse_eps(e)?,
        None => doc.options.eps_range.unwrap_or((0, 0)),
    };
    let order = c.order.or(doc.options.series_order).unwrap_or(4);
    let init = match c.init.clone().or(doc.options.init) {
        None => None,
        Some(src) => {
            let text = if std::path::Path::new(&src).exists() {
                fs::read_to_string(&src).map_err(|e| Usage(format!("cannot read {}: {}", src, e)))?
            } else if c.init.is_some() {
                return Err(Usage(format!("init file {} not found", src)).into());
            } else {
                src
            };
            Some(parse_init(&text)?)
        }
    };
    Ok(Job {
        term,
        cfg,
        eps,
        order,
        init,
        at: c.at.iter().flat_map(|a| a.split(',')).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        ep_value: c.ep_value.clone(),
    })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Az(_) => "az",
        Command::Caz(_) => "caz",
        Command::AzDirect(_) => "az-direct",
        Command::CazDirect(_) => "caz-direct",
        Command::AzIntegrate(_) => "az-integrate",
        Command::CazIntegrate(_) => "caz-integrate",
        Command::Expand(_) => "expand",
        Command::ExpandDirect(_) => "expand-direct",
        Command::Verify(_) => "verify",
    }
}

fn tree_text(n: &RecursionNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    if let Some(a) = &n.annihilator {
        out.push_str(&format!("{}operator: {}\n", pad, a));
    }
    if n.rhs.is_empty() && n.annihilator.is_some() {
        out.push_str(&format!("{}rhs: 0\n", pad));
    }
    for (b, c) in n.rhs.iter().zip(&n.children) {
        out.push_str(&format!("{}rhs: {}\n", pad, b));
        if !c.is_base() {
            tree_text(c, depth + 1, out);
        }
    }
}

fn expansion_text(e: &EpsExpansion, param: &str) -> String {
    let mut out = String::new();
    for (i, s) in e.entries.iter().enumerate() {
        let k = e.t + i as i64;
        let body = match e.mode {
            Mode::Continuous => s.to_string().replace('x', param),
            Mode::Discrete => {
                let v: Vec<String> = s
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| format!("{}={}", s.start + j as i64, hyperaz_core::arith::poly::format_rational(c)))
                    .collect();
                format!("{}: {}", param, v.join(", "))
            }
        };
        out.push_str(&format!("ep^{}: {}\n", k, body));
    }
    out
}

fn run(cmd: &Command) -> Result<(Document, String), Failure> {
    let job = build_job(cmd)?;
    let term = &job.term;
    let name = command_name(cmd);
    let mut text = String::new();
    let doc = match cmd {
        Command::Az(_) | Command::Caz(_) | Command::AzDirect(_) | Command::CazDirect(_) => {
            let out = find_telescoper(term, &job.cfg)?;
            let stats = out.stats.clone();
            let ann = out.annihilator()?;
            text.push_str(&format!("telescoper: {}\n", ann));
            for (iv, r) in term.intvars.iter().zip(&ann.certificate) {
                text.push_str(&format!("certificate[{}]: {}\n", iv.name, r));
            }
            let rhs = boundary_terms(term, &ann);
            match &rhs {
                Ok(b) if b.is_empty() => text.push_str("homogeneous: yes\n"),
                Ok(b) => {
                    text.push_str("homogeneous: no\n");
                    for x in b {
                        text.push_str(&format!("rhs: {}\n", x));
                    }
                }
                Err(e) => text.push_str(&format!("boundary: {}\n", e)),
            }
            Document::new(name, term).with_annihilator(&ann).with_boundary(rhs, term)?.with_stats(&stats)
        }
        Command::AzIntegrate(_) | Command::CazIntegrate(_) => {
            let tree = divide_and_conquer(term, &job.cfg, term.dim())?;
            tree_text(&tree, 0, &mut text);
            Document::new(name, term).with_tree(&tree)
        }
        Command::Expand(_) | Command::ExpandDirect(_) => {
            let strategy = if matches!(cmd, Command::Expand(_)) { Strategy::Recursive } else { Strategy::Direct };
            let e = match &job.init {
                Some(init) => expand_integral(term, job.eps, job.order, init, strategy, &job.cfg)?,
                None => expand_with(term, job.eps, job.order, &MomentInit, strategy, &job.cfg)?,
            };
            text.push_str(&expansion_text(&e, &term.param));
            Document::new(name, term).with_expansion(&e)
        }
        Command::Verify(_) => {
            let ann = find_telescoper(term, &job.cfg)?.annihilator()?;
            let rhs = boundary_terms(term, &ann)?;
            let eps = match &job.ep_value {
                Some(v) => parse_rational(v)?,
                None => hyperaz_core::arith::int(0),
            };
            let at: Vec<String> = if job.at.is_empty() {
                match term.mode {
                    Mode::Discrete => vec!["1".into(), "3".into(), "7".into()],
                    Mode::Continuous => vec!["1/2".into(), "1".into(), "2".into()],
                }
            } else {
                job.at.clone()
            };
            let points = at
                .iter()
                .map(|p| Ok(Assignment::new(parse_rational(p)?, eps.clone())))
                .collect::<Result<Vec<_>, Error>>()?;
            let opts = QuadOptions { seed: job.cfg.seed, ..Default::default() };
            let r = check_annihilator_numeric(term, &ann, Rhs::Boundary(&rhs), &points, &opts)?;
            let bad = perturbed(&ann, 0, &hyperaz_core::arith::int(1));
            let rp = check_annihilator_numeric(term, &bad, Rhs::Boundary(&rhs), &points, &opts)?;
            text.push_str(&format!("telescoper: {}\nresidual: {:e}\nperturbed residual: {:e}\n", ann, r, rp));
            let mut doc = Document::new(name, term).with_annihilator(&ann).with_boundary(Ok(rhs), term)?;
            doc.verify = Some(VerifyJson {
                points: at,
                eps: hyperaz_core::arith::poly::format_rational(&eps),
                residual: r,
                perturbed_residual: rp,
            });
            doc
        }
    };
    Ok((doc, text))
}

fn threads() -> Option<usize> {
    std::env::var("HYPERAZ_THREADS").ok().and_then(|v| v.parse().ok()).filter(|n| *n > 0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = common(&cli.command).format;
    match par::with_threads(threads(), || run(&cli.command)) {
        Ok((doc, text)) => {
            if format == Format::Json {
                println!("{}", doc.to_json());
            } else {
                print!("{}", text);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(Usage(msg))) => {
            eprintln!("error: {}", msg);
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
