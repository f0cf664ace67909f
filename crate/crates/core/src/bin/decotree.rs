use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use decotree::basis::{Bounds, GradedBasis};
use decotree::coproduct::coproduct_dual;
use decotree::diff::upsilon;
use decotree::grafting::{graft, raise, raise_all, star};
use decotree::grammar::render_parse_error;
use decotree::renorm::Character;
use decotree::rules::EquationSpec;
use decotree::scalar::fmt_rational;
use decotree::series::{counterterms, formal_character};
use decotree::verify::{default_character, run_suite, Suite, VerifyConfig};
use decotree::{format_vec, parse_label, parse_tree, DecoratedTree, Error, MultiIndex};

const THREADS_VAR: &str = "DECOTREE_THREADS";

/// `println!` that exits quietly when stdout is closed, as under `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("cannot write to stdout: {e}");
        }
    }};
}

#[derive(Parser)]
#[command(name = "decotree", version, about = "Exact computations with decorated trees")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// Built-in equation: gkpz, phi4-like, bck or gpam2d.
    #[arg(long, global = true, default_value = "gkpz")]
    preset: String,
    /// Equation spec file; overrides --preset.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Character file: a JSON object from trees to rationals or symbol names.
    #[arg(long, global = true)]
    character: Option<PathBuf>,
    /// Noise bound for bases; defaults depend on the command.
    #[arg(long, global = true)]
    max_noises: Option<usize>,
    /// Kernel edge bound.
    #[arg(long, global = true)]
    max_edges: Option<usize>,
    /// Bound on the total node decoration.
    #[arg(long, global = true)]
    max_deco: Option<u32>,
    /// Bound on each edge's derivative order.
    #[arg(long, global = true)]
    max_deriv: Option<u32>,
    /// Also write the result as JSON to this file ("-" for stdout).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate one operation on trees given in the tree grammar.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// List every tree within the bounds.
    Basis {
        /// Only trees conforming with the equation's rule and degree cutoff.
        #[arg(long)]
        conforming: bool,
    },
    /// List the conforming trees of negative degree.
    Negatives {
        /// Equation spec file, as an alternative to --spec.
        file: Option<PathBuf>,
    },
    /// Print the coproduct of a tree, left factors first.
    Coproduct { tree: String },
    /// Counterterm table of a character.
    Counterterms {
        /// Equation spec file, as an alternative to --spec.
        file: Option<PathBuf>,
        /// One formal symbol per negative tree.
        #[arg(long)]
        formal: bool,
        /// Component, numbered from 1.
        #[arg(long, default_value_t = 1)]
        component: usize,
    },
    /// Run a verification suite.
    Verify {
        /// all, star, prelie, prep, morphism, series or faa.
        suite: String,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// sigma ⋆ tau
    Star { sigma: String, tau: String },
    /// sigma grafted onto tau along an edge label such as "I[t1,(0,1)]".
    Graft { sigma: String, label: String, tau: String },
    /// Raise the decorations of tau by k, e.g. "(1,0)", over all nodes or the
    /// given preorder node indices.
    Raise {
        tau: String,
        k: String,
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<usize>>,
    },
    /// The elementary differential of a tree.
    Upsilon {
        tree: String,
        #[arg(long, default_value_t = 1)]
        component: usize,
    },
}

enum Failure {
    Usage(String),
    /// Some identity failed; the report is still written.
    Identity(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let (code, value) = match run(&cli) {
        Ok(v) => (0, Some(v)),
        Err(Failure::Identity(v)) => (1, Some(v)),
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            (2, None)
        }
    };
    if let (Some(path), Some(v)) = (&cli.opts.json, &value) {
        let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
        if path.as_os_str() == "-" {
            out!("{text}");
        } else if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}

fn load_spec(opts: &Opts, file: Option<&PathBuf>) -> Result<EquationSpec, Failure> {
    match file.or(opts.spec.as_ref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(EquationSpec::from_json(&text)?)
        }
        None => Ok(EquationSpec::preset(&opts.preset)?),
    }
}

fn load_character(opts: &Opts, spec: &EquationSpec) -> Result<Option<Character>, Failure> {
    let Some(path) = &opts.character else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let negs = spec.negative_basis()?;
    Ok(Some(Character::from_json(&text, spec.signature(), negs.trees())?))
}

fn bounds(opts: &Opts, base: Bounds) -> Bounds {
    Bounds::new(
        opts.max_noises.unwrap_or(base.max_noises),
        opts.max_edges.unwrap_or(base.max_edges),
        opts.max_deco.unwrap_or(base.max_deco),
        opts.max_deriv.unwrap_or(base.max_deriv),
    )
}

fn tree(input: &str, spec: &EquationSpec) -> Result<DecoratedTree, Failure> {
    parse_tree(input, spec.signature()).map_err(|e| Failure::Usage(render_parse_error(input, &e)))
}

fn component(spec: &EquationSpec, i: usize) -> Result<usize, Failure> {
    if i == 0 || i > spec.components().len() {
        return Err(Failure::Usage(format!("component {i} out of range 1..={}", spec.components().len())));
    }
    Ok(i - 1)
}

fn run(cli: &Cli) -> Outcome {
    let opts = &cli.opts;
    match &cli.cmd {
        Cmd::Eval(e) => eval(opts, e),
        Cmd::Basis { conforming } => basis(opts, *conforming),
        Cmd::Negatives { file } => negatives(opts, file.as_ref()),
        Cmd::Coproduct { tree: t } => coproduct(opts, t),
        Cmd::Counterterms { file, formal, component: c } => counterterm_table(opts, file.as_ref(), *formal, *c),
        Cmd::Verify { suite } => verify(opts, suite),
    }
}

fn eval(opts: &Opts, cmd: &EvalCmd) -> Outcome {
    let spec = load_spec(opts, None)?;
    let sig = spec.signature();
    let v = match cmd {
        EvalCmd::Star { sigma, tau } => star(&tree(sigma, &spec)?, &tree(tau, &spec)?),
        EvalCmd::Graft { sigma, label, tau } => {
            let inner = label.trim().strip_prefix("I[").and_then(|l| l.strip_suffix(']')).unwrap_or(label);
            let a = parse_label(inner, sig).map_err(|e| Failure::Usage(render_parse_error(inner, &e)))?;
            graft(&tree(sigma, &spec)?, &a, &tree(tau, &spec)?)?
        }
        EvalCmd::Raise { tau, k, nodes } => {
            let t = tree(tau, &spec)?;
            let k = parse_multi_index(k, sig.dimension())?;
            match nodes {
                Some(ns) => {
                    if let Some(&bad) = ns.iter().find(|&&n| n >= t.node_count()) {
                        return Err(Failure::Usage(format!(
                            "node {bad} out of range, tree has {} nodes",
                            t.node_count()
                        )));
                    }
                    raise(&t, ns, &k)
                }
                None => raise_all(&t, &k),
            }
        }
        EvalCmd::Upsilon { tree: t, component: c } => {
            let i = component(&spec, *c)?;
            let f = upsilon(spec.nonlinearity(), i, &tree(t, &spec)?);
            out!("{}", f.to_text(sig));
            return Ok(f.to_json(sig));
        }
    };
    let text = format_vec(&v, sig);
    out!("{text}");
    Ok(json!(text))
}

fn parse_multi_index(text: &str, dim: usize) -> Result<MultiIndex, Failure> {
    let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Result<Vec<u32>, _> = inner.split(',').map(|c| c.trim().parse()).collect();
    match parts {
        Ok(p) if p.len() == dim => Ok(MultiIndex::from_slice(&p)),
        _ => Err(Failure::Usage(format!("expected a multi-index with {dim} entries, got {text:?}"))),
    }
}

fn tree_rows(trees: &[DecoratedTree], spec: &EquationSpec) -> Value {
    let sig = spec.signature();
    let mut rows = Vec::new();
    for t in trees {
        let deg = fmt_rational(&t.degree(sig));
        let s = fmt_rational(&t.symmetry_factor());
        let text = t.to_text(sig);
        out!("{deg}\t{s}\t{text}");
        rows.push(json!({ "tree": text, "degree": deg, "symmetry": s }));
    }
    Value::Array(rows)
}

fn basis(opts: &Opts, conforming: bool) -> Outcome {
    let spec = load_spec(opts, None)?;
    let b = if conforming {
        let gen = spec.generate_conforming()?;
        let b = bounds(opts, *gen.bounds());
        gen.filter(|t| b.contains(t))
    } else {
        let base = Bounds::new(2, 2, 0, 0);
        GradedBasis::enumerate(spec.signature(), bounds(opts, base))?
    };
    Ok(tree_rows(b.trees(), &spec))
}

fn negatives(opts: &Opts, file: Option<&PathBuf>) -> Outcome {
    let spec = load_spec(opts, file)?;
    let negs = spec.negative_basis()?;
    Ok(tree_rows(negs.trees(), &spec))
}

fn coproduct(opts: &Opts, input: &str) -> Outcome {
    let spec = load_spec(opts, None)?;
    let sig = spec.signature();
    let delta = coproduct_dual(&tree(input, &spec)?, sig);
    let mut rows = Vec::new();
    for ((l, r), c) in delta.iter() {
        let (l, r) = (l.to_text(sig), r.to_text(sig));
        out!("{c}\t{l}\t{r}");
        rows.push(json!({ "coefficient": c.to_string(), "left": l, "right": r }));
    }
    Ok(Value::Array(rows))
}

fn counterterm_table(opts: &Opts, file: Option<&PathBuf>, formal: bool, c: usize) -> Outcome {
    let spec = load_spec(opts, file)?;
    let sig = spec.signature();
    let i = component(&spec, c)?;
    let ch = match (formal, load_character(opts, &spec)?) {
        (true, Some(_)) => return Err(Failure::Usage("--formal and --character exclude each other".into())),
        (_, None) => formal_character(&spec)?,
        (false, Some(ch)) => ch,
    };
    let ct = counterterms(&spec, &ch, i)?;
    let mut rows = Vec::new();
    for (t, e) in &ct.entries {
        let (t, e) = (t.to_text(sig), e.to_text(sig));
        out!("{t}\t{e}");
        rows.push(json!({ "tree": t, "counterterm": e }));
    }
    out!("total\t{}", ct.total.to_text(sig));
    out!("{}", ct.equivalence);
    out!("{}", ct.noise_free);
    let out = json!({
        "component": spec.components()[i].name,
        "entries": rows,
        "total": ct.total.to_text(sig),
        "drift": ct.drift.to_text(sig),
        "checks": [ct.equivalence, ct.noise_free],
        "noise_terms": ct.noise_terms.iter().map(|(l, d)| json!({ "noise": l, "term": d.to_text(sig) })).collect::<Vec<_>>(),
    });
    if ct.equivalence.passed() {
        Ok(out)
    } else {
        Err(Failure::Identity(out))
    }
}

fn verify(opts: &Opts, name: &str) -> Outcome {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse::<Suite>().map_err(|_| {
            Failure::Usage(format!("unknown suite {name:?}; expected all, star, prelie, prep, morphism, series or faa"))
        })?]
    };
    let spec = load_spec(opts, None)?;
    let character = match load_character(opts, &spec)? {
        Some(c) => c,
        None => default_character(&spec)?,
    };
    let mut reports = Vec::new();
    let mut ok = true;
    for s in suites {
        let cfg = VerifyConfig {
            spec: spec.clone(),
            bounds: bounds(opts, s.default_bounds(&spec)),
            character: character.clone(),
        };
        let rep = run_suite(s, &cfg)?;
        out!("{rep}");
        ok &= rep.passed();
        reports.push(rep.to_json());
    }
    let out = Value::Array(reports);
    if ok {
        Ok(out)
    } else {
        Err(Failure::Identity(out))
    }
}
