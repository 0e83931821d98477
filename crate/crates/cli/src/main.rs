use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fairlens::counterfactual::{
    corrected_descendant, fair_predict, unfair_out_edges, FairPredictOptions, Outcome, Sampling,
    UnfairEdges,
};
use fairlens::dataset::{load_csv, Bindings, Dataset};
use fairlens::dsl::{parse_spec, serialize_spec, ScenarioSpec};
use fairlens::effects::{
    ade, aie, ate, backdoor_effect, ett, nci, observed_gap, pse, AieVariant, EffectEstimate,
    Estimator, PathInterventionSpec, Source, DEFAULT_MC_SAMPLES,
};
use fairlens::error::{Category, Error};
use fairlens::graph::{
    audit_paths, d_separated, minimal_adjustment_sets, recommend_criteria, satisfies_backdoor,
};
use fairlens::metrics::{
    calibration_check, demographic_parity, dp_gap_curve, error_rate_parity, predictive_parity,
    GroupedCounts,
};
use fairlens::parallel::{set_strategy, Strategy};
use fairlens::presets::{builtins, preset};
use fairlens::report::{build_report, ReportInput, ReportOptions};
use fairlens::scm::{least_squares_predictor, Record, StructuralModel};

#[derive(Parser)]
#[command(
    name = "fairlens",
    version,
    about = "Causal fairness analysis of labeled Bayesian networks"
)]
struct Cli {
    /// Worker threads for Monte-Carlo loops (1 runs sequentially).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print JSON instead of text tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the paths from the sensitive node and recommend group criteria.
    Audit { spec: String },
    /// Draw records from the scenario's model.
    Sample {
        spec: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a causal effect of the sensitive node on the outcome.
    Effects(EffectsArgs),
    /// Counterfactual outcome or corrected descendant for one record.
    Counterfactual(CounterfactualArgs),
    /// Group fairness metrics from data or a rate fixture.
    Metrics(MetricsArgs),
    /// Write a JSON report covering every applicable analysis.
    Report(ReportArgs),
    /// Test whether two node sets are d-separated given a third.
    Dsep {
        spec: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// List minimal back-door adjustment sets.
    Adjust {
        spec: String,
        /// Largest set size to search (defaults to 3, capped by the graph)
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Population least-squares linear predictor of a node.
    Predictor {
        spec: String,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<String>,
    },
    /// List the built-in scenarios.
    Presets,
    /// Print a scenario in canonical form.
    Show { spec: String },
}

#[derive(Args, Clone, Copy)]
struct SeedArg {
    /// Random seed.
    #[arg(long, env = "FAIRLENS_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ate,
    Ade,
    Aie,
    Pse,
    Ett,
    Nci,
    Backdoor,
    ObservedGap,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Closed,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Baseline,
    Active,
}

#[derive(Args)]
struct EffectsArgs {
    spec: String,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Outgoing edges of the sensitive node that carry the active value.
    #[arg(long, value_delimiter = ',')]
    active_edges: Vec<String>,
    /// Back-door adjustment set (defaults to the first minimal set).
    #[arg(long, value_delimiter = ',')]
    adjust: Option<Vec<String>>,
    /// Skip the back-door criterion check.
    #[arg(long)]
    no_verify: bool,
    /// Data for back-door or observed-gap estimates.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "closed")]
    method: MethodArg,
    /// Which direct/indirect decomposition term to hold fixed.
    #[arg(long, value_enum, default_value = "baseline")]
    variant: Variant,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    abar: f64,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    n: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct CounterfactualArgs {
    spec: String,
    /// Row index (0-based) of `--data`, or of a sample drawn with `--seed`.
    #[arg(long, conflicts_with = "values")]
    record: Option<usize>,
    /// Observed values, e.g. `A=1,Q=2.5,D=4`.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<String>>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Factual and baseline value of the sensitive node, e.g. `1:0`.
    #[arg(long)]
    flip: Option<String>,
    /// Unfair outgoing edges of the sensitive node (defaults to the labels).
    #[arg(long, value_delimiter = ',')]
    unfair_edges: Option<Vec<String>>,
    /// Report the corrected value of this descendant instead of the outcome.
    #[arg(long)]
    corrected: Option<String>,
    /// Keep the record's outcome value when abducting the noise.
    #[arg(long)]
    include_outcome: bool,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, required_unless_present = "preset")]
    data: Option<PathBuf>,
    /// Use the aggregate counts of a built-in scenario.
    #[arg(long, conflicts_with = "data")]
    preset: Option<String>,
    #[arg(long, requires = "data")]
    group: Option<String>,
    #[arg(long, requires = "data")]
    label: Option<String>,
    #[arg(long, conflicts_with = "score")]
    pred: Option<String>,
    #[arg(long)]
    score: Option<String>,
    #[arg(long, requires = "score", allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Ascending thresholds for a positive-rate curve.
    #[arg(
        long,
        value_delimiter = ',',
        requires = "score",
        allow_negative_numbers = true
    )]
    curve: Option<Vec<f64>>,
    /// Calibration table with this many equal-width score bins.
    #[arg(long, requires = "score")]
    bins: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    spec: String,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    pred: Option<String>,
    #[arg(long)]
    score: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[command(flatten)]
    seed: SeedArg,
}

enum Failure {
    Usage(String),
    Io(String),
    Lib(Error),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Lib(e.into())
    }
}

impl Failure {
    fn report(&self) -> (u8, Value) {
        let (code, kind, category, message) = match self {
            Failure::Usage(m) => (2, "usage", "usage", m.clone()),
            Failure::Io(m) => (3, "io", "validation", m.clone()),
            Failure::Lib(e) => match e.category() {
                Category::Validation => (3, e.kind(), "validation", e.to_string()),
                Category::Numeric => (4, e.kind(), "numeric", e.to_string()),
            },
        };
        let body = json!({ "error": { "kind": kind, "category": category, "message": message } });
        (code, body)
    }
}

type CmdResult = Result<(), Failure>;

struct Scenario {
    text: String,
    spec: ScenarioSpec,
    counts: Option<GroupedCounts>,
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{arg}: {e}")))?;
        let spec = parse_spec(&text)?;
        return Ok(Scenario {
            text,
            spec,
            counts: None,
        });
    }
    match preset(arg) {
        Some(p) => Ok(Scenario {
            text: p.source.to_string(),
            spec: p.spec(),
            counts: p.counts,
        }),
        None => Err(Failure::Io(format!(
            "`{arg}` is neither a file nor a built-in scenario"
        ))),
    }
}

fn model(s: &Scenario) -> Result<&StructuralModel, Failure> {
    s.spec.model.as_ref().ok_or_else(|| {
        Error::Invalid(format!("scenario `{}` has no mechanisms", s.spec.name)).into()
    })
}

/// Numbers right-aligned, everything else left-aligned.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 || c.parse::<f64>().is_err() {
                    format!("{c:<w$}", w = width[k])
                } else {
                    format!("{c:>w$}", w = width[k])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&line(
        width
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    ));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

// A closed pipe (e.g. `| head`) ends output quietly instead of panicking.
fn write_out(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .is_err()
    {
        std::process::exit(0);
    }
}

fn emit(json: bool, value: Value, text: String) {
    if json {
        write_out(&format!(
            "{}\n",
            serde_json::to_string_pretty(&value).expect("json")
        ));
    } else {
        write_out(&text);
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn audit(cli: &Cli, spec: &str) -> CmdResult {
    let s = load_scenario(spec)?;
    let report = audit_paths(&s.spec.graph)?;
    let rec = recommend_criteria(&report);
    let rows: Vec<Vec<String>> = report
        .outcome_paths()
        .map(|p| {
            vec![
                p.path.clone(),
                p.kind.as_str().to_string(),
                p.fairness.to_string(),
                if p.problematic { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let causal = report.causal_outcome_paths().count();
    let mut text = format!(
        "paths from {} to {}: {} ({} causal)\n\n",
        report.sensitive,
        report.outcome,
        rows.len(),
        causal
    );
    text.push_str(&table(&["path", "kind", "fairness", "problematic"], &rows));
    text.push('\n');
    text.push_str(&table(
        &["criterion", "verdict"],
        &[
            vec![
                "demographic parity".into(),
                rec.demographic_parity.as_str().into(),
            ],
            vec![
                "equal error rates".into(),
                rec.error_rate_parity.as_str().into(),
            ],
            vec!["calibration".into(), rec.calibration.as_str().into()],
        ],
    ));
    for r in &rec.rationale {
        text.push_str(&format!("  {r}\n"));
    }
    emit(
        cli.json,
        json!({ "audit": to_value(&report), "recommendation": to_value(&rec) }),
        text,
    );
    Ok(())
}

fn sample(spec: &str, n: usize, seed: u64, out: Option<&PathBuf>) -> CmdResult {
    let s = load_scenario(spec)?;
    let data = model(&s)?.sample(n, seed)?;
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            data.write_csv(std::io::BufWriter::new(file))?;
            eprintln!("wrote {} rows to {}", data.len(), path.display());
        }
        None => write_out(&data.to_csv_string()),
    }
    Ok(())
}

fn parse_edges(
    g: &fairlens::graph::CausalGraph,
    list: &[String],
) -> Result<BTreeSet<String>, Failure> {
    let a = g
        .sensitive()
        .ok_or(fairlens::graph::GraphError::RolesUnset)?;
    let mut out = BTreeSet::new();
    for item in list {
        let Some((p, c)) = item.split_once("->") else {
            return Err(Failure::Usage(format!(
                "edge `{item}` is not of the form P->C"
            )));
        };
        let (p, c) = (p.trim(), c.trim());
        if p != a {
            return Err(Failure::Usage(format!(
                "edge `{item}` does not leave the sensitive node `{a}`"
            )));
        }
        if !g.has_edge(p, c) {
            return Err(Error::Invalid(format!("the graph has no edge {p} -> {c}")).into());
        }
        out.insert(c.to_string());
    }
    Ok(out)
}

fn load_data(path: &PathBuf) -> Result<(Vec<u8>, Dataset), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let data = Dataset::read_csv(bytes.as_slice())?;
    Ok((bytes, data))
}

fn effects(cli: &Cli, args: &EffectsArgs) -> CmdResult {
    let s = load_scenario(&args.spec)?;
    let g = &s.spec.graph;
    let est = match args.method {
        MethodArg::Closed => Estimator::ClosedForm,
        MethodArg::Mc => Estimator::MonteCarlo {
            n: args.n,
            seed: args.seed.seed,
        },
    };
    let (a, abar) = (args.a, args.abar);
    let data = args.data.as_ref().map(load_data).transpose()?;
    let source = || -> Result<Source<'_>, Failure> {
        Ok(match &data {
            Some((_, d)) => Source::Data(g, d),
            None => Source::Model(model(&s)?, est),
        })
    };
    let mut adjustment = None;
    let (label, e): (&str, EffectEstimate) = match args.kind {
        Kind::Ate => ("ATE", ate(model(&s)?, a, abar, est)?),
        Kind::Ade => (
            "ADE",
            ade(
                model(&s)?,
                a,
                abar,
                matches!(args.variant, Variant::Active),
                est,
            )?,
        ),
        Kind::Aie => {
            let v = match args.variant {
                Variant::Baseline => AieVariant::BaselineDirect,
                Variant::Active => AieVariant::ActiveDirect,
            };
            ("AIE", aie(model(&s)?, a, abar, v, est)?)
        }
        Kind::Pse => {
            if args.active_edges.is_empty() {
                return Err(Failure::Usage("--kind pse needs --active-edges".into()));
            }
            let active = parse_edges(g, &args.active_edges)?;
            (
                "PSE",
                pse(model(&s)?, &PathInterventionSpec::new(abar, a, active), est)?,
            )
        }
        Kind::Ett => ("ETT", ett(model(&s)?, a, abar, est)?),
        Kind::Nci => ("NCI", nci(model(&s)?, a, abar, est)?),
        Kind::ObservedGap => ("observed gap", observed_gap(source()?, a, abar)?),
        Kind::Backdoor => {
            let set: BTreeSet<String> = match &args.adjust {
                Some(list) => list.iter().map(|x| x.trim().to_string()).collect(),
                None => {
                    let (sa, sy) = (
                        g.sensitive()
                            .ok_or(fairlens::graph::GraphError::RolesUnset)?,
                        g.outcome().ok_or(fairlens::graph::GraphError::RolesUnset)?,
                    );
                    minimal_adjustment_sets(g, sa, sy, 3.min(g.len() - 2))?
                        .into_iter()
                        .next()
                        .ok_or_else(|| Error::Invalid("no adjustment set of size <= 3".into()))?
                }
            };
            let e = backdoor_effect(source()?, a, abar, &set, !args.no_verify)?;
            adjustment = Some(set);
            ("back-door effect", e)
        }
    };
    let mut rows = vec![
        vec!["quantity".into(), label.to_string()],
        vec!["value".into(), num(e.value)],
        vec![
            "method".into(),
            match e.method {
                fairlens::effects::Method::ClosedForm => "closed form",
                fairlens::effects::Method::MonteCarlo => "monte carlo",
            }
            .into(),
        ],
    ];
    if let Some(se) = e.std_error {
        rows.push(vec!["std error".into(), num(se)]);
        rows.push(vec![
            "samples".into(),
            e.n_samples.unwrap_or_default().to_string(),
        ]);
        rows.push(vec!["seed".into(), e.seed.unwrap_or_default().to_string()]);
    }
    if let Some(set) = &adjustment {
        rows.push(vec![
            "adjustment".into(),
            format!("{{{}}}", set.iter().cloned().collect::<Vec<_>>().join(", ")),
        ]);
        rows.push(vec!["verified".into(), e.verified.to_string()]);
    }
    let text = table(&["field", "value"], &rows);
    emit(
        cli.json,
        json!({ "quantity": label, "active": a, "baseline": abar, "adjustment": adjustment, "estimate": to_value(&e) }),
        text,
    );
    Ok(())
}

fn parse_values(list: &[String]) -> Result<Record, Failure> {
    list.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("`{kv}` is not of the form NAME=VALUE")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn counterfactual(cli: &Cli, args: &CounterfactualArgs) -> CmdResult {
    let s = load_scenario(&args.spec)?;
    let m = model(&s)?;
    let g = m.graph();
    let sensitive = g
        .sensitive()
        .ok_or(fairlens::graph::GraphError::RolesUnset)?;
    let record: Record = match (&args.values, args.record) {
        (Some(list), _) => parse_values(list)?,
        (None, Some(k)) => match &args.data {
            Some(path) => load_csv(path, None, &[])?.record(k)?,
            None => m.sample(k + 1, args.seed.seed)?.record(k)?,
        },
        (None, None) => return Err(Failure::Usage("give --record or --values".into())),
    };
    let factual = *record
        .get(sensitive)
        .ok_or_else(|| Error::Invalid(format!("record has no value for `{sensitive}`")))?;
    let baseline = match &args.flip {
        Some(f) => {
            let (from, to) = f
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("--flip `{f}` is not of the form a:abar")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("`{x}` is not a number")))
            };
            let (from, to) = (parse(from)?, parse(to)?);
            if from != factual {
                return Err(Error::Invalid(format!(
                    "--flip starts at {from} but the record has {sensitive} = {factual}"
                ))
                .into());
            }
            Some(to)
        }
        None => None,
    };
    let sampling = Sampling {
        n_samples: args.n,
        seed: args.seed.seed,
    };
    let unfair = match &args.unfair_edges {
        Some(list) => parse_edges(g, list)?,
        None => unfair_out_edges(g)?,
    };
    let (target, out): (String, Outcome) = match &args.corrected {
        Some(node) => {
            let abar = baseline.unwrap_or(1.0 - factual);
            let children = g
                .children_idx(g.index_of(sensitive)?)
                .iter()
                .map(|&c| g.name(c).to_string());
            let active: Vec<String> = children.filter(|c| !unfair.contains(c)).collect();
            let spec = PathInterventionSpec::new(abar, factual, active);
            let mut observed = record.clone();
            if !args.include_outcome {
                if let Some(y) = g.outcome() {
                    observed.remove(y);
                }
            }
            (
                node.clone(),
                corrected_descendant(m, &observed, node, &spec, sampling)?,
            )
        }
        None => {
            let options = FairPredictOptions {
                baseline,
                include_outcome: args.include_outcome,
                sampling,
            };
            let y = g
                .outcome()
                .ok_or(fairlens::graph::GraphError::RolesUnset)?
                .to_string();
            (
                y,
                fair_predict(m, &record, &UnfairEdges::Explicit(unfair.clone()), options)?,
            )
        }
    };
    let mut rows = vec![
        vec!["target".into(), target.clone()],
        vec![
            "unfair edges".into(),
            unfair
                .iter()
                .map(|c| format!("{sensitive}->{c}"))
                .collect::<Vec<_>>()
                .join(", "),
        ],
    ];
    if let Some(v) = record.get(&target) {
        rows.push(vec!["factual".into(), num(*v)]);
    }
    rows.push(vec!["counterfactual mean".into(), num(out.mean)]);
    rows.push(vec!["std error".into(), num(out.std_error)]);
    rows.push(vec!["exact".into(), out.exact.to_string()]);
    if out.n_samples > 0 {
        rows.push(vec!["samples".into(), out.n_samples.to_string()]);
    }
    let text = table(&["field", "value"], &rows);
    emit(
        cli.json,
        json!({ "target": target, "record": record, "unfair_edges": unfair, "outcome": to_value(&out) }),
        text,
    );
    Ok(())
}

fn counts_table(c: &GroupedCounts) -> Result<(Value, String), Failure> {
    let dp = demographic_parity(c)?;
    let er = error_rate_parity(c);
    let pp = predictive_parity(c);
    let mut rows = vec![vec![
        "positive rate".into(),
        num(dp.group0),
        num(dp.group1),
        num(dp.gap),
    ]];
    if let Ok(er) = &er {
        rows.push(vec![
            "false positive rate".into(),
            num(er.fpr.group0),
            num(er.fpr.group1),
            num(er.fpr.gap),
        ]);
        rows.push(vec![
            "false negative rate".into(),
            num(er.fnr.group0),
            num(er.fnr.group1),
            num(er.fnr.gap),
        ]);
    }
    if let Ok(pp) = &pp {
        rows.push(vec![
            "positive predictive value".into(),
            num(pp.group0),
            num(pp.group1),
            num(pp.gap),
        ]);
    }
    let base = |k: usize| c.groups[k].base_rate();
    rows.push(vec![
        "base rate".into(),
        opt(base(0)),
        opt(base(1)),
        "-".into(),
    ]);
    let value = json!({
        "counts": to_value(c),
        "demographic_parity": to_value(&dp),
        "error_rates": er.as_ref().ok().map(to_value),
        "predictive_parity": pp.as_ref().ok().map(to_value),
    });
    Ok((
        value,
        table(&["metric", "group 0", "group 1", "gap"], &rows),
    ))
}

fn metrics(cli: &Cli, args: &MetricsArgs) -> CmdResult {
    if let Some(name) = &args.preset {
        let p = preset(name)
            .ok_or_else(|| Failure::Io(format!("unknown built-in scenario `{name}`")))?;
        let counts = p
            .counts
            .ok_or_else(|| Error::Invalid(format!("scenario `{}` ships no counts", p.name)))?;
        let (value, text) = counts_table(&counts)?;
        emit(cli.json, value, text);
        return Ok(());
    }
    let path = args.data.as_ref().expect("clap requires data or preset");
    let (Some(group), Some(label)) = (&args.group, &args.label) else {
        return Err(Failure::Usage("--data needs --group and --label".into()));
    };
    let bindings = Bindings {
        group: group.clone(),
        label: label.clone(),
        prediction: args.pred.clone(),
        score: args.score.clone(),
        threshold: args.threshold,
    };
    let data = load_csv(path, Some(&bindings), &[])?;
    let g = data.column(group)?;
    if let Some(thresholds) = &args.curve {
        let scores = data.column(args.score.as_deref().expect("clap requires score"))?;
        let split = |k: f64| {
            scores
                .iter()
                .zip(&g)
                .filter(|(_, &gv)| gv == k)
                .map(|(s, _)| *s)
                .collect::<Vec<_>>()
        };
        let curve = dp_gap_curve(&split(0.0), &split(1.0), thresholds)?;
        let rows: Vec<Vec<String>> = curve
            .iter()
            .map(|p| {
                vec![
                    num(p.threshold),
                    num(p.rates.group0),
                    num(p.rates.group1),
                    num(p.rates.gap),
                ]
            })
            .collect();
        emit(
            cli.json,
            to_value(&curve),
            table(&["threshold", "group 0", "group 1", "gap"], &rows),
        );
        return Ok(());
    }
    if let Some(bins) = args.bins {
        let scores = data.column(args.score.as_deref().expect("clap requires score"))?;
        let cal = calibration_check(&g, &data.column(label)?, &scores, bins)?;
        let rows: Vec<Vec<String>> = cal
            .bins
            .iter()
            .map(|b| {
                vec![
                    format!("[{}, {})", b.lower, b.upper),
                    b.count[0].to_string(),
                    opt(b.rate[0]),
                    b.count[1].to_string(),
                    opt(b.rate[1]),
                    opt(b.gap),
                ]
            })
            .collect();
        let mut text = table(&["bin", "n0", "rate 0", "n1", "rate 1", "gap"], &rows);
        text.push_str(&format!("max gap: {}\n", opt(cal.max_gap)));
        emit(cli.json, to_value(&cal), text);
        return Ok(());
    }
    if args.pred.is_none() && (args.score.is_none() || args.threshold.is_none()) {
        return Err(Failure::Usage(
            "give --pred, --score with --threshold, --curve or --bins".into(),
        ));
    }
    let counts = data.confusion(&bindings)?;
    let (value, text) = counts_table(&counts)?;
    emit(cli.json, value, text);
    Ok(())
}

fn report(args: &ReportArgs) -> CmdResult {
    let s = load_scenario(&args.spec)?;
    let data = args.data.as_ref().map(load_data).transpose()?;
    let bindings = match (&args.group, &args.label) {
        (Some(g), Some(l)) => Some(Bindings {
            group: g.clone(),
            label: l.clone(),
            prediction: args.pred.clone(),
            score: args.score.clone(),
            threshold: args.threshold,
        }),
        (None, None) => None,
        _ => return Err(Failure::Usage("--group and --label go together".into())),
    };
    let input = ReportInput {
        scenario_text: &s.text,
        spec: &s.spec,
        data: data.as_ref().map(|(b, d)| (b.as_slice(), d)),
        bindings: bindings.as_ref(),
        counts: s.counts,
    };
    let opts = ReportOptions {
        seed: args.seed.seed,
        mc_samples: args.mc_samples,
        ..Default::default()
    };
    let r = build_report(&input, &opts)?;
    std::fs::write(&args.out, r.to_json())
        .map_err(|e| Failure::Io(format!("{}: {e}", args.out.display())))?;
    let rows: Vec<Vec<String>> = r
        .sections
        .effects
        .iter()
        .map(|e| match &e.estimate {
            Some(est) => vec![e.name.to_string(), num(est.value), opt(est.std_error)],
            None => vec![e.name.to_string(), "skipped".into(), "-".into()],
        })
        .collect();
    if !rows.is_empty() {
        write_out(&table(&["effect", "value", "std error"], &rows));
    }
    write_out(&format!("wrote {}\n", args.out.display()));
    Ok(())
}

fn dsep(cli: &Cli, spec: &str, x: &[String], y: &[String], given: &[String]) -> CmdResult {
    let s = load_scenario(spec)?;
    let set = |v: &[String]| {
        v.iter()
            .map(|n| n.trim().to_string())
            .collect::<BTreeSet<_>>()
    };
    let (xs, ys, zs) = (set(x), set(y), set(given));
    let sep = d_separated(&s.spec.graph, &xs, &ys, &zs)?;
    let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
    let text = format!(
        "{{{}}} and {{{}}} are {} given {{{}}}\n",
        join(&xs),
        join(&ys),
        if sep { "d-separated" } else { "d-connected" },
        join(&zs)
    );
    emit(
        cli.json,
        json!({ "x": xs, "y": ys, "given": zs, "d_separated": sep }),
        text,
    );
    Ok(())
}

fn adjust(cli: &Cli, spec: &str, max_size: Option<usize>) -> CmdResult {
    let s = load_scenario(spec)?;
    let g = &s.spec.graph;
    let (a, y) = (
        g.sensitive()
            .ok_or(fairlens::graph::GraphError::RolesUnset)?,
        g.outcome().ok_or(fairlens::graph::GraphError::RolesUnset)?,
    );
    let max_size = max_size.unwrap_or_else(|| 3.min(g.len().saturating_sub(2)));
    let sets = minimal_adjustment_sets(g, a, y, max_size)?;
    let empty_ok = satisfies_backdoor(g, &BTreeSet::new(), a, y)?;
    let rows: Vec<Vec<String>> = sets
        .iter()
        .map(|s| {
            vec![
                format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", ")),
                s.len().to_string(),
            ]
        })
        .collect();
    let mut text = table(&["adjustment set", "size"], &rows);
    if sets.is_empty() {
        text.push_str("no adjustment set within the size limit\n");
    }
    emit(
        cli.json,
        json!({ "sets": sets, "empty_set_valid": empty_ok }),
        text,
    );
    Ok(())
}

fn predictor(cli: &Cli, spec: &str, target: &str, inputs: &[String]) -> CmdResult {
    let s = load_scenario(spec)?;
    let set: BTreeSet<String> = inputs.iter().map(|n| n.trim().to_string()).collect();
    let coef: BTreeMap<String, f64> = least_squares_predictor(model(&s)?, target, &set)?;
    let rows: Vec<Vec<String>> = coef.iter().map(|(k, v)| vec![k.clone(), num(*v)]).collect();
    emit(
        cli.json,
        to_value(&coef),
        table(&["input", "coefficient"], &rows),
    );
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Audit { spec } => audit(cli, spec),
        Command::Sample { spec, n, seed, out } => sample(spec, *n, seed.seed, out.as_ref()),
        Command::Effects(args) => effects(cli, args),
        Command::Counterfactual(args) => counterfactual(cli, args),
        Command::Metrics(args) => metrics(cli, args),
        Command::Report(args) => report(args),
        Command::Dsep { spec, x, y, given } => dsep(cli, spec, x, y, given),
        Command::Adjust { spec, max_size } => adjust(cli, spec, *max_size),
        Command::Predictor {
            spec,
            target,
            inputs,
        } => predictor(cli, spec, target, inputs),
        Command::Presets => {
            let rows: Vec<Vec<String>> = builtins()
                .iter()
                .map(|p| vec![p.name.to_string(), p.description.to_string()])
                .collect();
            emit(
                cli.json,
                json!(builtins().iter().map(|p| p.name).collect::<Vec<_>>()),
                table(&["name", "description"], &rows),
            );
            Ok(())
        }
        Command::Show { spec } => {
            let s = load_scenario(spec)?;
            write_out(&serialize_spec(&s.spec));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.workers {
        Some(0) => {
            let (code, body) = Failure::Usage("--workers must be at least 1".into()).report();
            eprintln!("{body}");
            return ExitCode::from(code);
        }
        Some(1) => set_strategy(Strategy::Sequential),
        Some(n) => {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        None => {}
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, body) = f.report();
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
