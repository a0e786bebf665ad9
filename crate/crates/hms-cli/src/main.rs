//! `hms`: command-line front end for Hilbert modular surface invariants.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hms_core::classgroups::{FieldData, GroupVariant};
use hms_core::cusps::{cusp_count, cusp_type, enumerate_cusps, resolve_cusp, summarize, GroupSpec};
use hms_core::dataset::{self, BlowdownFixtures, SweepConfig, TableFixtures};
use hms_core::dimensions::series_record;
use hms_core::elliptic::{elliptic_records, torsion_orders};
use hms_core::field::RealQuadraticField;
use hms_core::ideals::{parse_level, Ideal};
use hms_core::{HmsError, Result};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "hms", version, about = "Exact invariants of Hilbert modular surfaces")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write output to this file instead of stdout (sweep: output directory).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Per-surface time budget in milliseconds.
    #[arg(long, env = "HMS_BUDGET_MS", global = true)]
    budget_ms: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fundamental unit, class groups, ζ_F(−1) and torsion data of a field.
    FieldInfo(FieldArgs),
    /// Cusps of a surface with their resolution cycles.
    Cusps(SurfaceArgs),
    /// Elliptic fixed points by rotation type.
    Elliptic(SurfaceArgs),
    /// Full invariant record of one surface.
    Invariants(InvariantArgs),
    /// Hilbert series of cusp forms for Γ₀(𝔑) and dimensions of S_k.
    HilbertSeries(SeriesArgs),
    /// Sweep a range of fields and levels into JSONL files.
    Sweep(SweepArgs),
    /// Check every invariant of a dataset.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Field discriminant d_F (a squarefree D ≡ 2, 3 mod 4 is also accepted).
    #[arg(long)]
    field: i64,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    /// Field discriminant d_F.
    #[arg(long)]
    field: i64,
    /// Level as "N.a.b" (ideal with Z-basis a, b + (N/a)ω) or "N.i" (ideal number i, from 0, among those of norm N).
    #[arg(long, default_value = "1")]
    level: String,
    /// Index of the component among the narrow class representatives.
    #[arg(long, default_value_t = 0)]
    component: usize,
    /// Group: gamma0, gamma0^1, gamma1 or gamma1^1.
    #[arg(long, default_value = "gamma0", value_parser = parse_variant)]
    variant: GroupVariant,
}

#[derive(Args, Debug)]
struct InvariantArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    /// Blow-down fixture file (defaults to the bundled fixtures).
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    /// Field discriminant d_F.
    #[arg(long)]
    field: i64,
    /// Level as "N.a.b" or "N.i".
    #[arg(long, default_value = "1")]
    level: String,
    /// Largest weight for the tabulated dimensions.
    #[arg(long, default_value_t = 20)]
    max_weight: u32,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Largest field discriminant.
    #[arg(long, default_value_t = 3000)]
    max_df: i64,
    /// Level cutoff C: Nm(𝔑) ≤ ⌈C / d_F^{3/2}⌉.
    #[arg(long, default_value_t = 5000)]
    cutoff: u64,
    /// Comma-separated groups.
    #[arg(long, value_delimiter = ',', default_value = "gamma0,gamma0^1", value_parser = parse_variant)]
    variants: Vec<GroupVariant>,
    /// Comma-separated discriminants restricting the sweep.
    #[arg(long, value_delimiter = ',')]
    discriminants: Vec<i64>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Blow-down fixture file (defaults to the bundled fixtures).
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Dataset directory or JSONL file.
    #[arg(long)]
    dataset: PathBuf,
    /// Blow-down fixture file (defaults to the bundled fixtures).
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

fn parse_variant(s: &str) -> std::result::Result<GroupVariant, String> {
    GroupVariant::parse(s).ok_or_else(|| format!("unknown group '{}' (expected gamma0, gamma0^1, gamma1 or gamma1^1)", s))
}

/// Command output: a JSON value plus its CSV rendering.
struct Output {
    json: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    ok: bool,
}

impl Output {
    fn new(json: Value, header: &[&str], rows: Vec<Vec<String>>) -> Output {
        Output { json, header: header.iter().map(|s| s.to_string()).collect(), rows, ok: true }
    }

    fn key_values(json: Value) -> Output {
        let rows = match &json {
            Value::Object(m) => m.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
            v => vec![vec!["value".into(), cell(v)]],
        };
        Output::new(json, &["key", "value"], rows)
    }

    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(format!("{}\n", serde_json::to_string_pretty(&self.json)?)),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).map_err(csv_err)?;
                for r in &self.rows {
                    w.write_record(r).map_err(csv_err)?;
                }
                let bytes = w.into_inner().map_err(|e| HmsError::Io(e.into_error()))?;
                String::from_utf8(bytes).map_err(|e| HmsError::Integrity(e.to_string()))
            }
        }
    }
}

fn csv_err(e: csv::Error) -> HmsError {
    HmsError::Io(std::io::Error::other(e.to_string()))
}

/// Scalars as plain text, lists joined by spaces, objects as compact JSON.
fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) => a.iter().map(cell).collect::<Vec<_>>().join(" "),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn field_data(disc: i64) -> Result<FieldData> {
    FieldData::from_field(RealQuadraticField::from_disc(disc)?)
}

fn surface(args: &SurfaceArgs) -> Result<(FieldData, Ideal, GroupSpec)> {
    let fd = field_data(args.field)?;
    let n = parse_level(fd.field.d, &args.level)?;
    let reps = fd.classes.narrow_reps(n.norm_u64());
    let b = reps
        .get(args.component)
        .cloned()
        .ok_or_else(|| HmsError::InvalidInput(format!("component {} out of range (h+ = {})", args.component, reps.len())))?;
    let spec = GroupSpec { variant: args.variant, level: n.clone(), component: b };
    Ok((fd, n, spec))
}

fn fixtures(path: &Option<PathBuf>) -> Result<BlowdownFixtures> {
    match path {
        Some(p) => BlowdownFixtures::load(p),
        None => Ok(BlowdownFixtures::bundled()),
    }
}

fn surface_header(fd: &FieldData, n: &Ideal, args: &SurfaceArgs) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("d_f".into(), json!(fd.field.disc));
    m.insert("level".into(), json!(n.level_label()));
    m.insert("level_norm".into(), json!(n.norm_u64()));
    m.insert("component".into(), json!(args.component));
    m.insert("variant".into(), json!(args.variant.name()));
    m
}

fn field_info(args: &FieldArgs) -> Result<Output> {
    let fd = field_data(args.field)?;
    let f = &fd.field;
    let torsion: Vec<Value> = torsion_orders(&fd)
        .iter()
        .map(|t| json!({"q": t.q, "u": t.u.to_string(), "t": t.t.to_string(), "twisted": t.twisted, "cm_field": t.field_index}))
        .collect();
    let cm: Vec<Value> = fd
        .cm
        .fields
        .iter()
        .map(|k| {
            json!({"delta": k.delta.to_string(), "mu": k.mu, "units_mod_r": k.units_mod_r, "hasse_q": k.hasse_q,
                   "h": k.h_zk, "imaginary_subfields": k.imag_subfields})
        })
        .collect();
    let json = json!({
        "d_f": f.disc,
        "D": f.d,
        "eps": f.eps.to_string(),
        "unit_norm": f.unit_norm,
        "eps_plus": f.eps_plus.to_string(),
        "h": fd.classes.h,
        "h_plus": fd.classes.h_plus,
        "class_group": fd.classes.structure,
        "narrow_class_group": fd.classes.plus_structure,
        "zeta_minus_one": f.zeta_minus_one().to_string(),
        "torsion": torsion,
        "cm_fields": cm,
    });
    Ok(Output::key_values(json))
}

fn cusps_cmd(args: &SurfaceArgs) -> Result<Output> {
    let (fd, n, spec) = surface(args)?;
    let cusps = enumerate_cusps(&fd.field, &fd.classes, &spec)?;
    let mut enumerated = 0u64;
    for b in fd.classes.narrow_reps(n.norm_u64()) {
        let other = GroupSpec { variant: args.variant, level: n.clone(), component: b };
        enumerated += enumerate_cusps(&fd.field, &fd.classes, &other)?.len() as u64;
    }
    let expected = cusp_count(&fd.field, &fd.classes, &n, args.variant)?;
    if expected != enumerated {
        return Err(HmsError::Integrity(format!("cusp formula gives {} but enumeration gives {}", expected, enumerated)));
    }
    let mut list = Vec::with_capacity(cusps.len());
    for c in &cusps {
        let t = cusp_type(&fd.field, c, &spec)?;
        let cyc = resolve_cusp(&fd.field, &t)?;
        list.push(summarize(c, &cyc));
    }
    let rows = list
        .iter()
        .map(|s| {
            vec![
                s.a.clone(),
                s.c.clone(),
                s.s_label.clone(),
                s.m_label.clone(),
                s.cycle.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
                s.special.to_string(),
            ]
        })
        .collect();
    let mut m = surface_header(&fd, &n, args);
    m.insert("count".into(), json!(list.len()));
    m.insert("count_all_components".into(), json!(enumerated));
    m.insert("cusps".into(), serde_json::to_value(&list)?);
    Ok(Output::new(Value::Object(m), &["a", "c", "s_label", "M_label", "cycle", "special"], rows))
}

fn elliptic_cmd(args: &SurfaceArgs) -> Result<Output> {
    let (fd, n, spec) = surface(args)?;
    let recs = elliptic_records(&fd, &spec)?;
    let rows = recs
        .iter()
        .map(|e| {
            vec![
                e.q.to_string(),
                format!("({}; {}, {})", e.rtype[0], e.rtype[1], e.rtype[2]),
                e.count.to_string(),
                e.chain.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
                e.chern.clone(),
            ]
        })
        .collect();
    let mut m = surface_header(&fd, &n, args);
    m.insert("elliptic".into(), serde_json::to_value(&recs)?);
    Ok(Output::new(Value::Object(m), &["q", "type", "count", "chain", "chern"], rows))
}

fn invariants_cmd(args: &InvariantArgs) -> Result<Output> {
    let s = &args.surface;
    let fd = field_data(s.field)?;
    let n = parse_level(fd.field.d, &s.level)?;
    let rec = dataset::single_record(&fd, &n, s.component, s.variant, &fixtures(&args.fixtures)?)?;
    let json = serde_json::from_str::<Value>(&rec.to_json_line()?)?;
    let inv = rec.invariants.as_ref().ok_or_else(|| HmsError::Integrity("record without invariants".into()))?;
    let join = |v: Vec<String>| v.join(" ");
    let row = vec![
        fd.field.disc.to_string(),
        rec.key.level.clone(),
        s.component.to_string(),
        s.variant.name().to_string(),
        inv.vol.clone(),
        inv.c1_sq.to_string(),
        inv.c2.to_string(),
        inv.chi.to_string(),
        inv.hodge.h01.to_string(),
        inv.hodge.h02.to_string(),
        inv.hodge.h11.to_string(),
        join(inv.betti.iter().map(|b| b.to_string()).collect()),
        inv.k2_min_lower_bound.to_string(),
        join(inv.kodaira_set.iter().map(|b| b.to_string()).collect()),
        inv.blowdowns_applied.to_string(),
    ];
    let header = [
        "d_f", "level", "component", "variant", "vol", "c1_sq", "c2", "chi", "h01", "h02", "h11", "betti", "K2_min_lower_bound", "kodaira_set",
        "blowdowns_applied",
    ];
    Ok(Output::new(json, &header, vec![row]))
}

fn series_cmd(args: &SeriesArgs) -> Result<Output> {
    if args.max_weight < 2 {
        return Err(HmsError::InvalidInput("max weight must be at least 2".into()));
    }
    let fd = field_data(args.field)?;
    let n = parse_level(fd.field.d, &args.level)?;
    let rec = series_record(&fd, &n)?;
    let series = hms_core::dimensions::RationalSeries { num: rec.num.clone(), den: rec.den.clone() };
    let coeffs = series.coefficients(args.max_weight as usize + 1);
    let mut dims = serde_json::Map::new();
    let mut rows = Vec::new();
    for k in (2..=args.max_weight).step_by(2) {
        let c = &coeffs[k as usize];
        if !c.is_integer() {
            return Err(HmsError::Integrity(format!("coefficient of T^{} is {}", k, c)));
        }
        dims.insert(k.to_string(), serde_json::from_str::<Value>(&c.to_integer().to_string())?);
        rows.push(vec![k.to_string(), c.to_integer().to_string()]);
    }
    let json = json!({
        "d_f": fd.field.disc,
        "level": n.level_label(),
        "numerator": rec.num,
        "denominator": rec.den,
        "dims": dims,
    });
    Ok(Output::new(json, &["k", "dim"], rows))
}

fn sweep_cmd(args: &SweepArgs, out_dir: &Path, budget_ms: Option<u64>) -> Result<Output> {
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(HmsError::InvalidInput("--jobs must be positive".into()));
    }
    let config = SweepConfig {
        max_df: args.max_df,
        cutoff: args.cutoff,
        variants: args.variants.clone(),
        discriminants: args.discriminants.clone(),
        jobs,
        budget_ms,
    };
    let s = dataset::sweep(&config, out_dir, &fixtures(&args.fixtures)?)?;
    let json = json!({
        "output": out_dir.display().to_string(),
        "keys": s.keys,
        "computed": s.computed,
        "skipped": s.skipped,
        "errors": s.errors,
        "files": s.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
    });
    Ok(Output::key_values(json))
}

fn verify_cmd(args: &VerifyArgs) -> Result<Output> {
    let records = dataset::load_dataset(&args.dataset)?;
    let report = dataset::verify(&records, &fixtures(&args.fixtures)?, &TableFixtures::bundled());
    let clean = report.clean();
    let mut json = serde_json::to_value(&report)?;
    if let Value::Object(m) = &mut json {
        m.insert("clean".into(), json!(clean));
    }
    let mut rows = vec![
        vec!["records".into(), report.records.to_string()],
        vec!["error_stubs".into(), report.error_stubs.to_string()],
        vec!["violations".into(), report.violations.len().to_string()],
        vec!["consistency_checked".into(), report.consistency.checked.to_string()],
        vec!["consistency_failures".into(), report.consistency.failures.len().to_string()],
        vec!["table_chi1_exact".into(), report.table_chi1.exact().to_string()],
        vec!["table_chi2_exact".into(), report.table_chi2.exact().to_string()],
    ];
    for v in &report.violations {
        rows.push(vec![format!("violation {} {} {} {}", v.key.d_f, v.key.level, v.key.component, v.key.variant.name()), format!("{}: {}", v.invariant, v.detail)]);
    }
    let mut out = Output::new(json, &["key", "value"], rows);
    out.ok = clean;
    Ok(out)
}

fn exit_code(e: &HmsError) -> u8 {
    match e {
        HmsError::InvalidInput(_) | HmsError::Io(_) | HmsError::Json(_) => 1,
        HmsError::Integrity(_) | HmsError::Arithmetic(_) => 2,
        HmsError::Budget(_) => 3,
    }
}

fn error_kind(e: &HmsError) -> &'static str {
    match e {
        HmsError::InvalidInput(_) => "invalid-input",
        HmsError::Integrity(_) => "integrity",
        HmsError::Budget(_) => "budget",
        HmsError::Arithmetic(_) => "arithmetic",
        HmsError::Io(_) | HmsError::Json(_) => "io",
    }
}

fn execute(cli: &Cli) -> Result<Output> {
    let start = Instant::now();
    let out = match &cli.command {
        Command::FieldInfo(a) => field_info(a),
        Command::Cusps(a) => cusps_cmd(a),
        Command::Elliptic(a) => elliptic_cmd(a),
        Command::Invariants(a) => invariants_cmd(a),
        Command::HilbertSeries(a) => series_cmd(a),
        Command::Sweep(a) => {
            let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("hms_out"));
            return sweep_cmd(a, &dir, cli.budget_ms);
        }
        Command::Verify(a) => verify_cmd(a),
    }?;
    if let Some(b) = cli.budget_ms {
        if start.elapsed().as_millis() > b as u128 {
            return Err(HmsError::Budget(format!("exceeded {} ms", b)));
        }
    }
    Ok(out)
}

fn emit(cli: &Cli, out: &Output) -> Result<()> {
    let text = out.render(cli.format)?;
    match (&cli.output, &cli.command) {
        (Some(p), c) if !matches!(c, Command::Sweep(_)) => std::fs::write(p, text)?,
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_error(format: Format, e: &HmsError) {
    let code = exit_code(e);
    match format {
        Format::Json => {
            let v = json!({"error": {"kind": error_kind(e), "message": e.to_string(), "exit_code": code}});
            eprintln!("{}", v);
        }
        Format::Csv => eprintln!("error: {}", e),
    }
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
    let result = execute(&cli).and_then(|out| emit(&cli, &out).map(|_| out.ok));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            report_error(cli.format, &e);
            ExitCode::from(exit_code(&e))
        }
    }
}
