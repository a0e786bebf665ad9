//! Batch sweeps over (F, 𝔑, 𝔟), the JSON-lines record schema, and dataset verification.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{is_squarefree, kronecker};
use crate::classgroups::{prime_discriminants, ClassGroupData, FieldData, GroupVariant};
use crate::cusps::{cusp_type, enumerate_cusps, resolve_cusp, summarize, CuspSummary, GroupSpec};
use crate::dimensions::{series_record, RationalSeries, SeriesRecord};
use crate::elliptic::{elliptic_records, resolve_elliptic, EllipticRecord, RotationType};
use crate::error::{HmsError, Result};
use crate::field::{rat, RealQuadraticField};
use crate::geometry::{chern_numbers, classify_kodaira, covolume, hodge_betti, rationality_criterion, CurveConfig, SurfaceInvariants};
use crate::ideals::{ideals_of_norm, parse_level, Ideal};

pub const SCHEMA: &str = "hms-1";
const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies one surface X(Γ(𝔑)_𝔟).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceKey {
    pub d_f: i64,
    pub level: String,
    pub level_norm: u64,
    pub component: usize,
    pub variant: GroupVariant,
}

impl SurfaceKey {
    fn sort_tuple(&self) -> (i64, u64, Vec<u64>, usize, GroupVariant) {
        let parts = self.level.split('.').filter_map(|p| p.parse().ok()).collect();
        (self.d_f, self.level_norm, parts, self.component, self.variant)
    }
}

impl Ord for SurfaceKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_tuple().cmp(&other.sort_tuple())
    }
}

impl PartialOrd for SurfaceKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub h: u64,
    pub h_plus: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
}

/// One JSON line: a complete record, or an error stub carrying only the key and the error.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub schema: String,
    #[serde(flatten)]
    pub key: SurfaceKey,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub component_ideal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub genus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class_data: Option<ClassSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cusps: Option<Vec<CuspSummary>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elliptic: Option<Vec<EllipticRecord>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub invariants: Option<SurfaceInvariants>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hilbert_series: Option<SeriesRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<ErrorInfo>,
    pub provenance: Provenance,
}

impl SurfaceRecord {
    /// Serialization with lexicographically sorted keys.
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::to_value(self)?)?)
    }

    fn stub(key: SurfaceKey, e: &HmsError) -> SurfaceRecord {
        let kind = match e {
            HmsError::InvalidInput(_) => "invalid-input",
            HmsError::Integrity(_) => "integrity",
            HmsError::Budget(_) => "budget",
            HmsError::Arithmetic(_) => "arithmetic",
            HmsError::Io(_) | HmsError::Json(_) => "io",
        };
        SurfaceRecord {
            schema: SCHEMA.into(),
            key,
            component_ideal: None,
            genus: None,
            class_data: None,
            cusps: None,
            elliptic: None,
            invariants: None,
            hilbert_series: None,
            error: Some(ErrorInfo { kind: kind.into(), message: e.to_string() }),
            provenance: Provenance { code_version: CODE_VERSION.into() },
        }
    }
}

// Fixtures

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowdownEntry {
    pub d_f: i64,
    pub level: String,
    pub component: usize,
    pub variant: GroupVariant,
    pub blowdowns: i64,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub config: Option<CurveConfig>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BlowdownFixtures {
    pub entries: Vec<BlowdownEntry>,
}

impl BlowdownFixtures {
    pub fn bundled() -> BlowdownFixtures {
        serde_json::from_str(include_str!("../fixtures/blowdowns.json")).expect("bundled blow-down fixture parses")
    }

    pub fn load(path: &Path) -> Result<BlowdownFixtures> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn find(&self, key: &SurfaceKey) -> Option<&BlowdownEntry> {
        self.entries
            .iter()
            .find(|e| e.d_f == key.d_f && e.level == key.level && e.component == key.component && e.variant == key.variant)
    }

    /// Blow-down count and rationality verdict for a key.
    fn apply(&self, key: &SurfaceKey) -> Result<(i64, bool)> {
        match self.find(key) {
            None => Ok((0, false)),
            Some(e) => {
                let rational = match &e.config {
                    Some(c) => rationality_criterion(c)?,
                    None => false,
                };
                Ok((e.blowdowns, rational))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub d_f: i64,
    pub genus: String,
    pub levels: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipTable {
    pub variant: GroupVariant,
    pub discriminants: Vec<i64>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KodairaTable {
    pub keys_per_variant: usize,
    #[serde(rename = "Gamma0")]
    pub gamma0: BTreeMap<String, u64>,
    #[serde(rename = "Gamma0^1")]
    pub gamma0_one: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableFixtures {
    pub table_chi1: MembershipTable,
    pub table_chi2: MembershipTable,
    pub table_kodaira: KodairaTable,
}

impl TableFixtures {
    pub fn bundled() -> TableFixtures {
        serde_json::from_str(include_str!("../fixtures/tables.json")).expect("bundled table fixture parses")
    }
}

// Key enumeration

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_df: i64,
    /// Levels satisfy Nm(𝔑) ≤ ⌈cutoff / d_F^{3/2}⌉.
    pub cutoff: u64,
    pub variants: Vec<GroupVariant>,
    /// Restricts the sweep to these discriminants when nonempty.
    #[serde(default)]
    pub discriminants: Vec<i64>,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub budget_ms: Option<u64>,
}

impl SweepConfig {
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(s.as_bytes()))
    }

    /// Squarefree D with d_F ≤ max_df, ordered by discriminant.
    pub fn fields(&self) -> Vec<i64> {
        let mut out: Vec<(i64, i64)> = (2..=self.max_df)
            .filter(|&d| is_squarefree(d))
            .map(|d| (if d % 4 == 1 { d } else { 4 * d }, d))
            .filter(|&(disc, _)| disc <= self.max_df)
            .filter(|&(disc, _)| self.discriminants.is_empty() || self.discriminants.contains(&disc))
            .collect();
        out.sort();
        out.into_iter().map(|(_, d)| d).collect()
    }

    /// Largest level norm for a discriminant: ⌈C / d_F^{3/2}⌉, the least n with n² d_F³ ≥ C².
    pub fn max_norm(&self, disc: i64) -> u64 {
        let c2 = (self.cutoff as u128).pow(2);
        let d3 = (disc as u128).pow(3);
        let mut n = 0u64;
        while (n as u128).pow(2) * d3 < c2 {
            n += 1;
        }
        n
    }
}

pub fn levels_up_to(d: i64, max_norm: u64) -> Vec<Ideal> {
    (1..=max_norm).flat_map(|n| ideals_of_norm(d, n)).collect()
}

/// Genus of a narrow class from the prime discriminant characters of the norm of an integral representative.
pub fn genus_signature(disc: i64, b: &Ideal) -> String {
    let n = b.norm_int();
    let n = i64::try_from(n).expect("component norm fits in i64");
    let qs = prime_discriminants(disc);
    qs.iter()
        .map(|&q| {
            let v = if num_integer::gcd(n, q.abs()) == 1 {
                kronecker(q, n)
            } else {
                kronecker(disc / q, n)
            };
            if v >= 0 {
                '+'
            } else {
                '-'
            }
        })
        .collect()
}

/// "p3*p3" style description of a level by the rational primes below its prime factors.
pub fn level_descriptor(n: &Ideal) -> String {
    let mut parts: Vec<(u64, i64)> = n.factor().into_iter().map(|(pr, e)| (pr.p, e)).collect();
    parts.sort();
    parts
        .iter()
        .map(|&(p, e)| if e == 1 { format!("p{}", p) } else { format!("p{}^{}", p, e) })
        .collect::<Vec<_>>()
        .join("*")
}

pub fn enumerate_keys(config: &SweepConfig) -> Result<Vec<SurfaceKey>> {
    let mut keys = Vec::new();
    for d in config.fields() {
        let f = RealQuadraticField::new(d)?;
        let cg = ClassGroupData::new(&f)?;
        for n in levels_up_to(d, config.max_norm(f.disc)) {
            for comp in 0..cg.h_plus as usize {
                for &variant in &config.variants {
                    keys.push(SurfaceKey {
                        d_f: f.disc,
                        level: n.level_label(),
                        level_norm: n.norm_u64(),
                        component: comp,
                        variant,
                    });
                }
            }
        }
    }
    keys.sort();
    Ok(keys)
}

// Computing records

pub fn compute_record(fd: &FieldData, key: &SurfaceKey, series: Option<&SeriesRecord>, fixtures: &BlowdownFixtures) -> Result<SurfaceRecord> {
    let n = parse_level(fd.field.d, &key.level)?;
    let reps = fd.classes.narrow_reps(n.norm_u64());
    let b = reps
        .get(key.component)
        .cloned()
        .ok_or_else(|| HmsError::InvalidInput(format!("component {} out of range (h+ = {})", key.component, reps.len())))?;
    let spec = GroupSpec { variant: key.variant, level: n.clone(), component: b.clone() };
    let cusps = enumerate_cusps(&fd.field, &fd.classes, &spec)?;
    let mut cycles = Vec::with_capacity(cusps.len());
    let mut cusp_summaries = Vec::with_capacity(cusps.len());
    for c in &cusps {
        let t = cusp_type(&fd.field, c, &spec)?;
        let cyc = resolve_cusp(&fd.field, &t)?;
        cusp_summaries.push(summarize(c, &cyc));
        cycles.push(cyc);
    }
    let ell = elliptic_records(fd, &spec)?;
    let dist: Vec<(RotationType, u64)> = ell
        .iter()
        .map(|e| Ok((RotationType::new(e.q, e.rtype[1] as i64, e.rtype[2] as i64)?, e.count)))
        .collect::<Result<_>>()?;
    let vol = covolume(fd, &spec)?;
    let (c1_sq, c2) = chern_numbers(&vol, &cycles, &dist)?;
    let (chi, hodge, betti) = hodge_betti(c1_sq, c2)?;
    let (blowdowns, rational) = fixtures.apply(key)?;
    let kodaira_set = if rational { [-1].into_iter().collect() } else { classify_kodaira(chi, c1_sq, blowdowns)? };
    let invariants = SurfaceInvariants {
        vol: vol.to_string(),
        c1_sq,
        c2,
        chi,
        hodge,
        betti,
        k2_min_lower_bound: c1_sq + blowdowns,
        kodaira_set,
        blowdowns_applied: blowdowns,
    };
    Ok(SurfaceRecord {
        schema: SCHEMA.into(),
        key: key.clone(),
        component_ideal: Some(format!("{:?}", b)),
        genus: Some(genus_signature(fd.field.disc, &b)),
        class_data: Some(ClassSummary { h: fd.classes.h, h_plus: fd.classes.h_plus }),
        cusps: Some(cusp_summaries),
        elliptic: Some(ell),
        invariants: Some(invariants),
        hilbert_series: if key.variant == GroupVariant::Gamma0 { series.cloned() } else { None },
        error: None,
        provenance: Provenance { code_version: CODE_VERSION.into() },
    })
}

/// Runs `f`, turning panics and budget overruns into errors.
fn guarded<T>(budget_ms: Option<u64>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(HmsError::Integrity(format!("panic: {}", msg)))
        });
    match budget_ms {
        Some(b) if start.elapsed().as_millis() > b as u128 => Err(HmsError::Budget(format!("exceeded {} ms", b))),
        _ => out,
    }
}

/// Computes every key of one (F, 𝔑) work unit.
fn compute_unit(fd: &FieldData, keys: &[SurfaceKey], fixtures: &BlowdownFixtures, budget_ms: Option<u64>) -> Vec<SurfaceRecord> {
    let needs_series = keys.iter().any(|k| k.variant == GroupVariant::Gamma0);
    let series = if needs_series {
        guarded(budget_ms, || {
            let n = parse_level(fd.field.d, &keys[0].level)?;
            series_record(fd, &n)
        })
    } else {
        Err(HmsError::InvalidInput("series not requested".into()))
    };
    keys.iter()
        .map(|k| {
            let rec = guarded(budget_ms, || {
                if k.variant == GroupVariant::Gamma0 {
                    if let Err(e) = &series {
                        return Err(HmsError::Integrity(format!("Hilbert series: {}", e)));
                    }
                }
                compute_record(fd, k, series.as_ref().ok(), fixtures)
            });
            rec.unwrap_or_else(|e| SurfaceRecord::stub(k.clone(), &e))
        })
        .collect()
}

// Persistence

pub fn variant_file_name(v: GroupVariant) -> &'static str {
    match v {
        GroupVariant::Gamma0 => "gamma0.jsonl",
        GroupVariant::Gamma0One => "gamma0_1.jsonl",
        GroupVariant::Gamma1 => "gamma1.jsonl",
        GroupVariant::Gamma1One => "gamma1_1.jsonl",
    }
}

/// Reads records from a JSON-lines file, skipping a truncated final line.
pub fn read_records(path: &Path) -> Result<Vec<SurfaceRecord>> {
    if !path.exists() {
        return Ok(vec![]);
    }
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn write_sorted(path: &Path, mut records: Vec<SurfaceRecord>) -> Result<()> {
    records.sort_by(|a, b| a.key.cmp(&b.key));
    records.dedup_by(|a, b| a.key == b.key);
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut w = std::io::BufWriter::new(File::create(&tmp)?);
        for r in &records {
            writeln!(w, "{}", r.to_json_line()?)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantCounts {
    pub records: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunInfo {
    pub timestamp: u64,
    pub runtime_ms: u64,
    pub computed: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub code_version: String,
    pub config: SweepConfig,
    pub config_hash: String,
    pub counts: BTreeMap<String, VariantCounts>,
    pub last_run: RunInfo,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub keys: usize,
    pub computed: usize,
    pub skipped: usize,
    pub errors: usize,
    pub files: Vec<PathBuf>,
}

/// Runs a sweep into `out_dir`, skipping keys already present there.
pub fn sweep(config: &SweepConfig, out_dir: &Path, fixtures: &BlowdownFixtures) -> Result<SweepSummary> {
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    let hash = config.hash();
    if manifest_path.exists() {
        let old: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if old.config_hash != hash {
            return Err(HmsError::InvalidInput(format!("{} holds a sweep with a different configuration", out_dir.display())));
        }
    }
    let keys = enumerate_keys(config)?;
    let mut present: HashSet<SurfaceKey> = HashSet::new();
    for &v in &config.variants {
        let path = out_dir.join(variant_file_name(v));
        let recs = read_records(&path)?;
        present.extend(recs.iter().map(|r| r.key.clone()));
        if path.exists() {
            // drops a torn final line before new records are appended
            write_sorted(&path, recs)?;
        }
    }
    let pending: Vec<&SurfaceKey> = keys.iter().filter(|k| !present.contains(k)).collect();
    // work units per (F, 𝔑)
    let mut units: BTreeMap<(i64, String), Vec<SurfaceKey>> = BTreeMap::new();
    for k in &pending {
        units.entry((k.d_f, k.level.clone())).or_default().push((*k).clone());
    }
    let discs: BTreeSet<i64> = units.keys().map(|(d, _)| *d).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| HmsError::InvalidInput(format!("thread pool: {}", e)))?;
    let fields: HashMap<i64, std::result::Result<FieldData, String>> = pool.install(|| {
        discs
            .par_iter()
            .map(|&disc| {
                let fd = RealQuadraticField::from_disc(disc).and_then(FieldData::from_field).map_err(|e| e.to_string());
                (disc, fd)
            })
            .collect()
    });
    let unit_list: Vec<(&(i64, String), &Vec<SurfaceKey>)> = units.iter().collect();
    let (tx, rx) = mpsc::channel::<Vec<SurfaceRecord>>();
    let mut files: HashMap<GroupVariant, File> = HashMap::new();
    for &v in &config.variants {
        let f = OpenOptions::new().create(true).append(true).open(out_dir.join(variant_file_name(v)))?;
        files.insert(v, f);
    }
    let budget = config.budget_ms;
    let write_result: Result<usize> = std::thread::scope(|s| {
        let writer = s.spawn(move || -> Result<usize> {
            let mut n = 0;
            for batch in rx {
                for r in batch {
                    let f = files.get_mut(&r.key.variant).expect("variant file open");
                    writeln!(f, "{}", r.to_json_line()?)?;
                    n += 1;
                }
            }
            for f in files.values_mut() {
                f.flush()?;
            }
            Ok(n)
        });
        pool.install(|| {
            unit_list.par_iter().with_max_len(1).for_each_with(tx, |tx, ((disc, _), ks)| {
                let batch = match &fields[disc] {
                    Ok(fd) => compute_unit(fd, ks, fixtures, budget),
                    Err(msg) => ks.iter().map(|k| SurfaceRecord::stub(k.clone(), &HmsError::Integrity(msg.clone()))).collect(),
                };
                let _ = tx.send(batch);
            });
        });
        writer.join().expect("writer thread")
    });
    let computed = write_result?;
    let mut counts = BTreeMap::new();
    let mut total_errors = 0;
    let mut out_files = Vec::new();
    for &v in &config.variants {
        let path = out_dir.join(variant_file_name(v));
        let recs = read_records(&path)?;
        let errors = recs.iter().filter(|r| r.error.is_some()).count();
        total_errors += errors;
        counts.insert(v.name().to_string(), VariantCounts { records: recs.len(), errors });
        write_sorted(&path, recs)?;
        out_files.push(path);
    }
    let manifest = Manifest {
        schema: SCHEMA.into(),
        code_version: CODE_VERSION.into(),
        config: config.clone(),
        config_hash: hash,
        counts,
        last_run: RunInfo {
            timestamp: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            runtime_ms: start.elapsed().as_millis() as u64,
            computed,
        },
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&serde_json::to_value(&manifest)?)?)?;
    Ok(SweepSummary { keys: keys.len(), computed, skipped: keys.len() - pending.len(), errors: total_errors, files: out_files })
}

// Verification

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub key: SurfaceKey,
    pub invariant: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub checked: usize,
    pub passed: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub discriminant: i64,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub checked: Vec<MembershipReport>,
    pub skipped: Vec<i64>,
}

impl TableReport {
    pub fn exact(&self) -> bool {
        self.checked.iter().all(|m| m.missing.is_empty() && m.extra.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub records: usize,
    pub error_stubs: usize,
    pub keys_per_variant: BTreeMap<String, usize>,
    pub violations: Vec<Violation>,
    pub consistency: ConsistencySummary,
    pub kodaira_tallies: BTreeMap<String, BTreeMap<String, u64>>,
    /// Mismatches against the published tallies, or the reason the comparison was skipped.
    pub kodaira_comparison: Vec<String>,
    pub table_chi1: TableReport,
    pub table_chi2: TableReport,
}

impl VerifyReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty() && self.consistency.failures.is_empty()
    }
}

/// Tally bucket of a Kodaira candidate set.
pub fn kodaira_bucket(set: &BTreeSet<i32>) -> String {
    let v: Vec<i32> = set.iter().copied().collect();
    match v[..] {
        [-1] => "rational".into(),
        [0] => "kodaira_0".into(),
        [1] => "elliptic".into(),
        [2] => "general".into(),
        _ => format!("unknown_{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_")),
    }
}

fn check_record(r: &SurfaceRecord, fixtures: &BlowdownFixtures, out: &mut Vec<Violation>) {
    let mut bad = |name: &str, detail: String| {
        out.push(Violation { key: r.key.clone(), invariant: name.into(), detail });
    };
    if r.schema != SCHEMA {
        bad("schema", r.schema.clone());
    }
    let Some(inv) = &r.invariants else {
        if r.error.is_none() {
            bad("completeness", "record has neither invariants nor an error".into());
        }
        return;
    };
    if inv.c1_sq + inv.c2 != 12 * inv.chi {
        bad("noether", format!("c1^2 + c2 = {} but 12 chi = {}", inv.c1_sq + inv.c2, 12 * inv.chi));
    }
    if inv.chi < 1 {
        bad("chi-positive", inv.chi.to_string());
    }
    if inv.hodge.h00 != 1 || inv.hodge.h01 != 0 || inv.hodge.h02 != inv.chi - 1 || inv.hodge.h11 != inv.c2 - 2 * inv.chi {
        bad("hodge", format!("{:?}", inv.hodge));
    }
    if inv.betti != [1, 0, inv.c2 - 2, 0, 1] {
        bad("betti", format!("{:?}", inv.betti));
    }
    if inv.k2_min_lower_bound != inv.c1_sq + inv.blowdowns_applied {
        bad("k2-lower-bound", format!("{} != {} + {}", inv.k2_min_lower_bound, inv.c1_sq, inv.blowdowns_applied));
    }
    match fixtures.apply(&r.key) {
        Ok((b, rational)) => {
            if b != inv.blowdowns_applied {
                bad("blowdowns", format!("record has {}, fixtures give {}", inv.blowdowns_applied, b));
            }
            let expect = if rational { Ok([-1].into_iter().collect()) } else { classify_kodaira(inv.chi, inv.c1_sq, b) };
            match expect {
                Ok(s) if s == inv.kodaira_set => {}
                Ok(s) => bad("kodaira", format!("record {:?}, expected {:?}", inv.kodaira_set, s)),
                Err(e) => bad("kodaira", e.to_string()),
            }
        }
        Err(e) => bad("fixtures", e.to_string()),
    }
    // Chern numbers recomputed from the stored cusp cycles and elliptic types
    let recompute = || -> Result<(i64, i64)> {
        let vol: crate::field::Rat = inv.vol.parse().map_err(|_| HmsError::InvalidInput(format!("bad volume {}", inv.vol)))?;
        let cycles: Vec<_> = r
            .cusps
            .iter()
            .flatten()
            .map(|c| crate::cusps::ResolutionCycle { selfints: c.cycle.clone(), period: c.cycle.len(), repetition: 1, special: c.special })
            .collect();
        let mut dist = Vec::new();
        for e in r.elliptic.iter().flatten() {
            let t = RotationType::new(e.q, e.rtype[1] as i64, e.rtype[2] as i64)?;
            let res = resolve_elliptic(t)?;
            if res.selfints != e.chain || res.chern.to_string() != e.chern {
                return Err(HmsError::Integrity(format!("elliptic record {:?} does not match its type", e.rtype)));
            }
            dist.push((t, e.count));
        }
        chern_numbers(&vol, &cycles, &dist)
    };
    match recompute() {
        Ok((c1, c2)) if (c1, c2) == (inv.c1_sq, inv.c2) => {}
        Ok((c1, c2)) => bad("chern", format!("stored ({}, {}), recomputed ({}, {})", inv.c1_sq, inv.c2, c1, c2)),
        Err(e) => bad("chern", e.to_string()),
    }
    if let Some(s) = &r.hilbert_series {
        let series = RationalSeries { num: s.num.clone(), den: s.den.clone() };
        let coeffs = series.coefficients(41);
        for (k, c) in coeffs.iter().enumerate() {
            let ok = c.is_integer() && *c >= rat(0) && (k % 2 == 0 || c.is_zero()) && (k != 0 || c.is_zero());
            if !ok {
                bad("series-coefficients", format!("T^{} coefficient {}", k, c));
                break;
            }
        }
        for (&k, &dim) in &s.dims {
            if coeffs.get(k as usize).map(|c| *c != rat(dim)).unwrap_or(true) {
                bad("series-dims", format!("dim S_{} = {} disagrees with the rational form", k, dim));
            }
        }
    }
}

fn membership(records: &[&SurfaceRecord], table: &MembershipTable, target: impl Fn(&SurfaceInvariants) -> bool) -> TableReport {
    let mut checked = Vec::new();
    let mut skipped = Vec::new();
    for &disc in &table.discriminants {
        let recs: Vec<&&SurfaceRecord> = records.iter().filter(|r| r.key.d_f == disc && r.key.variant == table.variant).collect();
        if recs.is_empty() {
            skipped.push(disc);
            continue;
        }
        let expected: BTreeSet<String> = table
            .rows
            .iter()
            .filter(|row| row.d_f == disc)
            .flat_map(|row| row.levels.iter().map(move |l| format!("{} {}", row.genus, l)))
            .collect();
        let d = RealQuadraticField::from_disc(disc).map(|f| f.d).unwrap_or(disc);
        let mut found = BTreeSet::new();
        for r in recs {
            let (Some(inv), Some(genus)) = (&r.invariants, &r.genus) else { continue };
            if r.key.level_norm == 1 || !target(inv) {
                continue;
            }
            if let Ok(n) = parse_level(d, &r.key.level) {
                found.insert(format!("{} {}", genus, level_descriptor(&n)));
            }
        }
        checked.push(MembershipReport {
            discriminant: disc,
            missing: expected.difference(&found).cloned().collect(),
            extra: found.difference(&expected).cloned().collect(),
        });
    }
    TableReport { checked, skipped }
}

/// Collects every .jsonl file under a path (a single file or a dataset directory).
pub fn load_dataset(path: &Path) -> Result<Vec<SurfaceRecord>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(read_records(&f)?);
        }
        Ok(out)
    } else if path.exists() {
        read_records(path)
    } else {
        Err(HmsError::InvalidInput(format!("dataset {} does not exist", path.display())))
    }
}

pub fn verify(records: &[SurfaceRecord], blowdowns: &BlowdownFixtures, tables: &TableFixtures) -> VerifyReport {
    let mut violations = Vec::new();
    let mut keys_per_variant: BTreeMap<String, usize> = BTreeMap::new();
    let mut tallies: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.key.clone()) {
            violations.push(Violation { key: r.key.clone(), invariant: "unique-key".into(), detail: "duplicate record".into() });
        }
        check_record(r, blowdowns, &mut violations);
        *keys_per_variant.entry(r.key.variant.name().into()).or_insert(0) += 1;
        let bucket = match &r.invariants {
            Some(inv) => kodaira_bucket(&inv.kodaira_set),
            None => "error".into(),
        };
        *tallies.entry(r.key.variant.name().into()).or_default().entry(bucket).or_insert(0) += 1;
    }
    // χ consistency per (F, 𝔑) for complete Γ₀ groups
    let mut groups: BTreeMap<(i64, String), Vec<&SurfaceRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.key.variant == GroupVariant::Gamma0) {
        groups.entry((r.key.d_f, r.key.level.clone())).or_default().push(r);
    }
    let mut consistency = ConsistencySummary::default();
    for ((disc, level), rs) in &groups {
        let Some(cd) = rs.iter().find_map(|r| r.class_data.clone()) else { continue };
        let complete = rs.len() == cd.h_plus as usize && rs.iter().all(|r| r.invariants.is_some());
        let dim = rs.iter().find_map(|r| r.hilbert_series.as_ref().and_then(|s| s.dims.get(&2).copied()));
        let (true, Some(dim)) = (complete, dim) else { continue };
        consistency.checked += 1;
        let sum: i64 = rs.iter().map(|r| r.invariants.as_ref().unwrap().chi).sum();
        if sum == dim + cd.h_plus as i64 {
            consistency.passed += 1;
        } else {
            consistency.failures.push(format!("d_F={} level={}: sum chi = {}, dim S2 + h+ = {}", disc, level, sum, dim + cd.h_plus as i64));
        }
    }
    let all: Vec<&SurfaceRecord> = records.iter().collect();
    let table_chi1 = membership(&all, &tables.table_chi1, |inv| inv.chi == 1 && inv.c1_sq <= 8);
    let table_chi2 = membership(&all, &tables.table_chi2, |inv| inv.chi == 2 && inv.c1_sq <= 0);
    let mut kodaira_comparison = Vec::new();
    let kt = &tables.table_kodaira;
    for (name, target) in [("Gamma0", &kt.gamma0), ("Gamma0^1", &kt.gamma0_one)] {
        let n = keys_per_variant.get(name).copied().unwrap_or(0);
        if n != kt.keys_per_variant {
            kodaira_comparison.push(format!("{}: skipped, dataset has {} keys (full sweep has {})", name, n, kt.keys_per_variant));
            continue;
        }
        let got = tallies.get(name).cloned().unwrap_or_default();
        for (bucket, &want) in target {
            let have = got.get(bucket).copied().unwrap_or(0);
            if have != want {
                kodaira_comparison.push(format!("{}: {} = {}, published {}", name, bucket, have, want));
            }
        }
    }
    VerifyReport {
        records: records.len(),
        error_stubs: records.iter().filter(|r| r.error.is_some()).count(),
        keys_per_variant,
        violations,
        consistency,
        kodaira_tallies: tallies,
        kodaira_comparison,
        table_chi1,
        table_chi2,
    }
}

/// Record for a single surface computed outside a sweep.
pub fn single_record(fd: &FieldData, n: &Ideal, component: usize, variant: GroupVariant, fixtures: &BlowdownFixtures) -> Result<SurfaceRecord> {
    let key = SurfaceKey { d_f: fd.field.disc, level: n.level_label(), level_norm: n.norm_u64(), component, variant };
    let series = if variant == GroupVariant::Gamma0 { Some(series_record(fd, n)?) } else { None };
    compute_record(fd, &key, series.as_ref(), fixtures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_norms() {
        let c = SweepConfig { max_df: 3000, cutoff: 5000, variants: vec![], discriminants: vec![], jobs: 1, budget_ms: None };
        assert_eq!(c.max_norm(5), 448);
        assert_eq!(c.max_norm(33), 27);
        assert_eq!(c.max_norm(293), 1);
        assert_eq!(c.max_norm(292), 2);
        assert_eq!(c.max_norm(2997), 1);
    }

    #[test]
    fn genus_of_components() {
        let fd = FieldData::new(3).unwrap();
        let reps = fd.classes.narrow_reps(1);
        let gs: Vec<String> = reps.iter().map(|b| genus_signature(12, b)).collect();
        assert_eq!(gs, vec!["++", "--"]);
    }

    #[test]
    fn descriptors() {
        let n = Ideal::from_int(13, 3).unwrap();
        assert_eq!(level_descriptor(&n), "p3*p3");
        let n = Ideal::from_int(5, 4).unwrap();
        assert_eq!(level_descriptor(&n), "p2^2");
    }
}
