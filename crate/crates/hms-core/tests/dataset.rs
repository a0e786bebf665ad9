//! Sweep persistence: determinism across job counts, resumability, verification and record round trips.

use std::fs;
use std::path::Path;

use hms_core::classgroups::{FieldData, GroupVariant};
use hms_core::dataset::{
    enumerate_keys, load_dataset, read_records, single_record, sweep, variant_file_name, verify, BlowdownFixtures, SurfaceRecord,
    SweepConfig, TableFixtures,
};
use hms_core::ideals::parse_level;

fn config(max_df: i64, cutoff: u64, jobs: usize) -> SweepConfig {
    SweepConfig {
        max_df,
        cutoff,
        variants: vec![GroupVariant::Gamma0, GroupVariant::Gamma0One],
        discriminants: vec![],
        jobs,
        budget_ms: None,
    }
}

fn files(dir: &Path, c: &SweepConfig) -> Vec<String> {
    c.variants.iter().map(|&v| fs::read_to_string(dir.join(variant_file_name(v))).unwrap()).collect()
}

#[test]
fn job_count_does_not_change_output() {
    let fx = BlowdownFixtures::bundled();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (c1, c4) = (config(60, 1500, 1), config(60, 1500, 4));
    assert_eq!(c1.hash(), c4.hash(), "job count is not part of the configuration");
    let s1 = sweep(&c1, a.path(), &fx).unwrap();
    let s4 = sweep(&c4, b.path(), &fx).unwrap();
    assert_eq!(s1.keys, s4.keys);
    assert_eq!(s1.errors, 0);
    assert_eq!(files(a.path(), &c1), files(b.path(), &c4));
}

#[test]
fn interrupted_sweep_resumes_to_the_same_dataset() {
    let fx = BlowdownFixtures::bundled();
    let c = config(45, 1200, 2);
    let full = tempfile::tempdir().unwrap();
    sweep(&c, full.path(), &fx).unwrap();
    let expected = files(full.path(), &c);

    let part = tempfile::tempdir().unwrap();
    sweep(&c, part.path(), &fx).unwrap();
    // keep a third of the first file, ending in a torn line, and drop the second file
    let p0 = part.path().join(variant_file_name(c.variants[0]));
    let text = fs::read_to_string(&p0).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = lines.len() / 3;
    let mut torn: String = lines[..keep].iter().map(|l| format!("{}\n", l)).collect();
    torn.push_str(&lines[keep][..lines[keep].len() / 2]);
    fs::write(&p0, torn).unwrap();
    fs::remove_file(part.path().join(variant_file_name(c.variants[1]))).unwrap();

    let s = sweep(&c, part.path(), &fx).unwrap();
    assert_eq!(s.skipped, keep);
    assert_eq!(s.computed, s.keys - keep);
    assert_eq!(files(part.path(), &c), expected);
}

#[test]
fn smaller_sweep_agrees_on_shared_keys() {
    let fx = BlowdownFixtures::bundled();
    let (big, small) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    sweep(&config(60, 1500, 2), big.path(), &fx).unwrap();
    sweep(&config(40, 1000, 2), small.path(), &fx).unwrap();
    let big = load_dataset(big.path()).unwrap();
    let small = load_dataset(small.path()).unwrap();
    assert!(!small.is_empty() && small.len() < big.len());
    for r in &small {
        let other = big.iter().find(|b| b.key == r.key).expect("key of the smaller sweep is in the larger one");
        assert_eq!(other, r);
    }
}

#[test]
fn empty_range_gives_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(4, 5000, 1);
    assert!(enumerate_keys(&c).unwrap().is_empty());
    let s = sweep(&c, dir.path(), &BlowdownFixtures::bundled()).unwrap();
    assert_eq!((s.keys, s.computed, s.errors), (0, 0, 0));
    let recs = load_dataset(dir.path()).unwrap();
    assert!(recs.is_empty());
    let report = verify(&recs, &BlowdownFixtures::bundled(), &TableFixtures::bundled());
    assert!(report.clean());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn configuration_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let fx = BlowdownFixtures::bundled();
    sweep(&config(20, 200, 1), dir.path(), &fx).unwrap();
    assert!(sweep(&config(20, 300, 1), dir.path(), &fx).is_err());
    let again = sweep(&config(20, 200, 3), dir.path(), &fx).unwrap();
    assert_eq!(again.computed, 0);
}

fn tampered(mut r: SurfaceRecord, edit: impl FnOnce(&mut SurfaceRecord)) -> Vec<String> {
    edit(&mut r);
    let report = verify(&[r], &BlowdownFixtures::bundled(), &TableFixtures::bundled());
    report.violations.iter().map(|v| v.invariant.clone()).collect()
}

#[test]
fn tampered_records_name_the_broken_invariant() {
    let fd = FieldData::new(85).unwrap();
    let n = parse_level(85, "1").unwrap();
    let r = single_record(&fd, &n, 0, GroupVariant::Gamma0, &BlowdownFixtures::bundled()).unwrap();
    assert!(tampered(r.clone(), |_| {}).is_empty());
    assert!(tampered(r.clone(), |r| r.invariants.as_mut().unwrap().c2 += 12).contains(&"chern".to_string()));
    assert!(tampered(r.clone(), |r| r.invariants.as_mut().unwrap().c2 += 1).contains(&"noether".to_string()));
    assert!(tampered(r.clone(), |r| r.invariants.as_mut().unwrap().blowdowns_applied = 0).contains(&"blowdowns".to_string()));
    assert!(tampered(r.clone(), |r| r.invariants.as_mut().unwrap().kodaira_set = [2].into_iter().collect()).contains(&"kodaira".to_string()));
    assert!(tampered(r.clone(), |r| r.elliptic.as_mut().unwrap()[0].count += 1).contains(&"chern".to_string()));
    assert!(tampered(r.clone(), |r| r.schema = "hms-0".into()).contains(&"schema".to_string()));
    assert!(tampered(r.clone(), |r| r.invariants = None).contains(&"completeness".to_string()));
    let dup = verify(&[r.clone(), r], &BlowdownFixtures::bundled(), &TableFixtures::bundled());
    assert!(dup.violations.iter().any(|v| v.invariant == "unique-key"));
}

#[test]
fn records_round_trip_through_json() {
    let fx = BlowdownFixtures::bundled();
    for (disc, level, comp, variant) in [(5, "4", 0, GroupVariant::Gamma0), (12, "1", 1, GroupVariant::Gamma0One), (85, "1", 1, GroupVariant::Gamma0)] {
        let fd = FieldData::from_field(hms_core::field::RealQuadraticField::from_disc(disc).unwrap()).unwrap();
        let n = parse_level(fd.field.d, level).unwrap();
        let r = single_record(&fd, &n, comp, variant, &fx).unwrap();
        let line = r.to_json_line().unwrap();
        assert!(!line.contains('\n'));
        let back: SurfaceRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json_line().unwrap(), line);
    }
}

#[test]
fn missing_file_reads_as_empty() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_records(&dir.path().join("absent.jsonl")).unwrap().is_empty());
    assert!(load_dataset(&dir.path().join("absent.jsonl")).is_err());
}
