//! Subject records, manifests, severity binning and synthetic cohorts.
//!
//! A cohort is described by a manifest CSV with header
//! `subject_id,site,ados,path`; each `path` (relative to the manifest's
//! directory) points to a headerless CSV holding one region per row and one
//! time sample per column.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One subject: identifiers, clinical score and a regions × time matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub site: String,
    pub ados: u32,
    pub data: DMatrix<f64>,
}

impl SubjectRecord {
    pub fn new(
        id: impl Into<String>,
        site: impl Into<String>,
        ados: u32,
        data: DMatrix<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if data.nrows() < 2 || data.ncols() < 2 {
            return Err(Error::Shape(format!(
                "subject {id}: need at least 2 regions and 2 samples, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "subject {id}: non-finite measurement"
            )));
        }
        Ok(Self {
            id,
            site: site.into(),
            ados,
            data,
        })
    }

    pub fn regions(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn severity(&self) -> SeverityClass {
        SeverityClass::from_ados(self.ados)
    }

    /// Time series of one region.
    pub fn series(&self, region: usize) -> Vec<f64> {
        self.data.row(region).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityClass {
    Mild,
    Moderate,
    Severe,
}

impl SeverityClass {
    pub const ALL: [SeverityClass; 3] = [
        SeverityClass::Mild,
        SeverityClass::Moderate,
        SeverityClass::Severe,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Mild 0–8, Moderate 9–13, Severe 14 and above.
    pub fn from_ados(score: u32) -> Self {
        match score {
            0..=8 => SeverityClass::Mild,
            9..=13 => SeverityClass::Moderate,
            _ => SeverityClass::Severe,
        }
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeverityClass::Mild => "mild",
            SeverityClass::Moderate => "moderate",
            SeverityClass::Severe => "severe",
        };
        f.pad(s)
    }
}

/// Bins a raw ADOS score into a severity class. Negative scores are rejected.
pub fn bin_ados(score: i64) -> Result<SeverityClass> {
    if score < 0 {
        return Err(Error::Domain(format!(
            "ADOS score must be nonnegative, got {score}"
        )));
    }
    let score = u32::try_from(score).unwrap_or(u32::MAX);
    Ok(SeverityClass::from_ados(score))
}

/// An ordered set of subjects sharing the same region count.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    subjects: Vec<SubjectRecord>,
}

impl Cohort {
    pub fn new(subjects: Vec<SubjectRecord>) -> Result<Self> {
        let first = subjects
            .first()
            .ok_or_else(|| Error::Degenerate("empty cohort".into()))?;
        let mut seen = HashSet::new();
        for s in &subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Domain(format!("duplicate subject id {}", s.id)));
            }
            if s.regions() != first.regions() {
                return Err(Error::Shape(format!(
                    "subject {} has {} regions but subject {} has {}",
                    s.id,
                    s.regions(),
                    first.id,
                    first.regions()
                )));
            }
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Region count K shared by every subject.
    pub fn regions(&self) -> usize {
        self.subjects[0].regions()
    }

    pub fn labels(&self) -> Vec<SeverityClass> {
        self.subjects.iter().map(SubjectRecord::severity).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    subject_id: String,
    site: String,
    ados: String,
    path: PathBuf,
}

/// Reads a manifest and every subject matrix it references, in file order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Cohort> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut subjects = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: row_no,
            message: e.to_string(),
        })?;
        let ados: u32 = row.ados.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row: row_no,
            message: format!("ADOS score {:?} is not a nonnegative integer", row.ados),
        })?;
        let matrix_path = if row.path.is_absolute() {
            row.path.clone()
        } else {
            base.join(&row.path)
        };
        let data = read_matrix_csv(&matrix_path)?;
        subjects.push(SubjectRecord::new(row.subject_id, row.site, ados, data)?);
    }
    Cohort::new(subjects)
}

/// Reads a headerless CSV of reals into a matrix (one CSV row per matrix row).
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = parse_real(field).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: format!("{field:?} is not a real number"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn parse_real(field: &str) -> Option<f64> {
    match field {
        "inf" | "Inf" | "+inf" => Some(f64::INFINITY),
        "-inf" | "-Inf" => Some(f64::NEG_INFINITY),
        _ => field.parse().ok(),
    }
}

/// Renders a matrix as headerless CSV using shortest round-trip formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 12);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&m[(i, j)].to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes a cohort as `subjects/<id>.csv` files plus `manifest.csv` under `dir`.
/// Returns the manifest path.
pub fn write_cohort(cohort: &Cohort, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let sub_dir = dir.join("subjects");
    fs::create_dir_all(&sub_dir).map_err(|e| Error::io(&sub_dir, e))?;
    let mut manifest = String::from("subject_id,site,ados,path\n");
    for s in cohort.subjects() {
        let rel = format!("subjects/{}.csv", s.id);
        write_atomic(dir.join(&rel), matrix_to_csv(&s.data).as_bytes())?;
        manifest.push_str(&format!("{},{},{},{}\n", s.id, s.site, s.ados, rel));
    }
    let manifest_path = dir.join("manifest.csv");
    write_atomic(&manifest_path, manifest.as_bytes())?;
    Ok(manifest_path)
}

/// Result of z-normalization; `degenerate` is set for constant input.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// Shifts to zero mean and scales to unit sample (n - 1) standard deviation.
pub fn znormalize(series: &[f64]) -> Normalized {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let scale = series.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    if std <= 1e-12 * scale {
        return Normalized {
            values: vec![0.0; series.len()],
            degenerate: true,
        };
    }
    Normalized {
        values: series.iter().map(|x| (x - mean) / std).collect(),
        degenerate: false,
    }
}

/// Row-wise [`znormalize`]; returns the normalized matrix and the indices of constant rows.
pub fn znormalize_rows(data: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let mut out = data.clone();
    let mut flagged = Vec::new();
    for i in 0..data.nrows() {
        let row: Vec<f64> = data.row(i).iter().copied().collect();
        let z = znormalize(&row);
        if z.degenerate {
            flagged.push(i);
        }
        for (j, v) in z.values.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    (out, flagged)
}

/// Noise amplitude added to each region on top of its block's latent signal.
pub const SYNTHETIC_NOISE: f64 = 0.6;

/// A synthetic cohort together with the planted block of every region.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    /// `blocks[subject][region]` is the latent block index of that region.
    pub blocks: Vec<Vec<usize>>,
}

/// Deterministic three-class cohort with planted block connectivity.
///
/// Subject `l` belongs to class `l % 3`; class `c` splits the regions into
/// `c + 2` near-equal blocks under a per-subject random region permutation.
/// Regions in a block share a latent white-noise signal plus independent noise,
/// so the class is encoded in the shape of the correlation graph rather than in
/// which regions are connected.
pub fn generate_synthetic_cohort_with_blocks(
    seed: u64,
    l: usize,
    k: usize,
    n: usize,
) -> Result<SyntheticCohort> {
    if l < 3 {
        return Err(Error::Domain(format!(
            "synthetic cohort needs L >= 3, got {l}"
        )));
    }
    if k < 4 {
        return Err(Error::Domain(format!(
            "synthetic cohort needs K >= 4, got {k}"
        )));
    }
    if n < 20 {
        return Err(Error::Domain(format!(
            "synthetic cohort needs N >= 20, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subjects = Vec::with_capacity(l);
    let mut blocks = Vec::with_capacity(l);
    for s in 0..l {
        let class = s % 3;
        let n_blocks = class + 2;
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let mut block_of = vec![0; k];
        for (rank, &region) in order.iter().enumerate() {
            block_of[region] = rank * n_blocks / k;
        }
        let latent: Vec<Vec<f64>> = (0..n_blocks)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let data = DMatrix::from_fn(k, n, |i, t| latent[block_of[i]][t]);
        let data = data.map(|v| v + SYNTHETIC_NOISE * rng.sample::<f64, _>(StandardNormal));
        let ados = match class {
            0 => rng.random_range(0..=8),
            1 => rng.random_range(9..=13),
            _ => rng.random_range(14..=22),
        };
        subjects.push(SubjectRecord::new(
            format!("synth-{:03}", s + 1),
            "SYN",
            ados,
            data,
        )?);
        blocks.push(block_of);
    }
    Ok(SyntheticCohort {
        cohort: Cohort::new(subjects)?,
        blocks,
    })
}

pub fn generate_synthetic_cohort(seed: u64, l: usize, k: usize, n: usize) -> Result<Cohort> {
    generate_synthetic_cohort_with_blocks(seed, l, k, n).map(|s| s.cohort)
}
