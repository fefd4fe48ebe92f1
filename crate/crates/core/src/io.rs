//! File formats: particle files, model files, CSV tables and generator configs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use toml::Spanned;

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::metrics::{DeviationMap, SeverityScore};
use crate::model::{ModelParts, PpcaModel};
use crate::raters::RatingsTable;
use crate::synthetic::{Deformation, DirectionMode, GeneratorSpec};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Extensions recognized as particle files when reading a directory.
pub const PARTICLE_EXTENSIONS: [&str; 3] = ["particles", "pts", "txt"];

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses particle-file text: one `x y z` per line, `#` comments and blank
/// lines ignored.
pub fn parse_particles(text: &str, path: &Path) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut xyz = [0.0f64; 3];
        let mut fields = line.split_whitespace();
        for v in &mut xyz {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(path, i + 1, "expected 3 numbers"))?;
            *v = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("not a number: `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, i + 1, format!("non-finite value `{tok}`")));
            }
        }
        if fields.next().is_some() {
            return Err(parse_err(path, i + 1, "expected 3 numbers"));
        }
        out.push(xyz);
    }
    Ok(out)
}

pub fn read_particle_file(path: &Path) -> Result<Vec<[f64; 3]>> {
    parse_particles(&read_text(path)?, path)
}

pub fn write_particle_file(path: &Path, particles: &[[f64; 3]]) -> Result<()> {
    let mut s = String::new();
    for [x, y, z] in particles {
        writeln!(s, "{x:?} {y:?} {z:?}").unwrap();
    }
    write_text(path, &s)
}

/// Particle files in `dir`, sorted by file name.
pub fn list_particle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && PARTICLE_EXTENSIONS.contains(&ext) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads one particle file or every particle file in a directory. Shape ids
/// are file stems; all shapes must have the same particle count.
pub fn read_particles(path: &Path) -> Result<CorrespondenceSet> {
    let files = if path.is_dir() {
        list_particle_files(path)?
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    };
    if files.is_empty() {
        return Err(Error::NoInput(path.to_path_buf()));
    }
    let mut ids = Vec::with_capacity(files.len());
    let mut shapes = Vec::with_capacity(files.len());
    for f in &files {
        let particles = read_particle_file(f)?;
        let id = stem(f);
        if particles.is_empty() {
            return Err(parse_err(f, 0, "no particles"));
        }
        if let Some(first) = shapes.first().map(Vec::len) {
            if particles.len() != first {
                return Err(Error::ParticleCountMismatch {
                    id,
                    expected: first,
                    found: particles.len(),
                });
            }
        }
        ids.push(id);
        shapes.push(particles);
    }
    CorrespondenceSet::from_particles(ids, shapes)
}

/// Writes `<dir>/<id>.particles` for every shape, creating `dir`.
pub fn write_particle_dir(dir: &Path, set: &CorrespondenceSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, id) in set.ids().iter().enumerate() {
        write_particle_file(&dir.join(format!("{id}.particles")), &set.particles(i))?;
    }
    Ok(())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_list(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_num)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders a model as `key = value` lines, numbers with 17 significant
/// digits.
pub fn model_to_string(model: &PpcaModel) -> String {
    let m = model.parts();
    let mut s = String::new();
    writeln!(s, "# shape normality model").unwrap();
    writeln!(s, "format_version = {MODEL_FORMAT_VERSION}").unwrap();
    writeln!(s, "p = {}", model.p()).unwrap();
    writeln!(s, "n_train = {}", m.n_train).unwrap();
    writeln!(s, "d = {}", model.d()).unwrap();
    writeln!(s, "sigma2 = {}", fmt_num(m.sigma2)).unwrap();
    writeln!(s, "explained_ratio = {}", fmt_num(m.explained_ratio)).unwrap();
    writeln!(s, "center_shapes = {}", m.center_shapes).unwrap();
    writeln!(s, "fingerprint = {}", m.fingerprint).unwrap();
    writeln!(s, "mu = {}", fmt_list(m.mean.iter().copied())).unwrap();
    writeln!(
        s,
        "eigenvalues = {}",
        fmt_list(m.eigenvalues.iter().copied())
    )
    .unwrap();
    writeln!(s, "spectrum = {}", fmt_list(m.spectrum.iter().copied())).unwrap();
    for col in m.basis.column_iter() {
        writeln!(s, "basis = {}", fmt_list(col.iter().copied())).unwrap();
    }
    s
}

/// Parses the output of [`model_to_string`].
pub fn model_from_str(text: &str, path: &Path) -> Result<PpcaModel> {
    let mut version = None;
    let mut p = None;
    let mut n_train = None;
    let mut d = None;
    let mut sigma2 = None;
    let mut ratio = None;
    let mut center = None;
    let mut fingerprint = None;
    let mut mu = None;
    let mut eigenvalues = None;
    let mut spectrum = None;
    let mut basis: Vec<Vec<f64>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let no = i + 1;
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| parse_err(path, no, "expected `key = value`"))?;
        if version.is_none() && key != "format_version" {
            return Err(Error::ModelVersion("missing format_version".into()));
        }
        let int = || -> Result<usize> {
            value
                .parse()
                .map_err(|_| parse_err(path, no, format!("`{key}` must be an integer")))
        };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, no, format!("bad number `{s}` in `{key}`")))
        };
        let list = || -> Result<Vec<f64>> { value.split_whitespace().map(num).collect() };
        let once = |slot_filled: bool| -> Result<()> {
            if slot_filled {
                Err(parse_err(path, no, format!("duplicate key `{key}`")))
            } else {
                Ok(())
            }
        };
        match key {
            "format_version" => {
                once(version.is_some())?;
                if value != MODEL_FORMAT_VERSION.to_string() {
                    return Err(Error::ModelVersion(format!(
                        "format_version {value}, this build reads {MODEL_FORMAT_VERSION}"
                    )));
                }
                version = Some(());
            }
            "p" => {
                once(p.is_some())?;
                p = Some(int()?);
            }
            "n_train" => {
                once(n_train.is_some())?;
                n_train = Some(int()?);
            }
            "d" => {
                once(d.is_some())?;
                d = Some(int()?);
            }
            "sigma2" => {
                once(sigma2.is_some())?;
                sigma2 = Some(num(value)?);
            }
            "explained_ratio" => {
                once(ratio.is_some())?;
                ratio = Some(num(value)?);
            }
            "center_shapes" => {
                once(center.is_some())?;
                center = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(parse_err(path, no, "center_shapes must be true or false")),
                });
            }
            "fingerprint" => {
                once(fingerprint.is_some())?;
                fingerprint = Some(value.to_string());
            }
            "mu" => {
                once(mu.is_some())?;
                mu = Some(list()?);
            }
            "eigenvalues" => {
                once(eigenvalues.is_some())?;
                eigenvalues = Some(list()?);
            }
            "spectrum" => {
                once(spectrum.is_some())?;
                spectrum = Some(list()?);
            }
            "basis" => basis.push(list()?),
            _ => return Err(parse_err(path, no, format!("unknown key `{key}`"))),
        }
    }
    if version.is_none() {
        return Err(Error::ModelVersion("missing format_version".into()));
    }
    let missing = |k: &str| parse_err(path, 0, format!("missing `{k}`"));
    let p = p.ok_or_else(|| missing("p"))?;
    let d = d.ok_or_else(|| missing("d"))?;
    let mu = mu.ok_or_else(|| missing("mu"))?;
    let eigenvalues = eigenvalues.ok_or_else(|| missing("eigenvalues"))?;
    if mu.len() != p {
        return Err(parse_err(
            path,
            0,
            format!("mu has {} values, p = {p}", mu.len()),
        ));
    }
    if eigenvalues.len() != d || basis.len() != d {
        return Err(parse_err(
            path,
            0,
            format!(
                "d = {d} but found {} eigenvalues and {} basis rows",
                eigenvalues.len(),
                basis.len()
            ),
        ));
    }
    if let Some(row) = basis.iter().find(|r| r.len() != p) {
        return Err(parse_err(
            path,
            0,
            format!("basis row has {} values, p = {p}", row.len()),
        ));
    }
    let basis = DMatrix::from_fn(p, d, |r, c| basis[c][r]);
    PpcaModel::from_parts(ModelParts {
        n_train: n_train.ok_or_else(|| missing("n_train"))?,
        mean: DVector::from_vec(mu),
        eigenvalues,
        basis,
        sigma2: sigma2.ok_or_else(|| missing("sigma2"))?,
        spectrum: spectrum.unwrap_or_default(),
        explained_ratio: ratio.ok_or_else(|| missing("explained_ratio"))?,
        center_shapes: center.unwrap_or(false),
        fingerprint: fingerprint.ok_or_else(|| missing("fingerprint"))?,
    })
}

pub fn write_model(path: &Path, model: &PpcaModel) -> Result<()> {
    write_text(path, &model_to_string(model))
}

pub fn read_model(path: &Path) -> Result<PpcaModel> {
    model_from_str(&read_text(path)?, path)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, want: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err(path))?;
    let got: Vec<&str> = header.iter().collect();
    if got.len() < want.len() || got[..want.len()] != *want {
        return Err(parse_err(
            path,
            1,
            format!(
                "expected header `{}`, got `{}`",
                want.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

pub const SCORE_COLUMNS: [&str; 5] = [
    "id",
    "snm_full",
    "snm_latent_paper",
    "snm_latent_exact",
    "snm_null",
];

pub fn write_scores(path: &Path, ids: &[String], scores: &[SeverityScore]) -> Result<()> {
    if ids.len() != scores.len() {
        return Err(Error::LengthMismatch(ids.len(), scores.len()));
    }
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(SCORE_COLUMNS).map_err(&err)?;
    for (id, s) in ids.iter().zip(scores) {
        w.write_record([
            id.clone(),
            format!("{:?}", s.full),
            format!("{:?}", s.latent_paper),
            format!("{:?}", s.latent_exact),
            format!("{:?}", s.null),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub full: f64,
    pub latent_paper: f64,
    pub latent_exact: f64,
    pub null: f64,
}

fn field<'a>(path: &Path, rec: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    rec.get(i)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| parse_err(path, line, format!("missing `{name}`")))
}

fn number(path: &Path, rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let s = field(path, rec, i, name)?;
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            parse_err(
                path,
                line,
                format!("`{name}` is not a finite number: `{s}`"),
            )
        })
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &SCORE_COLUMNS)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        rows.push(ScoreRow {
            id: field(path, &rec, 0, "id")?.to_string(),
            full: number(path, &rec, 1, "snm_full")?,
            latent_paper: number(path, &rec, 2, "snm_latent_paper")?,
            latent_exact: number(path, &rec, 3, "snm_latent_exact")?,
            null: number(path, &rec, 4, "snm_null")?,
        });
    }
    Ok(rows)
}

/// One row of a labels CSV (`id,diagnosis[,severity]`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub id: String,
    /// True for pathological.
    pub diagnosis: bool,
    pub severity: Option<f64>,
}

fn parse_diagnosis(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "pathological" | "abnormal" => Some(true),
        "0" | "false" | "normal" => Some(false),
        _ => None,
    }
}

/// Reads `id,diagnosis[,severity]`. Diagnosis is `1`/`0`, `true`/`false` or
/// `pathological`/`normal`.
pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["id", "diagnosis"])?;
    let has_severity = rdr
        .headers()
        .map_err(csv_err(path))?
        .get(2)
        .is_some_and(|h| h == "severity");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let d = field(path, &rec, 1, "diagnosis")?;
        rows.push(LabelRow {
            id: field(path, &rec, 0, "id")?.to_string(),
            diagnosis: parse_diagnosis(d)
                .ok_or_else(|| parse_err(path, line, format!("bad diagnosis `{d}`")))?,
            severity: if has_severity {
                Some(number(path, &rec, 2, "severity")?)
            } else {
                None
            },
        });
    }
    Ok(rows)
}

/// Reads `subject_id,rater_id,rating` into a table on a `1..=categories`
/// scale.
pub fn read_ratings(path: &Path, categories: usize) -> Result<RatingsTable> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["subject_id", "rater_id", "rating"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let r = field(path, &rec, 2, "rating")?;
        let rating: i64 = r
            .parse()
            .map_err(|_| parse_err(path, line, format!("rating `{r}` is not an integer")))?;
        rows.push((
            field(path, &rec, 0, "subject_id")?.to_string(),
            field(path, &rec, 1, "rater_id")?.to_string(),
            rating,
        ));
    }
    RatingsTable::new(categories, rows)
}

pub fn write_ratings(path: &Path, table: &RatingsTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["subject_id", "rater_id", "rating"])
        .map_err(&err)?;
    for e in table.entries() {
        w.write_record([
            table.subjects()[e.subject].as_str(),
            table.raters()[e.rater].as_str(),
            &e.category.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `subject_id,severity`.
pub fn write_severities(path: &Path, subjects: &[String], severity: &[f64]) -> Result<()> {
    if subjects.len() != severity.len() {
        return Err(Error::LengthMismatch(subjects.len(), severity.len()));
    }
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["subject_id", "severity"]).map_err(&err)?;
    for (s, v) in subjects.iter().zip(severity) {
        w.write_record([s.clone(), format!("{v:?}")])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let with_severity = rows.iter().any(|r| r.severity.is_some());
    if with_severity {
        w.write_record(["id", "diagnosis", "severity"])
            .map_err(&err)?;
    } else {
        w.write_record(["id", "diagnosis"]).map_err(&err)?;
    }
    for r in rows {
        let mut rec = vec![r.id.clone(), u8::from(r.diagnosis).to_string()];
        if with_severity {
            rec.push(r.severity.map(|v| format!("{v:?}")).unwrap_or_default());
        }
        w.write_record(rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `particle_index,x,y,z,wx,wy,wz,raw_norm,whitened_norm`.
pub fn write_deviation_map(path: &Path, map: &DeviationMap) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record([
        "particle_index",
        "x",
        "y",
        "z",
        "wx",
        "wy",
        "wz",
        "raw_norm",
        "whitened_norm",
    ])
    .map_err(&err)?;
    for k in 0..map.raw.len() {
        let [x, y, z] = map.raw[k];
        let [wx, wy, wz] = map.whitened[k];
        let mut rec = vec![k.to_string()];
        rec.extend(
            [x, y, z, wx, wy, wz, map.raw_norm[k], map.whitened_norm[k]]
                .iter()
                .map(|v| format!("{v:?}")),
        );
        w.write_record(rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    seed: Option<Spanned<u64>>,
    particles: Spanned<usize>,
    latent_dim: Option<Spanned<usize>>,
    n_normal: Spanned<usize>,
    n_pathological: Spanned<usize>,
    sigma: Spanned<f64>,
    latent_scales: Spanned<Vec<f64>>,
    deformation: Spanned<RawDeformation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeformation {
    mode: Spanned<String>,
    amplitude: Spanned<f64>,
    extent: Option<Spanned<usize>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a TOML generator config. `fallback_seed` is used when the file has
/// no `seed`. Errors carry the line of the offending key.
///
/// ```toml
/// seed = 7
/// particles = 200
/// n_normal = 90
/// n_pathological = 30
/// sigma = 1.0
/// latent_scales = [30.0, 25.0, 20.0, 15.0, 12.0, 10.0]
///
/// [deformation]
/// mode = "null-space"      # or "in-span", "random"
/// amplitude = 6.0          # per affected particle, in units of sigma
/// extent = 20              # particles covered; default 1
/// ```
pub fn parse_generator_config(text: &str, fallback_seed: u64) -> Result<GeneratorSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        msg: e.message().trim().to_string(),
    })?;
    let at = |span: std::ops::Range<usize>, msg: String| Error::Config {
        line: line_of(text, span.start),
        msg,
    };
    let scales = raw.latent_scales.get_ref().clone();
    if let Some(d) = &raw.latent_dim {
        if *d.get_ref() != scales.len() {
            return Err(at(
                d.span(),
                format!(
                    "latent_dim = {} but latent_scales has {} entries",
                    d.get_ref(),
                    scales.len()
                ),
            ));
        }
    }
    let def = raw.deformation.into_inner();
    let mode = match def.mode.get_ref().as_str() {
        "in-span" => DirectionMode::InSpan,
        "null-space" => DirectionMode::NullSpace,
        "random" => DirectionMode::Random,
        other => {
            return Err(at(
                def.mode.span(),
                format!("mode must be \"in-span\", \"null-space\" or \"random\", got \"{other}\""),
            ))
        }
    };
    let spec = GeneratorSpec {
        seed: raw.seed.as_ref().map_or(fallback_seed, |s| *s.get_ref()),
        particles: *raw.particles.get_ref(),
        n_normal: *raw.n_normal.get_ref(),
        n_pathological: *raw.n_pathological.get_ref(),
        sigma: *raw.sigma.get_ref(),
        latent_scales: scales,
        deformation: Deformation {
            mode,
            amplitude: *def.amplitude.get_ref(),
            extent: def.extent.as_ref().map_or(1, |e| *e.get_ref()),
        },
    };
    // point the message at the key most likely responsible
    spec.validate().map_err(|e| {
        let msg = match &e {
            Error::SpecInvalid(m) => m.clone(),
            other => other.to_string(),
        };
        let span = if msg.contains("sigma") {
            raw.sigma.span()
        } else if msg.contains("amplitude") {
            def.amplitude.span()
        } else if msg.contains("extent") {
            def.extent
                .as_ref()
                .map_or(def.amplitude.span(), |s| s.span())
        } else if msg.contains("latent") {
            raw.latent_scales.span()
        } else if raw.particles.get_ref() == &0 {
            raw.particles.span()
        } else if raw.n_normal.get_ref() == &0 {
            raw.n_normal.span()
        } else {
            raw.n_pathological.span()
        };
        at(span, msg)
    })?;
    Ok(spec)
}

pub fn read_generator_config(path: &Path, fallback_seed: u64) -> Result<GeneratorSpec> {
    parse_generator_config(&read_text(path)?, fallback_seed)
}
