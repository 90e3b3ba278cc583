//! Loading real datasets and generating synthetic streams.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::Observation;
use crate::randomness::SeededRandomness;

/// Pixels per USPS digit.
pub const USPS_DIM: usize = 256;
const USPS_SLACK: f64 = 1e-6;

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Reads the USPS digits: one record per line, a label in `0..=9` followed by
/// 256 pixel values in `[−1, 1]`, separated by whitespace. A non-numeric
/// first line is treated as a header and skipped.
pub fn load_usps(path: &Path) -> Result<Vec<Observation>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io { path: path.to_owned(), source })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse { path: path.to_owned(), line: line_no, reason };
        let values: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if out.is_empty() && i == 0 => continue,
            Err(e) => return Err(parse_err(format!("non-numeric field: {e}"))),
        };
        if values.len() != USPS_DIM + 1 {
            return Err(parse_err(format!(
                "expected a label and {USPS_DIM} values, found {} fields",
                values.len()
            )));
        }
        let label = values[0];
        if label.fract() != 0.0 || !(0.0..=9.0).contains(&label) {
            return Err(parse_err(format!("label {label} is not a digit 0-9")));
        }
        let features = values[1..].to_vec();
        if let Some(bad) = features.iter().find(|v| !(v.abs() <= 1.0 + USPS_SLACK)) {
            return Err(Error::Validation {
                path: path.to_owned(),
                line: line_no,
                reason: format!("pixel value {bad} outside [-1, 1]"),
            });
        }
        out.push(Observation::labeled(features, label as u32));
    }
    Ok(out)
}

/// Reads one real number per line; blank lines are skipped.
pub fn load_values(path: &Path) -> Result<Vec<Observation>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io { path: path.to_owned(), source })?;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason: format!("cannot parse {field:?} as a number"),
        })?;
        if v.is_nan() {
            return Err(Error::Validation { path: path.to_owned(), line: i + 1, reason: "NaN value".into() });
        }
        out.push(Observation::scalar(v));
    }
    Ok(out)
}

fn normalize_header(h: &str) -> String {
    h.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Attributes read from the absenteeism file, with their scale divisors.
const ABSENTEEISM_BASE: [(&str, f64); 3] = [("Age", 50.0), ("Education", 3.0), ("Son", 4.0)];
const ABSENTEEISM_EXTRA: [(&str, f64); 2] = [("Social drinker", 1.0), ("Social smoker", 1.0)];
const ABSENTEEISM_LABEL: &str = "Disciplinary failure";

/// Reads the absenteeism-at-work table in file order. Features are
/// `(Age/50, Education/3, Son/4)`, extended with the social drinker and
/// smoker flags when `extended`; the label is the disciplinary-failure flag.
/// The delimiter (`;` or `,`) is detected from the header line, and header
/// matching ignores case and punctuation.
pub fn load_absenteeism(path: &Path, extended: bool) -> Result<Vec<Observation>> {
    let mut first = String::new();
    BufReader::new(open(path)?)
        .read_line(&mut first)
        .map_err(|source| Error::Io { path: path.to_owned(), source })?;
    let delimiter = if first.matches(';').count() > first.matches(',').count() { b';' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let normalized: Vec<String> = headers.iter().map(|h| normalize_header(h)).collect();
    let column = |name: &str| {
        let key = normalize_header(name);
        normalized.iter().position(|h| *h == key).ok_or_else(|| Error::Schema {
            path: path.to_owned(),
            column: name.to_owned(),
            available: headers.clone(),
        })
    };
    let mut features = Vec::new();
    let attributes = ABSENTEEISM_BASE
        .iter()
        .chain(if extended { &ABSENTEEISM_EXTRA[..] } else { &[] });
    for &(name, scale) in attributes {
        features.push((column(name)?, scale));
    }
    let label_col = column(ABSENTEEISM_LABEL)?;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line,
                reason: format!("column {:?}: cannot parse {raw:?} as a number", headers[col]),
            })
        };
        let x = features
            .iter()
            .map(|&(col, scale)| field(col).map(|v| v / scale))
            .collect::<Result<Vec<_>>>()?;
        let label = field(label_col)?;
        if label.fract() != 0.0 || label < 0.0 {
            return Err(Error::Validation {
                path: path.to_owned(),
                line,
                reason: format!("label {label} is not a nonnegative integer"),
            });
        }
        out.push(Observation::labeled(x, label as u32));
    }
    Ok(out)
}

/// A uniformly random reordering, determined by `seed`.
pub fn permute<T: Clone>(stream: &[T], seed: u64) -> Vec<T> {
    let mut out = stream.to_vec();
    out.shuffle(SeededRandomness::new(seed).rng_mut());
    out
}

/// One IID source of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Scalar 0/1 values.
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// Label 1 with probability `label_p`; features are `dim` independent
    /// normals with standard deviation `sd`, centred at 0 for label 0 and at
    /// `separation` in every coordinate for label 1.
    LabeledGaussian { dim: usize, label_p: f64, separation: f64, sd: f64 },
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Generator::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Generator::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Generator::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Generator::LabeledGaussian { dim, label_p, separation, sd } => {
                dim > 0
                    && (0.0..=1.0).contains(&label_p)
                    && separation.is_finite()
                    && sd.is_finite()
                    && sd > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid generator parameters: {self}")))
        }
    }

    fn shape(&self) -> (usize, bool) {
        match *self {
            Generator::LabeledGaussian { dim, .. } => (dim, true),
            _ => (1, false),
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Observation {
        match *self {
            Generator::Bernoulli { p } => {
                Observation::scalar(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            }
            Generator::Uniform { low, high } => Observation::scalar(rng.random_range(low..high)),
            Generator::Gaussian { mean, sd } => {
                Observation::scalar(Normal::new(mean, sd).unwrap().sample(rng))
            }
            Generator::LabeledGaussian { dim, label_p, separation, sd } => {
                let label = u32::from(rng.random::<f64>() < label_p);
                let centre = if label == 1 { separation } else { 0.0 };
                let normal = Normal::new(centre, sd).unwrap();
                let x = (0..dim).map(|_| normal.sample(rng)).collect();
                Observation::labeled(x, label)
            }
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Bernoulli { p } => write!(f, "bernoulli:{p}"),
            Generator::Uniform { low, high } => write!(f, "uniform:{low},{high}"),
            Generator::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            Generator::LabeledGaussian { dim, label_p, separation, sd } => {
                write!(f, "labeled:{dim},{label_p},{separation},{sd}")
            }
        }
    }
}

/// Parses `bernoulli:p`, `uniform:low,high`, `gaussian:mean,sd` or
/// `labeled:dim,label_p,separation,sd`.
impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::domain(format!("bad generator arguments in {s:?}")))?
        };
        let g = match (kind.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("bernoulli", &[p]) => Generator::Bernoulli { p },
            ("uniform", &[]) => Generator::Uniform { low: 0.0, high: 1.0 },
            ("uniform", &[low, high]) => Generator::Uniform { low, high },
            ("gaussian", &[]) => Generator::Gaussian { mean: 0.0, sd: 1.0 },
            ("gaussian", &[mean, sd]) => Generator::Gaussian { mean, sd },
            ("labeled", &[dim, label_p, separation, sd]) if dim.fract() == 0.0 && dim >= 1.0 => {
                Generator::LabeledGaussian { dim: dim as usize, label_p, separation, sd }
            }
            _ => {
                return Err(Error::domain(format!(
                    "unknown generator {s:?}; expected bernoulli:p, uniform:low,high, \
                     gaussian:mean,sd or labeled:dim,label_p,separation,sd"
                )))
            }
        };
        g.validate()?;
        Ok(g)
    }
}

/// A synthetic stream that is IID from `pre` before the change point and IID
/// from `post` from the change point on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub pre: Generator,
    pub post: Generator,
    /// Index of the first observation drawn from `post`; `None` means no
    /// change, and 0 means the whole stream comes from `post`.
    pub change_point: Option<usize>,
    pub length: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn iid(generator: Generator, length: usize, seed: u64) -> Self {
        Self { pre: generator.clone(), post: generator, change_point: None, length, seed }
    }
}

pub fn synth_stream(spec: &SyntheticSpec) -> Result<Vec<Observation>> {
    spec.pre.validate()?;
    spec.post.validate()?;
    if spec.pre.shape() != spec.post.shape() {
        return Err(Error::domain(
            "pre- and post-change generators produce observations of different shape",
        ));
    }
    let mut rng = SeededRandomness::new(spec.seed);
    let change = spec.change_point.unwrap_or(usize::MAX);
    Ok((0..spec.length)
        .map(|i| {
            let g = if i < change { &spec.pre } else { &spec.post };
            g.draw(rng.rng_mut())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Usps(PathBuf),
    Absenteeism { path: PathBuf, extended: bool },
    Synthetic(SyntheticSpec),
}

/// Where a stream comes from and whether to shuffle it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub source: Source,
    pub permutation_seed: Option<u64>,
}

impl StreamSpec {
    pub fn load(&self) -> Result<Vec<Observation>> {
        let stream = match &self.source {
            Source::Usps(path) => load_usps(path)?,
            Source::Absenteeism { path, extended } => load_absenteeism(path, *extended)?,
            Source::Synthetic(spec) => synth_stream(spec)?,
        };
        Ok(match self.permutation_seed {
            Some(seed) => permute(&stream, seed),
            None => stream,
        })
    }
}
