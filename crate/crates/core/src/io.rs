//! Dataset CSVs with JSON metadata sidecars, JSON model files, and
//! plot-ready surface exports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! `read(write(x)) == x` bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cusp::ControlParams;
use crate::datagen::{Branch, Dataset, Latent};
use crate::error::{Error, Result};
use crate::mdn::{Dense, MdnModel, NetworkConfig, Standardizer, TrainConfig};

const LATENT_COLUMNS: [&str; 4] = ["alpha", "beta", "true_y", "branch"];

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Header of a dataset with `p` features.
pub fn dataset_header(p: usize, latent: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    h.push("y".into());
    if latent {
        h.extend(LATENT_COLUMNS.iter().map(|s| s.to_string()));
    }
    h
}

pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(file);
    let err = write_err(path);
    writeln!(w, "{}", dataset_header(d.n_features(), d.latent().is_some()).join(",")).map_err(&err)?;
    let mut line = String::new();
    for (i, row) in d.rows().enumerate() {
        line.clear();
        for x in row {
            line.push_str(&format!("{x:?},"));
        }
        line.push_str(&format!("{:?}", d.response()[i]));
        if let Some(l) = d.latent() {
            let c = l.controls[i];
            line.push_str(&format!(
                ",{:?},{:?},{:?},{}",
                c.alpha(),
                c.beta(),
                l.noiseless_root[i],
                l.branch[i].code()
            ));
        }
        writeln!(w, "{line}").map_err(&err)?;
    }
    w.flush().map_err(&err)
}

/// Reads a dataset CSV. The header must be `x1..xp,y`, optionally followed
/// by `alpha,beta,true_y,branch`.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let y_pos = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| parse_err(1, "header has no `y` column".into()))?;
    if y_pos == 0 {
        return Err(parse_err(1, "header has no feature columns before `y`".into()));
    }
    for (j, h) in header[..y_pos].iter().enumerate() {
        if *h != format!("x{}", j + 1) {
            return Err(parse_err(1, format!("expected column `x{}`, found `{h}`", j + 1)));
        }
    }
    let trailing = &header[y_pos + 1..];
    let has_latent = match trailing.len() {
        0 => false,
        4 if trailing.iter().zip(LATENT_COLUMNS).all(|(h, e)| h == e) => true,
        _ => {
            return Err(parse_err(
                1,
                format!("unexpected columns after `y`: {}", trailing.join(",")),
            ))
        }
    };

    let p = y_pos;
    let width = header.len();
    let mut features = Vec::new();
    let mut response = Vec::new();
    let mut controls = Vec::new();
    let mut roots = Vec::new();
    let mut branches = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let num = |j: usize| -> Result<f64> {
            let cell = rec[j].trim();
            cell.parse::<f64>()
                .map_err(|_| parse_err(line, format!("column `{}`: not a number: `{cell}`", header[j])))
        };
        for j in 0..p {
            features.push(num(j)?);
        }
        response.push(num(p)?);
        if has_latent {
            let c = ControlParams::new(num(p + 1)?, num(p + 2)?)
                .map_err(|e| parse_err(line, e.to_string()))?;
            controls.push(c);
            roots.push(num(p + 3)?);
            let code = num(p + 4)?;
            let b = Branch::from_code(code as i32)
                .filter(|_| code.fract() == 0.0)
                .ok_or_else(|| parse_err(line, format!("invalid branch code `{code}`")))?;
            branches.push(b);
        }
    }
    let latent = has_latent.then_some(Latent {
        controls,
        noiseless_root: roots,
        branch: branches,
    });
    Dataset::new(p, features, response, latent).map_err(|e| parse_err(0, e.to_string()))
}

/// Sidecar path for a data file: `d.csv` -> `d.meta.json`.
pub fn meta_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.json")
}

/// Provenance written next to every generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    pub rng: String,
    pub config: serde_json::Value,
    pub n_rows: usize,
    pub cusp_fraction: Option<f64>,
    /// Seconds since the Unix epoch; omitted for byte-stable output.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created_unix: Option<u64>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRecord {
    format_version: u32,
    network: NetworkConfig,
    train: Option<TrainConfig>,
    sd_floor: f64,
    standardizer: Standardizer,
    layers: Vec<LayerRecord>,
}

pub fn save_model(m: &MdnModel, train: Option<&TrainConfig>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let record = ModelRecord {
        format_version: MODEL_FORMAT_VERSION,
        network: m.config().clone(),
        train: train.cloned(),
        sd_floor: m.sd_floor(),
        standardizer: m.standardizer().clone(),
        layers: m
            .config()
            .layer_names()
            .into_iter()
            .zip(m.layers())
            .map(|(name, l)| LayerRecord {
                name,
                rows: l.rows,
                cols: l.cols,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    write_json(&record, path)
}

/// Loads a model file; also returns the stored training config, if any.
pub fn load_model(path: impl AsRef<Path>) -> Result<(MdnModel, Option<TrainConfig>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        if e.is_eof() {
            Error::Truncated {
                path: path.to_path_buf(),
            }
        } else {
            Error::Json {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InvalidInput(format!("{}: missing format_version", path.display())))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion {
            found: version as u32,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let record: ModelRecord = serde_json::from_value(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let names = record.network.layer_names();
    if record.layers.len() != names.len() {
        return Err(Error::Dimension {
            expected: names.len(),
            got: record.layers.len(),
            context: "layer count in model file",
        });
    }
    let mut layers = Vec::with_capacity(record.layers.len());
    for (rec, name) in record.layers.into_iter().zip(names) {
        if rec.name != name {
            return Err(Error::Layer {
                layer: rec.name,
                message: format!("expected layer `{name}` at this position"),
            });
        }
        layers.push(Dense {
            rows: rec.rows,
            cols: rec.cols,
            weights: rec.weights,
            bias: rec.bias,
        });
    }
    let model = MdnModel::from_parts(record.network, layers, record.standardizer, record.sd_floor)?;
    Ok((model, record.train))
}

/// One axis of a surface grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    /// Zero-based feature index.
    pub feature: usize,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }
}

/// A two-feature grid. Features not on an axis are held at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub axes: [GridAxis; 2],
    pub base: Vec<f64>,
}

impl SurfaceGrid {
    /// Grid over features 0 and 1 of a two-input model.
    pub fn plane(x1: (f64, f64, usize), x2: (f64, f64, usize)) -> Self {
        Self {
            axes: [
                GridAxis { feature: 0, min: x1.0, max: x1.1, count: x1.2 },
                GridAxis { feature: 1, min: x2.0, max: x2.1, count: x2.2 },
            ],
            base: vec![0.0; 2],
        }
    }
}

/// Writes `x_i, x_j, mu1..muk, sd1..sdk, pi1..pik` for every grid cell,
/// first axis outermost.
pub fn export_surface(m: &MdnModel, grid: &SurfaceGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = m.config().input_dim;
    let [a, b] = grid.axes;
    if a.count == 0 || b.count == 0 {
        return Err(Error::InvalidInput("surface grid has zero cells".into()));
    }
    if a.feature >= dim || b.feature >= dim || a.feature == b.feature {
        return Err(Error::InvalidInput(format!(
            "grid features ({}, {}) must be distinct and below input_dim {dim}",
            a.feature, b.feature
        )));
    }
    if grid.base.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: grid.base.len(),
            context: "surface grid base point",
        });
    }
    if [a.min, a.max, b.min, b.max].iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("grid bounds must be finite".into()));
    }
    let k = m.k();
    let file = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(file);
    let err = write_err(path);
    let mut header = vec![format!("x{}", a.feature + 1), format!("x{}", b.feature + 1)];
    for prefix in ["mu", "sd", "pi"] {
        header.extend((1..=k).map(|i| format!("{prefix}{i}")));
    }
    writeln!(w, "{}", header.join(",")).map_err(&err)?;

    let mut x = grid.base.clone();
    for i in 0..a.count {
        for j in 0..b.count {
            x[a.feature] = a.value(i);
            x[b.feature] = b.value(j);
            let p = m.predict(&x)?;
            let cells: Vec<String> = [x[a.feature], x[b.feature]]
                .iter()
                .chain(&p.means)
                .chain(&p.sds)
                .chain(&p.weights)
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(w, "{}", cells.join(",")).map_err(&err)?;
        }
    }
    w.flush().map_err(&err)
}

/// Per-row mixture parameters for `d`, same column layout as surfaces but
/// with all feature columns.
pub fn write_predictions(m: &MdnModel, d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k = m.k();
    let preds = m.predict_rows(d.features())?;
    let file = File::create(path).map_err(write_err(path))?;
    let mut w = BufWriter::new(file);
    let err = write_err(path);
    let mut header: Vec<String> = (1..=d.n_features()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    for prefix in ["mu", "sd", "pi"] {
        header.extend((1..=k).map(|i| format!("{prefix}{i}")));
    }
    header.push("delay_fit".into());
    writeln!(w, "{}", header.join(",")).map_err(&err)?;
    for (i, (row, p)) in d.rows().zip(&preds).enumerate() {
        let y = d.response()[i];
        let cells: Vec<String> = row
            .iter()
            .chain([y].iter())
            .chain(&p.means)
            .chain(&p.sds)
            .chain(&p.weights)
            .chain([p.delay_mean(y)].iter())
            .map(|v| format!("{v:?}"))
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{self, GenConfig, ModelKind, RegressionCoeffs};
    use crate::rng;

    fn sample() -> Dataset {
        let c = RegressionCoeffs::new(vec![0.8374, 0.5228, 3.1822], vec![3.5324, 0.1579, 4.6811]).unwrap();
        datagen::generate(&GenConfig::new(ModelKind::BimodalRegCusp, 3, c, 1.0, 5)).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = sample();
        write_dataset(&d, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), d);
    }

    #[test]
    fn extreme_floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let vals = vec![1e-300, -2.5e300, 0.1, -0.0, 5e-324, 123456789.12345679];
        let d = Dataset::new(1, vals.clone(), vals.iter().rev().copied().collect(), None).unwrap();
        write_dataset(&d, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        for (a, b) in back.features().iter().zip(d.features()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn external_csv_without_latent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        fs::write(&path, "x1,x2,y\n1,2,3\n4.5,-1,0.25\n").unwrap();
        let d = read_dataset(&path).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_features(), 2);
        assert!(d.latent().is_none());
        assert_eq!(d.row(1), &[4.5, -1.0]);
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "x1,y\n1,2\n3,4\n5,6\n7\n9,10\n").unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn bad_cells_and_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        fs::write(&path, "x1,y\n1,2\n3,abc\n").unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("abc"));

        fs::write(&path, "a,b,y\n1,2,3\n").unwrap();
        assert!(matches!(read_dataset(&path).unwrap_err(), Error::Parse { line: 1, .. }));
        fs::write(&path, "x1,x2\n1,2\n").unwrap();
        assert!(matches!(read_dataset(&path).unwrap_err(), Error::Parse { line: 1, .. }));
    }

    fn small_model(k: usize) -> MdnModel {
        let mut r = rng::stream(12);
        let mut nc = NetworkConfig::new(2, k);
        nc.hidden_sizes = vec![5, 4];
        let mut m = MdnModel::init(nc, 1e-3, &mut r).unwrap();
        m.set_standardizer(Standardizer { mean: vec![0.3, -0.1], sd: vec![1.7, 0.9] }).unwrap();
        m
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = small_model(2);
        save_model(&m, Some(&TrainConfig::new(3)), &path).unwrap();
        let (back, tc) = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(tc, Some(TrainConfig::new(3)));
        let mut r = rng::stream(99);
        for _ in 0..100 {
            use rand::Rng;
            let x = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        }
    }

    #[test]
    fn model_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&small_model(1), None, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();

        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 2");
        fs::write(&path, bumped).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            Error::UnsupportedVersion { found: 2, .. }
        ));

        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path).unwrap_err(), Error::Truncated { .. }));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["layers"][1]["rows"] = serde_json::json!(3);
        fs::write(&path, v.to_string()).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("hidden2"), "{err}");
    }

    #[test]
    fn surface_export_shape_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_model(2);
        let grid = SurfaceGrid::plane((-1.0, 1.0, 2), (0.0, 2.0, 2));
        let p1 = dir.path().join("s1.csv");
        let p2 = dir.path().join("s2.csv");
        export_surface(&m, &grid, &p1).unwrap();
        export_surface(&m, &grid, &p2).unwrap();
        let text = fs::read_to_string(&p1).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().all(|l| l.split(',').count() == 3 * 2 + 2));
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());

        let empty = SurfaceGrid::plane((-1.0, 1.0, 0), (0.0, 2.0, 2));
        assert!(export_surface(&m, &empty, &p1).is_err());
    }
}
