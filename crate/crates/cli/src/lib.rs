//! Argument handling, configuration merging and output rendering for the
//! `cvdv` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvdv_core::optimize::sweep::{
    Axis, Format, Mode, Param, Spacing, SweepConfig, SweepResult, SweepRow,
};
use cvdv_core::{LogBase, Real};
use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CVDV_THREADS";

const CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Parser)]
#[command(
    name = "cvdv",
    version,
    about = "Hybrid CV/DV teleportation over lossy channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Teleportation kernel variance sigma_tel and gamma.
    Sigma(CommonArgs),
    /// Logarithmic negativity of the teleported state.
    Teleport(CommonArgs),
    /// Logarithmic negativity of the directly distributed state.
    Direct(CommonArgs),
    /// Teleported against direct distribution: entanglement and key rates.
    Compare(CommonArgs),
    /// Gain maximising the teleported entanglement.
    GainOpt(CommonArgs),
    /// Squeezing above which teleportation beats direct distribution.
    Threshold(CommonArgs),
    /// CH values and key-rate bounds.
    Qkd(CommonArgs),
}

impl Command {
    pub fn split(self) -> (Mode, CommonArgs) {
        match self {
            Command::Sigma(a) => (Mode::Sigma, a),
            Command::Teleport(a) => (Mode::Teleport, a),
            Command::Direct(a) => (Mode::Direct, a),
            Command::Compare(a) => (Mode::Compare, a),
            Command::GainOpt(a) => (Mode::GainOpt, a),
            Command::Threshold(a) => (Mode::Threshold, a),
            Command::Qkd(a) => (Mode::Qkd, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Flags shared by every subcommand.
///
/// Parameter flags take a SPEC: a number (fixed), a comma list, or
/// `min:max:count` with an optional `:log` suffix (gridded).
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file, written atomically. Standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Logarithm base for entanglement values.
    #[arg(long, value_enum)]
    pub base: Option<BaseArg>,
    /// Tail mass left out of Fock truncations.
    #[arg(long, value_name = "FLOAT")]
    pub tolerance: Option<f64>,
    /// Explicit Fock dimension of the teleported mode.
    #[arg(long, value_name = "INT")]
    pub fock_dim: Option<usize>,
    /// Cross-check every row against an independent route.
    #[arg(long)]
    pub check: bool,
    /// Scalar type used for the computation.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,

    /// Squeezing parameter.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub r: Option<String>,
    /// Transmissivity of Alice's arm.
    #[arg(long = "t-a", value_name = "SPEC", allow_hyphen_values = true)]
    pub t_a: Option<String>,
    /// Transmissivity of Bob's arm.
    #[arg(long = "t-b", value_name = "SPEC", allow_hyphen_values = true)]
    pub t_b: Option<String>,
    /// Transmissivity of both arms.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Total loss in dB; maps to T = 10^(-dB/20) per arm.
    #[arg(long = "loss-db", value_name = "SPEC", allow_hyphen_values = true)]
    pub loss_db: Option<String>,
    /// Teleportation gain.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub g: Option<String>,

    /// Lower end of the threshold search bracket.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Upper end of the threshold search bracket.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Threshold bisection width.
    #[arg(long)]
    pub r_tol: Option<f64>,
    /// Scale of the CH settings grid.
    #[arg(long)]
    pub s: Option<f64>,
    /// Bit error rate entering the key-rate bound.
    #[arg(long)]
    pub bit_error: Option<f64>,
}

impl CommonArgs {
    fn param_specs(&self) -> [(Param, &Option<String>); 6] {
        [
            (Param::R, &self.r),
            (Param::TA, &self.t_a),
            (Param::TB, &self.t_b),
            (Param::T, &self.t),
            (Param::LossDb, &self.loss_db),
            (Param::G, &self.g),
        ]
    }
}

/// A parsed parameter SPEC.
#[derive(Debug, Clone, PartialEq)]
pub enum Spec {
    Fixed(f64),
    Grid(Axis),
}

pub fn parse_spec(s: &str) -> Result<Spec, String> {
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|e| format!("invalid number {x:?}: {e}"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let spacing = match parts.len() {
            3 => Spacing::Linear,
            4 if parts[3].trim() == "log" => Spacing::Log,
            4 if parts[3].trim() == "lin" => Spacing::Linear,
            _ => return Err(format!("range {s:?} must be min:max:count[:log]")),
        };
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("invalid count {:?}: {e}", parts[2]))?;
        Ok(Spec::Grid(Axis::Range {
            min: num(parts[0])?,
            max: num(parts[1])?,
            count,
            spacing,
        }))
    } else if s.contains(',') {
        Ok(Spec::Grid(Axis::List(
            s.split(',').map(num).collect::<Result<_, _>>()?,
        )))
    } else {
        Ok(Spec::Fixed(num(s)?))
    }
}

/// Reads a TOML configuration, filling in `mode` when the file omits it.
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<SweepConfig, String> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
    if let Some(mode) = mode {
        match table.get("mode") {
            None => {
                table.insert("mode".into(), toml::Value::String(mode.name().into()));
            }
            Some(toml::Value::String(m)) if m == mode.name() => {}
            Some(other) => {
                return Err(format!(
                    "config mode {other} does not match subcommand {mode}"
                ));
            }
        }
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| format!("config: {e}"))
}

/// Effective configuration: file values, then flags.
pub fn build_config(mode: Mode, args: &CommonArgs) -> Result<SweepConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config(&text, Some(mode))?
        }
        None => SweepConfig::new(mode),
    };
    for (param, spec) in args.param_specs() {
        let Some(spec) = spec else { continue };
        cfg.fixed.set(param, None);
        cfg.grid.remove(&param);
        match parse_spec(spec).map_err(|e| format!("--{}: {e}", param.name().replace('_', "-")))? {
            Spec::Fixed(v) => cfg.fixed.set(param, Some(v)),
            Spec::Grid(axis) => {
                cfg.grid.insert(param, axis);
            }
        }
    }
    let f = &mut cfg.fixed;
    if let Some(b) = args.base {
        f.base = match b {
            BaseArg::Two => LogBase::Two,
            BaseArg::E => LogBase::Natural,
        };
    }
    if let Some(t) = args.tolerance {
        f.tolerance = t;
    }
    if args.fock_dim.is_some() {
        f.fock_dim = args.fock_dim;
    }
    if args.check {
        f.check = true;
    }
    f.r_min = args.r_min.or(f.r_min);
    f.r_max = args.r_max.or(f.r_max);
    f.r_tol = args.r_tol.or(f.r_tol);
    f.s = args.s.or(f.s);
    f.bit_error = args.bit_error.or(f.bit_error);
    if let Some(fmt) = args.format {
        cfg.output.format = match fmt {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if args.out.is_some() {
        cfg.output.path = args.out.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// A value in an output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(Option<f64>),
    Int(Option<usize>),
    Text(Option<String>),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(Some(v)) => format_float(*v),
            Cell::Int(Some(v)) => v.to_string(),
            Cell::Text(Some(s)) => s.clone(),
            _ => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(Some(v)) if v.is_finite() => json!(v),
            Cell::Int(Some(v)) => json!(v),
            Cell::Text(Some(s)) => json!(s),
            _ => Value::Null,
        }
    }
}

/// Scientific notation with 16 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.15e}")
    } else {
        v.to_string()
    }
}

type Extract<T> = fn(&SweepRow<T>) -> Cell;

pub struct Column<T> {
    pub name: &'static str,
    pub unit: String,
    extract: Extract<T>,
}

impl<T> Column<T> {
    pub fn header(&self) -> String {
        format!("{}[{}]", self.name, self.unit)
    }
}

fn f<T: Real>(v: Option<T>) -> Cell {
    Cell::Float(v.map(|x| x.as_f64()))
}

fn clamp<T: Real>(v: Option<T>) -> Cell {
    f(v.map(|x| x.max(T::zero())))
}

/// Output columns for a configuration, in order.
pub fn columns<T: Real>(cfg: &SweepConfig) -> Vec<Column<T>> {
    let base = cfg.fixed.base.label().to_string();
    let one = || "1".to_string();
    let col = |name: &'static str, unit: String, extract: Extract<T>| Column {
        name,
        unit,
        extract,
    };
    let symmetric = cfg.fixed.t_a.is_none() && !cfg.grid.contains_key(&Param::TA);
    let gridded = |p: Param| cfg.grid.contains_key(&p);

    let mut out = Vec::new();
    let channel = |out: &mut Vec<Column<T>>| {
        if symmetric {
            out.push(col("loss_db", "dB".into(), |r| f(r.loss_db)));
            out.push(col("T", one(), |r| f(r.t)));
        } else {
            out.push(col("t_a", one(), |r| f(r.t_a)));
            out.push(col("t_b", one(), |r| f(r.t_b)));
        }
    };
    let key_unit = || "bits/round".to_string();
    match cfg.mode {
        Mode::Sigma | Mode::Teleport => {
            out.push(col("r", one(), |r| f(r.r)));
            channel(&mut out);
            out.push(col("g", one(), |r| f(r.g)));
            out.push(col("sigma_tel", one(), |r| f(r.sigma_tel)));
            out.push(col("gamma", one(), |r| f(r.gamma)));
            if cfg.mode == Mode::Teleport {
                out.push(col("cutoff", one(), |r| Cell::Int(r.cutoff)));
                out.push(col("residual", one(), |r| f(r.residual)));
                out.push(col("e_ln_teleported", base.clone(), |r| {
                    f(r.e_ln_teleported)
                }));
            }
        }
        Mode::Direct => {
            channel(&mut out);
            out.push(col("e_ln_direct", base.clone(), |r| f(r.e_ln_direct)));
        }
        Mode::Compare => {
            channel(&mut out);
            out.push(col("e_ln_teleported", base.clone(), |r| {
                f(r.e_ln_teleported)
            }));
            out.push(col("e_ln_direct", base.clone(), |r| f(r.e_ln_direct)));
            out.push(col("ratio", one(), |r| f(r.ratio)));
            out.push(col("key_rate_teleported", key_unit(), |r| {
                clamp(r.key_rate_teleported)
            }));
            out.push(col("key_rate_direct", key_unit(), |r| {
                clamp(r.key_rate_direct)
            }));
            if gridded(Param::R) {
                out.push(col("r", one(), |r| f(r.r)));
            }
            if gridded(Param::G) {
                out.push(col("g", one(), |r| f(r.g)));
            }
        }
        Mode::GainOpt => {
            out.push(col("r", one(), |r| f(r.r)));
            channel(&mut out);
            out.push(col("g_opt", one(), |r| f(r.g_opt)));
            out.push(col("g_target", one(), |r| f(r.g_target)));
            out.push(col("e_ln_max", base.clone(), |r| f(r.e_ln_max)));
            out.push(col("iterations", one(), |r| Cell::Int(r.iterations)));
            out.push(col("note", "text".into(), |r| Cell::Text(r.note.clone())));
        }
        Mode::Threshold => {
            channel(&mut out);
            out.push(col("r_th", one(), |r| f(r.r_th)));
            out.push(col("iterations", one(), |r| Cell::Int(r.iterations)));
            out.push(col("note", "text".into(), |r| Cell::Text(r.note.clone())));
        }
        Mode::Qkd => {
            out.push(col("r", one(), |r| f(r.r)));
            channel(&mut out);
            out.push(col("g", one(), |r| f(r.g)));
            out.push(col("ch_teleported", one(), |r| f(r.ch_teleported)));
            out.push(col("ch_direct", one(), |r| f(r.ch_direct)));
            out.push(col("key_rate_teleported_raw", key_unit(), |r| {
                f(r.key_rate_teleported)
            }));
            out.push(col("key_rate_direct_raw", key_unit(), |r| {
                f(r.key_rate_direct)
            }));
            out.push(col("key_rate_teleported", key_unit(), |r| {
                clamp(r.key_rate_teleported)
            }));
            out.push(col("key_rate_direct", key_unit(), |r| {
                clamp(r.key_rate_direct)
            }));
        }
    }
    if cfg.fixed.check {
        out.push(col("check_deviation", one(), |r| f(r.check_deviation)));
    }
    out.push(col("error", "text".into(), |r| Cell::Text(r.error.clone())));
    out
}

/// TOML rendering of a configuration.
pub fn config_toml(cfg: &SweepConfig) -> String {
    toml::to_string(cfg).expect("sweep configuration serialises to TOML")
}

/// Recovers the configuration echoed in a CSV metadata block.
pub fn config_from_csv(text: &str) -> Result<SweepConfig, String> {
    let toml: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            l.strip_prefix(CONFIG_PREFIX)
                .or_else(|| (l == CONFIG_PREFIX.trim_end()).then_some(""))
        })
        .map(|l| format!("{l}\n"))
        .collect();
    parse_config(&toml, None)
}

fn metadata_lines<T: Real>(cfg: &SweepConfig, result: &SweepResult<T>) -> Vec<String> {
    let mut lines = vec![format!("# cvdv {VERSION}")];
    lines.push(format!("# mode: {}", cfg.mode));
    lines.push(format!("# base: {}", result.base.label()));
    lines.push(format!("# rows: {}", result.rows.len()));
    lines.push(format!("# errors: {}", result.error_count()));
    if let Some(d) = result.max_check_deviation() {
        lines.push(format!(
            "# max_check_deviation: {}",
            format_float(d.as_f64())
        ));
    }
    if let Some(model) = &result.attack_model {
        lines.push(format!("# key rate bound: 2*CH - h(e), {model}"));
    }
    for rs in &result.reference_settings {
        let c = |z: [f64; 2]| format!("({}, {})", format_float(z[0]), format_float(z[1]));
        lines.push(format!(
            "# reference settings r={} g={}: teleported alpha=[{}, {}] beta=[{}, {}] CH={}; direct alpha=[{}, {}] beta=[{}, {}] CH={}",
            rs.r.as_f64(),
            rs.g.as_f64(),
            c(rs.teleported.alpha1),
            c(rs.teleported.alpha2),
            c(rs.teleported.beta1),
            c(rs.teleported.beta2),
            format_float(rs.ch_teleported.as_f64()),
            c(rs.direct.alpha1),
            c(rs.direct.alpha2),
            c(rs.direct.beta1),
            c(rs.direct.beta2),
            format_float(rs.ch_direct.as_f64()),
        ));
    }
    for line in config_toml(cfg).lines() {
        lines.push(format!("{CONFIG_PREFIX}{line}").trim_end().to_string());
    }
    lines
}

pub fn render_csv<T: Real>(cfg: &SweepConfig, result: &SweepResult<T>) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    for line in metadata_lines(cfg, result) {
        writeln!(buf, "{line}").map_err(|e| e.to_string())?;
    }
    let cols = columns::<T>(cfg);
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(cols.iter().map(Column::header))
        .map_err(|e| e.to_string())?;
    for row in &result.rows {
        w.write_record(cols.iter().map(|c| (c.extract)(row).csv()))
            .map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

pub fn render_json<T: Real>(cfg: &SweepConfig, result: &SweepResult<T>) -> Result<Vec<u8>, String> {
    let cols = columns::<T>(cfg);
    let rows: Vec<Value> = result
        .rows
        .iter()
        .map(|row| {
            Value::Object(
                cols.iter()
                    .map(|c| (c.name.to_string(), (c.extract)(row).json()))
                    .collect(),
            )
        })
        .collect();
    let units: serde_json::Map<String, Value> = cols
        .iter()
        .map(|c| (c.name.to_string(), json!(c.unit)))
        .collect();
    let refs: Vec<Value> = result
        .reference_settings
        .iter()
        .map(|rs| {
            json!({
                "r": rs.r.as_f64(),
                "g": rs.g.as_f64(),
                "teleported": rs.teleported,
                "ch_teleported": rs.ch_teleported.as_f64(),
                "direct": rs.direct,
                "ch_direct": rs.ch_direct.as_f64(),
            })
        })
        .collect();
    let doc = json!({
        "tool": "cvdv",
        "version": VERSION,
        "config": cfg,
        "base": result.base.label(),
        "units": units,
        "errors": result.error_count(),
        "max_check_deviation": result.max_check_deviation().map(|d| d.as_f64()),
        "attack_model": result.attack_model,
        "reference_settings": refs,
        "rows": rows,
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| e.to_string())?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Thread count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        Err(_) => Ok(None),
    }
}

pub fn render<T: Real>(cfg: &SweepConfig, result: &SweepResult<T>) -> Result<Vec<u8>, String> {
    match cfg.output.format {
        Format::Csv => render_csv(cfg, result),
        Format::Json => render_json(cfg, result),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs() {
        assert_eq!(parse_spec("0.5").unwrap(), Spec::Fixed(0.5));
        assert_eq!(
            parse_spec("1,2").unwrap(),
            Spec::Grid(Axis::List(vec![1.0, 2.0]))
        );
        assert_eq!(
            parse_spec("0:10:11").unwrap(),
            Spec::Grid(Axis::Range {
                min: 0.0,
                max: 10.0,
                count: 11,
                spacing: Spacing::Linear
            })
        );
        assert!(matches!(
            parse_spec("0.1:1:5:log").unwrap(),
            Spec::Grid(Axis::Range {
                spacing: Spacing::Log,
                ..
            })
        ));
        assert!(parse_spec("1:2").is_err());
        assert!(parse_spec("x").is_err());
    }

    #[test]
    fn float_format_has_sixteen_digits() {
        assert_eq!(format_float(0.1), "1.000000000000000e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[fixed]\nr = 1.0\nt = 0.5\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            r: Some("0,1,2".into()),
            ..Default::default()
        };
        let cfg = build_config(Mode::Teleport, &args).unwrap();
        assert_eq!(cfg.fixed.r, None);
        assert_eq!(cfg.grid[&Param::R], Axis::List(vec![0.0, 1.0, 2.0]));
        assert_eq!(cfg.fixed.t, Some(0.5));
    }

    #[test]
    fn mismatched_mode_rejected() {
        assert!(parse_config("mode = \"direct\"\n", Some(Mode::Teleport)).is_err());
    }
}
