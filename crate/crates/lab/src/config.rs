//! Plain-text experiment configs: `section.key = value` lines, `#`
//! comments, no schema engine. Errors carry the offending line number.

use nonlocal_core::grid::{Field, GridSpec};
use nonlocal_core::kernels::{make_standard_kernel, rescale_kernel, ConvKernel, KernelKind};
use nonlocal_core::rng::Rng;
use nonlocal_core::verify::{FieldGenerator, GeneratorKind};
use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path, line, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed key/value pairs in file order, with line numbers for
/// diagnostics and access tracking for unknown-key detection.
#[derive(Debug)]
pub struct RawConfig {
    path: String,
    entries: Vec<(String, String, usize)>,
    accessed: RefCell<BTreeSet<String>>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<RawConfig, ConfigError> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError {
                    path: path.into(),
                    line: Some(line_no),
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() {
                return Err(ConfigError {
                    path: path.into(),
                    line: Some(line_no),
                    message: "empty key".into(),
                });
            }
            if !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
            {
                return Err(ConfigError {
                    path: path.into(),
                    line: Some(line_no),
                    message: format!("key `{key}` has characters outside [a-z0-9._]"),
                });
            }
            if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| k == key) {
                return Err(ConfigError {
                    path: path.into(),
                    line: Some(line_no),
                    message: format!("key `{key}` already set on line {first}"),
                });
            }
            entries.push((key.to_string(), value.to_string(), line_no));
        }
        Ok(RawConfig {
            path: path.into(),
            entries,
            accessed: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    fn err(&self, key: &str, message: String) -> ConfigError {
        let line = self
            .entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, _, l)| *l);
        ConfigError {
            path: self.path.clone(),
            line,
            message,
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.accessed.borrow_mut().insert(key.to_string());
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| self.err(key, format!("missing required key `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.err(key, format!("`{key}` expects a number, got `{v}`"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?
            .ok_or_else(|| self.err(key, format!("missing required key `{key}`")))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                self.err(
                    key,
                    format!("`{key}` expects a nonnegative integer, got `{v}`"),
                )
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get_usize(key)?.unwrap_or(default))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                self.err(
                    key,
                    format!("`{key}` expects a nonnegative integer, got `{v}`"),
                )
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.err(key, format!("`{key}` expects true/false, got `{v}`"))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    out.push(part.parse::<f64>().map_err(|_| {
                        self.err(key, format!("`{key}` expects numbers, got `{part}`"))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Any keys never read by the pipeline are typos; report the first.
    pub fn ensure_fully_consumed(&self) -> Result<(), ConfigError> {
        let accessed = self.accessed.borrow();
        for (key, _, line) in &self.entries {
            if !accessed.contains(key) {
                return Err(ConfigError {
                    path: self.path.clone(),
                    line: Some(*line),
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Simulate,
    VerifyInequality,
    Envelope,
    Dispersal,
    Constants,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Simulate => "simulate",
            Pipeline::VerifyInequality => "verify-inequality",
            Pipeline::Envelope => "envelope",
            Pipeline::Dispersal => "dispersal",
            Pipeline::Constants => "constants",
        }
    }
}

pub fn parse_pipeline(raw: &RawConfig) -> Result<Pipeline, ConfigError> {
    match raw.require("pipeline")? {
        "simulate" => Ok(Pipeline::Simulate),
        "verify-inequality" => Ok(Pipeline::VerifyInequality),
        "envelope" => Ok(Pipeline::Envelope),
        "dispersal" => Ok(Pipeline::Dispersal),
        "constants" => Ok(Pipeline::Constants),
        other => Err(raw.err(
            "pipeline",
            format!(
                "unknown pipeline `{other}` (expected simulate, verify-inequality, \
                 envelope, dispersal, or constants)"
            ),
        )),
    }
}

pub fn parse_grid(raw: &RawConfig) -> Result<GridSpec, ConfigError> {
    let dim = raw.usize_or("grid.dim", 1)?;
    let l = raw.require_f64("grid.L")?;
    let n = raw
        .get_usize("grid.n")?
        .ok_or_else(|| raw.err("grid.n", "missing required key `grid.n`".into()))?;
    GridSpec::new(dim, l, n).map_err(|e| raw.err("grid.n", e.to_string()))
}

pub fn parse_kernel_kind(raw: &RawConfig) -> Result<KernelKind, ConfigError> {
    match raw.get("kernel.kind").unwrap_or("box") {
        "box" => Ok(KernelKind::Box),
        "bump" => Ok(KernelKind::Bump),
        "truncated_gaussian" => Ok(KernelKind::TruncatedGaussian),
        other => Err(raw.err(
            "kernel.kind",
            format!("unknown kernel kind `{other}` (box, bump, truncated_gaussian)"),
        )),
    }
}

/// The kernel block plus the hypothesis-test radius; the default radius
/// keeps the certified level `r` at the kernel plateau.
pub fn parse_kernel(raw: &RawConfig, grid: GridSpec) -> Result<(ConvKernel, f64), ConfigError> {
    let kind = parse_kernel_kind(raw)?;
    let r_sup = raw.f64_or("kernel.R_sup", 1.0)?;
    let height = raw.f64_or("kernel.height", 0.5)?;
    let kernel = make_standard_kernel(kind, r_sup, height, grid)
        .map_err(|e| raw.err("kernel.R_sup", e.to_string()))?;
    let default_r_test = match kind {
        KernelKind::Box => r_sup,
        KernelKind::Bump => 0.5 * r_sup,
        KernelKind::TruncatedGaussian => height.min(r_sup),
    };
    let r_test = raw.f64_or("kernel.R_test", default_r_test)?;
    if !(r_test > 0.0 && r_test <= r_sup) {
        return Err(raw.err(
            "kernel.R_test",
            format!("kernel.R_test = {r_test} must lie in (0, R_sup = {r_sup}]"),
        ));
    }
    // optional heat-scaling rescaling of the whole block
    if let Some(eps) = raw.get_f64("kernel.epsilon")? {
        let rescaled =
            rescale_kernel(&kernel, eps).map_err(|e| raw.err("kernel.epsilon", e.to_string()))?;
        return Ok((rescaled.kernel().clone(), eps * r_test));
    }
    Ok((kernel, r_test))
}

/// Initial-condition catalog: gaussian, bump, indicator_sum, from_file.
pub fn parse_init(raw: &RawConfig, grid: GridSpec, seed: u64) -> Result<Field, ConfigError> {
    let kind = raw.get("init.kind").unwrap_or("gaussian").to_string();
    let amp = raw.f64_or("init.amplitude", 1.0)?;
    let width = raw.f64_or("init.width", 1.0)?;
    let center = raw.f64_or("init.center", 0.0)?;
    if !(width > 0.0) {
        return Err(raw.err("init.width", "init.width must be positive".into()));
    }
    let dim = grid.dim();
    match kind.as_str() {
        "gaussian" => Field::from_fn(grid, |x| {
            let mut d2 = 0.0;
            for xa in x.iter().take(dim) {
                let d = xa - center;
                d2 += d * d;
            }
            amp * (-d2 / (width * width)).exp()
        })
        .map_err(|e| raw.err("init.kind", e.to_string())),
        "bump" => Field::from_fn(grid, |x| {
            let mut d2 = 0.0;
            for xa in x.iter().take(dim) {
                let d = xa - center;
                d2 += d * d;
            }
            let t2 = d2 / (width * width);
            if t2 < 1.0 {
                amp * (1.0 - 1.0 / (1.0 - t2)).exp() * 1.0f64.exp()
            } else {
                0.0
            }
        })
        .map_err(|e| raw.err("init.kind", e.to_string())),
        "indicator_sum" => {
            let count = raw.usize_or("init.count", 3)?.max(1);
            let mut rng = Rng::stream(seed, 0x1d1c);
            let reach = 0.5 * grid.half_width();
            let mut boxes = Vec::new();
            for _ in 0..count {
                let mut c = [0.0f64; 3];
                for slot in c.iter_mut().take(dim) {
                    *slot = rng.range(-reach, reach);
                }
                let e = rng.range(0.5, 1.5) * width;
                let a = rng.range(0.5, 1.5) * amp;
                boxes.push((c, e, a));
            }
            Field::from_fn(grid, |x| {
                let mut v = 0.0;
                for (c, e, a) in &boxes {
                    if (0..dim).all(|axis| (x[axis] - c[axis]).abs() <= *e) {
                        v += a;
                    }
                }
                v
            })
            .map_err(|e| raw.err("init.kind", e.to_string()))
        }
        "from_file" => {
            let path = raw.require("init.path")?;
            let field = crate::field_io::read_field(std::path::Path::new(path))
                .map_err(|e| raw.err("init.path", format!("cannot read `{path}`: {e}")))?;
            if field.grid() != grid {
                return Err(raw.err(
                    "init.path",
                    "field snapshot grid does not match the configured grid".into(),
                ));
            }
            Ok(field)
        }
        other => Err(raw.err(
            "init.kind",
            format!(
                "unknown initial condition `{other}` (gaussian, bump, indicator_sum, from_file)"
            ),
        )),
    }
}

/// Dispersal-distance profiles: constant, sinusoidal, piecewise.
pub fn parse_dispersal_g(raw: &RawConfig, grid: GridSpec) -> Result<Field, ConfigError> {
    let kind = raw.get("dispersal.g").unwrap_or("constant").to_string();
    let base = raw.f64_or("dispersal.g_base", 1.0)?;
    let l = grid.half_width();
    let field = match kind.as_str() {
        "constant" => Field::constant(grid, base),
        "sinusoidal" => {
            let amp = raw.f64_or("dispersal.g_amp", 0.3)?;
            let freq = raw.f64_or("dispersal.g_freq", 1.0)?;
            Field::from_fn(grid, |x| {
                base + amp * (freq * std::f64::consts::PI * x[0] / l).sin()
            })
        }
        "piecewise" => {
            let left = raw.f64_or("dispersal.g_left", 0.8)?;
            let right = raw.f64_or("dispersal.g_right", 1.2)?;
            let split = raw.f64_or("dispersal.g_split", 0.0)?;
            Field::from_fn(grid, |x| if x[0] < split { left } else { right })
        }
        other => {
            return Err(raw.err(
                "dispersal.g",
                format!("unknown g profile `{other}` (constant, sinusoidal, piecewise)"),
            ))
        }
    }
    .map_err(|e| raw.err("dispersal.g", e.to_string()))?;
    if field.values().iter().any(|v| *v <= 0.0) {
        return Err(raw.err(
            "dispersal.g",
            "dispersal distance g must be strictly positive".into(),
        ));
    }
    Ok(field)
}

pub fn parse_generator(
    raw: &RawConfig,
    grid: GridSpec,
    default_margin: f64,
    seed: u64,
) -> Result<FieldGenerator, ConfigError> {
    let kind = match raw.get("gen.kind").unwrap_or("gaussian_mixture") {
        "gaussian_mixture" => GeneratorKind::GaussianMixture,
        "random_fourier" => GeneratorKind::RandomFourier,
        "indicator_sum" => GeneratorKind::IndicatorSum,
        "signed_mixture" => GeneratorKind::SignedMixture,
        other => {
            return Err(raw.err(
                "gen.kind",
                format!(
                    "unknown generator `{other}` (gaussian_mixture, random_fourier, \
                     indicator_sum, signed_mixture)"
                ),
            ))
        }
    };
    let margin = raw.f64_or("gen.margin", default_margin)?;
    FieldGenerator::new(kind, grid, margin, seed).map_err(|e| raw.err("gen.margin", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let text = "\n# a comment\ngrid.dim = 1\ngrid.L = 8.0 # trailing\ngrid.n = 64\n";
        let raw = RawConfig::parse(text, "test.conf").unwrap();
        let grid = parse_grid(&raw).unwrap();
        assert_eq!(grid.dim(), 1);
        assert_eq!(grid.points_per_axis(), 64);
        raw.ensure_fully_consumed().unwrap();
    }

    #[test]
    fn reports_line_of_malformed_entry() {
        let text = "grid.dim = 1\nnot a key value\n";
        let err = RawConfig::parse(text, "bad.conf").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().contains("bad.conf:2"));
    }

    #[test]
    fn reports_duplicate_keys() {
        let text = "a = 1\na = 2\n";
        let err = RawConfig::parse(text, "dup.conf").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn reports_unknown_keys() {
        let text = "grid.dim = 1\ngrid.L = 8\ngrid.n = 64\ngrid.typo = 3\n";
        let raw = RawConfig::parse(text, "t.conf").unwrap();
        parse_grid(&raw).unwrap();
        let err = raw.ensure_fully_consumed().unwrap_err();
        assert!(err.message.contains("grid.typo"));
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn reports_bad_numbers_with_line() {
        let text = "grid.dim = 1\ngrid.L = eight\ngrid.n = 64\n";
        let raw = RawConfig::parse(text, "t.conf").unwrap();
        let err = parse_grid(&raw).unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn init_catalog_entries_exist() {
        let grid = GridSpec::new(1, 8.0, 64).unwrap();
        for kind in ["gaussian", "bump", "indicator_sum"] {
            let text = format!("init.kind = {kind}\n");
            let raw = RawConfig::parse(&text, "t.conf").unwrap();
            let field = parse_init(&raw, grid, 7).unwrap();
            assert!(field.max_abs() > 0.0);
        }
        let raw = RawConfig::parse("init.kind = vortex\n", "t.conf").unwrap();
        assert!(parse_init(&raw, grid, 7).is_err());
    }

    #[test]
    fn kernel_epsilon_rescales_the_block() {
        let text = "grid.dim = 1\ngrid.L = 8\ngrid.n = 256\nkernel.kind = box\n\
                    kernel.R_sup = 1\nkernel.height = 0.5\nkernel.epsilon = 0.5\n";
        let raw = RawConfig::parse(text, "t.conf").unwrap();
        let grid = parse_grid(&raw).unwrap();
        let (kernel, r_test) = parse_kernel(&raw, grid).unwrap();
        assert!((kernel.support_radius() - 0.5).abs() < 1e-12);
        assert!((r_test - 0.5).abs() < 1e-12);
        // amplitude carries the C(J)/eps^{N+2} factor
        let peak = kernel.profile().iter().fold(0.0f64, |a, b| a.max(*b));
        assert!(peak > 0.5);
    }

    #[test]
    fn g_profiles_positive() {
        let grid = GridSpec::new(1, 8.0, 64).unwrap();
        for text in [
            "dispersal.g = constant\n",
            "dispersal.g = sinusoidal\ndispersal.g_amp = 0.3\n",
            "dispersal.g = piecewise\n",
        ] {
            let raw = RawConfig::parse(text, "t.conf").unwrap();
            let g = parse_dispersal_g(&raw, grid).unwrap();
            assert!(g.values().iter().all(|v| *v > 0.0));
        }
        let raw = RawConfig::parse(
            "dispersal.g = sinusoidal\ndispersal.g_amp = 1.5\n",
            "t.conf",
        )
        .unwrap();
        assert!(parse_dispersal_g(&raw, grid).is_err());
    }
}
