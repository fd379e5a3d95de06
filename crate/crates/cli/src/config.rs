//! Settings resolution: flags, then the config file, then defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qfhe_core::{Error, Preset, Result};

/// Values a run may take from a flag or from the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub sigma: Option<u32>,
    pub seed: Option<String>,
    pub p: Option<f64>,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub nodes: Option<usize>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub preset: Preset,
    pub sigma: u32,
    pub seed: String,
    pub p: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub nodes: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(Error::InvalidParams(format!("unknown format {other:?}"))),
        }
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Overrides> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
        kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    let mut o = Overrides::default();
    for (k, (line, v)) in kv {
        let bad = |what: &str| Error::Parse { line, msg: format!("{k}: {what} {v:?}") };
        match k.as_str() {
            "preset" => o.preset = Some(v),
            "sigma" => o.sigma = Some(v.parse().map_err(|_| bad("not an integer"))?),
            "seed" => o.seed = Some(v),
            "p" => o.p = Some(v.parse().map_err(|_| bad("not a number"))?),
            "theta" => o.theta = Some(v.parse().map_err(|_| bad("not a number"))?),
            "epsilon" => o.epsilon = Some(v.parse().map_err(|_| bad("not a number"))?),
            "tau" => o.tau = Some(v.parse().map_err(|_| bad("not a number"))?),
            "nodes" => o.nodes = Some(v.parse().map_err(|_| bad("not an integer"))?),
            "format" => o.format = Some(v),
            "out" => o.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Parse { line, msg: format!("unknown key {k:?}") }),
        }
    }
    Ok(o)
}

pub fn load_config(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub const CLI_PRESETS: [&str; 3] = ["toy", "teleport", "wide"];

/// `default_preset` is the command's own default when neither source names one.
pub fn resolve(flags: &Overrides, file: &Overrides, default_preset: &str) -> Result<Settings> {
    macro_rules! pick {
        ($f:ident, $d:expr) => {
            flags.$f.clone().or_else(|| file.$f.clone()).unwrap_or($d)
        };
    }
    let preset_name = pick!(preset, default_preset.to_string());
    // `tiny` exists for scheduler tests only.
    if !CLI_PRESETS.contains(&preset_name.as_str()) {
        return Err(Error::InvalidParams(format!("unknown preset {preset_name:?}; choose one of {CLI_PRESETS:?}")));
    }
    let sigma = pick!(sigma, qfhe_core::params::DEFAULT_SIGMA);
    if sigma == 0 {
        return Err(Error::InvalidParams("sigma must be positive".into()));
    }
    let p = pick!(p, 0.75);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p = {p} must lie in [0, 1]")));
    }
    Ok(Settings {
        preset: Preset::by_name(&preset_name)?.with_sigma(sigma),
        sigma,
        seed: pick!(seed, "00".to_string()),
        p,
        theta: pick!(theta, 0.1),
        epsilon: pick!(epsilon, 1e-3),
        tau: pick!(tau, 0.5),
        nodes: pick!(nodes, 3),
        format: Format::parse(&pick!(format, "text".to_string()))?,
        out: flags.out.clone().or_else(|| file.out.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = parse_config("# run settings\nsigma = 4\nseed=ab\npreset = teleport\n").unwrap();
        let flags = Overrides { sigma: Some(5), ..Default::default() };
        let s = resolve(&flags, &file, "toy").unwrap();
        assert_eq!(s.sigma, 5);
        assert_eq!(s.seed, "ab");
        assert_eq!(s.preset.name, "teleport");
        assert_eq!(s.preset.sigma, 5);
        assert_eq!(s.theta, 0.1);
        let s = resolve(&Overrides::default(), &Overrides::default(), "toy").unwrap();
        assert_eq!((s.preset.name.as_str(), s.sigma, s.format), ("toy", 3, Format::Text));
    }

    #[test]
    fn bad_config_lines_are_reported() {
        assert!(matches!(parse_config("sigma 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("\nnodes = many"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_config("colour = red").is_err());
        let tiny = Overrides { preset: Some("tiny".into()), ..Default::default() };
        assert!(resolve(&tiny, &Overrides::default(), "toy").is_err());
    }
}
