//! Plain `key = value` run configuration.
//!
//! ```text
//! # comment
//! [rnp]
//! P0_const = 0.5
//! c2 = 0.01
//! ```
//!
//! One section header, `[rnp]` or `[cho]`, selects the model. Unknown and
//! repeated keys are errors. [`render`] writes every key with its resolved
//! value in a form that parses back to the same configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cho::{ChoConfig, Forcing};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::PotentialParams;
use crate::reactions::ReactionCoeffs;
use crate::stepper::{default_tau, InitialData, PhaseInit, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Rnp(SolverConfig),
    Cho(ChoConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub model: ModelConfig,
    /// Source of a file-supplied CHO forcing, echoed by [`render`].
    pub forcing_file: Option<PathBuf>,
}

pub const RNP_KEYS: &[&str] = &[
    "nx",
    "ny",
    "lx",
    "ly",
    "c1",
    "c2",
    "c3",
    "c4",
    "chi12",
    "chi1S",
    "chi2S",
    "lambda",
    "variant",
    "eps",
    "A",
    "tau",
    "T_final",
    "newton_tol",
    "newton_max_iter",
    "output_every",
    "snapshot_every",
    "seed",
    "sources",
    "truncated",
    "P0_const",
    "P0_amp",
    "P0_noise",
    "phi_init",
    "phi_mean",
    "phi_amp",
    "probe_alpha",
];

pub const CHO_KEYS: &[&str] = &[
    "nx",
    "ny",
    "lx",
    "ly",
    "m",
    "c",
    "lambda",
    "tau",
    "T_final",
    "phi0_const",
    "phi0_amp",
    "phi0_noise",
    "theta",
    "forcing",
    "forcing_file",
    "eps",
    "A",
    "newton_tol",
    "newton_max_iter",
    "output_every",
    "snapshot_every",
    "seed",
];

const PHI_MEAN_DEFAULT: f64 = 0.2;
const PHI_AMP_DEFAULT: f64 = 0.05;

struct Entries {
    section_line: usize,
    values: HashMap<&'static str, (String, usize)>,
}

impl Entries {
    fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|e| Error::Config {
                line: *line,
                message: format!("cannot parse {key} = {v:?}: {e}"),
            }),
        }
    }

    fn get_opt(&self, key: &'static str) -> Option<(&str, usize)> {
        self.values.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    /// Attributes a validation failure to the last line setting a key the
    /// message mentions.
    fn locate(&self, err: Error) -> Error {
        let message = match err {
            Error::Validation(m) => m,
            Error::Domain(m) => m,
            other => return other,
        };
        let words: Vec<&str> = message
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .collect();
        let line = self
            .values
            .iter()
            .filter(|(k, _)| words.iter().any(|w| w.eq_ignore_ascii_case(k)))
            .map(|(_, (_, l))| *l)
            .max()
            .unwrap_or(self.section_line);
        Error::Config { line, message }
    }
}

fn lex(text: &str) -> Result<(String, Entries)> {
    let mut section: Option<(String, usize)> = None;
    let mut values: HashMap<&'static str, (String, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            if let Some((prev, l)) = &section {
                return Err(Error::Config {
                    line,
                    message: format!("second section [{name}]; [{prev}] already opened on line {l}"),
                });
            }
            if name != "rnp" && name != "cho" {
                return Err(Error::Config {
                    line,
                    message: format!("unknown section [{name}], expected [rnp] or [cho]"),
                });
            }
            section = Some((name.to_string(), line));
            continue;
        }
        let Some((sec, _)) = &section else {
            return Err(Error::Config {
                line,
                message: "key before any [rnp] or [cho] section header".into(),
            });
        };
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got {body:?}"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let allowed = if sec == "rnp" { RNP_KEYS } else { CHO_KEYS };
        let Some(&key) = allowed.iter().find(|k| **k == key) else {
            return Err(Error::Config {
                line,
                message: format!("unknown key {key:?} in [{sec}]"),
            });
        };
        if value.is_empty() {
            return Err(Error::Config {
                line,
                message: format!("missing value for {key}"),
            });
        }
        if let Some((_, first)) = values.get(key) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key {key} (lines {first} and {line})"),
            });
        }
        values.insert(key, (value.to_string(), line));
    }
    let Some((name, section_line)) = section else {
        return Err(Error::Config {
            line: 1,
            message: "missing [rnp] or [cho] section header".into(),
        });
    };
    Ok((
        name,
        Entries {
            section_line,
            values,
        },
    ))
}

fn grid_from(e: &Entries, default_n: usize) -> Result<Grid> {
    let nx = e.get("nx", default_n)?;
    let ny = e.get("ny", nx)?;
    let lx = e.get("lx", 1.0)?;
    let ly = e.get("ly", 1.0)?;
    Grid::new(nx, ny, lx, ly).map_err(|err| e.locate(err))
}

fn rnp_from(e: &Entries) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let grid = grid_from(e, d.grid.nx())?;
    let dp = PotentialParams::default();
    let di = InitialData::default();
    let phase = match e.get("phi_init", "zero".to_string())?.as_str() {
        "zero" => PhaseInit::Zero,
        "smooth_random" => PhaseInit::SmoothRandom {
            mean: e.get("phi_mean", PHI_MEAN_DEFAULT)?,
            amp: e.get("phi_amp", PHI_AMP_DEFAULT)?,
        },
        other => {
            let (_, line) = e.get_opt("phi_init").expect("phi_init was read");
            return Err(Error::Config {
                line,
                message: format!("phi_init must be zero or smooth_random, got {other:?}"),
            });
        }
    };
    let cfg = SolverConfig {
        grid,
        coeffs: ReactionCoeffs {
            c1: e.get("c1", d.coeffs.c1)?,
            c2: e.get("c2", d.coeffs.c2)?,
            c3: e.get("c3", d.coeffs.c3)?,
            c4: e.get("c4", d.coeffs.c4)?,
        },
        potential: PotentialParams {
            chi12: e.get("chi12", dp.chi12)?,
            chi1s: e.get("chi1S", dp.chi1s)?,
            chi2s: e.get("chi2S", dp.chi2s)?,
            lambda: e.get("lambda", dp.lambda)?,
            variant: e.get("variant", dp.variant)?,
            eps: e.get("eps", dp.eps)?,
            big_a: e.get("A", dp.big_a)?,
        },
        tau: e.get("tau", default_tau(&grid))?,
        t_final: e.get("T_final", d.t_final)?,
        newton_tol: e.get("newton_tol", d.newton_tol)?,
        newton_max_iter: e.get("newton_max_iter", d.newton_max_iter)?,
        output_every: e.get("output_every", d.output_every)?,
        snapshot_every: e.get("snapshot_every", d.snapshot_every)?,
        seed: e.get("seed", d.seed)?,
        sources_enabled: e.get("sources", d.sources_enabled)?,
        truncated: e.get("truncated", d.truncated)?,
        initial: InitialData {
            p0_const: e.get("P0_const", di.p0_const)?,
            p0_amp: e.get("P0_amp", di.p0_amp)?,
            p0_noise: e.get("P0_noise", di.p0_noise)?,
            phase,
        },
        probe_alpha: e.get("probe_alpha", d.probe_alpha)?,
    };
    cfg.validate().map_err(|err| e.locate(err))?;
    Ok(cfg)
}

/// Whitespace-separated values in row-major order (`x` fastest).
pub fn read_field_text(text: &str, grid: Grid) -> Result<Field> {
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|err| Error::Validation(format!("field value {t:?}: {err}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::new(grid, values)
}

fn cho_from(e: &Entries, base: Option<&Path>) -> Result<(ChoConfig, Option<PathBuf>)> {
    let d = ChoConfig::default();
    let grid = grid_from(e, d.grid.nx())?;
    let (forcing, file) = match (e.get_opt("forcing"), e.get_opt("forcing_file")) {
        (Some(_), Some((_, line))) => {
            return Err(Error::Config {
                line,
                message: "forcing and forcing_file are mutually exclusive".into(),
            })
        }
        (_, Some((path, line))) => {
            let path = PathBuf::from(path);
            let full = match base {
                Some(b) if path.is_relative() => b.join(&path),
                _ => path.clone(),
            };
            let text = std::fs::read_to_string(&full).map_err(|err| Error::io(&full, err))?;
            let field = read_field_text(&text, grid).map_err(|err| Error::Config {
                line,
                message: format!("{}: {err}", full.display()),
            })?;
            (Forcing::Field(field), Some(path))
        }
        _ => (Forcing::Constant(e.get("forcing", 0.0)?), None),
    };
    let cfg = ChoConfig {
        grid,
        m_rate: e.get("m", d.m_rate)?,
        c_oono: e.get("c", d.c_oono)?,
        lambda: e.get("lambda", d.lambda)?,
        tau: e.get("tau", d.tau)?,
        t_final: e.get("T_final", d.t_final)?,
        phi0_const: e.get("phi0_const", d.phi0_const)?,
        phi0_amp: e.get("phi0_amp", d.phi0_amp)?,
        phi0_noise: e.get("phi0_noise", d.phi0_noise)?,
        theta: e.get("theta", d.theta)?,
        forcing,
        eps: e.get("eps", d.eps)?,
        big_a: e.get("A", d.big_a)?,
        newton_tol: e.get("newton_tol", d.newton_tol)?,
        newton_max_iter: e.get("newton_max_iter", d.newton_max_iter)?,
        output_every: e.get("output_every", d.output_every)?,
        snapshot_every: e.get("snapshot_every", d.snapshot_every)?,
        seed: e.get("seed", d.seed)?,
    };
    cfg.validate().map_err(|err| e.locate(err))?;
    Ok((cfg, file))
}

/// Parses and validates a configuration. `base` resolves relative file
/// references such as `forcing_file`.
pub fn parse_config_at(text: &str, base: Option<&Path>) -> Result<ParsedConfig> {
    let (section, entries) = lex(text)?;
    if section == "rnp" {
        Ok(ParsedConfig {
            model: ModelConfig::Rnp(rnp_from(&entries)?),
            forcing_file: None,
        })
    } else {
        let (cfg, forcing_file) = cho_from(&entries, base)?;
        Ok(ParsedConfig {
            model: ModelConfig::Cho(cfg),
            forcing_file,
        })
    }
}

pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    parse_config_at(text, None)
}

pub fn load_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    parse_config_at(&text, path.parent())
}

struct Out(String);

impl Out {
    fn f(&mut self, key: &str, v: f64) {
        let _ = writeln!(self.0, "{key} = {v:?}");
    }

    fn s(&mut self, key: &str, v: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {v}");
    }
}

fn render_grid(out: &mut Out, g: &Grid) {
    out.s("nx", g.nx());
    out.s("ny", g.ny());
    out.f("lx", g.lx());
    out.f("ly", g.ly());
}

pub fn render_rnp(c: &SolverConfig) -> String {
    let mut out = Out("[rnp]\n".into());
    render_grid(&mut out, &c.grid);
    out.f("c1", c.coeffs.c1);
    out.f("c2", c.coeffs.c2);
    out.f("c3", c.coeffs.c3);
    out.f("c4", c.coeffs.c4);
    out.f("chi12", c.potential.chi12);
    out.f("chi1S", c.potential.chi1s);
    out.f("chi2S", c.potential.chi2s);
    out.f("lambda", c.potential.lambda);
    out.s("variant", c.potential.variant);
    out.f("eps", c.potential.eps);
    out.f("A", c.potential.big_a);
    out.f("tau", c.tau);
    out.f("T_final", c.t_final);
    out.f("newton_tol", c.newton_tol);
    out.s("newton_max_iter", c.newton_max_iter);
    out.s("output_every", c.output_every);
    out.s("snapshot_every", c.snapshot_every);
    out.s("seed", c.seed);
    out.s("sources", c.sources_enabled);
    out.s("truncated", c.truncated);
    out.f("P0_const", c.initial.p0_const);
    out.f("P0_amp", c.initial.p0_amp);
    out.f("P0_noise", c.initial.p0_noise);
    let (name, mean, amp) = match c.initial.phase {
        PhaseInit::Zero => ("zero", PHI_MEAN_DEFAULT, PHI_AMP_DEFAULT),
        PhaseInit::SmoothRandom { mean, amp } => ("smooth_random", mean, amp),
    };
    out.s("phi_init", name);
    out.f("phi_mean", mean);
    out.f("phi_amp", amp);
    out.f("probe_alpha", c.probe_alpha);
    out.0
}

/// `forcing_file` is written in place of `forcing` when given.
pub fn render_cho(c: &ChoConfig, forcing_file: Option<&Path>) -> String {
    let mut out = Out("[cho]\n".into());
    render_grid(&mut out, &c.grid);
    out.f("m", c.m_rate);
    out.f("c", c.c_oono);
    out.f("lambda", c.lambda);
    out.f("tau", c.tau);
    out.f("T_final", c.t_final);
    out.f("phi0_const", c.phi0_const);
    out.f("phi0_amp", c.phi0_amp);
    out.f("phi0_noise", c.phi0_noise);
    out.f("theta", c.theta);
    match (&c.forcing, forcing_file) {
        (_, Some(path)) => out.s("forcing_file", path.display()),
        (Forcing::Constant(v), None) => out.f("forcing", *v),
        (Forcing::Field(_), None) => out.s("# forcing", "<in-memory field>"),
    }
    out.f("eps", c.eps);
    out.f("A", c.big_a);
    out.f("newton_tol", c.newton_tol);
    out.s("newton_max_iter", c.newton_max_iter);
    out.s("output_every", c.output_every);
    out.s("snapshot_every", c.snapshot_every);
    out.s("seed", c.seed);
    out.0
}

pub fn render(parsed: &ParsedConfig) -> String {
    match &parsed.model {
        ModelConfig::Rnp(c) => render_rnp(c),
        ModelConfig::Cho(c) => render_cho(c, parsed.forcing_file.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Variant;

    fn config_line(err: Error) -> (usize, String) {
        match err {
            Error::Config { line, message } => (line, message),
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_section_gives_defaults() {
        let p = parse_config("[rnp]\nP0_const = 0.5\n").unwrap();
        assert_eq!(p.model, ModelConfig::Rnp(SolverConfig::default()));
    }

    #[test]
    fn condition_c_is_enforced() {
        let err = parse_config("[rnp]\n# rates\nc2 = 0.6\nc4 = 0.5\nc1 = 1\n").unwrap_err();
        let (line, msg) = config_line(err);
        assert_eq!(line, 5);
        assert!(msg.contains("1 <= 1.1"), "{msg}");
        // 0.61 < 1, so the inequality still holds with the default c4
        assert!(parse_config("[rnp]\nc2 = 0.6\n").is_ok());
        let (line, _) = config_line(parse_config("[rnp]\nc2 = 0\n").unwrap_err());
        assert_eq!(line, 2);
        assert!(msg.contains("c2 + c4"), "{msg}");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config("[rnp]\ntau = 1e-4\n\ntau = 2e-4\n").unwrap_err();
        let (line, msg) = config_line(err);
        assert_eq!(line, 4);
        assert!(msg.contains("lines 2 and 4"), "{msg}");
    }

    #[test]
    fn unknown_key_and_bad_value() {
        let (line, msg) = config_line(parse_config("[rnp]\nP0_cnst = 0.5\n").unwrap_err());
        assert_eq!(line, 2);
        assert!(msg.contains("P0_cnst"));
        let (line, msg) = config_line(parse_config("[cho]\nm = 1\nc = abc\n").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("abc"));
        let (line, _) = config_line(parse_config("[cho]\nm = 1\n[rnp]\n").unwrap_err());
        assert_eq!(line, 3);
        assert!(parse_config("tau = 1\n").is_err());
        assert!(parse_config("# nothing\n").is_err());
        assert!(parse_config("[rnp]\nvariant = other\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_config("# header\n\n[cho]   # model\n  m = 0.5 # rate\n").unwrap();
        let ModelConfig::Cho(c) = p.model else { panic!() };
        assert_eq!(c.m_rate, 0.5);
    }

    #[test]
    fn rendered_config_round_trips() {
        let cfg = SolverConfig {
            tau: 1.0 / 3.0 * 1e-4,
            seed: 17,
            initial: InitialData {
                p0_amp: 0.1,
                p0_noise: 0.02,
                phase: PhaseInit::SmoothRandom {
                    mean: 0.1,
                    amp: 0.01,
                },
                ..InitialData::default()
            },
            potential: PotentialParams {
                variant: Variant::Tilde,
                ..PotentialParams::default()
            },
            ..SolverConfig::default()
        };
        let text = render_rnp(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(back.model, ModelConfig::Rnp(cfg));
        for key in RNP_KEYS {
            assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
        }
        let cho = ChoConfig {
            c_oono: -0.1,
            ..ChoConfig::default()
        };
        let text = render_cho(&cho, None);
        assert_eq!(parse_config(&text).unwrap().model, ModelConfig::Cho(cho));
    }

    #[test]
    fn forcing_field_text() {
        let g = Grid::new(4, 4, 1.0, 1.0).unwrap();
        let text: String = (0..16).map(|k| format!("{}\n", k as f64 * 0.5)).collect();
        let f = read_field_text(&text, g).unwrap();
        assert_eq!(f.values()[3], 1.5);
        assert!(read_field_text("1 2 3", g).is_err());
        let bad = text.replacen("0.5", "NaN", 1);
        assert!(read_field_text(&bad, g).is_err());
    }
}
