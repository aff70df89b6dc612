//! Plain-text `key = value` configuration documents.
//!
//! Network keys: `C_ee C_ei C_ie C_ii tau_e tau_i n` and `f_<ch>.a/.b/.c` for each
//! channel (`x ↦ a·(tanh(c·x) + b)`). Run keys are optional and may be overridden
//! on the command line: `k_e k_i T h dt seed record_stride method`.
//! Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ChannelId, FiringRate, NetworkParams};

pub const REFERENCE_PRESET: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets/paper_sec6.cfg"));

/// Optional run settings carried alongside the network parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSettings {
    pub k_e: Option<f64>,
    pub k_i: Option<f64>,
    pub horizon: Option<f64>,
    pub limit_step: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub record_stride: Option<f64>,
    pub method: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub params: NetworkParams,
    pub run: RunSettings,
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), (line_no, v.trim().to_string())).is_some() {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }

        let mut take = |key: &str| kv.remove(key);
        let num = |key: &str, entry: Option<(usize, String)>| -> Result<Option<f64>> {
            entry
                .map(|(line, v)| {
                    v.parse::<f64>().map_err(|_| Error::Config {
                        line,
                        msg: format!("`{key}`: not a number: `{v}`"),
                    })
                })
                .transpose()
        };
        let required = |key: &str, v: Option<f64>| -> Result<f64> {
            v.ok_or_else(|| Error::Config {
                line: 0,
                msg: format!("missing required key `{key}`"),
            })
        };

        let mut coupling = [0.0; 4];
        for ch in ChannelId::ALL {
            let key = format!("C_{ch}");
            coupling[ch.index()] = required(&key, num(&key, take(&key))?)?;
        }
        let tau_e = required("tau_e", num("tau_e", take("tau_e"))?)?;
        let tau_i = required("tau_i", num("tau_i", take("tau_i"))?)?;
        let n = match take("n") {
            Some((line, v)) => v.parse::<usize>().map_err(|_| Error::Config {
                line,
                msg: format!("`n`: not a positive integer: `{v}`"),
            })?,
            None => {
                return Err(Error::Config {
                    line: 0,
                    msg: "missing required key `n`".into(),
                })
            }
        };
        let mut rates: Vec<FiringRate> = Vec::with_capacity(4);
        for ch in ChannelId::ALL {
            let mut field = |c: char| -> Result<f64> {
                let key = format!("f_{ch}.{c}");
                required(&key, num(&key, take(&key))?)
            };
            let a = field('a')?;
            let b = field('b')?;
            let c = field('c')?;
            rates.push(FiringRate::tanh_affine(a, b, c));
        }
        let rates: [FiringRate; 4] = rates.try_into().expect("four channels");

        let run = RunSettings {
            k_e: num("k_e", take("k_e"))?,
            k_i: num("k_i", take("k_i"))?,
            horizon: num("T", take("T"))?,
            limit_step: num("h", take("h"))?,
            dt: num("dt", take("dt"))?,
            seed: match take("seed") {
                Some((line, v)) => Some(v.parse::<u64>().map_err(|_| Error::Config {
                    line,
                    msg: format!("`seed`: not an unsigned integer: `{v}`"),
                })?),
                None => None,
            },
            record_stride: num("record_stride", take("record_stride"))?,
            method: take("method").map(|(_, v)| v),
        };

        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(Error::Config {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }

        let params = NetworkParams::new(coupling, tau_e, tau_i, n, rates)?;
        Ok(Config { params, run })
    }
}

/// Serializes network parameters in the format read by [`Config::parse`].
/// Fails for custom firing rates, which have no textual form.
pub fn params_to_string(p: &NetworkParams) -> Result<String> {
    let mut out = String::new();
    for ch in ChannelId::ALL {
        writeln!(out, "C_{ch} = {}", p.coupling(ch)).unwrap();
    }
    writeln!(out, "tau_e = {}", p.tau_e).unwrap();
    writeln!(out, "tau_i = {}", p.tau_i).unwrap();
    writeln!(out, "n = {}", p.n).unwrap();
    for ch in ChannelId::ALL {
        match p.rate(ch) {
            FiringRate::TanhAffine { scale, offset, gain } => {
                writeln!(out, "f_{ch}.a = {scale}").unwrap();
                writeln!(out, "f_{ch}.b = {offset}").unwrap();
                writeln!(out, "f_{ch}.c = {gain}").unwrap();
            }
            FiringRate::Custom(_) => {
                return Err(Error::InvalidParameter(format!(
                    "f_{ch} is a custom rate and cannot be written to a config file"
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let cfg = Config::parse(REFERENCE_PRESET).unwrap();
        let p = &cfg.params;
        assert_eq!(p.coupling, [1.0, 1.5, 0.5, 0.5]);
        assert_eq!((p.tau_e, p.tau_i, p.n), (1.0, 1.0, 5000));
        assert_eq!(p.rate(ChannelId::EE).eval(0.0), 1.0);
        assert_eq!(p.rate(ChannelId::II).eval(0.0), 1.0);
        assert_eq!(cfg.run, RunSettings::default());
    }

    #[test]
    fn round_trip() {
        let p = NetworkParams::reference_preset();
        let text = params_to_string(&p).unwrap();
        let q = Config::parse(&text).unwrap().params;
        assert_eq!(p.coupling, q.coupling);
        for ch in ChannelId::ALL {
            for x in [-2.0, 0.0, 0.3] {
                assert_eq!(p.rate(ch).eval(x), q.rate(ch).eval(x));
            }
        }
    }

    #[test]
    fn run_settings_and_errors() {
        let mut text = params_to_string(&NetworkParams::reference_preset()).unwrap();
        text.push_str("k_e = 1\nk_i = 0.5 # comment\nT = 10\nseed = 42\nmethod = fixed\n");
        let cfg = Config::parse(&text).unwrap();
        assert_eq!(cfg.run.k_i, Some(0.5));
        assert_eq!(cfg.run.seed, Some(42));
        assert_eq!(cfg.run.method.as_deref(), Some("fixed"));

        assert!(matches!(Config::parse(&format!("{text}bogus = 1\n")), Err(Error::Config { .. })));
        assert!(matches!(Config::parse(&format!("{text}k_e = 2\n")), Err(Error::Config { .. })));
        assert!(matches!(Config::parse("C_ee = x\n"), Err(Error::Config { line: 1, .. })));
        assert!(Config::parse("C_ee = 1\n").is_err());
    }
}
