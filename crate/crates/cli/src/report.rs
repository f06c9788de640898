//! CSV tables and the resolved-configuration sidecar.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use mshom_core::benchmarks::CellResult;

use crate::settings::guess_name;
use crate::CliError;

pub const CELL_HEADER: [&str; 14] = [
    "problem",
    "k",
    "alg",
    "diff",
    "eps",
    "dt",
    "tau",
    "M",
    "alpha",
    "Tc",
    "error",
    "micro_calls",
    "wall_ms",
    "status",
];

pub const RICCATI_HEADER: [&str; 5] = ["eps", "k", "normC_err", "d_err", "residual"];

/// Shortest text that parses back to exactly `v`; plain notation for
/// moderate magnitudes, exponent notation otherwise.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub struct RiccatiRow {
    pub epsilon: f64,
    pub k: usize,
    pub c_err: f64,
    pub d_err: f64,
    pub residual: f64,
}

/// Where tables go: a file with a `.config` sidecar, or stdout with the
/// configuration echoed to stderr.
pub struct Sink {
    writer: csv::Writer<Box<dyn Write>>,
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".config");
    PathBuf::from(s)
}

impl Sink {
    /// Opens the output (and writes the sidecar) before any compute so an
    /// unwritable path fails fast.
    pub fn open(output: Option<&Path>, config: &[(String, String)]) -> Result<Self, CliError> {
        let echo: String = config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let inner: Box<dyn Write> = match output {
            Some(path) => {
                let file = File::create(path).map_err(|e| CliError::Usage(format!("output {}: {e}", path.display())))?;
                let side = sidecar_path(path);
                std::fs::write(&side, &echo).map_err(|e| CliError::Usage(format!("output {}: {e}", side.display())))?;
                Box::new(io::BufWriter::new(file))
            }
            None => {
                for line in echo.lines() {
                    eprintln!("# {line}");
                }
                Box::new(io::stdout())
            }
        };
        Ok(Self {
            writer: csv::Writer::from_writer(inner),
        })
    }

    fn record<I, T>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Usage(format!("writing output: {e}")))
    }

    pub fn cells(&mut self, problem: &str, rows: &[CellResult]) -> Result<(), CliError> {
        self.record(CELL_HEADER)?;
        for r in rows {
            let c = &r.config;
            let m = &c.manifold;
            self.record([
                problem.to_string(),
                r.kind.label(),
                m.algorithm.name().to_string(),
                m.diff_scheme.name().to_string(),
                fmt_f64(c.epsilon),
                fmt_f64(c.dt_macro),
                fmt_f64(m.tau),
                m.micro.steps.to_string(),
                fmt_f64(m.micro.alpha),
                fmt_f64(r.t_c),
                fmt_f64(r.error),
                r.micro_calls.to_string(),
                fmt_f64(r.wall_ms),
                r.status.label().to_string(),
            ])?;
        }
        self.flush()
    }

    pub fn riccati(&mut self, rows: &[RiccatiRow]) -> Result<(), CliError> {
        self.record(RICCATI_HEADER)?;
        for r in rows {
            self.record([
                fmt_f64(r.epsilon),
                r.k.to_string(),
                fmt_f64(r.c_err),
                fmt_f64(r.d_err),
                fmt_f64(r.residual),
            ])?;
        }
        self.flush()
    }

    fn flush(&mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::Usage(format!("writing output: {e}")))
    }
}

/// `key=value` pairs describing a fully resolved run configuration; the
/// lines load back as a config file.
pub fn echo_driver(cfg: &mshom_core::DriverConfig) -> Vec<(String, String)> {
    let m = &cfg.manifold;
    [
        ("eps", fmt_f64(cfg.epsilon)),
        ("t_end", fmt_f64(cfg.t_end)),
        ("dt_c", fmt_f64(cfg.dt_coupled)),
        ("dt", fmt_f64(cfg.dt_macro)),
        ("n_p", cfg.n_p.to_string()),
        ("criterion_order", cfg.criterion_order.to_string()),
        ("alg", m.algorithm.name().to_string()),
        ("diff", m.diff_scheme.name().to_string()),
        ("tau", fmt_f64(m.tau)),
        ("M", m.micro.steps.to_string()),
        ("alpha", fmt_f64(m.micro.alpha)),
        ("initial_guess", guess_name(m.micro.initial_guess).to_string()),
        ("warm_start", cfg.warm_start.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(1e-5), "1e-5");
        assert_eq!(fmt_f64(0.01), "0.01");
        assert_eq!(fmt_f64(4.0), "4");
        assert_eq!(fmt_f64(1.2170e-9), "1.217e-9");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(0.0), "0");
    }

    proptest! {
        #[test]
        fn floats_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn log_grids_round_trip(lo in -12.0f64..0.0, span in 1.0f64..6.0, n in 2usize..20) {
            for v in mshom_core::convergence::log_space(10f64.powf(lo), 10f64.powf(lo + span), n) {
                prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
            }
        }
    }
}
