//! Value lists on the command line: `1e-3`, `1e-3,1e-2,0.1`,
//! `1e-4:1e-2:log8` (log-spaced, endpoints included) and `0.1:1:lin10`.

use mshom_core::convergence::log_space;
use mshom_core::SolverKind;

use crate::CliError;

pub fn parse_grid(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let raw = raw.trim();
    let bad = |what: &str| CliError::Usage(format!("{key}: {what} in '{raw}'"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("'{}' is not a number", s.trim())));
    if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').collect();
        let [lo, hi, spec] = parts[..] else {
            return Err(bad("range must look like lo:hi:logN or lo:hi:linN"));
        };
        let (lo, hi) = (number(lo)?, number(hi)?);
        let spec = spec.trim();
        let (log, count) = if let Some(n) = spec.strip_prefix("log") {
            (true, n)
        } else if let Some(n) = spec.strip_prefix("lin") {
            (false, n)
        } else {
            return Err(bad("range spacing must be logN or linN"));
        };
        let n: usize = count.parse().map_err(|_| bad("point count is not an integer"))?;
        if log {
            if !(lo > 0.0 && hi > 0.0) {
                return Err(bad("log range needs positive endpoints"));
            }
            return Ok(log_space(lo, hi, n));
        }
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    raw.split(',').map(number).collect()
}

pub fn parse_kinds(key: &str, raw: &str) -> Result<Vec<SolverKind>, CliError> {
    raw.split(',')
        .map(|item| match item.trim() {
            "coupled" => Ok(SolverKind::Coupled),
            s => s
                .parse::<usize>()
                .map(SolverKind::Hmm)
                .map_err(|_| CliError::Usage(format!("{key}: expected 'coupled' or an order, got '{s}'"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse_grid("eps", "1e-3").unwrap(), vec![1e-3]);
        assert_eq!(parse_grid("eps", "1e-3, 2e-3").unwrap(), vec![1e-3, 2e-3]);
        let g = parse_grid("eps", "1e-4:1e-2:log8").unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!((g[0], g[7]), (1e-4, 1e-2));
        assert_eq!(parse_grid("dt", "0:1:lin5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_grid("eps", "1e-3:1e-2:log0").unwrap().is_empty());
    }

    #[test]
    fn malformed() {
        for raw in ["abc", "1:2", "1:2:geo3", "1:2:logx", "0:1:log3", "1,,2"] {
            let e = parse_grid("tau", raw).unwrap_err().to_string();
            assert!(e.starts_with("tau:"), "{raw}: {e}");
        }
    }

    #[test]
    fn kinds() {
        assert_eq!(
            parse_kinds("k", "coupled,0,2").unwrap(),
            vec![SolverKind::Coupled, SolverKind::Hmm(0), SolverKind::Hmm(2)]
        );
        assert!(parse_kinds("k", "two").is_err());
    }
}
