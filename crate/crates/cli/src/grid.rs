//! Grid arguments: `a..b` (inclusive), `a..b:step` or `a,b,c`.

use anyhow::{bail, Context, Result};

pub fn parse_usize_grid(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if let Some((range, step)) = spec.split_once("..") {
        let (end, step) = match step.split_once(':') {
            Some((end, step)) => (end, step.trim().parse::<usize>().context("grid step")?),
            None => (step, 1),
        };
        let start: usize = range.trim().parse().context("grid start")?;
        let end: usize = end.trim().parse().context("grid end")?;
        if step == 0 {
            bail!("grid step must be positive");
        }
        if end < start {
            bail!("grid `{spec}` is empty");
        }
        return Ok((start..=end).step_by(step).collect());
    }
    let values = spec
        .split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("grid value `{v}`")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("grid `{spec}` is empty");
    }
    Ok(values)
}

/// `R0,error0`.
pub fn parse_anchor(spec: &str) -> Result<(f64, f64)> {
    let (r, e) = spec.split_once(',').context("anchor must be `R0,error0`")?;
    Ok((r.trim().parse().context("anchor R0")?, e.trim().parse().context("anchor error")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_usize_grid("1..4").unwrap(), [1, 2, 3, 4]);
        assert_eq!(parse_usize_grid("10..40:10").unwrap(), [10, 20, 30, 40]);
        assert_eq!(parse_usize_grid("10..45:10").unwrap(), [10, 20, 30, 40]);
        assert_eq!(parse_usize_grid("3, 1,2").unwrap(), [3, 1, 2]);
        assert_eq!(parse_usize_grid("7").unwrap(), [7]);
        assert!(parse_usize_grid("4..1").is_err());
        assert!(parse_usize_grid("1..4:0").is_err());
        assert!(parse_usize_grid("a").is_err());
        assert_eq!(parse_anchor("20, 0.1").unwrap(), (20.0, 0.1));
        assert!(parse_anchor("20").is_err());
    }
}
