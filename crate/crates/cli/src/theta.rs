//! Instance specifications on the command line.

use anyhow::{bail, Context, Result};
use teach_core::{ConceptParams, TeachingInstance};

pub const APPENDIX_TOY: &str = "appendix-toy";
pub const APPENDIX_TOY_N: usize = 3;
pub const APPENDIX_TOY_T: usize = 15;

/// The three-concept toy instance with one easy, one middling and one hard concept.
pub fn appendix_toy() -> Vec<ConceptParams> {
    vec![
        ConceptParams::new(2.5, 2.5, 1.26).expect("valid triple"),
        ConceptParams::new(1.0, 1.0, -1.0).expect("valid triple"),
        ConceptParams::new(0.08, 0.08, -0.88).expect("valid triple"),
    ]
}

fn parse_triple(text: &str) -> Result<ConceptParams> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("theta {text:?} is not a,b,c"))?;
    let [a, b, c] = values[..] else {
        bail!("theta {text:?} needs exactly three numbers");
    };
    Ok(ConceptParams::new(a, b, c)?)
}

/// Builds an instance from `--n`, `--T` and `--theta`, filling gaps from the toy instance.
pub fn instance(
    n: Option<usize>,
    horizon: Option<usize>,
    theta: Option<&str>,
) -> Result<TeachingInstance> {
    let theta = theta.unwrap_or(APPENDIX_TOY);
    let params = if theta == APPENDIX_TOY {
        if n.is_some_and(|n| n != APPENDIX_TOY_N) {
            bail!("{APPENDIX_TOY} has n = {APPENDIX_TOY_N}");
        }
        appendix_toy()
    } else if theta.contains(';') {
        let params: Vec<ConceptParams> =
            theta.split(';').map(parse_triple).collect::<Result<_>>()?;
        if n.is_some_and(|n| n != params.len()) {
            bail!(
                "{} theta triples for n = {}",
                params.len(),
                n.unwrap_or_default()
            );
        }
        params
    } else {
        let n = n.context("--n is required with a single theta triple")?;
        vec![parse_triple(theta)?; n]
    };
    let horizon = horizon.unwrap_or(APPENDIX_TOY_T);
    Ok(TeachingInstance::new(horizon, params)?)
}
