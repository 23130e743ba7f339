use std::collections::HashMap;

use crate::campaign::SystemRanking;
use crate::error::{Error, Result};

/// Kendall's tau-b between two paired samples:
/// `(C - D) / sqrt((n0 - n1) (n0 - n2))` where `n1`, `n2` count pairs tied
/// in `x` and in `y` respectively.
pub fn tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "tau-b needs paired samples, got lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined("tau-b needs at least two items".into()));
    }
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            if dx == 0 {
                ties_x += 1;
            }
            if dy == 0 {
                ties_y += 1;
            }
            match dx * dy {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if ties_x == n0 || ties_y == n0 {
        return Err(Error::Undefined(
            "tau-b is undefined when every item is tied in one ranking".into(),
        ));
    }
    let denom = (((n0 - ties_x) * (n0 - ties_y)) as f64).sqrt();
    Ok((concordant - discordant) as f64 / denom)
}

/// Tau-b between two rankings of the same systems.
pub fn kendall_tau(a: &SystemRanking, b: &SystemRanking) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "rankings cover different system sets ({} vs {} systems)",
            a.len(),
            b.len()
        )));
    }
    let b_ranks: HashMap<&str, f64> = b.entries.iter().map(|e| (e.system.as_str(), e.rank)).collect();
    let mut x = Vec::with_capacity(a.len());
    let mut y = Vec::with_capacity(a.len());
    for e in &a.entries {
        let r = b_ranks
            .get(e.system.as_str())
            .ok_or_else(|| Error::UnknownSystem(e.system.clone()))?;
        x.push(e.rank);
        y.push(*r);
    }
    tau_b(&x, &y)
}
