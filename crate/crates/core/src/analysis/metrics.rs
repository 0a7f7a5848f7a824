use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-12;

/// `1 - a·b / (|a| |b|)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "cosine_distance",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    for n in [na, nb] {
        if n.is_nan() || n < MIN_NORM {
            return Err(Error::DegenerateVector(n));
        }
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {v} is not a probability")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits, so it lies in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape {
            op: "js_divergence",
            left: vec![p.len()],
            right: vec![q.len()],
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    // 0 log 0 = 0; m_i > 0 whenever p_i > 0 or q_i > 0
    let term = |x: f64, m: f64| if x > 0.0 { x * (x / m).log2() } else { 0.0 };
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        total += 0.5 * term(pi, m) + 0.5 * term(qi, m);
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Fraction of strictly negative entries.
pub fn fraction_negative(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v < 0.0).count() as f64 / values.len() as f64
}
