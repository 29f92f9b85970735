//! Scalar maximization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket width falls below `rel_tol * max(|x|, tiny)`.
pub fn golden_section_max<F, E>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<ScalarMax, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    while (b - a) > rel_tol * scale && evals < 500 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    Ok(ScalarMax {
        x,
        value,
        evaluations: evals,
    })
}

/// True when the sequence rises (weakly) to a single peak and then falls.
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        let rel = (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE);
        if rel > 1e-12 {
            if falling {
                return false;
            }
        } else if rel < -1e-12 {
            falling = true;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_peak() {
        let r = golden_section_max(|x| Ok::<_, Infallible>(-(x - 1.3) * (x - 1.3)), 0.0, 4.0, 1e-10).unwrap();
        assert!((r.x - 1.3).abs() < 1e-8);
    }

    #[test]
    fn boundary_peak() {
        let r = golden_section_max(Ok::<_, Infallible>, 0.0, 1.0, 1e-9).unwrap();
        assert!((r.x - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unimodality_check() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.0, 1.0]));
        assert!(is_unimodal(&[1.0, 1.0, 1.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 3.0]));
    }
}
